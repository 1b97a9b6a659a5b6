"""Small planar geometry helpers used throughout the package.

Coordinate conventions (frozen for the whole package):

- x points east, y points north, z points up; units are meters.
- Yaw and bearings are measured counterclockwise, with 0 = facing +y
  (north).  A bearing ``b`` corresponds to the horizontal unit vector
  ``(-sin b, cos b)``, so "hard right" of a listener at yaw ``psi`` is
  bearing ``psi - pi/2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def unit(v: np.ndarray) -> np.ndarray:
    """Normalize a vector; raises on zero length."""
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return np.asarray(v, dtype=float) / n


def bearing_to_dir(bearing: float) -> np.ndarray:
    """Horizontal unit vector for a bearing (0 = north, CCW positive)."""
    return np.array([-np.sin(bearing), np.cos(bearing)])


def dir_to_bearing(d) -> float:
    """Inverse of :func:`bearing_to_dir` (ignores any z component)."""
    d = np.asarray(d, dtype=float)
    return float(np.arctan2(-d[0], d[1]))


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = (a + np.pi) % (2.0 * np.pi) - np.pi
    return np.pi if w == -np.pi else float(w)


def rot2d(theta: float) -> np.ndarray:
    """2x2 counterclockwise rotation matrix."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, used for the walkable area and analysis grids."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate rectangle: {self}")

    @classmethod
    def square(cls, side: float, center=(0.0, 0.0)) -> "Rect":
        h = side / 2.0
        return cls(center[0] - h, center[0] + h, center[1] - h, center[1] + h)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0])

    def contains(self, p, strict: bool = False) -> bool:
        x, y = float(p[0]), float(p[1])
        if strict:
            return self.xmin < x < self.xmax and self.ymin < y < self.ymax
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def clamp(self, p) -> np.ndarray:
        """Project a 2D point onto the rectangle."""
        return np.array(
            [
                min(max(float(p[0]), self.xmin), self.xmax),
                min(max(float(p[1]), self.ymin), self.ymax),
            ]
        )

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform random point inside the rectangle."""
        return np.array(
            [rng.uniform(self.xmin, self.xmax), rng.uniform(self.ymin, self.ymax)]
        )


def ray_exit_point(origin: np.ndarray, direction: np.ndarray, rect: Rect) -> np.ndarray:
    """Where a ray starting inside ``rect`` crosses its boundary.

    ``direction`` need not be normalized; the origin must lie inside.
    """
    origin = np.asarray(origin, dtype=float)[:2]
    d = np.asarray(direction, dtype=float)[:2]
    if np.allclose(d, 0.0):
        raise ValueError("ray direction is zero")
    ts = []
    for axis, (lo, hi) in enumerate([(rect.xmin, rect.xmax), (rect.ymin, rect.ymax)]):
        if d[axis] > 0:
            ts.append((hi - origin[axis]) / d[axis])
        elif d[axis] < 0:
            ts.append((lo - origin[axis]) / d[axis])
    t = min(t for t in ts if t >= 0.0)
    return origin + t * d


def yaw_quaternion(yaw: float) -> np.ndarray:
    """Quaternion (w, x, y, z) for a rotation of ``yaw`` about +z."""
    return np.array([np.cos(yaw / 2.0), 0.0, 0.0, np.sin(yaw / 2.0)])
