"""Wave field synthesis for a square loudspeaker array.

Synthesizes monochromatic sound fields from per-speaker delay/gain sets,
covering exterior sources (delay-and-attenuate driving of the sides the
wavefront crosses) and focused sources inside the array (time-reversal
driving of a single rendering side).  Evaluation is always at a single
frequency; broadband behavior reduces to per-frequency calls.

All functions are pure; the speed of sound is fixed at 343 m/s.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import (
    ConfigurationError,
    DegenerateInputError,
    GeometryError,
    NoValidZoneError,
    SingularityError,
)
from .geometry import Rect, unit

SPEED_OF_SOUND = 343.0  # m/s
SPEAKER_SINGULARITY_RADIUS = 1e-3  # m
DEFAULT_HALF_APERTURE = np.pi / 3.0  # 60 degrees
DEFAULT_TAPER_ALPHA = 0.3  # fraction of each active side inside the cosine edges


class SourceKind(enum.Enum):
    EXTERIOR = "exterior"
    FOCUSED = "focused"


class RenderMode(enum.Enum):
    STATIC = "static"
    USER_DEPENDENT = "user_dependent"


@dataclass(frozen=True)
class Speaker:
    position: np.ndarray  # (3,)
    inward_normal: np.ndarray  # (3,) unit vector toward the array center
    side_id: int  # 0 = north, 1 = east, 2 = south, 3 = west
    index_on_side: int


@dataclass(frozen=True)
class SpeakerArray:
    speakers: tuple[Speaker, ...]
    side_length: float
    height: float
    center: np.ndarray  # (3,)
    positions: np.ndarray = field(repr=False, default=None)  # (N, 3) cache
    normals: np.ndarray = field(repr=False, default=None)  # (N, 3) cache

    def __len__(self) -> int:
        return len(self.speakers)

    @property
    def speakers_per_side(self) -> int:
        return len(self.speakers) // 4

    @property
    def footprint(self) -> Rect:
        return Rect.square(self.side_length, center=self.center[:2])

    def side_indices(self, side_id: int) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.speakers) if s.side_id == side_id])

    def side_midpoint(self, side_id: int) -> np.ndarray:
        offs = _SIDE_OFFSETS[side_id] * (self.side_length / 2.0)
        return np.array(
            [self.center[0] + offs[0], self.center[1] + offs[1], self.height]
        )


@dataclass(frozen=True)
class VirtualSource:
    position: np.ndarray  # (3,)
    kind: SourceKind


@dataclass(frozen=True)
class DrivingSet:
    """Per-speaker activation, delay and gain realizing one wavefront."""

    active: np.ndarray  # (N,) bool
    delays: np.ndarray  # (N,) seconds, >= 0
    gains: np.ndarray  # (N,) dimensionless, zero where inactive
    reference_point: np.ndarray  # (3,) point where the amplitude is anchored

    def scaled(self, factor: float) -> "DrivingSet":
        return DrivingSet(self.active, self.delays, self.gains * factor, self.reference_point)


@dataclass(frozen=True)
class FieldSample:
    point: np.ndarray
    pressure: complex


@dataclass(frozen=True)
class ValidZone:
    """Cone of listener positions for which a focused source is coherent.

    The cone opens from the focus point along ``direction`` (away from the
    rendering sub-array); the apex itself is outside.
    """

    apex: np.ndarray  # (3,) focus position
    direction: np.ndarray  # (2,) horizontal unit vector
    half_aperture: float  # radians, in (0, pi/2]

    def __post_init__(self):
        if not 0.0 < self.half_aperture <= np.pi / 2.0:
            raise ValueError(f"half_aperture out of range: {self.half_aperture}")

    def contains(self, point) -> bool:
        q = np.asarray(point, dtype=float)[:2] - self.apex[:2]
        proj = float(q @ self.direction)
        if proj <= 0.0:
            return False
        angle = np.arccos(np.clip(proj / np.linalg.norm(q), -1.0, 1.0))
        return angle <= self.half_aperture


# side layout: (midpoint offset direction, tangent, inward normal)
_SIDE_OFFSETS = {
    0: np.array([0.0, 1.0]),  # north
    1: np.array([1.0, 0.0]),  # east
    2: np.array([0.0, -1.0]),  # south
    3: np.array([-1.0, 0.0]),  # west
}
_SIDE_TANGENTS = {
    0: np.array([1.0, 0.0, 0.0]),
    1: np.array([0.0, 1.0, 0.0]),
    2: np.array([1.0, 0.0, 0.0]),
    3: np.array([0.0, 1.0, 0.0]),
}
_SIDE_NORMALS = {
    0: np.array([0.0, -1.0, 0.0]),
    1: np.array([-1.0, 0.0, 0.0]),
    2: np.array([0.0, 1.0, 0.0]),
    3: np.array([1.0, 0.0, 0.0]),
}
OPPOSITE_SIDE = {0: 2, 1: 3, 2: 0, 3: 1}


def build_square_array(
    side_length: float,
    speakers_per_side: int,
    height: float,
    center=(0.0, 0.0, 0.0),
) -> SpeakerArray:
    """Four evenly spaced linear arrays bounding a square of ``side_length``.

    Speaker i on a side sits at offset ``(i + 0.5) * spacing - side_length/2``
    along the side, with ``spacing = side_length / speakers_per_side``; the
    inward normals point toward the center.
    """
    if side_length <= 0.0:
        raise ValueError(f"side_length must be positive, got {side_length}")
    if speakers_per_side < 2:
        raise ValueError(f"need at least 2 speakers per side, got {speakers_per_side}")
    center = np.asarray(center, dtype=float)
    spacing = side_length / speakers_per_side
    speakers = []
    for side_id in range(4):
        mid = np.array(
            [
                center[0] + _SIDE_OFFSETS[side_id][0] * side_length / 2.0,
                center[1] + _SIDE_OFFSETS[side_id][1] * side_length / 2.0,
                height,
            ]
        )
        tangent = _SIDE_TANGENTS[side_id]
        normal = _SIDE_NORMALS[side_id]
        for i in range(speakers_per_side):
            offset = (i + 0.5) * spacing - side_length / 2.0
            speakers.append(
                Speaker(
                    position=mid + offset * tangent,
                    inward_normal=normal.copy(),
                    side_id=side_id,
                    index_on_side=i,
                )
            )
    positions = np.array([s.position for s in speakers])
    normals = np.array([s.inward_normal for s in speakers])
    return SpeakerArray(
        speakers=tuple(speakers),
        side_length=side_length,
        height=height,
        center=center,
        positions=positions,
        normals=normals,
    )


def classify_source(source_position, array: SpeakerArray) -> VirtualSource:
    """Focused iff the horizontal projection is strictly inside the square.

    Points exactly on a side line count as exterior, which keeps focused
    sources off the array line itself.
    """
    pos = np.asarray(source_position, dtype=float)
    kind = (
        SourceKind.FOCUSED
        if array.footprint.contains(pos, strict=True)
        else SourceKind.EXTERIOR
    )
    return VirtualSource(position=pos, kind=kind)


@lru_cache(maxsize=32)
def _edge_taper(n: int, alpha: float) -> np.ndarray:
    """Half-cosine (Tukey) window over a side's n speakers.

    ``alpha`` is the total fraction of the side inside the cosine ramps
    (alpha/2 at each end); alpha = 0 is rectangular.
    """
    if alpha <= 0.0:
        return np.ones(n)
    x = (np.arange(n) + 0.5) / n  # fractional position in (0, 1)
    w = np.ones(n)
    ramp = alpha / 2.0
    lo = x < ramp
    hi = x > 1.0 - ramp
    w[lo] = 0.5 * (1.0 - np.cos(np.pi * x[lo] / ramp))
    w[hi] = 0.5 * (1.0 - np.cos(np.pi * (1.0 - x[hi]) / ramp))
    return w


def _exterior_driving(source: VirtualSource, array: SpeakerArray, taper_alpha: float) -> DrivingSet:
    n = len(array)
    diff = array.positions - source.position  # speaker - source
    dist = np.linalg.norm(diff, axis=1)
    prop_dir = diff / dist[:, None]
    cos_theta = np.einsum("ij,ij->i", prop_dir, array.normals)
    active = cos_theta > 0.0
    if not active.any():
        raise GeometryError("no speaker faces away from the source (empty active set)")
    delays = np.where(active, dist / SPEED_OF_SOUND, 0.0)
    gains = np.zeros(n)
    gains[active] = cos_theta[active] / np.sqrt(dist[active])
    for side_id in range(4):
        idx = array.side_indices(side_id)
        if active[idx].any():
            gains[idx] *= _edge_taper(len(idx), taper_alpha)
    return DrivingSet(active=active, delays=delays, gains=gains, reference_point=array.center.copy())


def _focused_driving(
    source: VirtualSource, array: SpeakerArray, side_id: int, taper_alpha: float
) -> DrivingSet:
    n = len(array)
    idx = array.side_indices(side_id)
    active = np.zeros(n, dtype=bool)
    active[idx] = True
    diff = source.position - array.positions[idx]  # toward the focus
    dist = np.linalg.norm(diff, axis=1)
    if np.any(dist < SPEAKER_SINGULARITY_RADIUS):
        raise SingularityError("focused source coincides with a speaker")
    cos_theta = np.einsum("ij,ij->i", diff / dist[:, None], array.normals[idx])
    delays = np.zeros(n)
    delays[idx] = (dist.max() - dist) / SPEED_OF_SOUND  # farthest speaker fires first
    gains = np.zeros(n)
    gains[idx] = cos_theta / np.sqrt(dist) * _edge_taper(len(idx), taper_alpha)
    return DrivingSet(active=active, delays=delays, gains=gains, reference_point=array.center.copy())


def driving_functions(
    source: VirtualSource,
    array: SpeakerArray,
    listener=None,
    mode: RenderMode = RenderMode.STATIC,
    *,
    default_subarray: int | None = None,
    half_aperture: float = DEFAULT_HALF_APERTURE,
    taper_alpha: float = DEFAULT_TAPER_ALPHA,
    normalization_frequency: float = 500.0,
) -> DrivingSet:
    """Per-speaker delays and gains realizing the source's wavefront.

    Exterior sources drive every speaker whose inward normal has a positive
    component along the local propagation direction, with spherical-spreading
    gains ``cos(theta) / sqrt(r)`` and a half-cosine edge taper per side.
    Focused sources are rendered by time reversal from a single side: the
    static side comes from ``default_subarray``, the user-dependent side from
    :func:`select_subarray` on the listener position.

    In user-dependent mode (listener given) the gains are rescaled so the
    synthesized amplitude at the listener matches the ideal source amplitude
    there, evaluated at ``normalization_frequency``.
    """
    if source.kind is SourceKind.FOCUSED:
        if mode is RenderMode.USER_DEPENDENT:
            if listener is None:
                raise ValueError("user-dependent focused rendering requires a listener position")
            side = select_subarray(source, listener, array, half_aperture=half_aperture)
        else:
            if default_subarray is None:
                raise ConfigurationError(
                    "static focused rendering needs a default sub-array side"
                )
            side = int(default_subarray)
        driving = _focused_driving(source, array, side, taper_alpha)
    else:
        driving = _exterior_driving(source, array, taper_alpha)

    if mode is RenderMode.USER_DEPENDENT and listener is not None:
        listener = np.asarray(listener, dtype=float)
        p_syn = abs(synthesize_field(driving, array, listener, normalization_frequency).pressure)
        p_ref = abs(ideal_field(source, listener, normalization_frequency).pressure)
        if p_syn == 0.0:
            raise GeometryError("synthesized field vanishes at the listener; cannot normalize")
        driving = DrivingSet(
            active=driving.active,
            delays=driving.delays,
            gains=driving.gains * (p_ref / p_syn),
            reference_point=listener.copy(),
        )
    return driving


def synthesize_field(
    driving: DrivingSet, array: SpeakerArray, point, frequency: float
) -> FieldSample:
    """Superpose the active speakers' delayed spherical waves at one point."""
    samples = synthesize_field_grid(driving, array, np.asarray(point, dtype=float)[None, :], frequency)
    return FieldSample(point=np.asarray(point, dtype=float), pressure=complex(samples[0]))


def synthesize_field_grid(
    driving: DrivingSet, array: SpeakerArray, points: np.ndarray, frequency: float
) -> np.ndarray:
    """Vectorized :func:`synthesize_field` over an (M, 3) point array."""
    if frequency <= 0.0:
        raise ValueError(f"frequency must be positive, got {frequency}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    act = driving.active
    pos = array.positions[act]
    dist = np.linalg.norm(points[:, None, :] - pos[None, :, :], axis=2)  # (M, K)
    if np.any(dist < SPEAKER_SINGULARITY_RADIUS):
        raise SingularityError("evaluation point within 1 mm of an active speaker")
    phase = -2j * np.pi * frequency * (driving.delays[act][None, :] + dist / SPEED_OF_SOUND)
    return np.sum(driving.gains[act][None, :] * np.exp(phase) / dist, axis=1)


def ideal_field(source: VirtualSource, point, frequency: float) -> FieldSample:
    """Free-field spherical wave of a point source at the source position."""
    samples = ideal_field_grid(source, np.asarray(point, dtype=float)[None, :], frequency)
    return FieldSample(point=np.asarray(point, dtype=float), pressure=complex(samples[0]))


def ideal_field_grid(source: VirtualSource, points: np.ndarray, frequency: float) -> np.ndarray:
    if frequency <= 0.0:
        raise ValueError(f"frequency must be positive, got {frequency}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dist = np.linalg.norm(points - source.position[None, :], axis=1)
    if np.any(dist < SPEAKER_SINGULARITY_RADIUS):
        raise SingularityError("evaluation point within 1 mm of the source")
    return np.exp(-2j * np.pi * frequency * dist / SPEED_OF_SOUND) / dist


def reconstruction_error(
    source: VirtualSource,
    array: SpeakerArray,
    driving: DrivingSet,
    zone_points: np.ndarray,
    frequency: float,
) -> float:
    """Normalized RMS field error over a grid, minimized over one complex gain.

    The free complex scalar absorbs overall level and phase, so the result is
    invariant under positive rescaling of the driving gains and lies in [0, 1].
    """
    points = np.atleast_2d(np.asarray(zone_points, dtype=float))
    if points.shape[0] == 0:
        raise ValueError("zone grid is empty")
    fp = array.footprint
    if not all(fp.contains(p) for p in points):
        raise ValueError("zone points must lie inside the array square")
    p_syn = synthesize_field_grid(driving, array, points, frequency)
    p_ideal = ideal_field_grid(source, points, frequency)
    denom = np.vdot(p_ideal, p_ideal).real
    if denom == 0.0:
        raise DegenerateInputError("ideal field is zero over the zone")
    syn_norm = np.vdot(p_syn, p_syn).real
    if syn_norm == 0.0:
        return 1.0
    cross = np.vdot(p_syn, p_ideal)  # conj(p_syn) . p_ideal
    residual = denom - (abs(cross) ** 2) / syn_norm
    return float(np.sqrt(max(residual, 0.0) / denom))


def optimal_field_scale(p_syn: np.ndarray, p_ideal: np.ndarray) -> complex:
    """Closed-form complex scalar minimizing ``|a * p_syn - p_ideal|^2``."""
    syn_norm = np.vdot(p_syn, p_syn).real
    if syn_norm == 0.0:
        return 0.0 + 0.0j
    return complex(np.vdot(p_syn, p_ideal) / syn_norm)


def valid_zone(
    source: VirtualSource,
    subarray_side: int,
    array: SpeakerArray,
    half_aperture: float = DEFAULT_HALF_APERTURE,
) -> ValidZone:
    """Cone of listener positions served by one rendering side.

    Opens from the focus along the line from the sub-array midpoint through
    the source; membership needs a positive projection on that direction
    (strict, so the apex itself is outside) within ``half_aperture``.
    """
    if source.kind is not SourceKind.FOCUSED:
        raise ValueError("valid zones are defined for focused sources only")
    mid = array.side_midpoint(subarray_side)
    direction = unit(source.position[:2] - mid[:2])
    return ValidZone(apex=source.position.copy(), direction=direction, half_aperture=half_aperture)


def select_subarray(
    source: VirtualSource,
    listener,
    array: SpeakerArray,
    half_aperture: float = DEFAULT_HALF_APERTURE,
) -> int:
    """Rendering side whose valid zone contains the listener.

    Among qualifying sides, picks the one whose zone direction best aligns
    with the focus-to-listener direction; ties break toward the lowest
    side id.
    """
    if source.kind is not SourceKind.FOCUSED:
        raise ValueError("sub-array selection applies to focused sources only")
    listener = np.asarray(listener, dtype=float)
    if not array.footprint.contains(listener, strict=True):
        raise ValueError("listener must be inside the array square")
    offset = listener[:2] - source.position[:2]
    if np.linalg.norm(offset) < 0.01:
        raise NoValidZoneError("listener within 1 cm of the focused source")
    toward_listener = unit(offset)
    best_side, best_align = None, -np.inf
    for side_id in range(4):
        zone = valid_zone(source, side_id, array, half_aperture)
        if not zone.contains(listener):
            continue
        align = float(zone.direction @ toward_listener)
        if align > best_align + 1e-12:
            best_side, best_align = side_id, align
    if best_side is None:
        raise NoValidZoneError("no sub-array's valid zone contains the listener")
    return best_side


def nearest_side(source_position, array: SpeakerArray) -> int:
    """Side whose midpoint is closest to a position (lowest id on ties)."""
    pos = np.asarray(source_position, dtype=float)
    dists = [np.linalg.norm(array.side_midpoint(s)[:2] - pos[:2]) for s in range(4)]
    return int(np.argmin(dists))


def make_grid(bounds: Rect, nx: int, ny: int, height: float) -> np.ndarray:
    """Regular (nx*ny, 3) grid of cell-center points at a fixed height."""
    xs = bounds.xmin + (np.arange(nx) + 0.5) * bounds.width / nx
    ys = bounds.ymin + (np.arange(ny) + 0.5) * bounds.height / ny
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, height)])


def export_error_map(
    path,
    source: VirtualSource,
    array: SpeakerArray,
    driving: DrivingSet,
    bounds: Rect,
    nx: int,
    ny: int,
    frequency: float,
) -> float:
    """Write a per-point field comparison CSV; returns the overall error.

    Columns are x, y, |p_syn|, |p_ideal| and each point's share of the
    squared reconstruction error (the shares sum to error**2).  Grid and
    source metadata go into ``#`` header comments so plotting tools never
    re-derive the geometry.  Points within 5 cm of the source are excluded
    (the ideal field diverges there) and counted in the metadata.
    """
    points = make_grid(bounds, nx, ny, array.height)
    keep = np.linalg.norm(points - source.position[None, :], axis=1) >= 0.05
    skipped = int(np.count_nonzero(~keep))
    points = points[keep]
    p_syn = synthesize_field_grid(driving, array, points, frequency)
    p_ideal = ideal_field_grid(source, points, frequency)
    denom = np.vdot(p_ideal, p_ideal).real
    if denom == 0.0:
        raise DegenerateInputError("ideal field is zero over the grid")
    a = optimal_field_scale(p_syn, p_ideal)
    contrib = np.abs(a * p_syn - p_ideal) ** 2 / denom
    error = float(np.sqrt(contrib.sum()))
    active_sides = sorted({s.side_id for s, on in zip(array.speakers, driving.active) if on})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# kind=fieldmap\n")
        fh.write(
            f"# xmin={bounds.xmin!r} xmax={bounds.xmax!r} "
            f"ymin={bounds.ymin!r} ymax={bounds.ymax!r} nx={nx} ny={ny}\n"
        )
        fh.write(
            f"# source_x={float(source.position[0])!r} source_y={float(source.position[1])!r} "
            f"source_kind={source.kind.value} frequency={float(frequency)!r}\n"
        )
        fh.write(f"# active_sides={','.join(str(s) for s in active_sides)}\n")
        fh.write(f"# skipped_near_source={skipped}\n")
        fh.write(f"# error={error!r}\n")
        fh.write("x,y,abs_syn,abs_ideal,error_contribution\n")
        for p, s, d, c in zip(points, np.abs(p_syn), np.abs(p_ideal), contrib):
            fh.write(
                f"{float(p[0])!r},{float(p[1])!r},{float(s)!r},{float(d)!r},{float(c)!r}\n"
            )
    return error
