"""Rigid alignment between virtual space and the speaker-array space.

The alignment mirrors the two manual steps used at the start of a session:
translate so the space centers coincide, then rotate about that center until
the boundaries line up.  Residual alignment error is modeled as a small
random rigid transform drawn once per session and composed into perceived
source positions, in the array condition only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import rot2d


@dataclass(frozen=True)
class RigidTransform2D:
    """Translate by ``translation``, then rotate by ``rotation`` about ``center``."""

    center: np.ndarray  # (2,)
    rotation: float  # radians, CCW
    translation: np.ndarray  # (2,)

    @classmethod
    def identity(cls, center=(0.0, 0.0)) -> "RigidTransform2D":
        return cls(
            center=np.asarray(center, dtype=float),
            rotation=0.0,
            translation=np.zeros(2),
        )

    @property
    def is_identity(self) -> bool:
        return self.rotation == 0.0 and not self.translation.any()


def align_centers(real_center, virtual_center) -> RigidTransform2D:
    """Step one: shift the virtual center onto the real center."""
    real_center = np.asarray(real_center, dtype=float)
    virtual_center = np.asarray(virtual_center, dtype=float)
    return RigidTransform2D(
        center=real_center.copy(),
        rotation=0.0,
        translation=real_center - virtual_center,
    )


def set_rotation(t: RigidTransform2D, theta: float) -> RigidTransform2D:
    """Step two: rotate about the transform's center, after the translation."""
    return RigidTransform2D(center=t.center, rotation=float(theta), translation=t.translation)


def apply(t: RigidTransform2D, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)[:2]
    return t.center + rot2d(t.rotation) @ (p + t.translation - t.center)


def invert(t: RigidTransform2D) -> RigidTransform2D:
    return RigidTransform2D(
        center=t.center,
        rotation=-t.rotation,
        translation=-(rot2d(t.rotation) @ t.translation),
    )


@dataclass(frozen=True)
class MisalignmentModel:
    """Gaussian residual calibration error; both sigmas may be zero."""

    sigma_translation: float = 0.02  # m
    sigma_rotation: float = np.deg2rad(1.0)  # radians

    def __post_init__(self):
        if self.sigma_translation < 0.0 or self.sigma_rotation < 0.0:
            raise ValueError("misalignment sigmas must be non-negative")


def sample_misalignment(
    model: MisalignmentModel, rng_seed: int, center=(0.0, 0.0)
) -> RigidTransform2D:
    """One session's residual alignment error, deterministic per seed."""
    rng = np.random.default_rng(rng_seed)
    translation = rng.normal(0.0, model.sigma_translation, size=2)
    rotation = float(rng.normal(0.0, model.sigma_rotation))
    return RigidTransform2D(
        center=np.asarray(center, dtype=float),
        rotation=rotation,
        translation=translation,
    )
