"""Binaural listener model: ITD/ILD cues, bearing recovery, motion parallax.

The cue chain is deliberately minimal.  Arrival times use the earliest
wavefront per ear (a precedence-effect approximation; no cross-correlation),
levels sum the per-speaker amplitude contributions, and there is no spectral
filtering anywhere: the stereo path models a plain distance rolloff with no
head shadow, exactly as flat as the headphone rendering it imitates.

Sign conventions: a source toward the listener's right produces a negative
ITD (the right ear leads, ``itd = t_right - t_left``) and a positive ILD
(``ild = level_right - level_left``).  ``bearing_from_itd`` inverts the ITD
under a frontal-hemisphere assumption; rear sources alias into the front and
are left for the agents to disambiguate by moving.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateParallaxError, SingularityError
from .geometry import bearing_to_dir, wrap_angle
from .wavefield import (
    SPEAKER_SINGULARITY_RADIUS,
    SPEED_OF_SOUND,
    DrivingSet,
    SpeakerArray,
)

DEFAULT_EAR_SEPARATION = 0.18  # m


@dataclass(frozen=True)
class ListenerState:
    head_position: np.ndarray  # (3,)
    yaw: float  # radians, 0 = facing +y, CCW positive
    ear_separation: float = DEFAULT_EAR_SEPARATION

    def __post_init__(self):
        if self.ear_separation <= 0.0:
            raise ValueError("ear separation must be positive")


@dataclass(frozen=True)
class BinauralCue:
    itd: float  # s, negative toward the right
    ild: float  # dB, positive toward the right
    level: float = 0.0  # dB, mean of the two ear levels (overall loudness)


class RolloffModel(enum.Enum):
    LOGARITHMIC = "logarithmic"


@dataclass(frozen=True)
class StereoRolloff:
    """Distance attenuation of the headphone path: flat inside
    ``min_distance``, ``min/d`` beyond it, clamped past ``max_distance``."""

    min_distance: float = 0.1
    max_distance: float = 650.0
    model: RolloffModel = RolloffModel.LOGARITHMIC

    def __post_init__(self):
        if not 0.0 < self.min_distance < self.max_distance:
            raise ValueError("need 0 < min_distance < max_distance")


@dataclass(frozen=True)
class LocalizationEstimate:
    bearing: float  # world frame, radians
    distance: float | None  # m, None when unknown
    confidence: float  # [0, 1]
    position: np.ndarray | None = None  # (2,) when a point estimate exists


def ear_positions(state: ListenerState) -> tuple[np.ndarray, np.ndarray]:
    """Left and right ear at +/- half the separation along the lateral axis."""
    right_axis = np.array([np.cos(state.yaw), np.sin(state.yaw), 0.0])
    half = state.ear_separation / 2.0
    return state.head_position - half * right_axis, state.head_position + half * right_axis


def _clamp_itd(itd: float, state: ListenerState) -> float:
    bound = state.ear_separation / SPEED_OF_SOUND
    return float(np.clip(itd, -bound, bound))


ONSET_WINDOW = 2.5e-4  # s, envelope formation window for the wavefront onset
ONSET_THRESHOLD = 0.5  # fraction of the peak windowed amplitude


def first_wavefront_time(
    arrivals: np.ndarray,
    amplitudes: np.ndarray,
    window: float = ONSET_WINDOW,
    threshold: float = ONSET_THRESHOLD,
) -> float:
    """Onset of the first wavefront carrying substantial energy.

    Returns the earliest arrival whose forward ``window`` sums to at least
    ``threshold`` of the peak windowed amplitude.  The raw per-speaker
    minimum would instead report the aperture-edge shortcut of a focused
    sub-array, a precursor that is heavily tapered and carries almost no
    energy; the audible wavefront is where the arrivals cluster.
    """
    order = np.argsort(arrivals)
    t = arrivals[order]
    a = amplitudes[order]
    # forward-window sums via cumulative amplitudes
    hi = np.searchsorted(t, t + window, side="left")
    cum = np.concatenate([[0.0], np.cumsum(a)])
    windowed = cum[hi] - cum[np.arange(len(t))]
    k = int(np.argmax(windowed >= threshold * windowed.max()))
    return float(t[k])


def binaural_cues_wfs(
    driving: DrivingSet, array: SpeakerArray, state: ListenerState
) -> BinauralCue:
    """Cues of the synthesized field: first-wavefront ITD, summed-amplitude ILD.

    Per ear, the arrival time is the onset of the first energetic wavefront
    over the active speakers' delayed spherical contributions (see
    :func:`first_wavefront_time`; for a single active speaker this is the
    exact geometric arrival) and the level is ``20*log10(sum gain_n / d_n)``.
    """
    if not driving.active.any():
        raise ValueError("driving set has no active speaker")
    left, right = ear_positions(state)
    act = driving.active
    pos = array.positions[act]
    delays = driving.delays[act]
    gains = driving.gains[act]
    times = []
    levels = []
    for ear in (left, right):
        dist = np.linalg.norm(pos - ear[None, :], axis=1)
        if np.any(dist < SPEAKER_SINGULARITY_RADIUS):
            raise SingularityError("ear within 1 mm of an active speaker")
        contrib = gains / dist
        times.append(first_wavefront_time(delays + dist / SPEED_OF_SOUND, contrib))
        levels.append(20.0 * np.log10(max(float(contrib.sum()), 1e-30)))
    itd = _clamp_itd(times[1] - times[0], state)
    return BinauralCue(
        itd=itd, ild=levels[1] - levels[0], level=(levels[0] + levels[1]) / 2.0
    )


def stereo_gain(distance: float, rolloff: StereoRolloff) -> float:
    """Headphone gain at a distance: 1 up to min, min/d to max, then clamped."""
    if distance < 0.0:
        raise ValueError("distance must be non-negative")
    if distance <= rolloff.min_distance:
        return 1.0
    return rolloff.min_distance / min(distance, rolloff.max_distance)


def binaural_cues_stereo(
    source, state: ListenerState, rolloff: StereoRolloff
) -> BinauralCue:
    """Cues of the headphone path: geometric ITD, rolloff-gain ILD."""
    src = np.asarray(source, dtype=float)
    if src.shape[-1] == 2:
        src = np.append(src, state.head_position[2])
    left, right = ear_positions(state)
    d_left = float(np.linalg.norm(src - left))
    d_right = float(np.linalg.norm(src - right))
    if min(d_left, d_right) < SPEAKER_SINGULARITY_RADIUS:
        raise SingularityError("source within 1 mm of an ear")
    itd = _clamp_itd((d_right - d_left) / SPEED_OF_SOUND, state)
    level_left = 20.0 * np.log10(stereo_gain(d_left, rolloff))
    level_right = 20.0 * np.log10(stereo_gain(d_right, rolloff))
    return BinauralCue(
        itd=itd,
        ild=level_right - level_left,
        level=(level_left + level_right) / 2.0,
    )


def bearing_from_itd(cue: BinauralCue, state: ListenerState) -> LocalizationEstimate:
    """World-frame bearing from the ITD alone (duplex geometry, front assumed).

    The head-relative azimuth is ``asin(c * (-itd) / separation)``, positive
    to the right; confidence drops by however much the argument had to be
    clamped into [-1, 1].
    """
    arg = SPEED_OF_SOUND * (-cue.itd) / state.ear_separation
    clamped = float(np.clip(arg, -1.0, 1.0))
    azimuth = float(np.arcsin(clamped))
    confidence = max(0.0, 1.0 - abs(arg - clamped))
    return LocalizationEstimate(
        bearing=wrap_angle(state.yaw - azimuth),
        distance=None,
        confidence=confidence,
    )


def parallax_triangulate(
    observations: list[tuple[np.ndarray, float]], min_baseline: float = 0.2
) -> LocalizationEstimate:
    """Least-squares intersection of horizontal bearing rays.

    Each observation is (observer position, world bearing).  Solves for the
    point minimizing the summed squared perpendicular distances to the ray
    lines; the reported bearing/distance are taken from the last observer.
    Rays with an angular spread under 0.5 degrees cannot fix a depth.
    """
    if len(observations) < 2:
        raise ValueError("need at least two observations to triangulate")
    points = np.array([np.asarray(p, dtype=float)[:2] for p, _ in observations])
    bearings = np.array([float(b) for _, b in observations])
    pair_dists = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    if pair_dists.max() < min_baseline:
        raise ValueError(
            f"observer baseline {pair_dists.max():.3f} m below minimum {min_baseline} m"
        )
    dirs = np.array([bearing_to_dir(b) for b in bearings])
    # spread between ray *lines*: fold direction pairs into [0, pi/2]
    cosines = np.clip(np.abs(dirs @ dirs.T), -1.0, 1.0)
    spread = float(np.max(np.arccos(cosines)))
    if spread < np.deg2rad(0.5):
        raise DegenerateParallaxError(
            f"bearing spread {np.rad2deg(spread):.3f} deg is too small"
        )
    # normal equations for sum_i |(I - u u^T)(q - p_i)|^2
    a = np.zeros((2, 2))
    b = np.zeros(2)
    for p, u in zip(points, dirs):
        proj = np.eye(2) - np.outer(u, u)
        a += proj
        b += proj @ p
    try:
        q = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateParallaxError("ray system is singular") from exc
    forward = np.array([float((q - p) @ u) for p, u in zip(points, dirs)])
    if np.count_nonzero(forward > 0.0) < len(forward) / 2.0:
        # the line intersection lies behind the observers; the *rays* never meet
        raise DegenerateParallaxError("intersection lies behind the bearing rays")
    residuals = [np.linalg.norm((np.eye(2) - np.outer(u, u)) @ (q - p)) for p, u in zip(points, dirs)]
    rms = float(np.sqrt(np.mean(np.square(residuals))))
    rel = q - points[-1]
    distance = float(np.linalg.norm(rel))
    bearing = wrap_angle(float(np.arctan2(-rel[0], rel[1])))
    return LocalizationEstimate(
        bearing=bearing,
        distance=distance,
        confidence=1.0 / (1.0 + rms),
        position=q,
    )
