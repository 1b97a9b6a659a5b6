"""Simulated participants: the two observed search strategies.

The stereo policy climbs the loudness gradient: listen, probe in a random
initial direction (often away from the source at first), then settle into
axis-wise adjustments until successive loudness peaks agree, and plant the
guess there.  The array policy turns toward the first wavefront, translates
parallel to the nearest speaker side while collecting bearing observations,
triangulates them by motion parallax, walks in for a second look and commits.

These are plain kinematic state machines, not behavioral models; their job
is producing plausible, deterministic logs that exercise the analysis suite,
with effect *directions* (not sizes) matching what the study reports.
"""

from __future__ import annotations

import enum
import zlib
from collections import deque
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateParallaxError
from .geometry import Rect, bearing_to_dir, dir_to_bearing, ray_exit_point, wrap_angle
from .listener import (
    BinauralCue,
    ListenerState,
    LocalizationEstimate,
    bearing_from_itd,
    parallax_triangulate,
)

TURN_RATE = 4.0  # rad/s
COMMIT_DURATION = 0.6  # s, hand travel to the guess point
RETREAT_SPEED = 0.25  # m/s, head lean-back while committing
SILENCE_GRACE = 0.8  # s after the sound ends before a forced commit


@dataclass(frozen=True)
class AgentParams:
    walk_speed: float = 0.8  # m/s
    probe_step: float = 0.15  # m between loudness comparisons
    cue_noise_itd: float = 0.0  # s, std of perceptual ITD jitter
    cue_noise_level: float = 0.0  # dB, std of loudness/ILD jitter
    commit_threshold: float = 0.1  # m agreement between successive peaks
    max_search_time: float = 15.0  # s from sound onset
    seed: int = 0
    noise_decay: float = 1.0  # per-trial multiplier on the cue noise (learning knob)

    def __post_init__(self):
        if self.walk_speed <= 0.0:
            raise ValueError("walk_speed must be positive")
        for name in ("probe_step", "cue_noise_itd", "cue_noise_level",
                     "commit_threshold", "max_search_time", "noise_decay"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


class AgentPhase(enum.Enum):
    ORIENT = "orient"
    EXPLORE = "explore"
    REFINE = "refine"
    COMMIT = "commit"
    DONE = "done"


class SearchAgent:
    """Shared body model: a head at array height, two hands, one policy."""

    def __init__(self, params: AgentParams, area: Rect, height: float, start=None):
        self.params = params
        self.area = area
        self.height = height
        start = area.center if start is None else np.asarray(start, dtype=float)[:2]
        if not area.contains(start):
            raise ValueError("agent must start inside the walkable area")
        self.head = np.array([start[0], start[1], height])
        self.yaw = 0.0
        self.rng = np.random.default_rng(np.random.SeedSequence([params.seed, id_salt(self)]))
        self.phase = AgentPhase.ORIENT
        self.belief: LocalizationEstimate | None = None
        self.observation_log: list[tuple[np.ndarray, float]] = []
        self.trial_no = -1
        self._noise_scale = 1.0
        self._guess: np.ndarray | None = None
        self._commit_t = 0.0
        self._commit_from: np.ndarray | None = None
        self._silence = 0.0
        self.right_hand = self._rest_hand(+1)
        self.left_hand = self._rest_hand(-1)

    # -- body -------------------------------------------------------------

    @property
    def listener(self) -> ListenerState:
        return ListenerState(head_position=self.head.copy(), yaw=self.yaw)

    @property
    def facing(self) -> np.ndarray:
        return bearing_to_dir(self.yaw)

    def _rest_hand(self, side: int) -> np.ndarray:
        lateral = np.array([np.cos(self.yaw), np.sin(self.yaw)]) * 0.12 * side
        offset = 0.15 * self.facing + lateral
        return np.array(
            [
                *self.area.clamp(self.head[:2] + offset),
                self.height - 0.35,
            ]
        )

    def _update_hands(self):
        self.right_hand = self._rest_hand(+1)
        self.left_hand = self._rest_hand(-1)

    def _turn_toward(self, bearing: float, dt: float):
        delta = wrap_angle(bearing - self.yaw)
        step = np.clip(delta, -TURN_RATE * dt, TURN_RATE * dt)
        self.yaw = wrap_angle(self.yaw + step)

    def _walk(self, direction: np.ndarray, dt: float) -> float:
        """Move the head; returns the distance actually covered after clamping."""
        direction = np.asarray(direction, dtype=float)[:2]
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            return 0.0
        before = self.head[:2].copy()
        target = self.area.clamp(before + direction / norm * self.params.walk_speed * dt)
        self.head[:2] = target
        return float(np.linalg.norm(target - before))

    # -- cue handling -------------------------------------------------------

    def _perceived(self, cue: BinauralCue) -> BinauralCue:
        if self.params.cue_noise_itd == 0.0 and self.params.cue_noise_level == 0.0:
            return cue
        return BinauralCue(
            itd=cue.itd + self.rng.normal(0.0, self.params.cue_noise_itd * self._noise_scale),
            ild=cue.ild + self.rng.normal(0.0, self.params.cue_noise_level * self._noise_scale),
            level=cue.level + self.rng.normal(0.0, self.params.cue_noise_level * self._noise_scale),
        )

    # -- trial protocol ------------------------------------------------------

    def begin_trial(self, target_hint=None, movement=None):
        self.trial_no += 1
        self._noise_scale = self.params.noise_decay**self.trial_no
        self.phase = AgentPhase.ORIENT
        self.belief = None
        self.observation_log = []
        self._guess = None
        self._commit_t = 0.0
        self._commit_from = None
        self._silence = 0.0
        self._update_hands()
        self._reset_policy()

    def step(self, t: float, cue: BinauralCue | None, playing: bool, dt: float):
        """Advance one tick; returns the guess (2,) when it is placed."""
        if self.phase is AgentPhase.DONE:
            return None
        if self.phase is AgentPhase.COMMIT:
            return self._commit_step(dt)
        if cue is not None:
            self._silence = 0.0
            self._consume(t, self._perceived(cue), dt)
        else:
            self._silence += dt
        if self.phase is not AgentPhase.COMMIT:
            if t >= self.params.max_search_time or (not playing and self._silence >= SILENCE_GRACE):
                self._start_commit(self._best_guess())
            else:
                self._move(t, cue, dt)
        if self.phase is AgentPhase.COMMIT:
            return self._commit_step(dt)
        self._update_hands()
        return None

    def force_guess(self) -> np.ndarray:
        """Immediate guess without the hand animation (timeout path)."""
        guess = self._guess if self._guess is not None else self.area.clamp(self._best_guess())
        self.right_hand = np.array([guess[0], guess[1], self.height])
        self.phase = AgentPhase.DONE
        self._guess = guess
        return guess

    # -- committing -----------------------------------------------------------

    def _start_commit(self, point: np.ndarray):
        self._guess = self.area.clamp(point)
        self.phase = AgentPhase.COMMIT
        self._commit_t = 0.0
        self._commit_from = self.right_hand.copy()
        self._guess3 = np.array([self._guess[0], self._guess[1], self.height])

    def _commit_step(self, dt: float):
        self._commit_t += dt
        frac = min(self._commit_t / COMMIT_DURATION, 1.0)
        self.right_hand = self._commit_from + frac * (self._guess3 - self._commit_from)
        # lean back while the hand goes in
        self.head[:2] = self.area.clamp(self.head[:2] - self.facing * RETREAT_SPEED * dt)
        if frac >= 1.0:
            self.right_hand = self._guess3.copy()
            self.phase = AgentPhase.DONE
            return self._guess
        return None

    # -- policy hooks ---------------------------------------------------------

    def _reset_policy(self):
        raise NotImplementedError

    def _consume(self, t: float, cue: BinauralCue, dt: float):
        raise NotImplementedError

    def _move(self, t: float, cue: BinauralCue | None, dt: float):
        raise NotImplementedError

    def _best_guess(self) -> np.ndarray:
        raise NotImplementedError


def id_salt(agent) -> int:
    # stable per-class stream separation (Python's str hash is salted per run)
    return zlib.crc32(type(agent).__name__.encode("ascii"))


class OracleAgent(SearchAgent):
    """Guesses the exact target the moment the sound starts; test baseline."""

    def _reset_policy(self):
        self._target = None

    def begin_trial(self, target_hint=None, movement=None):
        super().begin_trial(target_hint, movement)
        self._target = None if target_hint is None else np.asarray(target_hint, dtype=float)[:2]

    def step(self, t, cue, playing, dt):
        if self.phase is AgentPhase.DONE:
            return None
        if playing and self._target is not None:
            self.phase = AgentPhase.DONE
            guess = self.area.clamp(self._target)
            self.right_hand = np.array([guess[0], guess[1], self.height])
            self._guess = guess
            return guess
        return None

    def _best_guess(self):
        return self._target if self._target is not None else self.head[:2]

    def _consume(self, t, cue, dt):
        pass

    def _move(self, t, cue, dt):
        pass


class StereoSearchAgent(SearchAgent):
    """Loudness-gradient search with axis-wise refinement.

    The initial probe direction is random, so roughly half the trials start
    by walking away from the source before the attenuation gradient pulls
    the path back, matching the detour-heavy stereo traces in the logs.
    """

    RECENT_PROBES = 200  # ticks (~4 s) of loudness memory; an all-time best goes stale on moving sources
    BLOCK_TIME = 0.2  # s of pinned walking that counts as a failed probe

    def _reset_policy(self):
        self._dir = None
        self._last_level = None
        self._last_probe_pos = None
        self._probes: deque[tuple[float, np.ndarray]] = deque(maxlen=self.RECENT_PROBES)
        self._turns = 0
        self._axis = 0
        self._axis_sign = 1.0
        self._axis_flipped = False
        self._prev_peak = None
        self._orient_time = 0.0
        self._blocked_time = 0.0

    @property
    def _best(self) -> tuple[float, np.ndarray] | None:
        return max(self._probes, key=lambda lv: lv[0]) if self._probes else None

    def _consume(self, t: float, cue: BinauralCue, dt: float):
        level = cue.level
        pos = self.head[:2].copy()
        self._probes.append((level, pos))
        if self._last_probe_pos is None:
            self._last_probe_pos = pos
            self._last_level = level
            return
        moved = np.linalg.norm(pos - self._last_probe_pos)
        probe = self.params.probe_step if self.phase is AgentPhase.EXPLORE else self.params.probe_step / 2.0
        if moved < probe:
            return
        improving = level > self._last_level
        self._last_probe_pos = pos
        self._last_level = level
        if not improving:
            self._probe_failed()

    def _probe_failed(self):
        """A loudness comparison went the wrong way (or the wall is in the way)."""
        self._last_probe_pos = self.head[:2].copy()
        if self.phase is AgentPhase.EXPLORE:
            spin = self.rng.choice([-1.0, 1.0]) * np.pi / 2.0
            c, s = np.cos(spin), np.sin(spin)
            self._dir = np.array([c * self._dir[0] - s * self._dir[1],
                                  s * self._dir[0] + c * self._dir[1]])
            self._turns += 1
            if self._turns >= 3:
                self.phase = AgentPhase.REFINE
                self._start_axis(0)
        elif self.phase is AgentPhase.REFINE:
            if not self._axis_flipped:
                self._axis_sign *= -1.0
                self._axis_flipped = True
                self._dir = self._axis_dir()
            else:
                self._finish_axis()

    def _axis_dir(self) -> np.ndarray:
        d = np.zeros(2)
        d[self._axis] = self._axis_sign
        return d

    def _start_axis(self, axis: int):
        self._axis = axis
        self._axis_sign = 1.0 if self.rng.uniform() < 0.5 else -1.0
        self._axis_flipped = False
        self._dir = self._axis_dir()

    def _finish_axis(self):
        if self._axis == 0:
            self._start_axis(1)
            return
        peak = self._best[1]
        if self._prev_peak is not None and np.linalg.norm(peak - self._prev_peak) <= self.params.commit_threshold:
            self._start_commit(peak)
            return
        self._prev_peak = peak
        self._start_axis(0)

    def _move(self, t: float, cue: BinauralCue | None, dt: float):
        if self.phase is AgentPhase.ORIENT:
            self._orient_time += dt
            if cue is not None and self._orient_time >= 0.3:
                angle = self.rng.uniform(0.0, 2.0 * np.pi)
                self._dir = np.array([np.cos(angle), np.sin(angle)])
                self.phase = AgentPhase.EXPLORE
                self._last_probe_pos = None
            return
        if self._dir is None:
            return
        covered = self._walk(self._dir, dt)
        if covered < 0.5 * self.params.walk_speed * dt:  # pinned against the boundary
            self._blocked_time += dt
            if self._blocked_time >= self.BLOCK_TIME:
                self._blocked_time = 0.0
                self._probe_failed()
        else:
            self._blocked_time = 0.0
        self._turn_toward(dir_to_bearing(self._dir), dt)

    def _best_guess(self) -> np.ndarray:
        if self._best is not None:
            return self._best[1]
        return self.head[:2].copy()


class WfsSearchAgent(SearchAgent):
    """Direction first, then parallel refinement and parallax triangulation.

    Bearings come from the rendered wavefront, so when a focused source is
    driven without user tracking the observations converge on the active
    speakers instead of the source, and the guess drifts toward that edge.
    """

    OBS_SPACING = 0.1  # m between recorded observations
    OBS_WARMUP = 0.5  # s before bearings count
    OBS_RECENT = 12  # observations kept for triangulation (stale ones mislead)
    BASELINE_GOAL = 1.0  # m of traversal before the first triangulation
    APPROACH_DIST = 0.4  # m stop-off distance from the first estimate
    EDGE_MARGIN = 0.15  # m from the boundary at which traversal reverses

    def _reset_policy(self):
        self._bearing = None
        self._traverse_dir = None
        self._approach_target = None
        self._last_obs_pos = None
        self._orient_time = 0.0

    def _consume(self, t: float, cue: BinauralCue, dt: float):
        est = bearing_from_itd(cue, self.listener)
        self._bearing = est.bearing
        if t < self.OBS_WARMUP:
            return
        # record only once the head has settled onto the wavefront direction
        if abs(wrap_angle(self._bearing - self.yaw)) > np.deg2rad(12.0):
            return
        pos = self.head[:2].copy()
        if self._last_obs_pos is not None and np.linalg.norm(pos - self._last_obs_pos) < self.OBS_SPACING:
            return
        self._last_obs_pos = pos
        self.observation_log.append((pos, self._bearing))

    MIN_SPREAD = np.deg2rad(10.0)  # bearing spread below which depth is not trusted
    MIN_CONFIDENCE = 0.85  # residual-based triangulation confidence floor

    def _triangulate(self) -> np.ndarray | None:
        """Parallax depth estimate, or None when the rays cannot support one.

        Depth needs real parallax: the recent bearings must fan out by at
        least ``MIN_SPREAD`` and agree on a point (confidence floor).
        Near-parallel or inconsistent rays mean the wavefront has no usable
        depth cue and the guess falls back to the boundary collapse.
        """
        recent = self.observation_log[-self.OBS_RECENT:]
        if len(recent) < 2:
            return None
        bearings = np.array([b for _, b in recent])
        dirs = np.column_stack([-np.sin(bearings), np.cos(bearings)])
        spread = float(np.max(np.arccos(np.clip(np.abs(dirs @ dirs.T), -1.0, 1.0))))
        if spread < self.MIN_SPREAD:
            return None
        try:
            est = parallax_triangulate(recent, min_baseline=0.2)
        except (DegenerateParallaxError, ValueError):
            return None
        if est.confidence < self.MIN_CONFIDENCE:
            return None
        self.belief = est
        return est.position

    FALLBACK_INSET = 0.1  # m inside the boundary for depthless guesses

    def _fallback_guess(self) -> np.ndarray:
        """Guess along the bearing ray, just inside the area boundary.

        Without parallax there is no depth, and the wavefront seems to start
        at the speakers themselves, so the guess collapses onto the boundary
        in the bearing direction.
        """
        bearing = self._bearing if self._bearing is not None else self.yaw
        origin = self.area.clamp(self.head[:2])
        exit_pt = ray_exit_point(origin, bearing_to_dir(bearing), self.area)
        span = np.linalg.norm(exit_pt - origin)
        if span <= self.FALLBACK_INSET:
            return exit_pt
        return exit_pt + (origin - exit_pt) / span * self.FALLBACK_INSET

    def _move(self, t: float, cue: BinauralCue | None, dt: float):
        if self.phase is AgentPhase.ORIENT:
            self._orient_time += dt
            if self._bearing is not None:
                self._turn_toward(self._bearing, dt)
            if self._bearing is not None and self._orient_time >= 0.4:
                self.phase = AgentPhase.EXPLORE
                self._traverse_dir = self._pick_traverse_dir()
            return
        if self._bearing is not None:
            self._turn_toward(self._bearing, dt)
        if self.phase is AgentPhase.EXPLORE:
            self._traverse(dt)
            span = self._span()
            if span >= self.BASELINE_GOAL and len(self.observation_log) >= 5:
                point = self._triangulate()
                self.phase = AgentPhase.REFINE
                self._approach_target = point  # None falls through to the ray guess
        elif self.phase is AgentPhase.REFINE:
            if self._approach_target is None:
                self._start_commit(self._fallback_guess())
                return
            to_target = self._approach_target - self.head[:2]
            if np.linalg.norm(to_target) <= self.APPROACH_DIST:
                point = self._triangulate()
                self._start_commit(point if point is not None else self._fallback_guess())
            else:
                self._walk(to_target, dt)

    def _span(self) -> float:
        if len(self.observation_log) < 2:
            return 0.0
        pts = np.array([p for p, _ in self.observation_log])
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def _pick_traverse_dir(self) -> np.ndarray:
        """Tangent of the nearest array side, headed where there is room."""
        x, y = self.head[0], self.head[1]
        d_edges = {
            0: self.area.ymax - y,
            1: self.area.xmax - x,
            2: y - self.area.ymin,
            3: x - self.area.xmin,
        }
        side = min(d_edges, key=lambda s: (d_edges[s], s))
        tangent = np.array([1.0, 0.0]) if side in (0, 2) else np.array([0.0, 1.0])
        axis = 0 if side in (0, 2) else 1
        center = (self.area.center)[axis]
        return tangent if self.head[axis] <= center else -tangent

    def _traverse(self, dt: float):
        axis = 0 if self._traverse_dir[0] != 0.0 else 1
        nxt = self.head[axis] + np.sign(self._traverse_dir[axis]) * self.params.walk_speed * dt
        lo = (self.area.xmin, self.area.ymin)[axis] + self.EDGE_MARGIN
        hi = (self.area.xmax, self.area.ymax)[axis] - self.EDGE_MARGIN
        if not lo <= nxt <= hi:
            self._traverse_dir = -self._traverse_dir
        self._walk(self._traverse_dir, dt)

    def _best_guess(self) -> np.ndarray:
        point = self._triangulate()
        if point is not None:
            return point
        return self._fallback_guess()


def hand_trajectory(samples) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample right-hand positions from a tracking stream.

    Returns (positions, valid): an (N, 3) array and its validity mask.
    Invalid samples hold the sentinel pose and should be masked out of any
    positional statistic.
    """
    positions = np.array([s.right_hand.pos for s in samples])
    valid = np.array([s.right_hand.valid for s in samples])
    return positions, valid


def make_agent(policy: str, params: AgentParams, area: Rect, height: float,
               start=None) -> SearchAgent:
    """Factory used by the session runner and the CLI config."""
    policies = {
        "stereo": StereoSearchAgent,
        "wfs": WfsSearchAgent,
        "oracle": OracleAgent,
    }
    if policy not in policies:
        raise ValueError(f"unknown agent policy {policy!r}; expected one of {sorted(policies)}")
    return policies[policy](params, area, height, start=start)
