"""Experimental design and trial execution.

A session is 54 trials in 8 blocks.  Each system half (array rendering or
stereo) holds three static blocks of six trials, one per environment with
every sound twice, followed by one dynamic block of nine trials, three per
sound, always in the blank environment.  Randomization permutes trials only
within their block; everything is deterministic per (seed, first system).

Trials run a fixed state machine against a model agent at a 50 Hz tick:
Idle (pre-roll) -> Playing -> AwaitingGuess -> Feedback -> Done.  The sound
plays exactly once; a guess may arrive while it still plays, and a timeout
forces one if it never does.  Session misalignment shifts the physically
rendered source in array trials only.
"""

from __future__ import annotations

import enum
import logging as _logging
from dataclasses import dataclass, field

import numpy as np

from . import calibration
from .calibration import RigidTransform2D
from .geometry import Rect, yaw_quaternion
from .listener import BinauralCue, StereoRolloff, binaural_cues_stereo, binaural_cues_wfs
from .wavefield import (
    DEFAULT_HALF_APERTURE,
    DrivingSet,
    RenderMode,
    SpeakerArray,
    SourceKind,
    build_square_array,
    classify_source,
    driving_functions,
    nearest_side,
)
from .exceptions import NoValidZoneError, SingularityError

log = _logging.getLogger(__name__)

TICK = 0.02  # s, 50 Hz tracking and simulation step
TRAJECTORY_LENGTH = 2.0  # m
DURATION_RANGE = (1.0, 3.0)  # s
HAND_SENTINEL_POS = np.zeros(3)
HAND_SENTINEL_ROT = np.array([1.0, 0.0, 0.0, 0.0])


class System(enum.Enum):
    WFS = "wfs"
    STEREO = "stereo"


class Environment(enum.Enum):
    BLANK = "blank"
    INDOORS = "indoors"
    OUTDOORS = "outdoors"


class Movement(enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class SoundId(enum.Enum):
    TELEPHONE = "telephone"
    PIANO = "piano"
    BIRDSONG = "birdsong"


@dataclass(frozen=True)
class SoundAsset:
    id: SoundId
    duration: float  # s


SOUND_ASSETS = {
    SoundId.TELEPHONE: SoundAsset(SoundId.TELEPHONE, 6.12),
    SoundId.PIANO: SoundAsset(SoundId.PIANO, 6.861),
    SoundId.BIRDSONG: SoundAsset(SoundId.BIRDSONG, 159.362),
}


@dataclass(frozen=True)
class Trajectory:
    end: np.ndarray  # (2,)
    duration: float  # s


@dataclass(frozen=True)
class TrialSpec:
    index: int
    block: int
    system: System
    environment: Environment
    sound: SoundId
    movement: Movement
    source_start: np.ndarray  # (2,)
    height: float
    trajectory: Trajectory | None = None

    @property
    def target(self) -> np.ndarray:
        """Scored position: the source, or where a moving source stops."""
        if self.movement is Movement.DYNAMIC:
            return self.trajectory.end
        return self.source_start


@dataclass(frozen=True)
class SessionPlan:
    participant_id: str
    seed: int
    first_system: System
    trials: tuple[TrialSpec, ...]
    tutorial_trials: tuple[TrialSpec, ...] = ()


@dataclass(frozen=True)
class TrialResult:
    spec_index: int
    guess: np.ndarray  # (2,)
    guess_height: float
    guess_time: float  # s since sound onset
    target: np.ndarray  # (2,)
    score: float  # m
    sound_onset: float  # s, session-relative


@dataclass(frozen=True)
class HandSample:
    pos: np.ndarray  # (3,)
    rot: np.ndarray  # (4,) wxyz
    valid: bool


@dataclass(frozen=True)
class TrackingSample:
    t: float  # s, session-relative
    hmd_pos: np.ndarray  # (3,)
    hmd_rot: np.ndarray  # (4,) wxyz
    left_hand: HandSample
    right_hand: HandSample


def random_source_position(rng: np.random.Generator, area: Rect) -> np.ndarray:
    return area.sample(rng)


def random_trajectory(
    rng: np.random.Generator,
    area: Rect,
    start: np.ndarray | None = None,
    length: float = TRAJECTORY_LENGTH,
    duration_range: tuple[float, float] = DURATION_RANGE,
    max_tries: int = 1000,
) -> tuple[np.ndarray, Trajectory]:
    """Fixed-length trajectory with both endpoints inside the area.

    Start and direction are rejection-sampled jointly: for a 2 m leg in the
    2x2 m area no direction works from central starts, so a rejected
    direction also rejects the start (a caller-pinned start keeps only the
    direction free and may therefore exhaust the retry budget).
    """
    pinned = start is not None
    for _ in range(max_tries):
        s = np.asarray(start, dtype=float) if pinned else area.sample(rng)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        end = s + length * np.array([np.cos(angle), np.sin(angle)])
        if area.contains(end):
            duration = rng.uniform(*duration_range)
            return s, Trajectory(end=end, duration=duration)
    raise RuntimeError(f"no in-area trajectory found after {max_tries} tries")


_STATIC_ENV_ORDER = (Environment.BLANK, Environment.INDOORS, Environment.OUTDOORS)


def _shuffled(rng: np.random.Generator, items: list) -> list:
    return [items[i] for i in rng.permutation(len(items))]


def generate_session(
    participant_id: str,
    seed: int,
    first_system: System,
    area: Rect = Rect.square(2.0),
    height: float = 1.6,
    tutorial: bool = False,
) -> SessionPlan:
    """The full 54-trial design, randomized within blocks, deterministic per seed.

    Static sound positions are uniform over the walkable area; dynamic trials
    get a 2 m trajectory over 1-3 s and always run in the blank environment.
    """
    rng = np.random.default_rng(seed)
    second = System.STEREO if first_system is System.WFS else System.WFS
    trials: list[TrialSpec] = []
    block = 0
    for system in (first_system, second):
        for env in _STATIC_ENV_ORDER:
            specs = []
            for sound in SoundId:
                for _ in range(2):
                    specs.append(
                        dict(
                            system=system,
                            environment=env,
                            sound=sound,
                            movement=Movement.STATIC,
                            source_start=random_source_position(rng, area),
                            trajectory=None,
                        )
                    )
            for spec in _shuffled(rng, specs):
                trials.append(TrialSpec(index=len(trials), block=block, height=height, **spec))
            block += 1
        specs = []
        for sound in SoundId:
            for _ in range(3):
                start, traj = random_trajectory(rng, area)
                specs.append(
                    dict(
                        system=system,
                        environment=Environment.BLANK,
                        sound=sound,
                        movement=Movement.DYNAMIC,
                        source_start=start,
                        trajectory=traj,
                    )
                )
        for spec in _shuffled(rng, specs):
            trials.append(TrialSpec(index=len(trials), block=block, height=height, **spec))
        block += 1

    tutorial_trials: tuple[TrialSpec, ...] = ()
    if tutorial:
        # four warmup trials: a guided telephone round, then one round per sound
        order = (SoundId.TELEPHONE, SoundId.TELEPHONE, SoundId.PIANO, SoundId.BIRDSONG)
        tutorial_trials = tuple(
            TrialSpec(
                index=-(4 - i),
                block=-1,
                system=first_system,
                environment=Environment.BLANK,
                sound=sound,
                movement=Movement.STATIC,
                source_start=random_source_position(rng, area),
                height=height,
                trajectory=None,
            )
            for i, sound in enumerate(order)
        )
    return SessionPlan(
        participant_id=participant_id,
        seed=seed,
        first_system=first_system,
        trials=tuple(trials),
        tutorial_trials=tutorial_trials,
    )


# --- session definition files -------------------------------------------------

def write_session_plan(plan: SessionPlan, path) -> None:
    """One line per trial: sound, environment, system, movement, coordinates."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# participant_id={plan.participant_id}\n")
        fh.write(f"# seed={plan.seed}\n")
        fh.write(f"# first_system={plan.first_system.value}\n")
        for spec in plan.tutorial_trials + plan.trials:
            cols = [
                str(spec.index),
                str(spec.block),
                spec.sound.value,
                spec.environment.value,
                spec.system.value,
                spec.movement.value,
                repr(float(spec.source_start[0])),
                repr(float(spec.source_start[1])),
                repr(float(spec.height)),
            ]
            if spec.trajectory is not None:
                cols += [
                    repr(float(spec.trajectory.end[0])),
                    repr(float(spec.trajectory.end[1])),
                    repr(float(spec.trajectory.duration)),
                ]
            fh.write(",".join(cols) + "\n")


def read_session_plan(path) -> SessionPlan:
    meta = {}
    trials: list[TrialSpec] = []
    tutorial: list[TrialSpec] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, value = line[1:].split("=", 1)
                meta[key.strip()] = value.strip()
                continue
            cols = line.split(",")
            traj = None
            if len(cols) == 12:
                traj = Trajectory(
                    end=np.array([float(cols[9]), float(cols[10])]),
                    duration=float(cols[11]),
                )
            elif len(cols) != 9:
                raise ValueError(f"{path}: malformed trial line: {line!r}")
            spec = TrialSpec(
                index=int(cols[0]),
                block=int(cols[1]),
                sound=SoundId(cols[2]),
                environment=Environment(cols[3]),
                system=System(cols[4]),
                movement=Movement(cols[5]),
                source_start=np.array([float(cols[6]), float(cols[7])]),
                height=float(cols[8]),
                trajectory=traj,
            )
            (tutorial if spec.block < 0 else trials).append(spec)
    return SessionPlan(
        participant_id=meta.get("participant_id", "unknown"),
        seed=int(meta.get("seed", 0)),
        first_system=System(meta.get("first_system", "wfs")),
        trials=tuple(trials),
        tutorial_trials=tuple(tutorial),
    )


# --- trial execution ----------------------------------------------------------

@dataclass
class SimModels:
    """Physics bundle a trial runs against."""

    array: SpeakerArray = field(default_factory=lambda: build_square_array(2.0, 16, 1.6))
    rolloff: StereoRolloff = field(default_factory=StereoRolloff)
    misalignment: RigidTransform2D = field(
        default_factory=lambda: RigidTransform2D.identity()
    )
    wfs_mode: RenderMode = RenderMode.STATIC
    half_aperture: float = DEFAULT_HALF_APERTURE

    @property
    def area(self) -> Rect:
        return self.array.footprint


class TrialPhase(enum.Enum):
    IDLE = "idle"
    PLAYING = "playing"
    AWAITING_GUESS = "awaiting_guess"
    FEEDBACK = "feedback"
    DONE = "done"


class _WfsCueProvider:
    """Per-tick driving sets for the physically rendered source.

    Static mode renders a focused source from the side nearest to it and
    never looks at the listener; user-dependent mode re-selects the side and
    re-normalizes for the tracked head position, falling back to the static
    side when no valid zone covers the listener.
    """

    def __init__(self, models: SimModels):
        self.models = models
        self._cache_key = None
        self._cache: DrivingSet | None = None

    def driving(self, source_pos: np.ndarray, head: np.ndarray) -> DrivingSet:
        m = self.models
        user_dep = m.wfs_mode is RenderMode.USER_DEPENDENT
        key = (round(source_pos[0], 9), round(source_pos[1], 9))
        if user_dep:
            key += (round(head[0], 4), round(head[1], 4))
        if key == self._cache_key:
            return self._cache
        source = classify_source(np.array([source_pos[0], source_pos[1], m.array.height]), m.array)
        static_side = nearest_side(source.position, m.array)
        if user_dep:
            try:
                drv = driving_functions(
                    source, m.array, head, RenderMode.USER_DEPENDENT,
                    half_aperture=m.half_aperture,
                )
            except NoValidZoneError:
                drv = driving_functions(
                    source, m.array, mode=RenderMode.STATIC,
                    default_subarray=static_side, half_aperture=m.half_aperture,
                )
        elif source.kind is SourceKind.FOCUSED:
            drv = driving_functions(
                source, m.array, mode=RenderMode.STATIC,
                default_subarray=static_side, half_aperture=m.half_aperture,
            )
        else:
            drv = driving_functions(source, m.array, mode=RenderMode.STATIC)
        self._cache_key, self._cache = key, drv
        return drv


def _source_at(spec: TrialSpec, t_since_onset: float) -> np.ndarray:
    if spec.movement is Movement.STATIC or t_since_onset <= 0.0:
        return spec.source_start
    traj = spec.trajectory
    frac = min(t_since_onset / traj.duration, 1.0)
    return spec.source_start + frac * (traj.end - spec.source_start)


def run_trial(
    spec: TrialSpec,
    agent,
    models: SimModels,
    rng: np.random.Generator,
    *,
    start_tick: int = 0,
    pre_roll: float = 1.0,
    guess_timeout: float = 30.0,
    feedback_duration: float = 1.0,
    hand_dropout: float = 0.02,
) -> tuple[TrialResult, list[TrackingSample], int]:
    """Run one trial to completion; returns (result, tracking, next tick).

    Tracking is sampled every tick (50 Hz) through all phases.  Hand samples
    drop out with probability ``hand_dropout`` each tick, except at the guess
    tick itself; dropped samples are logged as the sentinel pose.
    """
    area = models.area
    wfs = _WfsCueProvider(models) if spec.system is System.WFS else None
    sound = SOUND_ASSETS[spec.sound]
    onset_tick = start_tick + int(round(pre_roll / TICK))
    deadline = sound.duration + guess_timeout
    agent.begin_trial(target_hint=spec.target, movement=spec.movement)

    samples: list[TrackingSample] = []
    guess: np.ndarray | None = None
    guess_time = 0.0
    clamped = 0
    last_cue: BinauralCue | None = None
    phase = TrialPhase.IDLE
    tick = start_tick
    while True:
        t = tick * TICK
        t_onset = (tick - onset_tick) * TICK
        playing = 0.0 <= t_onset < sound.duration
        if phase is TrialPhase.IDLE and t_onset >= 0.0:
            phase = TrialPhase.PLAYING
        if phase is TrialPhase.PLAYING and not playing:
            phase = TrialPhase.AWAITING_GUESS

        cue: BinauralCue | None = None
        if playing:
            true_pos = _source_at(spec, t_onset)
            try:
                if spec.system is System.WFS:
                    rendered = calibration.apply(models.misalignment, true_pos)
                    drv = wfs.driving(rendered, agent.listener.head_position)
                    cue = binaural_cues_wfs(drv, models.array, agent.listener)
                else:
                    cue = binaural_cues_stereo(
                        np.append(true_pos, spec.height),
                        agent.listener,
                        models.rolloff,
                    )
                last_cue = cue
            except SingularityError:
                # an ear passed within 1 mm of the source; hold the last cue
                cue = last_cue

        guessed_this_tick = False
        if phase in (TrialPhase.PLAYING, TrialPhase.AWAITING_GUESS):
            maybe_guess = agent.step(t_onset, cue, playing, TICK)
            if maybe_guess is None and t_onset >= deadline:
                maybe_guess = agent.force_guess()
            if maybe_guess is not None:
                guess = area.clamp(maybe_guess)
                guess_time = max(t_onset, 0.0)
                guessed_this_tick = True
                phase = TrialPhase.FEEDBACK
                feedback_end = t_onset + feedback_duration
        elif phase is TrialPhase.FEEDBACK:
            agent.step(t_onset, None, False, TICK)
            if t_onset >= feedback_end:
                phase = TrialPhase.DONE

        if not area.contains(agent.listener.head_position):
            clamped += 1
        samples.append(_tracking_sample(agent, t, rng, hand_dropout, force_valid=guessed_this_tick))
        tick += 1
        if phase is TrialPhase.DONE:
            break

    if clamped:
        log.debug("trial %d: agent clamped to the walkable area on %d ticks", spec.index, clamped)
    result = TrialResult(
        spec_index=spec.index,
        guess=guess,
        guess_height=spec.height,
        guess_time=guess_time,
        target=spec.target.copy(),
        score=float(np.linalg.norm(guess - spec.target)),
        sound_onset=onset_tick * TICK,
    )
    return result, samples, tick


def _tracking_sample(
    agent, t: float, rng: np.random.Generator, dropout: float, force_valid: bool
) -> TrackingSample:
    head = agent.listener.head_position
    rot = yaw_quaternion(agent.listener.yaw)
    hands = []
    for pos in (agent.left_hand, agent.right_hand):
        valid = force_valid or rng.uniform() >= dropout
        if valid:
            hands.append(HandSample(pos=np.asarray(pos, dtype=float).copy(), rot=np.array([1.0, 0.0, 0.0, 0.0]), valid=True))
        else:
            hands.append(HandSample(pos=HAND_SENTINEL_POS.copy(), rot=HAND_SENTINEL_ROT.copy(), valid=False))
    return TrackingSample(t=t, hmd_pos=head.copy(), hmd_rot=rot, left_hand=hands[0], right_hand=hands[1])


@dataclass
class SessionRun:
    plan: SessionPlan
    results: list[TrialResult]
    tracking: dict[int, list[TrackingSample]]  # spec index -> samples
    tutorial_results: list[TrialResult]
    tutorial_tracking: dict[int, list[TrackingSample]]

    def mean_score(self, system: System) -> float:
        specs = {s.index: s for s in self.plan.trials}
        scores = [r.score for r in self.results if specs[r.spec_index].system is system]
        return float(np.mean(scores))


def run_session(
    plan: SessionPlan,
    models: SimModels,
    agent_factory,
    *,
    guess_timeout: float = 30.0,
    hand_dropout: float = 0.02,
) -> SessionRun:
    """All trials of one participant on a single 50 Hz session clock.

    ``agent_factory(system, trial_rng_seed)`` supplies the search policy per
    system half; agents persist within a half so positions carry over between
    trials like a real participant's would.
    """
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, 0xC0FFEE]))
    results: list[TrialResult] = []
    tracking: dict[int, list[TrackingSample]] = {}
    tutorial_results: list[TrialResult] = []
    tutorial_tracking: dict[int, list[TrackingSample]] = {}
    agents: dict[System, object] = {}
    tick = 0
    for spec in plan.tutorial_trials + plan.trials:
        if spec.system not in agents:
            agents[spec.system] = agent_factory(spec.system, plan.seed)
        result, samples, tick = run_trial(
            spec,
            agents[spec.system],
            models,
            rng,
            start_tick=tick,
            guess_timeout=guess_timeout,
            hand_dropout=hand_dropout,
        )
        if spec.block < 0:
            tutorial_results.append(result)
            tutorial_tracking[spec.index] = samples
        else:
            results.append(result)
            tracking[spec.index] = samples
    return SessionRun(
        plan=plan,
        results=results,
        tracking=tracking,
        tutorial_results=tutorial_results,
        tutorial_tracking=tutorial_tracking,
    )


def run_cohort(
    participants: list[tuple[str, int, System]],
    models_factory,
    agent_factory,
    base_dir,
    demographics=None,
    *,
    tutorial: bool = False,
    guess_timeout: float = 30.0,
    hand_dropout: float = 0.02,
    area: Rect = Rect.square(2.0),
    height: float = 1.6,
):
    """Simulate and log one session per (participant_id, seed, first_system).

    ``models_factory(seed)`` builds the physics per participant (this is
    where the per-session misalignment sample enters) and
    ``agent_factory(system, seed)`` the policies.  Returns the written
    directories, one per participant.
    """
    from . import logfiles  # session -> logfiles would otherwise be circular

    directories = []
    for i, (participant_id, seed, first_system) in enumerate(participants):
        plan = generate_session(
            participant_id, seed, first_system, area=area, height=height, tutorial=tutorial
        )
        run = run_session(
            plan,
            models_factory(seed),
            agent_factory,
            guess_timeout=guess_timeout,
            hand_dropout=hand_dropout,
        )
        dems = (
            demographics[i]
            if demographics is not None
            else logfiles.DemographicsRow(
                participant_id=participant_id,
                age=27 + (i % 14),
                gender=("m", "f")[i % 2],
                vr_experience=(
                    logfiles.VrExperience.REGULAR,
                    logfiles.VrExperience.ENTHUSIAST,
                )[i % 2],
            )
        )
        directories.append(logfiles.write_session_dir(run, dems, base_dir))
    return directories
