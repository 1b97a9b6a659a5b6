"""The session log family: session.csv, pos_round_<n>.csv, dems.csv.

The study's logging names these files and the 50 Hz rate; the column
schemas here are normative for this artifact and documented in
docs/formats.md.  Floats are written with ``repr`` (shortest round-trip
form), lines end with LF, and identical inputs produce identical bytes.

Lost hand tracking is stored in-band as a sentinel pose (zero position,
identity quaternion); :func:`read_session` flags those samples invalid so
positional analyses can drop them while keeping the headset stream intact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .session import (
    HAND_SENTINEL_POS,
    HAND_SENTINEL_ROT,
    Environment,
    HandSample,
    Movement,
    SessionPlan,
    SessionRun,
    SoundId,
    System,
    TrackingSample,
    TrialResult,
    TrialSpec,
    Trajectory,
)

SESSION_FILE = "session.csv"
DEMS_FILE = "dems.csv"
TUTORIAL_FILE = "tutorial.csv"

SESSION_COLUMNS = [
    "trial", "block", "system", "environment", "sound", "movement",
    "source_x", "source_y", "traj_end_x", "traj_end_y", "traj_duration",
    "guess_x", "guess_y", "guess_height", "guess_time", "sound_onset", "score",
]
TRACKING_COLUMNS = (
    ["t"]
    + [f"hmd_{c}" for c in ("x", "y", "z", "qw", "qx", "qy", "qz")]
    + [f"lhand_{c}" for c in ("x", "y", "z", "qw", "qx", "qy", "qz")]
    + [f"rhand_{c}" for c in ("x", "y", "z", "qw", "qx", "qy", "qz")]
)
DEMS_COLUMNS = ["participant_id", "age", "gender", "vr_experience"]


class VrExperience(enum.Enum):
    NONE = "none"
    CASUAL = "casual"
    REGULAR = "regular"
    ENTHUSIAST = "enthusiast"


@dataclass(frozen=True)
class DemographicsRow:
    participant_id: str
    age: int
    gender: str
    vr_experience: VrExperience


class LogParseError(Exception):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = str(path)
        self.line = line
        self.reason = reason


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row(values) -> str:
    return ",".join(_fmt(v) for v in values) + "\n"


def session_row(spec: TrialSpec, result: TrialResult) -> list:
    dynamic = spec.movement is Movement.DYNAMIC
    return [
        spec.index,
        spec.block,
        spec.system.value,
        spec.environment.value,
        spec.sound.value,
        spec.movement.value,
        float(spec.source_start[0]),
        float(spec.source_start[1]),
        float(spec.trajectory.end[0]) if dynamic else "",
        float(spec.trajectory.end[1]) if dynamic else "",
        float(spec.trajectory.duration) if dynamic else "",
        float(result.guess[0]),
        float(result.guess[1]),
        float(result.guess_height),
        float(result.guess_time),
        float(result.sound_onset),
        float(result.score),
    ]


def write_session_log(plan: SessionPlan, results: list[TrialResult], directory) -> Path:
    """Header plus one row per trial, in plan order."""
    if len(results) != len(plan.trials):
        raise ValueError(f"expected {len(plan.trials)} results, got {len(results)}")
    by_index = {r.spec_index: r for r in results}
    path = Path(directory) / SESSION_FILE
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SESSION_COLUMNS) + "\n")
        for spec in plan.trials:
            fh.write(_row(session_row(spec, by_index[spec.index])))
    return path


def write_tracking(trial_nr: int, samples: list[TrackingSample], directory) -> Path:
    """50 Hz pose stream; invalid hands become the sentinel pose."""
    path = Path(directory) / f"pos_round_{trial_nr}.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TRACKING_COLUMNS) + "\n")
        last_t = -np.inf
        for s in samples:
            if s.t < last_t:
                raise ValueError("tracking samples must be time-ordered")
            last_t = s.t
            values = [float(s.t)]
            values += [float(v) for v in s.hmd_pos] + [float(v) for v in s.hmd_rot]
            for hand in (s.left_hand, s.right_hand):
                pos = hand.pos if hand.valid else HAND_SENTINEL_POS
                rot = hand.rot if hand.valid else HAND_SENTINEL_ROT
                values += [float(v) for v in pos] + [float(v) for v in rot]
            fh.write(_row(values))
    return path


def write_dems(row: DemographicsRow, directory) -> Path:
    path = Path(directory) / DEMS_FILE
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(DEMS_COLUMNS) + "\n")
        fh.write(_row([row.participant_id, row.age, row.gender, row.vr_experience.value]))
    return path


def session_directory(base_dir, participant_id: str, seed: int) -> Path:
    """logs/<participant>_<seed>/ -- deterministic, unlike wall-clock naming."""
    return Path(base_dir) / f"{participant_id}_{seed}"


def write_session_dir(
    run: SessionRun, dems: DemographicsRow, base_dir
) -> Path:
    """Everything one session produces, in its own directory."""
    directory = session_directory(base_dir, run.plan.participant_id, run.plan.seed)
    directory.mkdir(parents=True, exist_ok=True)
    write_session_log(run.plan, run.results, directory)
    for spec_index, samples in sorted(run.tracking.items()):
        write_tracking(spec_index, samples, directory)
    write_dems(dems, directory)
    if run.tutorial_results:
        with open(directory / TUTORIAL_FILE, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(SESSION_COLUMNS) + "\n")
            specs = {spec.index: spec for spec in run.plan.tutorial_trials}
            for result in run.tutorial_results:
                fh.write(_row(session_row(specs[result.spec_index], result)))
    return directory


# --- reading -------------------------------------------------------------------

@dataclass(frozen=True)
class LoggedTrial:
    """One trial as read back: its design row plus the tracking stream."""

    index: int
    block: int
    system: System
    environment: Environment
    sound: SoundId
    movement: Movement
    source: np.ndarray  # (2,)
    trajectory: Trajectory | None
    guess: np.ndarray  # (2,)
    guess_height: float
    guess_time: float
    sound_onset: float
    score: float
    tracking: tuple[TrackingSample, ...]

    @property
    def target(self) -> np.ndarray:
        return self.trajectory.end if self.movement is Movement.DYNAMIC else self.source

    @property
    def hmd_count(self) -> int:
        return len(self.tracking)

    @property
    def valid_hand_count(self) -> int:
        return sum(1 for s in self.tracking if s.left_hand.valid) + sum(
            1 for s in self.tracking if s.right_hand.valid
        )


@dataclass(frozen=True)
class Session:
    directory: str
    demographics: DemographicsRow
    trials: tuple[LoggedTrial, ...]

    @property
    def participant_id(self) -> str:
        return self.demographics.participant_id


def _parse_float(token: str, path, line: int, column: str) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise LogParseError(path, line, f"bad float in column {column}: {token!r}") from exc


def _read_rows(path, expected_columns: list[str]):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split(",") != expected_columns:
            raise LogParseError(path, 1, f"unexpected header: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split(",")
            if len(cols) != len(expected_columns):
                raise LogParseError(
                    path, lineno, f"expected {len(expected_columns)} fields, got {len(cols)}"
                )
            yield lineno, cols


def read_tracking(path) -> tuple[TrackingSample, ...]:
    samples = []
    for lineno, cols in _read_rows(path, TRACKING_COLUMNS):
        vals = [_parse_float(c, path, lineno, TRACKING_COLUMNS[i]) for i, c in enumerate(cols)]
        hands = []
        for base in (8, 15):
            pos = np.array(vals[base : base + 3])
            rot = np.array(vals[base + 3 : base + 7])
            valid = not (np.array_equal(pos, HAND_SENTINEL_POS) and np.array_equal(rot, HAND_SENTINEL_ROT))
            hands.append(HandSample(pos=pos, rot=rot, valid=valid))
        samples.append(
            TrackingSample(
                t=vals[0],
                hmd_pos=np.array(vals[1:4]),
                hmd_rot=np.array(vals[4:8]),
                left_hand=hands[0],
                right_hand=hands[1],
            )
        )
    return tuple(samples)


def read_dems(path) -> DemographicsRow:
    rows = list(_read_rows(path, DEMS_COLUMNS))
    if len(rows) != 1:
        raise LogParseError(path, 1, f"expected exactly one demographics row, got {len(rows)}")
    lineno, cols = rows[0]
    try:
        experience = VrExperience(cols[3])
    except ValueError as exc:
        raise LogParseError(path, lineno, f"unknown vr_experience {cols[3]!r}") from exc
    return DemographicsRow(
        participant_id=cols[0], age=int(cols[1]), gender=cols[2], vr_experience=experience
    )


def read_session(directory) -> Session:
    """Load one session directory back into memory.

    Hand samples equal to the sentinel pose come back flagged invalid, which
    is how downstream analyses exclude them; headset samples are never
    filtered.
    """
    directory = Path(directory)
    session_path = directory / SESSION_FILE
    if not session_path.exists():
        raise FileNotFoundError(f"no {SESSION_FILE} in {directory}")
    dems = read_dems(directory / DEMS_FILE)
    trials = []
    for lineno, cols in _read_rows(session_path, SESSION_COLUMNS):
        row = dict(zip(SESSION_COLUMNS, cols))
        movement = Movement(row["movement"])
        trajectory = None
        if movement is Movement.DYNAMIC:
            trajectory = Trajectory(
                end=np.array(
                    [
                        _parse_float(row["traj_end_x"], session_path, lineno, "traj_end_x"),
                        _parse_float(row["traj_end_y"], session_path, lineno, "traj_end_y"),
                    ]
                ),
                duration=_parse_float(row["traj_duration"], session_path, lineno, "traj_duration"),
            )
        index = int(row["trial"])
        tracking_path = directory / f"pos_round_{index}.csv"
        if not tracking_path.exists():
            raise FileNotFoundError(f"missing tracking file {tracking_path}")
        trials.append(
            LoggedTrial(
                index=index,
                block=int(row["block"]),
                system=System(row["system"]),
                environment=Environment(row["environment"]),
                sound=SoundId(row["sound"]),
                movement=movement,
                source=np.array(
                    [
                        _parse_float(row["source_x"], session_path, lineno, "source_x"),
                        _parse_float(row["source_y"], session_path, lineno, "source_y"),
                    ]
                ),
                trajectory=trajectory,
                guess=np.array(
                    [
                        _parse_float(row["guess_x"], session_path, lineno, "guess_x"),
                        _parse_float(row["guess_y"], session_path, lineno, "guess_y"),
                    ]
                ),
                guess_height=_parse_float(row["guess_height"], session_path, lineno, "guess_height"),
                guess_time=_parse_float(row["guess_time"], session_path, lineno, "guess_time"),
                sound_onset=_parse_float(row["sound_onset"], session_path, lineno, "sound_onset"),
                score=_parse_float(row["score"], session_path, lineno, "score"),
                tracking=read_tracking(tracking_path),
            )
        )
    return Session(directory=str(directory), demographics=dems, trials=tuple(trials))


def read_cohort(base_dir) -> list[Session]:
    """All session directories under a logs root, sorted by name."""
    base = Path(base_dir)
    dirs = sorted(d for d in base.iterdir() if d.is_dir() and (d / SESSION_FILE).exists())
    if not dirs:
        raise FileNotFoundError(f"no session directories under {base}")
    return [read_session(d) for d in dirs]
