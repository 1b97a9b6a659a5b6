"""Statistics and spatial aggregates over logged sessions.

Everything here is a pure function of loaded sessions: grouped score/time
means, the sub-threshold accuracy fraction, density heatmaps, inverse-
distance-weighted kNN score maps, per-participant OLS learning slopes and
normalized-time distance curves.  :func:`export_analysis` writes the whole
bundle as CSV/JSON with a manifest, which is the only interface the plotting
front end consumes (layout in docs/analysis-outputs.md).
"""

from __future__ import annotations

import enum
import json
import logging as _logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import InsufficientDataError, UndefinedFractionError
from .geometry import Rect
from .logfiles import LoggedTrial, Session
from .session import Environment, Movement, SoundId, System

log = _logging.getLogger(__name__)

DEFAULT_BINS = 40
DEFAULT_K = 15
IDW_EPSILON = 1e-6  # m, keeps coincident samples finite
IMPROVEMENT_SLOPE = -0.1  # m per trial; below this counts as learning


class GridKind(enum.Enum):
    DENSITY = "density"
    KNN_SCORE = "knn_score"


@dataclass(frozen=True)
class ScoreGrid:
    bounds: Rect
    values: np.ndarray  # (ny, nx), row-major, row 0 at ymin
    kind: GridKind
    overflow: int = 0  # points outside the bounds (density only)

    @property
    def bins(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[0]


@dataclass(frozen=True)
class ConditionFilter:
    """Conjunction of per-dimension predicates; None means any."""

    system: System | None = None
    environment: Environment | None = None
    sound: SoundId | None = None
    movement: Movement | None = None

    def matches(self, trial: LoggedTrial) -> bool:
        return (
            (self.system is None or trial.system is self.system)
            and (self.environment is None or trial.environment is self.environment)
            and (self.sound is None or trial.sound is self.sound)
            and (self.movement is None or trial.movement is self.movement)
        )


def iter_trials(sessions: list[Session], where: ConditionFilter | None = None):
    where = where or ConditionFilter()
    for session in sessions:
        for trial in session.trials:
            if where.matches(trial):
                yield session, trial


@dataclass(frozen=True)
class GroupStats:
    group: tuple[str, ...]
    mean_score: float
    mean_guess_time: float
    n: int


_DIMENSIONS = {
    "system": lambda t: t.system.value,
    "environment": lambda t: t.environment.value,
    "sound": lambda t: t.sound.value,
    "movement": lambda t: t.movement.value,
    "participant": None,  # resolved against the session
}


def mean_scores(
    sessions: list[Session],
    group_by: tuple[str, ...],
    where: ConditionFilter | None = None,
) -> list[GroupStats]:
    """Arithmetic mean score and guess time per condition group.

    Groups are ordered by their key; empty groups cannot occur (groups only
    exist where trials do), but an empty selection yields an empty table
    with a warning.
    """
    for dim in group_by:
        if dim not in _DIMENSIONS:
            raise ValueError(f"unknown grouping dimension {dim!r}")
    buckets: dict[tuple[str, ...], list[LoggedTrial]] = {}
    for session, trial in iter_trials(sessions, where):
        key = tuple(
            session.participant_id if dim == "participant" else _DIMENSIONS[dim](trial)
            for dim in group_by
        )
        buckets.setdefault(key, []).append(trial)
    if not buckets:
        warnings.warn("mean_scores: empty selection, returning no groups")
        return []
    out = []
    for key in sorted(buckets):
        trials = buckets[key]
        out.append(
            GroupStats(
                group=key,
                mean_score=float(np.mean([t.score for t in trials])),
                mean_guess_time=float(np.mean([t.guess_time for t in trials])),
                n=len(trials),
            )
        )
    return out


def fraction_below(
    sessions: list[Session], threshold: float, where: ConditionFilter | None = None
) -> float:
    """Fraction of trials with a score strictly below ``threshold``."""
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    scores = [t.score for _, t in iter_trials(sessions, where)]
    if not scores:
        raise UndefinedFractionError("no trials match the filter")
    return float(np.count_nonzero(np.asarray(scores) < threshold) / len(scores))


def density_heatmap(points: np.ndarray, bounds: Rect, bins: tuple[int, int]) -> ScoreGrid:
    """Point-count grid; each in-bounds point lands in exactly one cell.

    Interior boundary points go to the lower-index cell; points outside the
    bounds are tallied in ``overflow`` rather than silently dropped, so
    in-bounds mass plus overflow always equals the point count.
    """
    nx, ny = bins
    if nx < 1 or ny < 1:
        raise ValueError("need at least one bin per axis")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.zeros((ny, nx))
    overflow = 0
    for x, y in points[:, :2]:
        if not bounds.contains((x, y)):
            overflow += 1
            continue
        ix = _cell_index(x, bounds.xmin, bounds.width, nx)
        iy = _cell_index(y, bounds.ymin, bounds.height, ny)
        values[iy, ix] += 1.0
    return ScoreGrid(bounds=bounds, values=values, kind=GridKind.DENSITY, overflow=overflow)


def _cell_index(v: float, lo: float, extent: float, n: int) -> int:
    """Cell of v over [lo, lo+extent): half-open (lo_i, hi_i] cells, except
    the very first cell also owns its lower edge."""
    scaled = (v - lo) / extent * n
    idx = int(np.ceil(scaled)) - 1
    return min(max(idx, 0), n - 1)


def grid_cell_centers(bounds: Rect, bins: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    nx, ny = bins
    xs = bounds.xmin + (np.arange(nx) + 0.5) * bounds.width / nx
    ys = bounds.ymin + (np.arange(ny) + 0.5) * bounds.height / ny
    return xs, ys


def knn_score_map(
    samples: list[tuple[np.ndarray, float]],
    k: int = DEFAULT_K,
    bounds: Rect = Rect.square(2.0),
    bins: tuple[int, int] = (DEFAULT_BINS, DEFAULT_BINS),
    epsilon: float = IDW_EPSILON,
) -> ScoreGrid:
    """Inverse-distance-weighted k-nearest-neighbor score interpolation.

    Every cell center averages its k nearest samples with weights
    ``1 / (epsilon + distance)``; k is clamped to the sample count.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not samples:
        raise ValueError("need at least one sample")
    positions = np.array([np.asarray(p, dtype=float)[:2] for p, _ in samples])
    scores = np.array([float(s) for _, s in samples])
    k = min(k, len(samples))
    xs, ys = grid_cell_centers(bounds, bins)
    gx, gy = np.meshgrid(xs, ys)
    cells = np.column_stack([gx.ravel(), gy.ravel()])
    dist, idx = cKDTree(positions).query(cells, k=k)
    dist = np.atleast_2d(dist.reshape(len(cells), k))
    idx = idx.reshape(len(cells), k)
    weights = 1.0 / (epsilon + dist)
    values = np.sum(weights * scores[idx], axis=1) / np.sum(weights, axis=1)
    return ScoreGrid(
        bounds=bounds,
        values=values.reshape(bins[1], bins[0]),
        kind=GridKind.KNN_SCORE,
    )


def learning_slope(scores_chronological) -> float:
    """OLS slope of score against trial order (0, 1, 2, ...)."""
    y = np.asarray(list(scores_chronological), dtype=float)
    if len(y) < 2:
        raise InsufficientDataError("need at least two scores for a slope")
    x = np.arange(len(y), dtype=float)
    return float(np.polyfit(x, y, 1)[0])


def is_improving(slope: float) -> bool:
    return slope < IMPROVEMENT_SLOPE


class Tracker(enum.Enum):
    HMD = "hmd"
    RIGHT_HAND = "right_hand"


def _trial_distance_samples(trial: LoggedTrial, tracker: Tracker):
    """(normalized time, distance-to-target) pairs between onset and guess."""
    t0 = trial.sound_onset
    t1 = trial.sound_onset + trial.guess_time
    if t1 <= t0:
        return None
    pairs = []
    for s in trial.tracking:
        if not t0 <= s.t <= t1:
            continue
        if tracker is Tracker.HMD:
            pos = s.hmd_pos
        else:
            if not s.right_hand.valid:
                continue
            pos = s.right_hand.pos
        pairs.append(((s.t - t0) / (t1 - t0), float(np.linalg.norm(pos[:2] - trial.target))))
    return pairs if len(pairs) >= 2 else None


def normalized_time_curves(
    sessions: list[Session],
    tracker: Tracker = Tracker.HMD,
    bins: int = 20,
    where: ConditionFilter | None = None,
) -> np.ndarray:
    """Mean distance-to-target per normalized-time bin, averaged over trials.

    Each qualifying trial is rescaled to [0, 1] between sound onset and its
    guess, binned, and averaged per bin; the curve is the across-trial mean
    of the per-trial bin means (sentinel hand samples are already gone).
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    per_trial = []
    for _, trial in iter_trials(sessions, where):
        pairs = _trial_distance_samples(trial, tracker)
        if pairs is None:
            continue
        sums = np.zeros(bins)
        counts = np.zeros(bins)
        for u, d in pairs:
            b = min(int(u * bins), bins - 1)
            sums[b] += d
            counts[b] += 1
        with np.errstate(invalid="ignore"):
            per_trial.append(np.where(counts > 0, sums / np.maximum(counts, 1), np.nan))
    if not per_trial:
        raise InsufficientDataError("no trial has enough samples between onset and guess")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        return np.nanmean(np.vstack(per_trial), axis=0)


# --- bundle export ---------------------------------------------------------------

MANIFEST_FILE = "manifest.json"


def write_grid_csv(path, grid: ScoreGrid, title: str) -> None:
    nx, ny = grid.bins
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# kind={grid.kind.value}\n")
        fh.write(f"# title={title}\n")
        fh.write(
            f"# xmin={grid.bounds.xmin!r} xmax={grid.bounds.xmax!r} "
            f"ymin={grid.bounds.ymin!r} ymax={grid.bounds.ymax!r} nx={nx} ny={ny}\n"
        )
        fh.write(f"# overflow={grid.overflow}\n")
        for row in grid.values:  # row 0 is the ymin row
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_grid_csv(path) -> ScoreGrid:
    meta = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("title="):  # titles may contain spaces
                    meta["title"] = body.split("=", 1)[1]
                    continue
                for token in body.split():
                    if "=" in token:
                        key, value = token.split("=", 1)
                        meta[key] = value
                continue
            if line:
                rows.append([float(v) for v in line.split(",")])
    values = np.array(rows)
    bounds = Rect(
        float(meta["xmin"]), float(meta["xmax"]), float(meta["ymin"]), float(meta["ymax"])
    )
    kind = GridKind(meta["kind"])
    return ScoreGrid(bounds=bounds, values=values, kind=kind, overflow=int(meta.get("overflow", 0)))


def _write_table(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def export_analysis(
    sessions: list[Session],
    out_dir,
    *,
    k: int = DEFAULT_K,
    bins: int = DEFAULT_BINS,
    bounds: Rect = Rect.square(2.0),
    curve_bins: int = 20,
    knn_at_guess: bool = False,
    paths_per_system: int = 4,
) -> Path:
    """Write the full analysis bundle and its manifest; returns the directory.

    kNN map samples sit at the true source position by default (scores are
    attributed to where the sound was); ``knn_at_guess`` attributes them to
    the guess instead.  Every write is deterministic.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: list[dict] = []

    def add(name: str, kind: str, title: str):
        manifest.append({"file": name, "kind": kind, "title": title})

    # grouped score tables (bar-figure data; no renderer kind)
    tables = {
        "mean_scores_by_system_movement.csv": ("system", "movement"),
        "mean_scores_by_sound.csv": ("sound",),
        "mean_scores_by_environment.csv": ("environment",),
        "mean_scores_by_environment_sound.csv": ("environment", "sound"),
    }
    for name, dims in tables.items():
        stats = mean_scores(sessions, dims)
        _write_table(
            out / name,
            list(dims) + ["mean_score", "mean_guess_time", "n"],
            [[*s.group, s.mean_score, s.mean_guess_time, s.n] for s in stats],
        )

    rows = []
    for system in System:
        rows.append(
            [system.value, fraction_below(sessions, 0.2, ConditionFilter(system=system))]
        )
    _write_table(out / "fraction_below_20cm.csv", ["system", "fraction"], rows)

    # densities: all generated sources, guesses per system
    sources = np.array([t.source for _, t in iter_trials(sessions)])
    write_grid_csv(
        out / "density_sources.csv",
        density_heatmap(sources, bounds, (bins, bins)),
        "All generated sound sources",
    )
    add("density_sources.csv", "Heatmap", "All generated sound sources")
    for system in System:
        guesses = np.array(
            [t.guess for _, t in iter_trials(sessions, ConditionFilter(system=system))]
        )
        name = f"density_guesses_{system.value}.csv"
        write_grid_csv(
            out / name,
            density_heatmap(guesses, bounds, (bins, bins)),
            f"Guesses ({system.value})",
        )
        add(name, "Heatmap", f"Guesses ({system.value})")

    # kNN score maps per system
    for system in System:
        samples = [
            ((t.guess if knn_at_guess else t.source), t.score)
            for _, t in iter_trials(sessions, ConditionFilter(system=system))
        ]
        name = f"knn_scores_{system.value}.csv"
        write_grid_csv(
            out / name,
            knn_score_map(samples, k=k, bounds=bounds, bins=(bins, bins)),
            f"kNN (k={k}) mean score ({system.value})",
        )
        add(name, "KnnMap", f"kNN (k={k}) mean score ({system.value})")

    # learning slopes over chronologically ordered static trials
    slope_rows = []
    for session in sessions:
        for system in System:
            static = [
                t
                for t in sorted(session.trials, key=lambda t: t.index)
                if t.system is system and t.movement is Movement.STATIC
            ]
            scores = [t.score for t in static]
            slope = learning_slope(scores)
            intercept = float(np.polyfit(np.arange(len(scores)), scores, 1)[1])
            slope_rows.append(
                [
                    session.participant_id,
                    system.value,
                    slope,
                    intercept,
                    len(scores),
                    str(is_improving(slope)).lower(),
                ]
            )
    _write_table(
        out / "learning_slopes.csv",
        ["participant", "system", "slope", "intercept", "n", "improving"],
        slope_rows,
    )
    add("learning_slopes.csv", "Regression", "Learning slopes (static trials)")

    # normalized-time distance curves
    for tracker in Tracker:
        curve = normalized_time_curves(sessions, tracker, bins=curve_bins)
        name = f"curve_{tracker.value}.csv"
        _write_table(
            out / name,
            ["bin_center", "mean_distance"],
            [[float((i + 0.5) / curve_bins), float(v)] for i, v in enumerate(curve)],
        )
        add(name, "Curves", f"Distance to target over normalized time ({tracker.value})")

    # a few representative search paths per system
    for system in System:
        rows = []
        kept = 0
        for session, trial in iter_trials(sessions, ConditionFilter(system=system)):
            if kept >= paths_per_system:
                break
            t0, t1 = trial.sound_onset, trial.sound_onset + trial.guess_time
            pts = [s for s in trial.tracking if t0 <= s.t <= t1]
            if len(pts) < 10:
                continue
            label = f"{session.participant_id}:{trial.index}"
            for s in pts:
                rows.append(
                    [
                        label,
                        float(s.t - t0),
                        float(s.hmd_pos[0]),
                        float(s.hmd_pos[1]),
                        float(trial.target[0]),
                        float(trial.target[1]),
                    ]
                )
            kept += 1
        name = f"paths_{system.value}.csv"
        _write_table(out / name, ["trial", "t", "x", "y", "target_x", "target_y"], rows)
        add(name, "Paths", f"Search paths ({system.value})")

    with open(out / MANIFEST_FILE, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"entries": manifest}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out
