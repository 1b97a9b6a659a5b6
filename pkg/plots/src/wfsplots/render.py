"""Drawing. One function per figure kind, no computation beyond axis scaling."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .bundle import SchemaError, Grid, floats, read_grid, read_manifest, read_table


class FigureKind(enum.Enum):
    HEATMAP = "Heatmap"
    KNN_MAP = "KnnMap"
    REGRESSION = "Regression"
    PATHS = "Paths"
    CURVES = "Curves"
    FIELD_MAP = "FieldMap"


@dataclass(frozen=True)
class PlotSpec:
    input_path: Path
    kind: FigureKind
    output_path: Path
    title: str | None = None


@dataclass(frozen=True)
class RenderResult:
    output_path: Path
    annotations: tuple[str, ...] = ()


def render(spec: PlotSpec) -> RenderResult:
    """Draw one figure; returns the written path and any text annotations."""
    drawers = {
        FigureKind.HEATMAP: _draw_grid,
        FigureKind.KNN_MAP: _draw_grid,
        FigureKind.REGRESSION: _draw_regression,
        FigureKind.CURVES: _draw_curves,
        FigureKind.PATHS: _draw_paths,
        FigureKind.FIELD_MAP: _draw_field_map,
    }
    spec.output_path.parent.mkdir(parents=True, exist_ok=True)
    fig = plt.figure(figsize=(6.0, 5.0))
    try:
        annotations = drawers[spec.kind](fig, spec)
        fig.savefig(spec.output_path, dpi=120)
    finally:
        plt.close(fig)
    return RenderResult(output_path=spec.output_path, annotations=tuple(annotations))


def _draw_grid(fig, spec: PlotSpec) -> list[str]:
    grid = read_grid(spec.input_path)
    expected = "density" if spec.kind is FigureKind.HEATMAP else "knn_score"
    if grid.kind != expected:
        raise SchemaError(spec.input_path, f"grid kind {grid.kind!r}, expected {expected!r}")
    ax = fig.add_subplot(111)
    cmap = "magma" if spec.kind is FigureKind.HEATMAP else "viridis"
    im = ax.imshow(grid.values, origin="lower", extent=grid.extent, cmap=cmap, aspect="equal")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(spec.title or grid.title)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    return []


def _draw_regression(fig, spec: PlotSpec) -> list[str]:
    cols = read_table(spec.input_path, ("participant", "system", "slope", "intercept", "n"))
    slopes = floats(cols, "slope", spec.input_path)
    intercepts = floats(cols, "intercept", spec.input_path)
    counts = floats(cols, "n", spec.input_path)
    systems = sorted(set(cols["system"]))
    axes = fig.subplots(1, max(len(systems), 1), sharey=True)
    if len(systems) <= 1:
        axes = [axes]
    annotations = []
    for ax, system in zip(axes, systems):
        for participant, sys_name, slope, intercept, n in zip(
            cols["participant"], cols["system"], slopes, intercepts, counts
        ):
            if sys_name != system:
                continue
            x = np.array([0.0, max(n - 1, 1.0)])
            ax.plot(x, intercept + slope * x, label=participant)
            text = f"{slope:.3f}"
            annotations.append(text)
            ax.annotate(
                text,
                xy=(x[-1], intercept + slope * x[-1]),
                fontsize=7,
                textcoords="offset points",
                xytext=(2, 0),
            )
        ax.set_title(system)
        ax.set_xlabel("trial order")
        ax.legend(fontsize=6)
    axes[0].set_ylabel("score (m)")
    fig.suptitle(spec.title or "Learning regressions")
    return annotations


def _draw_curves(fig, spec: PlotSpec) -> list[str]:
    cols = read_table(spec.input_path, ("bin_center", "mean_distance"))
    x = floats(cols, "bin_center", spec.input_path)
    y = floats(cols, "mean_distance", spec.input_path)
    ax = fig.add_subplot(111)
    ax.plot(x, y, marker="o", ms=3)
    ax.set_xlabel("normalized trial time")
    ax.set_ylabel("distance to target (m)")
    ax.set_title(spec.title or Path(spec.input_path).stem)
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(bottom=0.0)
    return []


def _draw_paths(fig, spec: PlotSpec) -> list[str]:
    cols = read_table(spec.input_path, ("trial", "t", "x", "y", "target_x", "target_y"))
    x = floats(cols, "x", spec.input_path)
    y = floats(cols, "y", spec.input_path)
    tx = floats(cols, "target_x", spec.input_path)
    ty = floats(cols, "target_y", spec.input_path)
    labels = cols["trial"]
    trials = list(dict.fromkeys(labels))  # first-seen order
    ncols = 2
    nrows = max((len(trials) + ncols - 1) // ncols, 1)
    axes = np.atleast_1d(fig.subplots(nrows, ncols)).ravel()
    for ax in axes[len(trials):]:
        ax.axis("off")
    for ax, trial in zip(axes, trials):
        mask = np.array([lbl == trial for lbl in labels])
        ax.plot(x[mask], y[mask], lw=0.8)
        ax.plot(x[mask][0], y[mask][0], "go", ms=4)
        ax.plot(tx[mask][0], ty[mask][0], "r*", ms=8)
        ax.set_title(trial, fontsize=7)
        ax.set_aspect("equal")
        ax.set_xlim(-1.05, 1.05)
        ax.set_ylim(-1.05, 1.05)
    fig.suptitle(spec.title or Path(spec.input_path).stem)
    return []


def _draw_field_map(fig, spec: PlotSpec) -> list[str]:
    # same commented-metadata convention, but long-format rows
    meta = {}
    with open(spec.input_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            for token in line[1:].strip().split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    meta[key] = value
    for key in ("nx", "ny", "xmin", "xmax", "ymin", "ymax"):
        if key not in meta:
            raise SchemaError(spec.input_path, f"missing field-map metadata key {key!r}")
    cols = read_table_skipping_comments(spec.input_path, ("x", "y", "abs_syn", "abs_ideal", "error_contribution"))
    x = floats(cols, "x", spec.input_path)
    y = floats(cols, "y", spec.input_path)
    err = floats(cols, "error_contribution", spec.input_path)
    ax = fig.add_subplot(111)
    sc = ax.scatter(x, y, c=err, s=14, marker="s", cmap="inferno")
    fig.colorbar(sc, ax=ax, shrink=0.85, label="error contribution")
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    title = spec.title or Path(spec.input_path).stem
    if "error" in meta:
        title += f" (error {meta['error']})"
    ax.set_title(title)
    return []


def read_table_skipping_comments(path, required):
    """Like bundle.read_table but tolerant of leading # metadata lines."""
    from io import StringIO

    with open(path, "r", encoding="utf-8") as fh:
        body = "".join(line for line in fh if not line.startswith("#"))
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as tmp:
        tmp.write(body)
        name = tmp.name
    try:
        return read_table(name, required)
    except SchemaError as exc:
        raise SchemaError(path, exc.problem) from exc
    finally:
        Path(name).unlink(missing_ok=True)


@dataclass
class RenderSummary:
    rendered: list[Path] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)  # (file, reason)

    @property
    def ok(self) -> bool:
        return not self.failures


def render_all(bundle_dir, out_dir, kinds: set[str] | None = None) -> RenderSummary:
    """Render every manifest entry (optionally filtered by kind).

    Nothing is skipped silently: entries filtered out by ``kinds`` are the
    only ones not attempted, and every attempted failure lands in the
    summary.  Output names are deterministic (input stem + .png), so reruns
    overwrite their previous selves.
    """
    bundle_dir = Path(bundle_dir)
    out_dir = Path(out_dir)
    summary = RenderSummary()
    entries = read_manifest(bundle_dir)
    for entry in entries:
        if kinds is not None and entry["kind"] not in kinds:
            continue
        try:
            kind = FigureKind(entry["kind"])
            spec = PlotSpec(
                input_path=bundle_dir / entry["file"],
                kind=kind,
                output_path=out_dir / (Path(entry["file"]).stem + ".png"),
                title=entry.get("title"),
            )
            result = render(spec)
            summary.rendered.append(result.output_path)
        except (SchemaError, ValueError, OSError) as exc:
            summary.failures.append((entry["file"], str(exc)))
    return summary
