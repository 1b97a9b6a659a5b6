"""wfsplot: render an analysis bundle into figures.

    wfsplot <bundle> <out> [--kinds Heatmap KnnMap ...]
    wfsplot --single <file> --kind FieldMap --out image.png

Exit codes: 0 all rendered, 1 at least one failure or empty bundle,
2 usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bundle import SchemaError
from .render import FigureKind, PlotSpec, RenderSummary, render, render_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wfsplot", description=__doc__.splitlines()[0])
    parser.add_argument("bundle", nargs="?", help="analysis bundle directory")
    parser.add_argument("out", nargs="?", help="output directory for images")
    parser.add_argument(
        "--kinds", nargs="+", choices=[k.value for k in FigureKind],
        help="render only these figure kinds",
    )
    parser.add_argument("--single", help="render one input file instead of a bundle")
    parser.add_argument("--kind", choices=[k.value for k in FigureKind],
                        help="figure kind for --single")
    parser.add_argument("--out-file", dest="out_file", help="image path for --single")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.single:
        if not args.kind or not args.out_file:
            print("error: --single needs --kind and --out-file", file=sys.stderr)
            return 2
        spec = PlotSpec(
            input_path=Path(args.single),
            kind=FigureKind(args.kind),
            output_path=Path(args.out_file),
        )
        try:
            result = render(spec)
        except (SchemaError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"rendered {result.output_path}")
        return 0

    if not args.bundle or not args.out:
        parser.print_usage(sys.stderr)
        return 2
    kinds = set(args.kinds) if args.kinds else None
    try:
        summary = render_all(args.bundle, args.out, kinds)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in summary.rendered:
        print(f"rendered {path}")
    for name, reason in summary.failures:
        print(f"FAILED {name}: {reason}", file=sys.stderr)
    if summary.failures or not summary.rendered:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
