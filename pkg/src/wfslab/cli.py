"""Command-line entry point.

Subcommands: ``generate`` (session definition files), ``simulate`` (full
cohort with logs), ``field`` (reconstruction-error maps), ``osc-send``
(positioning datagrams) and ``analyze`` (the analysis bundle).  Exit codes:
0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, logfiles, osc, session as sess, wavefield as wf
from .config import ConfigError, SimulationConfig
from .geometry import Rect

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _load_config(args) -> SimulationConfig:
    cfg = SimulationConfig.from_file(args.config) if args.config else SimulationConfig()
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    if getattr(args, "participants", None) is not None:
        cfg.participants = args.participants
        cfg.wfs_first = min(cfg.wfs_first, cfg.participants)
    if getattr(args, "first_system", None) is not None:
        # every participant starts with the requested system
        cfg.wfs_first = cfg.participants if args.first_system == "wfs" else 0
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "tutorial", False):
        cfg.tutorial = True
    cfg.validate()
    return cfg


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for pid, seed, first in cfg.participant_specs():
        plan = sess.generate_session(
            pid, seed, first, area=cfg.area, height=cfg.height, tutorial=cfg.tutorial
        )
        path = out / f"session_{pid}.csv"
        sess.write_session_plan(plan, path)
        print(f"{pid}: {len(plan.trials)} trials -> {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    dirs = sess.run_cohort(
        cfg.participant_specs(),
        cfg.models_factory(),
        cfg.agent_factory(),
        cfg.output_dir,
        tutorial=cfg.tutorial,
        guess_timeout=cfg.guess_timeout,
        hand_dropout=cfg.hand_dropout,
        area=cfg.area,
        height=cfg.height,
    )
    for directory in dirs:
        loaded = logfiles.read_session(directory)
        per_system = {
            system.value: np.mean(
                [t.score for t in loaded.trials if t.system is system] or [np.nan]
            )
            for system in sess.System
        }
        summary = " ".join(f"{k}={v:.3f}" for k, v in per_system.items())
        print(f"{loaded.participant_id}: {len(loaded.trials)} trials, mean score {summary}")
    return EXIT_OK


def cmd_field(args) -> int:
    array = wf.build_square_array(args.side_length, args.speakers_per_side, args.height)
    source = wf.classify_source([args.source[0], args.source[1], args.height], array)
    bounds = Rect.square(args.grid_extent)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    modes = {
        "static": wf.RenderMode.STATIC,
        "user_dependent": wf.RenderMode.USER_DEPENDENT,
        "both": None,
    }[args.mode]
    listener = np.array([args.listener[0], args.listener[1], args.height])
    for name, mode in (
        [("static", wf.RenderMode.STATIC), ("user_dependent", wf.RenderMode.USER_DEPENDENT)]
        if modes is None
        else [(args.mode, modes)]
    ):
        if source.kind is wf.SourceKind.FOCUSED:
            if mode is wf.RenderMode.USER_DEPENDENT:
                driving = wf.driving_functions(source, array, listener, mode)
            else:
                default = wf.nearest_side(source.position, array)
                driving = wf.driving_functions(source, array, mode=mode, default_subarray=default)
        else:
            driving = wf.driving_functions(source, array, mode=wf.RenderMode.STATIC)
        path = out / f"field_{name}.csv"
        error = wf.export_error_map(
            path, source, array, driving, bounds, args.grid, args.grid, args.frequency
        )
        active = sorted({s.side_id for s, on in zip(array.speakers, driving.active) if on})
        print(
            f"{name}: error={error:.4f} active_sides={active} "
            f"active_speakers={int(driving.active.sum())} -> {path}"
        )
    return EXIT_OK


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host, int(port)


def cmd_osc_send(args) -> int:
    schema = osc.load_address_schema(args.address_map) if args.address_map else osc.AddressSchema()
    if args.what == "position":
        msg = osc.position_message(osc.PositionCommand(args.id, args.x, args.y), schema)
    else:
        if args.duration is None or args.end is None:
            raise ValueError("trajectory needs --end and --duration")
        msg = osc.trajectory_message(
            args.id, (args.x, args.y), tuple(args.end), args.duration, schema
        )
    data = osc.encode(msg)
    if args.dry_run:
        print(f"{msg.address} ({len(data)} bytes)")
        print(data.hex(" "))
        return EXIT_OK
    endpoint = _parse_endpoint(args.endpoint)
    with osc.OscSender(endpoint[0], endpoint[1], schema) as sender:
        n = sender.send(msg)
    print(f"sent {n} bytes to {endpoint[0]}:{endpoint[1]} ({msg.address})")
    return EXIT_OK


def cmd_analyze(args) -> int:
    sessions = logfiles.read_cohort(args.logs)
    out = analysis.export_analysis(
        sessions,
        args.out,
        k=args.k,
        bins=args.bins,
        knn_at_guess=args.knn_at_guess,
    )
    n = len(list(Path(out).iterdir()))
    print(f"analyzed {len(sessions)} sessions -> {out} ({n} files)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wfslab",
        description="Simulated speaker-array vs. stereo localization laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write per-participant session definition files")
    p.add_argument("--config", help="simulation config file (key=value INI)")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--participants", type=int)
    p.add_argument("--first-system", choices=["wfs", "stereo"], dest="first_system")
    p.add_argument("--tutorial", action="store_true", help="include warmup trials")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="run a full cohort and write session logs")
    p.add_argument("--config", help="simulation config file")
    p.add_argument("--out", help="log output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--participants", type=int)
    p.add_argument("--first-system", choices=["wfs", "stereo"], dest="first_system")
    p.add_argument("--tutorial", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("field", help="export reconstruction-error maps")
    p.add_argument("--source", type=float, nargs=2, required=True, metavar=("X", "Y"))
    p.add_argument("--frequency", type=float, default=500.0)
    p.add_argument("--mode", choices=["static", "user_dependent", "both"], default="both")
    p.add_argument("--listener", type=float, nargs=2, default=(0.0, -0.8), metavar=("X", "Y"))
    p.add_argument("--grid", type=int, default=41, help="grid points per axis")
    p.add_argument("--grid-extent", type=float, default=1.6, dest="grid_extent")
    p.add_argument("--side-length", type=float, default=2.0, dest="side_length")
    p.add_argument("--speakers-per-side", type=int, default=16, dest="speakers_per_side")
    p.add_argument("--height", type=float, default=1.6)
    p.add_argument("--out", default="field_maps")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("osc-send", help="send one positioning datagram")
    p.add_argument("what", choices=["position", "trajectory"])
    p.add_argument("--endpoint", default="127.0.0.1:9000", help="host:port")
    p.add_argument("--id", type=int, default=1, help="source id")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--end", type=float, nargs=2, metavar=("X", "Y"))
    p.add_argument("--duration", type=float)
    p.add_argument("--address-map", dest="address_map", help="key=value address schema file")
    p.add_argument("--dry-run", action="store_true", help="print the hex dump instead of sending")
    p.set_defaults(func=cmd_osc_send)

    p = sub.add_parser("analyze", help="export the analysis bundle from cohort logs")
    p.add_argument("logs", help="directory holding the session directories")
    p.add_argument("out", help="bundle output directory")
    p.add_argument("--k", type=int, default=analysis.DEFAULT_K)
    p.add_argument("--bins", type=int, default=analysis.DEFAULT_BINS)
    p.add_argument("--knn-at-guess", action="store_true", dest="knn_at_guess")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (osc.TransportError, OSError, RuntimeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
