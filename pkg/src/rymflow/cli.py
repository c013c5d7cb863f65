"""Command line: ``rymflow flow run|resume``, ``diag``, ``soliton check``, ``spectrum``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .config import parse_config
from .diagnostics import CSV_COLUMNS, compute_record, lowest_eigenvalue
from .errors import ConfigError, NumericalFailure, RYMError
from .flow import FlowVariant
from .run import OUTPUT_ENV, resume, run
from .soliton import classify

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="rymflow",
        description="Ricci Yang-Mills flow on the flat torus and the round sphere.",
        epilog=f"Output directory precedence: --output-dir, then ${OUTPUT_ENV}, then [output] dir.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    flow = sub.add_parser("flow", help="run or resume a flow")
    fsub = flow.add_subparsers(dest="action", required=True, parser_class=_Parser)
    r = fsub.add_parser("run", help="run a flow from a config file")
    r.add_argument("config", type=Path)
    r.add_argument("--output-dir", help="overrides the config and the environment")
    r.add_argument("--no-plots", action="store_true")
    rs = fsub.add_parser("resume", help="continue from a checkpoint")
    rs.add_argument("checkpoint", type=Path)
    rs.add_argument("--t-end", type=float, help="new end time (default: the checkpointed config's)")
    rs.add_argument("--output-dir", help="default: the checkpoint's directory")
    rs.add_argument("--no-plots", action="store_true")

    d = sub.add_parser("diag", help="print the diagnostics record of a snapshot")
    d.add_argument("snapshot", type=Path)
    d.add_argument("--variant", choices=[v.value for v in FlowVariant], default="unnormalized")
    d.add_argument("--moser-k", type=float, default=1.0)

    s = sub.add_parser("soliton", help="soliton profile tools")
    ssub = s.add_subparsers(dest="action", required=True, parser_class=_Parser)
    c = ssub.add_parser("check", help="classify a radial profile")
    c.add_argument("profile", type=Path)
    c.add_argument("--tol", type=float, default=1e-8)

    sp = sub.add_parser("spectrum", help="lowest Schroedinger eigenvalue of a snapshot")
    sp.add_argument("snapshot", type=Path)
    sp.add_argument("--out", type=Path, help="eigenfield snapshot path (default: <snapshot>.eig.snap)")
    return p


def _cmd_flow_run(args) -> int:
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{args.config}: {exc.strerror}") from None
    cfg = parse_config(text)
    if args.no_plots:
        cfg = replace(cfg, plots=False)
    traj = run(cfg, output_dir=args.output_dir, base_dir=args.config.parent)
    return _report(traj)


def _cmd_flow_resume(args) -> int:
    traj = resume(args.checkpoint, t_end=args.t_end, output_dir=args.output_dir, plots=not args.no_plots)
    return _report(traj)


def _report(traj) -> int:
    for line in traj.summary_lines():
        print(line)
    print(f"output: {traj.output_dir}")
    if traj.error is not None:
        print(f"stop reason: {traj.stop_reason}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_diag(args) -> int:
    state = io.read_snapshot(args.snapshot)
    rec = compute_record(state, args.variant, moser_k=args.moser_k)
    print(",".join(CSV_COLUMNS))
    print(io.format_row(rec.csv_values()))
    print(f"min_volume_flag={rec.min_volume_flag} calabi_liouville={rec.calabi_liouville!r}")
    return EXIT_OK


def _cmd_soliton(args) -> int:
    profile = io.read_profile(args.profile)
    verdict = classify(profile, args.tol)
    for line in verdict.lines():
        print(line)
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    state = io.read_snapshot(args.snapshot)
    lam, field = lowest_eigenvalue(state)
    out = args.out or args.snapshot.with_name(args.snapshot.name + ".eig.snap")
    io.write_snapshot(out, state.replace(u=state.u, psi=field))
    print(f"lambda = {lam!r}")
    print(f"eigenfield written to {out} (stored in the psi block; u is the snapshot's)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handlers = {
        ("flow", "run"): _cmd_flow_run,
        ("flow", "resume"): _cmd_flow_resume,
        ("diag", None): _cmd_diag,
        ("soliton", "check"): _cmd_soliton,
        ("spectrum", None): _cmd_spectrum,
    }
    handler = handlers[(args.command, getattr(args, "action", None))]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"rymflow: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"rymflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, RYMError, OSError) as exc:
        print(f"rymflow: {exc}", file=sys.stderr)
        return EXIT_USAGE


cli = main


if __name__ == "__main__":
    sys.exit(main())
