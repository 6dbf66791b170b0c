"""Command-line entry point: ``spinorbit <experiment> --config cfg.json --out dir``."""

import argparse
import sys

from .experiments import RUNNERS, ExperimentConfig, emit_outputs
from .model import DEFAULTS, builtin


def list_models():
    lines = []
    for name, params in DEFAULTS.items():
        m = builtin(name)
        kw = ", ".join(f"{k}={v:g}" for k, v in params.items())
        tags = [t for t, on in (("quadratic", m.quadratic), ("constant field", m.constant_field)) if on]
        lines.append(f"{name:22s} {kw:40s} {', '.join(tags)}")
    return "\n".join(lines)


def build_parser():
    ap = argparse.ArgumentParser(prog="spinorbit", description=__doc__)
    ap.add_argument("--list-models", action="store_true", help="print the model catalog and exit")
    sub = ap.add_subparsers(dest="command")
    for name, fn in RUNNERS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0])
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", required=True, help="output directory")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.list_models:
        print(list_models())
        return 0
    if args.command is None:
        ap.print_help()
        return 2
    cfg = ExperimentConfig.from_json(args.config)
    report = RUNNERS[args.command](cfg)
    for path in emit_outputs(report, args.out):
        print(f"wrote {path}")
    for c in report.criteria:
        print(c.line())
    for n in report.notes:
        print(f"note: {n}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
