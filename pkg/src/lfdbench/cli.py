"""Command-line entry point: ``lfdbench {run,theorem,plot,analyze}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error (for ``run``,
the CSV with per-trial errors has still been written).
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys

from .core import RandomSource
from .runner.analysis import analyze
from .runner.config import ConfigError, load_config
from .runner.experiment import run_experiment
from .runner.plot import PlotError, render_plot
from .theorem import theorem_csv, theorem_table

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
log = logging.getLogger("lfdbench")


def parse_range(text: str) -> list[int]:
    """``"a..b"`` (inclusive) or a comma list ``"1,2,4"``."""
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        if a < 1 or b < a:
            raise ValueError(f"bad range {text!r}")
        return list(range(a, b + 1))
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"bad range {text!r}; expected a..b or a comma list") from None
    if not vals or min(vals) < 1:
        raise ValueError(f"bad range {text!r}")
    return vals


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.output:
            cfg = cfg.with_overrides(output=args.output)
        if args.workers:
            cfg = cfg.with_overrides(workers=args.workers)
    except (ConfigError, OSError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = run_experiment(cfg, manifest=not args.no_manifest)
    print(f"wrote {summary.path}")
    if summary.n_errors:
        print(f"{summary.n_errors} rows failed; see the error column", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_theorem(args) -> int:
    try:
        m_values = parse_range(args.m_range)
        if not 0.0 <= args.mu <= 0.25:
            raise ValueError("--mu must lie in [0, 0.25]")
        if args.trials < 1:
            raise ValueError("--trials must be >= 1")
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    table = theorem_table(m_values, args.mu, args.trials, RandomSource(args.seed))
    text = theorem_csv(table)
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_plot(args) -> int:
    try:
        render_plot(args.csv, args.svg, args.title)
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_analyze(args) -> int:
    try:
        loss = analyze(args.heldout, args.policy)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({"heldout_loss": [float(v) for v in loss]}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfdbench", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config and write its CSV")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="override the config's output path")
    r.add_argument("-j", "--workers", type=int, help="worker processes")
    r.add_argument("--no-manifest", action="store_true", help="skip the JSON run manifest")
    r.set_defaults(func=_cmd_run)

    t = sub.add_parser("theorem", help="stuck-probability table for the DAG counterexample")
    t.add_argument("--m-range", default="1..12", help="a..b inclusive, or a comma list")
    t.add_argument("--mu", type=float, default=0.25)
    t.add_argument("--trials", type=int, default=100_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("-o", "--output")
    t.set_defaults(func=_cmd_theorem)

    pl = sub.add_parser("plot", help="render a results CSV as an SVG chart")
    pl.add_argument("csv")
    pl.add_argument("svg")
    pl.add_argument("--title", default="")
    pl.set_defaults(func=_cmd_plot)

    a = sub.add_parser("analyze", help="held-out surrogate loss of a saved policy")
    a.add_argument("--heldout", required=True, help="dataset JSON")
    a.add_argument("--policy", required=True, help="policy JSON")
    a.set_defaults(func=_cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # anything not attributable to the config
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
