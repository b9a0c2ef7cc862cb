"""Command line entry point: ``hybridvvc run | plot | compare``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .harness.compare import compare
from .harness.plots import emit_plots
from .harness.runner import MODES, Experiment, RunConfig
from .powergrid import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

log = logging.getLogger("hybridvvc")


class _Parser(argparse.ArgumentParser):
    # bad arguments are configuration errors, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridvvc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one seeded experiment")
    p.add_argument("--mode", choices=MODES, default="hybrid")
    p.add_argument("--steps", type=int, default=5760)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-config", metavar="PATH")
    p.add_argument("--agent-config", metavar="PATH")
    p.add_argument("--out", metavar="DIR", required=True)
    p.add_argument("--eval-after", type=int, metavar="N",
                   help="freeze learning from step N (default: steps/2 for pure_sac)")

    p = sub.add_parser("plot", help="render plots from a run CSV")
    p.add_argument("--csv", required=True, metavar="PATH")
    p.add_argument("--out", required=True, metavar="DIR")

    p = sub.add_parser("compare", help="tabulate a baseline run against a hybrid run")
    p.add_argument("--baseline", required=True, metavar="DIR")
    p.add_argument("--hybrid", required=True, metavar="DIR")
    return parser


def _run(args):
    try:
        config = RunConfig(
            mode=args.mode, steps=args.steps, seed=args.seed,
            grid_config=args.grid_config, agent_config=args.agent_config,
            out_dir=args.out, eval_after=args.eval_after,
        ).validate()
        experiment = Experiment(config)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    step = [0]
    try:
        summary = experiment.run(progress=lambda t: step.__setitem__(0, t))
    except Exception as exc:  # noqa: BLE001 - reported with step context
        log.error("run failed at step %d: %s", step[0], exc)
        return EXIT_RUNTIME
    print(summary.to_json())
    return EXIT_OK


def _plot(args):
    try:
        for path in emit_plots(args.csv, args.out):
            print(path)
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


def _compare(args):
    try:
        report = compare(args.baseline, args.hybrid)
    except (OSError, ValueError, TypeError) as exc:
        log.error("cannot read summaries: %s", exc)
        return EXIT_RUNTIME
    print(report.to_text())
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _run, "plot": _plot, "compare": _compare}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
