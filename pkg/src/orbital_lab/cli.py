"""Command-line entry point: ``orbital-lab <scenario> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .experiment import SCENARIOS, ConfigError, ExperimentConfig, load_config, run, write_outputs


def _schedule(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbital-lab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH", help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="override master_seed")
        sp.add_argument("--out", metavar="PATH", help="output CSV path")
        sp.add_argument("--samples", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--n-schedule", type=_schedule, metavar="N1,N2,...")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    raw = load_config(args.config) if args.config else {}
    if raw.get("scenario", args.scenario) != args.scenario:
        print(f"error: config scenario {raw['scenario']!r} does not match subcommand {args.scenario!r}",
              file=sys.stderr)
        return 2
    raw["scenario"] = args.scenario
    overrides = {"master_seed": args.seed, "output_path": args.out, "samples": args.samples,
                 "workers": args.workers, "n_schedule": args.n_schedule}
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = ExperimentConfig.from_dict(raw)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    table = run(config)
    paths = write_outputs(config, table)
    for row in table.errors:
        print(f"task error at n={row[2]} ({row[1]}): {row[4]}", file=sys.stderr)
    print(f"{config.scenario}: {len(table.rows)} rows, {len(table.failures)} failing, "
          f"{len(table.errors)} errors -> {', '.join(str(p) for p in paths)}")
    return 0 if table.ok else 1


if __name__ == "__main__":
    sys.exit(main())
