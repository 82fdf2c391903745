"""Command-line entry point.

    envcheck <candidate.py> <design.json> [--seed N] [--episodes N]
             [--max-steps N] [--legacy-step]

Prints the JSON report on stdout. Exit 0: every check passed. Exit 1: checks
ran and at least one failed. Exit 2: the harness itself could not run (bad
arguments, unreadable files, malformed design document); a best-effort report
is still printed first.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checker import harness_fault_report, run_conformance
from .spaces import DesignError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="envcheck",
        description="Check a candidate environment module against its design document.",
    )
    parser.add_argument("candidate", help="Python module defining the environment class")
    parser.add_argument("design", help="JSON design document with observation/action spaces")
    parser.add_argument("--seed", type=int, default=0, help="seed for sampled actions")
    parser.add_argument("--episodes", type=int, default=3, help="episodes to roll out")
    parser.add_argument("--max-steps", type=int, default=200, help="step cap per episode")
    parser.add_argument(
        "--legacy-step",
        action="store_true",
        help="expect the 4-tuple step contract (observation, reward, done, info)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        source = Path(args.candidate).read_text(encoding="utf-8")
        design = json.loads(Path(args.design).read_text(encoding="utf-8"))
        if not isinstance(design, dict):
            raise DesignError("design document must be a JSON object")
        report = run_conformance(
            source,
            design,
            seed=args.seed,
            episodes=args.episodes,
            max_steps=args.max_steps,
            legacy_step=args.legacy_step,
        )
    except (OSError, json.JSONDecodeError, DesignError) as exc:
        print(harness_fault_report(str(exc), args.seed).to_json())
        print(f"envcheck: {exc}", file=sys.stderr)
        return 2
    print(report.to_json())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
