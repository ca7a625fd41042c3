#!/usr/bin/env python3
"""Run the full verification battery on the canonical fixtures.

Prints one line per check and exits nonzero if anything fails, so the
script doubles as a quick regression probe after library changes.
"""

import argparse
import json
import sys
from pathlib import Path

from tmep.checks import DEFAULT_SEED, battery
from tmep.models import canonical_open_system, canonical_two_level


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers per battery")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="sampling seed")
    parser.add_argument(
        "--chain-length", type=int, default=1, help="reservoir chain length for the open fixture"
    )
    parser.add_argument("--json", type=Path, default=None, help="also dump reports to this file")
    args = parser.parse_args(argv)

    fixtures = {
        "two_level": canonical_two_level(),
        "open_system": canonical_open_system(args.chain_length),
    }
    all_reports = {}
    failures = 0
    for name, model in fixtures.items():
        print(f"== {name} (dim {model.dim}) ==")
        reports = battery(model, seed=args.seed, jobs=args.jobs)
        for r in reports:
            print(
                f"{r.verdict:<4} {r.check:<24} residual={r.residual_max:.3e} "
                f"threshold={r.threshold:.1e} ({r.seconds:.2f}s)"
            )
        failures += sum(not r.passed for r in reports)
        all_reports[name] = [r.to_dict() for r in reports]

    if args.json is not None:
        args.json.write_text(json.dumps(all_reports, indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.json}")
    print("all checks passed" if failures == 0 else f"{failures} checks FAILED")
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
