#!/usr/bin/env python3
"""Generate a scenario JSON file, optionally with injected spoof contacts.

Usage:
    python scripts/make_scenario_file.py --seed 7 --out scenario.json
    python scripts/make_scenario_file.py --seed 7 --spoofs 3 --kind both --out attacked.json
"""

import argparse
import sys
from pathlib import Path

from dfcr.attacks import inject_spoofs
from dfcr.core import generate_scenario, scenario_to_json


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--spoofs", type=int, default=0, choices=(0, 1, 3, 5))
    parser.add_argument("--kind", type=str, default="ais",
                        choices=("ais", "radar", "both"))
    parser.add_argument("--out", type=str, required=True)
    args = parser.parse_args()

    scenario = generate_scenario(args.seed)
    if args.spoofs:
        scenario = inject_spoofs(scenario, args.spoofs, kind=args.kind,
                                 seed=args.seed)
    Path(args.out).write_text(scenario_to_json(scenario), encoding="utf-8")
    print(f"wrote {args.out}: {len(scenario.objects)} genuine, "
          f"{len(scenario.spoofed)} spoofed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
