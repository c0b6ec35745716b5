"""mnet-sim: run a scenario file and report the expected-vs-actual matrix."""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from mnet.harness.scenario import (
    ScenarioSpec,
    expected_matrix,
    matrix_matches,
    run_scenario,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mnet-sim", description=__doc__)
    parser.add_argument("--scenario", type=Path, required=True, metavar="FILE.json")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario file's seed")
    parser.add_argument("--report", type=Path, default=None, metavar="PATH")
    parser.add_argument("--workdir", type=Path, default=None,
                        help="keep artifacts here instead of a temp dir")
    args = parser.parse_args(argv)

    spec = ScenarioSpec.from_json(json.loads(args.scenario.read_text()))
    if args.seed is not None:
        spec.seed = args.seed

    if args.workdir is not None:
        args.workdir.mkdir(parents=True, exist_ok=True)
        outcome = run_scenario(spec, args.workdir)
    else:
        with tempfile.TemporaryDirectory(prefix="mnet-sim-") as td:
            outcome = run_scenario(spec, Path(td))

    mismatches = matrix_matches(expected_matrix(spec), outcome)
    if args.report:
        args.report.write_text(outcome.to_json() + "\n")
        print(f"outcome written to {args.report}")

    for row in outcome.rows:
        label = row.get("status", f"registered={row.get('registered')}")
        print(f"  {row['kind']:<17} {row['actor']:<20} {label}")
    if mismatches:
        print("MATRIX MISMATCHES:")
        for line in mismatches:
            print(f"  {line}")
        return 1
    print(f"matrix matches expectations ({len(outcome.rows)} actors, "
          f"{outcome.sim_elapsed_s:.1f}s simulated)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
