"""Run the Toffoli gate search for several seeds and report the fidelities."""

import argparse
import csv
import sys

from qcontrolde.harness.config import ConfigError, parse_config
from qcontrolde.harness.experiments import run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config", nargs="?", default="configs/gate_design.yaml")
    parser.add_argument("--repeats", type=int)
    args = parser.parse_args()
    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.repeats is not None:
        config.gate.repeats = args.repeats
    outcome = run_experiment(config)
    with open(outcome.run_dir / "results.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        print(f"repeat {r['repeat']}  F={float(r['fidelity']):.5f}  evaluations={r['evaluations']}")
    hits = sum(float(r["fidelity"]) >= 0.99 for r in rows)
    print(f"{hits}/{len(rows)} runs at F >= 0.99")
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
