"""Run a phase-scaling config and print the ledger with its fitted slope."""

import argparse
import sys

from qcontrolde.harness.config import ConfigError, parse_config
from qcontrolde.harness.experiments import run_experiment
from qcontrolde.scaling import ScalingLedger


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config", nargs="?", default="configs/phase_scaling.yaml")
    parser.add_argument("--seed", type=int)
    args = parser.parse_args()
    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        config.seed = args.seed
    outcome = run_experiment(config)
    ledger = ScalingLedger.from_csv(outcome.run_dir / "ledger.csv")
    for p in ledger.points:
        print(f"N={p.N:3d}  V_H={p.V_H:.5f}  {p.mode}")
    if len(ledger.points) >= 3:
        print(f"slope {ledger.fit.slope:.3f}")
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
