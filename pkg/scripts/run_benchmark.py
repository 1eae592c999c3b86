"""Time fitting and rollout on a large synthetic corpus.

Exit status is nonzero when either per-point timing misses its target, so this
doubles as a regression gate in automation.
"""

from __future__ import annotations

import argparse
import json
import sys

from dedsid.bench import throughput_benchmark


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=1_000_000)
    ap.add_argument("--states", type=int, default=3)
    ap.add_argument("--inputs", type=int, default=21)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fit-target-us", type=float, default=25.0)
    ap.add_argument("--rollout-target-us", type=float, default=150.0)
    ap.add_argument("--json", action="store_true", help="emit the full report as JSON")
    args = ap.parse_args()

    report = throughput_benchmark(
        points=args.points,
        q=args.states,
        p=args.inputs,
        seed=args.seed,
        fit_target_us=args.fit_target_us,
        rollout_target_us=args.rollout_target_us,
    )
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(f"points:  {report.points} (q={report.q}, p={report.p})")
        print(f"fit:     {report.fit_us_per_point:.3f} us/pt (target {report.fit_target_us})")
        print(f"rollout: {report.rollout_us_per_point:.3f} us/pt (target {report.rollout_target_us})")
        print(f"host:    {report.hardware}")
    return 0 if report.fit_within_target and report.rollout_within_target else 1


if __name__ == "__main__":
    sys.exit(main())
