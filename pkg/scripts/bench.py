"""Epoch vs full-recompute table work over several seeds.

    python3 scripts/bench.py --n 512 --k 2 --seeds 5
"""
import argparse
import json

from dyntw.cli import bench
from dyntw.engine import EngineConfig, epoch_length
from dyntw.generators import mixed_script


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=10, help="script length in epochs")
    ap.add_argument("--json", action="store_true", help="print full results as JSON")
    args = ap.parse_args()

    f = epoch_length(args.n)
    rows = []
    for seed in range(args.seeds):
        lines = mixed_script(args.n, args.k, args.epochs * f, seed=seed)
        res = bench(lines, EngineConfig(n=args.n, k_budget=args.k, seed=seed))
        rows.append(res)
        e, full = res["epoch"], res["full"]
        print(f"seed {seed}: epoch {e['total_units']:6d}  full {full['total_units']:6d}  "
              f"ratio {res['ratio']:6.2f}  serving max/step {e['serving_max_units']}  "
              f"handovers {e['handovers']}")
    if args.json:
        print(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
