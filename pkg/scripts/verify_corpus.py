"""Check static answers and dynamic scripts against the oracles.

    python3 scripts/verify_corpus.py --static 200 --scripts 20
"""
import argparse
import random
import time

from dyntw.cli import answer_ok, run_script
from dyntw.decomposition import nice_decomposition
from dyntw.engine import EngineConfig, epoch_length
from dyntw.generators import PROPERTIES, mixed_script, partial_ktree
from dyntw.oracles import brute_answer
from dyntw.plugins import get_plugin
from dyntw.tables import compute_tables, query_static


def static_corpus(count, seed):
    rng = random.Random(seed)
    bad = 0
    for i in range(count):
        n = rng.randint(2, 14)
        k = rng.randint(1, min(3, n - 1))
        g = partial_ktree(n, k, rng.choice([0.5, 0.8, 1.0]), seed=seed * 7919 + i)
        ntd = nice_decomposition(g, k, isolated=False)
        for prop in PROPERTIES:
            ans = query_static(compute_tables(g, ntd, get_plugin(prop)), g)
            ref = brute_answer(g, prop)
            if not answer_ok(prop, ans, ref, g):
                bad += 1
                print(f"static mismatch: {prop} on {g.edge_list()}: {ans} vs {ref.value}")
    return bad


def dynamic_scripts(count, seed, n_choices):
    rng = random.Random(seed)
    bad = 0
    for i in range(count):
        n = rng.choice(n_choices)
        k = rng.randint(1, 3)
        lines = mixed_script(n, k, 10 * epoch_length(n), seed=seed * 7919 + i, query_prob=0.3)
        res = run_script(lines, EngineConfig(n=n, k_budget=k), verify=True)
        if res.mismatch:
            bad += 1
            print(f"script {i} (n={n}, k={k}): {res.mismatch}")
    return bad


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--static", type=int, default=200)
    ap.add_argument("--scripts", type=int, default=20)
    ap.add_argument("--n", type=int, nargs="+", default=[64, 128])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    s = static_corpus(args.static, args.seed)
    print(f"static: {args.static} graphs, {s} mismatches ({time.perf_counter() - t0:.1f}s)")
    t0 = time.perf_counter()
    d = dynamic_scripts(args.scripts, args.seed, args.n)
    print(f"dynamic: {args.scripts} scripts, {d} with mismatches ({time.perf_counter() - t0:.1f}s)")
    raise SystemExit(1 if s or d else 0)


if __name__ == "__main__":
    main()
