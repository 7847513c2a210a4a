"""Acceptance criteria 1-8, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` (the lines are printed either way).
"""
import random
import time
from dataclasses import dataclass, field

import pytest

from conftest import small_corpus
from dyntw.cli import answer_ok, bench, run_script
from dyntw.decomposition import (
    balance, check_nice, decompose, log2n, nice_decomposition, nicefy, verify_td,
)
from dyntw.engine import (
    Engine,
    EngineConfig,
    LiveState,
    Mode,
    connection_widths,
    epoch_length,
    flat_answer,
    petal_partition_ok,
    skeleton_answer,
    update_special,
)
from dyntw.generators import PROPERTIES, Query, ktree_edges, mixed_script, partial_ktree
from dyntw.graph import DynamicGraph, EdgeChange
from dyntw.oracles import brute_answer, exact_answer
from dyntw.plugins import get_plugin
from dyntw.tables import TableStore, compute_tables, query_static


@pytest.fixture
def report(capsys):
    def emit(tag, ok, detail):
        with capsys.disabled():
            print(f"\n{tag} {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


def test_c1_decomposition_pipeline(report):
    rng = random.Random(101)
    t0 = time.perf_counter()
    bad, worst_c, slack = [], 0.0, None
    for i in range(200):
        k = rng.choice([1, 2, 3, 4])
        n = rng.randint(16, 256)
        g = partial_ktree(n, k, rng.choice([0.6, 0.8, 1.0]), seed=1000 + i)
        td = decompose(g, 4 * k + 5)
        w_heur = td.width
        ntd = nicefy(balance(td))
        problems = [v.prop for v in verify_td(g, ntd.to_td())] + check_nice(ntd)
        c = ntd.depth / log2n(n)
        worst_c = max(worst_c, c)
        room = 3 * w_heur + 4 - ntd.width
        slack = room if slack is None else min(slack, room)
        if problems or c > 6 or room < 0:
            bad.append((i, n, k, problems[:3], round(c, 2), room))
    dt = time.perf_counter() - t0
    ok = not bad and dt < 30
    report("C1", ok, f"200 graphs, {len(bad)} bad, depth factor c max {worst_c:.2f}, "
                     f"min width slack {slack}, {dt:.1f}s")
    assert not bad, bad[:5]
    assert dt < 30


def test_c2_static_equivalence(report):
    t0 = time.perf_counter()
    bad = []
    for g, k in small_corpus(500, seed=202, max_n=14, max_k=3):
        ntd = nicefy(balance(decompose(g, k, isolated=False)))
        for prop in PROPERTIES:
            p = get_plugin(prop)
            ans = query_static(compute_tables(g, ntd, p), g)
            ref = brute_answer(g, prop)
            if not answer_ok(prop, ans, ref, g):
                bad.append((g.edge_list(), prop, ans, ref.value))
    dt = time.perf_counter() - t0
    ok = not bad and dt < 60
    report("C2", ok, f"500 graphs x 3 properties, {len(bad)} mismatches, {dt:.1f}s")
    assert not bad, bad[:3]
    assert dt < 60


# -- criteria 3 and 4 share one run -------------------------------------------

C3_QUERY_PROB = 0.3


@dataclass
class DynamicRun:
    scripts: int = 0
    queries: int = 0
    mismatches: list = field(default_factory=list)
    min_handovers: int | None = None
    few_handovers: list = field(default_factory=list)
    engine_seconds: float = 0.0
    # structural checks
    checks: int = 0
    violations: list = field(default_factory=list)
    max_s_ratio: float = 0.0
    max_conn: int = 0
    max_conn_bound: int = 0
    check_seconds: float = 0.0


def _structural(run: DynamicRun, live, where):
    t0 = time.perf_counter()
    m = live.absorbed
    s = len(live.special)
    if s > 4 * m + 1:
        run.violations.append((where, f"|S|={s} > 4*{m}+1"))
    if m:
        run.max_s_ratio = max(run.max_s_ratio, (s - 1) / m)
    bound = 3 * live.ell + 1
    widths = connection_widths(live)
    top = max(widths.values(), default=0)
    if top > bound:
        run.violations.append((where, f"petal connection width {top} > {bound}"))
    run.max_conn = max(run.max_conn, top)
    run.max_conn_bound = max(run.max_conn_bound, bound)
    if not petal_partition_ok(live):
        run.violations.append((where, "petals do not partition the non-special nodes"))
    run.checks += 1
    run.check_seconds += time.perf_counter() - t0


@pytest.fixture(scope="module")
def dynamic_run():
    run = DynamicRun()
    rng = random.Random(303)
    for i in range(100):
        n = rng.choice([64, 128])
        k = rng.randint(1, 3)
        f = epoch_length(n)
        lines = mixed_script(n, k, 10 * f, seed=3000 + i, query_prob=C3_QUERY_PROB)
        eng = Engine(EngineConfig(n=n, k_budget=k))
        t0 = time.perf_counter()
        try:
            for step, line in enumerate(lines, 1):
                if isinstance(line, Query):
                    ans = eng.query(line.prop)
                    ref = exact_answer(eng.graph, line.prop)
                    run.queries += 1
                    if not answer_ok(line.prop, ans, ref, eng.graph):
                        run.mismatches.append((i, step, line.prop, ans, ref.value))
                else:
                    eng.on_change(line)
                    if eng.live is not None:
                        pause = time.perf_counter()
                        _structural(run, eng.live, (i, step))
                        t0 += time.perf_counter() - pause
        finally:
            eng.close()
        run.engine_seconds += time.perf_counter() - t0
        h = eng.counters.handovers
        run.min_handovers = h if run.min_handovers is None else min(run.min_handovers, h)
        if h < 5:
            run.few_handovers.append((i, h))
        run.scripts += 1
    return run


def test_c3_dynamic_correctness(dynamic_run, report):
    r = dynamic_run
    ok = not r.mismatches and not r.few_handovers and r.engine_seconds < 120
    report("C3", ok, f"{r.scripts} scripts, {r.queries} queries, {len(r.mismatches)} mismatches, "
                     f"min handovers {r.min_handovers}, {r.engine_seconds:.1f}s")
    assert not r.mismatches, r.mismatches[:3]
    assert not r.few_handovers, r.few_handovers[:5]
    assert r.engine_seconds < 120


def test_c4_structural_bounds(dynamic_run, report):
    r = dynamic_run
    ok = not r.violations and r.checks > 0
    report("C4", ok, f"{r.checks} live states checked, {len(r.violations)} violations, "
                     f"max (|S|-1)/m {r.max_s_ratio:.2f}, max petal connection width {r.max_conn} "
                     f"(bound up to {r.max_conn_bound}), {r.check_seconds:.1f}s")
    assert r.checks > 0
    assert not r.violations, r.violations[:5]


def test_c5_delta_buffer(report):
    n, k = 64, 2
    rng = random.Random(505)
    edges = ktree_edges(n, k, rng)
    details, ok = [], True
    for order in ("insert-delete", "delete-insert"):
        eng = Engine(EngineConfig(n=n, k_budget=k))
        f = eng.f
        # one full epoch so the edge exists for delete-then-insert
        for e in edges[:f]:
            eng.on_change(EdgeChange.insert(*e))
        assert eng.counters.handovers == 1
        e = edges[0] if order == "delete-insert" else edges[f]
        first, second = ((EdgeChange.delete(*e), EdgeChange.insert(*e)) if order == "delete-insert"
                         else (EdgeChange.insert(*e), EdgeChange.delete(*e)))
        eng.on_change(first)
        eng.on_change(second)
        empty = eng.epoch.delta.empty and eng.epoch.counter <= eng.half
        for e2 in edges[f + 1:2 * f - 1]:
            eng.on_change(EdgeChange.insert(*e2))
        handed = eng.counters.handovers == 2
        same = all(answer_ok(p, eng.query(p), exact_answer(eng.graph, p), eng.graph) for p in PROPERTIES)
        eng.close()
        ok &= empty and handed and same
        details.append(f"{order}: buffer empty={empty}, handover={handed}, answers match={same}")
    report("C5", ok, "; ".join(details))
    assert ok


def _random_live(rng):
    n = rng.randint(8, 40)
    k = rng.randint(1, 3)
    pool = ktree_edges(n, k, rng)
    g = DynamicGraph(n, [e for e in pool if rng.random() < 0.7])
    snap = g.snapshot()
    ntd = nice_decomposition(snap, k, isolated=False)
    # tables are built on demand, so oversized states cost no table work
    live = LiveState(snap, ntd, {p: TableStore(snap, ntd, get_plugin(p)) for p in PROPERTIES})
    for _ in range(rng.randint(0, 4)):
        e = rng.choice(pool)
        c = EdgeChange.delete(*e) if g.has_edge(*e) else EdgeChange.insert(*e)
        g.apply(c)
        update_special(live, c)
    return g, live


def test_c6_skeleton_equivalence(report):
    rng = random.Random(606)
    t0 = time.perf_counter()
    states, bad, largest = 0, [], 0
    while states < 200:
        g, live = _random_live(rng)
        size = len(live.center().vertices)
        if size > 12:
            continue
        states += 1
        largest = max(largest, size)
        for prop in PROPERTIES:
            p = get_plugin(prop)
            a, b = skeleton_answer(g, live, p), flat_answer(g, live, p)
            if a != b:
                bad.append((states, prop, a, b))
    dt = time.perf_counter() - t0
    report("C6", not bad, f"{states} live states (|C| <= {largest}), {len(bad)} disagreements, {dt:.1f}s")
    assert not bad, bad[:3]


def test_c7_mode_equivalence(report):
    diffs = []
    for i in range(20):
        n = 64 if i % 2 else 128
        lines = mixed_script(n, 1 + i % 3, 10 * epoch_length(n), seed=7000 + i)
        out = {}
        for mode in (Mode.INLINE, Mode.BACKGROUND):
            res = run_script(lines, EngineConfig(n=n, k_budget=1 + i % 3, mode=mode))
            out[mode] = "".join(r.to_json() + "\n" for r in res.records)
        if out[Mode.INLINE] != out[Mode.BACKGROUND]:
            diffs.append(i)
    report("C7", not diffs, f"20 scripts, {len(diffs)} differ between inline and background")
    assert not diffs


def test_c8_work_profile(report):
    n, k = 512, 2
    lines = mixed_script(n, k, 10 * epoch_length(n), seed=808)
    res = bench(lines, EngineConfig(n=n, k_budget=k))
    ep, full = res["epoch"], res["full"]
    ok = ep["serving_max_units"] == 0 and ep["total_units"] <= full["total_units"]
    report("C8", ok, f"serving max units/step {ep['serving_max_units']} over {ep['serving_steps']} steps; "
                     f"epoch total {ep['total_units']} vs full-recompute {full['total_units']} "
                     f"(ratio {res['ratio']:.2f}x)")
    assert ep["serving_max_units"] == 0
    assert ep["total_units"] <= full["total_units"]
