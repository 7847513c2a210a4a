"""Reference answers computed without any decomposition.

The brute-force oracles refuse inputs beyond fixed sizes.  ``exact_answer``
has no size bound: backtracking for colouring and an integer program for the
two minimisation problems (optionally with a lexicographic tie-break pass,
one extra solve per vertex).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .graph import DynamicGraph

MAX_THREECOL = 24
MAX_VERTEX_COVER = 20
MAX_DOMSET = 18
MAX_TREEWIDTH = 10


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class OracleAnswer:
    prop: str
    value: bool | int
    witness: tuple[int, ...] | dict[int, int] | None = None

    def to_json(self) -> dict:
        d: dict = {"value": self.value}
        if isinstance(self.witness, tuple):
            d["witness"] = list(self.witness)
        return d


def _active(g: DynamicGraph, limit: int, what: str) -> list[int]:
    dom = sorted(g.active_domain())
    if len(dom) > limit:
        raise TooLarge(f"{what}: {len(dom)} active vertices > {limit}")
    return dom


def _colour_search(g: DynamicGraph, order: list[int]) -> dict[int, int] | None:
    colour: dict[int, int] = {}

    def go(k: int) -> bool:
        if k == len(order):
            return True
        v = order[k]
        used = {colour[u] for u in g.neighbors(v) if u in colour}
        for c in (1, 2, 3):
            if c not in used:
                colour[v] = c
                if go(k + 1):
                    return True
        colour.pop(v, None)
        return False

    return dict(colour) if go(0) else None


def brute_threecol(g: DynamicGraph) -> OracleAnswer:
    dom = _active(g, MAX_THREECOL, "threecol")
    col = _colour_search(g, dom)
    return OracleAnswer("threecol", col is not None, col)


def _smallest_set(dom: list[int], ok) -> tuple[int, ...]:
    # sizes ascending, combinations in lexicographic order: first hit is lex-min
    for r in range(len(dom) + 1):
        for sub in combinations(dom, r):
            if ok(set(sub)):
                return sub
    raise AssertionError("unreachable: the whole domain is always a solution")


def brute_min_vertex_cover(g: DynamicGraph) -> OracleAnswer:
    dom = _active(g, MAX_VERTEX_COVER, "vertexcover")
    edges = g.edge_list()
    best = _smallest_set(dom, lambda s: all(u in s or v in s for u, v in edges))
    return OracleAnswer("vertexcover", len(best), best)


def brute_min_dominating_set(g: DynamicGraph) -> OracleAnswer:
    dom = _active(g, MAX_DOMSET, "domset")
    closed = {v: g.neighbors(v) | {v} for v in dom}
    best = _smallest_set(dom, lambda s: all(closed[v] & s for v in dom))
    return OracleAnswer("domset", len(best), best)


def brute_treewidth_at_most(g: DynamicGraph, k: int) -> bool:
    """Is the treewidth of ``g`` at most ``k``?  Dynamic programming over
    vertex subsets (elimination orderings), exact for small graphs."""
    dom = _active(g, MAX_TREEWIDTH, "treewidth")
    if not dom:
        return True
    idx = {v: i for i, v in enumerate(dom)}
    adj = [0] * len(dom)
    for u, v in g.edge_list():
        adj[idx[u]] |= 1 << idx[v]
        adj[idx[v]] |= 1 << idx[u]
    n = len(dom)
    full = (1 << n) - 1

    def q(eliminated: int, v: int) -> int:
        # vertices outside ``eliminated`` reachable from v through it
        seen = 1 << v
        stack = [v]
        reach = 0
        while stack:
            x = stack.pop()
            nb = adj[x] & ~seen
            seen |= nb
            reach |= nb & ~eliminated
            inner = nb & eliminated
            while inner:
                low = inner & -inner
                stack.append(low.bit_length() - 1)
                inner ^= low
        return bin(reach).count("1")

    # feasible[S]: S can be eliminated first with every degree <= k
    feasible = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for s in frontier:
            if s == full:
                return True
            for v in range(n):
                bit = 1 << v
                if s & bit or (s | bit) in feasible:
                    continue
                if q(s, v) <= k:
                    feasible.add(s | bit)
                    nxt.append(s | bit)
        frontier = nxt
    return full in feasible


BRUTE = {
    "threecol": brute_threecol,
    "vertexcover": brute_min_vertex_cover,
    "domset": brute_min_dominating_set,
}


def brute_answer(g: DynamicGraph, prop: str) -> OracleAnswer:
    return BRUTE[prop](g)


# -- unbounded exact oracle ----------------------------------------------

def _milp_min(dom: list[int], rows: list[list[int]], lex: bool) -> tuple[int, ...]:
    """Minimum set hitting every row; lex-min among minimum sets if asked."""
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp

    n = len(dom)
    if n == 0:
        return ()
    idx = {v: i for i, v in enumerate(dom)}
    a = np.zeros((len(rows), n))
    for r, row in enumerate(rows):
        for v in row:
            a[r, idx[v]] = 1
    cons = [LinearConstraint(a, lb=1, ub=np.inf)] if rows else []
    integ = np.ones(n)

    def solve(lb, ub, extra):
        res = milp(np.ones(n), constraints=cons + extra, integrality=integ, bounds=Bounds(lb, ub))
        if not res.success:
            return None
        return [i for i in range(n) if res.x[i] > 0.5]

    lb, ub = np.zeros(n), np.ones(n)
    best = solve(lb, ub, [])
    size = len(best)
    if not lex:
        return tuple(dom[i] for i in best)
    card = [LinearConstraint(np.ones((1, n)), lb=size, ub=size)]
    # fix variables in order, preferring membership: lex-min among equal sizes
    for i in range(n):
        lb[i] = 1
        if solve(lb, ub, card) is None:
            lb[i], ub[i] = 0, 0
    return tuple(dom[i] for i in range(n) if lb[i] == 1)


EXACT_BRUTE_LIMIT = 12


def exact_answer(g: DynamicGraph, prop: str, lex: bool = False) -> OracleAnswer:
    """Exact answer with no size bound; brute force on tiny graphs."""
    dom = sorted(g.active_domain())
    if len(dom) <= EXACT_BRUTE_LIMIT:
        return brute_answer(g, prop)
    if prop == "threecol":
        order = sorted(dom, key=lambda v: (-g.degree(v), v))
        col = _colour_search(g, order)
        return OracleAnswer(prop, col is not None, col)
    if prop == "vertexcover":
        rows = [list(e) for e in g.edge_list()]
    elif prop == "domset":
        rows = [sorted(g.neighbors(v) | {v}) for v in dom]
    else:
        raise ValueError(prop)
    best = _milp_min(dom, rows, lex)
    return OracleAnswer(prop, len(best), best)
