"""Seeded partial k-tree instances and change scripts."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .graph import DynamicGraph, EdgeChange, norm_edge

PROPERTIES = ("threecol", "vertexcover", "domset")


class BadParams(ValueError):
    pass


@dataclass(frozen=True)
class Query:
    prop: str

    def __str__(self):
        return f"query {self.prop}"


ScriptLine = EdgeChange | Query


def ktree_edges(n: int, k: int, rng: random.Random) -> list[tuple[int, int]]:
    """Edges of a random k-tree on ``[0, n)`` in construction order.

    The first k+1 vertices of a random permutation form a clique; every later
    vertex is joined to a uniformly chosen existing k-clique.
    """
    perm = list(range(n))
    rng.shuffle(perm)
    base = perm[: k + 1]
    edges = [norm_edge(base[a], base[b]) for a in range(k + 1) for b in range(a + 1, k + 1)]
    cliques = [tuple(sorted(base[:a] + base[a + 1:])) for a in range(k + 1)]
    for v in perm[k + 1:]:
        clique = rng.choice(cliques)
        edges.extend(norm_edge(v, u) for u in clique)
        for a in range(k):
            cliques.append(tuple(sorted(clique[:a] + clique[a + 1:] + (v,))))
    return edges


def gen_partial_ktree(
    n: int,
    k: int,
    keep_prob: float = 1.0,
    seed: int = 0,
    delete_prob: float = 0.0,
) -> list[EdgeChange]:
    """Insert script for a random subgraph of a k-tree.

    With ``delete_prob`` > 0 a deletion of a random present edge follows an
    insertion with that probability; subgraphs of k-trees stay k-tree
    subgraphs, so every prefix has treewidth at most k.
    """
    if not (1 <= k < n) or not (0 < keep_prob <= 1) or not (0 <= delete_prob < 1):
        raise BadParams(f"n={n} k={k} keep_prob={keep_prob} delete_prob={delete_prob}")
    rng = random.Random(seed)
    kept = [e for e in ktree_edges(n, k, rng) if rng.random() < keep_prob]
    script: list[EdgeChange] = []
    present: list[tuple[int, int]] = []
    for e in kept:
        script.append(EdgeChange.insert(*e))
        present.append(e)
        if delete_prob and rng.random() < delete_prob:
            gone = present.pop(rng.randrange(len(present)))
            script.append(EdgeChange.delete(*gone))
    return script


def partial_ktree(n: int, k: int, keep_prob: float = 1.0, seed: int = 0) -> DynamicGraph:
    g = DynamicGraph(n)
    for c in gen_partial_ktree(n, k, keep_prob, seed):
        g.apply(c)
    return g


def mixed_script(
    n: int,
    k: int,
    length: int,
    seed: int = 0,
    keep_prob: float = 0.8,
    delete_prob: float = 0.25,
    reinsert_prob: float = 0.3,
    query_prob: float = 0.35,
    properties: Sequence[str] = PROPERTIES,
) -> list[ScriptLine]:
    """Script of ``length`` lines mixing inserts, deletes and queries.

    Inserted edges come from one random k-tree; deleted edges may be inserted
    again later, so the graph stays a k-tree subgraph throughout.
    """
    if length < 0 or not properties:
        raise BadParams("bad script length or empty property list")
    rng = random.Random(seed)
    pool = [e for e in ktree_edges(n, k, rng) if rng.random() < keep_prob]
    fresh = iter(pool)
    present: list[tuple[int, int]] = []
    removed: list[tuple[int, int]] = []
    out: list[ScriptLine] = []
    while len(out) < length:
        r = rng.random()
        if r < query_prob:
            out.append(Query(rng.choice(properties)))
            continue
        if present and rng.random() < delete_prob:
            e = present.pop(rng.randrange(len(present)))
            removed.append(e)
            out.append(EdgeChange.delete(*e))
            continue
        if removed and rng.random() < reinsert_prob:
            e = removed.pop(rng.randrange(len(removed)))
        else:
            e = next(fresh, None)
            if e is None:
                if not removed:
                    out.append(Query(rng.choice(properties)))
                    continue
                e = removed.pop(rng.randrange(len(removed)))
        present.append(e)
        out.append(EdgeChange.insert(*e))
    return out


def format_script(lines: Sequence[ScriptLine]) -> str:
    return "".join(f"{line}\n" for line in lines)


class ScriptError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def parse_script(text: str) -> list[ScriptLine]:
    """Parse ``insert u v`` / ``delete u v`` / ``query <property>`` lines.

    Blank lines and ``#`` comments are skipped.
    """
    out: list[ScriptLine] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        op = parts[0]
        if op == "query":
            if len(parts) != 2 or parts[1] not in PROPERTIES:
                raise ScriptError(lineno, f"expected 'query <{'|'.join(PROPERTIES)}>', got {raw!r}")
            out.append(Query(parts[1]))
        elif op in ("insert", "delete"):
            if len(parts) != 3:
                raise ScriptError(lineno, f"expected '{op} u v', got {raw!r}")
            try:
                u, v = int(parts[1]), int(parts[2])
            except ValueError:
                raise ScriptError(lineno, f"non-integer vertex in {raw!r}") from None
            if u < 0 or v < 0 or u == v:
                raise ScriptError(lineno, f"bad edge {u} {v}")
            out.append(EdgeChange.insert(u, v) if op == "insert" else EdgeChange.delete(u, v))
        else:
            raise ScriptError(lineno, f"unknown command {op!r}")
    return out


def script_universe(lines: Sequence[ScriptLine]) -> int:
    """Smallest universe size holding every vertex the script mentions."""
    return 1 + max((max(l.u, l.v) for l in lines if isinstance(l, EdgeChange)), default=-1)
