"""Triangles of a nice tree decomposition and their DP tables.

A table for triangle ``(i0, i1, i2)`` answers, for a labelling of the
interface ``B(i0) | B(i1) | B(i2)``, whether it extends to the inner vertices
of the triangle's subgraph, and at what minimum inner cost.  Tables only key
on *relevant* interface vertices (those with an inner neighbour); any other
interface vertex may carry any label its plug-in allows on detached vertices.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

from .decomposition import NiceTreeDecomposition
from .graph import DynamicGraph, norm_edge
from .plugins import PropertyPlugin

Entry = tuple[int, tuple[int, ...]]  # (inner cost, sorted witness)


class StaleTables(RuntimeError):
    pass


class TriangleKind(str, Enum):
    OPEN = "open"
    UNARY = "unary"
    PROPER = "proper"


class Triangle(NamedTuple):
    i0: int
    i1: int
    i2: int

    @property
    def kind(self) -> TriangleKind:
        if self.i0 == self.i1 == self.i2:
            return TriangleKind.OPEN
        if self.i1 == self.i2:
            return TriangleKind.UNARY
        return TriangleKind.PROPER

    @property
    def holes(self) -> tuple[int, ...]:
        """Corners below ``i0`` whose subtrees are cut off."""
        if self.i1 == self.i0:
            return ()
        if self.i1 == self.i2:
            return (self.i1,)
        return (self.i1, self.i2)

    @classmethod
    def open(cls, i: int) -> "Triangle":
        return cls(i, i, i)

    @classmethod
    def unary(cls, i0: int, i1: int) -> "Triangle":
        return cls(i0, i1, i1)


def is_triangle(ntd: NiceTreeDecomposition, t: Triangle) -> bool:
    anc = ntd.is_ancestor
    if not (anc(t.i0, t.i1) and anc(t.i0, t.i2)):
        return False
    if t.i1 == t.i2:
        return True
    return not anc(t.i1, t.i2) and not anc(t.i2, t.i1)


@dataclass
class Table:
    vars: tuple[int, ...]
    entries: dict[tuple[int, ...], Entry]

    def lookup(self, assignment: Mapping[int, int], plugin: PropertyPlugin,
               interface: Iterable[int] = ()) -> Entry | None:
        """Entry for a labelling of (a superset of) the interface, or ``None``."""
        for v in interface:
            if v not in self.vars and not plugin.detached_ok(assignment[v]):
                return None
        return self.entries.get(tuple(assignment[v] for v in self.vars))

    def __len__(self):
        return len(self.entries)


def join(
    plugin: PropertyPlugin,
    factors: Sequence[Table],
    variables: Iterable[int],
    edges: Iterable[tuple[int, int]],
    out_vars: Sequence[int],
    exempt: frozenset[int] | set[int] = frozenset(),
    stats: dict | None = None,
) -> Table:
    """Combine factor tables, label the remaining variables, project.

    Every variable not in ``out_vars`` is eliminated here: its cost is charged
    and, for flagged plug-ins, its inner condition is enforced (unless it is in
    ``exempt``).  ``edges`` are checked with the plug-in's edge predicate and,
    for domination, flag their endpoints.
    """
    opt = plugin.optimization
    use_flags = plugin.has_flags
    var_list = sorted(set(variables))
    pos = {v: k for k, v in enumerate(var_list)}
    m = len(var_list)
    out_vars = tuple(out_vars)
    out_pos = [pos[v] for v in out_vars]
    is_out = [False] * m
    for p in out_pos:
        is_out[p] = True
    selb = [plugin.selects(b) for b in range(max(plugin.bases) + 1)]

    base = [0] * m
    flag = [False] * m
    stage_of_var = [-1] * m
    touched_at = [[] for _ in range(m)]  # stages whose factor mentions the var
    stages = []
    for t in sorted(factors, key=lambda t: len(t.entries)):
        if not t.entries:
            return Table(out_vars, {})
        s = len(stages)
        tp = [pos[v] for v in t.vars]
        shared = [k for k, p in enumerate(tp) if stage_of_var[p] >= 0]
        new = [k for k, p in enumerate(tp) if stage_of_var[p] < 0]
        index: dict[tuple, list] = defaultdict(list)
        for labels, (cost, wit) in t.entries.items():
            dec = [plugin.decode(lab) for lab in labels]
            key = tuple(dec[k][0] for k in shared)
            index[key].append((
                [(tp[k], dec[k][0]) for k in new],
                [tp[k] for k in range(len(tp)) if dec[k][1]],
                cost,
                wit,
            ))
        for k in new:
            stage_of_var[tp[k]] = s
        for p in tp:
            touched_at[p].append(s)
        stages.append((False, [tp[k] for k in shared], index))
    for p in range(m):
        if stage_of_var[p] < 0:
            stage_of_var[p] = len(stages)
            stages.append((True, p, None))
    n_st = len(stages)

    allowed = {(a, b) for a in plugin.bases for b in plugin.bases if plugin.edge_ok(a, b)}
    trivial_edges = len(allowed) == len(plugin.bases) ** 2
    nbrs: list[list[int]] = [[] for _ in range(m)]
    checks: list[list[tuple[int, int]]] = [[] for _ in range(n_st)]
    for u, v in edges:
        pu, pv = pos[u], pos[v]
        nbrs[pu].append(pv)
        nbrs[pv].append(pu)
        if not trivial_edges:
            checks[max(stage_of_var[pu], stage_of_var[pv])].append((pu, pv))
    # eliminated vars: charge cost when assigned, check the inner condition
    # once every edge and factor that can flag them has been seen
    charge: list[list[int]] = [[] for _ in range(n_st)]
    inner: list[list[int]] = [[] for _ in range(n_st)]
    for p in range(m):
        if is_out[p]:
            continue
        charge[stage_of_var[p]].append(p)
        if use_flags and var_list[p] not in exempt:
            last = max([stage_of_var[p]] + [stage_of_var[q] for q in nbrs[p]] + touched_at[p])
            inner[last].append(p)
    inner_ok = plugin.inner_ok

    def flagged(p: int) -> bool:
        if flag[p]:
            return True
        for q in nbrs[p]:
            if selb[base[q]]:
                return True
        return False

    out_flag = use_flags
    out_label = plugin.out_label
    result: dict[tuple, Entry] = {}
    bases = plugin.bases
    counter = [0]
    wit_parts: list[tuple[int, ...]] = []

    def finish(cost):
        counter[0] += 1
        if out_flag:
            k = tuple([out_label(base[p], flagged(p)) for p in out_pos])
        else:
            k = tuple([base[p] for p in out_pos])
        if not opt:
            result[k] = (0, ())
            return
        old = result.get(k)
        if old is not None and old[0] < cost:
            return
        wit = tuple(sorted(x for part in wit_parts for x in part))
        if old is None or (cost, wit) < old:
            result[k] = (cost, wit)

    def after(s, cost):
        # bookkeeping once stage s has assigned its variables
        for pu, pv in checks[s]:
            if (base[pu], base[pv]) not in allowed:
                return
        extra = ()
        if opt:
            chosen = [var_list[p] for p in charge[s] if selb[base[p]]]
            if chosen:
                cost += len(chosen)
                extra = tuple(chosen)
        for p in inner[s]:
            if not inner_ok(base[p], flagged(p)):
                return
        if extra:
            wit_parts.append(extra)
            rec(s + 1, cost)
            wit_parts.pop()
        else:
            rec(s + 1, cost)

    def rec(s, cost):
        if s == n_st:
            finish(cost)
            return
        free, a, index = stages[s]
        if free:
            for b in bases:
                base[a] = b
                after(s, cost)
            return
        for new, flg, c, w in index.get(tuple([base[p] for p in a]), ()):
            for p, b in new:
                base[p] = b
            if flg:
                saved = [flag[p] for p in flg]
                for p in flg:
                    flag[p] = True
            if w:
                wit_parts.append(w)
                after(s, cost + c)
                wit_parts.pop()
            else:
                after(s, cost + c)
            if flg:
                for p, old in zip(flg, saved):
                    flag[p] = old

    rec(0, 0)
    relax_closure(result, plugin.relax)
    if stats is not None:
        stats["states"] = stats.get("states", 0) + counter[0]
    return Table(out_vars, result)


DIRECT_JOIN_LIMIT = 3


def eliminate(
    plugin: PropertyPlugin,
    factors: Sequence[Table],
    variables: Iterable[int],
    edges: Iterable[tuple[int, int]],
    out_vars: Sequence[int],
    exempt: frozenset[int] | set[int] = frozenset(),
    stats: dict | None = None,
) -> Table:
    """Same result as ``join``, computed one variable at a time.

    Each non-output variable is removed by joining only the factors and edges
    that mention it (greedy smallest-neighbourhood order), so the cost is
    governed by the interaction width rather than the variable count.
    """
    out_set = set(out_vars)
    pending = list(factors)
    pending_edges = list(edges)
    todo = set(variables) - out_set
    for t in pending:
        todo.update(v for v in t.vars if v not in out_set)
    for e in pending_edges:
        todo.update(v for v in e if v not in out_set)
    if len(todo) <= DIRECT_JOIN_LIMIT:
        return join(plugin, pending, set(variables) | todo | out_set, pending_edges, out_vars, exempt, stats)
    while todo:
        best = None
        for x in todo:
            nb = {x}
            for t in pending:
                if x in t.vars:
                    nb.update(t.vars)
            for e in pending_edges:
                if x in e:
                    nb.update(e)
            key = (len(nb), x)
            if best is None or key < best[0]:
                best = (key, x, nb)
        _, x, nb = best
        bucket = [t for t in pending if x in t.vars]
        bedges = [e for e in pending_edges if x in e]
        pending = [t for t in pending if x not in t.vars]
        pending_edges = [e for e in pending_edges if x not in e]
        nb.discard(x)
        pending.append(join(plugin, bucket, nb | {x}, bedges, sorted(nb), exempt, stats))
        todo.discard(x)
    rest = set(out_set)
    return join(plugin, pending, rest, pending_edges, out_vars, exempt, stats)


def relax_closure(result: dict[tuple, Entry], relax: Mapping[int, int]) -> None:
    """Make a table upward closed: a labelling with a stronger label at some
    position also answers the same labelling with the weaker label."""
    if not relax or not result:
        return
    width = len(next(iter(result)))
    for i in range(width):
        for k, val in list(result.items()):
            weak = relax.get(k[i])
            if weak is None:
                continue
            k2 = k[:i] + (weak,) + k[i + 1:]
            old = result.get(k2)
            if old is None or val < old:
                result[k2] = val


# -- triangles ------------------------------------------------------------

def enumerate_triangles(ntd: NiceTreeDecomposition, include_proper: bool = True) -> list[list[Triangle]]:
    """Triangles grouped by the height of their top corner.

    Open triangles at every node, unary triangles for every strict ancestor
    pair and, with ``include_proper``, proper triangles whose top corner is
    the lowest common ancestor of the two others.  These are exactly the
    triangles the bottom-up recursion reaches from those shapes.  Every
    triangle depends only on triangles topped at children of its top corner,
    hence on earlier groups.
    """
    levels: list[list[Triangle]] = [[] for _ in range(ntd.height_of[0] + 1 if ntd.bags else 1)]
    for i in ntd.nodes:
        lvl = levels[ntd.height_of[i]]
        lvl.append(Triangle.open(i))
        for a in range(i + 1, i + ntd.size[i]):
            lvl.append(Triangle.unary(i, a))
        if include_proper and len(ntd.children[i]) == 2:
            left, right = ntd.children[i]
            for a in range(left, left + ntd.size[left]):
                for b in range(right, right + ntd.size[right]):
                    lvl.append(Triangle(i, a, b))
    return levels


@dataclass
class TriangleScope:
    triangle: Triangle
    subtree_nodes: frozenset[int]
    interface_vertices: tuple[int, ...]
    inner_vertices: frozenset[int]
    scoped_edges: frozenset[tuple[int, int]]

    @property
    def vertices(self) -> frozenset[int]:
        return self.inner_vertices | frozenset(self.interface_vertices)


def scope_nodes(ntd: NiceTreeDecomposition, t: Triangle) -> list[int]:
    i0 = t.i0
    cut = [(h + 1, h + ntd.size[h]) for h in t.holes]
    return [j for j in range(i0, i0 + ntd.size[i0]) if not any(a <= j < b for a, b in cut)]


def triangle_scope(g: DynamicGraph, ntd: NiceTreeDecomposition, t: Triangle) -> TriangleScope:
    nodes = scope_nodes(ntd, t)
    interface = ntd.bags[t.i0] | ntd.bags[t.i1] | ntd.bags[t.i2]
    everything = frozenset().union(*(ntd.bags[j] for j in nodes))
    inner = everything - interface
    edges = frozenset(
        norm_edge(u, v) for u in inner for v in g.neighbors(u)
    )
    return TriangleScope(t, frozenset(nodes), tuple(sorted(interface)), inner, edges)


def inner_tree_nodes(ntd: NiceTreeDecomposition, t: Triangle) -> int:
    count = ntd.size[t.i0] - sum(ntd.size[h] - 1 for h in t.holes)
    return count - len({t.i0, t.i1, t.i2})


# -- table store ----------------------------------------------------------

class TableStore:
    """DP tables of one property over one graph snapshot and decomposition.

    Tables are built in the order of ``plan`` (bottom-up by level); ``advance``
    builds a bounded number of them so a rebuild can be spread over steps.
    Triangles outside the plan are computed on first use.
    """

    def __init__(self, g: DynamicGraph, ntd: NiceTreeDecomposition, plugin: PropertyPlugin,
                 include_proper: bool = False):
        self.graph = g
        self.version = g.version
        self.ntd = ntd
        self.plugin = plugin
        self.tables: dict[Triangle, Table] = {}
        self.levels = enumerate_triangles(ntd, include_proper)
        self.plan = [t for lvl in self.levels for t in lvl]
        self.cursor = 0
        self.units_built = 0
        self.stats: dict = {}
        bag_vertices = set().union(*ntd.bags) if ntd.bags else set()
        self.exempt = frozenset(v for v in bag_vertices if not g.neighbors(v))

    @property
    def complete(self) -> bool:
        return self.cursor >= len(self.plan)

    @property
    def remaining(self) -> int:
        return len(self.plan) - self.cursor

    def advance(self, units: int) -> int:
        built = 0
        while built < units and self.cursor < len(self.plan):
            t = self.plan[self.cursor]
            self.cursor += 1
            if t not in self.tables:
                self.tables[t] = self._compute(t)
                self.units_built += 1
                built += 1
        return built

    def build_all(self) -> int:
        return self.advance(len(self.plan))

    def table(self, t: Triangle) -> Table:
        tab = self.tables.get(t)
        if tab is None:
            tab = self.tables[t] = self._compute(t)
            self.units_built += 1
        return tab

    def entry_count_summary(self) -> dict[str, int]:
        kinds: dict[str, int] = defaultdict(int)
        for t, tab in self.tables.items():
            kinds[t.kind.value] += len(tab.entries)
        return {"tables": len(self.tables), "entries": sum(kinds.values()), **kinds}

    # -- computation ----------------------------------------------------
    def child_factors(self, i0: int, holes: Sequence[int]):
        """Factor tables below ``i0`` for the given cut corners, plus the
        union of the child bags and corner bags."""
        ntd = self.ntd
        factors = []
        touched = set(ntd.bags[i0])
        for h in holes:
            touched |= ntd.bags[h]
        for c in ntd.children[i0]:
            hs = tuple(h for h in holes if ntd.is_ancestor(c, h))
            touched |= ntd.bags[c]
            if hs == (c,):
                continue
            if not hs:
                sub = Triangle.open(c)
            elif len(hs) == 1:
                sub = Triangle.unary(c, hs[0])
            else:
                sub = Triangle(c, hs[0], hs[1])
            factors.append(self.table(sub))
        return factors, touched

    def _compute(self, t: Triangle) -> Table:
        if inner_tree_nodes(self.ntd, t) <= 2:
            return self._exhaustive(t)
        ntd, g = self.ntd, self.graph
        interface = set(ntd.bags[t.i0])
        for h in t.holes:
            interface |= ntd.bags[h]
        factors, touched = self.child_factors(t.i0, t.holes)
        glue = touched - interface
        glue_edges = set()
        relevant = set()
        for u in glue:
            for v in g.neighbors(u):
                if v in touched:
                    glue_edges.add(norm_edge(u, v))
                    if v in interface:
                        relevant.add(v)
        for f in factors:
            relevant.update(v for v in f.vars if v in interface)
        variables = set(glue) | relevant
        for f in factors:
            variables.update(f.vars)
        return eliminate(self.plugin, factors, variables, sorted(glue_edges), sorted(relevant),
                         self.exempt, self.stats)

    def _exhaustive(self, t: Triangle) -> Table:
        """Direct enumeration over the inner vertices of a small triangle."""
        scope = triangle_scope(self.graph, self.ntd, t)
        interface = set(scope.interface_vertices)
        relevant = sorted({v for e in scope.scoped_edges for v in e if v in interface})
        variables = set(scope.inner_vertices) | set(relevant)
        return eliminate(self.plugin, [], variables, sorted(scope.scoped_edges), relevant,
                         self.exempt, self.stats)


def compute_tables(g: DynamicGraph, ntd: NiceTreeDecomposition, plugin: PropertyPlugin,
                   include_proper: bool = False) -> TableStore:
    store = TableStore(g, ntd, plugin, include_proper)
    store.build_all()
    return store


# -- answers --------------------------------------------------------------

@dataclass(frozen=True)
class Answer:
    prop: str
    value: bool | int | None
    witness: tuple[int, ...] | None = None

    def to_json(self) -> dict:
        d = {"value": self.value}
        if self.witness is not None:
            d["witness"] = list(self.witness)
        return d


def answer_from_entry(plugin: PropertyPlugin, entry: Entry | None) -> Answer:
    if not plugin.optimization:
        return Answer(plugin.name, entry is not None)
    if entry is None:
        return Answer(plugin.name, None, None)
    return Answer(plugin.name, entry[0], entry[1])


def query_static(store: TableStore, g: DynamicGraph | None = None) -> Answer:
    """Answer from the root's open table; the graph must match the tables."""
    if g is not None and g.version != store.version:
        raise StaleTables(f"tables at version {store.version}, graph at {g.version}")
    ntd = store.ntd
    root_bag = ntd.bags[0]
    top = store.table(Triangle.open(0))
    edges = sorted({norm_edge(u, v) for u in root_bag for v in store.graph.neighbors(u) if v in root_bag})
    res = eliminate(store.plugin, [top], set(root_bag) | set(top.vars), edges, (), store.exempt, store.stats)
    return answer_from_entry(store.plugin, res.entries.get(()))
