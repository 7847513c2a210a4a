"""Epoch-based dynamic query engine.

Tables are rebuilt once per epoch on a snapshot.  Between rebuilds a live
maintainer answers queries from stale tables: every vertex touched by a
change is pulled into a small *center* (the bags of a set of special tree
nodes), the regions between special nodes (petals) keep their precomputed
tables, and a DP over the tree of special nodes glues petals and the current
edges inside the center back together.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .decomposition import NiceTreeDecomposition, log2n, nice_decomposition
from .generators import PROPERTIES
from .graph import ChangeKind, DynamicGraph, EdgeChange, GraphSnapshot, norm_edge
from .plugins import PropertyPlugin, get_plugin
from .tables import (
    Answer,
    Table,
    TableStore,
    Triangle,
    answer_from_entry,
    eliminate,
    query_static,
    scope_nodes,
    triangle_scope,
)


class EngineError(RuntimeError):
    pass


class UncoveredVertex(EngineError):
    """A changed vertex lies in no bag (it had no edges in the snapshot)."""


class EdgeOutsideCenter(EngineError):
    pass


def epoch_length(n: int, c_factor: float = 1.0) -> int:
    if n < 1:
        raise ValueError("n must be positive")
    return max(1, math.ceil(c_factor * math.log2(n)))


# -- delta buffer -----------------------------------------------------------

@dataclass
class DeltaBuffer:
    """Changes held back from a rebuild, with insert/delete cancellation."""

    pending_inserts: set[tuple[int, int]] = field(default_factory=set)
    pending_deletes: set[tuple[int, int]] = field(default_factory=set)

    def add(self, c: EdgeChange) -> bool:
        """Record ``c``; return False if it cancelled a buffered change."""
        e = c.edge
        if c.kind is ChangeKind.INSERT:
            if e in self.pending_deletes:
                self.pending_deletes.discard(e)
                return False
            self.pending_inserts.add(e)
        else:
            if e in self.pending_inserts:
                self.pending_inserts.discard(e)
                return False
            self.pending_deletes.add(e)
        return True

    def cancels(self, c: EdgeChange) -> bool:
        """Remove and report a buffered opposite of ``c`` if there is one."""
        e = c.edge
        pool = self.pending_deletes if c.kind is ChangeKind.INSERT else self.pending_inserts
        if e in pool:
            pool.discard(e)
            return True
        return False

    def pop_smallest(self) -> EdgeChange | None:
        items = [(e, ChangeKind.INSERT) for e in self.pending_inserts]
        items += [(e, ChangeKind.DELETE) for e in self.pending_deletes]
        if not items:
            return None
        e, kind = min(items, key=lambda x: (x[0], x[1].value))
        (self.pending_inserts if kind is ChangeKind.INSERT else self.pending_deletes).discard(e)
        return EdgeChange(kind, *e)

    def __len__(self):
        return len(self.pending_inserts) + len(self.pending_deletes)

    @property
    def empty(self) -> bool:
        return not self.pending_inserts and not self.pending_deletes


# -- live maintainer ----------------------------------------------------------

@dataclass
class SpecialBagSet:
    special_nodes: set[int] = field(default_factory=lambda: {0})
    origin: dict[int, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.special_nodes)


@dataclass
class Center:
    vertices: tuple[int, ...]
    enumeration: dict[int, int]
    petal_identifiers: dict[Triangle, int]
    core: frozenset[int]


@dataclass
class LiveState:
    """Stale tables plus everything needed to correct them."""

    snapshot: GraphSnapshot
    ntd: NiceTreeDecomposition
    stores: dict[str, TableStore]
    special: SpecialBagSet = field(default_factory=SpecialBagSet)
    floating: set[int] = field(default_factory=set)
    covered: set[int] = field(default_factory=set)
    inserted: set[tuple[int, int]] = field(default_factory=set)
    deleted: set[tuple[int, int]] = field(default_factory=set)
    absorbed: int = 0
    _center: Center | None = None
    _petals: list[Triangle] | None = None

    def __post_init__(self):
        self.covered = set(self.ntd.bags[0])

    @property
    def ell(self) -> int:
        return self.ntd.max_bag

    def has_edge(self, u: int, v: int) -> bool:
        e = norm_edge(u, v)
        if e in self.inserted:
            return True
        return e not in self.deleted and self.snapshot.has_edge(u, v)

    def neighbors(self, v: int) -> set[int]:
        nb = set(self.snapshot.neighbors(v))
        for a, b in self.inserted:
            if a == v:
                nb.add(b)
            elif b == v:
                nb.add(a)
        for a, b in self.deleted:
            if a == v:
                nb.discard(b)
            elif b == v:
                nb.discard(a)
        return nb

    def petals(self) -> list[Triangle]:
        if self._petals is None:
            self._petals = maximal_clean_triangles(self.ntd, self.special)
        return self._petals

    def center(self) -> Center:
        if self._center is None:
            self._center = build_center(self)
        return self._center

    def center_edges(self) -> list[tuple[int, int]]:
        core = self.center().core
        out = set()
        for x in core:
            for y in self.neighbors(x):
                if y in core:
                    out.add(norm_edge(x, y))
        return sorted(out)


def _add_special(live: LiveState, j: int) -> None:
    ntd = live.ntd
    nodes = live.special.special_nodes
    if j in nodes:
        return
    # the deepest LCA with an existing special node is the only one missing
    best = None
    for s in nodes:
        a = ntd.lca(j, s)
        if best is None or ntd.depth_of[a] > ntd.depth_of[best]:
            best = a
    nodes.add(j)
    live.covered |= ntd.bags[j]
    if best is not None and best not in nodes:
        nodes.add(best)
        live.covered |= ntd.bags[best]


def special_node_for(ntd: NiceTreeDecomposition, v: int) -> int:
    node = ntd.top_node(v)
    if node is None:
        raise UncoveredVertex(f"vertex {v} is in no bag")
    return node


def update_special(live: LiveState, c: EdgeChange) -> LiveState:
    for v in (c.u, c.v):
        if v in live.covered or v in live.floating:
            continue
        try:
            j = special_node_for(live.ntd, v)
        except UncoveredVertex:
            live.floating.add(v)
            continue
        live.special.origin[v] = j
        _add_special(live, j)
    e = c.edge
    if c.kind is ChangeKind.INSERT:
        if e in live.deleted:
            live.deleted.discard(e)
        else:
            live.inserted.add(e)
    else:
        if e in live.inserted:
            live.inserted.discard(e)
        else:
            live.deleted.add(e)
    live.absorbed += 1
    live._center = None
    live._petals = None
    return live


def special_children(ntd: NiceTreeDecomposition, special: Iterable[int]) -> dict[int, list[int]]:
    """Tree induced on special nodes: node -> special nodes directly below."""
    nodes = sorted(special)
    kids: dict[int, list[int]] = {s: [] for s in nodes}
    stack: list[int] = []
    # preorder ids: a node's special parent is the nearest open ancestor
    for s in nodes:
        while stack and not ntd.is_ancestor(stack[-1], s):
            stack.pop()
        if stack:
            kids[stack[-1]].append(s)
        stack.append(s)
    return kids


def maximal_clean_triangles(ntd: NiceTreeDecomposition, special: SpecialBagSet | Iterable[int]) -> list[Triangle]:
    nodes = special.special_nodes if isinstance(special, SpecialBagSet) else set(special)
    kids = special_children(ntd, nodes)
    out = []
    for s in sorted(nodes):
        tops = []
        for c in ntd.children[s]:
            below = [a for a in kids[s] if ntd.is_ancestor(c, a)]
            if len(below) > 1:
                raise EngineError(f"special set not LCA-closed below node {c}")
            tops.extend(below)
        if not tops:
            out.append(Triangle.open(s))
        elif len(tops) == 1:
            out.append(Triangle.unary(s, tops[0]))
        else:
            out.append(Triangle(s, tops[0], tops[1]))
    return out


def build_center(live: LiveState) -> Center:
    ntd = live.ntd
    core = set(live.floating)
    for s in live.special.special_nodes:
        core |= ntd.bags[s]
    ids: dict[Triangle, int] = {}
    for t in live.petals():
        scope = triangle_scope(live.snapshot, ntd, t)
        if scope.inner_vertices:
            ids[t] = min(scope.inner_vertices)
    verts = tuple(sorted(core | set(ids.values())))
    return Center(verts, {v: k for k, v in enumerate(verts)}, ids, frozenset(core))


def connection_widths(live: LiveState) -> dict[Triangle, int]:
    """|V(petal) & C| for every petal."""
    c = set(live.center().vertices)
    out = {}
    for t in live.petals():
        scope = triangle_scope(live.snapshot, live.ntd, t)
        out[t] = len(scope.vertices & c)
    return out


def petal_partition_ok(live: LiveState) -> bool:
    """Petal scopes minus their corners partition the non-special nodes."""
    seen: list[int] = []
    for t in live.petals():
        seen.extend(j for j in scope_nodes(live.ntd, t) if j not in (t.i0, t.i1, t.i2))
    want = set(live.ntd.nodes) - live.special.special_nodes
    return len(seen) == len(set(seen)) and set(seen) == want


# -- skeleton DP ------------------------------------------------------------

def _petal_factors(store: TableStore, t: Triangle):
    """Factors and glue for one petal.  Open and unary petals have stored
    tables; a proper petal is glued from its two child triangles here."""
    if t.i1 == t.i0 or t.i1 == t.i2:
        return [store.table(t)], set(), []
    ntd, g = store.ntd, store.graph
    interface = ntd.bags[t.i0] | ntd.bags[t.i1] | ntd.bags[t.i2]
    factors, touched = store.child_factors(t.i0, t.holes)
    glue = touched - interface
    edges = {norm_edge(u, v) for u in glue for v in g.neighbors(u) if v in touched}
    return factors, glue, sorted(edges)


def _top_special(live: LiveState) -> dict[int, int]:
    """h(x): topmost special node holding x; the root for floating vertices."""
    ntd = live.ntd
    h: dict[int, int] = {}
    for s in sorted(live.special.special_nodes):
        for x in ntd.bags[s]:
            h.setdefault(x, s)
    for x in live.floating:
        h[x] = 0
    return h


def skeleton_answer(g_current: DynamicGraph, live: LiveState, p: PropertyPlugin,
                    stats: dict | None = None) -> Answer:
    ntd = live.ntd
    store = live.stores[p.name]
    center = live.center()
    core = center.core
    for e in live.inserted | live.deleted:
        if e[0] not in core or e[1] not in core:
            raise EdgeOutsideCenter(f"changed edge {e} leaves the center")
    kids = special_children(ntd, live.special.special_nodes)
    sparent = {a: s for s, ch in kids.items() for a in ch}
    h = _top_special(live)

    def higher(a: int, b: int) -> int:
        return a if ntd.depth_of[a] <= ntd.depth_of[b] else b

    # J(x): the special node where x is eliminated
    elim_at = {x: sparent.get(hx, hx) for x, hx in h.items()}
    edges_at: dict[int, list[tuple[int, int]]] = {s: [] for s in kids}
    for x, y in live.center_edges():
        z = ntd.lca(h[x], h[y])
        edges_at[z].append((x, y))
        elim_at[x] = higher(elim_at[x], z)
        elim_at[y] = higher(elim_at[y], z)
    owned: dict[int, list[int]] = {s: [] for s in kids}
    for x, s in elim_at.items():
        owned[s].append(x)
    exempt = {x for x in core if not g_current.neighbors(x)} | store.exempt
    petal_of = {t.i0: t for t in live.petals()}
    local: dict = {}

    def solve(s: int) -> Table:
        factors, glue, gedges = _petal_factors(store, petal_of[s])
        factors = list(factors) + [solve(a) for a in kids[s]]
        variables = set(glue) | set(owned[s])
        for f in factors:
            variables.update(f.vars)
        for x, y in gedges + edges_at[s]:
            variables.update((x, y))
        out = sorted(x for x in variables if x in elim_at and elim_at[x] != s)
        return eliminate(p, factors, variables, gedges + edges_at[s], out, exempt, local)

    res = solve(0)
    if stats is not None:
        stats["skeleton_dp_states"] = stats.get("skeleton_dp_states", 0) + local.get("states", 0)
    return answer_from_entry(p, res.entries.get(()))


def flat_answer(g_current: DynamicGraph, live: LiveState, p: PropertyPlugin) -> Answer:
    """Reference: enumerate labellings of the center core directly.

    Proper petals are looked up in their own (lazily built) tables here, so
    this shares no gluing code with ``skeleton_answer``.
    """
    store = live.stores[p.name]
    core = sorted(live.center().core)
    tables = [store.table(t) for t in live.petals()]
    edges = live.center_edges()
    allowed = {(a, b) for a in p.bases for b in p.bases if p.edge_ok(a, b)}
    index = {x: k for k, x in enumerate(core)}
    # edges checked when their later endpoint is labelled
    later: list[list[int]] = [[] for _ in core]
    for x, y in edges:
        a, b = sorted((index[x], index[y]))
        later[b].append(a)
    lab = [0] * len(core)
    best: list = [None]

    def evaluate():
        sel = {x for x, b in zip(core, lab) if p.selects(b)}
        labels = dict(zip(core, lab))
        if p.has_flags:
            # each undominated vertex picks the petal that dominates it
            need = [x for x in core if x not in sel and g_current.neighbors(x)
                    and not (g_current.neighbors(x) & sel)]
            choices = [[i for i, tab in enumerate(tables) if x in tab.vars] for x in need]
            if any(not ch for ch in choices):
                return False
            options = _product_lists(choices)
        else:
            need, options = [], [()]
        for pick in options:
            total, wit = len(sel), list(sel)
            for i, tab in enumerate(tables):
                if p.has_flags:
                    key = {x: 2 if x in sel else 0 for x in tab.vars}
                    for x, j in zip(need, pick):
                        if j == i:
                            key[x] = 1
                else:
                    key = labels
                ent = tab.entries.get(tuple(key[x] for x in tab.vars))
                if ent is None:
                    break
                total += ent[0]
                wit.extend(ent[1])
            else:
                cand = (total, tuple(sorted(wit)))
                if best[0] is None or cand < best[0]:
                    best[0] = cand
                if not p.optimization:
                    return True
        return False

    def go(k: int) -> bool:
        if k == len(core):
            return evaluate()
        for b in p.bases:
            lab[k] = b
            if all((lab[j], b) in allowed for j in later[k]):
                if go(k + 1):
                    return True
        return False

    go(0)
    if not p.optimization:
        return Answer(p.name, best[0] is not None)
    return answer_from_entry(p, best[0])


def _product_lists(lists: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    out = [()]
    for ch in lists:
        out = [o + (c,) for o in out for c in ch]
    return out


# -- rebuild ------------------------------------------------------------------

def fresh_live(snapshot: GraphSnapshot, k_budget: int, properties: Sequence[str],
               include_proper: bool = False) -> tuple[LiveState, int]:
    ntd = nice_decomposition(snapshot, k_budget, isolated=False)
    stores = {name: TableStore(snapshot, ntd, get_plugin(name), include_proper) for name in properties}
    units = 0
    for st in stores.values():
        units += st.build_all()
    return LiveState(snapshot, ntd, stores), units


class Builder:
    """One epoch's rebuild: decomposition plus tables for every property.

    ``advance`` builds a bounded number of table units (the decomposition
    runs with the first slice); ``run_all`` does everything at once.
    """

    def __init__(self, snapshot: GraphSnapshot, k_budget: int, properties: Sequence[str]):
        self.snapshot = snapshot
        self.k_budget = k_budget
        self.properties = tuple(properties)
        self.ntd: NiceTreeDecomposition | None = None
        self.stores: dict[str, TableStore] = {}
        self.units = 0
        self.error: BaseException | None = None

    def _decompose(self):
        if self.ntd is None:
            self.ntd = nice_decomposition(self.snapshot, self.k_budget, isolated=False)
            self.stores = {name: TableStore(self.snapshot, self.ntd, get_plugin(name))
                           for name in self.properties}

    @property
    def remaining(self) -> int | None:
        if self.ntd is None:
            return None
        return sum(st.remaining for st in self.stores.values())

    @property
    def complete(self) -> bool:
        return self.ntd is not None and self.remaining == 0

    def advance(self, units: int) -> int:
        self._decompose()
        built = 0
        for st in self.stores.values():
            if built >= units:
                break
            built += st.advance(units - built)
        self.units += built
        return built

    def slice(self, steps_left: int) -> int:
        """Advance by the quantum that finishes within ``steps_left`` steps."""
        self._decompose()
        quantum = -(-self.remaining // max(1, steps_left))
        return self.advance(quantum)

    def run_all(self) -> None:
        try:
            self._decompose()
            self.advance(self.remaining)
        except BaseException as exc:  # surfaced at the handshake
            self.error = exc

    def live(self) -> LiveState:
        if not self.complete:
            raise EngineError("rebuild not finished")
        return LiveState(self.snapshot, self.ntd, self.stores)


# -- epochs -------------------------------------------------------------------

class Phase(str, Enum):
    RECOMPUTING = "recomputing"
    REPLAYING = "replaying"


class Mode(str, Enum):
    INLINE = "inline"
    BACKGROUND = "background"
    FULL = "full-recompute"


@dataclass
class EngineConfig:
    n: int
    k_budget: int = 3
    epoch_factor: float = 1.0
    mode: Mode | str = Mode.INLINE
    seed: int = 0
    properties: tuple[str, ...] = PROPERTIES

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.properties = tuple(self.properties)
        for name in self.properties:
            get_plugin(name)


@dataclass
class EpochState:
    index: int
    snapshot: GraphSnapshot
    builder: Builder
    counter: int = 0
    delta: DeltaBuffer = field(default_factory=DeltaBuffer)
    next_live: LiveState | None = None
    thread: threading.Thread | None = None

    def phase(self, half: int) -> Phase:
        return Phase.RECOMPUTING if self.counter < half else Phase.REPLAYING


@dataclass
class Counters:
    foreground_units: int = 0
    builder_units: int = 0
    bootstrap_units: int = 0
    full_units: int = 0
    skeleton_dp_states: int = 0
    handovers: int = 0


class Engine:
    """Change/query loop.  ``on_change`` and ``query`` are the whole API."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.graph = DynamicGraph(config.n)
        self.f = epoch_length(config.n, config.epoch_factor)
        self.half = self.f // 2
        self.live: LiveState | None = None
        self.counters = Counters()
        self.step_units = 0  # foreground table units of the current step
        self._last_states = 0
        self._boot_cache: dict[str, tuple[int, LiveState]] = {}
        self._full: LiveState | None = None
        self.epoch: EpochState | None = None
        if self.config.mode is not Mode.FULL:
            self._start_epoch(0)

    # -- scheduling -------------------------------------------------------
    def _start_epoch(self, index: int) -> None:
        snap = self.graph.snapshot()
        ep = EpochState(index, snap, Builder(snap, self.config.k_budget, self.config.properties))
        self.epoch = ep
        if self.half == 0:
            self._finish_build()
        elif self.config.mode is Mode.BACKGROUND:
            ep.thread = threading.Thread(target=ep.builder.run_all, daemon=True)
            ep.thread.start()

    def _finish_build(self) -> None:
        ep = self.epoch
        b = ep.builder
        if ep.thread is not None:
            ep.thread.join()
            ep.thread = None
            if b.error is not None:
                raise b.error
            self.counters.builder_units += b.units
        elif not b.complete:
            before = b.units
            b.advance(0)
            b.advance(b.remaining)
            self.counters.builder_units += b.units - before
        ep.next_live = b.live()

    @property
    def phase(self) -> Phase | None:
        if self.epoch is None:
            return None
        return self.epoch.phase(self.half)

    @property
    def serving(self) -> bool:
        return self.live is not None

    def on_change(self, c: EdgeChange) -> None:
        self.graph.apply(c)
        self.step_units = 0
        self._last_states = 0
        if self.config.mode is Mode.FULL:
            snap = self.graph.snapshot()
            self._full, units = fresh_live(snap, self.config.k_budget, self.config.properties)
            self.counters.full_units += units
            self.step_units = units
            return
        if self.live is not None:
            update_special(self.live, c)
        ep = self.epoch
        ep.counter += 1
        if ep.counter <= self.half:
            ep.delta.add(c)
            if ep.thread is None:
                before = ep.builder.units
                ep.builder.slice(self.half - ep.counter + 1)
                self.counters.builder_units += ep.builder.units - before
        else:
            if ep.next_live is None:
                self._finish_build()
            nl = ep.next_live
            if not ep.delta.cancels(c):
                update_special(nl, c)
            buffered = ep.delta.pop_smallest()
            if buffered is not None:
                update_special(nl, buffered)
        if ep.counter == self.f:
            if not ep.delta.empty:
                raise EngineError("delta buffer not drained at handover")
            self.live = ep.next_live
            self.counters.handovers += 1
            self._start_epoch(ep.index + 1)

    # -- answering ----------------------------------------------------------
    def query(self, prop: str) -> Answer:
        plugin = get_plugin(prop)
        self.step_units = 0
        self._last_states = 0
        if prop not in self.config.properties:
            raise EngineError(f"engine not configured for {prop!r}")
        if self.config.mode is Mode.FULL:
            if self._full is None:
                self._full, units = fresh_live(self.graph.snapshot(), self.config.k_budget,
                                               self.config.properties)
                self.counters.full_units += units
                self.step_units = units
            return query_static(self._full.stores[prop], self.graph)
        if self.live is None:
            return self.bootstrap_answer(prop)
        stats: dict = {}
        store = self.live.stores[prop]
        before = store.units_built
        ans = skeleton_answer(self.graph, self.live, plugin, stats)
        # stale tables are never extended here; count it if that ever changes
        self.step_units += store.units_built - before
        self.counters.foreground_units += store.units_built - before
        self.counters.skeleton_dp_states += stats.get("skeleton_dp_states", 0)
        self._last_states = stats.get("skeleton_dp_states", 0)
        return ans

    def bootstrap_answer(self, prop: str) -> Answer:
        cached = self._boot_cache.get(prop)
        if cached is None or cached[0] != self.graph.version:
            snap = self.graph.snapshot()
            live, units = fresh_live(snap, self.config.k_budget, (prop,))
            self.counters.bootstrap_units += units
            self.counters.foreground_units += units
            self.step_units += units
            cached = self._boot_cache[prop] = (self.graph.version, live)
        return query_static(cached[1].stores[prop], self.graph)

    def close(self) -> None:
        if self.epoch is not None and self.epoch.thread is not None:
            self.epoch.thread.join()

    # -- reporting ----------------------------------------------------------
    def snapshot_counters(self) -> dict:
        live = self.live
        return {
            "table_units_built": self.step_units,
            "special_bags": len(live.special) if live else 0,
            "center_size": len(live.center().vertices) if live else 0,
            "skeleton_dp_states": self._last_states,
        }


def bootstrap_answer(g: DynamicGraph, p: PropertyPlugin, k_budget: int = 3) -> Answer:
    live, _ = fresh_live(g.snapshot(), k_budget, (p.name,))
    return query_static(live.stores[p.name], g)
