"""Dynamic undirected graph over a fixed vertex universe ``[0, n)``."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator


class GraphError(ValueError):
    pass


class DuplicateInsert(GraphError):
    pass


class MissingDelete(GraphError):
    pass


class ChangeKind(str, Enum):
    INSERT = "insert"
    DELETE = "delete"


def norm_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class EdgeChange:
    kind: ChangeKind
    u: int
    v: int

    def __post_init__(self):
        if self.u == self.v:
            raise GraphError(f"self-loop {self.u}")

    @property
    def edge(self) -> tuple[int, int]:
        return norm_edge(self.u, self.v)

    @classmethod
    def insert(cls, u: int, v: int) -> "EdgeChange":
        return cls(ChangeKind.INSERT, u, v)

    @classmethod
    def delete(cls, u: int, v: int) -> "EdgeChange":
        return cls(ChangeKind.DELETE, u, v)

    def __str__(self):
        return f"{self.kind.value} {self.u} {self.v}"


class DynamicGraph:
    """Mutable graph with a change log.

    Edges are stored once as ``(min, max)``. ``version`` counts applied changes.
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 0:
            raise GraphError("negative universe size")
        self.n = n
        self.version = 0
        self.log: list[EdgeChange] = []
        self._adj: dict[int, set[int]] = {}
        self._edges: set[tuple[int, int]] = set()
        for u, v in edges:
            self.apply(EdgeChange.insert(u, v))

    # -- mutation -------------------------------------------------------
    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise GraphError(f"vertex {v} outside universe [0, {self.n})")

    def _add(self, u: int, v: int) -> None:
        self._check_vertex(u)
        self._check_vertex(v)
        if u == v:
            raise GraphError(f"self-loop {u}")
        e = norm_edge(u, v)
        if e in self._edges:
            raise DuplicateInsert(f"edge {e} already present")
        self._edges.add(e)
        self._adj.setdefault(u, set()).add(v)
        self._adj.setdefault(v, set()).add(u)

    def _remove(self, u: int, v: int) -> None:
        e = norm_edge(u, v)
        if e not in self._edges:
            raise MissingDelete(f"edge {e} not present")
        self._edges.discard(e)
        for a, b in ((u, v), (v, u)):
            nbrs = self._adj[a]
            nbrs.discard(b)
            if not nbrs:
                del self._adj[a]

    def apply(self, change: EdgeChange) -> "DynamicGraph":
        if change.kind is ChangeKind.INSERT:
            self._add(change.u, change.v)
        else:
            self._check_vertex(change.u)
            self._check_vertex(change.v)
            self._remove(change.u, change.v)
        self.version += 1
        self.log.append(change)
        return self

    # -- queries --------------------------------------------------------
    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        return frozenset(self._edges)

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self._edges)

    def has_edge(self, u: int, v: int) -> bool:
        return norm_edge(u, v) in self._edges

    def neighbors(self, v: int) -> set[int]:
        return self._adj.get(v, set())

    def degree(self, v: int) -> int:
        return len(self._adj.get(v, ()))

    def active_domain(self) -> set[int]:
        return set(self._adj)

    def num_edges(self) -> int:
        return len(self._edges)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self._edges))

    def __eq__(self, other):
        if not isinstance(other, DynamicGraph):
            return NotImplemented
        return self.n == other.n and self._edges == other._edges

    def __repr__(self):
        return f"DynamicGraph(n={self.n}, m={len(self._edges)}, version={self.version})"

    def copy(self) -> "DynamicGraph":
        g = DynamicGraph(self.n)
        g._edges = set(self._edges)
        g._adj = {v: set(nb) for v, nb in self._adj.items()}
        g.version = self.version
        g.log = list(self.log)
        return g

    def snapshot(self) -> "GraphSnapshot":
        return GraphSnapshot(self)


class GraphSnapshot(DynamicGraph):
    """Frozen copy of a graph; every mutation raises."""

    def __init__(self, source: DynamicGraph):
        self.n = source.n
        self.version = source.version
        self.log = list(source.log)
        self._edges = set(source._edges)
        self._adj = {v: set(nb) for v, nb in source._adj.items()}

    def apply(self, change: EdgeChange):
        raise TypeError("snapshots are immutable")


def apply_change(g: DynamicGraph, c: EdgeChange) -> DynamicGraph:
    return g.apply(c)


def active_domain(g: DynamicGraph) -> set[int]:
    return g.active_domain()


def snapshot(g: DynamicGraph) -> GraphSnapshot:
    return g.snapshot()


def replay(n: int, log: Iterable[EdgeChange]) -> DynamicGraph:
    g = DynamicGraph(n)
    for c in log:
        g.apply(c)
    return g


# -- edge-list text format ---------------------------------------------

def parse_edge_list(text: str) -> list[tuple[int, int]]:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'u v', got {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return edges


def format_edge_list(edges: Iterable[tuple[int, int]]) -> str:
    return "".join(f"{u} {v}\n" for u, v in edges)


def read_edge_list(path, n: int | None = None) -> DynamicGraph:
    with open(path) as fh:
        edges = parse_edge_list(fh.read())
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return DynamicGraph(n, edges)
