"""Property plug-ins for the triangle DP.

A plug-in labels vertices.  Every label decodes to a *base* value, which is
what edges constrain and what costs are charged on, and a *flag* used by
domination: a dominating-set vertex labelled ``DOM`` must have a selected
neighbour inside the scope that owns the label.
"""
from __future__ import annotations

from typing import Iterable

from .graph import DynamicGraph


class PropertyPlugin:
    name = ""
    optimization = False
    labels: tuple[int, ...] = ()
    bases: tuple[int, ...] = ()
    has_flags = False

    def decode(self, label: int) -> tuple[int, bool]:
        return label, False

    def edge_ok(self, a: int, b: int) -> bool:
        return True

    def selects(self, base: int) -> bool:
        """Base value that puts a vertex into the solution set."""
        return False

    def cost(self, base: int) -> int:
        return 1 if self.selects(base) else 0

    def inner_ok(self, base: int, flag: bool) -> bool:
        return True

    def out_label(self, base: int, flag: bool) -> int:
        return base

    # label -> weaker label it also satisfies; tables are closed under it
    relax: dict[int, int] = {}

    def detached_ok(self, label: int) -> bool:
        """May a scope interface vertex without inner neighbours carry ``label``?"""
        return True

    def check(self, g: DynamicGraph, solution) -> bool:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__}>"


class ThreeColouring(PropertyPlugin):
    name = "threecol"
    labels = bases = (1, 2, 3)

    def edge_ok(self, a, b):
        return a != b

    def check(self, g, colouring) -> bool:
        return all(colouring[u] in self.labels and colouring[u] != colouring[v] for u, v in g.edge_list())


class VertexCover(PropertyPlugin):
    name = "vertexcover"
    optimization = True
    OUT, IN = 0, 1
    labels = bases = (0, 1)

    def edge_ok(self, a, b):
        return a == 1 or b == 1

    def selects(self, base):
        return base == 1

    def check(self, g, cover: Iterable[int]) -> bool:
        cover = set(cover)
        return all(u in cover or v in cover for u, v in g.edge_list())


class DominatingSet(PropertyPlugin):
    """Domination over the active domain: isolated vertices need no dominator."""

    name = "domset"
    optimization = True
    has_flags = True
    UNDOMINATED, DOMINATED, IN_SET = 0, 1, 2
    labels = (0, 1, 2)
    bases = (0, 1)

    def decode(self, label):
        return (1 if label == 2 else 0), label == 1

    def selects(self, base):
        return base == 1

    def inner_ok(self, base, flag):
        return base == 1 or flag

    def out_label(self, base, flag):
        if base == 1:
            return 2
        return 1 if flag else 0

    relax = {1: 0}

    def detached_ok(self, label):
        return label != 1

    def check(self, g, dom: Iterable[int]) -> bool:
        dom = set(dom)
        return all(v in dom or g.neighbors(v) & dom for v in g.active_domain())


PLUGINS = {p.name: p for p in (ThreeColouring(), VertexCover(), DominatingSet())}


def get_plugin(name: str) -> PropertyPlugin:
    try:
        return PLUGINS[name]
    except KeyError:
        raise ValueError(f"unknown property {name!r}; expected one of {sorted(PLUGINS)}") from None
