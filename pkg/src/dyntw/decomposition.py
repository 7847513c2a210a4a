"""Tree decompositions: construction, validation, balancing and nice form.

Pipeline: ``decompose`` (min-fill elimination) -> ``balance`` (recursive
centroid splitting, logarithmic depth, degree <= 2) -> ``nicefy`` (leaf
pruning, chain contraction, leaf-witness distinctness).
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .graph import DynamicGraph


class DecompositionError(Exception):
    pass


class WidthExceeded(DecompositionError):
    def __init__(self, found_width: int, budget: int):
        super().__init__(f"heuristic width {found_width} exceeds budget {budget}")
        self.found_width = found_width
        self.budget = budget


class DegenerateInput(DecompositionError):
    pass


def log2n(n: int) -> int:
    """``ceil(log2(max(n, 2)))``."""
    return max(1, math.ceil(math.log2(max(n, 2))))


@dataclass
class TreeDecomposition:
    root: int
    parent: dict[int, int]  # root maps to itself
    bags: dict[int, frozenset[int]]
    n: int = 0  # size of the vertex universe the decomposition belongs to

    @property
    def nodes(self) -> list[int]:
        return sorted(self.bags)

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags.values()), default=0) - 1

    def children_map(self) -> dict[int, list[int]]:
        ch: dict[int, list[int]] = {i: [] for i in self.bags}
        for i, p in self.parent.items():
            if i != p:
                ch[p].append(i)
        for lst in ch.values():
            lst.sort()
        return ch

    def depth(self) -> int:
        ch = self.children_map()
        best = 0
        stack = [(self.root, 0)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            stack.extend((c, d + 1) for c in ch[i])
        return best

    def max_degree(self) -> int:
        return max((len(c) for c in self.children_map().values()), default=0)

    def depth_factor(self) -> float:
        return self.depth() / log2n(self.n)

    def dump(self) -> str:
        lines = []
        for i in self.nodes:
            bag = ",".join(str(v) for v in sorted(self.bags[i]))
            lines.append(f"{i} {self.parent[i]} bag:{bag}")
        return "\n".join(lines) + "\n"

    def copy(self) -> "TreeDecomposition":
        return TreeDecomposition(self.root, dict(self.parent), dict(self.bags), self.n)


def parse_dump(text: str, n: int = 0) -> TreeDecomposition:
    parent, bags, root = {}, {}, None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        i, p, bag = line.split()
        i, p = int(i), int(p)
        body = bag.split(":", 1)[1]
        bags[i] = frozenset(int(v) for v in body.split(",") if v)
        parent[i] = p
        if i == p:
            root = i
    if root is None:
        raise DecompositionError("dump has no root line")
    return TreeDecomposition(root, parent, bags, n)


# -- validation ---------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    prop: str  # "tree", "coverage", "edge" or "connectivity"
    witness: object
    detail: str = ""


def verify_td(g: DynamicGraph, td: TreeDecomposition) -> list[Violation]:
    report: list[Violation] = []
    # the parent map must describe a single tree rooted at td.root
    if td.parent.get(td.root) != td.root:
        report.append(Violation("tree", td.root, "root does not map to itself"))
    for i in td.bags:
        seen = set()
        j = i
        while j != td.root:
            if j in seen or j not in td.parent or td.parent[j] not in td.bags:
                report.append(Violation("tree", i, "node does not reach the root"))
                break
            seen.add(j)
            j = td.parent[j]
    if report:
        return report

    occ: dict[int, list[int]] = defaultdict(list)
    for i, bag in td.bags.items():
        for v in bag:
            occ[v].append(i)
    for v in sorted(g.active_domain()):
        if not occ.get(v):
            report.append(Violation("coverage", v, "vertex in no bag"))
    for u, v in g.edge_list():
        if not any(u in td.bags[i] for i in occ.get(v, ())):
            report.append(Violation("edge", (u, v), "no bag holds both endpoints"))
    for v in sorted(occ):
        nodes = set(occ[v])
        # connected iff exactly one node has its parent outside the set
        tops = [i for i in nodes if i == td.root or td.parent[i] not in nodes]
        if len(tops) != 1:
            report.append(Violation("connectivity", v, f"{len(tops)} components"))
    return report


# -- min-fill decomposition ---------------------------------------------

def min_fill_order(adj: dict[int, set[int]]) -> list[int]:
    """Greedy min-fill elimination order; ties go to smaller degree, then to
    the smaller vertex."""
    adj = {v: set(nb) for v, nb in adj.items()}

    def fill(v):
        nb = sorted(adj[v])
        missing = 0
        for a in range(len(nb)):
            na = adj[nb[a]]
            for b in range(a + 1, len(nb)):
                if nb[b] not in na:
                    missing += 1
        return missing

    score = {v: fill(v) for v in adj}
    order = []
    while score:
        v = min(score, key=lambda x: (score[x], len(adj[x]), x))
        order.append(v)
        nb = adj.pop(v)
        del score[v]
        touched = set(nb)
        for a in nb:
            adj[a].discard(v)
            for b in nb:
                if a != b and b not in adj[a]:
                    adj[a].add(b)
        for a in nb:
            touched |= adj[a]
        for t in touched:
            if t in score:
                score[t] = fill(t)
    return order


def decompose(g: DynamicGraph, width_budget: int, isolated: bool = True) -> TreeDecomposition:
    """Tree decomposition from a min-fill elimination order.

    With ``isolated`` every universe vertex without edges gets a singleton leaf
    bag under the root; otherwise only the active domain is covered.
    """
    adj = {v: set(g.neighbors(v)) for v in g.active_domain()}
    order = min_fill_order(adj)
    pos = {v: k for k, v in enumerate(order)}
    work = {v: set(nb) for v, nb in adj.items()}
    bags: dict[int, frozenset[int]] = {}
    parent: dict[int, int] = {}
    for v in order:
        nb = work[v]
        bags[v] = frozenset(nb | {v})
        for a in nb:
            work[a].discard(v)
            work[a] |= nb - {a}
        if nb:
            parent[v] = min(nb, key=pos.__getitem__)
    # node ids are the eliminated vertices; forest roots have no parent yet
    roots = [v for v in order if v not in parent]
    if not bags:
        bags[0] = frozenset()
        root = 0
    else:
        root = roots[-1]
        for r in roots[:-1]:
            parent[r] = root
    parent[root] = root
    td = TreeDecomposition(root, parent, bags, g.n)
    td = _contract_subset_edges(td)
    if isolated:
        nxt = max(td.bags) + 1
        for v in range(g.n):
            if v not in adj:
                td.bags[nxt] = frozenset({v})
                td.parent[nxt] = td.root
                nxt += 1
    if td.width > width_budget:
        raise WidthExceeded(td.width, width_budget)
    return td


def _contract_subset_edges(td: TreeDecomposition) -> TreeDecomposition:
    """Merge every node into a neighbour whose bag contains it."""
    parent = dict(td.parent)
    bags = dict(td.bags)
    root = td.root
    children = defaultdict(set)
    for i, p in parent.items():
        if i != p:
            children[p].add(i)
    changed = True
    while changed:
        changed = False
        for i in sorted(bags):
            if i not in bags:
                continue
            p = parent[i]
            if i != p and bags[i] <= bags[p]:
                # absorb i into its parent
                for c in children.pop(i, ()):
                    parent[c] = p
                    children[p].add(c)
                children[p].discard(i)
                del bags[i], parent[i]
                changed = True
            elif i != p and bags[p] <= bags[i]:
                # i takes over its parent's place
                bags[p] = bags[i]
                for c in children.pop(i, ()):
                    parent[c] = p
                    children[p].add(c)
                children[p].discard(i)
                del bags[i], parent[i]
                changed = True
    return TreeDecomposition(root, parent, bags, td.n)


# -- balancing ----------------------------------------------------------

def balance(td: TreeDecomposition) -> TreeDecomposition:
    """Rebuild ``td`` with logarithmic depth and at most two children per node.

    Recursive centroid splitting: a connected piece ``K`` of the old tree with
    boundary vertex set ``W`` becomes a new node with bag ``B(x) | W`` for a
    chosen ``x`` in ``K``; the pieces of ``K - x`` are built below it.  The
    split node is the most balanced one among those that keep the new bag
    within ``3(w+1)`` and every child boundary within ``2(w+1)``.
    """
    if len(td.bags) <= 1:
        return td.copy()
    adj: dict[int, list[int]] = {i: [] for i in td.bags}
    for i, p in td.parent.items():
        if i != p:
            adj[i].append(p)
            adj[p].append(i)
    for lst in adj.values():
        lst.sort()
    bags = td.bags
    w1 = max(len(b) for b in bags.values())

    new_bags: dict[int, frozenset[int]] = {}
    new_children: dict[int, list[int]] = {}
    counter = [0]

    def fresh(bag):
        k = counter[0]
        counter[0] += 1
        new_bags[k] = bag
        new_children[k] = []
        return k

    def build(K: set[int], start: int, W: frozenset[int]) -> int:
        if len(K) == 1:
            return fresh(bags[start] | W)
        # root K at start; compute subtree sizes and W-occurrence counts
        order, par = [start], {start: None}
        for x in order:
            for y in adj[x]:
                if y in K and y not in par:
                    par[y] = x
                    order.append(y)
        size = {}
        cnt: dict[int, dict[int, int]] = {}
        for x in reversed(order):
            s = 1
            c = {v: 1 for v in W if v in bags[x]}
            for y in adj[x]:
                if par.get(y) == x:
                    s += size[y]
                    for v, k in cnt[y].items():
                        c[v] = c.get(v, 0) + k
            size[x] = s
            cnt[x] = c
        total = cnt[start]
        best = None
        for x in order:
            comps = []
            for y in adj[x]:
                if y not in K:
                    continue
                if par.get(y) == x:
                    wv = set(cnt[y])
                    csize = size[y]
                else:
                    wv = {v for v in total if cnt[x].get(v, 0) < total[v]}
                    csize = len(K) - size[x]
                comps.append((csize, len(wv | (bags[x] & bags[y]))))
            bag_size = len(bags[x] | W)
            max_w = max((c[1] for c in comps), default=0)
            max_size = max((c[0] for c in comps), default=0)
            excess = max(0, bag_size - 3 * w1) + max(0, max_w - 2 * w1)
            key = (excess, max_size, bag_size, x)
            if best is None or key < best[0]:
                best = (key, x)
        x = best[1]
        node = fresh(bags[x] | W)
        # components of K - x
        seen = {x}
        for y in adj[x]:
            if y not in K or y in seen:
                continue
            comp = {y}
            stack = [y]
            seen.add(y)
            while stack:
                a = stack.pop()
                for b in adj[a]:
                    if b in K and b not in seen:
                        seen.add(b)
                        comp.add(b)
                        stack.append(b)
            comp_vertices = set().union(*(bags[a] for a in comp))
            child_w = frozenset((W & comp_vertices) | (bags[x] & bags[y]))
            new_children[node].append(build(comp, y, child_w))
        return node

    root = build(set(bags), td.root, frozenset())
    _binarize(new_bags, new_children, fresh)
    parent = {root: root}
    for p, kids in new_children.items():
        for c in kids:
            parent[c] = p
    return TreeDecomposition(root, parent, dict(new_bags), td.n)


def _binarize(bags, children, fresh) -> None:
    """Split nodes with more than two children into balanced copy trees."""
    for node in list(children):
        kids = children[node]
        if len(kids) <= 2:
            continue

        def group(ks):
            if len(ks) == 1:
                return ks[0]
            copy = fresh(bags[node])
            half = (len(ks) + 1) // 2
            children[copy] = [group(ks[:half]), group(ks[half:])]
            return copy

        half = (len(kids) + 1) // 2
        children[node] = [group(kids[:half]), group(kids[half:])]


# -- nice form ----------------------------------------------------------

@dataclass
class NiceTreeDecomposition:
    """Rooted binary decomposition with distinct bags.

    Node ids are preorder positions (root is 0, left subtrees first), so the
    subtree of ``i`` is the id range ``[i, i + size[i])`` and the topmost node
    holding a vertex is the smallest id holding it.
    """

    bags: list[frozenset[int]]
    parent: list[int]
    children: list[tuple[int, ...]]
    n: int
    depth_of: list[int] = field(default_factory=list)
    size: list[int] = field(default_factory=list)
    up: list[list[int]] = field(default_factory=list)
    height_of: list[int] = field(default_factory=list)
    nodes_of: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        N = len(self.bags)
        self.depth_of = [0] * N
        for i in range(1, N):
            self.depth_of[i] = self.depth_of[self.parent[i]] + 1
        self.size = [1] * N
        self.height_of = [0] * N
        for i in range(N - 1, 0, -1):
            p = self.parent[i]
            self.size[p] += self.size[i]
            self.height_of[p] = max(self.height_of[p], self.height_of[i] + 1)
        levels = max(1, (max(self.depth_of, default=0)).bit_length())
        self.up = [list(self.parent)]
        for _ in range(1, levels):
            prev = self.up[-1]
            self.up.append([prev[prev[i]] for i in range(N)])
        self.nodes_of = defaultdict(list)
        for i, bag in enumerate(self.bags):
            for v in bag:
                self.nodes_of[v].append(i)
        self.nodes_of = dict(self.nodes_of)

    root = 0

    @property
    def nodes(self) -> range:
        return range(len(self.bags))

    @property
    def depth(self) -> int:
        return max(self.depth_of, default=0)

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1

    @property
    def max_bag(self) -> int:
        """Largest bag size; the DP layer's interface bound."""
        return max((len(b) for b in self.bags), default=0)

    @property
    def d_factor(self) -> float:
        return self.depth / log2n(self.n)

    def is_ancestor(self, a: int, b: int) -> bool:
        """``a`` is ``b`` or lies above it."""
        return a <= b < a + self.size[a]

    def top_node(self, v: int) -> int | None:
        occ = self.nodes_of.get(v)
        return occ[0] if occ else None

    def lca(self, i: int, j: int) -> int:
        if self.depth_of[i] < self.depth_of[j]:
            i, j = j, i
        diff = self.depth_of[i] - self.depth_of[j]
        k = 0
        while diff:
            if diff & 1:
                i = self.up[k][i]
            diff >>= 1
            k += 1
        if i == j:
            return i
        for k in range(len(self.up) - 1, -1, -1):
            if self.up[k][i] != self.up[k][j]:
                i = self.up[k][i]
                j = self.up[k][j]
        return self.parent[i]

    def to_td(self) -> TreeDecomposition:
        return TreeDecomposition(
            0, {i: self.parent[i] for i in self.nodes}, dict(enumerate(self.bags)), self.n
        )

    def dump(self) -> str:
        return self.to_td().dump()


def lca(ntd: NiceTreeDecomposition, i: int, j: int) -> int:
    return ntd.lca(i, j)


def _prune_leaves(bags, children, parent, root):
    """Drop subtrees whose bags all fit into the parent bag (bottom-up)."""

    def visit(i):
        # True iff every bag below i is a subset of B(i)
        ok = True
        for c in list(children[i]):
            if visit(c) and bags[c] <= bags[i]:
                _drop_subtree(c, bags, children, parent)
                children[i].remove(c)
            else:
                ok = False
        return ok

    visit(root)


def _drop_subtree(i, bags, children, parent):
    stack = [i]
    while stack:
        a = stack.pop()
        stack.extend(children.pop(a, []))
        bags.pop(a, None)
        parent.pop(a, None)


def _contract_chains(bags, children, parent, root):
    """Remove degree-1 inner nodes whose bag fits into the parent or child."""
    changed = True
    while changed:
        changed = False
        for i in sorted(bags):
            if i == root or i not in bags or len(children[i]) != 1:
                continue
            (c,) = children[i]
            p = parent[i]
            if bags[i] <= bags[p] or bags[i] <= bags[c]:
                idx = children[p].index(i)
                children[p][idx] = c
                parent[c] = p
                del bags[i], parent[i], children[i]
                changed = True
    # a single-child root whose bag fits into the child is redundant
    while len(children[root]) == 1 and bags[root] <= bags[children[root][0]]:
        (c,) = children[root]
        del bags[root], parent[root], children[root]
        root = c
        parent[root] = root
    return root


def nicefy(td: TreeDecomposition) -> NiceTreeDecomposition:
    """Nice form of a degree-<=2 decomposition; bags grow by at most two."""
    if td.max_degree() > 2:
        raise DegenerateInput("node with more than two children; run balance first")
    bags = dict(td.bags)
    parent = dict(td.parent)
    children = {i: list(c) for i, c in td.children_map().items()}
    root = td.root
    _prune_leaves(bags, children, parent, root)
    root = _contract_chains(bags, children, parent, root)

    # unique witness vertex of every leaf
    witness = {}
    for i in bags:
        if not children[i] and i != root:
            own = bags[i] - bags[parent[i]]
            witness[i] = min(own)
    extended = dict(bags)

    ext = {}
    order = [root]
    for i in order:
        order.extend(children[i])
    for i in reversed(order):
        if not children[i]:
            ext[i] = (i, i)
        else:
            ext[i] = (ext[children[i][0]][0], ext[children[i][-1]][1])
    for i in order:
        if children[i]:
            add = {witness[leaf] for leaf in ext[i] if leaf in witness}
            extended[i] = bags[i] | add

    # renumber in preorder, left child first
    ids = {}
    pre = []
    stack = [root]
    while stack:
        i = stack.pop()
        ids[i] = len(pre)
        pre.append(i)
        stack.extend(reversed(children[i]))
    new_bags = [extended[i] for i in pre]
    new_parent = [ids[parent[i]] if i != root else 0 for i in pre]
    new_children = [tuple(ids[c] for c in children[i]) for i in pre]
    return NiceTreeDecomposition(new_bags, new_parent, new_children, td.n)


def nice_decomposition(g: DynamicGraph, width_budget: int, isolated: bool = True) -> NiceTreeDecomposition:
    """decompose -> balance -> nicefy."""
    return nicefy(balance(decompose(g, width_budget, isolated=isolated)))


def check_nice(ntd: NiceTreeDecomposition) -> list[str]:
    """Structural niceness problems (degree, distinctness, ids); empty if fine."""
    problems = []
    if len(set(ntd.bags)) != len(ntd.bags):
        problems.append("duplicate bags")
    for i, ch in enumerate(ntd.children):
        if len(ch) > 2:
            problems.append(f"node {i} has {len(ch)} children")
        for c in ch:
            if ntd.parent[c] != i:
                problems.append(f"parent mismatch at {c}")
    return problems
