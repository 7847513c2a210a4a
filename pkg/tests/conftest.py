import random

import pytest

from dyntw.generators import partial_ktree
from dyntw.graph import DynamicGraph


def make_graph(n, edges):
    return DynamicGraph(n, edges)


def cycle(n):
    return DynamicGraph(n, [(i, (i + 1) % n) for i in range(n)])


def path(n):
    return DynamicGraph(n, [(i, i + 1) for i in range(n - 1)])


def clique(n):
    return DynamicGraph(n, [(a, b) for a in range(n) for b in range(a + 1, n)])


def petersen():
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return DynamicGraph(10, outer + spokes + inner)


def small_corpus(count, seed=0, max_n=14, max_k=3):
    """(graph, k) pairs of small partial k-trees."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        n = rng.randint(2, max_n)
        k = rng.randint(1, min(max_k, n - 1))
        out.append((partial_ktree(n, k, rng.choice([0.5, 0.8, 1.0]), seed * 100003 + i), k))
    return out


@pytest.fixture
def rng():
    return random.Random(1234)
