"""Hypothesis strategies for small graphs and list instances."""
import numpy as np
from hypothesis import strategies as st

from colorsim.graph import Graph, ListColoringInstance, Palettes


@st.composite
def graphs(draw, max_n=12, min_n=0):
    n = draw(st.integers(min_n, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    return Graph.from_edges(n, chosen)


@st.composite
def list_instances(draw, max_n=12, extra=3, universe=20):
    """Instances whose palettes are random (deg+1+extra')-subsets of a small universe."""
    g = draw(graphs(max_n=max_n))
    lists = []
    for v in range(g.n):
        size = int(g.degree[v]) + 1 + draw(st.integers(0, extra))
        pool = max(universe, size)
        lists.append(sorted(draw(st.lists(st.integers(0, pool - 1), min_size=size, max_size=size,
                                          unique=True))))
    return ListColoringInstance(g, Palettes.from_lists(lists))
