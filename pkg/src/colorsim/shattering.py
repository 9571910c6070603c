"""Statistics of the leftover (bad) set and its component-wise cleanup."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .graph import UNCOLORED, Graph, ListColoringInstance, greedy_fill


@dataclass
class BadSetReport:
    component_sizes: list
    max_component: int
    edges_within: int
    component_bound: float
    edge_bound: float

    @property
    def size(self) -> int:
        return int(sum(self.component_sizes))

    @property
    def components_ok(self) -> bool:
        return self.max_component <= self.component_bound

    @property
    def edges_ok(self) -> bool:
        return self.edges_within <= self.edge_bound

    @property
    def passed(self) -> bool:
        return self.components_ok and self.edges_ok

    def to_dict(self) -> dict:
        return {"size": self.size, "components": len(self.component_sizes),
                "maxComponent": self.max_component, "edgesWithin": self.edges_within,
                "componentBound": self.component_bound, "edgeBound": self.edge_bound,
                "pass": self.passed}


def component_bound(delta: int, n: int, c: float = 1.0, c_prime: float = 2.0) -> float:
    """(c'/c) Δ^(2c) log_Δ n."""
    d = max(delta, 2)
    return (c_prime / c) * d ** (2 * c) * math.log(max(n, 2)) / math.log(d)


def bad_components(graph: Graph, bad: np.ndarray) -> list:
    """Connected components of the induced subgraph, each a sorted id array."""
    ids = np.nonzero(np.asarray(bad, dtype=bool))[0] if np.asarray(bad).dtype == bool \
        else np.unique(np.asarray(bad, dtype=np.int64))
    if len(ids) == 0:
        return []
    sub, ids = graph.induced(ids)
    e = sub.edges()
    mat = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(sub.n, sub.n))
    count, labels = connected_components(mat, directed=False)
    order = np.argsort(labels, kind="stable")
    splits = np.cumsum(np.bincount(labels, minlength=count))[:-1]
    return [ids[part] for part in np.split(order, splits)]


def analyze_bad_set(graph: Graph, bad, c: float = 1.0, c_prime: float = 2.0,
                    c_edge: float = 1.0) -> BadSetReport:
    mask = np.zeros(graph.n, dtype=bool)
    b = np.asarray(bad)
    if b.dtype == bool:
        mask[:] = b
    else:
        mask[b.astype(np.int64)] = True
    comps = bad_components(graph, mask)
    sizes = sorted((len(x) for x in comps), reverse=True)
    e = graph.edges()
    within = int(np.sum(mask[e[:, 0]] & mask[e[:, 1]])) if len(e) else 0
    return BadSetReport(sizes, sizes[0] if sizes else 0, within,
                        component_bound(graph.max_degree, graph.n, c, c_prime), c_edge * graph.n)


def residual_margin(instance: ListColoringInstance, colors: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Free palette colors minus (uncolored-neighbor count + 1) for each listed vertex."""
    g = instance.graph
    out = np.zeros(len(vertices), dtype=np.int64)
    for r, v in enumerate(np.asarray(vertices).tolist()):
        nb = g.neighbors(v)
        taken = colors[nb]
        used = np.unique(taken[taken != UNCOLORED])
        free = len(instance.palettes.of(v)) - int(np.isin(used, instance.palettes.of(v)).sum())
        out[r] = free - (int(np.sum(taken == UNCOLORED)) + 1)
    return out


def color_components(instance: ListColoringInstance, colors: np.ndarray, bad=None,
                     check: bool = True) -> np.ndarray:
    """Greedily complete the coloring on the uncolored vertices in ascending id.

    Components of the uncolored set are independent, so one ascending pass
    colors each component in ascending id order. Raises ``GreedyFailure`` if
    a vertex runs out of colors.
    """
    out = np.array(colors, dtype=np.int64, copy=True)
    if bad is None:
        todo = np.nonzero(out == UNCOLORED)[0]
    else:
        b = np.asarray(bad)
        todo = np.nonzero(b)[0] if b.dtype == bool else np.unique(b.astype(np.int64))
    if check and len(todo):
        margin = residual_margin(instance, out, todo)
        assert np.all(margin >= 0), "bad vertex with too few surviving colors"
    greedy_fill(instance.graph, instance.palettes, out, todo.tolist())
    return out
