"""Graphs, palettes, list-coloring instances and the basic coloring helpers.

Graphs and palettes are stored in CSR form (an offsets array plus one flat
array) so that instances with millions of adjacency entries stay cheap.
A coloring is a plain ``int64`` array where ``UNCOLORED`` marks a vertex
without a color.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import CapExceeded, GreedyFailure, InvalidInstance, ParseError, Unsatisfiable

UNCOLORED = -1


def _csr_from_lists(lists: Sequence[Iterable[int]]):
    sizes = np.fromiter((len(x) for x in lists), dtype=np.int64, count=len(lists))
    ptr = np.zeros(len(lists) + 1, dtype=np.int64)
    np.cumsum(sizes, out=ptr[1:])
    flat = np.fromiter(itertools.chain.from_iterable(lists), dtype=np.int64, count=int(ptr[-1]))
    return ptr, flat


class Graph:
    """Simple undirected graph on vertices ``0..n-1`` with sorted adjacency."""

    __slots__ = ("n", "indptr", "indices", "degree", "max_degree", "_edges")

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray):
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.degree = np.diff(self.indptr)
        self.max_degree = int(self.degree.max()) if self.n else 0
        self._edges = None

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        """Build a graph from an iterable of pairs. Duplicate edges are merged."""
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n < 0:
            raise InvalidInstance("negative vertex count")
        if len(e):
            if e.min() < 0 or e.max() >= n:
                raise InvalidInstance("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise InvalidInstance("self-loop")
            lo = np.minimum(e[:, 0], e[:, 1])
            hi = np.maximum(e[:, 0], e[:, 1])
            key = np.unique(lo * n + hi)
            lo, hi = key // n, key % n
        else:
            lo = hi = np.zeros(0, dtype=np.int64)
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        g = cls(n, indptr, dst)
        g._edges = np.stack([lo, hi], axis=1)
        return g

    @classmethod
    def from_adjacency(cls, adjacency: Sequence[Iterable[int]]) -> "Graph":
        edges = [(u, v) for u, nb in enumerate(adjacency) for v in nb if u < v]
        g = cls.from_edges(len(adjacency), edges)
        for u, nb in enumerate(adjacency):
            if sorted(set(nb)) != g.neighbors(u).tolist():
                raise InvalidInstance(f"adjacency of {u} is not symmetric")
        return g

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edges(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` array with ``u < v`` in each row."""
        if self._edges is None:
            src = np.repeat(np.arange(self.n, dtype=np.int64), self.degree)
            keep = src < self.indices
            self._edges = np.stack([src[keep], self.indices[keep]], axis=1)
        return self._edges

    @property
    def num_edges(self) -> int:
        return int(self.indptr[-1] // 2)

    def induced(self, vertices) -> tuple["Graph", np.ndarray]:
        """Induced subgraph relabelled to ``0..len(vertices)-1``.

        Returns the subgraph and the sorted array of original ids.
        """
        ids = np.unique(np.asarray(vertices, dtype=np.int64))
        local = np.full(self.n, -1, dtype=np.int64)
        local[ids] = np.arange(len(ids))
        e = self.edges()
        if len(e):
            a, b = local[e[:, 0]], local[e[:, 1]]
            keep = (a >= 0) & (b >= 0)
            sub_edges = np.stack([a[keep], b[keep]], axis=1)
        else:
            sub_edges = e
        return Graph.from_edges(len(ids), sub_edges), ids

    def __eq__(self, other) -> bool:
        return (isinstance(other, Graph) and self.n == other.n
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.num_edges}, max_degree={self.max_degree})"


class Palettes:
    """Per-vertex sorted color lists stored as one flat array."""

    __slots__ = ("ptr", "colors", "size")

    def __init__(self, ptr: np.ndarray, colors: np.ndarray, check: bool = True):
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.colors = np.asarray(colors, dtype=np.int64)
        self.size = np.diff(self.ptr)
        if check and len(self.colors):
            if self.colors.min() < 0:
                raise InvalidInstance("colors must be non-negative integers")
            step = np.diff(self.colors)
            inner = np.ones(len(step), dtype=bool)
            starts = self.ptr[1:-1]
            starts = starts[(starts > 0) & (starts < len(self.colors))]
            inner[starts - 1] = False
            if np.any(step[inner] <= 0):
                raise InvalidInstance("palettes must be sorted without duplicates")

    @classmethod
    def from_lists(cls, lists: Sequence[Iterable[int]]) -> "Palettes":
        ptr, flat = _csr_from_lists([sorted(set(x)) for x in lists])
        return cls(ptr, flat)

    @classmethod
    def uniform(cls, n: int, size: int) -> "Palettes":
        """Every vertex gets ``{0, ..., size-1}``."""
        ptr = np.arange(n + 1, dtype=np.int64) * size
        colors = np.tile(np.arange(size, dtype=np.int64), n)
        return cls(ptr, colors, check=False)

    def __len__(self) -> int:
        return len(self.ptr) - 1

    def of(self, v: int) -> np.ndarray:
        return self.colors[self.ptr[v]:self.ptr[v + 1]]

    def contains(self, v: int, c: int) -> bool:
        pal = self.of(v)
        i = np.searchsorted(pal, c)
        return bool(i < len(pal) and pal[i] == c)

    def subset(self, ids: np.ndarray) -> "Palettes":
        """Palettes of the listed vertices, in that order."""
        ids = np.asarray(ids, dtype=np.int64)
        sizes = self.size[ids]
        ptr = np.zeros(len(ids) + 1, dtype=np.int64)
        np.cumsum(sizes, out=ptr[1:])
        if len(ids) == 0:
            return Palettes(ptr, np.zeros(0, dtype=np.int64), check=False)
        starts = np.repeat(self.ptr[ids] - ptr[:-1], sizes)
        flat = self.colors[np.arange(ptr[-1]) + starts]
        return Palettes(ptr, flat, check=False)

    def filter(self, keep: np.ndarray) -> "Palettes":
        """Drop entries where the boolean mask over ``colors`` is False."""
        owner = np.repeat(np.arange(len(self)), self.size)
        ptr = np.zeros(len(self) + 1, dtype=np.int64)
        np.cumsum(np.bincount(owner[keep], minlength=len(self)), out=ptr[1:])
        return Palettes(ptr, self.colors[keep], check=False)

    def owners(self) -> np.ndarray:
        return np.repeat(np.arange(len(self), dtype=np.int64), self.size)

    def universe(self) -> np.ndarray:
        return np.unique(self.colors)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Palettes) and np.array_equal(self.ptr, other.ptr)
                and np.array_equal(self.colors, other.colors))


@dataclass
class ListColoringInstance:
    graph: Graph
    palettes: Palettes
    palette_floor: int = 0

    def __post_init__(self):
        if len(self.palettes) != self.graph.n:
            raise InvalidInstance("one palette per vertex is required")
        need = np.maximum(self.graph.degree, self.palette_floor) + 1
        short = np.nonzero(self.palettes.size < need)[0]
        if len(short):
            v = int(short[0])
            raise InvalidInstance(
                f"vertex {v} has {int(self.palettes.size[v])} colors, needs {int(need[v])}")

    @property
    def n(self) -> int:
        return self.graph.n

    @classmethod
    def with_uniform_palettes(cls, graph: Graph, size: Optional[int] = None) -> "ListColoringInstance":
        """Palettes ``{0..size-1}`` for all vertices, defaulting to ``{0..Δ}``."""
        size = graph.max_degree + 1 if size is None else size
        return cls(graph, Palettes.uniform(graph.n, size))

    def restrict(self, vertices) -> tuple["ListColoringInstance", np.ndarray]:
        """Induced sub-instance with the same palettes and floor 0."""
        sub, ids = self.graph.induced(vertices)
        return ListColoringInstance(sub, self.palettes.subset(ids)), ids


@dataclass
class ValidityReport:
    edge_violations: list = field(default_factory=list)
    palette_violations: list = field(default_factory=list)
    uncolored: int = 0

    @property
    def ok(self) -> bool:
        return not self.edge_violations and not self.palette_violations

    @property
    def total(self) -> bool:
        return self.ok and self.uncolored == 0

    def to_dict(self) -> dict:
        return {
            "edgeViolations": [list(map(int, e)) for e in self.edge_violations],
            "paletteViolations": [list(map(int, e)) for e in self.palette_violations],
            "uncolored": int(self.uncolored),
            "ok": self.ok,
        }


def empty_coloring(n: int) -> np.ndarray:
    return np.full(n, UNCOLORED, dtype=np.int64)


def palette_membership(palettes: Palettes, vertices: np.ndarray, colors: np.ndarray) -> np.ndarray:
    """Vectorised test ``colors[i] in palette(vertices[i])``."""
    vertices = np.asarray(vertices, dtype=np.int64)
    colors = np.asarray(colors, dtype=np.int64)
    if len(vertices) == 0:
        return np.zeros(0, dtype=bool)
    shift = int(max(palettes.colors.max(initial=0), colors.max(initial=0))) + 1
    keys = palettes.owners() * shift + palettes.colors
    probe = vertices * shift + colors
    pos = np.searchsorted(keys, probe)
    pos = np.minimum(pos, len(keys) - 1)
    return (len(keys) > 0) & (keys[pos] == probe) & (colors >= 0)


def validate_coloring(instance: ListColoringInstance, coloring) -> ValidityReport:
    """Check that a partial coloring is proper and respects the palettes."""
    col = np.asarray(coloring, dtype=np.int64)
    if col.shape != (instance.n,):
        raise InvalidInstance("coloring length does not match the instance")
    rep = ValidityReport(uncolored=int(np.sum(col == UNCOLORED)))
    e = instance.graph.edges()
    if len(e):
        a, b = col[e[:, 0]], col[e[:, 1]]
        bad = (a != UNCOLORED) & (a == b)
        rep.edge_violations = [tuple(x) for x in e[bad].tolist()]
    colored = np.nonzero(col != UNCOLORED)[0]
    member = palette_membership(instance.palettes, colored, col[colored])
    rep.palette_violations = [(int(v), int(col[v])) for v in colored[~member]]
    return rep


def greedy_fill(graph: Graph, palettes: Palettes, colors: np.ndarray, order: Iterable[int],
                strict: bool = True) -> list:
    """Color the vertices in ``order`` in place with the smallest free palette color.

    Colors already present in ``colors`` are treated as fixed. A vertex with
    no free color raises ``GreedyFailure`` when ``strict``; otherwise it is
    left uncolored and returned in the failure list.
    """
    indptr, indices = graph.indptr, graph.indices
    pptr, pcol = palettes.ptr, palettes.colors
    failed = []
    for v in order:
        v = int(v)
        used = colors[indices[indptr[v]:indptr[v + 1]]]
        used = set(used[used != UNCOLORED].tolist())
        start, stop = pptr[v], pptr[v + 1]
        chosen = UNCOLORED
        # deg+1 candidates always contain a free color, so scan in short chunks
        chunk = len(used) + 1
        while start < stop:
            for c in pcol[start:min(stop, start + chunk)].tolist():
                if c not in used:
                    chosen = c
                    break
            if chosen != UNCOLORED:
                break
            start += chunk
        if chosen == UNCOLORED:
            if strict:
                raise GreedyFailure(v)
            failed.append(v)
        else:
            colors[v] = chosen
    return failed


def greedy_list_color(instance: ListColoringInstance, order: Optional[Iterable[int]] = None) -> np.ndarray:
    """Total greedy coloring in the given order (ascending ids by default)."""
    colors = empty_coloring(instance.n)
    order = range(instance.n) if order is None else order
    greedy_fill(instance.graph, instance.palettes, colors, order)
    return colors


def brute_force_color(instance: ListColoringInstance, cap: int = 10 ** 6) -> np.ndarray:
    """Exhaustive backtracking search for a proper list coloring.

    Raises ``CapExceeded`` when the product of palette sizes exceeds ``cap`` and
    ``Unsatisfiable`` when no proper coloring exists.
    """
    space = 1
    for s in instance.palettes.size.tolist():
        space *= s
        if space > cap:
            raise CapExceeded(f"search space exceeds {cap}")
    n = instance.n
    g = instance.graph
    colors = empty_coloring(n)
    lower = [[u for u in g.neighbors(v).tolist() if u < v] for v in range(n)]
    pals = [instance.palettes.of(v).tolist() for v in range(n)]

    def search(v: int) -> bool:
        if v == n:
            return True
        for c in pals[v]:
            if all(colors[u] != c for u in lower[v]):
                colors[v] = c
                if search(v + 1):
                    return True
        colors[v] = UNCOLORED
        return False

    if not search(0):
        raise Unsatisfiable("no proper list coloring exists")
    return colors


# ---------------------------------------------------------------- generators

def gnp(n: int, p: float, seed: int) -> Graph:
    """Erdős–Rényi graph: every pair independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidInstance("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = n * (n - 1) // 2
    if pairs == 0:
        return Graph.from_edges(n, [])
    m = int(rng.binomial(pairs, p))
    if m > pairs // 3:
        chosen = np.nonzero(rng.random(pairs) < p)[0]
    else:
        # uniform m-subset: keep the first m distinct draws
        chosen = np.zeros(0, dtype=np.int64)
        while len(chosen) < m:
            draw = rng.integers(0, pairs, size=int((m - len(chosen)) * 1.05) + 16)
            allv = np.concatenate([chosen, draw])
            _, first = np.unique(allv, return_index=True)
            chosen = allv[np.sort(first)]
        chosen = chosen[:m]
    rows = np.arange(n, dtype=np.int64)
    rowstart = rows * n - rows * (rows + 1) // 2
    i = np.searchsorted(rowstart, chosen, side="right") - 1
    j = chosen - rowstart[i] + i + 1
    return Graph.from_edges(n, np.stack([i, j], axis=1))


def random_regular(n: int, d: int, seed: int) -> Graph:
    """Uniform-ish random d-regular graph (pairing model with restarts)."""
    import networkx as nx

    if d < 0 or (n > 0 and d >= n) or (n * d) % 2:
        raise InvalidInstance(f"no {d}-regular graph on {n} vertices")
    if n == 0:
        return Graph.from_edges(0, [])
    h = nx.random_regular_graph(d, n, seed=int(seed) % (2 ** 32))
    return Graph.from_edges(n, list(h.edges()))


def read_edge_list(path) -> Graph:
    """Parse ``u v`` lines with ``#`` comments. ``n`` is one more than the largest id."""
    edges = []
    top = -1
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected two vertex ids")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if u < 0 or v < 0:
            raise ParseError(f"{path}:{lineno}: negative vertex id")
        if u == v:
            raise ParseError(f"{path}:{lineno}: self-loop")
        edges.append((u, v))
        top = max(top, u, v)
    return Graph.from_edges(top + 1, edges)


def write_edge_list(graph: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# n={graph.n} m={graph.num_edges}\n")
        for u, v in graph.edges().tolist():
            fh.write(f"{u} {v}\n")


_PALETTE_LINE = re.compile(r"^\s*(\d+)\s*:(.*)$")


def read_palette_file(path, graph: Graph) -> Palettes:
    """Parse ``v: c1 c2 ...`` lines. Missing vertices get ``{0..Δ}``."""
    lists: list = [None] * graph.n
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _PALETTE_LINE.match(line)
        if not m:
            raise ParseError(f"{path}:{lineno}: expected 'v: c1 c2 ...'")
        v = int(m.group(1))
        if v >= graph.n:
            raise ParseError(f"{path}:{lineno}: vertex {v} not in graph")
        try:
            lists[v] = [int(c) for c in m.group(2).split()]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
    default = list(range(graph.max_degree + 1))
    return Palettes.from_lists([default if x is None else x for x in lists])


def generate_graph(model: str, seed: int = 0, **params) -> Graph:
    """Dispatch on ``model`` in ``{"gnp", "random_regular", "edge_list"}``."""
    if model == "gnp":
        return gnp(int(params["n"]), float(params["p"]), seed)
    if model in ("random_regular", "regular"):
        return random_regular(int(params["n"]), int(params["d"]), seed)
    if model in ("edge_list", "from_edge_list"):
        return read_edge_list(params["path"])
    raise InvalidInstance(f"unknown graph model {model!r}")


def gnp_for_max_degree(n: int, delta: int) -> float:
    """Edge probability whose expected maximum degree is close to ``delta``."""
    if n < 2:
        return 0.0
    # mean + ~2.5 standard deviations roughly matches the maximum of n binomials
    lo, hi = 0.0, 1.0
    for _ in range(60):
        p = (lo + hi) / 2
        mean = (n - 1) * p
        if mean + 2.5 * math.sqrt(max(mean * (1 - p), 1e-12)) < delta:
            lo = p
        else:
            hi = p
    return lo
