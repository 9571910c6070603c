"""Local computation of the sparsified coloring, one vertex at a time.

All instance access goes through ``LcaOracle``'s counted probes. A query for
v rebuilds just enough of the global run to decide v's color: the local
good-vertex test, the random color sets of v's neighborhood, N*(v), and the
bidding outcomes of the vertices v actually reads. If v ends up uncolored
the engine explores its component of uncolored vertices and colors it
greedily in ascending id, which is what the global cleanup does.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tape
from .bidding import (ACTIVE, BAD, COLORED, PSTAR_FLOOR, colorset, default_p_star,
                      derive_bidding_params, is_good_vertex, lowest, scan_sample)
from .errors import InvalidInstance, QueryBudgetExceeded
from .graph import UNCOLORED, ListColoringInstance

PROBES = ("degree", "neighbor", "palette", "randomness")


class LcaOracle:
    """Counted probe access to an instance and its per-vertex random tapes."""

    def __init__(self, instance: ListColoringInstance, master_seed: int):
        self._instance = instance
        self.master_seed = int(master_seed)
        self.n = instance.n
        self.max_degree = instance.graph.max_degree
        self.counters = dict.fromkeys(PROBES, 0)
        self.used = 0
        g = instance.graph
        self._deg = g.degree.tolist()
        self._adj = [g.indices[g.indptr[v]:g.indptr[v + 1]].tolist() for v in range(self.n)]
        colors = instance.palettes.colors.view()
        colors.flags.writeable = False
        ptr = instance.palettes.ptr.tolist()
        self._pals = [colors[ptr[v]:ptr[v + 1]] for v in range(self.n)]

    def _check(self, v: int):
        if not 0 <= v < self.n:
            raise InvalidInstance(f"vertex {v} out of range")

    def _count(self, kind: str, k: int = 1):
        self.counters[kind] += k
        self.used += k

    def degree_query(self, v: int) -> int:
        self._check(v)
        self._count("degree")
        return self._deg[v]

    def neighbor_query(self, v: int, i: int) -> Optional[int]:
        """The i-th neighbor (1-based, ascending ids) or ``None`` for ⊥."""
        self._check(v)
        self._count("neighbor")
        adj = self._adj[v]
        if i < 1 or i > len(adj):
            return None
        return adj[i - 1]

    def neighbor_scan(self, v: int, count: int) -> list:
        """Neighbors 1..count of v, charged as ``count`` neighbor queries."""
        self._check(v)
        self._count("neighbor", count)
        return self._adj[v][:count]

    def neighbor_scan_below(self, v: int, bound: int) -> list:
        """Neighbors with id below ``bound``.

        Charged like querying i = 1, 2, ... until the answer is ⊥ or at
        least ``bound``.
        """
        self._check(v)
        adj = self._adj[v]
        out = []
        for w in adj:
            if w >= bound:
                break
            out.append(w)
        self._count("neighbor", len(out) + 1)
        return out

    def degree_many(self, vs) -> list:
        """Batched ``degree_query``; one probe per vertex."""
        for v in vs:
            self._check(v)
        self._count("degree", len(vs))
        return [self._deg[v] for v in vs]

    def palette_many(self, vs) -> list:
        """Batched ``palette_query``; one probe per vertex."""
        for v in vs:
            self._check(v)
        self._count("palette", len(vs))
        return [self._pals[v] for v in vs]

    def palette_query(self, v: int) -> np.ndarray:
        self._check(v)
        self._count("palette")
        return self._pals[v]

    def randomness(self, v: int, offset: int, length: int) -> np.ndarray:
        self._check(v)
        self._count("randomness")
        return tape.words(self.master_seed, v, offset, length)

    def total(self) -> int:
        return self.used


@dataclass
class LcaAnswer:
    vertex: int
    color: int
    queries: dict
    radius: int
    component: int = 0

    @property
    def total(self) -> int:
        return sum(self.queries.values())

    def to_dict(self) -> dict:
        return {"vertex": self.vertex, "color": self.color, "queries": self.queries,
                "total": self.total, "radius": self.radius}


@dataclass
class LcaConfig:
    C0: int = 8
    beta: float = 2.0
    p_star: Optional[int] = None
    c_query: float = 3.0
    c_comp: float = 2.0
    reuse_decoding: bool = False


class _Call:
    """Scratch state of one query; every fact is derived from probes."""

    def __init__(self, engine: "LcaEngine", root: int):
        self.e = engine
        self.o = engine.oracle
        self.root = root
        self.start = self.o.total()
        self._nbrs, self._pal, self._rset, self._cum = {}, {}, {}, {}
        self._deg, self._outs, self._p = {}, {}, {}
        self._good, self._sig, self._nstar = {}, {}, {}
        self._status, self._sample = {}, {}

    def _charge(self):
        used = self.o.used - self.start
        if used > self.e.cap:
            raise QueryBudgetExceeded(self.root, used, self.e.cap)

    def degree(self, u: int) -> int:
        got = self._deg.get(u)
        if got is None:
            got = self._deg[u] = self.o.degree_query(u)
            self._charge()
        return got

    def nbrs(self, u: int) -> tuple:
        got = self._nbrs.get(u)
        if got is None:
            got = tuple(self.o.neighbor_scan(u, self.degree(u)))
            self._nbrs[u] = got
            self._charge()
        return got

    def out_nbrs(self, u: int) -> tuple:
        """Neighbors with smaller id: a prefix, since neighbors come in ascending order."""
        got = self._outs.get(u)
        if got is None:
            if u in self._nbrs:
                got = tuple(w for w in self._nbrs[u] if w < u)
            else:
                got = tuple(self.o.neighbor_scan_below(u, u))
                self._charge()
            self._outs[u] = got
        return got

    def pal(self, u: int) -> np.ndarray:
        got = self._pal.get(u)
        if got is None:
            got = self._pal[u] = self.o.palette_query(u)
            self._charge()
        return got

    def read(self, u: int):
        def fn(offset, length):
            w = self.o.randomness(u, offset, length)
            self._charge()
            return w
        return fn

    def p(self, u: int) -> int:
        got = self._p.get(u)
        if got is None:
            got = self._p[u] = len(self.pal(u)) - self.degree(u)
        return got

    def fill_p(self, ws):
        """Excess p for a batch of vertices, probing only what is missing."""
        need = [w for w in ws if w not in self._deg]
        if need:
            self._deg.update(zip(need, self.o.degree_many(need)))
        need = [w for w in ws if w not in self._pal]
        if need:
            self._pal.update(zip(need, self.o.palette_many(need)))
        self._charge()
        pal, deg, p = self._pal, self._deg, self._p
        for w in ws:
            if w not in p:
                p[w] = len(pal[w]) - deg[w]

    def good(self, u: int) -> bool:
        got = self._good.get(u)
        if got is None:
            outs = self.out_nbrs(u)
            self.fill_p(outs + (u,))
            p = self._p
            got = is_good_vertex(p[u], [p[w] for w in outs], self.e.p_star, self.e.C0)
            self._good[u] = got
        return got

    def rset(self, u: int, i: int) -> int:
        key = (u, i)
        got = self._rset.get(key)
        if got is None:
            K = self.e.params.K
            memo = self.e._decoded.get(key) if self.e.config.reuse_decoding else None
            pal = self.pal(u)
            if memo is None:
                got, words_read = colorset(pal, self.read(u), i * K, K)
                if self.e.config.reuse_decoding:
                    self.e._decoded[key] = (got, words_read)
            else:
                got, words_read = memo
                # same probes as decoding from scratch
                self.o._count("randomness", -(-words_read // 1024))
                self._charge()
            self._rset[key] = got
        return got

    def cum(self, u: int, i: int) -> int:
        key = (u, i)
        got = self._cum.get(key)
        if got is None:
            got = self.rset(u, i) | (self.cum(u, i - 1) if i else 0)
            self._cum[key] = got
        return got

    def sig(self, v: int, i: int) -> tuple:
        key = (v, i)
        got = self._sig.get(key)
        if got is None:
            rv = self.rset(v, i)
            got = self._sig[key] = tuple(u for u in self.nbrs(v) if rv & self.cum(u, i))
        return got

    def overloaded(self, v: int, i: int) -> bool:
        if self.degree(v) <= self.e.params.threshold:
            return False
        return len(self.sig(v, i)) > self.e.params.threshold

    def nstar(self, v: int) -> tuple:
        got = self._nstar.get(v)
        if got is None:
            s = set()
            for i in range(self.e.params.k):
                if not self.overloaded(v, i):
                    s.update(self.sig(v, i))
            got = self._nstar[v] = tuple(sorted(s))
        return got

    def status(self, v: int, i: int) -> tuple:
        """(status, color) at the start of iteration i."""
        key = (v, i)
        got = self._status.get(key)
        if got is not None:
            return got
        if i == 0:
            got = (ACTIVE, UNCOLORED) if self.good(v) else (BAD, UNCOLORED)
        else:
            got = self._outcome(v, i - 1)
        self._status[key] = got
        return got

    def sample(self, v: int, i: int) -> tuple:
        key = (v, i)
        got = self._sample.get(key)
        if got is None:
            prm = self.e.params
            if self.overloaded(v, i):
                got = (0, 0)
            else:
                taken = 0
                # nothing is colored before the first iteration
                for u in (self.nstar(v) if i else ()):
                    st, c = self.status(u, i)
                    if st == COLORED:
                        taken |= 1 << c
                got = scan_sample(self.pal(v), self.read(v), i * prm.K, prm.K,
                                  prm.cseq[i] // 2, prm.k2, taken)
            self._sample[key] = got
        return got

    def _outcome(self, v: int, i: int) -> tuple:
        st = self.status(v, i)
        if st[0] != ACTIVE:
            return st
        S, T = self.sample(v, i)
        if S == 0:
            return (BAD, UNCOLORED)
        blocked = 0
        for u in self.nstar(v):
            if u < v and self.status(u, i)[0] == ACTIVE:
                blocked |= self.sample(u, i)[0]
        if 3 * (T & ~blocked).bit_count() < T.bit_count():
            return (BAD, UNCOLORED)
        free = S & ~blocked
        if free:
            return (COLORED, lowest(free))
        return (ACTIVE, UNCOLORED)

    def final(self, v: int) -> int:
        if self.e.params.fallback:
            return UNCOLORED
        return self.status(v, self.e.params.k)[1]

    def component_color(self, v: int) -> tuple[int, int]:
        """BFS over the uncolored component of v, then ascending greedy."""
        comp = {v}
        queue = deque([v])
        while queue:
            w = queue.popleft()
            for x in self.nbrs(w):
                if x not in comp and self.final(x) == UNCOLORED:
                    comp.add(x)
                    if len(comp) > self.e.bfs_cap:
                        raise QueryBudgetExceeded(self.root, self.o.total() - self.start, self.e.bfs_cap)
                    queue.append(x)
        assigned = {}
        for w in sorted(comp):
            used = set()
            for x in self.nbrs(w):
                c = assigned.get(x, UNCOLORED) if x in comp else self.final(x)
                if c != UNCOLORED:
                    used.add(c)
            for c in self.pal(w).tolist():
                if c not in used:
                    assigned[w] = c
                    break
            else:
                raise AssertionError(f"vertex {w} exhausted its palette during cleanup")
        return assigned[v], len(comp)

    def radius(self) -> int:
        touched = set(self._deg) | set(self._pal)
        dist = {self.root: 0}
        queue = deque([self.root])
        while queue:
            w = queue.popleft()
            for x in self._nbrs.get(w, self._outs.get(w, ())):
                if x not in dist:
                    dist[x] = dist[w] + 1
                    queue.append(x)
        return max((dist.get(u, 0) for u in touched), default=0)


class LcaEngine:
    def __init__(self, oracle: LcaOracle, config: Optional[LcaConfig] = None):
        self.oracle = oracle
        self.config = config or LcaConfig()
        delta = oracle.max_degree
        self.p_star = default_p_star(delta) if self.config.p_star is None else self.config.p_star
        self.C0 = self.config.C0
        self.params = derive_bidding_params(self.p_star, self.config.beta, self.C0, delta)
        n = max(oracle.n, 2)
        d = max(delta, 2)
        self.cap = int(self.config.c_query * d ** 3 * math.ceil(math.log2(n)))
        self.bfs_cap = int(self.config.c_comp * d ** 2 * math.ceil(math.log(n) / math.log(d)))
        self._decoded = {}

    def color(self, v: int) -> LcaAnswer:
        before = dict(self.oracle.counters)
        call = _Call(self, v)
        c = call.final(v)
        comp = 0
        if c == UNCOLORED:
            c, comp = call.component_color(v)
        used = {k: self.oracle.counters[k] - before[k] for k in PROBES}
        return LcaAnswer(v, int(c), used, call.radius(), comp)


def lca_color(oracle: LcaOracle, v: int, config: Optional[LcaConfig] = None) -> LcaAnswer:
    return LcaEngine(oracle, config).color(v)


def sweep(instance: ListColoringInstance, master_seed: int, config: Optional[LcaConfig] = None):
    """Query every vertex independently. Returns the colors and the answers."""
    oracle = LcaOracle(instance, master_seed)
    engine = LcaEngine(oracle, config)
    answers = [engine.color(v) for v in range(instance.n)]
    colors = np.array([a.color for a in answers], dtype=np.int64)
    return colors, answers
