"""Sparsified color bidding on a good instance.

Every vertex v has a palette Psi0(v), an excess p_v and out-neighbors
pointing to lower ids. In iteration i an active vertex samples a small set
S_v of colors (inside a larger sample T_v) from the prefix of its random
sequence R_v^(i), discards colors already taken by neighbors, and keeps the
smallest color of S_v that no active out-neighbor also sampled.

Color sets are Python ints used as bitsets over *positions*: the global
pipeline maps colors to their rank in the instance's color universe, while
the local engine uses the raw color value. Both orders agree, so
"smallest color" means the same thing in either encoding.
"""
from __future__ import annotations

import decimal
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import tape
from .errors import InfeasibleSpec, InvalidInstance, ParameterError
from .graph import UNCOLORED, Graph, ListColoringInstance, Palettes, empty_coloring, greedy_fill

PSTAR_FLOOR = 16
ACTIVE, COLORED, BAD = 0, 1, 2


# ---------------------------------------------------------------- parameters

_DEC = decimal.Context(prec=60)


def _cap(p_star: int, beta: float):
    # precision grows with p* so ceilings at integer boundaries survive rounding
    ctx = decimal.Context(prec=40 + int(p_star).bit_length())
    p = int(p_star)
    if p & (p - 1) == 0:
        x = decimal.Decimal(p.bit_length() - 1)
    else:
        x = ctx.divide(ctx.ln(decimal.Decimal(p)), ctx.ln(decimal.Decimal(2)))
    x = ctx.power(x, decimal.Decimal(beta)) if x > 0 else decimal.Decimal(0)
    return x, 2 * math.ceil(ctx.divide(x, 2)) - 2


def c_next(c: int, cap_real) -> int:
    """One step of the recurrence: min{e^(C/6) C / 2, cap} rounded to 2*ceil(./2) - 2."""
    cap_real = decimal.Decimal(cap_real)
    ctx = decimal.Context(prec=max(60, len(cap_real.as_tuple().digits) + 10))
    if c / 6 <= 700:
        grow = _DEC.divide(_DEC.multiply(_DEC.exp(_DEC.divide(decimal.Decimal(c), 6)), decimal.Decimal(c)), 2)
        if grow < cap_real:
            return 2 * math.ceil(_DEC.divide(grow, 2)) - 2
    return 2 * math.ceil(ctx.divide(cap_real, 2)) - 2


@dataclass(frozen=True)
class CSequence:
    values: tuple

    @property
    def k(self) -> int:
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def c_sequence(C0: int, p_star: int, beta: float, max_len: int = 64) -> CSequence:
    """Iterate the C recurrence from C0 until it hits 2*ceil(log2(p*)^beta / 2) - 2."""
    if C0 < 2 or p_star < 2 or beta <= 0:
        raise ParameterError("need C0 >= 2, p* >= 2 and beta > 0")
    cap_real, cap = _cap(p_star, beta)
    if cap < 2:
        raise ParameterError(f"cap value {cap} < 2: p*={p_star} too small for beta={beta}")
    values = [int(C0)]
    while values[-1] != cap:
        nxt = c_next(values[-1], cap_real)
        if nxt != cap and nxt <= values[-1]:
            raise ParameterError(f"sequence from C0={C0} stalls at {values[-1]} -> {nxt}")
        values.append(nxt)
        if len(values) > max_len:
            raise ParameterError("sequence did not reach the cap")
    return CSequence(tuple(values))


@dataclass(frozen=True)
class BiddingParams:
    p_star: int
    beta: float
    C0: int
    delta: int
    k2: int           # |T_v|
    K: int            # length of every R_v^(i)
    threshold: int    # overload threshold on significant neighbors
    cseq: CSequence
    fallback: bool = False

    @property
    def k(self) -> int:
        return self.cseq.k


def derive_bidding_params(p_star: int, beta: float, C0: int, delta: int) -> BiddingParams:
    """Base-2 logs with ceilings throughout.

    The sequence length is k2 * ceil(log^3 p*), which is at least
    ceil(log^(3+beta) p*) and exactly the scan budget of the sampler.
    """
    if p_star < PSTAR_FLOOR:
        return BiddingParams(p_star, beta, C0, delta, 0, 0, 0, CSequence((C0,)), fallback=True)
    lg = math.log2(p_star)
    k2 = math.ceil(lg ** beta)
    K = k2 * math.ceil(lg ** 3)
    log_delta = max(1, math.ceil(math.log2(max(delta, 2))))
    return BiddingParams(p_star, beta, C0, delta, k2, K, K * K * log_delta,
                         c_sequence(C0, p_star, beta))


# ---------------------------------------------------------------- good instances

@dataclass
class GoodInstance:
    graph: Graph
    palettes: Palettes
    p: np.ndarray
    C0: int
    beta: float
    p_star: int
    excluded: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.excluded is None:
            self.excluded = np.zeros(self.graph.n, dtype=bool)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def delta(self) -> int:
        return self.graph.max_degree

    def out_neighbors(self, v: int) -> np.ndarray:
        nb = self.graph.neighbors(v)
        return nb[:np.searchsorted(nb, v)]

    def as_list_instance(self) -> ListColoringInstance:
        return ListColoringInstance(self.graph, self.palettes)

    def violations(self, c_pstar: float = 1.0) -> list:
        """Invariant breaches among non-excluded vertices (empty when valid)."""
        out = []
        slack = self.palettes.size - self.graph.degree
        for v in np.nonzero(~self.excluded & (self.p > slack))[0].tolist():
            out.append(("excess", v))
        for v in range(self.n):
            if self.excluded[v]:
                continue
            s = math.fsum(1.0 / self.p[u] for u in self.out_neighbors(v).tolist())
            if s > 1.0 / self.C0:
                out.append(("out-sum", v))
        d = self.delta
        if d >= 2 and self.p_star < c_pstar * d / math.log2(d):
            out.append(("p-star", self.p_star))
        live = ~self.excluded
        if np.any(live) and self.p_star > int(self.p[live].min()):
            out.append(("p-star-min", self.p_star))
        return out


def generate_good_instance(n: int, delta: int, palette_size: int, C0: int, beta: float,
                           seed: int, out_cap: Optional[int] = None, universe: Optional[int] = None,
                           blocks: int = 1, retries: int = 4) -> GoodInstance:
    """Random good instance with out-edges towards lower ids.

    Each vertex picks up to ``out_cap`` (default floor(Δ/C0)) random lower-id
    targets that still have room below Δ. Palettes are ``palette_size``-subsets
    of one of ``blocks`` disjoint color ranges of width ``universe``.
    """
    if palette_size < delta + 1:
        raise InfeasibleSpec("palette size must be at least Δ+1")
    universe = palette_size if universe is None else universe
    if universe < palette_size:
        raise InfeasibleSpec("universe smaller than the palette size")
    out_cap = delta // C0 if out_cap is None else out_cap
    rng = np.random.default_rng(seed)
    deg = np.zeros(n, dtype=np.int64)
    edges = []
    for v in range(1, n):
        chosen = set()
        want = min(out_cap, v, delta)
        attempts = 0
        while len(chosen) < want and attempts < 4 * want + 8:
            for u in rng.integers(0, v, size=want - len(chosen)).tolist():
                if u not in chosen and deg[u] < delta and len(chosen) < want:
                    chosen.add(u)
                    deg[u] += 1
            attempts += want
        deg[v] += len(chosen)
        edges.extend((u, v) for u in chosen)
    graph = Graph.from_edges(n, edges)

    block_of = rng.integers(0, blocks, size=n)
    if universe == palette_size:
        lists = [np.arange(palette_size) + b * universe for b in block_of.tolist()]
    else:
        lists = [np.sort(rng.choice(universe, palette_size, replace=False)) + b * universe
                 for b in block_of.tolist()]
    palettes = Palettes.from_lists(lists) if n else Palettes(np.zeros(1, np.int64), np.zeros(0, np.int64))

    for _ in range(retries):
        p = palettes.size - graph.degree
        bad = []
        inv = 1.0 / np.maximum(p, 1)
        for v in range(n):
            outs = graph.neighbors(v)[:np.searchsorted(graph.neighbors(v), v)]
            if len(outs) and math.fsum(inv[outs].tolist()) > 1.0 / C0:
                bad.append(v)
        if not bad:
            break
        # drop the out-edge to the tightest neighbor and try again
        e = [tuple(x) for x in graph.edges().tolist()]
        drop = set()
        for v in bad:
            outs = graph.neighbors(v)[:np.searchsorted(graph.neighbors(v), v)]
            drop.add((int(outs[np.argmin(p[outs])]), v))
        graph = Graph.from_edges(n, [x for x in e if x not in drop])
    else:
        raise InfeasibleSpec("could not satisfy the out-neighbor condition")
    p = palettes.size - graph.degree
    p_star = int(p.min()) if n else palette_size
    d = graph.max_degree
    if d >= 2 and p_star < d / math.log2(d):
        raise InfeasibleSpec(f"p*={p_star} below Δ/log Δ")
    return GoodInstance(graph, palettes, p.astype(np.int64), C0, beta, p_star)


def default_p_star(delta: int, floor: int = PSTAR_FLOOR) -> int:
    d = max(delta, 2)
    return max(floor, math.ceil(d / math.log2(d)))


def is_good_vertex(p_v: int, out_p: Sequence[int], p_star: int, C0: int) -> bool:
    """Local rule shared by the global pipeline and the LCA engine."""
    if p_v < p_star:
        return False
    return math.fsum(1.0 / x for x in out_p) <= 1.0 / C0


def good_instance_from_list(instance: ListColoringInstance, C0: int, beta: float,
                            p_star: Optional[int] = None) -> GoodInstance:
    """View a (deg+1)-list instance as a good instance.

    p_v is |Psi(v)| - deg(v). Vertices with p_v below p* or a large
    out-neighbor sum are excluded up front and start out Bad.
    """
    g = instance.graph
    p = (instance.palettes.size - g.degree).astype(np.int64)
    p_star = default_p_star(g.max_degree) if p_star is None else int(p_star)
    excluded = np.zeros(g.n, dtype=bool)
    for v in range(g.n):
        nb = g.neighbors(v)
        outs = nb[:np.searchsorted(nb, v)]
        excluded[v] = not is_good_vertex(int(p[v]), p[outs].tolist(), p_star, C0)
    return GoodInstance(g, instance.palettes, p, C0, beta, p_star, excluded)


# ---------------------------------------------------------------- sampling

def sample_colors(k1: int, k2: int, s_minus, R: Sequence[int], budget: Optional[int] = None):
    """Scan R collecting new colors outside ``s_minus``.

    Returns ``(T1, T)`` as tuples in first-occurrence order: T1 is T when it
    first reached k1 colors and the scan stops once T has k2 colors. If the
    budget runs out first the result is two empty tuples.
    """
    if k1 > k2:
        raise ParameterError("k1 must not exceed k2")
    budget = len(R) if budget is None else min(budget, len(R))
    excl = set(s_minus)
    T, seen, T1 = [], set(), ()
    if k1 == 0:
        T1 = ()
    if k2 == 0:
        return (), ()
    for c in R[:budget]:
        if c not in excl and c not in seen:
            seen.add(c)
            T.append(c)
            if len(T) == k1:
                T1 = tuple(T)
            if len(T) == k2:
                return T1, tuple(T)
    return (), ()


def to_mask(positions) -> int:
    """Bitset with the given non-negative positions set."""
    pos = np.asarray(positions, dtype=np.int64)
    if len(pos) == 0:
        return 0
    bits = np.zeros(int(pos.max()) + 1, dtype=bool)
    bits[pos] = True
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def mask_positions(mask: int) -> list:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def lowest(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


ReadFn = Callable[[int, int], np.ndarray]


def scan_sample(pal: np.ndarray, read: ReadFn, offset: int, budget: int, k1: int, k2: int,
                s_minus: int) -> tuple[int, int]:
    """Streaming ``sample_colors`` over tape words, on bitsets.

    ``pal`` holds sorted positions; draw j is ``pal[word_j mod |pal|]``.
    """
    size = np.uint64(len(pal))
    if len(pal) == 0 or k2 == 0:
        return 0, 0
    T, T1, count, j, chunk = 0, 0, 0, 0, 64
    while j < budget:
        m = min(chunk, budget - j)
        draws = pal[(read(offset + j, m) % size).astype(np.int64)].tolist()
        for c in draws:
            bit = 1 << c
            if not (s_minus & bit) and not (T & bit):
                T |= bit
                count += 1
                if count == k1:
                    T1 = T
                if count == k2:
                    return T1, T
        j += m
        chunk = min(chunk * 4, 4096)
    return 0, 0


def colorset(pal: np.ndarray, read: ReadFn, offset: int, K: int, block: int = 1024) -> tuple[int, int]:
    """Distinct colors among the K draws starting at ``offset``.

    Stops early once the whole palette has been seen. Returns the bitset and
    the number of words read.
    """
    P = len(pal)
    if P == 0 or K == 0:
        return 0, 0
    seen = np.zeros(P, dtype=bool)
    j = 0
    while j < K:
        m = min(block, K - j)
        seen[(read(offset + j, m) % np.uint64(P)).astype(np.int64)] = True
        j += m
        if seen.all():
            break
    return to_mask(pal[seen]), j


def colorsets_batch(seed: int, vertices: np.ndarray, pals: list, offset: int, K: int) -> list:
    """Vectorised ``colorset`` for many vertices sharing one tape offset."""
    out = [0] * len(vertices)
    if len(vertices) == 0 or K == 0:
        return out
    sizes = np.array([len(p) for p in pals], dtype=np.int64)
    pmax = int(sizes.max())
    if pmax == 0:
        return out
    block = min(K, 8 * pmax + 64)
    rows = max(16, (1 << 22) // block)
    for start in range(0, len(vertices), rows):
        sl = slice(start, min(start + rows, len(vertices)))
        vs = np.asarray(vertices[sl], dtype=np.int64)
        sz = np.maximum(sizes[sl], 1).astype(np.uint64)
        seen = np.zeros((len(vs), pmax), dtype=bool)
        todo = np.nonzero(sizes[sl] > 0)[0]
        j = 0
        while j < K and len(todo):
            m = min(block, K - j)
            w = tape.words_many(seed, vs[todo], offset + j, m)
            idx = (w % sz[todo][:, None]).astype(np.int64)
            seen[todo[:, None], idx] = True
            j += m
            full = seen[todo].sum(axis=1) >= sizes[sl][todo]
            todo = todo[~full]
        for r, v_pal in enumerate(pals[sl]):
            if len(v_pal):
                out[start + r] = to_mask(v_pal[seen[r, :len(v_pal)]])
    return out


# ---------------------------------------------------------------- global run

@dataclass
class Preprocessed:
    rsets: list          # rsets[i][v]: bitset of R_v^(i)
    cum: list            # cum[i][v]: union over i' <= i
    sig: list            # sig[i][v]: significant neighbors of v at iteration i
    overloaded: np.ndarray
    nstar: list


@dataclass
class BiddingResult:
    colors: np.ndarray
    status: np.ndarray
    params: BiddingParams
    trace: list
    pre: Optional[Preprocessed] = None
    active_history: list = field(default_factory=list)
    samples: list = field(default_factory=list)   # per iteration {v: (S, T)}
    positions_to_color: Optional[np.ndarray] = None

    @property
    def bad(self) -> np.ndarray:
        return self.status == BAD

    @property
    def uncolored(self) -> np.ndarray:
        return self.colors == UNCOLORED

    def same_output(self, other: "BiddingResult") -> bool:
        return np.array_equal(self.colors, other.colors) and np.array_equal(self.status, other.status)


class _Encoded:
    """Palettes as sorted position arrays over the instance's color universe."""

    def __init__(self, gi: GoodInstance):
        self.universe = gi.palettes.universe()
        pos = np.searchsorted(self.universe, gi.palettes.colors)
        ptr = gi.palettes.ptr
        self.pals = [pos[ptr[v]:ptr[v + 1]] for v in range(gi.n)]
        self.adj = [gi.graph.neighbors(v).tolist() for v in range(gi.n)]


def preprocess(gi: GoodInstance, seed: int, params: BiddingParams, enc: _Encoded) -> Preprocessed:
    n, k, K = gi.n, params.k, params.K
    verts = np.arange(n, dtype=np.int64)
    rsets, cum = [], []
    prev = [0] * n
    for i in range(k):
        cur = colorsets_batch(seed, verts, enc.pals, i * K, K)
        rsets.append(cur)
        prev = [a | b for a, b in zip(prev, cur)]
        cum.append(prev)
    sig = []
    overloaded = np.zeros((k, n), dtype=bool)
    nstar_sets = [set() for _ in range(n)]
    for i in range(k):
        ri, ci = rsets[i], cum[i]
        row = []
        for v in range(n):
            rv = ri[v]
            s = tuple(u for u in enc.adj[v] if rv & ci[u])
            row.append(s)
            if len(s) > params.threshold:
                overloaded[i, v] = True
            else:
                nstar_sets[v].update(s)
        sig.append(row)
    nstar = [tuple(sorted(s)) for s in nstar_sets]
    return Preprocessed(rsets, cum, sig, overloaded, nstar)


def _main_steps(gi: GoodInstance, seed: int, params: BiddingParams, enc: _Encoded,
                pre: Preprocessed, view: list) -> BiddingResult:
    """Run the k bidding iterations; vertex v only reads vertices in view[v]."""
    n, K = gi.n, params.K
    status = np.where(gi.excluded, BAD, ACTIVE).astype(np.int8)
    pos_color = [UNCOLORED] * n
    trace, history, samples = [], [], []
    for i, C in enumerate(params.cseq.values):
        active = [v for v in range(n) if status[v] == ACTIVE]
        history.append(np.array(active, dtype=np.int64))
        S, T = {}, {}
        for v in active:
            if pre.overloaded[i, v]:
                S[v] = T[v] = 0
                continue
            taken = 0
            for u in view[v]:
                if pos_color[u] != UNCOLORED:
                    taken |= 1 << pos_color[u]
            S[v], T[v] = scan_sample(enc.pals[v], lambda off, ln, v=v: tape.words(seed, v, off, ln),
                                     i * K, K, C // 2, params.k2, taken)
        samples.append({v: (S[v], T[v]) for v in active})
        stats = dict(i=i, C_i=int(C), active=len(active), colored=0, bad=0,
                     overloaded=int(sum(pre.overloaded[i, v] for v in active)), lazy=0, notRich=0,
                     maxNstar=max((len(pre.sig[i][v]) for v in active if not pre.overloaded[i, v]), default=0))
        updates = []
        for v in active:
            sv, tv = S[v], T[v]
            if sv == 0:
                stats["lazy"] += 1
                updates.append((v, BAD, UNCOLORED))
                continue
            blocked = 0
            for u in view[v]:
                if u < v and status[u] == ACTIVE:
                    blocked |= S[u]
            if 3 * (tv & ~blocked).bit_count() < tv.bit_count():
                stats["notRich"] += 1
                updates.append((v, BAD, UNCOLORED))
                continue
            free = sv & ~blocked
            if free:
                updates.append((v, COLORED, lowest(free)))
        for v, st, c in updates:
            status[v] = st
            if st == COLORED:
                pos_color[v] = c
                stats["colored"] += 1
            else:
                stats["bad"] += 1
        trace.append(stats)
    colors = empty_coloring(n)
    for v in range(n):
        if pos_color[v] != UNCOLORED:
            colors[v] = enc.universe[pos_color[v]]
    return BiddingResult(colors, status, params, trace, pre, history, samples, enc.universe)


def _fallback(gi: GoodInstance, params: BiddingParams) -> BiddingResult:
    colors = empty_coloring(gi.n)
    greedy_fill(gi.graph, gi.palettes, colors, range(gi.n))
    status = np.full(gi.n, COLORED, dtype=np.int8)
    return BiddingResult(colors, status, params, [{"fallback": "greedy", "p_star": params.p_star}])


def params_for(gi: GoodInstance) -> BiddingParams:
    return derive_bidding_params(gi.p_star, gi.beta, gi.C0, gi.delta)


def sparsified_coloring(gi: GoodInstance, seed: int) -> BiddingResult:
    """All k iterations with every vertex reading its full neighborhood."""
    params = params_for(gi)
    if params.fallback:
        return _fallback(gi, params)
    enc = _Encoded(gi)
    pre = preprocess(gi, seed, params, enc)
    return _main_steps(gi, seed, params, enc, pre, enc.adj)


def replay_with_nstar(gi: GoodInstance, seed: int) -> BiddingResult:
    """Same run, but v reads only N*(v) during the main steps."""
    params = params_for(gi)
    if params.fallback:
        return _fallback(gi, params)
    enc = _Encoded(gi)
    pre = preprocess(gi, seed, params, enc)
    return _main_steps(gi, seed, params, enc, pre, pre.nstar)


def compute_nstar(result: BiddingResult, v: int) -> tuple:
    return result.pre.nstar[v] if result.pre is not None else ()


# ---------------------------------------------------------------- honesty audit

@dataclass
class HonestyAudit:
    iteration: int
    C: int
    D: int
    vertices: np.ndarray
    out_sum: np.ndarray
    max_significant: np.ndarray

    @property
    def violators(self) -> np.ndarray:
        bad = (self.out_sum > 1.0 / self.C) | (self.max_significant > self.D)
        return self.vertices[bad]

    @property
    def violation_rate(self) -> float:
        return len(self.violators) / len(self.vertices) if len(self.vertices) else 0.0


def audit_honesty(gi: GoodInstance, result: BiddingResult, i: int) -> HonestyAudit:
    """Measure (C_i, D_i)-honesty of the vertices active at the start of iteration i."""
    params = result.params
    active = result.active_history[i]
    is_active = np.zeros(gi.n, dtype=bool)
    is_active[active] = True
    out_sum = np.zeros(len(active))
    max_sig = np.zeros(len(active), dtype=np.int64)
    enc_pos = np.searchsorted(result.positions_to_color, gi.palettes.colors)
    ptr = gi.palettes.ptr
    for r, v in enumerate(active.tolist()):
        outs = gi.out_neighbors(v)
        outs = outs[is_active[outs]]
        out_sum[r] = math.fsum((1.0 / gi.p[outs]).tolist())
        if i == 0:
            continue
        pal_mask = to_mask(enc_pos[ptr[v]:ptr[v + 1]])
        width = (pal_mask.bit_length() + 7) // 8
        counts = np.zeros(width * 8, dtype=np.int64)
        for u in gi.graph.neighbors(v).tolist():
            m = result.pre.cum[i - 1][u] & pal_mask
            if m:
                counts += np.unpackbits(np.frombuffer(m.to_bytes(width, "little"), dtype=np.uint8),
                                        bitorder="little")
        max_sig[r] = int(counts.max(initial=0))
    return HonestyAudit(i, int(params.cseq[i]), 2 * params.K * i, active, out_sum, max_sig)


def color_list_instance(instance: ListColoringInstance, seed: int, C0: int = 8, beta: float = 2.0,
                        p_star: Optional[int] = None):
    """Local good-vertex assignment, sparsified coloring, then component cleanup.

    Returns the total coloring and the bidding result.
    """
    from .shattering import color_components

    gi = good_instance_from_list(instance, C0, beta, p_star)
    res = sparsified_coloring(gi, seed)
    return color_components(instance, res.colors), res
