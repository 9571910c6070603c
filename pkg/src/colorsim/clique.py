"""CONGESTED-CLIQUE simulation with word-level bandwidth accounting.

Routing follows Lenzen's primitive: any batch in which every vertex sources
and sinks at most ``c_L * n`` words is delivered in a constant number of
rounds. Pipelines charge their communication through ``lenzen_route`` (one
batch, strict) or ``route_batched`` (splits an oversized load into the
fewest batches that each respect the cap).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .bidding import color_list_instance, good_instance_from_list, sparsified_coloring
from .errors import DegreeTooLow, OverloadedVertex, UnresolvedVertices
from .graph import UNCOLORED, ListColoringInstance, Palettes, empty_coloring, greedy_fill, palette_membership
from .partition import Slack, degree_threshold, derive_params, partition_instance
from .shattering import analyze_bad_set, color_components
from .tape import derive_seed


@dataclass
class RoutingRequest:
    source: int
    destination: int
    payload: int

    def __post_init__(self):
        if self.payload < 1:
            raise ValueError("payload must be at least one word")


class CliqueNetwork:
    """Round counter plus a per-batch ledger of words sent and received."""

    def __init__(self, n: int, c_L: float = 4.0, lenzen_rounds: int = 2):
        self.n = int(n)
        self.c_L = c_L
        self.lenzen_rounds = lenzen_rounds
        self.rounds = 0
        self.ledger = []

    @property
    def cap(self) -> int:
        return int(self.c_L * max(self.n, 1))

    @property
    def direct_cap(self) -> int:
        return max(self.n - 1, 0)

    @property
    def words(self) -> int:
        return int(sum(e["words"] for e in self.ledger))

    def _loads(self, src, dst, payload):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        payload = np.broadcast_to(np.asarray(payload, dtype=np.int64), src.shape)
        sent = np.bincount(src, weights=payload, minlength=self.n).astype(np.int64)
        recv = np.bincount(dst, weights=payload, minlength=self.n).astype(np.int64)
        return sent, recv

    def _commit(self, label, sent, recv, batches):
        assert sent.sum() == recv.sum(), "ledger conservation"
        rounds = batches * self.lenzen_rounds
        self.rounds += rounds
        self.ledger.append({"label": label, "words": int(sent.sum()), "batches": int(batches),
                            "rounds": rounds, "maxSent": int(sent.max(initial=0)),
                            "maxReceived": int(recv.max(initial=0))})
        return rounds

    def direct_round(self, src, dst, label: str = "direct") -> int:
        """One plain round: at most one word per ordered pair."""
        sent, recv = self._loads(src, dst, 1)
        pairs = np.asarray(src, dtype=np.int64) * self.n + np.asarray(dst, dtype=np.int64)
        if len(np.unique(pairs)) != len(pairs):
            raise OverloadedVertex(int(np.asarray(src)[0]), "sends twice to a vertex in", 2, 1)
        self.rounds += 1
        self.ledger.append({"label": label, "words": int(sent.sum()), "batches": 1, "rounds": 1,
                            "maxSent": int(sent.max(initial=0)), "maxReceived": int(recv.max(initial=0))})
        return 1


def lenzen_route(network: CliqueNetwork, requests, label: str = "route") -> int:
    """Deliver one batch. Raises ``OverloadedVertex`` if a vertex exceeds c_L * n words."""
    src, dst, payload = _unpack(requests)
    sent, recv = network._loads(src, dst, payload)
    cap = network.cap
    for arr, direction in ((sent, "sends"), (recv, "receives")):
        if len(arr) and arr.max() > cap:
            v = int(np.argmax(arr))
            raise OverloadedVertex(v, direction, int(arr[v]), cap)
    return network._commit(label, sent, recv, 1 if len(src) else 0)


def route_batched(network: CliqueNetwork, requests, label: str = "route") -> int:
    """Deliver an arbitrary load in ceil(max per-vertex load / cap) batches.

    The word-level traffic is a bipartite multigraph, so it splits into that
    many batches that each respect the cap.
    """
    src, dst, payload = _unpack(requests)
    sent, recv = network._loads(src, dst, payload)
    peak = int(max(sent.max(initial=0), recv.max(initial=0)))
    batches = math.ceil(peak / network.cap) if peak else 0
    return network._commit(label, sent, recv, batches)


def _unpack(requests):
    if isinstance(requests, tuple) and len(requests) == 3:
        return requests
    reqs = list(requests)
    return ([r.source for r in reqs], [r.destination for r in reqs], [r.payload for r in reqs])


@dataclass
class CliqueConfig:
    c_L: float = 4.0
    lenzen_rounds: int = 2
    c_stop: float = 8.0
    gamma: float = 2.0
    c_q: float = 0.5
    c_min: float = 1.0
    slack: Slack = field(default_factory=Slack)
    c_hd: float = 0.02
    eps: float = 0.1
    C0: int = 8
    beta: float = 2.0
    p_star: Optional[int] = None
    check_precondition: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExecutionTrace:
    model: str
    rounds: int = 0
    depth: int = 0
    per_level: list = field(default_factory=list)
    words: int = 0
    unresolved: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"model": self.model, "rounds": self.rounds, "depth": self.depth,
               "perLevel": self.per_level, "words": self.words, "unresolved": self.unresolved}
        out.update(self.extra)
        return out


def highdeg_threshold(n: int, c_hd: float, eps: float) -> float:
    return c_hd * math.log(max(n, 2)) ** (4 + eps)


def residual_palettes(instance: ListColoringInstance, colors: np.ndarray, ids: np.ndarray,
                      palettes: Optional[Palettes] = None) -> Palettes:
    """Palettes of ``ids`` minus colors already used by their neighbors.

    ``palettes`` (one row per entry of ``ids``) replaces the instance palettes.
    """
    g = instance.graph
    sub = instance.palettes.subset(ids) if palettes is None else palettes
    ids = np.asarray(ids, dtype=np.int64)
    deg = g.indptr[ids + 1] - g.indptr[ids]
    owner = np.repeat(np.arange(len(ids)), deg)
    pos = np.arange(int(deg.sum())) - np.repeat(np.cumsum(deg) - deg, deg) + np.repeat(g.indptr[ids], deg)
    nb_colors = colors[g.indices[pos]]
    keep = nb_colors != UNCOLORED
    taken = np.stack([owner[keep], nb_colors[keep]], axis=1)
    if len(taken) == 0:
        return sub
    owners = sub.owners()
    shift = int(max(sub.colors.max(initial=0), taken[:, 1].max())) + 1
    hit = np.isin(owners * shift + sub.colors, taken[:, 0] * shift + taken[:, 1])
    return sub.filter(~hit)


def _leader_gather(network: CliqueNetwork, sub_graph, pals: Palettes, ids: np.ndarray, label: str):
    """Ship a subgraph to its minimum-id vertex (edges plus deg+1 palette colors)."""
    if len(ids) == 0:
        return
    deg = sub_graph.degree
    words = deg + np.minimum(pals.size, deg + 1) + 1
    leader = int(ids.min())
    route_batched(network, (ids, np.full(len(ids), leader), words), label=label + "-gather")
    route_batched(network, (np.full(len(ids), leader), ids, 1), label=label + "-reply")


def run_highdeg_coloring(instance: ListColoringInstance, config: Optional[CliqueConfig] = None,
                         seed: int = 0, network: Optional[CliqueNetwork] = None):
    """Recursive partition coloring for large Δ. Returns (colors, trace)."""
    cfg = config or CliqueConfig()
    n = instance.n
    net = network or CliqueNetwork(n, cfg.c_L, cfg.lenzen_rounds)
    g = instance.graph
    colors = empty_coloring(n)
    trace = ExecutionTrace("clique", extra={"path": "high-degree"})
    current = np.arange(n, dtype=np.int64)
    prev_delta = None
    level = 0
    if (cfg.check_precondition and g.max_degree * n > cfg.c_stop * n
            and g.max_degree < highdeg_threshold(n, cfg.c_hd, cfg.eps)):
        raise DegreeTooLow(f"Δ={g.max_degree} below c_hd*ln(n)^(4+eps)="
                           f"{highdeg_threshold(n, cfg.c_hd, cfg.eps):.1f}")
    while True:
        sub_graph, ids = g.induced(current)
        pals = residual_palettes(instance, colors, ids)
        delta = sub_graph.max_degree
        size = len(ids)
        words_before = net.words
        if delta * size <= cfg.c_stop * n or size <= 1:
            _leader_gather(net, sub_graph, pals, ids, "base")
            local = empty_coloring(size)
            greedy_fill(sub_graph, pals, local, range(size))
            colors[ids] = local
            trace.per_level.append({"delta": delta, "vertices": size, "words": net.words - words_before,
                                    "base": True})
            break
        if prev_delta is not None:
            assert delta < prev_delta, f"Δ did not decrease: {prev_delta} -> {delta}"
        prev_delta = delta
        params = derive_params(delta, n, cfg.gamma, cfg.c_q, cfg.c_min, cfg.slack)
        rng = np.random.default_rng(derive_seed(seed, 0xC11, level))
        sub_inst = ListColoringInstance(sub_graph, pals)
        outcome = partition_instance(sub_inst, params, rng, check=False)
        # seed broadcast: source -> K helpers -> everybody
        K = outcome.seed.K
        helpers = np.arange(min(K, n))
        route_batched(net, (np.zeros(len(helpers), np.int64), helpers, 1), label="seed-scatter")
        route_batched(net, (np.repeat(helpers, n), np.tile(np.arange(n), len(helpers)), 1),
                      label="seed-broadcast")
        label = outcome.vertex_part
        k = params.k
        part_pal_keep = outcome.color_part_of(pals.colors) == label[pals.owners()]
        part_pals = pals.filter(part_pal_keep)
        src, dst, w = [], [], []
        spilled = []
        for i in range(k):
            members = np.nonzero(label == i)[0]
            if len(members) == 0:
                continue
            bg, _ = sub_graph.induced(members)
            bp = part_pals.subset(members)
            leader = int(ids[members].min())
            deg = bg.degree
            src.append(ids[members])
            dst.append(np.full(len(members), leader))
            w.append(deg + np.minimum(bp.size, deg + 1) + 1)
            local = empty_coloring(len(members))
            failed = greedy_fill(bg, bp, local, range(len(members)), strict=False)
            colors[ids[members]] = local
            spilled.extend(ids[members[failed]].tolist())
        if src:
            s, d, ww = np.concatenate(src), np.concatenate(dst), np.concatenate(w)
            lenzen_route(net, (s, d, ww), label="ship-parts")
            lenzen_route(net, (d, s, 1), label="part-colors")
        left = ids[outcome.leftover]
        # L vertices learn which colors their B-neighbors took
        e = sub_graph.edges()
        if len(e):
            la, lb = label[e[:, 0]], label[e[:, 1]]
            cross = (la == k) ^ (lb == k)
            a, b = e[cross, 0], e[cross, 1]
            from_b = np.where(la[cross] == k, b, a)
            to_l = np.where(la[cross] == k, a, b)
            keep = colors[ids[from_b]] != UNCOLORED
            if np.any(keep):
                route_batched(net, (ids[from_b[keep]], ids[to_l[keep]], 1), label="prune")
        # residual palette of an L vertex never drops below g_L(v)
        res_l = residual_palettes(instance, colors, left)
        assert np.all(res_l.size >= outcome.g[outcome.leftover]), "residual palette below g_L"
        trace.per_level.append({"delta": delta, "vertices": size, "words": net.words - words_before,
                                "k": k, "q": params.q, "leftover": len(left), "spilled": len(spilled)})
        current = np.union1d(left, np.array(spilled, dtype=np.int64))
        level += 1
    trace.depth = level
    trace.rounds = net.rounds
    trace.words = net.words
    member = palette_membership(instance.palettes, np.arange(n), colors)
    assert np.all(member), "color outside the original palette"
    return colors, trace


def speedup_condition(delta_star: int, tau: int, ell_in_bits: float, n: int) -> float:
    """Left side of Δ*^τ log(Δ* + ℓ_in / log n), to compare with log n."""
    lg = math.log2(max(n, 2))
    return delta_star ** tau * math.log2(max(delta_star + ell_in_bits / lg, 2))


def run_lowdeg_coloring(instance: ListColoringInstance, config: Optional[CliqueConfig] = None,
                        seed: int = 0, network: Optional[CliqueNetwork] = None):
    """Sparsified bidding with N*-restricted messages, then leader cleanup."""
    cfg = config or CliqueConfig()
    n = instance.n
    net = network or CliqueNetwork(n, cfg.c_L, cfg.lenzen_rounds)
    g = instance.graph
    e = g.edges()
    both_src = np.concatenate([e[:, 0], e[:, 1]])
    both_dst = np.concatenate([e[:, 1], e[:, 0]])
    # degree and palette size to every neighbor
    route_batched(net, (both_src, both_dst, 2), label="good-vertex")
    gi = good_instance_from_list(instance, cfg.C0, cfg.beta, cfg.p_star)
    res = sparsified_coloring(gi, seed)
    extra = {"path": "low-degree"}
    if not res.params.fallback:
        pre = res.pre
        # every vertex sends the distinct colors of all its sequences to each neighbor
        seq_words = np.array([sum(pre.rsets[i][v].bit_count() for i in range(res.params.k))
                              for v in range(n)], dtype=np.int64)
        route_batched(net, (both_src, both_dst, seq_words[both_src]), label="sequences")
        for i, C in enumerate(res.params.cseq.values):
            act = np.zeros(n, dtype=bool)
            act[res.active_history[i]] = True
            s, d = [], []
            for v in res.active_history[i].tolist():
                for u in pre.nstar[v]:
                    s.append(u)
                    d.append(v)
            if s:
                route_batched(net, (np.array(s), np.array(d), 1 + C // 2), label=f"iteration-{i}")
        delta_star = max((len(x) for x in pre.nstar), default=0)
        ell_in = res.params.k * res.params.K * math.log2(max(int(instance.palettes.size.max(initial=2)), 2))
        tau = 3 * res.params.k
        extra["speedup"] = {"deltaStar": delta_star, "tau": tau,
                            "conditionValue": speedup_condition(delta_star, tau, ell_in, n),
                            "logN": math.log2(max(n, 2)), "applied": False}
    extra["bidding"] = res.trace
    leftover = np.nonzero(res.colors == UNCOLORED)[0]
    extra["badSet"] = analyze_bad_set(g, res.colors == UNCOLORED).to_dict()
    if len(leftover):
        sub_graph, ids = g.induced(leftover)
        pals = residual_palettes(instance, res.colors, ids)
        _leader_gather(net, sub_graph, pals, ids, "cleanup")
    colors = color_components(instance, res.colors)
    trace = ExecutionTrace("clique", rounds=net.rounds, depth=0, words=net.words, extra=extra)
    return colors, trace


def run_clique_coloring(instance: ListColoringInstance, config: Optional[CliqueConfig] = None,
                        seed: int = 0):
    """Pick the high-degree recursion or the sparsified path by Δ."""
    cfg = config or CliqueConfig()
    n, delta = instance.n, instance.graph.max_degree
    if delta <= cfg.c_stop or delta >= highdeg_threshold(n, cfg.c_hd, cfg.eps):
        return run_highdeg_coloring(instance, cfg, seed)
    return run_lowdeg_coloring(instance, cfg, seed)


# ---------------------------------------------------------------- opportunistic simulation

@dataclass
class SimulationTask:
    """A τ-round local algorithm given as a function of the radius-τ N*-ball.

    ``local_fn(u, view)`` receives the inputs of every vertex in the ball of
    u (as a dict) and returns u's output.
    """
    nstar: Sequence[Sequence[int]]
    inputs: Sequence[Any]
    tau: int
    local_fn: Callable[[int, dict], Any]
    ell_in_bits: float
    ell_out_bits: float
    p: Optional[float] = None
    eps: float = 0.5
    c_out: float = 4.0

    def __post_init__(self):
        n = len(self.nstar)
        if self.p is not None and not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if self.ell_out_bits > self.c_out * math.log2(max(n, 2)):
            raise ValueError("output too long for an O(log n)-bit reply")

    @property
    def n(self) -> int:
        return len(self.nstar)

    @property
    def delta_star(self) -> int:
        return max((len(x) for x in self.nstar), default=0)

    def probability(self) -> float:
        if self.p is not None:
            return self.p
        lg = math.log2(max(self.n, 2))
        return min(1.0, self.eps / max(self.delta_star + self.ell_in_bits / lg, 1e-12))


def ball(nstar: Sequence[Sequence[int]], u: int, tau: int) -> list:
    """Vertices within τ N*-hops of u (u included), sorted."""
    seen = {u}
    frontier = [u]
    for _ in range(tau):
        nxt = []
        for w in frontier:
            for x in nstar[w]:
                if x not in seen:
                    seen.add(x)
                    nxt.append(x)
        frontier = nxt
    return sorted(seen)


def run_local_direct(task: SimulationTask) -> list:
    """Plain τ-round execution: knowledge floods one N*-hop per round."""
    n = task.n
    know = [{v} for v in range(n)]
    for _ in range(task.tau):
        know = [know[v].union(*(know[u] for u in task.nstar[v])) for v in range(n)]
    return [task.local_fn(u, {w: task.inputs[w] for w in sorted(know[u])}) for u in range(n)]


@dataclass
class SimulationResult:
    outputs: list
    unresolved: list
    resolver: np.ndarray
    p: float
    rounds: int


def opportunistic_simulate(network: CliqueNetwork, task: SimulationTask, rng: np.random.Generator,
                           strict: bool = True) -> SimulationResult:
    """Random shipping of local inputs, then resolution by any vertex holding a whole ball."""
    n = task.n
    p = task.probability()
    lg = math.log2(max(n, 2))
    ship_words = max(1, task.delta_star + math.ceil(task.ell_in_bits / lg))
    holds = rng.random((n, n)) < p
    np.fill_diagonal(holds, False)
    src, dst = np.nonzero(holds)
    start = network.rounds
    route_batched(network, (src, dst, ship_words), label="opportunistic-ship")
    np.fill_diagonal(holds, True)
    outputs = [None] * n
    resolver = np.full(n, -1, dtype=np.int64)
    unresolved = []
    for u in range(n):
        b = ball(task.nstar, u, task.tau)
        ok = np.logical_and.reduce(holds[b], axis=0)
        if ok[u]:
            v = u
        elif ok.any():
            v = int(np.argmax(ok))
        else:
            unresolved.append(u)
            continue
        resolver[u] = v
        outputs[u] = task.local_fn(u, {w: task.inputs[w] for w in b})
    back = resolver >= 0
    reply = max(1, math.ceil(task.ell_out_bits / lg))
    route_batched(network, (resolver[back], np.nonzero(back)[0], reply), label="opportunistic-reply")
    result = SimulationResult(outputs, unresolved, resolver, p, network.rounds - start)
    if unresolved and strict:
        raise UnresolvedVertices(unresolved, result)
    return result
