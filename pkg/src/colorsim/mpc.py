"""Low-memory MPC simulation of the recursive partition coloring.

Memory is counted in 64-bit words: a vertex record is one word plus one
word per palette color, an edge is two words. The input graph stays
resident in its hash shard for the whole run, and every recursion node on
the active stack keeps its own shard, so the per-machine high-water mark
reflects what a real execution would need. Sibling subproblems are run one
after another. That costs rounds but keeps the memory check honest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .clique import residual_palettes
from .errors import InvalidInstance, MemoryExceeded, ParameterError
from .graph import UNCOLORED, Graph, ListColoringInstance, Palettes, empty_coloring, greedy_fill, palette_membership
from .partition import Slack, derive_params, partition_instance
from .tape import derive_seed, mix64


class MpcCluster:
    """Machines with S words each and a per-round send/receive ledger."""

    def __init__(self, n: int, alpha: float, c_mem: float = 64.0, machines: Optional[int] = None,
                 input_words: int = 0, machine_slack: float = 4.0):
        if not 0 < alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        self.n = int(n)
        self.alpha = alpha
        self.S = int(math.ceil(max(n, 1) ** alpha * c_mem))
        if machines is None:
            machines = max(1, math.ceil(machine_slack * input_words / self.S))
        self.machines = int(machines)
        self.resident = np.zeros(self.machines, dtype=np.int64)
        self.peak = np.zeros(self.machines, dtype=np.int64)
        self.rounds = 0
        self.ledger = []

    def _check_resident(self):
        np.maximum(self.peak, self.resident, out=self.peak)
        if self.resident.max(initial=0) > self.S:
            m = int(np.argmax(self.resident))
            raise MemoryExceeded(m, self.rounds, int(self.resident[m]), self.S)

    def allocate(self, load: np.ndarray):
        self.resident += load
        self._check_resident()

    def free(self, load: np.ndarray):
        self.resident -= load
        assert self.resident.min(initial=0) >= 0

    def round(self, src, dst, words, label: str = "round") -> int:
        """Commit one round of point-to-point traffic between machines."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        words = np.broadcast_to(np.asarray(words, dtype=np.int64), src.shape)
        sent = np.bincount(src, weights=words, minlength=self.machines).astype(np.int64)
        recv = np.bincount(dst, weights=words, minlength=self.machines).astype(np.int64)
        for arr in (sent, recv):
            if arr.max(initial=0) > self.S:
                m = int(np.argmax(arr))
                raise MemoryExceeded(m, self.rounds, int(arr[m]), self.S)
        self.rounds += 1
        self.ledger.append({"label": label, "words": int(sent.sum()),
                            "maxSent": int(sent.max(initial=0)), "maxReceived": int(recv.max(initial=0))})
        return 1

    def broadcast(self, words: int, label: str = "broadcast") -> int:
        """Tree broadcast of a small payload from machine 0 to every machine."""
        if words > self.S:
            raise MemoryExceeded(0, self.rounds, words, self.S)
        fan = max(1, self.S // max(words, 1))
        have = 1
        used = 0
        while have < self.machines:
            new = min(self.machines - have, have * fan)
            senders = np.repeat(np.arange(have), fan)[:new]
            self.round(senders, np.arange(have, have + new), words, label)
            have += new
            used += 1
        return used


def hash_machine(key_a: int, ids, machines: int) -> np.ndarray:
    """Globally known hash of (key_a, id) onto machines."""
    ids = np.asarray(ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = mix64(ids * np.uint64(0x9E3779B97F4A7C15) + np.uint64(derive_seed(key_a) & ((1 << 64) - 1)))
    return (h % np.uint64(machines)).astype(np.int64)


def shard_loads(graph: Graph, palettes: Optional[Palettes], cluster: MpcCluster, hash_seed: int,
                ids: Optional[np.ndarray] = None):
    """Per-machine words of a hash sharding: one word per vertex, two per edge,
    one per (vertex, palette color) entry.

    ``ids`` maps local vertices to global ids (identity by default); hashing
    uses global ids so shards of different subgraphs are comparable. Returns
    (load, list of (machine array, word count) per record kind).
    """
    n = graph.n
    ids = np.arange(n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
    M = cluster.machines
    vm = hash_machine(hash_seed, ids, M)
    e = ids[graph.edges()] if graph.num_edges else np.zeros((0, 2), dtype=np.int64)
    em = hash_machine(hash_seed ^ 0x5EED, e[:, 0] * cluster.n + e[:, 1], M)
    if palettes is not None:
        pm = hash_machine(hash_seed ^ 0xC010, ids[palettes.owners()] * (1 << 32) + palettes.colors, M)
    else:
        pm = np.zeros(0, dtype=np.int64)
    load = np.bincount(vm, minlength=M) + 2 * np.bincount(em, minlength=M) + np.bincount(pm, minlength=M)
    return load.astype(np.int64), [(vm, 1), (em, 2), (pm, 1)]


def shard_graph(graph: Graph, cluster: MpcCluster, hash_seed: int, palettes: Optional[Palettes] = None) -> dict:
    """Hash vertices and edges onto machines. Raises ``MemoryExceeded`` on overflow."""
    total = graph.n + 2 * graph.num_edges + (int(palettes.size.sum()) if palettes is not None else 0)
    if total > cluster.machines * cluster.S:
        raise MemoryExceeded(-1, cluster.rounds, total, cluster.machines * cluster.S)
    load, maps = shard_loads(graph, palettes, cluster, hash_seed)
    if load.max(initial=0) > cluster.S:
        m = int(np.argmax(load))
        raise MemoryExceeded(m, cluster.rounds, int(load[m]), cluster.S)
    return {"vertexMachine": maps[0][0], "edgeMachine": maps[1][0], "load": load}


@dataclass
class MpcConfig:
    alpha: float = 0.5
    c_mem: float = 64.0
    machine_slack: float = 4.0
    c_base: float = 1.0
    gamma: float = 6.0
    c_q: float = 0.25
    c_min: float = 0.0
    slack: Slack = field(default_factory=Slack)
    min_partition_steps: int = 0
    check_palettes: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MpcTrace:
    alpha: float
    depth: int = 0
    tree: list = field(default_factory=list)
    peak_memory: list = field(default_factory=list)
    rounds: int = 0
    base_rounds: int = 0
    machines: int = 0
    S: int = 0
    total_peak: int = 0

    def to_dict(self) -> dict:
        return {"model": "mpc", "alpha": self.alpha, "depth": self.depth, "tree": self.tree,
                "peakMemory": self.peak_memory, "rounds": self.rounds,
                "substitutedBaseRounds": self.base_rounds, "machines": self.machines, "S": self.S,
                "totalPeakMemory": self.total_peak}


def mpc_palette_floor(delta: int) -> float:
    return delta - delta ** 0.6


class _Runner:
    def __init__(self, instance: ListColoringInstance, cfg: MpcConfig, seed: int, cluster: MpcCluster):
        self.inst = instance
        self.cfg = cfg
        self.seed = seed
        self.cl = cluster
        self.colors = empty_coloring(instance.n)
        self.trace = MpcTrace(cfg.alpha, machines=cluster.machines, S=cluster.S)
        self.base_limit = cfg.c_base * instance.n ** cfg.alpha

    def node(self, ids: np.ndarray, pals: Palettes, depth: int, branch: str, parent: int) -> list:
        """Color ``ids`` from ``pals``; returns the vertices that ran out of colors."""
        g = self.inst.graph
        node_id = len(self.trace.tree)
        pals = residual_palettes(self.inst, self.colors, ids, pals)
        sub, _ = g.induced(ids)
        # a vertex whose restricted palette is already too short spills at once
        short = pals.size < sub.degree + 1
        early = ids[short].tolist()
        if early:
            keep = np.nonzero(~short)[0]
            ids, pals = ids[keep], pals.subset(keep)
            sub, _ = g.induced(ids)
        delta = sub.max_degree
        entry = {"id": node_id, "parent": parent, "depth": depth, "branch": branch,
                 "delta": int(delta), "vertices": int(len(ids)), "early": len(early)}
        self.trace.tree.append(entry)
        self.trace.depth = max(self.trace.depth, depth)
        if len(ids) == 0:
            entry["kind"] = "empty"
            return early
        key = derive_seed(self.seed, node_id)
        load, maps = shard_loads(sub, pals, self.cl, key, ids)
        _, before = shard_loads(sub, pals, self.cl, 0, ids)
        # reshard: every record moves from its input-shard machine to this node's machine
        self.cl.round(np.concatenate([m for m, _ in before]), np.concatenate([m for m, _ in maps]),
                      np.concatenate([np.full(len(m), w) for m, w in maps]), label="reshard")
        vm = maps[0][0]
        self.cl.allocate(load)
        try:
            base = delta * delta <= self.base_limit and depth >= self.cfg.min_partition_steps
            if base or delta <= 1:
                entry["kind"] = "base"
                return early + self._base(sub, ids, pals, vm, key, entry)
            entry["kind"] = "internal"
            return early + self._split(sub, ids, pals, delta, depth, node_id, key, entry)
        finally:
            self.cl.free(load)

    def _base(self, sub, ids, pals, vm, key, entry) -> list:
        before = self.cl.rounds
        words = len(ids) + 2 * sub.num_edges + int(pals.size.sum())
        target = int(hash_machine(key, [0], self.cl.machines)[0])
        local = empty_coloring(len(ids))
        if words + self.cl.resident[target] <= self.cl.S:
            entry["solver"] = "gather"
            self.cl.round(vm, np.full(len(ids), target), 1 + pals.size + sub.degree, label="gather")
            one = np.zeros(self.cl.machines, dtype=np.int64)
            one[target] = words
            self.cl.allocate(one)
            failed = greedy_fill(sub, pals, local, range(len(ids)), strict=False)
            self.cl.free(one)
            self.cl.round(np.full(len(ids), target), vm, 1, label="scatter")
        else:
            entry["solver"] = "local-minimum"
            failed = self._local_minimum(sub, pals, local, vm)
        self.colors[ids] = local
        self.trace.base_rounds += self.cl.rounds - before
        entry["spilled"] = len(failed)
        return ids[np.asarray(failed, dtype=np.int64)].tolist()

    def _local_minimum(self, sub, pals, local, vm) -> list:
        """Rounds in which every uncolored vertex with no smaller uncolored neighbor picks a color.

        This yields exactly the ascending sequential greedy coloring.
        """
        n = sub.n
        pending = np.ones(n, dtype=bool)
        e = sub.edges()
        failed = []
        while pending.any():
            if len(e):
                blocked = np.zeros(n, dtype=bool)
                both = pending[e[:, 0]] & pending[e[:, 1]]
                blocked[e[both, 1]] = True     # larger endpoint waits
                ready = np.nonzero(pending & ~blocked)[0]
            else:
                ready = np.nonzero(pending)[0]
            failed += greedy_fill(sub, pals, local, ready.tolist(), strict=False)
            pending[ready] = False
            # newly fixed vertices tell their neighbors
            deg = sub.degree[ready]
            owner = np.repeat(ready, deg)
            pos = np.arange(int(deg.sum())) - np.repeat(np.cumsum(deg) - deg, deg) + np.repeat(sub.indptr[ready], deg)
            self.cl.round(vm[owner], vm[sub.indices[pos]], 1, label="local-minimum")
        return sorted(failed)

    def _split(self, sub, ids, pals, delta, depth, node_id, key, entry) -> list:
        cfg = self.cfg
        params = derive_params(delta, self.inst.n, cfg.gamma, cfg.c_q, cfg.c_min, cfg.slack)
        rng = np.random.default_rng(key)
        outcome = partition_instance(ListColoringInstance(sub, pals), params, rng, check=False)
        entry.update({"k": params.k, "q": params.q})
        self.cl.broadcast(2 * outcome.seed.K, label="seed")
        label = outcome.vertex_part
        k = params.k
        in_part = outcome.color_part_of(pals.colors) == label[pals.owners()]
        spill = []
        for i in range(k):
            members = np.nonzero(label == i)[0]
            child_pals = pals.subset(members).filter(in_part[_rows(pals, members)])
            spill += self.node(ids[members], child_pals, depth + 1, f"B{i + 1}", node_id)
        left = np.nonzero(label == k)[0]
        l_ids = np.union1d(ids[left], np.asarray(spill, dtype=np.int64))
        rows = np.searchsorted(ids, l_ids)
        entry["spilled"] = len(spill)
        return self.node(l_ids, pals.subset(rows), depth + 1, "L", node_id)


def _rows(pals: Palettes, members: np.ndarray) -> np.ndarray:
    """Flat positions of the palette entries of ``members``, in order."""
    start = pals.ptr[members]
    size = pals.ptr[members + 1] - start
    return np.arange(int(size.sum())) - np.repeat(np.cumsum(size) - size, size) + np.repeat(start, size)


def run_mpc_coloring(instance: ListColoringInstance, alpha: float = 0.5, config: Optional[MpcConfig] = None,
                     seed: int = 0):
    """Recursive partition coloring under per-machine memory n^alpha * c_mem.

    Returns (colors, trace).
    """
    cfg = config or MpcConfig(alpha=alpha)
    cfg.alpha = alpha
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    g, pals = instance.graph, instance.palettes
    n = instance.n
    if cfg.check_palettes and n:
        floor = np.maximum(g.degree + 1, mpc_palette_floor(g.max_degree))
        if np.any(pals.size < floor):
            raise InvalidInstance("palettes below max(deg+1, Δ-Δ^(3/5))")
    input_words = n + 2 * g.num_edges + int(pals.size.sum())
    # input shard plus the recursion stack must fit
    cluster = MpcCluster(n, alpha, cfg.c_mem, input_words=input_words, machine_slack=cfg.machine_slack)
    shard = shard_graph(g, cluster, 0, pals)
    cluster.allocate(shard["load"])
    runner = _Runner(instance, cfg, seed, cluster)
    leftover = runner.node(np.arange(n, dtype=np.int64), pals, 0, "root", -1)
    assert not leftover, "root recursion left vertices uncolored"
    colors = runner.colors
    assert np.all(palette_membership(pals, np.arange(n), colors)), "color outside the original palette"
    tr = runner.trace
    tr.rounds = cluster.rounds
    tr.peak_memory = cluster.peak.tolist()
    tr.total_peak = int(cluster.peak.sum())
    return colors, tr
