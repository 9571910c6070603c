"""Random partition of vertices into B_1..B_k, L and of colors into C_1..C_k.

Each vertex goes to the leftover set L with probability q and otherwise to a
uniformly random B_i. Colors are split by a K-wise independent hash so the
whole color partition is described by a short seed. The verifier turns the
four guarantees of the construction into concrete inequalities with
configurable slack factors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import DegreeTooLow, ParameterError
from .graph import ListColoringInstance
from .kwise import KWiseSeed, default_independence, kwise_eval_many, next_prime, sample_seed


def lambda_for(gamma: float) -> float:
    return 0.5 + 2.0 / (3.0 * gamma + 2.0)


@dataclass(frozen=True)
class Slack:
    """Multiplicative slack applied to the O(.)-style bounds."""
    edges: float = 4.0
    leftover: float = 4.0
    part_degree: float = 4.0
    leftover_degree: float = 4.0
    vertex_degree: float = 4.0


@dataclass(frozen=True)
class PartitionParams:
    gamma: float
    lam: float
    q: float
    k: int
    p: float
    original_n: int
    delta: int
    c_q: float = 3.0
    c_min: float = 1.0
    slack: Slack = field(default_factory=Slack)

    def __post_init__(self):
        if self.gamma < 2:
            raise ParameterError("gamma must be at least 2")
        if abs(self.lam - lambda_for(self.gamma)) > 1e-12:
            raise ParameterError("lambda must equal 1/2 + 2/(3 gamma + 2)")
        if not 0.0 <= self.q <= 1.0:
            raise ParameterError("q must lie in [0, 1]")
        if self.k < 1:
            raise ParameterError("k must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


def derive_params(delta: int, original_n: int, gamma: float = 2.0, c_q: float = 3.0,
                  c_min: float = 1.0, slack: Optional[Slack] = None,
                  q: Optional[float] = None, k: Optional[int] = None) -> PartitionParams:
    """k = floor(sqrt(Δ)), q = min(1, c_q sqrt(ln n) / Δ^(1/4)).

    ``q`` and ``k`` may be forced for degenerate experiments.
    """
    if delta < 0 or original_n < 2:
        raise ParameterError("need Δ >= 0 and originalN >= 2")
    if k is None:
        k = max(1, math.isqrt(int(delta)))
    if q is None:
        q = 1.0 if delta == 0 else min(1.0, c_q * math.sqrt(math.log(original_n)) / delta ** 0.25)
    return PartitionParams(gamma=gamma, lam=lambda_for(gamma), q=float(q), k=int(k), p=1.0 / k,
                           original_n=int(original_n), delta=int(delta), c_q=c_q, c_min=c_min,
                           slack=slack or Slack())


def degree_threshold(params: PartitionParams) -> float:
    return params.c_min * math.log(params.original_n) ** params.gamma


@dataclass
class PartitionOutcome:
    params: PartitionParams
    vertex_part: np.ndarray       # label in 0..k-1 for B_i, k for L
    universe: np.ndarray          # sorted distinct colors of the instance
    color_part: np.ndarray        # part of universe[j]
    seed: KWiseSeed
    own_degree: np.ndarray        # degree inside the vertex's own part
    g: np.ndarray                 # g_i(v) for v in B_i, g_L(v) for v in L
    delta_parts: np.ndarray       # max induced degree of each B_i
    delta_leftover: int

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def leftover(self) -> np.ndarray:
        return np.nonzero(self.vertex_part == self.k)[0]

    def part(self, i: int) -> np.ndarray:
        return np.nonzero(self.vertex_part == i)[0]

    def color_class(self, i: int) -> np.ndarray:
        return self.universe[self.color_part == i]

    def color_part_of(self, colors) -> np.ndarray:
        return self.color_part[np.searchsorted(self.universe, colors)]


def _own_part_degree(instance: ListColoringInstance, label: np.ndarray) -> np.ndarray:
    e = instance.graph.edges()
    deg = np.zeros(instance.n, dtype=np.int64)
    if len(e):
        same = label[e[:, 0]] == label[e[:, 1]]
        deg += np.bincount(e[same, 0], minlength=instance.n)
        deg += np.bincount(e[same, 1], minlength=instance.n)
    return deg


def assemble_outcome(instance: ListColoringInstance, params: PartitionParams,
                     vertex_part: np.ndarray, seed: KWiseSeed) -> PartitionOutcome:
    """Derive degrees and available-color counts for given labels."""
    k = params.k
    pal = instance.palettes
    universe = pal.universe()
    color_part = kwise_eval_many(seed, universe, k)
    own = _own_part_degree(instance, vertex_part)
    owners = pal.owners()
    cp = color_part[np.searchsorted(universe, pal.colors)] if len(pal.colors) else np.zeros(0, np.int64)
    match = cp == vertex_part[owners]
    g = np.bincount(owners[match], minlength=instance.n).astype(np.int64)
    in_l = vertex_part == k
    g[in_l] = pal.size[in_l] - (instance.graph.degree[in_l] - own[in_l])
    delta_parts = np.zeros(k, dtype=np.int64)
    in_b = ~in_l
    if np.any(in_b):
        np.maximum.at(delta_parts, vertex_part[in_b], own[in_b])
    delta_l = int(own[in_l].max()) if np.any(in_l) else 0
    return PartitionOutcome(params, vertex_part, universe, color_part, seed, own, g,
                            delta_parts, delta_l)


def partition_instance(instance: ListColoringInstance, params: PartitionParams,
                       rng: np.random.Generator, check: bool = True) -> PartitionOutcome:
    """Sample vertex labels and a K-wise color split."""
    delta = instance.graph.max_degree
    if check:
        need = degree_threshold(params)
        if delta < need:
            raise DegreeTooLow(f"Δ={delta} below c_min*ln(n)^gamma = {need:.1f}")
        if instance.n <= delta:
            raise DegreeTooLow(f"|V|={instance.n} must exceed Δ={delta}")
    k = params.k
    in_l = rng.random(instance.n) < params.q
    label = rng.integers(0, k, size=instance.n)
    label[in_l] = k
    top = int(instance.palettes.colors.max(initial=0))
    modulus = next_prime(max(2 ** 16 * k, top + 1))
    seed = sample_seed(default_independence(params.original_n), modulus, rng)
    return assemble_outcome(instance, params, label.astype(np.int64), seed)


@dataclass
class PropertyEntry:
    name: str
    part: str
    measured: float
    bound: float
    passed: bool

    @property
    def family(self) -> str:
        return self.name.split(".")[0]

    def to_dict(self) -> dict:
        return {"name": self.name, "part": self.part, "measured": float(self.measured),
                "bound": float(self.bound), "pass": bool(self.passed)}


@dataclass
class PropertyReport:
    entries: list

    def family_passed(self, family: str) -> bool:
        return all(e.passed for e in self.entries if e.family == family)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_list(self) -> list:
        return [e.to_dict() for e in self.entries]


def _palette_margin(g, own, delta_part, lam):
    """Smallest g(v) - (max{deg(v), Δ - Δ^λ} + 1) over the part."""
    if len(g) == 0:
        return 0.0
    need = np.maximum(own, delta_part - delta_part ** lam) + 1
    return float(np.min(g - need))


def verify_partition_properties(instance: ListColoringInstance, outcome: PartitionOutcome) -> PropertyReport:
    """Check properties i-iv of the partition.

    Bounds stated up to constants get the slack factors; the palette
    inequalities ii and iii are exact.
    """
    prm = outcome.params
    s = prm.slack
    n_v = instance.n
    delta = instance.graph.max_degree
    log_n = math.log(prm.original_n)
    deg = instance.graph.degree
    label = outcome.vertex_part
    e = instance.graph.edges()
    entries = []

    same = label[e[:, 0]] == label[e[:, 1]] if len(e) else np.zeros(0, bool)
    part_edges = np.bincount(label[e[same, 0]], minlength=prm.k + 1) if len(e) else np.zeros(prm.k + 1, np.int64)
    for i in range(prm.k):
        members = label == i
        name = f"B{i + 1}"
        entries.append(PropertyEntry("i.edges", name, int(part_edges[i]), s.edges * n_v,
                                     part_edges[i] <= s.edges * n_v))
        margin = _palette_margin(outcome.g[members], outcome.own_degree[members],
                                 float(outcome.delta_parts[i]), prm.lam)
        entries.append(PropertyEntry("ii", name, margin, 0.0, margin >= 0))
        bound = s.part_degree * math.sqrt(delta)
        entries.append(PropertyEntry("iv.maxdeg", name, int(outcome.delta_parts[i]), bound,
                                     outcome.delta_parts[i] <= bound))
        if np.any(members):
            cap = s.vertex_degree * np.maximum(log_n, deg[members] / math.sqrt(max(delta, 1)))
            ratio = float(np.max(outcome.own_degree[members] / cap))
        else:
            ratio = 0.0
        entries.append(PropertyEntry("iv.vertex", name, ratio, 1.0, ratio <= 1.0))

    in_l = label == prm.k
    size_l = int(np.sum(in_l))
    bound_l = s.leftover * prm.q * n_v
    entries.append(PropertyEntry("i.size", "L", size_l, bound_l, size_l <= max(bound_l, 0)))
    margin = _palette_margin(outcome.g[in_l], outcome.own_degree[in_l], float(outcome.delta_leftover), prm.lam)
    entries.append(PropertyEntry("iii", "L", margin, 0.0, margin >= 0))
    bound = s.leftover_degree * prm.q * delta
    entries.append(PropertyEntry("iv.maxdeg", "L", outcome.delta_leftover, bound,
                                 outcome.delta_leftover <= bound))
    if np.any(in_l):
        cap = s.vertex_degree * np.maximum(log_n, prm.q * deg[in_l])
        ratio = float(np.max(outcome.own_degree[in_l] / cap))
    else:
        ratio = 0.0
    entries.append(PropertyEntry("iv.vertex", "L", ratio, 1.0, ratio <= 1.0))
    return PropertyReport(entries)
