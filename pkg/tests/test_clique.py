import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from colorsim.clique import (CliqueConfig, CliqueNetwork, RoutingRequest, SimulationTask, ball,
                             highdeg_threshold, lenzen_route, opportunistic_simulate, route_batched,
                             run_clique_coloring, run_highdeg_coloring, run_local_direct,
                             run_lowdeg_coloring)
from colorsim.errors import DegreeTooLow, OverloadedVertex, UnresolvedVertices
from colorsim.graph import (Graph, ListColoringInstance, Palettes, gnp, palette_membership,
                            validate_coloring)


def random_palettes(g, rng, extra=0):
    size = g.max_degree + 1 + extra
    universe = 2 * size
    return Palettes.from_lists([np.sort(rng.choice(universe, size, replace=False)) for _ in range(g.n)])


def test_single_word_costs_two_rounds():
    net = CliqueNetwork(8)
    assert lenzen_route(net, [RoutingRequest(0, 5, 1)]) == 2
    assert net.rounds == 2
    assert net.ledger[-1]["words"] == 1


def test_all_to_all_within_cap():
    n = 30
    net = CliqueNetwork(n)
    reqs = [RoutingRequest(u, v, 1) for u in range(n) for v in range(n) if u != v]
    assert lenzen_route(net, reqs) == 2
    assert net.ledger[-1]["maxSent"] == n - 1 and net.ledger[-1]["maxReceived"] == n - 1


def test_overloaded_destination():
    n = 10
    net = CliqueNetwork(n, c_L=4)
    with pytest.raises(OverloadedVertex) as exc:
        lenzen_route(net, [RoutingRequest(u, 0, 5) for u in range(n)])
    assert exc.value.vertex == 0 and exc.value.words == 5 * n
    assert net.rounds == 0


def test_payload_must_be_positive():
    with pytest.raises(ValueError):
        RoutingRequest(0, 1, 0)


def test_batched_routing_charges_multiple_batches():
    n = 10
    net = CliqueNetwork(n, c_L=4)
    assert route_batched(net, ([1] * n, [0] * n, [9] * n)) == 2 * math.ceil(90 / 40)


@given(st.integers(2, 40), st.lists(st.tuples(st.integers(0, 39), st.integers(0, 39), st.integers(1, 5)),
                                    max_size=60))
def test_ledger_conservation_and_monotone_rounds(n, triples):
    net = CliqueNetwork(n)
    triples = [(a % n, b % n, w) for a, b, w in triples]
    before = net.rounds
    route_batched(net, ([t[0] for t in triples], [t[1] for t in triples], [t[2] for t in triples]))
    assert net.rounds >= before
    assert net.words == sum(t[2] for t in triples)
    for e in net.ledger:
        assert e["maxSent"] <= e["batches"] * net.cap and e["maxReceived"] <= e["batches"] * net.cap


def test_direct_round_rejects_double_send():
    net = CliqueNetwork(4)
    assert net.direct_round([0, 1], [1, 0]) == 1
    with pytest.raises(OverloadedVertex):
        net.direct_round([0, 0], [1, 1])


def test_highdeg_base_case_depth_zero():
    g = Graph.from_edges(20, [(i, i + 1) for i in range(19)])
    inst = ListColoringInstance.with_uniform_palettes(g)
    colors, trace = run_highdeg_coloring(inst, seed=1)
    assert validate_coloring(inst, colors).total
    assert trace.depth == 0 or trace.per_level[0]["vertices"] == 20
    assert len(trace.per_level) <= 1


def test_highdeg_rejects_low_degree():
    n = 3000
    g = gnp(n, 40 / n, seed=0)
    assert 8 < g.max_degree < highdeg_threshold(n, 0.02, 0.1)
    with pytest.raises(DegreeTooLow):
        run_highdeg_coloring(ListColoringInstance.with_uniform_palettes(g), seed=0)


def test_highdeg_seeded_instances():
    rng = np.random.default_rng(0)
    for s in range(1000):
        n = int(rng.integers(60, 200))
        g = gnp(n, float(rng.uniform(0.1, 0.5)), seed=s)
        inst = ListColoringInstance(g, random_palettes(g, rng))
        colors, trace = run_highdeg_coloring(inst, seed=s)
        rep = validate_coloring(inst, colors)
        assert rep.total, (s, rep.to_dict())
        assert palette_membership(inst.palettes, np.arange(n), colors).all()
        deltas = [lv["delta"] for lv in trace.per_level]
        assert deltas == sorted(deltas, reverse=True) and len(set(deltas)) == len(deltas)


def test_highdeg_recursion_levels():
    g = gnp(4000, 0.1, seed=2)
    inst = ListColoringInstance.with_uniform_palettes(g)
    colors, trace = run_highdeg_coloring(inst, seed=2)
    assert validate_coloring(inst, colors).total
    assert trace.depth >= 1
    d = trace.to_dict()
    assert d["model"] == "clique" and d["rounds"] == trace.rounds > 0
    assert all({"delta", "vertices", "words"} <= set(lv) for lv in d["perLevel"])


def test_lowdeg_path_valid_and_reports():
    g = gnp(3000, 16 / 3000, seed=4)
    inst = ListColoringInstance(g, random_palettes(g, np.random.default_rng(4), extra=g.max_degree))
    colors, trace = run_lowdeg_coloring(inst, seed=4)
    assert validate_coloring(inst, colors).total
    d = trace.to_dict()
    assert d["path"] == "low-degree" and "badSet" in d


def test_dispatch():
    g = gnp(2000, 20 / 2000, seed=5)
    inst = ListColoringInstance.with_uniform_palettes(g)
    colors, trace = run_clique_coloring(inst, seed=5)
    assert trace.extra["path"] == "low-degree"
    assert validate_coloring(inst, colors).total
    g = gnp(500, 0.3, seed=5)
    inst = ListColoringInstance.with_uniform_palettes(g)
    colors, trace = run_clique_coloring(inst, seed=5)
    assert trace.extra["path"] == "high-degree"
    assert validate_coloring(inst, colors).total


def matching(n):
    return [[v ^ 1] if (v ^ 1) < n else [] for v in range(n)]


def summing_task(nstar, inputs, tau, p=None):
    return SimulationTask(nstar, inputs, tau, lambda u, view: sum(view.values()),
                          ell_in_bits=8, ell_out_bits=4, p=p)


def test_ball():
    nstar = [[1], [2], [3], []]
    assert ball(nstar, 0, 0) == [0]
    assert ball(nstar, 0, 2) == [0, 1, 2]


def test_tau_zero_resolves_locally():
    rng = np.random.default_rng(0)
    task = summing_task(matching(50), list(range(50)), 0)
    res = opportunistic_simulate(CliqueNetwork(50), task, rng)
    assert res.unresolved == [] and res.outputs == list(range(50))
    assert np.array_equal(res.resolver, np.arange(50))


@given(st.integers(1, 25), st.integers(0, 3), st.data())
def test_full_probability_matches_direct(n, tau, data):
    nstar = [sorted(data.draw(st.sets(st.integers(0, n - 1), max_size=3)) - {v}) for v in range(n)]
    inputs = data.draw(st.lists(st.integers(0, 100), min_size=n, max_size=n))
    task = summing_task(nstar, inputs, tau, p=1.0)
    res = opportunistic_simulate(CliqueNetwork(n), task, np.random.default_rng(0))
    assert res.unresolved == []
    assert res.outputs == run_local_direct(task)


def test_unresolved_is_surfaced():
    n = 40
    nstar = [[(v + 1) % n] for v in range(n)]
    task = summing_task(nstar, [1] * n, 2, p=1e-9)
    with pytest.raises(UnresolvedVertices) as exc:
        opportunistic_simulate(CliqueNetwork(n), task, np.random.default_rng(1))
    assert exc.value.unresolved == set(range(n))
    res = opportunistic_simulate(CliqueNetwork(n), task, np.random.default_rng(1), strict=False)
    assert len(res.unresolved) == n


def test_output_length_checked():
    with pytest.raises(ValueError):
        SimulationTask([[]] * 16, [0] * 16, 1, lambda u, v: 0, ell_in_bits=1, ell_out_bits=1000)


def test_monte_carlo_unresolved_fraction():
    n = 4096
    nstar = matching(n)
    fractions = []
    for s in range(50):
        task = summing_task(nstar, [1] * n, 1)
        res = opportunistic_simulate(CliqueNetwork(n), task, np.random.default_rng(s), strict=False)
        assert res.p == pytest.approx(0.5 / (1 + 8 / 12))
        fractions.append(len(res.unresolved) / n)
    assert max(fractions) <= 0.01
