import numpy as np
import pytest

from colorsim.bidding import generate_good_instance, good_instance_from_list, sparsified_coloring
from colorsim.errors import InvalidInstance, QueryBudgetExceeded
from colorsim.graph import Graph, ListColoringInstance, Palettes, gnp, validate_coloring
from colorsim.lca import LcaConfig, LcaEngine, LcaOracle, lca_color, sweep
from colorsim.shattering import color_components


def global_colors(inst, seed, cfg=LcaConfig()):
    gi = good_instance_from_list(inst, cfg.C0, cfg.beta, cfg.p_star)
    res = sparsified_coloring(gi, seed)
    return color_components(inst, res.colors)


def star_instance():
    g = Graph.from_edges(6, [(0, 1), (0, 2), (0, 3)])
    return ListColoringInstance.with_uniform_palettes(g)


def test_neighbor_beyond_degree_is_bottom():
    o = LcaOracle(star_instance(), 1)
    assert o.neighbor_query(0, 4) is None
    assert o.neighbor_query(0, 0) is None
    assert [o.neighbor_query(0, i) for i in (1, 2, 3)] == [1, 2, 3]
    assert o.counters["neighbor"] == 5


def test_isolated_degree_zero():
    o = LcaOracle(star_instance(), 1)
    assert o.degree_query(5) == 0
    assert o.counters["degree"] == 1
    with pytest.raises(InvalidInstance):
        o.degree_query(6)


def test_randomness_deterministic():
    o = LcaOracle(star_instance(), 9)
    a = o.randomness(2, 0, 64)
    b = o.randomness(2, 0, 64)
    assert np.array_equal(a, b) and len(a) == 64
    assert not np.array_equal(a, LcaOracle(star_instance(), 10).randomness(2, 0, 64))
    assert o.counters["randomness"] == 2


def test_batched_probes_count_like_singles():
    inst = ListColoringInstance.with_uniform_palettes(gnp(100, 0.1, seed=0))
    a, b = LcaOracle(inst, 0), LcaOracle(inst, 0)
    vs = [3, 7, 7, 50]
    assert a.degree_many(vs) == [b.degree_query(v) for v in vs]
    assert all(np.array_equal(x, b.palette_query(v)) for x, v in zip(a.palette_many(vs), vs))
    assert a.neighbor_scan(3, 2) == [b.neighbor_query(3, 1), b.neighbor_query(3, 2)]
    bound = 40
    got = a.neighbor_scan_below(7, bound)
    want = []
    i = 1
    while True:
        w = b.neighbor_query(7, i)
        if w is None or w >= bound:
            break
        want.append(w)
        i += 1
    assert got == want
    assert a.counters == b.counters


def test_palette_read_only():
    o = LcaOracle(star_instance(), 0)
    with pytest.raises(ValueError):
        o.palette_query(0)[0] = 99


def test_isolated_vertex_cheap():
    inst = star_instance()
    ans = lca_color(LcaOracle(inst, 3), 5)
    assert ans.color in inst.palettes.of(5).tolist()
    assert ans.total <= 10
    assert ans.radius == 0


def test_edge_endpoints_differ():
    inst = ListColoringInstance.with_uniform_palettes(gnp(300, 0.05, seed=2))
    oracle = LcaOracle(inst, 5)
    for u, v in inst.graph.edges()[:30].tolist():
        assert lca_color(oracle, u).color != lca_color(oracle, v).color


def test_sweep_matches_global_on_good_instances():
    for s in range(4):
        gi = generate_good_instance(600, 16, 33, 8, 2.0, seed=s)
        inst = gi.as_list_instance()
        colors, answers = sweep(inst, s)
        assert validate_coloring(inst, colors).total
        assert np.array_equal(colors, global_colors(inst, s))
        for a in answers:
            deg = int(inst.graph.degree[a.vertex])
            if deg:
                assert a.total >= 1 + deg


def test_sweep_matches_global_on_plain_lists():
    for s in range(4):
        g = gnp(400, 12 / 400, seed=s)
        inst = ListColoringInstance.with_uniform_palettes(g, 8 * g.max_degree)
        colors, _ = sweep(inst, 100 + s)
        assert validate_coloring(inst, colors).total
        assert np.array_equal(colors, global_colors(inst, 100 + s))


def test_reuse_decoding_same_answers_and_counts():
    gi = generate_good_instance(500, 16, 33, 8, 2.0, seed=7)
    inst = gi.as_list_instance()
    c1, a1 = sweep(inst, 7)
    c2, a2 = sweep(inst, 7, LcaConfig(reuse_decoding=True))
    assert np.array_equal(c1, c2)
    assert [a.queries for a in a1] == [a.queries for a in a2]


def test_per_call_counts_do_not_depend_on_order():
    gi = generate_good_instance(300, 16, 33, 8, 2.0, seed=1)
    inst = gi.as_list_instance()
    eng = LcaEngine(LcaOracle(inst, 1))
    first = eng.color(17)
    for v in range(40):
        eng.color(v)
    assert eng.color(17) == first


def test_budget_exceeded():
    gi = generate_good_instance(300, 16, 33, 8, 2.0, seed=1)
    inst = gi.as_list_instance()
    v = int(np.argmax(inst.graph.degree))
    with pytest.raises(QueryBudgetExceeded) as exc:
        lca_color(LcaOracle(inst, 1), v, LcaConfig(c_query=1e-6))
    assert exc.value.vertex == v and exc.value.used > exc.value.cap


def test_sweep_matches_global_when_mostly_bad():
    g = gnp(80, 0.08, seed=3)
    inst = ListColoringInstance(g, Palettes.from_lists([range(int(d) + 1) for d in g.degree]))
    colors, answers = sweep(inst, 3)
    assert validate_coloring(inst, colors).total
    assert np.array_equal(colors, global_colors(inst, 3))
    assert any(a.component > 0 for a in answers)
