import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from colorsim.errors import InvalidInstance, MemoryExceeded, ParameterError
from colorsim.graph import Graph, ListColoringInstance, Palettes, gnp, validate_coloring
from colorsim.mpc import (MpcCluster, MpcConfig, hash_machine, mpc_palette_floor, run_mpc_coloring,
                          shard_graph)

from strategies import graphs


def test_base_case_depth_zero():
    g = Graph.from_edges(100, [(i, i + 1) for i in range(99)])
    inst = ListColoringInstance.with_uniform_palettes(g)
    colors, trace = run_mpc_coloring(inst, 0.5, seed=0)
    assert validate_coloring(inst, colors).total
    assert trace.depth == 0 and trace.tree[0]["kind"] == "base"


def test_alpha_range():
    inst = ListColoringInstance.with_uniform_palettes(Graph.from_edges(3, [(0, 1)]))
    with pytest.raises(ParameterError):
        run_mpc_coloring(inst, 1.0)
    with pytest.raises(ParameterError):
        MpcCluster(10, 0.0)


def test_palette_floor_enforced():
    g = gnp(300, 0.3, seed=1)
    short = Palettes.from_lists([range(int(d) + 1) for d in g.degree])
    assert np.any(short.size < mpc_palette_floor(g.max_degree))
    with pytest.raises(InvalidInstance):
        run_mpc_coloring(ListColoringInstance(g, short), 0.5)


def test_one_machine_holds_everything():
    g = gnp(50, 0.2, seed=0)
    cl = MpcCluster(50, 0.5, c_mem=10 ** 4, machines=1)
    shard = shard_graph(g, cl, 7)
    assert set(shard["vertexMachine"].tolist()) <= {0} and set(shard["edgeMachine"].tolist()) <= {0}
    assert shard["load"].tolist() == [50 + 2 * g.num_edges]


def test_empty_graph_shards():
    g = Graph.from_edges(0, [])
    cl = MpcCluster(1, 0.5, machines=4)
    shard = shard_graph(g, cl, 1)
    assert shard["load"].tolist() == [0, 0, 0, 0] and len(shard["vertexMachine"]) == 0


def test_shard_overflow():
    g = gnp(200, 0.5, seed=0)
    cl = MpcCluster(200, 0.5, c_mem=1, machines=2)
    with pytest.raises(MemoryExceeded):
        shard_graph(g, cl, 0)


def test_shard_balance():
    g = gnp(10 ** 4, 20 / 10 ** 4, seed=3)
    cl = MpcCluster(10 ** 4, 0.5, c_mem=10 ** 4, machines=64)
    for s in range(20):
        load = shard_graph(g, cl, s)["load"]
        assert load.max() <= 2 * load.mean()


def test_hash_is_deterministic_and_spread():
    a = hash_machine(5, np.arange(10 ** 4), 16)
    assert np.array_equal(a, hash_machine(5, np.arange(10 ** 4), 16))
    assert not np.array_equal(a, hash_machine(6, np.arange(10 ** 4), 16))
    assert np.bincount(a, minlength=16).min() > 0


def test_round_and_broadcast_accounting():
    cl = MpcCluster(100, 0.5, c_mem=1, machines=50)   # S = 10
    assert cl.S == 10
    assert cl.round([0, 1], [2, 2], 5) == 1
    with pytest.raises(MemoryExceeded):
        cl.round([0, 1, 3], [2, 2, 2], 5)
    used = cl.broadcast(2)
    # fan-out S / words = 5 per holder: 1 -> 6 -> 36 -> 50
    assert used == 3
    with pytest.raises(MemoryExceeded):
        cl.allocate(np.full(50, 11))


def check_tree(trace):
    tree = trace.tree
    children = Counter(e["parent"] for e in tree)
    for e in tree:
        if e.get("kind") == "internal":
            assert children[e["id"]] == e["k"] + 1
            branches = sorted(c["branch"] for c in tree if c["parent"] == e["id"])
            assert branches == sorted([f"B{i + 1}" for i in range(e["k"])] + ["L"])
            assert e["k"] == max(1, math.isqrt(e["delta"]))
        else:
            assert children[e["id"]] == 0
    assert max(trace.peak_memory) <= trace.S


def test_seeded_runs_valid():
    for s in range(20):
        g = gnp(2000, 0.05, seed=s)
        inst = ListColoringInstance.with_uniform_palettes(g)
        colors, trace = run_mpc_coloring(inst, 0.5, seed=s)
        assert validate_coloring(inst, colors).total
        check_tree(trace)
        assert trace.depth >= 1
        d = trace.to_dict()
        assert d["model"] == "mpc" and d["rounds"] == trace.rounds
        assert {"delta", "vertices", "branch"} <= set(d["tree"][0])


def test_random_palettes_valid():
    rng = np.random.default_rng(2)
    g = gnp(1500, 0.06, seed=9)
    size = g.max_degree + 1
    pal = Palettes.from_lists([np.sort(rng.choice(3 * size, size, replace=False)) for _ in range(g.n)])
    inst = ListColoringInstance(g, pal)
    colors, trace = run_mpc_coloring(inst, 0.5, seed=1)
    assert validate_coloring(inst, colors).total
    check_tree(trace)


@settings(max_examples=30)
@given(graphs(max_n=40), st.integers(0, 1000))
def test_small_graphs_valid(g, seed):
    inst = ListColoringInstance.with_uniform_palettes(g)
    colors, trace = run_mpc_coloring(inst, 0.5, config=MpcConfig(c_mem=64), seed=seed)
    assert validate_coloring(inst, colors).total
