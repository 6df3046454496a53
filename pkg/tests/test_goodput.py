import random

import pytest
from hypothesis import given, settings, strategies as st

from p2ptv.goodput import (
    CycleDetected,
    NonConvergence,
    SolverSettings,
    solve,
    solve_acyclic_oracle,
)
from p2ptv.model import NodeClass, NodeRecord, OverlayGraph

from oracles import brute_force_batch, random_graph


def fig2_graph():
    g = OverlayGraph()
    for nid in range(1, 6):
        g.add_node(NodeRecord(nid, NodeClass.PEER, 1.0, 0.8, 8, 8))
    g.add_edge(3, 1)
    g.add_edge(3, 2)
    g.add_edge(4, 3)
    g.add_edge(5, 3)
    return g


FIG2_PINS = {1: 0.4, 2: 0.3}


def test_fig2_worked_example():
    out = solve(fig2_graph(), pinned=FIG2_PINS)
    assert out.dg[3] == pytest.approx(0.7, abs=1e-9)
    assert out.ug_per_conn[3] == pytest.approx(0.35, abs=1e-9)
    # nodes 4 and 5 each receive 0.35 from node 3
    assert out.dg[4] == pytest.approx(0.35, abs=1e-9)
    assert out.dg[5] == pytest.approx(0.35, abs=1e-9)


def test_fig2_oracle_agrees():
    g = fig2_graph()
    a, b = solve(g, pinned=FIG2_PINS), solve_acyclic_oracle(g, pinned=FIG2_PINS)
    for nid in g.nodes:
        assert a.dg[nid] == pytest.approx(b.dg[nid], abs=1e-9)
        assert a.ug_per_conn[nid] == pytest.approx(b.ug_per_conn[nid], abs=1e-9)


def test_isolated_source():
    g = OverlayGraph()
    g.add_node(NodeRecord(0, NodeClass.SOURCE, 1.0, 1.5, 8, 8))
    out = solve(g)
    assert out.dg == {0: 1.5} and out.ug_per_conn == {0: 0.0}


def test_empty_graph():
    out = solve(OverlayGraph())
    assert out.dg == {} and out.ug_per_conn == {}


def test_sourceless_two_cycle_is_zero():
    g = OverlayGraph()
    g.add_node(NodeRecord(1, NodeClass.PEER, 1.0, 0.8, 8, 8))
    g.add_node(NodeRecord(2, NodeClass.PEER, 1.0, 0.8, 8, 8))
    g.add_edge(1, 2)
    g.add_edge(2, 1)
    out = solve(g)
    ref = brute_force_batch([g], rounds=1000)[0]
    assert out.dg == {1: 0.0, 2: 0.0} == ref


def test_chain_is_clipped_by_dg_max():
    g = OverlayGraph()
    g.add_node(NodeRecord(0, NodeClass.SOURCE, 1.0, 1.5, 8, 8))
    g.add_node(NodeRecord(1, NodeClass.PEER, 1.0, 5.0, 8, 8))
    g.add_node(NodeRecord(2, NodeClass.PEER, 1.0, 0.9, 8, 8))
    g.add_edge(1, 0)
    g.add_edge(2, 1)
    # hand evaluation: p1 gets the whole 1.5, forwards it all, p2 clips at 0.9
    for out in (solve(g), solve_acyclic_oracle(g)):
        assert out.dg[1] == pytest.approx(1.5)
        assert out.dg[2] == pytest.approx(0.9)
        assert out.ug_per_conn[2] == 0.0


def test_oracle_rejects_cycles():
    g = OverlayGraph()
    for nid in (1, 2):
        g.add_node(NodeRecord(nid, NodeClass.PEER, 1.0, 0.8, 8, 8))
    g.add_edge(1, 2)
    g.add_edge(2, 1)
    with pytest.raises(CycleDetected):
        solve_acyclic_oracle(g)


def test_source_fed_cycle_matches_brute_force():
    g = OverlayGraph()
    g.add_node(NodeRecord(0, NodeClass.SOURCE, 1.0, 1.5, 8, 8))
    for nid, R in [(1, 0.9), (2, 0.8), (3, 0.95)]:
        g.add_node(NodeRecord(nid, NodeClass.PEER, R, 1.0, 8, 8))
    for a, i in [(1, 0), (2, 1), (3, 2), (1, 3), (3, 0)]:
        g.add_edge(a, i)
    ref = brute_force_batch([g])[0]
    out = solve(g)
    for nid in g.nodes:
        assert out.dg[nid] == pytest.approx(ref[nid], abs=1e-7)


def test_random_dags_match_topological_oracle():
    rng = random.Random(11)
    for _ in range(60):
        g = random_graph(rng, 10, acyclic=True)
        a, b = solve(g), solve_acyclic_oracle(g)
        for nid in g.nodes:
            assert a.dg[nid] == pytest.approx(b.dg[nid], abs=1e-7)
            assert a.ug_per_conn[nid] == pytest.approx(b.ug_per_conn[nid], abs=1e-7)


def test_nonconvergence_is_reported():
    # a lossy two-node loop with roomy caps approaches its limit geometrically
    g = OverlayGraph()
    g.add_node(NodeRecord(0, NodeClass.SOURCE, 1.0, 1.5, 8, 8))
    g.add_node(NodeRecord(1, NodeClass.PEER, 0.99, 1000.0, 8, 8))
    g.add_node(NodeRecord(2, NodeClass.PEER, 0.99, 1000.0, 8, 8))
    for a, i in [(1, 0), (2, 1), (1, 2)]:
        g.add_edge(a, i)
    with pytest.raises(NonConvergence):
        solve(g, SolverSettings(max_sweeps=5))
    out = solve(g)
    assert out.dg[1] == pytest.approx(1.5 / (1 - 0.99**2), rel=1e-6)


def test_offline_nodes_contribute_nothing():
    g = OverlayGraph()
    g.add_node(NodeRecord(0, NodeClass.SOURCE, 1.0, 1.5, 8, 8))
    g.add_node(NodeRecord(1, NodeClass.PEER, 1.0, 1.0, 8, 8))
    g.add_node(NodeRecord(2, NodeClass.PEER, 1.0, 1.0, 8, 8, suspended_until=30.0))
    g.add_edge(1, 0)
    out = solve(g)
    assert out.dg[2] == 0.0 and out.ug_per_conn[2] == 0.0
    assert out.dg[1] == 1.0


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.booleans())
def test_output_bounds_and_upload_identity(seed, size, acyclic):
    g = random_graph(random.Random(seed), size, acyclic=acyclic)
    out = solve(g, check_monotone=True)
    for nid, node in g.nodes.items():
        dg, ug = out.dg[nid], out.ug_per_conn[nid]
        assert 0.0 <= dg <= node.dg_max
        assert ug >= 0.0
        n = len(g.incoming[nid])
        if n == 0:
            assert ug == 0.0
        else:
            assert abs(ug * n - node.R * dg) <= 1e-12
        if node.cls is NodeClass.SOURCE:
            assert dg == node.dg_max


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 10), st.data())
def test_adding_an_edge_never_lowers_goodput_on_dags(seed, size, data):
    # Monotone in the edge set holds when the new edge does not split an
    # uploader's output further, so add edges only from an uploader with n = 0.
    rng = random.Random(seed)
    g = random_graph(rng, size, acyclic=True)
    idle = [i for i in g.nodes if not g.incoming[i]]
    downloaders = [a for a in g.nodes if g.nodes[a].cls is not NodeClass.SOURCE]
    pairs = [(a, i) for a in downloaders for i in idle if a != i and not g.has_edge(a, i)]
    if not pairs:
        return
    a, i = data.draw(st.sampled_from(pairs))
    before = solve(g).dg
    g.add_edge(a, i)
    after = solve(g).dg
    for nid in g.nodes:
        assert after[nid] >= before[nid] - 1e-12
