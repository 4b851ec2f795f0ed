import math
import random
from collections import Counter

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import euclid_graph
from msqferry.cycles import assign_cycles
from msqferry.errors import SameNode, Unreachable
from msqferry.geometry import edge_key, hexagon, init_triangulation, subdivide_face
from msqferry.routing import (DamageSet, ServiceGraph, enumerate_equal_shortest, find_dag, greedy_route, route,
                              spanner_ratio)


def mid(net, a, b):
    return net.midpoints[edge_key(a, b)]


def check_walk(net, r, damage=None):
    damage = damage or DamageSet()
    assert r.nodes[0] == r.source and r.nodes[-1] == r.terminal
    assert len(set(r.directed_edges)) == len(r.directed_edges)
    for a, b in r.directed_edges:
        assert edge_key(a, b) in net.edges and edge_key(a, b) not in damage.removed_edges
        assert a not in damage.failed_nodes and b not in damage.failed_nodes
    assert r.length == pytest.approx(sum(net.distance(a, b) for a, b in r.directed_edges))


def test_adjacent_corners(single):
    plan = assign_cycles(single, "mixed")
    r = route(single, plan, 0, 1)
    assert r.nodes == [0, 1] and r.length == pytest.approx(1.0)
    assert spanner_ratio(single, 0, 1) == pytest.approx(1.0)
    assert len(r.cycle_trace) == 1 and r.cycle_trace[0] in plan.serving[(0, 1)]


def test_parent_corners_via_midpoint(subdivided):
    plan = assign_cycles(subdivided, "mixed")
    r = route(subdivided, plan, 0, 1)
    assert r.nodes == [0, mid(subdivided, 0, 1), 1]
    assert r.length == pytest.approx(nx.dijkstra_path_length(euclid_graph(subdivided), 0, 1))
    assert spanner_ratio(subdivided, 0, 1, plan) == pytest.approx(1.0)
    # a straight side has a single shortest route
    assert len(enumerate_equal_shortest(subdivided, 0, 1)) == 1


def test_failed_midpoint_detour(subdivided):
    plan = assign_cycles(subdivided, "mixed")
    m = mid(subdivided, 0, 1)
    dmg = DamageSet(failed_nodes={m})
    r = route(subdivided, plan, 0, 1, dmg)
    check_walk(subdivided, r, dmg)
    oracle = nx.dijkstra_path_length(euclid_graph(subdivided, {m}), 0, 1)
    assert r.length == pytest.approx(oracle) == pytest.approx(1.5)
    assert r.length / subdivided.distance(0, 1) <= 2.0


def test_two_equal_routes_to_opposite_midpoint(subdivided):
    t = mid(subdivided, 1, 2)
    routes = enumerate_equal_shortest(subdivided, 0, t)
    assert sorted(r.nodes for r in routes) == sorted([[0, mid(subdivided, 0, 1), t],
                                                      [0, mid(subdivided, 0, 2), t]])
    assert all(r.length == pytest.approx(1.0) for r in routes)
    shares = find_dag(ServiceGraph(subdivided), 0, t).edge_shares()
    assert sorted(shares.values()) == pytest.approx([0.5] * 4)


def test_tie_break_uniform_and_seeded(subdivided):
    plan = assign_cycles(subdivided, "mixed")
    t = mid(subdivided, 1, 2)
    rng = random.Random(4)
    seen = Counter(tuple(route(subdivided, plan, 0, t, rng=rng).nodes) for _ in range(4000))
    assert len(seen) == 2
    assert abs(seen.most_common()[0][1] / 4000 - 0.5) < 0.03
    a = [route(subdivided, plan, 0, t, rng=random.Random(11)).nodes for _ in range(5)]
    assert all(x == a[0] for x in a)


def test_errors(subdivided):
    plan = assign_cycles(subdivided, "mixed")
    with pytest.raises(SameNode):
        route(subdivided, plan, 2, 2)
    cut = DamageSet(failed_nodes={mid(subdivided, 0, 1), mid(subdivided, 0, 2)})
    with pytest.raises(Unreachable):
        route(subdivided, plan, 0, 1, cut)
    with pytest.raises(Unreachable):
        enumerate_equal_shortest(subdivided, 0, 1, cut)


def test_random_pairs_match_oracle(net120):
    plan = assign_cycles(net120, "mixed")
    g = euclid_graph(net120)
    graph = ServiceGraph(net120, plan)
    rng = random.Random(7)
    ids = sorted(net120.nodes)
    for _ in range(150):
        s, t = rng.sample(ids, 2)
        r = route(net120, plan, s, t, rng=rng, graph=graph)
        check_walk(net120, r)
        assert r.length == pytest.approx(nx.dijkstra_path_length(g, s, t), rel=1e-12)
        st_ = net120.distance(s, t)
        inside = [v for v in ids if net120.distance(s, v) + net120.distance(v, t) <= 2 * st_ * (1 + 1e-12)]
        assert r.length == pytest.approx(nx.dijkstra_path_length(g.subgraph(inside), s, t), rel=1e-12)
        assert r.length <= 2 * st_ * (1 + 1e-9)
        assert all(slot in plan.serving[de] for slot, de in zip(r.cycle_trace, r.directed_edges))


def test_edge_shares_match_enumeration(net120):
    rng = random.Random(3)
    ids = sorted(net120.nodes)
    graph = ServiceGraph(net120)
    for _ in range(40):
        s, t = rng.sample(ids, 2)
        dag = find_dag(graph, s, t)
        paths = dag.enumerate()
        count = Counter(e for p in paths for e in zip(p, p[1:]))
        shares = dag.edge_shares()
        assert set(shares) == set(count)
        for e, c in count.items():
            assert shares[e] == pytest.approx(c / len(paths))
        # unit flow leaves s and arrives at t
        net_out = Counter()
        for (a, b), x in shares.items():
            net_out[a] += x
            net_out[b] -= x
        assert net_out[s] == pytest.approx(1.0) and net_out[t] == pytest.approx(-1.0)


def test_greedy_reaches_terminal_undamaged(net120):
    graph = ServiceGraph(net120)
    rng = random.Random(1)
    ids = sorted(net120.nodes)
    for _ in range(100):
        s, t = rng.sample(ids, 2)
        path = greedy_route(graph, s, t)
        assert path[0] == s and path[-1] == t
        assert all(edge_key(a, b) in net120.edges for a, b in zip(path, path[1:]))


def test_local_mode_falls_back_to_greedy(subdivided):
    # a far detour lies outside both ellipses, so only greedy forwarding can answer
    m = mid(subdivided, 0, 1)
    dmg = DamageSet(failed_nodes={m})
    r = route(subdivided, None, 0, 1, dmg, exhaustive=False)
    check_walk(subdivided, r, dmg)


def _damaged_instance(picks, cuts, fails):
    net = init_triangulation(hexagon())
    for p in picks:
        leaves = net.leaf_faces()
        subdivide_face(net, leaves[p % len(leaves)])
    edges = sorted(net.edges)
    ids = sorted(net.nodes)
    dmg = DamageSet({edges[c % len(edges)] for c in cuts}, {ids[f % len(ids)] for f in fails})
    return net, dmg


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 999), max_size=8), st.lists(st.integers(0, 999), max_size=8),
       st.lists(st.integers(0, 999), max_size=2), st.integers(0, 999), st.integers(0, 999))
def test_liveness_under_damage(picks, cuts, fails, si, ti):
    net, dmg = _damaged_instance(picks, cuts, fails)
    alive = [n for n in sorted(net.nodes) if n not in dmg.failed_nodes]
    s, t = alive[si % len(alive)], alive[ti % len(alive)]
    if s == t:
        return
    g = euclid_graph(net, dmg.failed_nodes)
    g.remove_edges_from(dmg.removed_edges)
    plan = assign_cycles(net, "mixed")
    if nx.has_path(g, s, t):
        r = route(net, plan, s, t, dmg)
        check_walk(net, r, dmg)
        assert r.length == pytest.approx(nx.dijkstra_path_length(g, s, t), rel=1e-12)
    else:
        with pytest.raises(Unreachable):
            route(net, plan, s, t, dmg)


def test_service_graph_drops_unserved_direction(subdivided):
    plan = assign_cycles(subdivided, "mixed")
    keep = {c: cyc for c, cyc in plan.cycles.items() if cyc.face != 1}
    from msqferry.cycles import CyclePlan
    partial = CyclePlan(plan.scheme, keep, plan.edges)
    graph = ServiceGraph(subdivided, partial)
    for a, b in subdivided.edges:
        faces = subdivided.edge_faces()[edge_key(a, b)]
        if faces == [1]:
            assert not graph.has_edge(a, b) and not graph.has_edge(b, a)
    # face 1 is the corner child at node 0, so node 0 loses all service
    with pytest.raises(Unreachable):
        find_dag(graph, 0, 2)
    assert math.isfinite(find_dag(graph, 1, 2).length)
