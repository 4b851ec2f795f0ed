import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import two_triangles
from msqferry.cycles import (DirectionClass, Handedness, Scheme, assign_cycles, plan_from_dict, plan_to_dict,
                             serving_cycles)
from msqferry.errors import EmptyNetwork, UnknownEdge
from msqferry.geometry import FaceKind, Network, edge_key, hexagon, init_triangulation, subdivide_face, unit_triangle


def directed_leaf_edges(net):
    return {(a, b) for a, b in net.edges} | {(b, a) for a, b in net.edges}


def signed_area(net, nodes):
    pts = [net.position(n) for n in nodes]
    return sum(pts[i][0] * pts[(i + 1) % len(pts)][1] - pts[(i + 1) % len(pts)][0] * pts[i][1]
               for i in range(len(pts)))


def test_single_up_mixed(single):
    plan = assign_cycles(single, Scheme.MIXED)
    assert len(plan.cycles) == 2
    fwd = [c for c in plan.cycles.values() if c.cls is DirectionClass.FORWARD]
    bwd = [c for c in plan.cycles.values() if c.cls is DirectionClass.BACKWARD]
    assert fwd[0].handedness is Handedness.CLOCKWISE and bwd[0].handedness is Handedness.COUNTERCLOCKWISE
    assert signed_area(single, fwd[0].nodes) < 0 < signed_area(single, bwd[0].nodes)
    assert all(len(v) == 1 for v in plan.serving.values())
    assert set(plan.serving) == directed_leaf_edges(single)


def test_subdivided_mixed_interior_edges(subdivided):
    plan = assign_cycles(subdivided, "mixed")
    center = next(f.id for f in subdivided.faces.values() if f.kind is FaceKind.CENTER_CHILD)
    inner = {edge_key(*e) for e in zip(subdivided.faces[center].corners,
                                       subdivided.faces[center].corners[1:] + subdivided.faces[center].corners[:1])}
    for de, slots in plan.serving.items():
        if edge_key(*de) in inner:
            assert len(slots) == 2
            classes = {plan.cycles[c].cls for c, _ in slots}
            assert len(classes) == 1  # same class on both sides: the cycles mesh like gears
        else:
            assert len(slots) == 1


def test_subdivided_all_clockwise(subdivided):
    plan = assign_cycles(subdivided, "all-clockwise")
    perimeter = [c for c in plan.cycles.values() if c.face is None]
    assert len(perimeter) == 1
    per = perimeter[0]
    assert len(per.nodes) == 6 and signed_area(subdivided, per.nodes) > 0
    for de, slots in plan.serving.items():
        assert len(slots) == 1
    per_edges = set(per.directed_edges)
    for de in per_edges:
        assert plan.serving[de][0][0] == per.id


def test_serving_cycles_lookup(single):
    plan = assign_cycles(single, "mixed")
    assert len(serving_cycles(plan, (0, 1))) == 1
    assert serving_cycles(plan, (0, 1), -1) == serving_cycles(plan, (1, 0))
    with pytest.raises(UnknownEdge):
        serving_cycles(plan, (0, 99))


def test_opposite_orientation_interior_edge_mixed():
    net = init_triangulation(two_triangles())
    plan = assign_cycles(net, "mixed")
    fwd = [s for s in serving_cycles(plan, (1, 2)) if plan.cycles[s[0]].cls is DirectionClass.FORWARD]
    assert len(serving_cycles(plan, (1, 2))) == 2 and len(fwd) in (0, 2)


def test_slots_start_at_smallest_node(layered):
    plan = assign_cycles(layered, "mixed")
    for c in plan.cycles.values():
        assert c.nodes[0] == min(c.nodes)
        for k, de in enumerate(c.directed_edges, start=1):
            assert (c.id, k) in plan.serving[de]
            assert plan.slot_edge(c.id, k) == de


def test_empty_network():
    with pytest.raises(EmptyNetwork):
        assign_cycles(Network(), "mixed")


def test_plan_round_trip(layered):
    plan = assign_cycles(layered, "all-clockwise")
    back = plan_from_dict(plan_to_dict(plan))
    assert back.signatures() == plan.signatures()
    assert back.serving == plan.serving


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(0, 999), max_size=15), st.sampled_from(list(Scheme)))
def test_coverage_and_meshing(picks, scheme):
    net = init_triangulation(hexagon())
    for p in picks:
        leaves = net.leaf_faces()
        subdivide_face(net, leaves[p % len(leaves)])
    plan = assign_cycles(net, scheme)
    assert directed_leaf_edges(net) <= set(plan.serving)
    assert plan.signatures() == assign_cycles(net, scheme).signatures()
    edge_faces = net.edge_faces()
    for key, faces in edge_faces.items():
        if len(faces) != 2:
            continue
        a, b = key
        dirs = []
        for f in faces:
            c = next(c for c in plan.cycles.values() if c.face == f and c.cls is DirectionClass.FORWARD)
            dirs.append((a, b) in c.directed_edges)
        if scheme is Scheme.MIXED:
            assert dirs[0] == dirs[1]
        else:
            assert dirs[0] != dirs[1]
