import math

import networkx as nx
import numpy as np
import pytest

from msqferry.geometry import generate, hexagon, init_triangulation, subdivide_face, unit_triangle

SQ3 = math.sqrt(3.0)


def two_triangles():
    return [[(0.0, 0.0), (1.0, 0.0), (0.5, SQ3 / 2)], [(1.0, 0.0), (1.5, SQ3 / 2), (0.5, SQ3 / 2)]]


def two_layer():
    net = init_triangulation(unit_triangle())
    subdivide_face(net, 0)
    for c in list(net.faces[0].children):
        subdivide_face(net, c)
    return net


def euclid_graph(network, removed_nodes=()):
    """networkx oracle graph: undirected, Euclidean edge weights."""
    g = nx.Graph()
    for n in network.nodes:
        if n not in removed_nodes:
            g.add_node(n)
    for a, b in network.edges:
        if a in removed_nodes or b in removed_nodes:
            continue
        g.add_edge(a, b, weight=network.distance(a, b))
    return g


def grid_argmin(slots, lo, hi, step=1e-7, coarse=20001):
    """Two-pass 1-D grid search: coarse over [lo, hi], then a fine grid of the given step."""
    w = np.array([s[0] for s in slots if s[0] > 0])[:, None]
    lam = np.array([s[1] for s in slots if s[0] > 0])[:, None]

    def g(xs):
        return (w / (xs[None, :] - lam)).sum(axis=0) + xs
    xs = np.linspace(lo, hi, coarse)
    i = int(g(xs).argmin())
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    fine = np.arange(a, b + step, step)
    return float(fine[int(g(fine).argmin())])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def single():
    return init_triangulation(unit_triangle())


@pytest.fixture
def subdivided():
    net = init_triangulation(unit_triangle())
    subdivide_face(net, 0)
    return net


@pytest.fixture
def layered():
    return two_layer()


@pytest.fixture(scope="session")
def net300():
    net = init_triangulation(hexagon())
    generate(net, None, 300, seed=2024)
    return net


@pytest.fixture(scope="session")
def net120():
    net = init_triangulation(hexagon())
    generate(net, None, 120, seed=5)
    return net


def optimized_config(network, plan, demands, **kwargs):
    """SimConfig with rates from the optimizer; cycles without traffic get zero."""
    from msqferry.queueing import optimize_rates, plan_flows
    from msqferry.sim import SimConfig
    sol = optimize_rates(*plan_flows(network, plan, demands))
    rates = {c: sol.mu.get(c, 0.0) for c in plan.cycles}
    return SimConfig(dict(demands), rates, **kwargs)
