"""Acceptance suite: one test per criterion, each printing a single pass/fail line.

The lines are collected into the terminal summary so they appear under any
pytest verbosity.
"""
import json
import math
import random
import time
from contextlib import contextmanager

import networkx as nx
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, euclid_graph, grid_argmin
from msqferry.cli import (build_network, find_scenario, load_json, resolve_rates, run_scenario, scenario_config,
                          scenario_demands)
from msqferry.cycles import assign_cycles
from msqferry.geometry import (crossing_pairs, generate, hexagon, init_triangulation, is_equilateral,
                               triangle_strip, unit_triangle, validate)
from msqferry.queueing import delivery_cost, initial_rates, optimize_rates, plan_flows, solve_cycle
from msqferry.routing import ServiceGraph, route
from msqferry.sim import FerrySimulation, ScriptEvent

CHANGES = ("unify", "redivide", "ferry_replaced", "cycle_collapsed", "growth_complete")


@contextmanager
def criterion(n, title):
    """Time the body and record one summary line whatever the outcome."""
    box = {"detail": ""}
    t0 = time.perf_counter()
    ok = False
    try:
        yield box
        ok = True
    finally:
        dt = time.perf_counter() - t0
        line = f"acceptance {n} [{'PASS' if ok else 'FAIL'}] {title}: {box['detail']} ({dt:.2f} s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
    box["elapsed"] = dt


def scenario_sim(name, **overrides):
    doc = load_json(find_scenario(name))
    doc.update(overrides)
    seed = int(doc.get("seed", 0))
    net = build_network(doc["network"], find_scenario(name).parent, seed)
    plan = assign_cycles(net, doc.get("scheme", "mixed"))
    demands = scenario_demands(doc, net, seed)
    rates, _ = resolve_rates(doc.get("rates", "optimize"), plan, net, demands)
    cfg = scenario_config(doc, rates, demands, seed)
    return FerrySimulation(net, plan, cfg), cfg


# -- 1 ------------------------------------------------------------------------------
def test_1_single_edge_mm1(tmp_path):
    with criterion(1, "single-edge M/M/1 delay") as box:
        t0 = time.perf_counter()
        _, (m,) = run_scenario("eq1-single-edge", tmp_path)
        elapsed = time.perf_counter() - t0
        n = m.delays().size
        mean = m.mean_delay()
        box["detail"] = f"{n} deliveries, mean {mean:.4f} vs 2.0, sim {elapsed:.1f} s"
        assert n >= 100_000
        assert abs(mean - 2.0) <= 0.03 * 2.0
        assert elapsed < 30


# -- 2 ------------------------------------------------------------------------------
def test_2_tandem(tmp_path):
    with criterion(2, "three-stage tandem delay") as box:
        target = 1 / 1.5 + 1 / 2.5 + 1 / 1.5
        t0 = time.perf_counter()
        _, (m,) = run_scenario("fig6-tandem", tmp_path)
        elapsed = time.perf_counter() - t0
        mean = m.mean_delay()
        hops = {r.hops for r in m.messages if r.status == "delivered"}
        box["detail"] = f"{m.delays().size} deliveries, mean {mean:.4f} vs {target:.4f}, sim {elapsed:.1f} s"
        assert hops == {3}
        assert abs(mean - target) <= 0.03 * target
        assert elapsed < 60


# -- 3 ------------------------------------------------------------------------------
def test_3_optimizer_against_grid():
    with criterion(3, "per-cycle optimizer vs grid oracle") as box:
        rng = np.random.default_rng(303)
        worst, solve_time, n = 0.0, 0.0, 0
        while n < 100:
            w = rng.uniform(0, 10, 3)
            lam = rng.uniform(0, 10, 3)
            slots = list(zip(w.tolist(), lam.tolist()))
            floor = max(lam)
            t0 = time.perf_counter()
            mu, _ = solve_cycle(slots)
            solve_time += time.perf_counter() - t0
            assert mu > floor
            hi = floor + math.sqrt(w.sum()) + 1.0  # the derivative is already positive here
            oracle = grid_argmin(slots, floor + 1e-9, hi)
            worst = max(worst, abs(mu - oracle))
            n += 1
        single = 0.0
        for _ in range(100):
            w, lam = float(rng.uniform(0, 10)), float(rng.uniform(0, 10))
            t0 = time.perf_counter()
            mu, _ = solve_cycle([(w, lam)])
            solve_time += time.perf_counter() - t0
            closed = math.sqrt(w) + lam
            single = max(single, abs(mu - closed) / closed)
            assert mu > lam
        box["detail"] = (f"max |newton - grid| {worst:.2e}, max closed-form rel err {single:.1e}, "
                         f"solver time {solve_time * 1e3:.1f} ms")
        assert worst <= 1e-6
        assert single <= 2 * np.finfo(float).eps
        assert solve_time < 5


# -- 4 ------------------------------------------------------------------------------
def test_4_cost_improvement():
    with criterion(4, "optimized cost never above the start") as box:
        t0 = time.perf_counter()
        rng = random.Random(404)
        regions = [unit_triangle(), hexagon(), triangle_strip(6)]
        gains = []
        for i in range(20):
            net = init_triangulation(regions[i % 3])
            generate(net, None, rng.randint(30, 200), seed=rng.randrange(2 ** 31))
            plan = assign_cycles(net, rng.choice(["mixed", "all-clockwise"]))
            ids = sorted(net.nodes)
            demands = {}
            while len(demands) < rng.randint(3, 30):
                s, t = rng.sample(ids, 2)
                demands[(s, t)] = rng.uniform(0.05, 2.0)
            flows, wt = plan_flows(net, plan, demands)
            sol = optimize_rates(flows, wt)
            c0 = delivery_cost(flows, wt, initial_rates(flows, wt))
            assert all(m > 0 for m in sol.margins(flows).values())
            # equal-rate cycles can differ in the last bit from summation order
            assert sol.cost <= c0 * (1 + 1e-12), (i, sol.cost, c0)
            gains.append((c0 - sol.cost) / c0)
        elapsed = time.perf_counter() - t0
        box["detail"] = f"20/20 instances, relative gain {min(gains):.2e}..{max(gains):.2e}"
        assert elapsed < 60


# -- 5 ------------------------------------------------------------------------------
def test_5_spanner(net300):
    with criterion(5, "2-spanner routes equal exhaustive shortest paths") as box:
        t0 = time.perf_counter()
        plan = assign_cycles(net300, "mixed")
        graph = ServiceGraph(net300, plan)
        g = euclid_graph(net300)
        rng = random.Random(505)
        ids = sorted(net300.nodes)
        worst_ratio, worst_gap, oracle = 0.0, 0.0, {}
        for _ in range(1000):
            s, t = rng.sample(ids, 2)
            r = route(net300, plan, s, t, rng=rng, graph=graph)
            if s not in oracle:
                oracle[s] = nx.single_source_dijkstra_path_length(g, s)
            worst_gap = max(worst_gap, abs(r.length - oracle[s][t]) / oracle[s][t])
            worst_ratio = max(worst_ratio, r.length / net300.distance(s, t))
        elapsed = time.perf_counter() - t0
        box["detail"] = (f"{len(ids)} nodes, max ratio {worst_ratio:.4f}, "
                         f"max rel gap to oracle {worst_gap:.1e}")
        assert worst_ratio <= 2.0 + 1e-9
        assert worst_gap <= 1e-12
        assert elapsed < 60


# -- 6 ------------------------------------------------------------------------------
def test_6_geometry_invariants():
    with criterion(6, "invariants after every subdivision") as box:
        t0 = time.perf_counter()
        regions = [unit_triangle(), hexagon(), triangle_strip(5)]
        steps = 0

        def check(net, delta):
            nonlocal steps
            steps += 1
            assert len(net.nodes) - len(net.edges) + len(net.leaf_faces()) == 1
            touched = set(delta.new_nodes) | set(delta.reused_nodes) | set(net.faces[delta.face].corners)
            assert max(net.degree(n) for n in touched) <= 6
            assert not crossing_pairs(net, subset=delta.added_edges, limit=1)
            for c in delta.children:
                assert is_equilateral(*(net.position(v) for v in net.faces[c].corners))

        for seed in range(50):
            net = init_triangulation(regions[seed % 3])
            generate(net, None, 500, seed=seed, on_subdivide=lambda d, net=net: check(net, d))
            assert len(net.nodes) <= 500
            rep = validate(net)
            assert rep.ok, rep.failures()
        elapsed = time.perf_counter() - t0
        box["detail"] = f"50 runs, {steps} subdivisions checked"
        assert elapsed < 60


# -- 7 ------------------------------------------------------------------------------
def recovery_report(sim, cfg, fail_time):
    """Settle time of the cycle set, allowed window and undelivered count."""
    sim.run_until(cfg.horizon)
    m = sim.metrics()
    changes = [r for r in sim.log.kinds(*CHANGES) if r[0] >= fail_time]
    assert changes, "no recovery happened"
    settle = changes[-1][0] - fail_time
    layers = set()
    for r in changes:
        for cid in r[3].get("retired", []) + r[3].get("created", []):
            face = sim.cycle_faces[cid]
            layers.add(0 if face is None else sim.net.faces[face].layer)
    turn = max(1.0 / mu for mu in cfg.rates.values() if mu > 0)
    window = 10 * max(len(layers), 1) * turn
    lost = m.undelivered_before(cfg.horizon - cfg.drain_margin)
    return settle, window, lost, m


@pytest.mark.parametrize("name, overrides", [
    ("fig7-node-failure", {}),
    ("fig8-ferry-failure", {}),
    ("fig7-node-failure", {"demands": {"0,2": 0.3, "2,1": 0.3, "4,5": 0.2},
                           "events": [{"type": "node_failure", "target": 3, "time": 50.0}]}),
], ids=["layer2-node", "ferry", "layer1-node"])
def test_7_recovery_liveness(name, overrides):
    with criterion(7, f"recovery liveness {name}{' (layer-1 node)' if overrides else ''}") as box:
        t0 = time.perf_counter()
        sim, cfg = scenario_sim(name, **overrides)
        settle, window, lost, m = recovery_report(sim, cfg, cfg.events[0].time)
        elapsed = time.perf_counter() - t0
        box["detail"] = (f"{m.generated} generated, {len(lost)} undelivered before cutoff, "
                         f"settled {settle:.1f} <= {window:.1f}, "
                         f"{m.extra['coverage_violations']} coverage violations")
        assert not lost
        assert settle <= window
        assert m.extra["coverage_violations"] == 0
        assert elapsed < 60


# -- 8 ------------------------------------------------------------------------------
def test_8_round_trip_and_growth():
    with criterion(8, "unify/redivide round trip and lossless growth") as box:
        t0 = time.perf_counter()
        # ferry outage on a leaf cycle: unify the parent, then automatic re-division
        sim, cfg = scenario_sim("fig8-ferry-failure")
        before = sim.cycle_signatures()
        sim.run_until(cfg.horizon)
        assert sim.log.kinds("unify") and sim.log.kinds("redivide")
        restored = sim.cycle_signatures() == before
        # manual round trip on every layer-1 face of the two-layer network
        sim2, cfg2 = scenario_sim("fig7-node-failure", events=[])
        base = sim2.cycle_signatures()
        for face in (1, 2, 3, 4):
            sim2.run_until(sim2.now + 20.0)
            sim2.unify_cycles(face, trigger={"type": "manual"})
            sim2.run_until(sim2.now + 20.0)
            sim2.redivide_cycles(face)
        manual = sim2.cycle_signatures() == base
        sim2.run_until(cfg2.horizon)
        lost2 = sim2.metrics().undelivered_before(cfg2.horizon - cfg2.drain_margin)
        # runtime subdivision under traffic
        sim3, cfg3 = scenario_sim("fig10-growth")
        sim3.run_until(cfg3.horizon)
        m3 = sim3.metrics()
        lost3 = m3.undelivered_before(cfg3.horizon - cfg3.drain_margin)
        grown = len(sim3.log.kinds("growth_complete"))
        elapsed = time.perf_counter() - t0
        box["detail"] = (f"auto restore {restored}, manual restore {manual}, growth events {grown}, "
                         f"lost {len(lost2) + len(lost3) + m3.stranded}")
        assert restored and manual
        assert grown == 2
        assert not lost2 and not lost3 and m3.stranded == 0
        assert elapsed < 60


# -- 9 ------------------------------------------------------------------------------
SCENARIOS = ["eq1-single-edge", "fig6-tandem", "fig7-node-failure", "fig8-ferry-failure", "fig10-growth",
             "generated-gravity"]


def test_9_determinism(tmp_path):
    with criterion(9, "byte-identical reruns") as box:
        same = 0
        for name in SCENARIOS:
            doc = load_json(find_scenario(name))
            if doc.get("horizon", 0) > 20_000:
                doc["horizon"] = 20_000.0  # the long M/M/1 runs add nothing here
            path = tmp_path / f"{name}.json"
            path.write_text(json.dumps(doc))
            outs = []
            for k in range(2):
                out = tmp_path / f"{name}-{k}"
                run_scenario(path, out)
                outs.append(out)
            for f in ("events.csv", "metrics.json", "messages.csv", "solution.json", "network.json"):
                assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), (name, f)
            same += 1
        box["detail"] = f"{same}/{len(SCENARIOS)} scenarios identical"
