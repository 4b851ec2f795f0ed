"""Route finding restricted to the s-t ellipse, with detours under damage.

Routes run over the *service graph*: the directed edges served by at least one
ferry cycle, minus damaged edges and non-active nodes. On an intact network
with a complete plan this is the network itself.
"""
from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field

from .cycles import CyclePlan, DirectedEdge, Slot
from .errors import SameNode, Unreachable
from .geometry import EdgeKey, Network, NodeState, edge_key

ELLIPSE_FACTORS = (2.0, 4.0)
TIE_RTOL = 1e-9


@dataclass
class DamageSet:
    removed_edges: set[EdgeKey] = field(default_factory=set)
    failed_nodes: set[int] = field(default_factory=set)

    @classmethod
    def from_dict(cls, doc: dict | None) -> "DamageSet":
        doc = doc or {}
        return cls({edge_key(int(a), int(b)) for a, b in doc.get("removed_edges", [])},
                   {int(n) for n in doc.get("failed_nodes", [])})


@dataclass
class Route:
    source: int
    terminal: int
    nodes: list[int]
    length: float
    cycle_trace: list[Slot] = field(default_factory=list)

    @property
    def directed_edges(self) -> list[DirectedEdge]:
        return list(zip(self.nodes, self.nodes[1:]))

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    def as_dict(self, euclid: float | None = None) -> dict:
        doc = {"source": self.source, "terminal": self.terminal, "nodes": self.nodes,
               "edges": [list(e) for e in self.directed_edges], "length": self.length,
               "cycle_trace": [list(s) for s in self.cycle_trace]}
        if euclid:
            doc["ratio"] = self.length / euclid
        return doc


class ServiceGraph:
    """Directed, length-weighted adjacency used by every routing call."""

    def __init__(self, network: Network, plan: CyclePlan | None = None,
                 damage: DamageSet | None = None):
        damage = damage or DamageSet()
        self.network = network
        self.plan = plan
        self.pos = {n.id: n.pos for n in network.nodes.values()}
        dead = set(damage.failed_nodes)
        dead.update(n.id for n in network.nodes.values() if n.state is not NodeState.ACTIVE)
        self.dead = dead
        if plan is not None:
            directed = plan.serving.keys()
        else:
            directed = [(a, b) for a, b in network.edges] + [(b, a) for a, b in network.edges]
        adj: dict[int, list[tuple[int, float]]] = {}
        for u, v in sorted(directed):
            if u in dead or v in dead or edge_key(u, v) in damage.removed_edges:
                continue
            adj.setdefault(u, []).append((v, math.dist(self.pos[u], self.pos[v])))
        self.adj = adj

    def euclid(self, a: int, b: int) -> float:
        return math.dist(self.pos[a], self.pos[b])

    def has_edge(self, u: int, v: int) -> bool:
        return any(w == v for w, _ in self.adj.get(u, ()))


@dataclass
class ShortestDAG:
    """Equal-length shortest paths from ``source`` to ``terminal``."""
    source: int
    terminal: int
    length: float
    preds: dict[int, list[int]]
    sigma: dict[int, float]  # number of shortest s->v paths

    def edge_shares(self) -> dict[DirectedEdge, float]:
        """Fraction of the equal-length routes that use each directed edge."""
        back: dict[int, float] = {self.terminal: 1.0}
        order = sorted(self._on_dag(), key=lambda v: -self._dist_rank[v])
        shares: dict[DirectedEdge, float] = {}
        total = self.sigma[self.terminal]
        for v in order:
            bv = back.get(v, 0.0)
            if bv == 0.0:
                continue
            for u in self.preds.get(v, ()):
                back[u] = back.get(u, 0.0) + bv
                shares[(u, v)] = self.sigma[u] * bv / total
        return shares

    def _on_dag(self) -> set[int]:
        seen = {self.terminal}
        stack = [self.terminal]
        while stack:
            for u in self.preds.get(stack.pop(), ()):
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return seen

    def sample(self, rng: random.Random) -> list[int]:
        path = [self.terminal]
        v = self.terminal
        while v != self.source:
            ps = self.preds[v]
            if len(ps) == 1:
                v = ps[0]
            else:
                r = rng.random() * sum(self.sigma[u] for u in ps)
                for u in ps:
                    r -= self.sigma[u]
                    if r < 0:
                        break
                v = u
            path.append(v)
        return path[::-1]

    def enumerate(self, limit: int = 100_000) -> list[list[int]]:
        if self.sigma[self.terminal] > limit:
            raise ValueError(f"{self.sigma[self.terminal]:.0f} equal routes exceed limit {limit}")
        out: list[list[int]] = []

        def walk(v, suffix):
            if v == self.source:
                out.append([v] + suffix)
                return
            for u in self.preds[v]:
                walk(u, [v] + suffix)

        walk(self.terminal, [])
        return sorted(out)


def shortest_dag(graph: ServiceGraph, s: int, t: int, factor: float | None) -> ShortestDAG | None:
    """Dijkstra from s over nodes inside the ellipse |su|+|ut| <= factor*|st|."""
    st = graph.euclid(s, t)
    bound = None if factor is None else factor * st * (1 + 1e-12) + 1e-15

    def allowed(u):
        return bound is None or graph.euclid(s, u) + graph.euclid(u, t) <= bound

    dist = {s: 0.0}
    done: set[int] = set()
    heap = [(0.0, s)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == t:
            continue
        for v, w in graph.adj.get(u, ()):
            nd = d + w
            if v not in dist or nd < dist[v]:
                if not allowed(v):
                    continue
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    if t not in dist:
        return None
    limit = dist[t] * (1 + TIE_RTOL) + 1e-15
    rank = {v: d for v, d in dist.items() if d <= limit}
    preds: dict[int, list[int]] = {}
    for u in rank:
        if u == t:
            continue
        for v, w in graph.adj.get(u, ()):
            if v in rank and v != s:
                tol = TIE_RTOL * max(rank[v], 1e-300)
                if abs(rank[u] + w - rank[v]) <= tol:
                    preds.setdefault(v, []).append(u)
    for lst in preds.values():
        lst.sort()
    sigma = {s: 1.0}
    for v in sorted(rank, key=lambda v: rank[v]):
        if v != s:
            sigma[v] = sum(sigma.get(u, 0.0) for u in preds.get(v, ()))
    dag = ShortestDAG(s, t, dist[t], preds, sigma)
    dag._dist_rank = rank
    return dag


def _check_endpoints(graph: ServiceGraph, s: int, t: int) -> None:
    if s == t:
        raise SameNode(s)
    for n in (s, t):
        if n not in graph.pos:
            raise Unreachable(f"unknown node {n}")
        if n in graph.dead:
            raise Unreachable(f"node {n} is not active")


def find_dag(graph: ServiceGraph, s: int, t: int, exhaustive: bool = True) -> ShortestDAG:
    """Staged search: ellipse 2|st|, then 4|st|, then the whole graph.

    Every node of a path of length L lies in the ellipse of factor L/|st|, so
    a path found inside a smaller ellipse but longer than its bound is only
    a candidate; one more search in the ellipse it spans settles it.
    """
    _check_endpoints(graph, s, t)
    st = graph.euclid(s, t)
    factors = list(ELLIPSE_FACTORS) + ([None] if exhaustive else [])
    best = None
    for f in factors:
        dag = shortest_dag(graph, s, t, f)
        if dag is None:
            continue
        reach = dag.length * (1 + 2 * TIE_RTOL) / st  # ties included
        if f is None or reach <= f:
            return dag
        if exhaustive:
            return shortest_dag(graph, s, t, reach)
        if best is None or dag.length < best.length:
            best = dag
    if best is not None:
        return best
    raise Unreachable(f"no path {s}->{t}")


def _angle(graph: ServiceGraph, a: int, b: int) -> float:
    pa, pb = graph.pos[a], graph.pos[b]
    return math.atan2(pb[1] - pa[1], pb[0] - pa[0])


def _next_ccw(graph: ServiceGraph, at: int, ref_angle: float, exclude_same: bool = True) -> int | None:
    best, best_turn = None, None
    for v, _ in graph.adj.get(at, ()):
        turn = (_angle(graph, at, v) - ref_angle) % (2 * math.pi)
        if exclude_same and turn < 1e-12:
            turn = 2 * math.pi
        if best_turn is None or turn < best_turn:
            best, best_turn = v, turn
    return best


def _segment_cross(p1, p2, q1, q2):
    d = (p2[0] - p1[0]) * (q2[1] - q1[1]) - (p2[1] - p1[1]) * (q2[0] - q1[0])
    if abs(d) < 1e-15:
        return None
    t = ((q1[0] - p1[0]) * (q2[1] - q1[1]) - (q1[1] - p1[1]) * (q2[0] - q1[0])) / d
    u = ((q1[0] - p1[0]) * (p2[1] - p1[1]) - (q1[1] - p1[1]) * (p2[0] - p1[0])) / d
    if 1e-12 < t < 1 - 1e-12 and 1e-12 < u < 1 - 1e-12:
        return (p1[0] + t * (p2[0] - p1[0]), p1[1] + t * (p2[1] - p1[1]))
    return None


def greedy_route(graph: ServiceGraph, s: int, t: int) -> list[int]:
    """Greedy forwarding with right-hand face traversal out of local minima."""
    _check_endpoints(graph, s, t)
    pt = graph.pos[t]
    max_steps = 4 * sum(len(v) for v in graph.adj.values()) + 10
    path = [s]
    cur, prev = s, None
    perimeter = False
    lp_dist = 0.0
    cross_pt = pt
    walked: set[tuple[int, int]] = set()
    for _ in range(max_steps):
        if cur == t:
            return _trim_loops(path)
        dcur = math.dist(graph.pos[cur], pt)
        if perimeter and dcur < lp_dist:
            perimeter = False
        if not perimeter:
            best = min(graph.adj.get(cur, ()),
                       key=lambda vw: (math.dist(graph.pos[vw[0]], pt), vw[0]), default=None)
            if best is None:
                break
            if math.dist(graph.pos[best[0]], pt) < dcur:
                prev, cur = cur, best[0]
                path.append(cur)
                continue
            perimeter = True
            lp_dist = dcur
            cross_pt = graph.pos[cur]
            walked = set()
            nxt = _next_ccw(graph, cur, _angle_to(graph.pos[cur], pt), exclude_same=False)
        else:
            nxt = _next_ccw(graph, cur, _angle(graph, cur, prev))
            # switch faces when the next edge crosses the entry line closer to t
            for _ in range(len(graph.adj.get(cur, ()))):
                x = _segment_cross(graph.pos[cur], graph.pos[nxt], cross_pt, pt)
                if x is None or math.dist(x, pt) >= math.dist(cross_pt, pt):
                    break
                cross_pt = x
                nxt = _next_ccw(graph, cur, _angle(graph, cur, nxt))
        if (cur, nxt) in walked:
            break
        walked.add((cur, nxt))
        prev, cur = cur, nxt
        path.append(cur)
    raise Unreachable(f"greedy forwarding failed {s}->{t}")


def _angle_to(p, q) -> float:
    return math.atan2(q[1] - p[1], q[0] - p[0])


def _trim_loops(path: list[int]) -> list[int]:
    out: list[int] = []
    where: dict[int, int] = {}
    for v in path:
        if v in where:
            cut = where[v]
            for w in out[cut + 1:]:
                where.pop(w, None)
            out = out[:cut + 1]
        else:
            where[v] = len(out)
            out.append(v)
    return out


def _path_length(graph: ServiceGraph, nodes: list[int]) -> float:
    return sum(graph.euclid(a, b) for a, b in zip(nodes, nodes[1:]))


def _trace(plan: CyclePlan | None, nodes: list[int], rng: random.Random) -> list[Slot]:
    if plan is None:
        return []
    trace = []
    for de in zip(nodes, nodes[1:]):
        options = plan.serving.get(de, [])
        trace.append(options[0] if len(options) == 1 else options[int(rng.random() * len(options))])
    return trace


def route(network: Network, plan: CyclePlan | None, s: int, t: int,
          damage: DamageSet | None = None, rng: random.Random | None = None,
          exhaustive: bool = True, graph: ServiceGraph | None = None) -> Route:
    """Shortest s->t route with a uniformly drawn tie-break and cycle trace.

    With ``exhaustive=False`` only local searches are tried (two ellipses),
    followed by greedy forwarding; the default adds a whole-graph search
    before giving up.
    """
    rng = rng or random.Random(0)
    graph = graph or ServiceGraph(network, plan, damage)
    try:
        dag = find_dag(graph, s, t, exhaustive=exhaustive)
        nodes = dag.sample(rng)
    except Unreachable:
        if exhaustive or s == t:
            raise
        nodes = greedy_route(graph, s, t)
    return Route(s, t, nodes, _path_length(graph, nodes), _trace(plan, nodes, rng))


def enumerate_equal_shortest(network: Network, s: int, t: int, damage: DamageSet | None = None,
                             plan: CyclePlan | None = None, limit: int = 100_000) -> list[Route]:
    graph = ServiceGraph(network, plan, damage)
    dag = find_dag(graph, s, t)
    return [Route(s, t, nodes, _path_length(graph, nodes)) for nodes in dag.enumerate(limit)]


def spanner_ratio(network: Network, s: int, t: int, plan: CyclePlan | None = None) -> float:
    graph = ServiceGraph(network, plan)
    dag = find_dag(graph, s, t)
    return dag.length / graph.euclid(s, t)
