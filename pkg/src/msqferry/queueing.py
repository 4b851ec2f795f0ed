"""M/M/1 tandem model of ferry relays and per-cycle rate optimisation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .cycles import CyclePlan, DirectedEdge, Slot
from .errors import NoPositiveWeights, NonConvergence, Unreachable, Unstable
from .geometry import Network
from .routing import DamageSet, ServiceGraph, find_dag

Demands = dict[tuple[int, int], float]
RouteSet = dict[tuple[int, int], dict[DirectedEdge, float]]

NEWTON_GTOL = 1e-10
NEWTON_STEP_RTOL = 1e-12
NEWTON_MAXITER = 200


@dataclass
class QueueStats:
    rho: float
    L: float
    ET: float


def mm1_stats(lam: float, mu: float) -> QueueStats:
    if lam < 0 or mu <= lam:
        raise Unstable(f"mu={mu} must exceed lambda={lam} >= 0")
    rho = lam / mu
    return QueueStats(rho, rho / (1 - rho), 1.0 / (mu - lam))


@dataclass
class FlowTable:
    lam: dict[Slot, float] = field(default_factory=dict)

    def cycle_slots(self, cycle_id: int) -> dict[int, float]:
        return {k: v for (c, k), v in self.lam.items() if c == cycle_id}

    def max_lambda(self, cycle_id: int) -> float:
        return max(self.cycle_slots(cycle_id).values(), default=0.0)


@dataclass
class WeightTable:
    w: dict[Slot, float] = field(default_factory=dict)


@dataclass
class RateSolution:
    mu: dict[int, float]
    cost: float
    iterations: dict[int, int] = field(default_factory=dict)

    def margins(self, flows: FlowTable) -> dict[int, float]:
        """mu - max_k lambda(k) for every cycle with traffic."""
        out = {}
        for cid, mu in self.mu.items():
            lam = flows.max_lambda(cid)
            if mu > 0 or lam > 0:
                out[cid] = mu - lam
        return out

    def as_dict(self, flows: FlowTable | None = None) -> dict:
        doc = {"mu": {str(c): m for c, m in sorted(self.mu.items())}, "cost": self.cost,
               "iterations": {str(c): i for c, i in sorted(self.iterations.items())}}
        if flows is not None:
            doc["stability_margins"] = {str(c): m for c, m in sorted(self.margins(flows).items())}
        return doc


# -- demand -> flows ------------------------------------------------------------
def build_route_set(network: Network, plan: CyclePlan, demands: Demands,
                    damage: DamageSet | None = None,
                    graph: ServiceGraph | None = None) -> RouteSet:
    """Per-demand share of equal-length shortest routes using each directed edge."""
    graph = graph or ServiceGraph(network, plan, damage)
    out: RouteSet = {}
    for (s, t), rate in sorted(demands.items()):
        if rate <= 0:
            continue
        try:
            out[(s, t)] = find_dag(graph, s, t).edge_shares()
        except Unreachable as exc:
            raise Unreachable(f"demand {s}->{t}: {exc}") from None
    return out


def directed_edge_flows(demands: Demands, route_set: RouteSet) -> dict[DirectedEdge, float]:
    flows: dict[DirectedEdge, float] = {}
    for pair, shares in route_set.items():
        rate = demands[pair]
        for de, share in shares.items():
            flows[de] = flows.get(de, 0.0) + rate * share
    return flows


def edge_flows(plan: CyclePlan, demands: Demands, route_set: RouteSet) -> FlowTable:
    """Arrival rate per (cycle, slot); a directed edge's flow is split evenly over its serving cycles."""
    table: dict[Slot, float] = {}
    for de, f in sorted(directed_edge_flows(demands, route_set).items()):
        serving = plan.serving.get(de)
        if not serving:
            raise Unreachable(f"directed edge {de} carries flow but no cycle serves it")
        for slot in serving:
            table[slot] = table.get(slot, 0.0) + f / len(serving)
    return FlowTable(table)


def weights(route_set: RouteSet, demands: Demands, plan: CyclePlan,
            weighting: str = "rate") -> WeightTable:
    """Multiplicity of each delay term 1/(mu_l - lambda_l(k)) in the delivery cost.

    ``weighting="rate"`` scales each demand's terms by its rate;
    ``weighting="pairs"`` counts every demanded pair once.
    """
    w: dict[Slot, float] = {}
    for pair, shares in sorted(route_set.items()):
        scale = demands[pair] if weighting == "rate" else 1.0
        for de, share in sorted(shares.items()):
            serving = plan.serving[de]
            for slot in serving:
                w[slot] = w.get(slot, 0.0) + scale * share / len(serving)
    return WeightTable(w)


# -- cost and optimisation --------------------------------------------------------
def _by_cycle(flows: FlowTable, wt: WeightTable) -> dict[int, list[tuple[float, float]]]:
    out: dict[int, dict[int, list[float]]] = {}
    for (c, k), lam in flows.lam.items():
        out.setdefault(c, {}).setdefault(k, [0.0, 0.0])[1] = lam
    for (c, k), w in wt.w.items():
        out.setdefault(c, {}).setdefault(k, [0.0, 0.0])[0] = w
    return {c: [tuple(v) for _, v in sorted(slots.items())] for c, slots in sorted(out.items())}


def delivery_cost(flows: FlowTable, wt: WeightTable, mu: dict[int, float]) -> float:
    total = 0.0
    for (c, k), w in sorted(wt.w.items()):
        if w <= 0:
            continue
        lam = flows.lam.get((c, k), 0.0)
        m = mu.get(c, 0.0)
        if m <= lam:
            raise Unstable(f"cycle {c} slot {k}: mu={m} <= lambda={lam}")
        total += w / (m - lam)
    return total + sum(mu.values())


def cycle_objective(mu: float, slots) -> float:
    return sum(w / (mu - lam) for w, lam in slots if w > 0) + mu


def cycle_gradient(mu: float, slots) -> float:
    return 1.0 - sum(w / (mu - lam) ** 2 for w, lam in slots if w > 0)


def cycle_curvature(mu: float, slots) -> float:
    return sum(2.0 * w / (mu - lam) ** 3 for w, lam in slots if w > 0)


def initial_rate(slots) -> float:
    """Start value sqrt(w(k')) + max lambda, with k' the slot of largest arrival rate."""
    kp = max(range(len(slots)), key=lambda i: (slots[i][1], -i))
    return math.sqrt(slots[kp][0]) + slots[kp][1]


def solve_cycle(slots) -> tuple[float, int]:
    """Minimise sum_k w_k/(mu - lam_k) + mu over mu > max lam_k.

    The optimum solves S(mu) = 1 with S = sum_k w_k/(mu - lam_k)^2. Newton's
    method runs on the equivalent S^(-1/2) = 1, which is exactly linear for a
    single slot and close to linear otherwise, so far-off starts do not crawl.
    A bisection bracket guards iterates that would leave it. When a
    zero-weight slot carries the largest arrival rate and the weighted
    optimum lies below it, the infimum sits on the stability boundary and the
    smallest bracketed rate above it is returned.
    """
    active = [(w, lam) for w, lam in slots if w > 0]
    if not active:
        return 0.0, 0
    floor = max(lam for _, lam in slots)
    lo = floor
    # at floor + sqrt(sum w) each w_k/(mu - lam_k)^2 <= w_k/sum w, so the derivative is >= 0
    hi = max(floor + math.sqrt(sum(w for w, _ in active)), math.nextafter(floor, math.inf))
    mu = initial_rate(slots)
    if not lo < mu <= hi:
        mu = hi  # sqrt(w) vanished below float resolution next to lambda
    for it in range(1, NEWTON_MAXITER + 1):
        try:
            S = sum(w / (mu - lam) ** 2 for w, lam in active)
        except (OverflowError, ZeroDivisionError):
            S = math.inf  # squared gap underflowed: far left of the root
        g = 1.0 - S
        if abs(g) <= NEWTON_GTOL:
            return mu, it
        if g < 0:
            lo = mu
        else:
            hi = mu
        try:
            cand = mu - (S - S ** 1.5) / sum(w / (mu - lam) ** 3 for w, lam in active)
        except (OverflowError, ZeroDivisionError, ValueError):
            cand = math.nan
        if not lo < cand <= hi:
            cand = 0.5 * (lo + hi)
            if not lo < cand < hi:
                return hi, it  # bracket narrower than one ulp
        if abs(cand - mu) <= NEWTON_STEP_RTOL * abs(cand):
            return cand, it
        mu = cand
    raise NonConvergence(f"no convergence after {NEWTON_MAXITER} iterations")


def initial_rates(flows: FlowTable, wt: WeightTable) -> dict[int, float]:
    return {c: (initial_rate(slots) if any(w > 0 for w, _ in slots) else 0.0)
            for c, slots in _by_cycle(flows, wt).items()}


def optimize_rates(flows: FlowTable, wt: WeightTable) -> RateSolution:
    per_cycle = _by_cycle(flows, wt)
    if not any(w > 0 for slots in per_cycle.values() for w, _ in slots):
        raise NoPositiveWeights("no cycle carries a positive weight")
    mu, iters = {}, {}
    for c, slots in per_cycle.items():
        mu[c], iters[c] = solve_cycle(slots)
    return RateSolution(mu, delivery_cost(flows, wt, mu), iters)


def analytic_route_delay(trace: list[Slot], flows: FlowTable, solution: RateSolution) -> float:
    """Sum of M/M/1 sojourn times 1/(mu - lambda) along a cycle trace."""
    total = 0.0
    for c, k in trace:
        total += mm1_stats(flows.lam.get((c, k), 0.0), solution.mu.get(c, 0.0)).ET
    return total


def plan_flows(network: Network, plan: CyclePlan, demands: Demands, weighting: str = "rate",
               damage: DamageSet | None = None) -> tuple[FlowTable, WeightTable]:
    rs = build_route_set(network, plan, demands, damage)
    return edge_flows(plan, demands, rs), weights(rs, demands, plan, weighting)


# -- demand helpers -----------------------------------------------------------------
def parse_demands(doc: dict) -> Demands:
    """``{"s,t": rate}`` -> ``{(s, t): rate}``."""
    from .errors import ConfigError
    out: Demands = {}
    for key, rate in doc.items():
        try:
            s, t = (int(x) for x in str(key).split(","))
            rate = float(rate)
        except ValueError:
            raise ConfigError(f"bad demand entry {key!r}: {rate!r}") from None
        if s == t or rate < 0 or not math.isfinite(rate):
            raise ConfigError(f"bad demand entry {key!r}: {rate!r}")
        out[(s, t)] = rate
    return out


def demands_to_dict(demands: Demands) -> dict:
    return {f"{s},{t}": r for (s, t), r in sorted(demands.items())}


def gravity_demands(network: Network, total_rate: float, pairs: int | None = None,
                    rng=None, symmetric: bool = True) -> Demands:
    """Demands proportional to the product of node territory populations.

    A node's territory is the set of raster cells nearest to it; without a
    raster every node gets equal population. ``pairs`` keeps only that many
    pairs, drawn with probability proportional to their gravity weight.
    """
    import numpy as np
    ids = sorted(n for n, v in network.nodes.items() if v.state.value == "ACTIVE")
    pop = np.ones(len(ids))
    if network.population is not None:
        xs, ys, ms = network.population.cell_centers()
        P = np.array([network.position(n) for n in ids])
        pop = np.zeros(len(ids))
        for start in range(0, xs.size, 4096):
            sl = slice(start, start + 4096)
            d2 = (xs[sl, None] - P[None, :, 0]) ** 2 + (ys[sl, None] - P[None, :, 1]) ** 2
            np.add.at(pop, d2.argmin(axis=1), ms[sl])
    cand = [(i, j) for i in range(len(ids)) for j in range(len(ids)) if i < j or (not symmetric and i != j)]
    wts = np.array([pop[i] * pop[j] for i, j in cand])
    if wts.sum() <= 0:
        wts = np.ones(len(cand))
    if pairs is not None and pairs < len(cand):
        rng = rng or np.random.default_rng(0)
        pick = rng.choice(len(cand), size=pairs, replace=False, p=wts / wts.sum())
        cand = [cand[i] for i in sorted(pick)]
        wts = wts[sorted(pick)]
    wts = wts / wts.sum() * total_rate
    out: Demands = {}
    for (i, j), w in zip(cand, wts):
        if symmetric:
            out[(ids[i], ids[j])] = w / 2
            out[(ids[j], ids[i])] = w / 2
        else:
            out[(ids[i], ids[j])] = w
    return out
