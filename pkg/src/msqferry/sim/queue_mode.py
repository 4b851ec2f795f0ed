"""Each (cycle, slot) as an independent M/M/1 FIFO server."""
from __future__ import annotations

import heapq
import random
from collections import deque

from ..cycles import CyclePlan
from ..errors import ConfigError, Unreachable, UnstableConfig
from ..geometry import Network
from ..queueing import edge_flows
from ..routing import ServiceGraph, find_dag
from ..seeding import derive_seed
from .config import SimConfig
from .metrics import EventLog, MessageRecord, Metrics


def check_stability(plan: CyclePlan, config: SimConfig, route_set) -> dict:
    flows = edge_flows(plan, config.demands, route_set)
    for (c, k), lam in sorted(flows.lam.items()):
        if lam <= 0:
            continue
        mu = config.rates.get(c, 0.0)
        if mu <= lam:
            raise UnstableConfig(f"cycle {c} slot {k}: service rate {mu} <= arrival rate {lam}")
    return flows.lam


class _Server:
    __slots__ = ("mu", "queue", "area", "last")

    def __init__(self, mu):
        self.mu = mu
        self.queue = deque()
        self.area = 0.0
        self.last = 0.0


def run_queue(network: Network, plan: CyclePlan, config: SimConfig) -> Metrics:
    if config.events:
        raise ConfigError("failure/growth events need the ferry mode")
    rng = random.Random(derive_seed(config.seed, "queue-sim"))
    graph = ServiceGraph(network, plan)
    pairs = sorted(p for p, r in config.demands.items() if r > 0)
    dags = {}
    for s, t in pairs:
        try:
            dags[(s, t)] = find_dag(graph, s, t)
        except Unreachable as exc:
            raise ConfigError(f"demand {s}->{t} unroutable: {exc}") from None
    check_stability(plan, config, {p: d.edge_shares() for p, d in dags.items()})

    log = EventLog()
    log.add(0.0, "start", mode=config.mode.value, pairs=len(pairs))
    servers: dict[tuple[int, int], _Server] = {}
    messages: list[MessageRecord] = []
    routes: list[list] = []
    heap: list = []
    seq = 0
    for i, pair in enumerate(pairs):
        heapq.heappush(heap, (rng.expovariate(config.demands[pair]), seq, 0, i))
        seq += 1
    horizon = config.horizon
    expo = rng.expovariate

    def join(slot, mid, now):
        nonlocal seq
        srv = servers.get(slot)
        if srv is None:
            srv = servers[slot] = _Server(config.rates[slot[0]])
        srv.area += len(srv.queue) * (now - srv.last)
        srv.last = now
        srv.queue.append(mid)
        if len(srv.queue) == 1:
            heapq.heappush(heap, (now + expo(srv.mu), seq, 1, slot))
            seq += 1

    while heap:
        now, _, kind, payload = heapq.heappop(heap)
        if now > horizon:
            break
        if kind == 0:
            pair = pairs[payload]
            nodes = dags[pair].sample(rng)
            trace = []
            for de in zip(nodes, nodes[1:]):
                opts = plan.serving[de]
                trace.append(opts[0] if len(opts) == 1 else opts[int(rng.random() * len(opts))])
            mid = len(messages)
            messages.append(MessageRecord(mid, pair[0], pair[1], now))
            routes.append(trace)
            join(trace[0], mid, now)
            heapq.heappush(heap, (now + expo(config.demands[pair]), seq, 0, payload))
            seq += 1
        else:
            srv = servers[payload]
            srv.area += len(srv.queue) * (now - srv.last)
            srv.last = now
            mid = srv.queue.popleft()
            if srv.queue:
                heapq.heappush(heap, (now + expo(srv.mu), seq, 1, payload))
                seq += 1
            msg = messages[mid]
            msg.hops += 1
            trace = routes[mid]
            if msg.hops == len(trace):
                msg.delivered_at = now
                msg.status = "delivered"
            else:
                join(trace[msg.hops], mid, now)

    qavg = {}
    for slot, srv in sorted(servers.items()):
        srv.area += len(srv.queue) * (horizon - srv.last)
        qavg[f"{slot[0]}:{slot[1]}"] = srv.area / horizon
    used = {c for c, _ in servers}
    log.add(horizon, "end", generated=len(messages),
            delivered=sum(m.status == "delivered" for m in messages))
    return Metrics(config.mode.value, horizon, config.warmup, messages, log, qavg,
                   sum(config.rates.get(c, 0.0) for c in sorted(used)), dict(config.demands))
