"""Explicit ferries circulating on triangle cycles, with recovery and growth.

Ferries hop node to node along their cycle's walk; one hop takes an
exponential time with mean 1/(n*mu) for an n-edge walk, so a full turn has
mean 1/mu. On arrival a ferry drops the messages whose hop ends here and
picks up every message queued for its next edge.

Recovery and growth change the *set of active cycles*. A cycle is tied to a
face (or to a stretch of outer boundary) and its walk is recomputed from the
current geometry, keeping only ACTIVE nodes. Node state follows from the
cycle set: a node is ACTIVE when it lies on the boundary of a face that
carries an active cycle, unless it is known to have failed or was just added
and not yet noticed by a ferry.
"""
from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field

from ..cycles import (Cycle, CyclePlan, DirectionClass, Handedness, Scheme, canonical_walk,
                      forward_handedness, oriented_walk)
from ..errors import (AlreadyFailed, ConfigError, FaceNotServed, NoTrigger, NotALeaf, NotDivided,
                      NodesStillInactive, NotUnified, ScriptReferencesUnknownEntity, Unreachable, UnknownEntity,
                      UnstableConfig)
from ..geometry import Network, NodeState, subdivide_face
from ..queueing import build_route_set, edge_flows, solve_cycle, weights
from ..routing import ServiceGraph, find_dag
from ..seeding import derive_seed
from .config import ScriptEvent, SimConfig
from .metrics import EventLog, MessageRecord, Metrics


@dataclass
class ActiveCycle:
    id: int
    face: int | None
    cls: DirectionClass
    handedness: Handedness
    mu: float
    sides: list[tuple[int, int]] = field(default_factory=list)  # perimeter cycles: original loop edges
    walk: tuple[int, ...] = ()

    @property
    def signature(self) -> tuple:
        return (self.face, self.cls.value, self.handedness.value, self.walk)


@dataclass
class Ferry:
    id: int
    cycle: int | None
    node: int
    state: str = "MOVING"  # MOVING | HALTING | FAILED
    target: int | None = None
    token: int = 0
    cargo: list[int] = field(default_factory=list)
    misses: dict[int, int] = field(default_factory=dict)


@dataclass
class Message:
    id: int
    source: int
    terminal: int
    nodes: list[int]
    hop: int
    where: str = "node"  # node | ferry | parked | handoff | done | stranded
    at: int = -1

    @property
    def next_edge(self) -> tuple[int, int] | None:
        if self.hop + 1 < len(self.nodes):
            return (self.nodes[self.hop], self.nodes[self.hop + 1])
        return None


@dataclass
class CycleDelta:
    face: int
    kind: str
    retired: list[int]
    created: list[int]


class FerrySimulation:
    """Event loop for the ferry-token mode.

    Use :meth:`run_until` to advance time; recovery and growth operations can
    be scheduled through :meth:`inject_node_failure` and friends or called
    directly at the current time.
    """

    def __init__(self, network: Network, plan: CyclePlan, config: SimConfig):
        self.net = network.copy()
        self.scheme = plan.scheme
        self.cfg = config
        self.rng = random.Random(derive_seed(config.seed, "ferry-sim"))
        self.now = 0.0
        self.log = EventLog()
        self._heap: list = []
        self._seq = 0
        self.cycles: dict[int, ActiveCycle] = {}
        self.retired_ids: set[int] = set()
        self.cycle_faces: dict[int, int | None] = {}  # every cycle ever active, retired ones too
        self._next_cycle = max(plan.cycles, default=-1) + 1
        self.ferries: dict[int, Ferry] = {}
        self.messages: dict[int, Message] = {}
        self.records: list[MessageRecord] = []
        self.queues: dict[int, dict[int, deque]] = {}
        self.parked: list[int] = []
        self.unified: dict[int, dict] = {}
        self.pending: set[int] = set()
        self.pending_growth: dict[int, list[int]] = {}
        self.true_failed: set[int] = set()
        self.known_failed: set[int] = set()
        self.failures: list[dict] = []
        self._visit_stamp: dict[tuple[int, int], int] = {}
        self._stamp = 0
        self._version = 0
        self._graph = None
        self._dag_cache: dict = {}
        self.orig_mu: dict[tuple, float] = {}
        self._qarea = 0.0
        self._qcount = 0
        self._qlast = 0.0
        self._node_area: dict[int, float] = {}
        self._node_last: dict[int, float] = {}
        self._mu_area = 0.0
        self._mu_last = 0.0

        positive = [m for m in config.rates.values() if m > 0]
        self.idle_rate = config.idle_rate or (min(positive) if positive else 1.0)

        self._check_stability(plan)
        for cid in sorted(plan.cycles):
            c = plan.cycles[cid]
            mu = config.rates.get(cid, 0.0) or self.idle_rate
            ac = ActiveCycle(cid, c.face, c.cls, c.handedness, mu)
            if c.face is None:
                ac.sides = list(c.directed_edges)
            self.cycles[cid] = ac
            self.cycle_faces[cid] = c.face
            self.orig_mu[(c.face, c.cls.value, c.handedness.value)] = mu
        self._refresh(initial=True)
        fid = 0
        for cid in sorted(self.cycles):
            walk = self.cycles[cid].walk
            for _ in range(config.ferries_per_cycle):
                start = walk[int(self.rng.random() * len(walk))]
                self.ferries[fid] = Ferry(fid, cid, start)
                self._advance(self.ferries[fid])
                fid += 1
        self.log.add(0.0, "start", mode="FERRY_TOKEN", cycles=len(self.cycles), ferries=len(self.ferries))
        for i, pair in enumerate(sorted(config.demands)):
            if config.demands[pair] > 0:
                self._push(self.rng.expovariate(config.demands[pair]), "gen", pair)
        for ev in config.events:
            self._schedule_script(ev)

    # -- helpers -------------------------------------------------------------------
    def _push(self, time: float, kind: str, *payload) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, payload))
        self._seq += 1

    def _check_stability(self, plan: CyclePlan) -> None:
        graph = ServiceGraph(self.net, plan)
        try:
            rs = build_route_set(self.net, plan, self.cfg.demands, graph=graph)
        except Unreachable as exc:
            raise ConfigError(str(exc)) from None
        for (c, k), lam in sorted(edge_flows(plan, self.cfg.demands, rs).lam.items()):
            if lam > 0 and self.cfg.rates.get(c, 0.0) <= lam:
                raise UnstableConfig(f"cycle {c} slot {k}: service rate "
                                     f"{self.cfg.rates.get(c, 0.0)} <= arrival rate {lam}")

    def _schedule_script(self, ev: ScriptEvent) -> None:
        known = {"node_failure": self.net.nodes, "ferry_failure": self.ferries}.get(ev.type, self.net.faces)
        if ev.target not in known:
            raise ScriptReferencesUnknownEntity(f"{ev.type} event targets unknown id {ev.target}")
        self._push(ev.time, ev.type, ev.target)

    def turnaround(self, cycle_id: int) -> float:
        return 1.0 / self.cycles[cycle_id].mu

    def face_cycles(self, face_id: int) -> list[int]:
        return sorted(c.id for c in self.cycles.values() if c.face == face_id)

    def current_plan(self) -> CyclePlan:
        cycles = {c.id: Cycle(c.id, c.face, c.handedness, c.cls, c.walk)
                  for c in self.cycles.values() if len(c.walk) >= 2}
        return CyclePlan(self.scheme, cycles, set(self.net.edges))

    def cycle_signatures(self) -> set[tuple]:
        return {c.signature for c in self.cycles.values()}

    def graph(self) -> ServiceGraph:
        if self._graph is None:
            self._graph = ServiceGraph(self.net, self.current_plan())
        return self._graph

    def _classes(self, face_id: int) -> list[tuple[DirectionClass, Handedness]]:
        if self.scheme is Scheme.MIXED:
            fwd = forward_handedness(self.net.faces[face_id].orientation)
            return [(DirectionClass.FORWARD, fwd), (DirectionClass.BACKWARD, fwd.opposite())]
        return [(DirectionClass.FORWARD, Handedness.CLOCKWISE)]

    # -- state refresh --------------------------------------------------------------
    def _refresh(self, initial: bool = False) -> None:
        """Recompute node states, walks and the service graph after a change."""
        self._account(self.now)
        on_cycle: set[int] = set()
        for c in self.cycles.values():
            if c.face is not None:
                on_cycle.update(self.net.boundary_walk(c.face))
        newly_inactive = []
        for n in sorted(self.net.nodes):
            node = self.net.nodes[n]
            if n in self.known_failed:
                state = NodeState.FAILED
            elif n in self.pending or n not in on_cycle:
                state = NodeState.INACTIVE
            else:
                state = NodeState.ACTIVE
            if node.state is NodeState.ACTIVE and state is NodeState.INACTIVE:
                newly_inactive.append(n)
            node.state = state
        dead = []
        for c in self.cycles.values():
            if c.face is not None:
                c.walk = oriented_walk(self.net, c.face, c.handedness, active_only=True)
            else:
                nodes = []
                for side in c.sides:
                    nodes.extend(self.net.side_chain(*side)[:-1])
                c.walk = canonical_walk([n for n in nodes if self.net.nodes[n].state is NodeState.ACTIVE])
            if len(c.walk) < 2:
                dead.append(c.id)
        for cid in dead:
            self._retire([cid])
            self.log.add(self.now, "cycle_collapsed", cycle=cid)
        self._version += 1
        self._graph = None
        self._dag_cache = {}
        if not initial:
            for n in newly_inactive:
                self._handoff_node(n)
            self._revalidate_messages()

    def _retire(self, ids) -> None:
        for cid in ids:
            self.cycles.pop(cid, None)
            self.retired_ids.add(cid)

    def _new_cycle(self, face: int, cls: DirectionClass, hand: Handedness, mu: float) -> int:
        cid = self._next_cycle
        self._next_cycle += 1
        self.cycles[cid] = ActiveCycle(cid, face, cls, hand, mu)
        self.cycle_faces[cid] = face
        return cid

    def _account(self, t: float) -> None:
        self._qarea += self._qcount * (t - self._qlast)
        self._qlast = t
        self._mu_area += sum(c.mu for c in self.cycles.values()) * (t - self._mu_last)
        self._mu_last = t

    def _node_account(self, n: int, delta: int) -> None:
        self._account(self.now)
        size = sum(len(q) for q in self.queues.get(n, {}).values())
        self._node_area[n] = self._node_area.get(n, 0.0) + (size - delta) * (self.now - self._node_last.get(n, 0.0))
        self._node_last[n] = self.now
        self._qcount += delta

    # -- messages --------------------------------------------------------------------
    def _dag(self, s: int, t: int):
        key = (s, t)
        if key not in self._dag_cache:
            try:
                self._dag_cache[key] = find_dag(self.graph(), s, t)
            except Unreachable:
                self._dag_cache[key] = None
        return self._dag_cache[key]

    def _served(self, u: int, v: int) -> bool:
        return self.graph().has_edge(u, v)

    def _deliver(self, m: Message) -> None:
        m.where = "done"
        rec = self.records[m.id]
        rec.delivered_at = self.now
        rec.status = "delivered"
        del self.messages[m.id]

    def _place(self, m: Message, v: int) -> None:
        """Message sits at active node v: deliver, or queue it for its next hop."""
        if v == m.terminal:
            self._deliver(m)
            return
        nxt = m.next_edge
        if nxt is None or nxt[0] != v or not self._route_ok(m):
            self._reroute(m, v)
            return
        m.where, m.at = "node", v
        self.queues.setdefault(v, {}).setdefault(nxt[1], deque()).append(m.id)
        self._node_account(v, +1)

    def _route_ok(self, m: Message) -> bool:
        g = self.graph()
        return all(g.has_edge(a, b) for a, b in zip(m.nodes[m.hop:], m.nodes[m.hop + 1:]))

    def _reroute(self, m: Message, v: int) -> None:
        dag = self._dag(v, m.terminal) if v != m.terminal else None
        if v == m.terminal:
            self._deliver(m)
            return
        if dag is None:
            m.where, m.at = "parked", v
            self.parked.append(m.id)
            self.log.add(self.now, "unroutable", message=m.id, node=v)
            return
        m.nodes = dag.sample(self.rng)
        m.hop = 0
        self._place(m, v)

    def _unqueue(self, v: int) -> list[int]:
        out = []
        for nxt in sorted(self.queues.get(v, {})):
            out.extend(self.queues[v][nxt])
        if out:
            self._node_account(v, -len(out))
        self.queues.pop(v, None)
        return out

    def _revalidate_messages(self) -> None:
        for v in sorted(self.queues):
            if self.net.nodes[v].state is not NodeState.ACTIVE:
                continue
            stale = []
            for nxt in sorted(self.queues[v]):
                dq = self.queues[v][nxt]
                keep = deque()
                for mid in dq:
                    if self._route_ok(self.messages[mid]):
                        keep.append(mid)
                    else:
                        stale.append(mid)
                self.queues[v][nxt] = keep
            if stale:
                self._node_account(v, -len(stale))
                for mid in stale:
                    self._reroute(self.messages[mid], v)
        retry, self.parked = self.parked, []
        for mid in retry:
            m = self.messages[mid]
            if self.net.nodes[m.at].state is NodeState.ACTIVE:
                self._reroute(m, m.at)
            else:
                self.parked.append(mid)
        self._check_coverage()

    def _check_coverage(self) -> None:
        g = self.graph()
        bad = []
        for v in sorted(self.queues):
            for nxt, dq in sorted(self.queues[v].items()):
                for mid in dq:
                    m = self.messages[mid]
                    if not all(g.has_edge(a, b) for a, b in zip(m.nodes[m.hop:], m.nodes[m.hop + 1:])):
                        bad.append(mid)
        if bad:
            self.log.add(self.now, "coverage_violation", messages=bad[:20])

    def _handoff_node(self, n: int) -> None:
        """Carry messages off a node that just went inactive to the nearest active node."""
        mids = self._unqueue(n)
        if not mids:
            return
        active = [v for v in sorted(self.net.nodes) if self.net.nodes[v].state is NodeState.ACTIVE]
        target = min(active, key=lambda v: (self.net.distance(n, v), v))
        rate = max((c.mu * len(c.walk) for c in self.cycles.values() if target in c.walk),
                   default=self.idle_rate * 3)
        for mid in mids:
            m = self.messages[mid]
            m.where, m.at = "handoff", target
            self._push(self.now + self.rng.expovariate(rate), "handoff", mid)
        self.log.add(self.now, "handoff", node=n, to=target, messages=len(mids))

    # -- ferries --------------------------------------------------------------------------
    def _advance(self, f: Ferry) -> None:
        if f.state == "FAILED" or f.cycle is None or f.cycle not in self.cycles:
            return
        c = self.cycles[f.cycle]
        walk = c.walk
        if f.node in walk:
            i = walk.index(f.node)
            nxt = walk[(i + 1) % len(walk)]
            if (self.net.nodes[f.node].state is NodeState.ACTIVE and f.node not in self.true_failed
                    and f.state == "MOVING"):
                picked = list(self.queues.get(f.node, {}).pop(nxt, ()))
                if picked:
                    self._node_account(f.node, -len(picked))
                for mid in picked:
                    m = self.messages[mid]
                    m.where, m.at = "ferry", f.id
                    f.cargo.append(mid)
            rate = len(walk) * c.mu
        else:
            nxt = min(walk, key=lambda v: (self.net.distance(f.node, v), v))
            rate = len(walk) * c.mu
        f.target = nxt
        f.token += 1
        self._push(self.now + self.rng.expovariate(rate), "arrive", f.id, f.token)

    def _unload(self, f: Ferry, v: int) -> None:
        cargo, f.cargo = f.cargo, []
        for mid in cargo:
            m = self.messages[mid]
            nxt = m.next_edge
            if nxt is not None and nxt[1] == v:
                m.hop += 1
                self.records[mid].hops += 1
                self._place(m, v)
            else:
                self.records[mid].hops += 1
                self._reroute(m, v)

    def _arrive(self, fid: int, token: int) -> None:
        f = self.ferries[fid]
        if f.token != token or f.state == "FAILED":
            return
        v = f.target
        f.node, f.target = v, None
        interactive = v not in self.true_failed and self.net.nodes[v].state is NodeState.ACTIVE
        if f.state == "HALTING":
            f.state = "FAILED"
            if interactive:
                self._unload(f, v)
            else:
                for mid in f.cargo:
                    self._strand(mid)
                f.cargo = []
            self.log.add(self.now, "ferry_halted", ferry=fid, node=v, cycle=f.cycle)
            return
        if v in self.true_failed:
            f.misses[v] = f.misses.get(v, 0) + 1
            if f.misses[v] >= self.cfg.detect_F and v not in self.known_failed:
                self._detect_node_failure(v, fid)
        elif interactive:
            if f.cycle in self.cycles:
                self._record_visit(f.cycle, v)
            self._unload(f, v)
            cyc = self.cycles.get(f.cycle)
            if cyc is not None and cyc.face in self.pending_growth:
                self.complete_growth(cyc.face)
        self._advance(f)

    def _strand(self, mid: int) -> None:
        m = self.messages.pop(mid)
        m.where = "stranded"
        self.records[mid].status = "stranded"

    def _spawn(self, cid: int) -> int:
        fid = max(self.ferries, default=-1) + 1
        walk = self.cycles[cid].walk
        f = Ferry(fid, cid, walk[0])
        self.ferries[fid] = f
        self._advance(f)
        return fid

    def _ferries_on(self, cid: int, alive_only: bool = True) -> list[int]:
        return sorted(f.id for f in self.ferries.values()
                      if f.cycle == cid and (not alive_only or f.state == "MOVING"))

    def _distribute(self, donors: list[int], targets: list[int]) -> list[int]:
        """Move ferries round-robin onto ``targets``; spawn for any target left without one."""
        spawned = []
        for i, fid in enumerate(donors):
            self.ferries[fid].cycle = targets[i % len(targets)]
        for cid in targets:
            if not self._ferries_on(cid):
                spawned.append(self._spawn(cid))
        for fid in donors:
            f = self.ferries[fid]
            if f.target is None and f.state == "MOVING":
                self._advance(f)
        return spawned

    # -- watchdog ---------------------------------------------------------------------------
    def _record_visit(self, cid: int, v: int) -> None:
        self._stamp += 1
        self._visit_stamp[(cid, v)] = self._stamp
        self._push(self.now + self.cfg.T_mult * self.turnaround(cid), "watch", cid, v, self._stamp, 1)

    def _watch(self, cid: int, v: int, stamp: int, phase: int) -> None:
        c = self.cycles.get(cid)
        if c is None or v not in c.walk or self._visit_stamp.get((cid, v)) != stamp:
            return
        if phase == 1:
            # suspicion: notify neighbours, confirm after another interval without a visit
            self.log.add(self.now, "ferry_suspected", cycle=cid, node=v)
            self._push(self.now + self.cfg.T_mult * self.turnaround(cid), "watch", cid, v, stamp, 2)
        else:
            self._detect_ferry_failure(cid, v)

    # -- failure handling ---------------------------------------------------------------------
    def inject_node_failure(self, node: int, time: float | None = None) -> None:
        if node not in self.net.nodes:
            raise UnknownEntity(f"node {node}")
        if node in self.true_failed:
            raise AlreadyFailed(f"node {node}")
        if time is not None and time > self.now:
            self._push(time, "node_failure", node)
            return
        self.true_failed.add(node)
        self.failures.append({"type": "node", "target": node, "time": self.now})
        stranded = self._unqueue(node)
        for mid in stranded:
            self._strand(mid)
        self.log.add(self.now, "node_failure", node=node, stranded=len(stranded))

    def inject_ferry_failure(self, ferry: int, time: float | None = None) -> None:
        if ferry not in self.ferries:
            raise UnknownEntity(f"ferry {ferry}")
        f = self.ferries[ferry]
        if f.state != "MOVING":
            raise AlreadyFailed(f"ferry {ferry}")
        if time is not None and time > self.now:
            self._push(time, "ferry_failure", ferry)
            return
        f.state = "HALTING"
        self.failures.append({"type": "ferry", "target": ferry, "cycle": f.cycle, "time": self.now})
        self.log.add(self.now, "ferry_failure", ferry=ferry, cycle=f.cycle)
        if f.target is None:
            f.state = "FAILED"

    def _detect_node_failure(self, x: int, by_ferry: int) -> None:
        self.known_failed.add(x)
        self.log.add(self.now, "node_failure_detected", node=x, ferry=by_ferry)
        layer = self.net.nodes[x].layer
        targets = set()
        for c in self.cycles.values():
            if c.face is None:
                continue
            face = self.net.faces[c.face]
            if x in face.corners and layer >= 1 and face.layer >= layer:
                a = self.net.ancestor_at_layer(c.face, layer - 1)
                if a is not None:
                    targets.add(a)
        for a in sorted(targets):
            if a in self.unified or any(self._is_ancestor(u, a) for u in self.unified):
                continue
            self.unify_cycles(a, trigger={"type": "node", "node": x})
        self._refresh()

    def _detect_ferry_failure(self, cid: int, v: int) -> None:
        c = self.cycles[cid]
        self.log.add(self.now, "ferry_failure_detected", cycle=cid, node=v)
        # one detection per outage: silence the other nodes' watchdogs on this cycle
        for key in [k for k in self._visit_stamp if k[0] == cid]:
            del self._visit_stamp[key]
        for f in self.ferries.values():
            if f.cycle == cid and f.state in ("FAILED", "HALTING"):
                f.cycle = None
        face = c.face
        parent = None if face is None else self.net.faces[face].parent
        if parent is None:
            fid = self._spawn(cid)
            self.log.add(self.now, "ferry_replaced", cycle=cid, ferry=fid)
            return
        delta = self.unify_cycles(parent, trigger={"type": "ferry", "cycle": cid})
        if self.cfg.auto_redivide and delta.created:
            delay = self.cfg.redivide_delay * max(self.turnaround(x) for x in delta.created)
            self._push(self.now + delay, "redivide", parent)

    def _is_ancestor(self, anc: int, face: int) -> bool:
        f = self.net.faces[face]
        while f.parent is not None:
            if f.parent == anc:
                return True
            f = self.net.faces[f.parent]
        return False

    # -- rates for new cycles ------------------------------------------------------------------
    def _assign_rates(self, created: list[int], inherit: dict[int, float]) -> None:
        need = []
        for cid in created:
            c = self.cycles[cid]
            key = (c.face, c.cls.value, c.handedness.value)
            if key in self.orig_mu:
                c.mu = self.orig_mu[key]
            else:
                need.append(cid)
        if not need:
            return
        solved: dict[int, float] = {}
        if self.cfg.unified_rate == "optimize":
            plan = self.current_plan()
            graph = self.graph()
            demands = {p: r for p, r in self.cfg.demands.items() if r > 0
                       and self._dag(*p) is not None}
            try:
                rs = build_route_set(self.net, plan, demands, graph=graph)
                flows = edge_flows(plan, demands, rs)
                wt = weights(rs, demands, plan, self.cfg.weighting)
                for cid in need:
                    slots = [(wt.w.get((cid, k), 0.0), flows.lam.get((cid, k), 0.0))
                             for k in range(1, len(self.cycles[cid].walk) + 1)]
                    solved[cid] = solve_cycle(slots)[0]
            except Unreachable:
                pass
        for cid in need:
            mu = solved.get(cid, 0.0)
            if mu <= 0:
                mu = inherit.get(cid, 0.0)
            self.cycles[cid].mu = mu if mu > 0 else self.idle_rate

    # -- recovery operations ------------------------------------------------------------------
    def unify_cycles(self, parent_face: int, trigger: dict | None = None) -> CycleDelta:
        """Retire every active cycle below ``parent_face`` and run ferries on its boundary."""
        if parent_face not in self.net.faces:
            raise UnknownEntity(f"face {parent_face}")
        face = self.net.faces[parent_face]
        if face.is_leaf:
            raise NotDivided(parent_face)
        region = self.net.region_nodes(parent_face)
        below = set(self.net.descendants(parent_face))
        if trigger is None:
            recorded = [f for f in self.failures if
                        (f["type"] == "node" and f["target"] in region) or
                        (f["type"] == "ferry" and (self.ferries[f["target"]].cycle is None or
                                                   self.cycles.get(self.ferries[f["target"]].cycle,
                                                                   ActiveCycle(-1, None, DirectionClass.FORWARD,
                                                                               Handedness.CLOCKWISE, 0)).face in below))]
            if not recorded:
                raise NoTrigger(parent_face)
            trigger = {"type": recorded[-1]["type"], "target": recorded[-1]["target"]}
        retired = sorted(c.id for c in self.cycles.values() if c.face in below)
        by_class: dict[str, list[int]] = {}
        inherit_by_class: dict[str, float] = {}
        for cid in retired:
            c = self.cycles[cid]
            by_class.setdefault(c.cls.value, []).extend(self._ferries_on(cid, alive_only=False))
            inherit_by_class[c.cls.value] = max(inherit_by_class.get(c.cls.value, 0.0), c.mu)
        self._retire(retired)
        created = []
        inherit = {}
        for cls, hand in self._classes(parent_face):
            existing = [c.id for c in self.cycles.values()
                        if c.face == parent_face and c.cls is cls]
            if existing:
                cid = existing[0]
            else:
                cid = self._new_cycle(parent_face, cls, hand, 0.0)
                created.append(cid)
                inherit[cid] = inherit_by_class.get(cls.value, 0.0)
        self.unified[parent_face] = {"trigger": trigger, "time": self.now}
        self._refresh()
        self._assign_rates(created, inherit)
        spawned = []
        for cls, _ in self._classes(parent_face):
            target = [c.id for c in self.cycles.values() if c.face == parent_face and c.cls is cls]
            donors = [fid for fid in by_class.get(cls.value, []) if self.ferries[fid].state == "MOVING"]
            halting = [fid for fid in by_class.get(cls.value, []) if self.ferries[fid].state == "HALTING"]
            for fid in halting:
                self.ferries[fid].cycle = target[0]
            spawned += self._distribute(donors, target)
        self.log.add(self.now, "unify", face=parent_face, layer=face.layer, retired=retired,
                     created=created, spawned=spawned, trigger=trigger)
        return CycleDelta(parent_face, "unify", retired, created)

    def redivide_cycles(self, parent_face: int, recurse: bool = True) -> CycleDelta:
        """Split a unified cycle back into child cycles, skipping children with failed nodes."""
        if parent_face not in self.unified or not self.face_cycles(parent_face):
            raise NotUnified(parent_face)
        face = self.net.faces[parent_face]
        children = list(face.children)
        blocked = [c for c in children if self.net.region_nodes(c) & self.known_failed]
        restorable = [c for c in children if c not in blocked]
        needed = set()
        for c in restorable:
            needed.update(self.net.boundary_walk(c))
        if needed & self.pending:
            raise NodesStillInactive(sorted(needed & self.pending))
        old = self.face_cycles(parent_face)
        old_by_class = {self.cycles[c].cls.value: c for c in old}
        created = []
        inherit = {}
        for child in restorable:
            for cls, hand in self._classes(child):
                cid = self._new_cycle(child, cls, hand, 0.0)
                created.append(cid)
                inherit[cid] = self.cycles[old_by_class[cls.value]].mu
        donors: dict[str, list[int]] = {}
        for cid in old:
            donors[self.cycles[cid].cls.value] = self._ferries_on(cid)
        retired = []
        if not blocked:
            retired = old
            self._retire(old)
            del self.unified[parent_face]
        else:
            # keep one ferry on the surviving unified cycle
            for cls in list(donors):
                donors[cls] = donors[cls][1:]
        for child in restorable:
            if not self.net.faces[child].is_leaf:
                self.unified[child] = {"trigger": {"type": "redivide", "face": parent_face},
                                       "time": self.now}
        self._refresh()
        self._assign_rates(created, inherit)
        spawned = []
        for cls, _ in self._classes(parent_face):
            targets = [cid for cid in created if self.cycles[cid].cls.value == cls.value]
            if targets:
                spawned += self._distribute(donors.get(cls.value, []), targets)
        self.log.add(self.now, "redivide", face=parent_face, layer=face.layer, retired=retired,
                     created=created, blocked=blocked, spawned=spawned)
        if recurse:
            for child in restorable:
                if child in self.unified:
                    delay = max(self.turnaround(c) for c in self.face_cycles(child))
                    self._push(self.now + self.cfg.redivide_delay * delay, "redivide", child)
        return CycleDelta(parent_face, "redivide", retired, created)

    # -- growth ----------------------------------------------------------------------------
    def subdivide_at_runtime(self, face_id: int, time: float | None = None) -> list[int]:
        if face_id not in self.net.faces:
            raise UnknownEntity(f"face {face_id}")
        if time is not None and time > self.now:
            self._push(time, "subdivide", face_id)
            return []
        if not self.net.faces[face_id].is_leaf:
            raise NotALeaf(face_id)
        if not self.face_cycles(face_id):
            raise FaceNotServed(face_id)
        delta = subdivide_face(self.net, face_id)
        self.pending.update(delta.new_nodes)
        self.pending_growth[face_id] = list(delta.new_nodes)
        self.log.add(self.now, "subdivide", face=face_id, new_nodes=delta.new_nodes,
                     children=list(delta.children))
        self._refresh()
        return list(delta.new_nodes)

    def complete_growth(self, face_id: int) -> CycleDelta:
        """Ferries on ``face_id`` noticed its new nodes: move onto the four child cycles."""
        new_nodes = self.pending_growth.pop(face_id)
        self.pending.difference_update(new_nodes)
        old = self.face_cycles(face_id)
        donors = {self.cycles[c].cls.value: self._ferries_on(c) for c in old}
        inherit_cls = {self.cycles[c].cls.value: self.cycles[c].mu for c in old}
        self._retire(old)
        created, inherit = [], {}
        for child in self.net.faces[face_id].children:
            for cls, hand in self._classes(child):
                cid = self._new_cycle(child, cls, hand, 0.0)
                created.append(cid)
                inherit[cid] = inherit_cls.get(cls.value, 0.0)
        self._refresh()
        self._assign_rates(created, inherit)
        spawned = []
        for cls, _ in self._classes(face_id):
            targets = [cid for cid in created if self.cycles[cid].cls.value == cls.value]
            spawned += self._distribute(donors.get(cls.value, []), targets)
        self.log.add(self.now, "growth_complete", face=face_id, activated=new_nodes,
                     retired=old, created=created, spawned=spawned)
        return CycleDelta(face_id, "growth", old, created)

    # -- main loop ----------------------------------------------------------------------------
    def _generate(self, pair: tuple[int, int]) -> None:
        s, t = pair
        rate = self.cfg.demands[pair]
        self._push(self.now + self.rng.expovariate(rate), "gen", pair)
        if s in self.true_failed:
            return
        mid = len(self.records)
        self.records.append(MessageRecord(mid, s, t, self.now))
        m = Message(mid, s, t, [s], 0)
        self.messages[mid] = m
        if self.net.nodes[s].state is not NodeState.ACTIVE:
            m.where, m.at = "parked", s
            self.parked.append(mid)
            return
        self._reroute(m, s)

    def step(self) -> bool:
        if not self._heap:
            return False
        time, _, kind, payload = heapq.heappop(self._heap)
        self.now = time
        if kind == "arrive":
            self._arrive(*payload)
        elif kind == "gen":
            self._generate(payload[0])
        elif kind == "watch":
            self._watch(*payload)
        elif kind == "handoff":
            m = self.messages.get(payload[0])
            if m is not None and m.where == "handoff":
                self._reroute(m, m.at)
        elif kind == "node_failure":
            self.inject_node_failure(payload[0])
        elif kind == "ferry_failure":
            self.inject_ferry_failure(payload[0])
        elif kind == "subdivide":
            self.subdivide_at_runtime(payload[0])
        elif kind == "redivide":
            if payload[0] in self.unified and self.face_cycles(payload[0]):
                try:
                    self.redivide_cycles(payload[0])
                except NodesStillInactive:
                    self._push(self.now + self.cfg.redivide_delay * self.idle_rate ** -1,
                               "redivide", payload[0])
        return True

    def run_until(self, t: float) -> None:
        while self._heap and self._heap[0][0] <= t:
            self.step()
        self.now = max(self.now, t)

    def metrics(self) -> Metrics:
        horizon = self.now
        self._account(horizon)
        qavg = {"total": self._qarea / horizon if horizon > 0 else 0.0}
        for n in sorted(self._node_area):
            size = sum(len(q) for q in self.queues.get(n, {}).values())
            area = self._node_area[n] + size * (horizon - self._node_last.get(n, 0.0))
            qavg[str(n)] = area / horizon
        extra = {
            "parked": len(self.parked),
            "final_cycles": len(self.cycles),
            "ferries": {"moving": sum(f.state == "MOVING" for f in self.ferries.values()),
                        "failed": sum(f.state != "MOVING" for f in self.ferries.values())},
            "coverage_violations": len(self.log.kinds("coverage_violation")),
        }
        return Metrics("FERRY_TOKEN", horizon, self.cfg.warmup, list(self.records), self.log, qavg,
                       self._mu_area / horizon if horizon > 0 else 0.0, dict(self.cfg.demands), extra)


def run_ferry(network: Network, plan: CyclePlan, config: SimConfig) -> Metrics:
    sim = FerrySimulation(network, plan, config)
    sim.run_until(config.horizon)
    sim.log.add(sim.now, "end", generated=len(sim.records),
                delivered=sum(r.status == "delivered" for r in sim.records))
    return sim.metrics()
