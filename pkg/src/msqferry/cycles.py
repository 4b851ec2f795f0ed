"""Ferry cycles on leaf faces and the directed-edge serving index."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import ConfigError, EmptyNetwork, UnknownEdge
from .geometry import EdgeKey, Network, NodeState, Orientation, edge_key

DirectedEdge = tuple[int, int]
Slot = tuple[int, int]  # (cycle id, slot number starting at 1)


class Scheme(str, enum.Enum):
    MIXED = "MIXED"
    ALL_CLOCKWISE = "ALL_CLOCKWISE"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        norm = text.strip().upper().replace("-", "_")
        try:
            return cls(norm)
        except ValueError:
            raise ConfigError(f"unknown scheme {text!r} (use mixed or all-clockwise)") from None


class Handedness(str, enum.Enum):
    CLOCKWISE = "CLOCKWISE"
    COUNTERCLOCKWISE = "COUNTERCLOCKWISE"

    def opposite(self) -> "Handedness":
        return Handedness.COUNTERCLOCKWISE if self is Handedness.CLOCKWISE else Handedness.CLOCKWISE


class DirectionClass(str, enum.Enum):
    FORWARD = "FORWARD"
    BACKWARD = "BACKWARD"


@dataclass(frozen=True)
class Cycle:
    id: int
    face: int | None  # None for a perimeter cycle
    handedness: Handedness
    cls: DirectionClass
    nodes: tuple[int, ...]  # closed walk, rotated to start at the smallest node id

    @property
    def directed_edges(self) -> list[DirectedEdge]:
        n = self.nodes
        return [(n[i], n[(i + 1) % len(n)]) for i in range(len(n))]

    @property
    def signature(self) -> tuple:
        """Identity that ignores the numeric id (used to compare plans)."""
        return (self.face, self.cls.value, self.handedness.value, self.nodes)


def canonical_walk(walk: list[int]) -> tuple[int, ...]:
    i = walk.index(min(walk))
    return tuple(walk[i:] + walk[:i])


def oriented_walk(network: Network, face_id: int, handedness: Handedness,
                  active_only: bool = False) -> tuple[int, ...]:
    walk = network.boundary_walk(face_id)
    if handedness is Handedness.CLOCKWISE:
        walk = walk[::-1]
    if active_only:
        walk = [n for n in walk if network.nodes[n].state is NodeState.ACTIVE]
    return canonical_walk(walk)


def forward_handedness(orientation: Orientation) -> Handedness:
    return Handedness.CLOCKWISE if orientation is Orientation.UP else Handedness.COUNTERCLOCKWISE


@dataclass
class CyclePlan:
    scheme: Scheme
    cycles: dict[int, Cycle] = field(default_factory=dict)
    edges: set[EdgeKey] = field(default_factory=set)

    def __post_init__(self):
        self.serving: dict[DirectedEdge, list[Slot]] = {}
        self.reindex()

    def reindex(self) -> None:
        serving: dict[DirectedEdge, list[Slot]] = {}
        for cid in sorted(self.cycles):
            for k, de in enumerate(self.cycles[cid].directed_edges, start=1):
                serving.setdefault(de, []).append((cid, k))
        self.serving = serving

    def slot_edge(self, cycle_id: int, slot: int) -> DirectedEdge:
        return self.cycles[cycle_id].directed_edges[slot - 1]

    def signatures(self) -> set[tuple]:
        return {c.signature for c in self.cycles.values()}

    def served_edges(self) -> set[DirectedEdge]:
        return set(self.serving)


def _perimeter_loops(missing: set[DirectedEdge]) -> list[list[int]]:
    out_edges: dict[int, list[int]] = {}
    for u, v in sorted(missing):
        out_edges.setdefault(u, []).append(v)
    loops = []
    remaining = set(missing)
    while remaining:
        start = min(remaining)
        walk = [start[0]]
        u, v = start
        while True:
            remaining.discard((u, v))
            if v == walk[0]:
                break
            walk.append(v)
            nxt = [w for w in out_edges[v] if (v, w) in remaining]
            if not nxt:
                raise ConfigError(f"boundary walk broken at node {v}")
            u, v = v, nxt[0]
        loops.append(walk)
    return loops


def _loop_handedness(network: Network, walk: list[int]) -> Handedness:
    pts = [network.position(n) for n in walk]
    area = sum(pts[i][0] * pts[(i + 1) % len(pts)][1] - pts[(i + 1) % len(pts)][0] * pts[i][1]
               for i in range(len(pts)))
    return Handedness.COUNTERCLOCKWISE if area > 0 else Handedness.CLOCKWISE


def assign_cycles(network: Network, scheme: Scheme | str) -> CyclePlan:
    """Instantiate ferry cycles on every leaf face under ``scheme``.

    MIXED gives each face a FORWARD cycle (clockwise on UP faces,
    counterclockwise on DOWN faces) and a BACKWARD cycle of the other
    handedness. ALL_CLOCKWISE gives each face one clockwise cycle and adds a
    perimeter cycle per boundary loop for the otherwise unserved direction.
    """
    if isinstance(scheme, str):
        scheme = Scheme.parse(scheme)
    leaves = network.leaf_faces()
    if not leaves:
        raise EmptyNetwork("network has no leaf faces")
    cycles: dict[int, Cycle] = {}
    for fid in leaves:
        orient = network.faces[fid].orientation
        if scheme is Scheme.MIXED:
            fwd = forward_handedness(orient)
            for cls, hand in ((DirectionClass.FORWARD, fwd), (DirectionClass.BACKWARD, fwd.opposite())):
                cid = len(cycles)
                cycles[cid] = Cycle(cid, fid, hand, cls, oriented_walk(network, fid, hand))
        else:
            cid = len(cycles)
            cycles[cid] = Cycle(cid, fid, Handedness.CLOCKWISE, DirectionClass.FORWARD,
                                oriented_walk(network, fid, Handedness.CLOCKWISE))
    if scheme is Scheme.ALL_CLOCKWISE:
        served = {de for c in cycles.values() for de in c.directed_edges}
        missing = {(a, b) for a, b in network.edges if (a, b) not in served}
        missing |= {(b, a) for a, b in network.edges if (b, a) not in served}
        for loop in _perimeter_loops(missing):
            cid = len(cycles)
            cycles[cid] = Cycle(cid, None, _loop_handedness(network, loop), DirectionClass.BACKWARD,
                                canonical_walk(loop))
    return CyclePlan(scheme, cycles, set(network.edges))


def serving_cycles(plan: CyclePlan, edge: tuple[int, int], direction: int = 1) -> list[Slot]:
    """Cycles serving ``edge`` traversed in its given order (``direction=1``) or reversed."""
    a, b = edge
    if edge_key(a, b) not in plan.edges and (a, b) not in plan.serving and (b, a) not in plan.serving:
        raise UnknownEdge(edge)
    de = (a, b) if direction >= 0 else (b, a)
    return list(plan.serving.get(de, []))


# -- serialization --------------------------------------------------------------
def plan_to_dict(plan: CyclePlan) -> dict:
    return {
        "format": "msq-plan",
        "version": 1,
        "scheme": plan.scheme.value,
        "cycles": [{"id": c.id, "face": c.face, "handedness": c.handedness.value,
                    "class": c.cls.value, "nodes": list(c.nodes),
                    "edges": [list(e) for e in c.directed_edges]}
                   for c in sorted(plan.cycles.values(), key=lambda c: c.id)],
        "edges": [list(k) for k in sorted(plan.edges)],
    }


def plan_from_dict(doc: dict) -> CyclePlan:
    try:
        cycles = {}
        for c in doc["cycles"]:
            cycles[int(c["id"])] = Cycle(int(c["id"]), c["face"], Handedness(c["handedness"]),
                                         DirectionClass(c["class"]), tuple(c["nodes"]))
        edges = {edge_key(a, b) for a, b in doc.get("edges", [])}
        return CyclePlan(Scheme(doc["scheme"]), cycles, edges)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed plan document: {exc}") from None
