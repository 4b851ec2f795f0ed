"""Multi-scale quartered (MSQ) triangle networks.

A network starts from an edge-to-edge tiling of equilateral triangles.
Leaf faces are quartered by joining their side midpoints; a midpoint shared
with an already-quartered neighbour is reused, so a leaf side may be a chain
of several collinear graph edges.
"""
from __future__ import annotations

import enum
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .errors import (DanglingVertex, EmptyNetwork, FaceNotFound, NonEquilateral, NotALeaf,
                     OverlappingFaces, TargetTooSmall)
from .population import FaceMassIndex, Raster

EQUILATERAL_RTOL = 1e-9
SQRT3 = math.sqrt(3.0)

Point = tuple[float, float]
EdgeKey = tuple[int, int]


class NodeState(str, enum.Enum):
    ACTIVE = "ACTIVE"
    INACTIVE = "INACTIVE"
    FAILED = "FAILED"


class Orientation(str, enum.Enum):
    UP = "UP"
    DOWN = "DOWN"

    def flipped(self) -> "Orientation":
        return Orientation.DOWN if self is Orientation.UP else Orientation.UP


class FaceKind(str, enum.Enum):
    INITIAL = "INITIAL"
    CORNER_CHILD = "CORNER_CHILD"
    CENTER_CHILD = "CENTER_CHILD"


def edge_key(a: int, b: int) -> EdgeKey:
    return (a, b) if a < b else (b, a)


@dataclass
class Node:
    id: int
    x: float
    y: float
    layer: int
    state: NodeState = NodeState.ACTIVE

    @property
    def pos(self) -> Point:
        return (self.x, self.y)


@dataclass
class Face:
    id: int
    corners: tuple[int, int, int]  # counterclockwise
    layer: int
    orientation: Orientation
    kind: FaceKind
    parent: int | None = None
    children: tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class Edge:
    endpoints: EdgeKey
    length: float


@dataclass
class SubdivisionDelta:
    face: int
    new_nodes: list[int]
    reused_nodes: list[int]
    removed_edges: list[EdgeKey]
    added_edges: list[EdgeKey]
    children: tuple[int, int, int, int]


@dataclass
class Network:
    nodes: dict[int, Node] = field(default_factory=dict)
    edges: dict[EdgeKey, Edge] = field(default_factory=dict)
    faces: dict[int, Face] = field(default_factory=dict)
    midpoints: dict[EdgeKey, int] = field(default_factory=dict)
    population: Raster | None = None

    def __post_init__(self):
        self._pos_index: dict[tuple[int, int], int] = {}
        for node in self.nodes.values():
            self._pos_index[self._pos_key(node.pos)] = node.id
        self._adj_cache = None

    # -- lookups -----------------------------------------------------------
    def position(self, node_id: int) -> Point:
        n = self.nodes[node_id]
        return (n.x, n.y)

    def distance(self, a: int, b: int) -> float:
        pa, pb = self.position(a), self.position(b)
        return math.hypot(pa[0] - pb[0], pa[1] - pb[1])

    def leaf_faces(self) -> list[int]:
        return sorted(f.id for f in self.faces.values() if f.is_leaf)

    def max_layer(self) -> int:
        return max((f.layer for f in self.faces.values()), default=0)

    def neighbors(self) -> dict[int, list[int]]:
        if self._adj_cache is None:
            adj: dict[int, list[int]] = {n: [] for n in self.nodes}
            for a, b in self.edges:
                adj[a].append(b)
                adj[b].append(a)
            for lst in adj.values():
                lst.sort()
            self._adj_cache = adj
        return self._adj_cache

    def degree(self, node_id: int) -> int:
        return len(self.neighbors()[node_id])

    def side_chain(self, a: int, b: int) -> list[int]:
        """Nodes from ``a`` to ``b`` along the straight side, at the finest resolution."""
        m = self.midpoints.get(edge_key(a, b))
        if m is None:
            return [a, b]
        return self.side_chain(a, m) + self.side_chain(m, b)[1:]

    def boundary_walk(self, face_id: int) -> list[int]:
        """Counterclockwise closed walk (last node not repeated) around a face."""
        c0, c1, c2 = self.faces[face_id].corners
        return (self.side_chain(c0, c1)[:-1] + self.side_chain(c1, c2)[:-1]
                + self.side_chain(c2, c0)[:-1])

    def region_nodes(self, face_id: int) -> set[int]:
        """Every node lying in the closed face, including descendants' nodes."""
        out = set(self.boundary_walk(face_id))
        stack = list(self.faces[face_id].children)
        while stack:
            f = self.faces[stack.pop()]
            out.update(f.corners)
            stack.extend(f.children)
        return out

    def descendants(self, face_id: int) -> list[int]:
        out = []
        stack = list(self.faces[face_id].children)
        while stack:
            f = stack.pop()
            out.append(f)
            stack.extend(self.faces[f].children)
        return sorted(out)

    def ancestor_at_layer(self, face_id: int, layer: int) -> int | None:
        f = self.faces[face_id]
        while f.layer > layer:
            if f.parent is None:
                return None
            f = self.faces[f.parent]
        return f.id if f.layer == layer else None

    def edge_faces(self) -> dict[EdgeKey, list[int]]:
        """Leaf faces adjacent to each edge (via side chains)."""
        out: dict[EdgeKey, list[int]] = {k: [] for k in self.edges}
        for fid in self.leaf_faces():
            walk = self.boundary_walk(fid)
            for i, a in enumerate(walk):
                k = edge_key(a, walk[(i + 1) % len(walk)])
                out.setdefault(k, []).append(fid)
        return out

    def node_at(self, p: Point) -> int | None:
        return self._pos_index.get(self._pos_key(p))

    # -- mutation helpers --------------------------------------------------
    @staticmethod
    def _pos_key(p: Point) -> tuple[int, int]:
        return (round(p[0] * 1e9), round(p[1] * 1e9))

    def _add_node(self, p: Point, layer: int) -> int:
        nid = max(self.nodes, default=-1) + 1
        self.nodes[nid] = Node(nid, float(p[0]), float(p[1]), layer)
        self._pos_index[self._pos_key(p)] = nid
        self._adj_cache = None
        return nid

    def _add_edge(self, a: int, b: int) -> EdgeKey:
        k = edge_key(a, b)
        self.edges[k] = Edge(k, self.distance(a, b))
        self._adj_cache = None
        return k

    def _remove_edge(self, a: int, b: int) -> EdgeKey:
        k = edge_key(a, b)
        del self.edges[k]
        self._adj_cache = None
        return k

    def copy(self) -> "Network":
        import copy
        return copy.deepcopy(self)


# ---------------------------------------------------------------------------
def _signed_area(a: Point, b: Point, c: Point) -> float:
    return ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) / 2.0


def is_equilateral(a: Point, b: Point, c: Point, rtol: float = EQUILATERAL_RTOL) -> bool:
    sides = [math.dist(a, b), math.dist(b, c), math.dist(c, a)]
    hi = max(sides)
    return hi > 0 and (hi - min(sides)) <= rtol * hi


def orientation_of(a: Point, b: Point, c: Point) -> Orientation:
    """UP/DOWN class of a counterclockwise equilateral triangle.

    The direction of each counterclockwise side, taken mod 120 degrees, is
    the same for all three sides; it is 0 for an apex-up triangle on a
    horizontal base and 60 for its point-reflected neighbour. Neighbours
    across any shared side always land in opposite classes.
    """
    ang = math.degrees(math.atan2(b[1] - a[1], b[0] - a[0])) % 120.0
    if ang > 120.0 - 1e-6:
        ang = 0.0
    return Orientation.UP if ang < 60.0 - 1e-6 else Orientation.DOWN


def _projections_overlap(tri1, tri2, eps) -> bool:
    for tri in (tri1, tri2):
        for i in range(3):
            p, q = tri[i], tri[(i + 1) % 3]
            nx, ny = q[1] - p[1], p[0] - q[0]
            pr1 = [nx * x + ny * y for x, y in tri1]
            pr2 = [nx * x + ny * y for x, y in tri2]
            if min(pr1) >= max(pr2) - eps or min(pr2) >= max(pr1) - eps:
                return False
    return True


def _on_open_segment(p: Point, a: Point, b: Point, eps: float) -> bool:
    if abs((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) > eps:
        return False
    t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (
        (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2)
    return 1e-9 < t < 1 - 1e-9


def init_triangulation(region, population: Raster | None = None) -> Network:
    """Build the layer-0 network from a list of equilateral corner triples."""
    tris = [tuple((float(x), float(y)) for x, y in tri) for tri in region]
    if not tris:
        raise EmptyNetwork("region has no triangles")
    for tri in tris:
        if len(tri) != 3 or not is_equilateral(*tri):
            raise NonEquilateral(f"triangle {tri} is not equilateral")
    scale = max(math.dist(t[0], t[1]) for t in tris)
    eps = 1e-9 * scale * scale
    for i in range(len(tris)):
        for j in range(i + 1, len(tris)):
            if _projections_overlap(tris[i], tris[j], eps):
                raise OverlappingFaces(f"triangles {i} and {j} overlap")
    for i, tri in enumerate(tris):
        for j, other in enumerate(tris):
            if i == j:
                continue
            for p in tri:
                for k in range(3):
                    if _on_open_segment(p, other[k], other[(k + 1) % 3], eps):
                        raise DanglingVertex(f"vertex {p} of triangle {i} lies on a side of triangle {j}")

    net = Network(population=population)
    for tri in tris:
        ids = []
        for p in tri:
            nid = net.node_at(p)
            ids.append(nid if nid is not None else net._add_node(p, 0))
        if _signed_area(*tri) < 0:
            ids = [ids[0], ids[2], ids[1]]
        for k in range(3):
            if edge_key(ids[k], ids[(k + 1) % 3]) not in net.edges:
                net._add_edge(ids[k], ids[(k + 1) % 3])
        fid = len(net.faces)
        corners = (ids[0], ids[1], ids[2])
        pos = [net.position(n) for n in corners]
        net.faces[fid] = Face(fid, corners, 0, orientation_of(*pos), FaceKind.INITIAL)
    return net


def new_node_count(network: Network, face_id: int) -> int:
    c = network.faces[face_id].corners
    return sum(edge_key(c[i], c[(i + 1) % 3]) not in network.midpoints for i in range(3))


def subdivide_face(network: Network, face_id: int) -> SubdivisionDelta:
    """Quarter a leaf face in place."""
    face = network.faces.get(face_id)
    if face is None:
        raise FaceNotFound(face_id)
    if not face.is_leaf:
        raise NotALeaf(face_id)
    for n in face.corners:
        if network.nodes[n].state is not NodeState.ACTIVE:
            raise NotALeaf(f"face {face_id} has non-active corner {n}")

    new_nodes, reused, removed, added = [], [], [], []
    mids = []
    for i in range(3):
        a, b = face.corners[i], face.corners[(i + 1) % 3]
        k = edge_key(a, b)
        m = network.midpoints.get(k)
        if m is None:
            pa, pb = network.position(a), network.position(b)
            m = network._add_node(((pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2), face.layer + 1)
            network.midpoints[k] = m
            removed.append(network._remove_edge(a, b))
            added.append(network._add_edge(a, m))
            added.append(network._add_edge(m, b))
            new_nodes.append(m)
        else:
            reused.append(m)
        mids.append(m)
    mab, mbc, mca = mids
    for u, v in ((mab, mbc), (mbc, mca), (mca, mab)):
        added.append(network._add_edge(u, v))

    a, b, c = face.corners
    child_specs = [
        ((a, mab, mca), face.orientation, FaceKind.CORNER_CHILD),
        ((mab, b, mbc), face.orientation, FaceKind.CORNER_CHILD),
        ((mca, mbc, c), face.orientation, FaceKind.CORNER_CHILD),
        ((mab, mbc, mca), face.orientation.flipped(), FaceKind.CENTER_CHILD),
    ]
    next_id = max(network.faces) + 1
    children = []
    for offset, (corners, orient, kind) in enumerate(child_specs):
        fid = next_id + offset
        network.faces[fid] = Face(fid, corners, face.layer + 1, orient, kind, parent=face_id)
        children.append(fid)
    face.children = tuple(children)
    return SubdivisionDelta(face_id, new_nodes, reused, removed, added, tuple(children))


def generate(network: Network, population: Raster | None, target_size: int, seed: int,
             mass_index: FaceMassIndex | None = None,
             on_subdivide: Callable[[SubdivisionDelta], None] | None = None) -> Network:
    """Grow ``network`` in place by population-weighted subdivision.

    Leaf faces are drawn by inverse CDF over their population mass using
    numpy's PCG64 generator seeded with ``seed``. Growth stops at the first
    draw whose subdivision would push the node count past ``target_size``.
    ``on_subdivide`` sees each delta right after it is applied.
    """
    if target_size < len(network.nodes):
        raise TargetTooSmall(f"target {target_size} < current size {len(network.nodes)}")
    network.population = population
    index = mass_index or FaceMassIndex(population)
    rng = np.random.default_rng(seed)
    known: dict[int, float] = {}  # a face's mass never changes
    while True:
        leaves = network.leaf_faces()
        for f in leaves:
            if f not in known:
                known[f] = index.mass(network, f)
        masses = np.array([known[f] for f in leaves])
        total = masses.sum()
        if total <= 0:
            masses = np.ones(len(leaves))
            total = float(len(leaves))
        cdf = np.cumsum(masses)
        u = rng.random() * total
        pick = leaves[min(int(np.searchsorted(cdf, u, side="right")), len(leaves) - 1)]
        if len(network.nodes) + new_node_count(network, pick) > target_size:
            break
        delta = subdivide_face(network, pick)
        if on_subdivide is not None:
            on_subdivide(delta)
    return network


# -- validation ---------------------------------------------------------------
@dataclass
class ValidationReport:
    checks: dict[str, tuple[bool, str]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.checks.values())

    def failures(self) -> list[str]:
        return [f"{name}: {msg}" for name, (passed, msg) in self.checks.items() if not passed]

    def as_dict(self) -> dict:
        return {"ok": self.ok,
                "checks": {k: {"ok": v[0], "detail": v[1]} for k, v in self.checks.items()}}


def _components(network: Network) -> int:
    adj = network.neighbors()
    seen: set[int] = set()
    count = 0
    for start in sorted(network.nodes):
        if start in seen:
            continue
        count += 1
        stack = [start]
        seen.add(start)
        while stack:
            for v in adj[stack.pop()]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
    return count


def boundary_loops(network: Network) -> int:
    """Number of closed boundary loops (outer boundary plus holes)."""
    ef = network.edge_faces()
    bnd = [k for k, fs in ef.items() if len(fs) == 1]
    adj: dict[int, list[int]] = {}
    for a, b in bnd:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen: set[int] = set()
    loops = 0
    for start in sorted(adj):
        if start in seen:
            continue
        loops += 1
        stack = [start]
        seen.add(start)
        while stack:
            for v in adj[stack.pop()]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
    return loops


CROSSING_BLOCK = 128  # tested edges per vectorised pass


def crossing_pairs(network: Network, subset: list[EdgeKey] | None = None,
                   limit: int = 10) -> list[tuple[EdgeKey, EdgeKey]]:
    """Edge pairs that cross, touch in an interior point, or overlap collinearly.

    ``subset`` restricts the first member of each tested pair; the second
    ranges over all edges.
    """
    keys = sorted(network.edges)
    if not keys:
        return []
    ids = np.array(keys)
    xy = np.zeros((max(network.nodes) + 1, 2))
    for n, node in network.nodes.items():
        xy[n] = node.pos
    P, Q = xy[ids[:, 0]], xy[ids[:, 1]]
    scale = max(float(np.abs(Q - P).max()), 1e-300)
    eps = 1e-9 * scale * scale
    if subset is None:
        first = range(len(keys))
    else:
        where = {k: i for i, k in enumerate(keys)}
        first = [where[k] for k in subset]

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    def inside(a, b, r):
        # an endpoint of one segment lying strictly inside the other
        col = np.abs(orient(a, b, r)) <= eps
        t = (r[..., 0] - a[..., 0]) * (b[..., 0] - a[..., 0]) + (r[..., 1] - a[..., 1]) * (b[..., 1] - a[..., 1])
        ll = (b[..., 0] - a[..., 0]) ** 2 + (b[..., 1] - a[..., 1]) ** 2
        return col & (t > 1e-9 * ll) & (t < ll * (1 - 1e-9))

    first = np.asarray(first, dtype=int)
    bad = []
    for start in range(0, len(first), CROSSING_BLOCK):
        rows = first[start:start + CROSSING_BLOCK]
        # rows of tested edges against every edge at once
        p, q, idr = P[rows][:, None, :], Q[rows][:, None, :], ids[rows][:, None, :]
        Pn, Qn, idn = P[None, :, :], Q[None, :, :], ids[None, :, :]
        shared = ((idn[..., 0] == idr[..., 0]) | (idn[..., 0] == idr[..., 1])
                  | (idn[..., 1] == idr[..., 0]) | (idn[..., 1] == idr[..., 1]))
        d1, d2 = orient(p, q, Pn), orient(p, q, Qn)
        d3, d4 = orient(Pn, Qn, p), orient(Pn, Qn, q)
        proper = (((d1 > eps) & (d2 < -eps)) | ((d1 < -eps) & (d2 > eps))) & \
                 (((d3 > eps) & (d4 < -eps)) | ((d3 < -eps) & (d4 > eps)))
        touch = inside(p, q, Pn) | inside(p, q, Qn) | inside(Pn, Qn, p) | inside(Pn, Qn, q)
        # touching via a shared endpoint is only bad when collinear-overlapping, which
        # the interior tests above already catch
        hit = (proper & ~shared) | touch
        hit[np.arange(len(rows)), rows] = False
        if subset is None:
            hit &= np.arange(len(keys))[None, :] > rows[:, None]
        for r, j in zip(*np.nonzero(hit)):
            bad.append((keys[int(rows[r])], keys[int(j)]))
            if len(bad) >= limit:
                return bad
    return bad


def validate(network: Network) -> ValidationReport:
    """Read-only check of the construction invariants."""
    rep = ValidationReport()
    if not network.nodes or not network.faces:
        rep.checks["nonempty"] = (False, "EmptyNetwork")
        return rep
    rep.checks["nonempty"] = (True, "")

    V, E, F = len(network.nodes), len(network.edges), len(network.leaf_faces())
    C, B = _components(network), boundary_loops(network)
    chi = V - E + F
    rep.checks["euler"] = (chi == 2 * C - B,
                           f"V-E+F_leaf+1={chi + 1} (components={C}, boundary loops={B})")

    adj = network.neighbors()
    maxdeg = max(len(v) for v in adj.values())
    rep.checks["max_degree"] = (maxdeg <= 6, f"max degree {maxdeg}")

    bad = crossing_pairs(network)
    rep.checks["planarity"] = (not bad, f"crossing pairs {bad}" if bad else "")

    keys = {}
    dups = []
    for n in network.nodes.values():
        k = Network._pos_key(n.pos)
        if k in keys:
            dups.append((keys[k], n.id))
        keys[k] = n.id
    rep.checks["unique_positions"] = (not dups, f"duplicate positions {dups}" if dups else "")

    layer_problems = []
    maxl = network.max_layer()
    for n in network.nodes.values():
        if n.layer > maxl:
            layer_problems.append(f"node {n.id} layer {n.layer} > {maxl}")
    for f in network.faces.values():
        if f.children:
            if len(f.children) != 4:
                layer_problems.append(f"face {f.id} has {len(f.children)} children")
            kinds = [network.faces[c].kind for c in f.children]
            if kinds.count(FaceKind.CENTER_CHILD) != 1:
                layer_problems.append(f"face {f.id} needs exactly one center child")
            for c in f.children:
                ch = network.faces[c]
                if ch.layer != f.layer + 1 or ch.parent != f.id:
                    layer_problems.append(f"face {c} layer/parent inconsistent")
                want = f.orientation.flipped() if ch.kind is FaceKind.CENTER_CHILD else f.orientation
                if ch.orientation is not want:
                    layer_problems.append(f"face {c} orientation")
    rep.checks["layers"] = (not layer_problems, "; ".join(layer_problems[:5]))

    reg_problems = []
    for (a, b), m in network.midpoints.items():
        if m not in network.nodes:
            reg_problems.append(f"midpoint {m} missing")
            continue
        pa, pb, pm = network.position(a), network.position(b), network.position(m)
        if math.dist(((pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2), pm) > 1e-9 * max(math.dist(pa, pb), 1e-300):
            reg_problems.append(f"midpoint {m} of ({a},{b}) misplaced")
        if (a, b) in network.edges:
            reg_problems.append(f"split edge ({a},{b}) still present")
    rep.checks["registry"] = (not reg_problems, "; ".join(reg_problems[:5]))

    eq_bad = [f.id for f in network.faces.values()
              if not is_equilateral(*(network.position(c) for c in f.corners))]
    rep.checks["equilateral"] = (not eq_bad, f"faces {eq_bad[:5]}" if eq_bad else "")

    ef = network.edge_faces()
    adj_bad = [k for k, fs in ef.items() if k not in network.edges or len(fs) not in (1, 2)]
    rep.checks["edge_faces"] = (not adj_bad, f"edges {adj_bad[:5]}" if adj_bad else "")
    return rep


# -- serialization ------------------------------------------------------------
FORMAT_VERSION = 1


def network_to_dict(network: Network) -> dict:
    return {
        "format": "msq-network",
        "version": FORMAT_VERSION,
        "nodes": [{"id": n.id, "x": n.x, "y": n.y, "layer": n.layer, "state": n.state.value}
                  for n in sorted(network.nodes.values(), key=lambda n: n.id)],
        "edges": [list(k) for k in sorted(network.edges)],
        "faces": [{"id": f.id, "corners": list(f.corners), "layer": f.layer,
                   "orientation": f.orientation.value, "kind": f.kind.value,
                   "parent": f.parent, "children": list(f.children)}
                  for f in sorted(network.faces.values(), key=lambda f: f.id)],
        "midpoints": [[a, b, m] for (a, b), m in sorted(network.midpoints.items())],
    }


def network_from_dict(doc: dict) -> Network:
    from .errors import ConfigError
    if doc.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise ConfigError(f"unsupported network format version {doc.get('version')}")
    try:
        nodes = {int(n["id"]): Node(int(n["id"]), float(n["x"]), float(n["y"]), int(n["layer"]),
                                    NodeState(n.get("state", "ACTIVE")))
                 for n in doc["nodes"]}
        net = Network(nodes=nodes)
        for a, b in doc["edges"]:
            net._add_edge(int(a), int(b))
        for f in doc["faces"]:
            net.faces[int(f["id"])] = Face(int(f["id"]), tuple(int(c) for c in f["corners"]),
                                           int(f["layer"]), Orientation(f["orientation"]),
                                           FaceKind(f["kind"]),
                                           None if f.get("parent") is None else int(f["parent"]),
                                           tuple(int(c) for c in f.get("children", ())))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed network document: {exc}") from None
    if "midpoints" in doc:
        for a, b, m in doc["midpoints"]:
            net.midpoints[edge_key(int(a), int(b))] = int(m)
    else:
        # rebuild the registry from subdivided faces
        for f in net.faces.values():
            if f.children:
                center = next(net.faces[c] for c in f.children
                              if net.faces[c].kind is FaceKind.CENTER_CHILD)
                mab, mbc, mca = center.corners
                a, b, c = f.corners
                net.midpoints[edge_key(a, b)] = mab
                net.midpoints[edge_key(b, c)] = mbc
                net.midpoints[edge_key(c, a)] = mca
    return net


# -- convenience regions --------------------------------------------------------
def unit_triangle(side: float = 1.0, origin: Point = (0.0, 0.0)) -> list:
    x, y = origin
    return [[(x, y), (x + side, y), (x + side / 2, y + side * SQRT3 / 2)]]


def triangle_strip(count: int, side: float = 1.0) -> list:
    """Row of alternating up/down triangles along the x axis."""
    h = side * SQRT3 / 2
    tris = []
    for i in range(count):
        k = i // 2
        if i % 2 == 0:
            tris.append([(k * side, 0.0), ((k + 1) * side, 0.0), ((k + 0.5) * side, h)])
        else:
            tris.append([((k + 1) * side, 0.0), ((k + 1.5) * side, h), ((k + 0.5) * side, h)])
    return tris


def hexagon(side: float = 1.0) -> list:
    """Six triangles around the origin."""
    pts = [(side * math.cos(math.radians(60 * i)), side * math.sin(math.radians(60 * i)))
           for i in range(6)]
    return [[(0.0, 0.0), pts[i], pts[(i + 1) % 6]] for i in range(6)]


BUILTIN_REGIONS = {"triangle": unit_triangle, "hexagon": hexagon}
