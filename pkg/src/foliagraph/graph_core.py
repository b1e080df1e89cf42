"""Graphical configurations and the eulerian decision procedures.

A configuration is a macrograph whose vertices carry micrographs. The
micro-vertices at a vertex ``s`` are the macro-edges incident to ``s``; a
micro-edge joins two of them. Edges that run off to infinity end in the
sentinel :data:`OPEN_END`.

The main entry points are :func:`validate`, :func:`is_locally_eulerian` and
:func:`solve_global`. :func:`brute_force_global` is an enumeration oracle with
the same contract, used to cross-check :func:`solve_global`.
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

OPEN_END = "OPEN_END"

DEFAULT_MAX_FREE = 20
BRUTE_FORCE_MAX_EDGES = 12
EPSILON = Fraction(1, 4)


class SchemaError(ValueError):
    """Malformed configuration document; ``path`` is a JSON pointer."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path or "/"
        self.message = message


class ExhaustionLimit(RuntimeError):
    """Too many free parity classes for exact search."""


class SizeLimit(RuntimeError):
    """Instance exceeds the brute-force oracle's size limit."""


class CycleError(ValueError):
    """The orientation contains an oriented cycle among closed vertices."""


# ---------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class Vertex:
    id: str
    endpoint: bool = False


@dataclass(frozen=True)
class Edge:
    id: str
    ends: tuple[str, str]

    def closed_ends(self) -> tuple[str, ...]:
        return tuple(e for e in self.ends if e != OPEN_END)


@dataclass(frozen=True)
class MicroEdge:
    id: str
    ends: tuple[str, str]


@dataclass(frozen=True, eq=False)
class GraphicalConfiguration:
    """Macrograph with per-vertex micrographs.

    Vertices, edges and micro-edges are stored sorted by id, so two
    configurations built from the same records compare equal.
    """

    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    micrographs: Mapping[str, tuple[MicroEdge, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(sorted(self.vertices, key=lambda v: v.id)))
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=lambda e: e.id)))
        micro = {k: tuple(sorted(v, key=lambda m: m.id)) for k, v in self.micrographs.items()}
        for v in self.vertices:
            micro.setdefault(v.id, ())
        object.__setattr__(self, "micrographs", dict(sorted(micro.items())))

    def __eq__(self, other):
        if not isinstance(other, GraphicalConfiguration):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    @property
    def vertex_ids(self) -> list[str]:
        return [v.id for v in self.vertices]

    @property
    def edge_ids(self) -> list[str]:
        return [e.id for e in self.edges]

    def vertex(self, vid: str) -> Vertex:
        for v in self.vertices:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def edge(self, eid: str) -> Edge:
        for e in self.edges:
            if e.id == eid:
                return e
        raise KeyError(eid)

    def edge_map(self) -> dict[str, Edge]:
        return {e.id: e for e in self.edges}

    def incident(self, vid: str) -> list[str]:
        """Sorted ids of the macro-edges with an end at ``vid`` (its micro-vertices)."""
        return [e.id for e in self.edges if vid in e.ends]

    def micro(self, vid: str) -> tuple[MicroEdge, ...]:
        return tuple(self.micrographs.get(vid, ()))

    def to_dict(self) -> dict:
        return {
            "vertices": [{"id": v.id, "endpoint": v.endpoint} for v in self.vertices],
            "edges": [{"id": e.id, "ends": list(e.ends)} for e in self.edges],
            "micrographs": {
                k: [{"id": m.id, "ends": list(m.ends)} for m in v]
                for k, v in self.micrographs.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc) -> "GraphicalConfiguration":
        return parse_configuration(doc)

    @classmethod
    def from_json(cls, text: str) -> "GraphicalConfiguration":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"invalid JSON: {exc.msg} at line {exc.lineno}") from exc
        return parse_configuration(doc)


def make_config(vertices: Iterable, edges: Mapping[str, Sequence[str]],
                micrographs: Mapping[str, Mapping[str, Sequence[str]]] | None = None,
                endpoints: Iterable[str] = ()) -> GraphicalConfiguration:
    """Shorthand constructor.

    >>> c = make_config(["s"], {"L0": ["OPEN_END", "s"], "L+": ["s", "OPEN_END"]},
    ...                 {"s": {"m": ["L0", "L+"]}})
    >>> c.incident("s")
    ['L+', 'L0']
    """
    endpoints = set(endpoints)
    vs = [Vertex(v, v in endpoints) for v in vertices]
    es = [Edge(k, (str(a), str(b))) for k, (a, b) in edges.items()]
    ms = {k: tuple(MicroEdge(mid, (a, b)) for mid, (a, b) in v.items())
          for k, v in (micrographs or {}).items()}
    return GraphicalConfiguration(tuple(vs), tuple(es), ms)


def _expect(cond: bool, path: str, message: str):
    if not cond:
        raise SchemaError(path, message)


def parse_configuration(doc) -> GraphicalConfiguration:
    """Build a configuration from its JSON document, checking the schema."""
    _expect(isinstance(doc, dict), "", "expected an object")
    for key in ("vertices", "edges"):
        _expect(key in doc, "", f"missing key '{key}'")
    _expect(isinstance(doc["vertices"], list), "/vertices", "expected an array")
    _expect(isinstance(doc["edges"], list), "/edges", "expected an array")
    vertices = []
    for i, v in enumerate(doc["vertices"]):
        p = f"/vertices/{i}"
        _expect(isinstance(v, dict), p, "expected an object")
        _expect(isinstance(v.get("id"), str), p + "/id", "expected a string")
        _expect(v["id"] != OPEN_END, p + "/id", "OPEN_END is reserved")
        ep = v.get("endpoint", False)
        _expect(isinstance(ep, bool), p + "/endpoint", "expected a boolean")
        vertices.append(Vertex(v["id"], ep))
    ids = [v.id for v in vertices]
    _expect(len(set(ids)) == len(ids), "/vertices", "duplicate vertex id")
    edges = []
    for i, e in enumerate(doc["edges"]):
        p = f"/edges/{i}"
        _expect(isinstance(e, dict), p, "expected an object")
        _expect(isinstance(e.get("id"), str), p + "/id", "expected a string")
        ends = e.get("ends")
        _expect(isinstance(ends, list) and len(ends) == 2, p + "/ends", "expected two ends")
        for j, end in enumerate(ends):
            _expect(isinstance(end, str), f"{p}/ends/{j}", "expected a string")
            _expect(end == OPEN_END or end in ids, f"{p}/ends/{j}", f"unknown vertex '{end}'")
        edges.append(Edge(e["id"], (ends[0], ends[1])))
    eids = [e.id for e in edges]
    _expect(len(set(eids)) == len(eids), "/edges", "duplicate edge id")
    micro_doc = doc.get("micrographs", {})
    _expect(isinstance(micro_doc, dict), "/micrographs", "expected an object")
    micrographs = {}
    for vid, items in micro_doc.items():
        p = f"/micrographs/{vid}"
        _expect(vid in ids, p, f"unknown vertex '{vid}'")
        _expect(isinstance(items, list), p, "expected an array")
        ms = []
        for i, m in enumerate(items):
            q = f"{p}/{i}"
            _expect(isinstance(m, dict), q, "expected an object")
            _expect(isinstance(m.get("id"), str), q + "/id", "expected a string")
            ends = m.get("ends")
            _expect(isinstance(ends, list) and len(ends) == 2, q + "/ends", "expected two ends")
            for j, end in enumerate(ends):
                _expect(isinstance(end, str), f"{q}/ends/{j}", "expected a string")
            ms.append(MicroEdge(m["id"], (ends[0], ends[1])))
        micrographs[vid] = tuple(ms)
    return GraphicalConfiguration(tuple(vertices), tuple(edges), micrographs)


def validate(config: GraphicalConfiguration) -> list[str]:
    """Return the list of invariant violations (empty when the configuration is valid)."""
    problems = []
    emap = config.edge_map()
    vids = set(config.vertex_ids)
    for e in config.edges:
        for end in e.ends:
            if end != OPEN_END and end not in vids:
                problems.append(f"edge {e.id}: unknown vertex {end}")
        if e.ends[0] == e.ends[1] and e.ends[0] != OPEN_END:
            problems.append(f"edge {e.id}: loop at vertex {e.ends[0]}")
    seen = defaultdict(int)
    for vid, ms in config.micrographs.items():
        if vid not in vids:
            problems.append(f"micrograph of unknown vertex {vid}")
            continue
        if ms and config.vertex(vid).endpoint:
            problems.append(f"vertex {vid}: endpoint vertex with non-empty micrograph")
        for m in ms:
            seen[m.id] += 1
            a, b = m.ends
            if a == b:
                problems.append(f"micro-edge {m.id} at {vid}: micro-edge ends equal")
            for end in (a, b):
                if end not in emap or vid not in emap[end].ends:
                    problems.append(f"micro-edge {m.id} at {vid}: non-incident micro-vertex {end}")
    for mid, count in sorted(seen.items()):
        if count > 1:
            problems.append(f"micro-edge {mid}: id used {count} times")
    return problems


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class EulerianCertificate:
    orientation: dict[str, tuple[str, str]]
    bipartitions: dict[str, dict[str, str]]
    levels: dict[str, Fraction]
    epsilons: dict[str, Fraction]

    kind = "EulerianCertificate"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "orientation": {k: list(v) for k, v in sorted(self.orientation.items())},
            "bipartitions": {k: dict(sorted(v.items())) for k, v in sorted(self.bipartitions.items())},
            "levels": {k: str(v) for k, v in sorted(self.levels.items())},
            "epsilons": {k: str(v) for k, v in sorted(self.epsilons.items())},
        }


@dataclass(frozen=True)
class EndpointPresent:
    vertex: str
    kind = "EndpointPresent"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "vertex": self.vertex}


@dataclass(frozen=True)
class OddMicroCycle:
    """Odd cycle in the micrograph at ``vertex``, as micro-edge ids in cyclic order."""

    vertex: str
    cycle: tuple[str, ...]
    kind = "OddMicroCycle"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "vertex": self.vertex, "cycle": list(self.cycle)}


@dataclass(frozen=True)
class ParityContradiction:
    """Closed walk of odd length in the main graph.

    ``nodes[i]`` and ``nodes[i+1]`` (cyclically) are joined by ``edges[i]``.
    Nodes are ``(vertex, edge)`` pairs; edges are ``("micro", vertex, id)`` or
    ``("macro", id)``.
    """

    nodes: tuple[tuple[str, str], ...]
    edges: tuple[tuple[str, ...], ...]
    kind = "ParityContradiction"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "nodes": [list(n) for n in self.nodes],
                "edges": [list(e) for e in self.edges]}


@dataclass(frozen=True)
class OrientedMonochromeCycle:
    """Oriented cycle ``s1 L1 s2 L2 ... sN LN`` under ``orientation``.

    Every ``L_i`` has its tail at ``s_i``, so it lies in the + class of the
    micrograph at ``s_i``. ``orientation`` is the compatible orientation that
    was refuted; it satisfies the micro-edge sign condition.
    """

    cycle: tuple[str, ...]
    orientation: dict[str, tuple[str, str]]
    kind = "OrientedMonochromeCycle"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cycle": list(self.cycle),
                "orientation": {k: list(v) for k, v in sorted(self.orientation.items())}}


Obstruction = Union[EndpointPresent, OddMicroCycle, ParityContradiction, OrientedMonochromeCycle]


def obstruction_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "EndpointPresent":
        return EndpointPresent(doc["vertex"])
    if kind == "OddMicroCycle":
        return OddMicroCycle(doc["vertex"], tuple(doc["cycle"]))
    if kind == "ParityContradiction":
        return ParityContradiction(tuple(tuple(n) for n in doc["nodes"]),
                                   tuple(tuple(e) for e in doc["edges"]))
    if kind == "OrientedMonochromeCycle":
        return OrientedMonochromeCycle(tuple(doc["cycle"]),
                                       {k: tuple(v) for k, v in doc["orientation"].items()})
    raise SchemaError("/kind", f"unknown obstruction kind {kind!r}")


# ---------------------------------------------------------------------------
# plain multigraphs


@dataclass(frozen=True)
class Multigraph:
    """Finite multigraph; ``edges`` are ``(key, u, v)`` triples."""

    nodes: tuple
    edges: tuple

    def adjacency(self) -> dict:
        adj = {n: [] for n in self.nodes}
        for key, u, v in self.edges:
            adj[u].append((key, v))
            adj[v].append((key, u))
        return adj


class _UnionFind:
    def __init__(self, items=()):
        self.parent = {x: x for x in items}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if str(rb) < str(ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def betti1(graph: Multigraph) -> int:
    """First Betti number ``|E| - |V| + #components``.

    >>> betti1(Multigraph((1, 2, 3), (("a", 1, 2), ("b", 2, 3), ("c", 3, 1))))
    1
    """
    uf = _UnionFind(graph.nodes)
    for _, u, v in graph.edges:
        uf.union(u, v)
    components = len({uf.find(n) for n in graph.nodes})
    return len(graph.edges) - len(graph.nodes) + components


def components(graph: Multigraph) -> int:
    uf = _UnionFind(graph.nodes)
    for _, u, v in graph.edges:
        uf.union(u, v)
    return len({uf.find(n) for n in graph.nodes})


def open_node(edge_id: str, position: int) -> tuple[str, str, int]:
    return (OPEN_END, edge_id, position)


def macrograph(config: GraphicalConfiguration) -> Multigraph:
    """Γ as a multigraph, with one extra node per OPEN_END half-edge."""
    nodes = list(config.vertex_ids)
    edges = []
    for e in config.edges:
        ends = []
        for i, end in enumerate(e.ends):
            if end == OPEN_END:
                nodes.append(open_node(e.id, i))
                ends.append(open_node(e.id, i))
            else:
                ends.append(end)
        edges.append((e.id, ends[0], ends[1]))
    return Multigraph(tuple(nodes), tuple(edges))


def micrograph(config: GraphicalConfiguration, vid: str) -> Multigraph:
    """γ_σ: nodes are the incident macro-edges, edges the micro-edges."""
    return Multigraph(tuple(config.incident(vid)),
                      tuple((m.id, m.ends[0], m.ends[1]) for m in config.micro(vid)))


def build_main_graph(config: GraphicalConfiguration) -> Multigraph:
    """The main graph μ: every vertex of Γ replaced by its micrograph."""
    nodes = []
    edges = []
    for v in config.vertices:
        for eid in config.incident(v.id):
            nodes.append((v.id, eid))
        for m in config.micro(v.id):
            edges.append((("micro", v.id, m.id), (v.id, m.ends[0]), (v.id, m.ends[1])))
    for e in config.edges:
        ends = []
        for i, end in enumerate(e.ends):
            if end == OPEN_END:
                nodes.append(open_node(e.id, i))
                ends.append(open_node(e.id, i))
            else:
                ends.append((end, e.id))
        edges.append((("macro", e.id), ends[0], ends[1]))
    return Multigraph(tuple(nodes), tuple(edges))


def micrographs_connected(config: GraphicalConfiguration) -> bool:
    """True when every micrograph with at least one micro-vertex is connected.

    This holds for configurations read off a foliation (each leaf of a vertex
    class limits onto its incident edges), and it is the hypothesis under which
    ``betti1(μ) = betti1(Γ) + Σ betti1(γ_σ)``.
    """
    for v in config.vertices:
        g = micrograph(config, v.id)
        if g.nodes and components(g) != 1:
            return False
    return True


def betti_defect(config: GraphicalConfiguration) -> int:
    """``betti1(μ) - betti1(Γ) - Σ betti1(γ_σ)``; zero when micrographs are connected."""
    total = betti1(build_main_graph(config)) - betti1(macrograph(config))
    return total - sum(betti1(micrograph(config, v)) for v in config.vertex_ids)


# ---------------------------------------------------------------------------
# bipartiteness


def two_colour(graph: Multigraph, order: Sequence | None = None):
    """BFS 2-colouring.

    Returns ``(colours, None)`` with colours in {0, 1}, each component's first
    node (in ``order``) coloured 0, or ``(None, (nodes, keys))`` describing an
    odd cycle: ``keys[i]`` joins ``nodes[i]`` to ``nodes[i+1]`` cyclically.
    """
    adj = graph.adjacency()
    for n in adj:
        adj[n].sort(key=lambda kv: str(kv[0]))
    order = list(order) if order is not None else sorted(graph.nodes, key=str)
    colour, parent, depth = {}, {}, {}
    for root in order:
        if root in colour:
            continue
        colour[root], parent[root], depth[root] = 0, None, 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for key, w in adj[u]:
                if parent[u] is not None and parent[u][0] == key:
                    continue
                if w not in colour:
                    colour[w], parent[w], depth[w] = 1 - colour[u], (key, u), depth[u] + 1
                    queue.append(w)
                elif colour[w] == colour[u]:
                    return None, _odd_cycle(u, w, key, parent, depth)
    return colour, None


def _odd_cycle(u, w, key, parent, depth):
    up, wp = [u], [w]
    upk, wpk = [], []
    a, b = u, w
    while depth[a] > depth[b]:
        k, a = parent[a]
        upk.append(k)
        up.append(a)
    while depth[b] > depth[a]:
        k, b = parent[b]
        wpk.append(k)
        wp.append(b)
    while a != b:
        k, a = parent[a]
        upk.append(k)
        up.append(a)
        k, b = parent[b]
        wpk.append(k)
        wp.append(b)
    # cycle: lca -> ... -> u -> w -> ... -> lca
    nodes = list(reversed(up)) + wp[:-1]
    keys = list(reversed(upk)) + [key] + wpk
    return tuple(nodes), tuple(keys)


def is_bipartite(config: GraphicalConfiguration, vid: str):
    """Canonical bipartition of the micrograph at ``vid`` or an :class:`OddMicroCycle`.

    In each component the lexicographically smallest macro-edge gets ``"+"``.
    """
    g = micrograph(config, vid)
    colours, odd = two_colour(g, order=sorted(g.nodes))
    if odd is not None:
        return OddMicroCycle(vid, odd[1])
    return {n: "+" if c == 0 else "-" for n, c in sorted(colours.items())}


def brute_force_bipartite(config: GraphicalConfiguration, vid: str) -> bool:
    """Exhaustive 2-colouring check (oracle for :func:`is_bipartite`)."""
    nodes = config.incident(vid)
    ms = config.micro(vid)
    for bits in itertools.product((0, 1), repeat=len(nodes)):
        c = dict(zip(nodes, bits))
        if all(c[m.ends[0]] != c[m.ends[1]] for m in ms):
            return True
    return False


def is_locally_eulerian(config: GraphicalConfiguration):
    """``None`` when locally eulerian, else the first obstruction by sorted vertex id."""
    for v in config.vertices:
        if v.endpoint:
            return EndpointPresent(v.id)
        res = is_bipartite(config, v.id)
        if isinstance(res, OddMicroCycle):
            return res
    return None


# ---------------------------------------------------------------------------
# orientations


def orientation_from_flips(config: GraphicalConfiguration, flips: Mapping[str, int]) -> dict:
    """Orientation that reverses ``ends`` exactly where ``flips[L]`` is 1."""
    out = {}
    for e in config.edges:
        a, b = e.ends
        out[e.id] = (b, a) if flips.get(e.id, 0) else (a, b)
    return out


def bipartitions_from_orientation(config, orientation) -> dict[str, dict[str, str]]:
    return {v: {eid: "+" if orientation[eid][0] == v else "-" for eid in config.incident(v)}
            for v in config.vertex_ids}


def signs_respected(config, orientation) -> bool:
    """Every micro-edge joins an outgoing to an incoming macro-edge."""
    for v in config.vertex_ids:
        for m in config.micro(v):
            a, b = m.ends
            if (orientation[a][0] == v) == (orientation[b][0] == v):
                return False
    return True


def find_oriented_cycle(config, orientation) -> tuple[str, ...] | None:
    """An oriented cycle ``(s1, L1, s2, L2, ...)`` among closed vertices, or None."""
    out = defaultdict(list)
    for e in config.edges:
        tail, head = orientation[e.id]
        if tail != OPEN_END and head != OPEN_END:
            out[tail].append((e.id, head))
    for k in out:
        out[k].sort()
    state: dict[str, int] = {}
    for start in config.vertex_ids:
        if start in state:
            continue
        # iterative DFS; each frame remembers the edge used to enter it
        stack = [(start, iter(out[start]), None)]
        state[start] = 1
        while stack:
            node, it, _ = stack[-1]
            step = next(it, None)
            if step is None:
                state[node] = 2
                stack.pop()
                continue
            eid, nxt = step
            if state.get(nxt) == 1:
                idx = [frame[0] for frame in stack].index(nxt)
                cyc = []
                entering = [frame[2] for frame in stack[idx + 1:]] + [eid]
                for frame, e2 in zip(stack[idx:], entering):
                    cyc.extend([frame[0], e2])
                return tuple(cyc)
            if nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(out[nxt]), eid))
    return None


def assign_levels(config: GraphicalConfiguration, orientation):
    """Longest-path layering ``a`` and the constant ``ε = 1/4``.

    >>> c = make_config(["a", "b", "c"], {"L1": ["a", "b"], "L2": ["b", "c"]})
    >>> levels, eps = assign_levels(c, {"L1": ("a", "b"), "L2": ("b", "c")})
    >>> [str(levels[v]) for v in "abc"]
    ['0', '1', '2']
    """
    if find_oriented_cycle(config, orientation) is not None:
        raise CycleError("orientation has an oriented cycle")
    indeg = {v: 0 for v in config.vertex_ids}
    out = defaultdict(list)
    for e in config.edges:
        tail, head = orientation[e.id]
        if tail != OPEN_END and head != OPEN_END:
            out[tail].append(head)
            indeg[head] += 1
    level = {v: 0 for v in config.vertex_ids}
    queue = deque(sorted(v for v, d in indeg.items() if d == 0))
    while queue:
        v = queue.popleft()
        for w in sorted(out[v]):
            level[w] = max(level[w], level[v] + 1)
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    levels = {v: Fraction(level[v]) for v in config.vertex_ids}
    epsilons = {v: EPSILON for v in config.vertex_ids}
    return levels, epsilons


def _certificate(config, orientation) -> EulerianCertificate:
    levels, eps = assign_levels(config, orientation)
    return EulerianCertificate(dict(orientation), bipartitions_from_orientation(config, orientation),
                               levels, eps)


def parity_witness(config: GraphicalConfiguration):
    """An odd closed walk of μ, or None when μ is bipartite."""
    mu = build_main_graph(config)
    colours, odd = two_colour(mu)
    if odd is None:
        return None
    nodes, keys = odd
    return ParityContradiction(tuple(tuple(n) for n in nodes), tuple(tuple(k) for k in keys))


class _ParityUnionFind:
    """Union-find over edge ids storing each item's parity relative to its root."""

    def __init__(self, items):
        self.parent = {x: x for x in items}
        self.parity = {x: 0 for x in items}

    def find(self, x):
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        root = x
        acc = 0
        for y in reversed(path):
            acc ^= self.parity[y]
            self.parity[y] = acc
            self.parent[y] = root
        return root

    def relate(self, a, b, diff) -> bool:
        """Impose ``o_a xor o_b = diff``; False on contradiction."""
        ra, rb = self.find(a), self.find(b)
        pa, pb = self.parity[a], self.parity[b]
        if ra == rb:
            return (pa ^ pb) == diff
        if rb < ra:
            ra, rb, pa, pb = rb, ra, pb, pa
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ diff
        return True


def _cycle_edges(config) -> set[str]:
    """Closed-closed macro-edges that lie on some cycle of Γ (non-bridges)."""
    closed = [e for e in config.edges if OPEN_END not in e.ends]
    result = set()
    for e in closed:
        uf = _UnionFind(config.vertex_ids)
        for f in closed:
            if f.id != e.id:
                uf.union(*f.ends)
        if uf.find(e.ends[0]) == uf.find(e.ends[1]):
            result.add(e.id)
    return result


def solve_global(config: GraphicalConfiguration, max_free: int = DEFAULT_MAX_FREE):
    """Decide global eulerianity; return a certificate or an obstruction.

    Orientation choices are parity variables per macro-edge, tied together by
    micro-edges. Each parity class has a canonical baseline: its smallest edge
    gets its tail at its smallest closed end. Classes that cannot influence
    condition (c), because none of their edges lies on a cycle of Γ, keep the
    baseline; the others are searched exhaustively in binary-counter order.
    """
    local = is_locally_eulerian(config)
    if local is not None:
        return local
    emap = config.edge_map()
    uf = _ParityUnionFind(config.edge_ids)
    for v in config.vertex_ids:
        for m in config.micro(v):
            a, b = m.ends
            ca = 1 if emap[a].ends[0] == v else 0
            cb = 1 if emap[b].ends[0] == v else 0
            if not uf.relate(a, b, 1 ^ ca ^ cb):
                return parity_witness(config)
    classes = defaultdict(list)
    for eid in config.edge_ids:
        classes[uf.find(eid)].append(eid)
    # baseline flip bits per class
    base = {}
    for root, members in classes.items():
        first = min(members)
        e = emap[first]
        closed = sorted(e.closed_ends())
        if closed:
            want_flip = 0 if e.ends[0] == closed[0] else 1
        else:
            want_flip = 0
        # o_first = b xor parity(first) -> choose b so that o_first = want_flip
        base[root] = want_flip ^ uf.parity[first]
    cyc = _cycle_edges(config)
    free = sorted((min(m), root) for root, m in classes.items() if any(x in cyc for x in m))
    if len(free) > max_free:
        raise ExhaustionLimit(f"{len(free)} free parity classes exceed the bound {max_free}")
    first_orientation = None
    for counter in range(2 ** len(free)):
        bits = dict(base)
        for i, (_, root) in enumerate(free):
            if (counter >> i) & 1:
                bits[root] ^= 1
        flips = {eid: bits[uf.find(eid)] ^ uf.parity[eid] for eid in config.edge_ids}
        orientation = orientation_from_flips(config, flips)
        if first_orientation is None:
            first_orientation = orientation
        if find_oriented_cycle(config, orientation) is None:
            return _certificate(config, orientation)
    return OrientedMonochromeCycle(find_oriented_cycle(config, first_orientation), first_orientation)


def brute_force_global(config: GraphicalConfiguration):
    """Enumerate all 2^|E| orientations; same contract as :func:`solve_global`."""
    if len(config.edges) > BRUTE_FORCE_MAX_EDGES:
        raise SizeLimit(f"{len(config.edges)} edges exceed {BRUTE_FORCE_MAX_EDGES}")
    if any(v.endpoint for v in config.vertices):
        # report in the same sorted-id order as the local check
        return is_locally_eulerian(config)
    feasible = None
    any_signed = None
    for bits in itertools.product((0, 1), repeat=len(config.edges)):
        orientation = orientation_from_flips(config, dict(zip(config.edge_ids, bits)))
        if not signs_respected(config, orientation):
            continue
        if any_signed is None:
            any_signed = orientation
        if find_oriented_cycle(config, orientation) is None:
            feasible = orientation
            break
    if feasible is not None:
        return _certificate(config, feasible)
    local = is_locally_eulerian(config)
    if local is not None:
        return local
    if any_signed is None:
        return parity_witness(config)
    return OrientedMonochromeCycle(find_oriented_cycle(config, any_signed), any_signed)


# ---------------------------------------------------------------------------
# verification of results


def verify_certificate(config: GraphicalConfiguration, cert: EulerianCertificate) -> list[str]:
    """Check a certificate against the configuration; returns problems found."""
    problems = []
    emap = config.edge_map()
    if set(cert.orientation) != set(emap):
        return ["orientation does not cover the edges"]
    for eid, (t, h) in cert.orientation.items():
        if sorted((t, h)) != sorted(emap[eid].ends):
            problems.append(f"edge {eid}: orientation does not match ends")
    for v in config.vertices:
        if v.endpoint:
            problems.append(f"vertex {v.id}: endpoint")
        signs = cert.bipartitions.get(v.id, {})
        for eid in config.incident(v.id):
            want = "+" if cert.orientation[eid][0] == v.id else "-"
            if signs.get(eid) != want:
                problems.append(f"vertex {v.id}: sign of {eid} incompatible with orientation")
        for m in config.micro(v.id):
            if signs.get(m.ends[0]) == signs.get(m.ends[1]):
                problems.append(f"micro-edge {m.id}: joins equal signs")
    for eid, (t, h) in cert.orientation.items():
        if t != OPEN_END and h != OPEN_END and not cert.levels[t] < cert.levels[h]:
            problems.append(f"edge {eid}: levels not increasing")
    for v in config.vertex_ids:
        eps = cert.epsilons[v]
        if eps <= 0:
            problems.append(f"vertex {v}: epsilon not positive")
        gaps = [abs(cert.levels[w] - cert.levels[v])
                for e in config.edges if v in e.ends
                for w in e.closed_ends() if w != v]
        if gaps and not 3 * eps < min(gaps):
            problems.append(f"vertex {v}: epsilon too large")
    return problems


def verify_obstruction(config: GraphicalConfiguration, obs) -> bool:
    """Re-check a witness in isolation."""
    emap = config.edge_map()
    if isinstance(obs, EndpointPresent):
        return obs.vertex in config.vertex_ids and config.vertex(obs.vertex).endpoint
    if isinstance(obs, OddMicroCycle):
        if obs.vertex not in config.vertex_ids or len(obs.cycle) % 2 == 0:
            return False
        micro = {m.id: m for m in config.micro(obs.vertex)}
        if any(mid not in micro for mid in obs.cycle) or len(set(obs.cycle)) != len(obs.cycle):
            return False
        return _closed_walk([micro[mid].ends for mid in obs.cycle])
    if isinstance(obs, ParityContradiction):
        n = len(obs.nodes)
        if n == 0 or n != len(obs.edges) or n % 2 == 0:
            return False
        mu = build_main_graph(config)
        ends = {tuple(k): {tuple(u), tuple(v)} for k, u, v in mu.edges}
        for i, key in enumerate(obs.edges):
            a, b = tuple(obs.nodes[i]), tuple(obs.nodes[(i + 1) % n])
            if tuple(key) not in ends or ends[tuple(key)] != {a, b}:
                return False
        return len(set(map(tuple, obs.edges))) == n
    if isinstance(obs, OrientedMonochromeCycle):
        orient = obs.orientation
        if set(orient) != set(emap) or not signs_respected(config, orient):
            return False
        for eid, (t, h) in orient.items():
            if sorted((t, h)) != sorted(emap[eid].ends):
                return False
        cyc = obs.cycle
        if not cyc or len(cyc) % 2:
            return False
        k = len(cyc) // 2
        for i in range(k):
            s, eid, s2 = cyc[2 * i], cyc[2 * i + 1], cyc[(2 * i + 2) % len(cyc)]
            if eid not in orient or orient[eid] != (s, s2):
                return False
        return True
    return False


def _closed_walk(pairs: list) -> bool:
    """Whether consecutive unordered pairs chain into a closed walk."""
    if not pairs:
        return False
    for start in pairs[0]:
        cur = start
        ok = True
        for a, b in pairs:
            if cur == a:
                cur = b
            elif cur == b:
                cur = a
            else:
                ok = False
                break
        if ok and cur == start:
            return True
    return False


def result_to_dict(result) -> dict:
    return result.to_dict()


def is_certificate(result) -> bool:
    return isinstance(result, EulerianCertificate)


def verdict(config: GraphicalConfiguration, result=None) -> str:
    """One of ``globally-eulerian``, ``locally-eulerian-only``, ``not-locally-eulerian``."""
    if result is None:
        result = solve_global(config)
    if isinstance(result, EulerianCertificate):
        return "globally-eulerian"
    if is_locally_eulerian(config) is None:
        return "locally-eulerian-only"
    return "not-locally-eulerian"


def to_dot(config: GraphicalConfiguration, result=None) -> str:
    """DOT rendering of Γ; micro-edges are listed in each vertex label."""
    lines = ["graph configuration {", "  node [shape=circle];"]
    orient = result.orientation if isinstance(result, EulerianCertificate) else None
    for v in config.vertices:
        micro = "\\n".join(f"{m.id}: {m.ends[0]}-{m.ends[1]}" for m in config.micro(v.id))
        label = v.id + (" (endpoint)" if v.endpoint else "") + ("\\n" + micro if micro else "")
        lines.append(f'  "{v.id}" [label="{label}"];')
    for e in config.edges:
        ends = []
        for i, end in enumerate(e.ends):
            if end == OPEN_END:
                name = f"{OPEN_END}:{e.id}:{i}"
                lines.append(f'  "{name}" [shape=point];')
                ends.append(name)
            else:
                ends.append(end)
        attr = f'label="{e.id}"'
        if orient is not None:
            tail, head = orient[e.id]
            if (tail, head) == e.ends:
                attr += ", dir=forward"
            else:
                attr += ", dir=back"
        lines.append(f'  "{ends[0]}" -- "{ends[1]}" [{attr}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
