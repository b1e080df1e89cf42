"""Strip complexes: foliated surfaces realising a graphical configuration.

Every macro-edge ``L`` becomes a strip ``[0, 1] x (0, 1)`` foliated by the
segments ``{x} x (0, 1)``. The transverse coordinate ``x`` runs from the tail
side ``top`` (``x = 0``) to the head side ``bottom`` (``x = 1``). The boundary
leaf on a side is cut into open slots, one per micro-edge at that end, and
each micro-edge glues one slot of each of its two strips. The closed form
``sin(2 pi x) dx`` is compatible with every gluing.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import networkx as nx

from .graph_core import OPEN_END, Edge, GraphicalConfiguration, MicroEdge, Vertex

TOP, BOTTOM = "top", "bottom"


class EndpointError(ValueError):
    """Synthesis needs an endpoint-free configuration."""


@dataclass(frozen=True)
class Strip:
    """Slot counts on the tail side (``k``) and head side (``l``).

    An open end is a side with a single slot that takes part in no gluing.
    """

    k: int
    l: int


@dataclass(frozen=True)
class Identification:
    a: tuple[str, str, int]
    b: tuple[str, str, int]
    flip: bool
    micro: str


@dataclass(frozen=True, eq=False)
class StripComplex:
    """Strips with their gluings; ``isolated`` counts vertex leaves that no strip touches."""

    strips: dict[str, Strip]
    identifications: tuple[Identification, ...] = field(default_factory=tuple)
    isolated: int = 0

    def to_dict(self) -> dict:
        strips = {eid: {"k": s.k, "l": s.l} for eid, s in sorted(self.strips.items())}
        idents = [{"a": list(i.a), "b": list(i.b), "flip": i.flip, "micro": i.micro}
                  for i in self.identifications]
        return {"strips": strips, "identifications": idents, "isolated": self.isolated}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc) -> "StripComplex":
        strips = {eid: Strip(int(s["k"]), int(s["l"])) for eid, s in doc["strips"].items()}
        idents = tuple(Identification(tuple(i["a"]), tuple(i["b"]), bool(i["flip"]), i["micro"])
                       for i in doc["identifications"])
        return cls(strips, idents, int(doc.get("isolated", 0)))


def synthesize(config: GraphicalConfiguration, orientation) -> StripComplex:
    """Glue one strip per macro-edge according to the micrographs.

    At the side of strip ``L`` facing vertex ``s`` the slots are numbered
    1, 2, ... in the order of the sorted ids of the micro-edges at ``s`` that
    touch ``L``.
    """
    for v in config.vertices:
        if v.endpoint:
            raise EndpointError(f"vertex {v.id} is an endpoint")
    emap = config.edge_map()
    slots = defaultdict(list)  # (edge, vertex) -> micro ids
    for v in config.vertex_ids:
        for m in sorted(config.micro(v), key=lambda m: m.id):
            for eid in m.ends:
                slots[(eid, v)].append(m.id)

    def side(eid, v):
        return TOP if orientation[eid][0] == v else BOTTOM

    strips = {}
    for eid in config.edge_ids:
        tail, head = orientation[eid]
        if sorted((tail, head)) != sorted(emap[eid].ends):
            raise ValueError(f"orientation of {eid} does not match its ends")
        k = 1 if tail == OPEN_END else len(slots[(eid, tail)])
        l = 1 if head == OPEN_END else len(slots[(eid, head)])
        strips[eid] = Strip(k, l)
    idents = []
    for v in config.vertex_ids:
        for m in sorted(config.micro(v), key=lambda m: m.id):
            a, b = m.ends
            sa, sb = side(a, v), side(b, v)
            ia = slots[(a, v)].index(m.id) + 1
            ib = slots[(b, v)].index(m.id) + 1
            idents.append(Identification((a, sa, ia), (b, sb, ib), sa == sb, m.id))
    isolated = sum(1 for v in config.vertex_ids if not config.incident(v))
    return StripComplex(strips, tuple(idents), isolated)


def local_form(strip: Strip | None, x: float) -> float:
    """Coefficient of ``dx`` of the closed form at transverse coordinate ``x``."""
    return math.sin(2 * math.pi * x)


def transition(ident: Identification) -> tuple[int, int]:
    """Transverse coordinate change ``x_b = sign * x_a + shift`` across a gluing.

    Crossing the glued boundary leaf from strip ``a`` continues into strip
    ``b``: without a flip the coordinate shifts by one, with a flip it is
    reflected.
    """
    sa, sb = ident.a[1], ident.b[1]
    if sa == TOP and sb == BOTTOM:
        return 1, 1
    if sa == BOTTOM and sb == TOP:
        return 1, -1
    if sa == TOP:
        return -1, 0
    return -1, 2


def pullback_defect(ident: Identification, x: float) -> float:
    """``|phi^*(local_form) - local_form|`` at ``x`` near the glued leaf of strip ``a``."""
    sign, shift = transition(ident)
    xb = sign * x + shift
    return abs(local_form(None, xb) * sign - local_form(None, x))


def flip_parity(complex_: StripComplex, cycle: list[str]) -> int:
    """Number of flipped gluings (mod 2) along a cyclic list of micro-edge ids."""
    flips = {i.micro: i.flip for i in complex_.identifications}
    return sum(1 for m in cycle if flips[m]) % 2


def extract_configuration(complex_: StripComplex) -> GraphicalConfiguration:
    """Read the graphical configuration back off a strip complex.

    Strip sides glued to each other form the vertex clusters; a closed side
    without slots is a vertex by itself, an open side is an open end. Vertex
    ids ``v0, v1, ...`` follow the smallest ``(edge, side)`` in each cluster,
    and the isolated vertex leaves come last.
    """
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    glued = {i.a[:2] for i in complex_.identifications} | {i.b[:2] for i in complex_.identifications}

    def is_open(eid, side):
        s = complex_.strips[eid]
        return (s.k if side == TOP else s.l) == 1 and (eid, side) not in glued

    for eid in complex_.strips:
        for side in (TOP, BOTTOM):
            if not is_open(eid, side):
                parent[(eid, side)] = (eid, side)
    for ident in complex_.identifications:
        ra, rb = find(ident.a[:2]), find(ident.b[:2])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    clusters = defaultdict(list)
    for node in parent:
        clusters[find(node)].append(node)
    ordered = sorted(clusters.values(), key=min)
    names = {}
    for i, members in enumerate(ordered):
        for node in members:
            names[node] = f"v{i}"
    edges = []
    for eid, s in sorted(complex_.strips.items()):
        top = OPEN_END if is_open(eid, TOP) else names[(eid, TOP)]
        bottom = OPEN_END if is_open(eid, BOTTOM) else names[(eid, BOTTOM)]
        edges.append(Edge(eid, (top, bottom)))
    micro = defaultdict(list)
    for ident in complex_.identifications:
        v = names[ident.a[:2]]
        micro[v].append(MicroEdge(ident.micro, (ident.a[0], ident.b[0])))
    vertices = tuple(Vertex(f"v{i}") for i in range(len(ordered) + complex_.isolated))
    return GraphicalConfiguration(vertices, tuple(edges), {k: tuple(v) for k, v in micro.items()})


# ---------------------------------------------------------------------------
# isomorphism of configurations


def _incidence_graph(config: GraphicalConfiguration) -> nx.MultiGraph:
    g = nx.MultiGraph()
    for v in config.vertices:
        g.add_node(("v", v.id), kind="endpoint" if v.endpoint else "vertex")
    for e in config.edges:
        g.add_node(("e", e.id), kind="edge")
        for i, end in enumerate(e.ends):
            if end == OPEN_END:
                g.add_node(("o", e.id, i), kind="open")
                g.add_edge(("e", e.id), ("o", e.id, i))
            else:
                g.add_edge(("e", e.id), ("v", end))
    for vid, ms in config.micrographs.items():
        for m in ms:
            node = ("m", vid, m.id)
            g.add_node(node, kind="micro")
            g.add_edge(node, ("v", vid))
            for eid in m.ends:
                g.add_edge(node, ("e", eid))
    return g


def _same_ids_isomorphic(a: GraphicalConfiguration, b: GraphicalConfiguration) -> bool | None:
    """Check the vertex map induced by shared edge and micro-edge ids.

    Returns True when that map is an isomorphism and None when it is not
    available or not conclusive; callers then fall back to a general search.
    """
    ea, eb = a.edge_map(), b.edge_map()
    ma = {m.id: (v, m) for v, ms in a.micrographs.items() for m in ms}
    mb = {m.id: (v, m) for v, ms in b.micrographs.items() for m in ms}
    if set(ea) != set(eb) or set(ma) != set(mb):
        return None
    vmap = {}
    for mid, (va, m) in ma.items():
        vb, n = mb[mid]
        if vmap.setdefault(va, vb) != vb or sorted(m.ends) != sorted(n.ends):
            return None
    changed = True
    while changed:
        changed = False
        for eid, e in ea.items():
            f = eb[eid]
            for i in (0, 1):
                x, y = e.ends[i], e.ends[1 - i]
                if x in vmap and y != OPEN_END and y not in vmap:
                    rest = list(f.ends)
                    if vmap[x] not in rest:
                        return None
                    rest.remove(vmap[x])
                    if rest[0] == OPEN_END:
                        return None
                    vmap[y] = rest[0]
                    changed = True
    for v in a.vertices:
        if v.id not in vmap:
            incident = [e for e in ea.values() if v.id in e.ends]
            if len(incident) != 1:
                return None
            f = eb[incident[0].id]
            closed = [x for x in f.ends if x != OPEN_END and x not in vmap.values()]
            if len(set(closed)) != 1:
                return None
            vmap[v.id] = closed[0]
    if len(set(vmap.values())) != len(vmap) or len(vmap) != len(b.vertices):
        return None
    for eid, e in ea.items():
        mapped = sorted(vmap.get(x, OPEN_END) if x != OPEN_END else OPEN_END for x in e.ends)
        if mapped != sorted(eb[eid].ends):
            return None
    if any(a.vertex(x).endpoint != b.vertex(y).endpoint for x, y in vmap.items()):
        return None
    return True


def isomorphic(a: GraphicalConfiguration, b: GraphicalConfiguration) -> bool:
    """Isomorphism of configurations, with edge ends treated as unordered."""
    if (len(a.vertices), len(a.edges)) != (len(b.vertices), len(b.edges)):
        return False
    if sum(map(len, a.micrographs.values())) != sum(map(len, b.micrographs.values())):
        return False
    fast = _same_ids_isomorphic(a, b)
    if fast is True:
        return True
    ga, gb = _incidence_graph(a), _incidence_graph(b)
    return nx.is_isomorphic(ga, gb, node_match=lambda x, y: x["kind"] == y["kind"])


# ---------------------------------------------------------------------------
# rendering


def render_svg(complex_: StripComplex) -> str:
    """SVG drawing: strips in sorted id order on a row, gluing arcs between slots."""
    ids = sorted(complex_.strips)
    w, gap, hgt, top = 120, 60, 160, 80
    width = max(1, len(ids)) * (w + gap) + gap
    height = hgt + 2 * top
    x0 = {eid: gap + i * (w + gap) for i, eid in enumerate(ids)}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
           f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">']
    out.append('<g font-family="monospace" font-size="11">')

    def slot_point(eid, side, idx):
        s = complex_.strips[eid]
        count = s.k if side == TOP else s.l
        x = x0[eid] + w * (idx - 0.5) / max(count, 1)
        y = top if side == TOP else top + hgt
        return x, y

    glued = {i.a[:2] for i in complex_.identifications} | {i.b[:2] for i in complex_.identifications}
    open_sides = {(eid, side) for eid in ids for side, c in
                  ((TOP, complex_.strips[eid].k), (BOTTOM, complex_.strips[eid].l))
                  if c == 1 and (eid, side) not in glued}
    for eid in ids:
        s = complex_.strips[eid]
        out.append(f'<rect class="strip" x="{x0[eid]}" y="{top}" width="{w}" height="{hgt}" '
                   f'fill="#eef3fb" stroke="#224" stroke-width="1.5"/>')
        out.append(f'<text x="{x0[eid] + w / 2}" y="{top + hgt / 2}" text-anchor="middle">'
                   f'{escape(eid)}</text>')
        for side, count in ((TOP, s.k), (BOTTOM, s.l)):
            y = top if side == TOP else top + hgt
            dash = ' stroke-dasharray="4 3"' if (eid, side) in open_sides else ""
            out.append(f'<line x1="{x0[eid]}" y1="{y}" x2="{x0[eid] + w}" y2="{y}" '
                       f'stroke="#224" stroke-width="3"{dash}/>')
            for j in range(1, count):
                x = x0[eid] + w * j / count
                out.append(f'<line class="tick" x1="{x}" y1="{y - 6}" x2="{x}" y2="{y + 6}" '
                           f'stroke="#224"/>')
    for ident in complex_.identifications:
        xa, ya = slot_point(*ident.a)
        xb, yb = slot_point(*ident.b)
        lift_a = -50 if ident.a[1] == TOP else 50
        lift_b = -50 if ident.b[1] == TOP else 50
        colour = "#c22" if ident.flip else "#272"
        out.append(f'<path class="arc" d="M {xa:.2f} {ya:.2f} C {xa:.2f} {ya + lift_a:.2f} '
                   f'{xb:.2f} {yb + lift_b:.2f} {xb:.2f} {yb:.2f}" fill="none" '
                   f'stroke="{colour}" stroke-width="1.5"/>')
        mx, my = (xa + xb) / 2, (ya + yb) / 2 + (lift_a + lift_b) * 0.75
        out.append(f'<text x="{mx:.2f}" y="{my:.2f}" text-anchor="middle" fill="{colour}">'
                   f'{escape(ident.micro)}</text>')
        if ident.flip:
            out.append(f'<text class="flip" x="{mx:.2f}" y="{my + 12:.2f}" text-anchor="middle" '
                       f'fill="#c22">flip</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
