"""Random and exhaustive families of graphical configurations.

These feed the oracle comparisons and property checks; every generator is
deterministic given its seed.
"""

from __future__ import annotations

import itertools
import random
from typing import Iterator

from .graph_core import OPEN_END, Edge, GraphicalConfiguration, MicroEdge, Vertex


def _vertex_names(n: int) -> list[str]:
    return [f"v{i}" for i in range(n)]


def random_configuration(rng: random.Random, max_vertices: int = 4, max_edges: int = 7,
                         max_micro: int = 3, endpoint_rate: float = 0.05,
                         allow_open_open: bool = True) -> GraphicalConfiguration:
    """A random valid configuration (loops never occur, multi-edges may)."""
    n = rng.randint(1, max_vertices)
    names = _vertex_names(n)
    slots = names + [OPEN_END]
    edges = []
    for i in range(rng.randint(0, max_edges)):
        while True:
            a, b = rng.choice(slots), rng.choice(slots)
            if a == b and a != OPEN_END:
                continue
            if a == b == OPEN_END and not allow_open_open:
                continue
            break
        edges.append(Edge(f"L{i}", (a, b)))
    vertices, micro = [], {}
    counter = 0
    for v in names:
        incident = [e.id for e in edges if v in e.ends]
        endpoint = len(incident) <= 1 and rng.random() < endpoint_rate
        vertices.append(Vertex(v, endpoint))
        ms = []
        if not endpoint and len(incident) >= 2:
            for _ in range(rng.randint(0, max_micro)):
                a, b = rng.sample(incident, 2)
                ms.append(MicroEdge(f"s{counter}", (a, b)))
                counter += 1
        micro[v] = tuple(ms)
    return GraphicalConfiguration(tuple(vertices), tuple(edges), micro)


def random_connected_configuration(rng: random.Random, max_vertices: int = 5, max_edges: int = 8,
                                   extra_micro: int = 2,
                                   allow_open_open: bool = True) -> GraphicalConfiguration:
    """A random configuration whose micrographs are connected.

    Every vertex has at least one incident edge, and the micro-edges at each
    vertex contain a spanning tree of its incident edges plus up to
    ``extra_micro`` further micro-edges. These are the configurations that a
    foliation can produce.
    """
    while True:
        n = rng.randint(1, max_vertices)
        names = _vertex_names(n)
        slots = names + [OPEN_END]
        m = rng.randint(0, max_edges)
        edges = []
        for i in range(m):
            while True:
                a, b = rng.choice(slots), rng.choice(slots)
                if a == b and (a != OPEN_END or not allow_open_open):
                    continue
                break
            edges.append(Edge(f"L{i}", (a, b)))
        if all(any(v in e.ends for e in edges) for v in names):
            break
    micro = {}
    counter = 0
    for v in names:
        incident = [e.id for e in edges if v in e.ends]
        rng.shuffle(incident)
        ms = []
        for j in range(1, len(incident)):
            ms.append(MicroEdge(f"s{counter}", (incident[j], incident[rng.randrange(j)])))
            counter += 1
        if len(incident) >= 2:
            for _ in range(rng.randint(0, extra_micro)):
                a, b = rng.sample(incident, 2)
                ms.append(MicroEdge(f"s{counter}", (a, b)))
                counter += 1
        micro[v] = tuple(ms)
    return GraphicalConfiguration(tuple(Vertex(v) for v in names), tuple(edges), micro)


def random_tree_configuration(rng: random.Random, max_vertices: int = 8,
                              max_open: int = 4) -> GraphicalConfiguration:
    """Tree macrograph (plus pendant open ends) with tree micrographs."""
    n = rng.randint(1, max_vertices)
    names = _vertex_names(n)
    edges = []
    for i in range(1, n):
        a, b = names[i], names[rng.randrange(i)]
        if rng.random() < 0.5:
            a, b = b, a
        edges.append(Edge(f"L{len(edges)}", (a, b)))
    for _ in range(rng.randint(0, max_open)):
        v = rng.choice(names)
        ends = (v, OPEN_END) if rng.random() < 0.5 else (OPEN_END, v)
        edges.append(Edge(f"L{len(edges)}", ends))
    micro = {}
    counter = 0
    for v in names:
        incident = [e.id for e in edges if v in e.ends]
        rng.shuffle(incident)
        ms = []
        for j in range(1, len(incident)):
            ms.append(MicroEdge(f"s{counter}", (incident[j], incident[rng.randrange(j)])))
            counter += 1
        micro[v] = tuple(ms)
    return GraphicalConfiguration(tuple(Vertex(v) for v in names), tuple(edges), micro)


def _edge_multisets(n: int, max_edges: int, allow_open_open: bool):
    names = _vertex_names(n)
    kinds = list(itertools.combinations(names, 2)) + [(v, OPEN_END) for v in names]
    if allow_open_open:
        kinds.append((OPEN_END, OPEN_END))
    for m in range(max_edges + 1):
        yield from itertools.combinations_with_replacement(kinds, m)


def _canonical_key(n: int, edge_kinds) -> tuple:
    """Smallest relabelled edge multiset over all vertex permutations."""
    names = _vertex_names(n)
    best = None
    for perm in itertools.permutations(range(n)):
        ren = {names[i]: names[perm[i]] for i in range(n)}
        ren[OPEN_END] = OPEN_END
        key = tuple(sorted(tuple(sorted((ren[a], ren[b]))) for a, b in edge_kinds))
        if best is None or key < best:
            best = key
    return best


def enumerate_configurations(max_vertices: int = 3, max_edges: int = 5, max_micro: int = 2,
                             allow_open_open: bool = False) -> Iterator[GraphicalConfiguration]:
    """Every valid endpoint-free configuration up to vertex relabelling of Γ.

    Macrographs are enumerated as multisets of edge kinds, deduplicated under
    vertex permutations; each vertex then gets every multiset of at most
    ``max_micro`` micro-edges over pairs of its incident edges.
    """
    for n in range(1, max_vertices + 1):
        seen = set()
        names = _vertex_names(n)
        for kinds in _edge_multisets(n, max_edges, allow_open_open):
            key = _canonical_key(n, kinds)
            if key in seen:
                continue
            seen.add(key)
            edges = tuple(Edge(f"L{i}", k) for i, k in enumerate(kinds))
            per_vertex = []
            for v in names:
                inc = [e.id for e in edges if v in e.ends]
                pairs = list(itertools.combinations(inc, 2))
                options = []
                for c in range(max_micro + 1):
                    options.extend(itertools.combinations_with_replacement(pairs, c))
                per_vertex.append(options)
            for choice in itertools.product(*per_vertex):
                micro = {}
                counter = 0
                for v, pairs in zip(names, choice):
                    ms = []
                    for a, b in pairs:
                        ms.append(MicroEdge(f"s{counter}", (a, b)))
                        counter += 1
                    micro[v] = tuple(ms)
                yield GraphicalConfiguration(tuple(Vertex(v) for v in names), edges, micro)


def orientations(config: GraphicalConfiguration) -> Iterator[dict]:
    """Every orientation of Γ, in binary-counter order over sorted edge ids."""
    ids = config.edge_ids
    emap = config.edge_map()
    for bits in itertools.product((0, 1), repeat=len(ids)):
        out = {}
        for eid, bit in zip(ids, bits):
            a, b = emap[eid].ends
            out[eid] = (b, a) if bit else (a, b)
        yield out
