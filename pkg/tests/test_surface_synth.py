import itertools
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import load_fixture
from foliagraph.generators import orientations, random_configuration, random_connected_configuration
from foliagraph.graph_core import OPEN_END, EulerianCertificate, make_config, solve_global
from foliagraph.surface_synth import (
    BOTTOM,
    TOP,
    EndpointError,
    StripComplex,
    extract_configuration,
    flip_parity,
    isomorphic,
    local_form,
    pullback_defect,
    render_svg,
    synthesize,
)


def _ends_orientation(c):
    return {e.id: tuple(e.ends) for e in c.edges}


def test_branch2_strips_and_slots():
    c = make_config(["s"], {"L0": [OPEN_END, "s"], "L+": ["s", OPEN_END], "L-": ["s", OPEN_END]},
                    {"s": {"s_up": ["L0", "L+"], "s_down": ["L0", "L-"]}})
    cx = synthesize(c, _ends_orientation(c))
    assert len(cx.strips) == 3
    assert cx.strips["L0"].l == 2 and cx.strips["L0"].k == 1
    glue = {i.micro: (i.a, i.b) for i in cx.identifications}
    # slots follow the sorted micro-edge ids: s_down before s_up
    assert glue["s_down"] == (("L0", BOTTOM, 1), ("L-", TOP, 1))
    assert glue["s_up"] == (("L0", BOTTOM, 2), ("L+", TOP, 1))
    assert not any(i.flip for i in cx.identifications)


def test_triangle_has_one_flip():
    c = load_fixture("triangle")
    cx = synthesize(c, _ends_orientation(c))
    assert len(cx.strips) == 3 and len(cx.identifications) == 3
    assert sum(i.flip for i in cx.identifications) == 1
    assert flip_parity(cx, ["a", "b", "c"]) == 1


def test_single_strip_without_gluing():
    c = make_config(["a", "b"], {"L": ["a", "b"]})
    cx = synthesize(c, _ends_orientation(c))
    assert len(cx.strips) == 1 and cx.identifications == ()
    back = extract_configuration(cx)
    assert isomorphic(back, c)


def test_endpoint_rejected():
    c = load_fixture("endpoint")
    with pytest.raises(EndpointError):
        synthesize(c, _ends_orientation(c))


def test_local_form_values():
    assert local_form(None, 0.25) == pytest.approx(1.0)
    for x in (0.0, 0.5, 1.0):
        assert abs(local_form(None, x)) < 1e-15
    assert -local_form(None, 7 / 8) == pytest.approx(local_form(None, 1 / 8))


def test_local_form_compatible_with_every_gluing():
    for name in ("branch2", "triangle", "hexagon", "slit_pair", "monochrome"):
        c = load_fixture(name)
        for o in itertools.islice(orientations(c), 8):
            cx = synthesize(c, o)
            for ident in cx.identifications:
                for x in (0.01, 0.1, 0.37, 0.9):
                    assert pullback_defect(ident, x) < 1e-12


def test_complex_json_round_trip():
    c = load_fixture("slit_pair")
    cx = synthesize(c, solve_global(c).orientation)
    again = StripComplex.from_dict(cx.to_dict())
    assert again.to_json() == cx.to_json()


def test_svg_structure():
    c = load_fixture("triangle")
    svg = render_svg(synthesize(c, _ends_orientation(c)))
    assert svg.count("<rect") == 3 and svg.count("<path") == 3
    assert "flip" in svg
    b2 = load_fixture("branch2")
    svg = render_svg(synthesize(b2, _ends_orientation(b2)))
    assert svg.count("<rect") == 3 and svg.count("<path") == 2 and "flip" not in svg
    empty = render_svg(StripComplex({}, ()))
    assert empty.startswith("<svg") and "<rect" not in empty


def _cycle_reversal_parity(c, o, cycle):
    """Orientation-reversal parity of a micro-edge cycle at one vertex."""
    emap = c.edge_map()
    micro = {m.id: m for v in c.vertex_ids for m in c.micro(v)}
    vertex = {m.id: v for v in c.vertex_ids for m in c.micro(v)}
    parity = 0
    for mid in cycle:
        a, b = micro[mid].ends
        v = vertex[mid]
        parity ^= int((o[a][0] == v) == (o[b][0] == v))
    return parity


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_identifications_match_micro_edges(seed):
    rng = random.Random(seed)
    c = random_configuration(rng, max_vertices=4, max_edges=6, endpoint_rate=0.0)
    o = next(itertools.islice(orientations(c), rng.randrange(2 ** min(len(c.edges), 6)), None))
    cx = synthesize(c, o)
    assert len(cx.identifications) == sum(len(c.micro(v)) for v in c.vertex_ids)
    used = [i.a for i in cx.identifications] + [i.b for i in cx.identifications]
    assert len(used) == len(set(used))
    for ident in cx.identifications:
        cyc = [ident.micro]
        assert flip_parity(cx, cyc) == _cycle_reversal_parity(c, o, cyc)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_round_trip_for_connected_micrographs(seed):
    c = random_connected_configuration(random.Random(seed), max_vertices=5, max_edges=8)
    for o in itertools.islice(orientations(c), 16):
        assert isomorphic(extract_configuration(synthesize(c, o)), c)


def test_disconnected_micrograph_splits_on_extraction():
    c = make_config(["s"], {"A": ["s", OPEN_END], "B": [OPEN_END, "s"], "C": ["s", OPEN_END],
                            "D": [OPEN_END, "s"]},
                    {"s": {"m": ["A", "B"], "n": ["C", "D"]}})
    back = extract_configuration(synthesize(c, _ends_orientation(c)))
    assert len(back.vertices) == 2


def test_isomorphism_ignores_labels_and_end_order():
    a = load_fixture("branch2")
    b = make_config(["q"], {"X": ["q", OPEN_END], "Y": [OPEN_END, "q"], "Z": ["q", OPEN_END]},
                    {"q": {"u": ["X", "Y"], "w": ["Z", "Y"]}})
    assert isomorphic(a, b)
    assert not isomorphic(a, load_fixture("triangle"))


def test_isolated_vertices_survive_round_trip():
    c = make_config(["s", "t"], {"A": ["s", OPEN_END]}, {})
    cx = synthesize(c, _ends_orientation(c))
    assert cx.isolated == 1
    assert StripComplex.from_dict(cx.to_dict()).isolated == 1
    assert isomorphic(extract_configuration(cx), c)
    lone = make_config(["s"], {}, {})
    assert len(extract_configuration(synthesize(lone, {})).vertices) == 1
