import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from foliagraph.form_field import builtin
from foliagraph.graph_core import EulerianCertificate, solve_global
from foliagraph.leaf_space import analyze, trace_leaf
from foliagraph.multiplier import (
    BLEND, EdgeProfile, MultiplierResult, NotEulerian, build_f, compute_lambda, construct,
    edge_profiles, verify,
)


@pytest.fixture(scope="module")
def branch2():
    graph = analyze(builtin("branch2").sample((65, 33)), fastpath=False)
    cert = solve_global(graph.configuration)
    return graph, cert, construct(graph, cert)


def _slopes(prof, t, d=1e-7):
    return (prof(t + d) - prof(t - d)) / (2 * d)


levels = st.fractions(min_value=0, max_value=4, max_denominator=8)


@settings(max_examples=60, deadline=None)
@given(levels, levels, st.sampled_from([None, "lo", "hi"]), st.booleans())
def test_profiles_monotone_and_c1(a, b, open_end, reverse):
    assume(abs(a - b) >= 1)
    lo, hi = float(min(a, b)), float(max(a, b))
    if open_end == "lo":
        lo = None
    elif open_end == "hi":
        hi = None
    prof = EdgeProfile(lo, hi, 0.25, BLEND, reverse)
    t = np.linspace(0, 1, 2001)
    v = prof(t)
    steps = np.diff(v)
    assert np.all(steps < 0) if reverse else np.all(steps > 0)
    if lo is not None:
        end = v[-1] if reverse else v[0]
        assert end == pytest.approx(lo)
    if hi is not None:
        end = v[0] if reverse else v[-1]
        assert end == pytest.approx(hi)
    # slopes match where the blend meets the middle piece
    for knot in (BLEND, 1 - BLEND):
        left, right = _slopes(prof, knot - 1e-5), _slopes(prof, knot + 1e-5)
        assert left == pytest.approx(right, rel=1e-3, abs=1e-3)


def test_profile_slope_nonzero_at_vertex():
    prof = EdgeProfile(0.0, 1.0, 0.25)
    assert _slopes(prof, 1e-4) == pytest.approx(1.5 * 0.25 / BLEND, rel=1e-2)


def test_profile_rejects_small_gap():
    with pytest.raises(ValueError):
        EdgeProfile(0.0, 0.4, 0.25)


def test_both_open_profile_is_identity():
    t = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(EdgeProfile(None, None, 0.0)(t), t)


def test_levels_separate_edges(branch2):
    graph, cert, result = branch2
    a = float(cert.levels["v0"])
    profiles = edge_profiles(graph.configuration, cert)
    t = np.linspace(0, 1, 101)
    for eid, prof in profiles.items():
        tail, head = cert.orientation[eid]
        vals = prof(t)
        if head == "v0":
            assert vals.max() == pytest.approx(a) and vals.min() < a
        else:
            assert vals.min() == pytest.approx(a) and vals.max() > a


def test_branch2_multiplier_passes(branch2):
    _, _, result = branch2
    report = result.report
    assert report["passed"], report["failures"]
    assert report["min_abs_grad_f"] > 0
    assert report["min_abs_lambda"] > 0
    assert report["max_rel_residual"] < 1e-3
    assert report["worst_node"] is None
    assert verify(result) == report


def test_f_constant_on_leaves(branch2):
    graph, _, result = branch2
    form = graph.form
    _, Y = form.coords()
    for x in (-1.5, -0.25, 0.5, 1.75):
        for y in (-0.6, 0.6):
            tr = trace_leaf((x, y), form)
            # leaves of dx are vertical, so a node column samples the traced leaf
            assert np.max(np.abs(tr.points[:, 0] - x)) < 1e-12
            i = int(round((x - form.box[0]) / form.spacing[0]))
            lo, hi = tr.points[:, 1].min(), tr.points[:, 1].max()
            tol = form.h / 2
            on = form.mask[i] & (Y[i] >= lo - tol) & (Y[i] <= hi + tol)
            assert on.sum() >= form.counts[1] // 2 - 1
            assert np.ptp(result.f[i][on]) < 1e-9


def test_f_monotone_on_transversals(branch2):
    graph, _, result = branch2
    sign = result.report["lambda_sign"]
    for j in range(graph.form.counts[1]):
        row = result.f[:, j]
        row = row[np.isfinite(row)]
        assert np.all(sign * np.diff(row) > 0)


def test_lambda_of_exact_integral():
    form = builtin("dx").sample((33, 33))
    X, _ = form.coords()
    lam, res = compute_lambda(X, form)
    np.testing.assert_allclose(lam, 1.0, atol=1e-12)
    assert np.max(res) < 1e-12
    lam, res = compute_lambda(X ** 3 + X, form)
    np.testing.assert_allclose(lam[1:-1], (3 * X ** 2 + 1)[1:-1], atol=form.h ** 2 * 1.01)
    # smoothstep of the normalized coordinate: lambda = 3 u (1 - u), positive inside
    u = (X + 1) / 2
    lam, _ = compute_lambda(u * u * (3 - 2 * u), form)
    np.testing.assert_allclose(lam[1:-1], (3 * u * (1 - u))[1:-1], atol=form.h ** 2)
    assert np.all(lam[1:-1] > 0)


def test_dx_fastpath_multiplier():
    graph = analyze(builtin("dx").sample((33, 33)))
    result = construct(graph, solve_global(graph.configuration))
    assert result.report["passed"]
    lam = result.lam
    assert np.ptp(lam) < 1e-9 and abs(lam.mean()) > 0


def test_triangle_has_no_multiplier():
    graph = analyze(builtin("branch3").sample((65, 65)))
    obs = solve_global(graph.configuration)
    assert not isinstance(obs, EulerianCertificate)
    with pytest.raises(NotEulerian) as info:
        build_f(graph, obs)
    assert info.value.obstruction.kind == "OddMicroCycle"


def test_injected_sign_flip_detected(branch2):
    graph, _, result = branch2
    lam = result.lam.copy()
    node = (40, 25)
    lam[node] = -lam[node]
    report = verify(MultiplierResult(result.f, lam, {}, result.form))
    assert not report["passed"]
    flip = [f for f in report["failures"] if f["reason"] == "lambda changes sign"]
    assert flip and flip[0]["index"] == list(node)


def test_perturbed_f_fails_on_residual(branch2):
    graph, _, result = branch2
    _, Y = graph.form.coords()
    scale = np.nanmax(np.abs(result.f))
    f = result.f + 0.1 * scale * Y
    report = verify(MultiplierResult(f, result.lam, {}, result.form))
    assert not report["passed"]
    assert any(f["reason"] == "residual above threshold" for f in report["failures"])
    assert report["max_rel_residual"] > 1e-3
