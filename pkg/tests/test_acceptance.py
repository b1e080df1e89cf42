"""Acceptance criteria 1 to 10.

Each criterion prints one line ``criterion N: PASS|FAIL  <measurements>  (<seconds> s, limit <L> s)``.
Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

import random
import sys
import time

import networkx as nx
import numpy as np
import pytest

from foliagraph.cli import main as cli_main
from foliagraph.form_field import builtin, closing_multiplier, sample, wedge_residual
from foliagraph.generators import (
    enumerate_configurations, orientations, random_configuration, random_connected_configuration,
    random_tree_configuration,
)
from foliagraph.graph_core import (
    EulerianCertificate, OddMicroCycle, betti1, brute_force_bipartite, brute_force_global,
    build_main_graph, is_bipartite, macrograph, micrograph, micrographs_connected, solve_global,
    verdict, verify_certificate, verify_obstruction,
)
from foliagraph.leaf_space import analyze, cylinder_fastpath, refinement_check
from foliagraph.multiplier import construct
from foliagraph.surface_synth import extract_configuration, isomorphic, synthesize

from conftest import load_fixture


def _report(n, passed, detail, elapsed, limit):
    line = (f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}  "
            f"({elapsed:.2f} s, limit {limit} s)")
    print(line, file=sys.stdout, flush=True)
    return passed


def _run(n, limit, body):
    start = time.perf_counter()
    ok, detail = body()
    elapsed = time.perf_counter() - start
    return _report(n, ok and elapsed < limit, detail, elapsed, limit)


# ---------------------------------------------------------------------------


def c1():
    branch2 = load_fixture("branch2")
    triangle = load_fixture("triangle")
    hexagon = load_fixture("hexagon")
    path = is_bipartite(branch2, "v0")
    tri = is_bipartite(triangle, "s")
    hexa = is_bipartite(hexagon, "s")
    ok = (isinstance(path, dict) and brute_force_bipartite(branch2, "v0")
          and isinstance(tri, OddMicroCycle) and len(tri.cycle) == 3
          and not brute_force_bipartite(triangle, "s")
          and isinstance(hexa, dict) and brute_force_bipartite(hexagon, "s")
          and isinstance(solve_global(triangle), OddMicroCycle))
    return ok, (f"path bipartite={isinstance(path, dict)}, triangle odd cycle={getattr(tri, 'cycle', None)}, "
                f"hexagon bipartite={isinstance(hexa, dict)}")


def _agree(c):
    fast, slow = solve_global(c), brute_force_global(c)
    if isinstance(fast, EulerianCertificate) != isinstance(slow, EulerianCertificate):
        return False
    if isinstance(fast, EulerianCertificate):
        return verify_certificate(c, fast) == [] and verify_certificate(c, slow) == []
    return fast.kind == slow.kind and verify_obstruction(c, fast) and verify_obstruction(c, slow)


def c2():
    exhaustive = bad = eulerian = 0
    for c in enumerate_configurations(max_vertices=3, max_edges=5, max_micro=2):
        exhaustive += 1
        ok = _agree(c)
        bad += not ok
        eulerian += isinstance(solve_global(c), EulerianCertificate) if ok else 0
    rng = random.Random(20240602)
    rand_bad = 0
    for _ in range(500):
        c = random_configuration(rng, max_vertices=4, max_edges=10, max_micro=4)
        rand_bad += not _agree(c)
    return bad == 0 and rand_bad == 0, (f"exhaustive {exhaustive} configs ({eulerian} eulerian), "
                                        f"{bad} disagreements; random 500, {rand_bad} disagreements")


def c3():
    rng = random.Random(7)
    fails = 0
    for _ in range(1000):
        c = random_tree_configuration(rng)
        assert betti1(macrograph(c)) == 0
        fails += not isinstance(solve_global(c), EulerianCertificate)
    return fails == 0, f"1000 tree configurations, {fails} not globally eulerian"


def _nx_betti(graph):
    g = nx.MultiGraph()
    g.add_nodes_from(graph.nodes)
    g.add_edges_from((u, v) for _, u, v in graph.edges)
    return g.number_of_edges() - g.number_of_nodes() + nx.number_connected_components(g)


def c4():
    rng = random.Random(11)
    fails = oracle = 0
    for _ in range(1000):
        c = random_connected_configuration(rng)
        assert micrographs_connected(c)
        mu = build_main_graph(c)
        lhs = betti1(mu)
        oracle += lhs != _nx_betti(mu)
        rhs = betti1(macrograph(c)) + sum(betti1(micrograph(c, v)) for v in c.vertex_ids)
        fails += lhs != rhs
    return fails == 0 and oracle == 0, (f"1000 configurations, {fails} identity failures, "
                                        f"{oracle} disagreements with networkx")


def _round_trips(configs):
    checked = fails = 0
    for c in configs:
        for o in orientations(c):
            checked += 1
            fails += not isomorphic(extract_configuration(synthesize(c, o)), c)
    return checked, fails


def c5():
    # exhaustive small family, then random configurations at the full size bounds
    small = (c for c in enumerate_configurations(max_vertices=3, max_edges=5, max_micro=2)
             if micrographs_connected(c))
    n_small, f_small = _round_trips(small)
    rng = random.Random(5)
    big = (random_connected_configuration(rng, max_vertices=5, max_edges=8) for _ in range(300))
    n_big, f_big = _round_trips(big)
    return f_small == 0 and f_big == 0, (f"exhaustive {n_small} and random {n_big} "
                                         f"(configuration, orientation) pairs, {f_small + f_big} failures")


def c6():
    contact = []
    for n in (5, 9, 17, 33):
        field = wedge_residual(sample(["0", "-x", "1"], (-1, 1, -1, 1, -1, 1), (n, n, n))).field
        contact.append(float(np.nanmax(np.abs(np.abs(field) - 1.0))))
    wc = builtin("winding-cylinder")
    r64 = wedge_residual(wc.sample((64, 64, 64))).max_abs
    r128 = wedge_residual(wc.sample((128, 128, 128))).max_abs
    ok = max(contact) <= 1e-9 and r64 < 0.05 and r64 / r128 >= 1.8
    return ok, (f"contact max | |res| - 1 | = {max(contact):.1e}; winding-cylinder "
                f"{r64:.3e} at 64^3, {r128:.3e} at 128^3, ratio {r64 / r128:.2f}")


def c7():
    form = builtin("exact-ey").sample()
    res = closing_multiplier(form)
    _, Y = form.coords()
    pin = res.pin
    expected = -(Y - Y[pin])
    dev = float(np.nanmax(np.abs(res.lam - expected)))
    ok = res.feasible and dev < 1e-2 and res.residual < 1e-6
    return ok, f"max |lambda - (-y + const)| = {dev:.2e}, relative residual = {res.residual:.2e}"


def c8():
    form = builtin("branch2").sample()
    graph = analyze(form)
    config = graph.configuration
    iso = isomorphic(config, load_fixture("branch2"))
    cert = solve_global(config)
    label = verdict(config, cert)
    rep = construct(graph, cert).report if isinstance(cert, EulerianCertificate) else {}
    stable, fine = refinement_check(graph)
    ok = (iso and label == "globally-eulerian" and rep.get("passed")
          and rep["min_abs_grad_f"] > 0 and rep["min_abs_lambda"] > 0
          and rep["max_rel_residual"] < 1e-3 and stable)
    fine_counts = getattr(getattr(fine, "form", None), "counts", None)
    return bool(ok), (f"h = {form.h:.4f}, isomorphic={iso}, {label}, "
                      f"min|grad f| = {rep.get('min_abs_grad_f', 0):.3e}, "
                      f"min|lambda| = {rep.get('min_abs_lambda', 0):.3e}, "
                      f"max residual = {rep.get('max_rel_residual', float('inf')):.2e}, "
                      f"stable at {fine_counts}: {stable}")


def c9(tmp_dir):
    code = cli_main(["analyze", "--builtin", "branch3", "--out", str(tmp_dir)])
    form = builtin("branch3").sample()
    graph = analyze(form)
    obs = solve_global(graph.configuration)
    cycle = getattr(obs, "cycle", ())
    stable, _ = refinement_check(graph)
    ok = code == 2 and isinstance(obs, OddMicroCycle) and len(cycle) == 3 and stable
    return ok, f"exit code {code}, {getattr(obs, 'kind', obs)} {tuple(cycle)}, refinement stable: {stable}"


def c10():
    form = builtin("cylinder").sample()
    fast = cylinder_fastpath(form)
    via_fast = analyze(form)
    traced = analyze(form, fastpath=False)
    same = via_fast.configuration.to_dict() == traced.configuration.to_dict()
    single = [e.ends for e in traced.configuration.edges] == [("OPEN_END", "OPEN_END")]
    ok = fast and via_fast.fastpath is not None and same and single and not traced.configuration.vertices
    return ok, f"fast path applies={fast}, traced configuration identical={same}, single open edge={single}"


# ---------------------------------------------------------------------------


CRITERIA = [(1, 1, c1), (2, 60, c2), (3, 30, c3), (4, 10, c4), (5, 60, c5),
            (6, 60, c6), (7, 30, c7), (8, 120, c8), (10, 60, c10)]


@pytest.mark.parametrize("n, limit, body", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(n, limit, body, capsys):
    with capsys.disabled():
        passed = _run(n, limit, body)
    assert passed


def test_criterion_9(tmp_path, capsys):
    with capsys.disabled():
        passed = _run(9, 120, lambda: c9(tmp_path))
    assert passed


if __name__ == "__main__":
    import tempfile

    results = [_run(n, limit, body) for n, limit, body in CRITERIA]
    with tempfile.TemporaryDirectory() as tmp:
        results.append(_run(9, 120, lambda: c9(tmp)))
    sys.exit(0 if all(results) else 1)
