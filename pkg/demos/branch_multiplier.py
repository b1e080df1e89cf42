"""First integral and multiplier for ``dx`` on a slit rectangle.

The slit ``{y = 0, x >= 0}`` makes the two half-leaves just right of the slit
tip inseparable from the leaf through the tip, so the leaf space branches
once. The script traces the leaf space, decides the configuration, builds
``f`` and ``lambda`` and prints them along a row above and below the slit.

Run ``python demos/branch_multiplier.py [nx ny]`` (default 129 65).
"""

import sys

import numpy as np

from foliagraph.form_field import builtin
from foliagraph.graph_core import solve_global, verdict
from foliagraph.leaf_space import analyze
from foliagraph.multiplier import construct


def main(nx=129, ny=65):
    form = builtin("branch2").sample((int(nx), int(ny)))
    graph = analyze(form)
    config = graph.configuration
    print(f"grid {form.counts}, h = {form.h:.4f}")
    for e in config.edges:
        print(f"  edge {e.id}: {e.ends[0]} .. {e.ends[1]}")
    for v in config.vertices:
        print(f"  vertex {v.id}: micro-edges {[(m.id, m.ends) for m in config.micro(v.id)]}")
    cert = solve_global(config)
    print(verdict(config, cert))
    result = construct(graph, cert)
    rep = result.report
    print(f"min|grad f| = {rep['min_abs_grad_f']:.3f}, min|lambda| = {rep['min_abs_lambda']:.3f}, "
          f"max residual = {rep['max_rel_residual']:.1e}, passed: {rep['passed']}")
    X, Y = form.coords()
    cols = np.linspace(0, form.counts[0] - 1, 9).astype(int)
    for j in (form.counts[1] // 4, 3 * form.counts[1] // 4):
        print(f"row y = {Y[0, j]:+.2f}")
        print("  x      " + " ".join(f"{X[i, j]:+6.2f}" for i in cols))
        print("  f      " + " ".join(f"{result.f[i, j]:+6.2f}" for i in cols))
        print("  lambda " + " ".join(f"{result.lam[i, j]:+6.2f}" for i in cols))


if __name__ == "__main__":
    main(*sys.argv[1:])
