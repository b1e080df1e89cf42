"""Euler multipliers for codimension-one foliations via graphical configurations."""

import os as _os

_threads = _os.environ.get("FOLIAGRAPH_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .graph_core import (  # noqa: E402
    OPEN_END,
    GraphicalConfiguration,
    EulerianCertificate,
    make_config,
    validate,
    is_bipartite,
    is_locally_eulerian,
    solve_global,
    brute_force_global,
    assign_levels,
    build_main_graph,
    betti1,
)
