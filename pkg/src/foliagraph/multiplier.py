"""First integrals and Euler multipliers from an eulerian certificate.

Every macro-edge ``L`` oriented ``tail -> head`` by the certificate gets a
strictly increasing profile ``phi_L`` on its chart parameter ``t``. The
profile starts at the level ``a(tail)`` of its tail vertex and ends at
``a(head)``. Near a vertex leaf it follows the quadratic blend
``a +/- eps * q(t / beta)``, which has nonzero slope at the vertex so ``df``
never vanishes there. Between the two blends a cubic smoothstep carries the
value across the gap between levels with matching slopes. Open ends get a
unit budget beyond the blend. Grid nodes take ``f`` from the chart parameter
of their leaf, and ``lambda`` is the pointwise projection of ``grad f`` onto
``omega``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .form_field import SampledOneForm, partial
from .graph_core import OPEN_END, EulerianCertificate
from .leaf_space import LeafSpaceGraph, node_charts

BLEND = 0.1
RESIDUAL_THRESHOLD = 1e-3


class NotEulerian(ValueError):
    """The decision procedure returned an obstruction instead of a certificate."""

    def __init__(self, obstruction):
        super().__init__(f"no Euler multiplier: {obstruction.kind}")
        self.obstruction = obstruction


class ChartGap(RuntimeError):
    """Some nodes lie on leaves that no edge chart resolves."""

    def __init__(self, nodes):
        super().__init__(f"{len(nodes)} nodes without an edge chart, first {nodes[0]}")
        self.nodes = nodes


def _q(v):
    return 1.5 * v - 0.5 * v * v


def _smoothstep(u):
    return u * u * (3.0 - 2.0 * u)


def _rise(u, total, slope):
    """Monotone cubic from 0 to ``total`` on [0, 1] with end slopes ``slope``."""
    return slope * u + (total - slope) * _smoothstep(u)


@dataclass(frozen=True)
class EdgeProfile:
    """The increasing map ``t -> f`` on one oriented edge chart.

    ``lo`` and ``hi`` are the end levels (``None`` for an open end);
    ``reverse`` says the chart runs against the certificate orientation.
    """

    lo: float | None
    hi: float | None
    eps: float
    beta: float = BLEND
    reverse: bool = False

    def __post_init__(self):
        for slope, total in self._pieces():
            if 1.5 * total - 0.5 * slope <= 0 or slope <= 0:
                raise ValueError("blend width too large for the level gap")

    def _pieces(self):
        b, eps = self.beta, self.eps
        if self.lo is not None and self.hi is not None:
            return [(0.5 * eps * (1 - 2 * b) / b, self.hi - self.lo - 2 * eps)]
        if self.lo is not None or self.hi is not None:
            return [(0.5 * eps * (1 - b) / b, 1.0)]
        return []

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.reverse:
            t = 1.0 - t
        b, eps = self.beta, self.eps
        if self.lo is None and self.hi is None:
            return t.copy()
        if self.lo is not None and self.hi is not None:
            slope, total = self._pieces()[0]
            u = np.clip((t - b) / (1 - 2 * b), 0.0, 1.0)
            mid = self.lo + eps + _rise(u, total, slope)
            out = np.where(t <= b, self.lo + eps * _q(np.clip(t, 0, 1) / b), mid)
            return np.where(t >= 1 - b, self.hi - eps * _q(np.clip(1 - t, 0, 1) / b), out)
        slope, total = self._pieces()[0]
        if self.lo is not None:
            u = np.clip((t - b) / (1 - b), 0.0, 1.0)
            return np.where(t <= b, self.lo + eps * _q(np.clip(t, 0, 1) / b),
                            self.lo + eps + _rise(u, total, slope))
        s = 1.0 - t
        u = np.clip((s - b) / (1 - b), 0.0, 1.0)
        return np.where(s <= b, self.hi - eps * _q(np.clip(s, 0, 1) / b),
                        self.hi - eps - _rise(u, total, slope))


def edge_profiles(config, certificate: EulerianCertificate, beta: float = BLEND) -> dict:
    """One :class:`EdgeProfile` per macro-edge of ``config``."""
    out = {}
    for e in config.edges:
        tail, head = certificate.orientation[e.id]
        lo = None if tail == OPEN_END else float(certificate.levels[tail])
        hi = None if head == OPEN_END else float(certificate.levels[head])
        closed = [v for v in (tail, head) if v != OPEN_END]
        eps = float(min(certificate.epsilons[v] for v in closed)) if closed else 0.0
        reverse = tuple(e.ends) != (tail, head)
        out[e.id] = EdgeProfile(lo, hi, eps, beta, reverse)
    return out


def _require_certificate(certificate):
    if not isinstance(certificate, EulerianCertificate):
        raise NotEulerian(certificate)


def build_f(graph: LeafSpaceGraph, certificate, beta: float = BLEND, charts=None) -> np.ndarray:
    """First integral on the node grid (NaN at masked nodes).

    ``charts`` may pass a precomputed ``node_charts(graph)`` result.
    """
    _require_certificate(certificate)
    edges, t = node_charts(graph) if charts is None else charts
    mask = graph.form.mask
    missing = np.argwhere(mask & (edges == ""))
    if len(missing):
        raise ChartGap([tuple(int(i) for i in n) for n in missing])
    f = np.full(mask.shape, np.nan)
    for eid, prof in edge_profiles(graph.configuration, certificate, beta).items():
        sel = mask & (edges == eid)
        f[sel] = prof(t[sel])
    return f


def gradient(f: np.ndarray, form: SampledOneForm):
    return partial(form, f, 0), partial(form, f, 1)


def compute_lambda(f: np.ndarray, form: SampledOneForm):
    """``lambda = (f_x g + f_y h) / (g^2 + h^2)`` and the relative residual field."""
    fx, fy = gradient(f, form)
    g, h = form.w[0], form.w[1]
    lam = (fx * g + fy * h) / (g * g + h * h)
    return lam, residual_field(f, lam, form)


def residual_field(f: np.ndarray, lam: np.ndarray, form: SampledOneForm) -> np.ndarray:
    """``|grad f - lambda omega| / max(1, |grad f|)`` at every node."""
    fx, fy = gradient(f, form)
    g, h = form.w[0], form.w[1]
    return np.hypot(fx - lam * g, fy - lam * h) / np.maximum(1.0, np.hypot(fx, fy))


@dataclass(eq=False)
class MultiplierResult:
    f: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    report: dict
    form: SampledOneForm = field(repr=False)


def _node(form, idx):
    X, Y = form.coords()
    idx = tuple(int(i) for i in idx)
    return {"index": list(idx), "x": float(X[idx]), "y": float(Y[idx])}


def summarize(f, lam, form: SampledOneForm, threshold: float = RESIDUAL_THRESHOLD) -> dict:
    """Pass/fail report for ``df = lambda omega`` with the worst node on failure."""
    mask = form.mask
    fx, fy = gradient(f, form)
    grad = np.where(mask, np.hypot(fx, fy), np.nan)
    res = np.where(mask, residual_field(f, lam, form), np.nan)
    absl = np.where(mask, np.abs(lam), np.nan)
    min_grad = float(np.nanmin(grad)) if np.isfinite(grad).any() else 0.0
    min_lam = float(np.nanmin(absl)) if np.isfinite(absl).any() else 0.0
    max_res = float(np.nanmax(res)) if np.isfinite(res).any() else float("inf")
    pos = int(np.sum(mask & (lam > 0)))
    neg = int(np.sum(mask & (lam < 0)))
    sign = 1 if pos >= neg else -1
    failures = []
    bad_defined = mask & ~(np.isfinite(f) & np.isfinite(lam))
    if bad_defined.any():
        failures.append(("undefined value", np.argwhere(bad_defined)[0]))
    if not min_grad > 0:
        failures.append(("grad f vanishes", np.unravel_index(np.nanargmin(grad), grad.shape)))
    if not min_lam > 0:
        failures.append(("lambda vanishes", np.unravel_index(np.nanargmin(absl), absl.shape)))
    wrong = mask & (sign * lam < 0)
    if wrong.any():
        failures.append(("lambda changes sign", np.argwhere(wrong)[0]))
    if not max_res < threshold:
        failures.append(("residual above threshold", np.unravel_index(np.nanargmax(res), res.shape)))
    report = {
        "passed": not failures,
        "min_abs_grad_f": min_grad,
        "min_abs_lambda": min_lam,
        "max_rel_residual": max_res,
        "lambda_sign": sign,
        "threshold": threshold,
        "failures": [dict(reason=r, **_node(form, i)) for r, i in failures],
    }
    report["worst_node"] = report["failures"][0] if failures else None
    return report


def verify(result: MultiplierResult, threshold: float = RESIDUAL_THRESHOLD) -> dict:
    """Recheck the stored ``f`` and ``lambda`` against the form."""
    return summarize(result.f, result.lam, result.form, threshold)


def construct(graph: LeafSpaceGraph, certificate, beta: float = BLEND,
              threshold: float = RESIDUAL_THRESHOLD) -> MultiplierResult:
    """``f``, ``lambda`` and the verification report for an analyzed form."""
    f = build_f(graph, certificate, beta)
    lam, _ = compute_lambda(f, graph.form)
    return MultiplierResult(f, lam, summarize(f, lam, graph.form, threshold), graph.form)
