"""Sampled one-forms on boxes, the Frobenius residual and the closing multiplier.

A :class:`SampledOneForm` holds the components of ``omega`` at the nodes of a
uniform grid (``indexing='ij'``, so ``w[0][i, j]`` sits at ``(x_i, y_j)``).
Masked nodes (slits, holes, axis tubes) hold NaN and are ignored by every
operator.

Finite differences are central where both neighbours along an axis are
unmasked nodes of the box. Next to the mask or the box boundary they are
one-sided, second order when two nodes on that side exist and first order
otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .expr import evaluate, parse_expr, print_expr, variables_from_xyz


class VanishingForm(ValueError):
    """The form vanishes (to 1e-12) at an unmasked node."""

    def __init__(self, index):
        super().__init__(f"one-form vanishes at node {index}")
        self.index = index


class DimensionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


VANISH_TOL = 1e-12
INFEASIBLE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class MaskSpec:
    """Removed parts of the box.

    ``slits`` are segments ``(x0, y0, x1, y1)``; nodes within half a grid step
    of a segment are masked (a zero-length segment removes a point).
    ``discs`` are ``(cx, cy, r)``; nodes with planar distance below ``r`` are
    masked, which in 3D removes a tube parallel to the z-axis.
    """

    slits: tuple = ()
    discs: tuple = ()

    def to_dict(self) -> dict:
        return {"slits": [list(s) for s in self.slits], "discs": [list(d) for d in self.discs]}


@dataclass(frozen=True, eq=False)
class SampledOneForm:
    dim: int
    box: tuple
    counts: tuple
    w: tuple
    mask: np.ndarray
    exprs: tuple = ()
    mask_spec: MaskSpec = field(default_factory=MaskSpec)

    @property
    def spacing(self) -> tuple:
        return tuple((self.box[2 * a + 1] - self.box[2 * a]) / (self.counts[a] - 1)
                     for a in range(self.dim))

    @property
    def h(self) -> float:
        """Grid step (the smallest spacing over the axes)."""
        return min(self.spacing)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(self.box[2 * a], self.box[2 * a + 1], self.counts[a])
                for a in range(self.dim)]

    def coords(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def norm(self) -> np.ndarray:
        return np.sqrt(sum(c ** 2 for c in self.w))

    def header(self) -> dict:
        masked = np.flatnonzero(~self.mask.ravel(order="F")).tolist()
        return {"box": list(self.box), "counts": list(self.counts),
                "mask": masked, "exprs": list(self.exprs), "mask_spec": self.mask_spec.to_dict()}


def _segment_distance(px, py, x0, y0, x1, y1):
    dx, dy = x1 - x0, y1 - y0
    ll = dx * dx + dy * dy
    if ll == 0:
        return np.hypot(px - x0, py - y0)
    t = np.clip(((px - x0) * dx + (py - y0) * dy) / ll, 0.0, 1.0)
    return np.hypot(px - (x0 + t * dx), py - (y0 + t * dy))


def build_mask(box, counts, spec: MaskSpec | None) -> np.ndarray:
    """Boolean array, True at nodes inside the domain."""
    dim = len(counts)
    axes = [np.linspace(box[2 * a], box[2 * a + 1], counts[a]) for a in range(dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    mask = np.ones(tuple(counts), dtype=bool)
    if spec is None:
        return mask
    h = min((box[2 * a + 1] - box[2 * a]) / (counts[a] - 1) for a in range(min(dim, 2)))
    x, y = grids[0], grids[1]
    for seg in spec.slits:
        mask &= ~(_segment_distance(x, y, *seg) <= h / 2 * (1 + 1e-9))
    for cx, cy, r in spec.discs:
        mask &= ~(np.hypot(x - cx, y - cy) < r)
    return mask


def sample(exprs: Sequence, box, counts, mask: MaskSpec | None = None) -> SampledOneForm:
    """Evaluate component expressions at the unmasked nodes of a box grid."""
    dim = len(counts)
    if dim not in (2, 3) or len(exprs) != dim or len(box) != 2 * dim:
        raise DimensionError(f"need {dim} components and {2 * dim} box bounds")
    trees = [parse_expr(e) if isinstance(e, str) else e for e in exprs]
    spec = mask or MaskSpec()
    inside = build_mask(box, counts, spec)
    axes = [np.linspace(box[2 * a], box[2 * a + 1], counts[a]) for a in range(dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    env = variables_from_xyz(grids[0][inside], grids[1][inside],
                             grids[2][inside] if dim == 3 else None)
    comps = []
    for tree in trees:
        values = np.full(tuple(counts), np.nan)
        values[inside] = evaluate(tree, env)
        comps.append(values)
    norm = np.sqrt(sum(np.where(inside, c, 1.0) ** 2 for c in comps))
    bad = np.argwhere(inside & (norm < VANISH_TOL))
    if len(bad):
        raise VanishingForm(tuple(int(i) for i in bad[0]))
    return SampledOneForm(dim, tuple(float(b) for b in box), tuple(int(c) for c in counts),
                          tuple(comps), inside, tuple(print_expr(t) for t in trees), spec)


def resample(form: SampledOneForm, counts) -> SampledOneForm:
    """The same expressions and removed parts sampled on another grid."""
    if not form.exprs:
        raise ValueError("form was built from arrays and cannot be resampled")
    return sample(form.exprs, form.box, counts, form.mask_spec)


def refined_counts(counts) -> tuple:
    """Node counts with every grid step halved."""
    return tuple(2 * int(c) - 1 for c in counts)


def from_arrays(components, box, mask=None) -> SampledOneForm:
    """Wrap precomputed component arrays (masked entries become NaN)."""
    comps = [np.array(c, dtype=float) for c in components]
    counts = comps[0].shape
    inside = np.ones(counts, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    comps = tuple(np.where(inside, c, np.nan) for c in comps)
    return SampledOneForm(len(counts), tuple(float(b) for b in box), tuple(counts), comps, inside)


# ---------------------------------------------------------------------------
# finite differences


def node_index(mask: np.ndarray) -> np.ndarray:
    """Running index of unmasked nodes (C order), -1 elsewhere."""
    idx = np.full(mask.shape, -1, dtype=np.int64)
    idx[mask] = np.arange(int(mask.sum()))
    return idx


def diff_matrix(mask: np.ndarray, spacing: float, axis: int):
    """Sparse derivative along ``axis`` on the unmasked nodes.

    Central differences where both neighbours are unmasked, otherwise the
    second-order one-sided stencil when two nodes on one side are available
    and the first-order one when only one is. Returns ``(D, valid)``;
    ``valid`` flags rows with at least one neighbour.
    """
    idx = node_index(mask)
    n = mask.shape[axis]
    pos = np.indices(mask.shape)[axis]

    def shifted(arr, k):
        return np.roll(arr, -k, axis)

    def has(k):
        inside = (pos + k >= 0) & (pos + k <= n - 1)
        return shifted(mask, k) & inside

    me = idx[mask]
    nb = {k: has(k)[mask] for k in (-2, -1, 1, 2)}
    col = {k: shifted(idx, k)[mask] for k in (-2, -1, 1, 2)}
    rows, cols, vals = [], [], []

    def add(sel, offsets_weights):
        for k, wgt in offsets_weights:
            rows.append(me[sel])
            cols.append(me[sel] if k == 0 else col[k][sel])
            vals.append(np.full(int(sel.sum()), wgt / spacing))

    p, m = nb[1], nb[-1]
    add(p & m, ((1, 0.5), (-1, -0.5)))
    fwd = p & ~m
    add(fwd & nb[2], ((0, -1.5), (1, 2.0), (2, -0.5)))
    add(fwd & ~nb[2], ((0, -1.0), (1, 1.0)))
    bwd = m & ~p
    add(bwd & nb[-2], ((0, 1.5), (-1, -2.0), (-2, 0.5)))
    add(bwd & ~nb[-2], ((0, 1.0), (-1, -1.0)))
    size = len(me)
    D = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size))
    return D, (p | m)


def partial(form: SampledOneForm, values: np.ndarray, axis: int) -> np.ndarray:
    """Derivative of a nodal field along ``axis`` (NaN where undefined)."""
    D, valid = diff_matrix(form.mask, form.spacing[axis], axis)
    out = np.full(form.mask.shape, np.nan)
    d = D @ values[form.mask]
    d[~valid] = np.nan
    out[form.mask] = d
    return out


def _interior(shape) -> np.ndarray:
    inner = np.zeros(shape, dtype=bool)
    inner[tuple(slice(1, -1) for _ in shape)] = True
    return inner


@dataclass(frozen=True, eq=False)
class WedgeResult:
    max_abs: float
    field: np.ndarray = field(repr=False)


def wedge_residual(form: SampledOneForm) -> WedgeResult:
    """Pointwise ``omega ^ d omega`` coefficient of ``dx ^ dy ^ dz``.

    Evaluated at unmasked nodes off the box faces; other nodes hold NaN.
    """
    if form.dim != 3:
        raise DimensionError("the Frobenius residual is identically zero in 2D")
    w1, w2, w3 = form.w
    d = [[partial(form, w, a) for a in range(3)] for w in form.w]
    res = (w1 * (d[2][1] - d[1][2]) + w2 * (d[0][2] - d[2][0]) + w3 * (d[1][0] - d[0][1]))
    res = np.where(form.mask & _interior(form.mask.shape), res, np.nan)
    finite = res[np.isfinite(res)]
    return WedgeResult(float(np.max(np.abs(finite))) if finite.size else 0.0, res)


# ---------------------------------------------------------------------------
# closing multiplier


@dataclass(frozen=True, eq=False)
class ClosingResult:
    lam: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    pin: tuple

    feasible = True


@dataclass(frozen=True, eq=False)
class Infeasible:
    residual: float
    lam: np.ndarray | None = field(default=None, repr=False)

    feasible = False


def closing_system(form: SampledOneForm):
    """Sparse ``A`` and ``b`` with ``A @ lam - b`` the components of ``omega ^ d lam - d omega``."""
    mask = form.mask
    D = []
    for a in range(form.dim):
        Da, _ = diff_matrix(mask, form.spacing[a], a)
        D.append(Da)
    w = [c[mask] for c in form.w]
    diag = sp.diags
    if form.dim == 2:
        g, h = w
        A = diag(g) @ D[1] - diag(h) @ D[0]
        b = D[0] @ h - D[1] @ g
        return sp.csr_matrix(A), b
    blocks, rhs = [], []
    for i, j in ((0, 1), (1, 2), (2, 0)):
        blocks.append(diag(w[i]) @ D[j] - diag(w[j]) @ D[i])
        rhs.append(D[i] @ w[j] - D[j] @ w[i])
    return sp.csr_matrix(sp.vstack(blocks)), np.concatenate(rhs)


def closing_multiplier(form: SampledOneForm, pin=None, tikhonov: float = 1e-8, tol: float = 1e-10,
                       threshold: float = INFEASIBLE_THRESHOLD):
    """Least-squares solution of ``omega ^ d lam = d omega``.

    The normal equations, regularised by ``tikhonov * |lam|^2``, are solved by
    conjugate gradients; the minimal-norm solution is then shifted by a
    constant so that ``lam`` vanishes at ``pin`` (default: the first unmasked
    node in index order). Returns a :class:`ClosingResult`, or
    :class:`Infeasible` when the relative residual exceeds ``threshold``.
    """
    mask = form.mask
    idx = node_index(mask)
    if pin is None:
        pin = tuple(int(i) for i in np.argwhere(mask)[0])
    pin = tuple(pin)
    if not mask[pin]:
        raise ValueError(f"pin node {pin} is masked")
    A, b = closing_system(form)
    n = A.shape[1]
    N = (A.T @ A + tikhonov * sp.identity(n)).tocsr()
    rhs = A.T @ b
    count = [0]

    def tick(_):
        count[0] += 1

    sol, info = spla.cg(N, rhs, rtol=tol, atol=0.0, maxiter=10 * n, callback=tick)
    if info > 0:
        raise ConvergenceError(f"conjugate gradients did not converge in {info} iterations")
    lam_flat = sol - sol[idx[pin]]
    r = float(np.linalg.norm(A @ lam_flat - b) / max(1.0, np.linalg.norm(b)))
    lam = np.full(mask.shape, np.nan)
    lam[mask] = lam_flat
    if r > threshold:
        return Infeasible(r, lam)
    return ClosingResult(lam, r, count[0], pin)


# ---------------------------------------------------------------------------
# grid files


def grid_csv(form: SampledOneForm, values: np.ndarray) -> str:
    """CSV text with one row per node, x fastest; masked nodes read ``nan``."""
    names = ["x", "y", "z"][: form.dim]
    coords = [c.ravel(order="F") for c in form.coords()]
    vals = np.where(form.mask, values, np.nan).ravel(order="F")
    lines = [",".join(names + ["value"])]
    for row in zip(*coords, vals):
        lines.append(",".join("nan" if not np.isfinite(v) else repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def read_grid_csv(text: str, counts) -> np.ndarray:
    rows = text.strip().splitlines()[1:]
    vals = np.array([float(r.split(",")[-1]) for r in rows])
    return vals.reshape(tuple(counts), order="F")


def header_json(form: SampledOneForm) -> str:
    return json.dumps(form.header(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# built-in forms

_WPHI = "piecewise(rho < 0.5, 0, piecewise(rho < 1, 4*(rho - 0.5)^2*(rho - 1), rho - 1))"
_WZ = "piecewise(rho < 0.5, (0.25 - rho^2)^2, 0)"


@dataclass(frozen=True)
class Builtin:
    name: str
    exprs: tuple
    box: tuple
    counts: tuple
    mask: MaskSpec = field(default_factory=MaskSpec)
    description: str = ""

    def sample(self, counts=None) -> SampledOneForm:
        return sample(self.exprs, self.box, tuple(counts) if counts else self.counts, self.mask)


BUILTINS = {
    "winding-cylinder": Builtin(
        "winding-cylinder",
        (f"rho*x - ({_WPHI})*y/rho^2", f"rho*y + ({_WPHI})*x/rho^2", _WZ),
        (-2, 2, -2, 2, -2, 2), (64, 64, 64), MaskSpec(discs=((0.0, 0.0, 0.05),)),
        "integrable 3D form with leaves winding around the cylinder rho = 1"),
    "contact": Builtin("contact", ("0", "-x", "1"), (-1, 1, -1, 1, -1, 1), (17, 17, 17),
                       description="dz - x dy, nowhere integrable"),
    "exact-ey": Builtin("exact-ey", ("exp(y)", "0"), (-1, 1, -1, 1), (129, 129),
                        description="e^y dx, closed after multiplying by e^-y"),
    "exact-ey-3d": Builtin("exact-ey-3d", ("exp(y)", "0", "0"), (-1, 1, -1, 1, -1, 1), (33, 33, 33),
                           description="e^y dx in three dimensions"),
    "dx": Builtin("dx", ("1", "0"), (-1, 1, -1, 1), (65, 65), description="dx on a square"),
    "cylinder": Builtin("cylinder", ("y", "1 + x^2"), (-1, 1, -1, 1), (65, 65),
                        description="y dx + (1 + x^2) dy, leaves are graphs over x"),
    "circle": Builtin("circle", ("x", "y"), (-2, 2, -2, 2), (129, 129),
                      MaskSpec(slits=((0.0, 0.0, 0.0, 0.0),)),
                      description="x dx + y dy with the origin removed; leaves are circles"),
    "branch2": Builtin("branch2", ("1", "0"), (-2, 2, -1, 1), (257, 129),
                       MaskSpec(slits=((0.0, 0.0, 2.0, 0.0),)),
                       description="dx on a rectangle slit along {y = 0, x >= 0}"),
    "branch3": Builtin("branch3", ("sin(phi/2)", "cos(phi/2)"), (-1, 1, -1, 1), (129, 129),
                       MaskSpec(slits=((0.0, 0.0, 0.0, 0.0),)),
                       description="three-pronged leaf pattern around a removed point"),
}


def builtin(name: str) -> Builtin:
    try:
        return BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown built-in {name!r}; choose from {sorted(BUILTINS)}") from None
