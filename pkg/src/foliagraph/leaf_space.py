"""Leaf space of a planar sampled one-form by streamline tracing.

Leaves are integral curves of the kernel line field ``(-h, g)`` and
transversals are integral curves of ``(g, h)``. Both are traced as line
fields: every interpolated vector is sign-aligned with the current direction,
so forms that are only defined up to sign (three-pronged patterns) trace
cleanly across their sign flips.

The pipeline works on samples spaced ``h`` along each transversal:

1. trace the leaf through every sample and record where it crosses the
   transversals;
2. two neighbouring samples are *compatible* when every crossing of one that
   lies well inside the domain is matched by a crossing of the other;
3. maximal compatible stretches are *runs*, runs sharing a leaf class form a
   macro-edge, and the break between two runs on a transversal is a sighting
   of a limit leaf, located by bisection;
4. limit leaves that bound the same macro-edge end are inseparable once a
   shrinking normal path confirms it; their classes are the vertices.

Leaves stopping at a point-sized hole (a puncture) are limit leaves rather
than members of a family, which removes the grid artefacts around removed
points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import RectBivariateSpline

from .form_field import DimensionError, SampledOneForm, refined_counts, resample
from .graph_core import OPEN_END, Edge, GraphicalConfiguration, MicroEdge, Vertex, validate
from .surface_synth import isomorphic

KERNEL = "kernel"
NORMAL = "normal"

# stop codes of a traced curve
RUNNING, BOX, MASK, PUNCTURE, CAP, CLOSED = 0, 1, 2, 3, 4, 5
STOP_NAMES = {RUNNING: "running", BOX: "box", MASK: "mask", PUNCTURE: "puncture", CAP: "cap",
              CLOSED: "closed"}

DEFAULT_TUBE = 0.5       # merge tube, in units of h
DEFAULT_ANGLE = 15.0     # merge angle, degrees
DEFAULT_RATIO = 0.7      # normal-path decrease ratio
BISECTION_STEPS = 12
BISECTION_BITS = 4
CHUNK = 4096


class StepFailure(RuntimeError):
    pass


class CoverageFailure(RuntimeError):
    def __init__(self, uncovered):
        super().__init__(f"{len(uncovered)} grid cells are not covered by any transversal")
        self.uncovered = uncovered


class AmbiguityError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# field evaluation


class FieldSampler:
    """Bilinear evaluation of the unit kernel or normal field of a 2D form.

    A point is usable only inside a cell whose four corners are unmasked.
    """

    def __init__(self, form: SampledOneForm):
        if form.dim != 2:
            raise DimensionError("leaf-space analysis needs a planar form")
        self.form = form
        self.x0, self.x1, self.y0, self.y1 = form.box
        self.nx, self.ny = form.counts
        self.hx, self.hy = form.spacing
        self.h = form.h
        m = form.mask
        self.g = np.where(m, form.w[0], 0.0)
        self.k = np.where(m, form.w[1], 0.0)
        self._kernel = (-self.k.ravel(), self.g.ravel())
        self._normal = (self.g.ravel(), self.k.ravel())
        self.cell_ok = m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]
        labels, _ = ndimage.label(~m, structure=np.ones((3, 3), dtype=int))
        punct = np.zeros(labels.max() + 1, dtype=bool)
        for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
            if sl is not None and all(s.stop - s.start <= 3 for s in sl):
                punct[lab] = True
        corners = np.stack([labels[:-1, :-1], labels[1:, :-1], labels[:-1, 1:], labels[1:, 1:]])
        self.cell_code = np.where(self.cell_ok, RUNNING,
                                  np.where(punct[corners.max(axis=0)], PUNCTURE, MASK))
        self.has_puncture = bool(punct.any())
        xs, ys = form.axes()
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        box_dist = np.minimum.reduce([X - self.x0, self.x1 - X, Y - self.y0, self.y1 - Y])
        if m.all():
            self.clearance = box_dist
        else:
            self.clearance = np.minimum(
                box_dist, ndimage.distance_transform_edt(m, sampling=(self.hx, self.hy)))
        self.diameter = math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def locate(self, P):
        fx = (P[:, 0] - self.x0) / self.hx
        fy = (P[:, 1] - self.y0) / self.hy
        inside = (fx >= -1e-9) & (fx <= self.nx - 1 + 1e-9) & (fy >= -1e-9) & (fy <= self.ny - 1 + 1e-9)
        i = np.minimum(np.maximum(np.floor(fx), 0), self.nx - 2).astype(np.int64)
        j = np.minimum(np.maximum(np.floor(fy), 0), self.ny - 2).astype(np.int64)
        # a point on a shared cell edge may use whichever neighbour is valid
        bad = ~self.cell_ok[i, j]
        if bad.any():
            on_x = bad & (fx - i < 1e-9) & (i > 0)
            i = np.where(on_x & self.cell_ok[np.maximum(i - 1, 0), j], i - 1, i)
            bad = ~self.cell_ok[i, j]
            on_y = bad & (fy - j < 1e-9) & (j > 0)
            j = np.where(on_y & self.cell_ok[i, np.maximum(j - 1, 0)], j - 1, j)
        return i, j, fx - i, fy - j, inside

    def code_at(self, P) -> np.ndarray:
        i, j, _, _, inside = self.locate(P)
        return np.where(inside, self.cell_code[i, j], BOX)

    def _components(self, kind):
        if kind == KERNEL:
            return self._kernel
        return self._normal

    def vectors(self, P, ref, kind: str):
        """Unit vectors at ``P`` aligned with ``ref`` and a stop code (0 = usable)."""
        i, j, u, w, inside = self.locate(P)
        AX, AY = self._components(kind)
        f = i * self.ny + j
        ny = self.ny
        vx = np.zeros(len(P))
        vy = np.zeros(len(P))
        for off, wt in ((0, (1 - u) * (1 - w)), (ny, u * (1 - w)), (1, (1 - u) * w), (ny + 1, u * w)):
            ax = AX[f + off]
            ay = AY[f + off]
            if ref is not None:
                wt = np.where(ax * ref[:, 0] + ay * ref[:, 1] < 0, -wt, wt)
            vx += wt * ax
            vy += wt * ay
        norm = np.hypot(vx, vy)
        code = np.where(inside, self.cell_code.ravel()[(i * (self.ny - 1) + j)], BOX)
        code[(code == RUNNING) & (norm < 1e-12)] = MASK
        norm[norm == 0] = 1.0
        return np.column_stack([vx / norm, vy / norm]), code

    def norm_at(self, P) -> np.ndarray:
        i, j, u, w, _ = self.locate(P)
        n = np.hypot(self.g, self.k)
        return ((1 - u) * (1 - w) * n[i, j] + u * (1 - w) * n[i + 1, j]
                + (1 - u) * w * n[i, j + 1] + u * w * n[i + 1, j + 1])

    def clearance_at(self, P) -> np.ndarray:
        i = np.clip(np.rint((P[:, 0] - self.x0) / self.hx).astype(np.int64), 0, self.nx - 1)
        j = np.clip(np.rint((P[:, 1] - self.y0) / self.hy).astype(np.int64), 0, self.ny - 1)
        return self.clearance[i, j]


# ---------------------------------------------------------------------------
# tracing


def _seg_point_distance(A, B, P):
    d = B - A
    ll = np.einsum("ij,ij->i", d, d)
    t = np.where(ll > 0, np.einsum("ij,ij->i", P - A, d) / np.where(ll > 0, ll, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(*(A + t[:, None] * d - P).T)


def _march(sampler: FieldSampler, X0, D0, kind, step, max_len, close_tol):
    """Integrate from ``X0`` along ``D0``; returns per-seed point arrays and codes."""
    n = len(X0)
    X = X0.copy()
    D = D0.copy()
    s = np.full(n, step)
    L = np.zeros(n)
    stop = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    rec_idx = [np.arange(n)]
    rec_pts = [X0.copy()]
    min_step = step / 16
    while active.size:
        Xa, Da = X[active], D[active]
        sa = s[active][:, None]
        k1, c1 = sampler.vectors(Xa, Da, kind)
        k2, c2 = sampler.vectors(Xa + 0.5 * sa * k1, k1, kind)
        k3, c3 = sampler.vectors(Xa + 0.5 * sa * k2, k2, kind)
        k4, c4 = sampler.vectors(Xa + sa * k3, k3, kind)
        Xn = Xa + sa / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        c5 = sampler.code_at(Xn)
        code = c1
        for c in (c2, c3, c4, c5):
            code = np.where(code == RUNNING, c, code)
        ok = code == RUNNING
        fail = active[~ok]
        s[fail] *= 0.5
        give_up = ~ok & (s[active] < min_step)
        stop[active[give_up]] = code[give_up]
        good = active[ok]
        if good.size:
            seg_a = Xa[ok]
            X[good] = Xn[ok]
            dd = Xn[ok] - seg_a
            dn = np.hypot(dd[:, 0], dd[:, 1])[:, None]
            D[good] = np.where(dn > 0, dd / np.where(dn > 0, dn, 1.0), k4[ok])
            L[good] += s[good]
            rec_idx.append(good)
            rec_pts.append(X[good].copy())
            if close_tol is not None:
                near = _seg_point_distance(seg_a, X[good], X0[good]) < close_tol
                back = np.einsum("ij,ij->i", D[good], D0[good]) > 0
                closing = good[near & back & (L[good] > 8 * step)]
                if closing.size:
                    stop[closing] = CLOSED
                    rec_idx.append(closing)
                    rec_pts.append(X0[closing].copy())
            capped = good[(L[good] >= max_len) & (stop[good] == RUNNING)]
            stop[capped] = CAP
        active = active[stop[active] == RUNNING]
    idx = np.concatenate(rec_idx)
    pts = np.concatenate(rec_pts)
    order = np.argsort(idx, kind="stable")
    counts = np.bincount(idx, minlength=n)
    split = np.split(pts[order], np.cumsum(counts)[:-1])
    return split, stop, L


@dataclass(eq=False)
class TraceBatch:
    """Traced curves through a batch of seeds (both directions)."""

    polylines: list
    seed_offset: np.ndarray
    stops: np.ndarray
    lengths: np.ndarray
    closed: np.ndarray
    directions: np.ndarray

    def __len__(self):
        return len(self.polylines)


def trace_batch(sampler: FieldSampler, seeds, kind=KERNEL, step=None, max_len=None,
                close_tol=None, directions=None) -> TraceBatch:
    """Trace the curves of the ``kind`` field through each seed.

    Polylines run from the backward end to the forward end; ``seed_offset``
    is the seed's position in it and ``stops`` holds the (backward, forward)
    stop codes. ``directions`` fixes the forward direction per seed.
    """
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
    n = len(seeds)
    step = sampler.h / 2 if step is None else step
    max_len = 50 * sampler.diameter if max_len is None else max_len
    d0, code0 = sampler.vectors(seeds, directions, kind)
    start_ok = code0 == RUNNING
    fwd, sf, Lf = _march(sampler, seeds[start_ok], d0[start_ok], kind, step, max_len, close_tol)
    closed_f = sf == CLOSED
    bwd_sel = ~closed_f
    bwd, sb, Lb = _march(sampler, seeds[start_ok][bwd_sel], -d0[start_ok][bwd_sel], kind, step,
                         max_len, None)
    polys, offsets = [], np.zeros(n, dtype=np.int64)
    stops = np.zeros((n, 2), dtype=np.int64)
    lengths = np.zeros(n)
    closed = np.zeros(n, dtype=bool)
    ok_idx = np.flatnonzero(start_ok)
    bmap = dict(zip(np.flatnonzero(bwd_sel), range(int(bwd_sel.sum()))))
    k = 0
    for i in range(n):
        if not start_ok[i]:
            polys.append(seeds[i:i + 1].copy())
            stops[i] = code0[i]
            continue
        f = fwd[k]
        if closed_f[k]:
            polys.append(f)
            offsets[i] = 0
            stops[i] = (CLOSED, CLOSED)
            closed[i] = True
            lengths[i] = Lf[k]
        else:
            b = bwd[bmap[k]]
            polys.append(np.concatenate([b[::-1], f[1:]]))
            offsets[i] = len(b) - 1
            stops[i] = (sb[bmap[k]], sf[k])
            lengths[i] = Lf[k] + Lb[bmap[k]]
        k += 1
    assert k == len(ok_idx)
    d_all = np.zeros((n, 2))
    d_all[start_ok] = d0[start_ok]
    return TraceBatch(polys, offsets, stops, lengths, closed, d_all)


@dataclass(frozen=True, eq=False)
class Trace:
    points: np.ndarray
    closed: bool
    stops: tuple

    @property
    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))


def trace_leaf(seed, form: SampledOneForm, step=None, sampler: FieldSampler | None = None) -> Trace:
    """Leaf through ``seed``: RK4 on the unit kernel field, step h/2, both ways.

    Stops at the box, the mask, after 50 box diameters, or when the curve
    re-enters an h/4 disc around the seed heading the same way (closed leaf).
    """
    sampler = sampler or FieldSampler(form)
    batch = trace_batch(sampler, [seed], KERNEL, step, close_tol=sampler.h / 4)
    if batch.stops[0, 0] != RUNNING and len(batch.polylines[0]) == 1 and batch.lengths[0] == 0:
        if sampler.code_at(np.asarray([seed], dtype=float))[0] != RUNNING:
            raise StepFailure(f"field cannot be evaluated at {tuple(seed)}")
    return Trace(batch.polylines[0], bool(batch.closed[0]),
                 tuple(STOP_NAMES[int(c)] for c in batch.stops[0]))


# ---------------------------------------------------------------------------
# transversal net


@dataclass(eq=False)
class TransversalNet:
    polylines: list
    arclength: list
    spacing: float
    coverage_radius: float

    def __len__(self):
        return len(self.polylines)

    def point_at(self, k: int, s) -> np.ndarray:
        """Points at arclength ``s`` along transversal ``k``."""
        P = self.polylines[k]
        a = self.arclength[k]
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.stack([np.interp(s, a, P[:, 0]), np.interp(s, a, P[:, 1])], axis=1)

    def length(self, k: int) -> float:
        return float(self.arclength[k][-1])


def _arclength(P):
    return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(P, axis=0).T))])


def build_transversal_net(form: SampledOneForm, spacing=None, sampler=None,
                          max_rounds: int = 200) -> TransversalNet:
    """Integral curves of the normal field covering the domain.

    Seeds sit on a grid of step ``spacing`` (default 8h) offset by half a
    step; a seed closer than half a spacing to an accepted transversal is
    skipped. Extra seeds are placed at uncovered cells until every usable
    cell centre lies within ``spacing`` of a transversal.
    """
    sampler = sampler or FieldSampler(form)
    h = sampler.h
    S = 8 * h if spacing is None else float(spacing)
    xs = np.arange(sampler.x0 + S / 2, sampler.x1, S)
    ys = np.arange(sampler.y0 + S / 2, sampler.y1, S)
    grid = np.array([(x, y) for y in ys for x in xs]) if len(xs) and len(ys) else np.zeros((0, 2))
    nxc, nyc = sampler.nx - 1, sampler.ny - 1
    cx = sampler.x0 + (np.arange(nxc) + 0.5) * sampler.hx
    cy = sampler.y0 + (np.arange(nyc) + 0.5) * sampler.hy
    hit = np.zeros((nxc, nyc), dtype=bool)
    polys, arcs = [], []
    win = int(math.ceil(S / 2 / h)) + 1

    def near_existing(p):
        i = int((p[0] - sampler.x0) / sampler.hx)
        j = int((p[1] - sampler.y0) / sampler.hy)
        i0, i1 = max(0, i - win), min(nxc, i + win + 1)
        j0, j1 = max(0, j - win), min(nyc, j + win + 1)
        ii, jj = np.nonzero(hit[i0:i1, j0:j1])
        if not ii.size:
            return False
        d = np.hypot(cx[ii + i0] - p[0], cy[jj + j0] - p[1])
        return bool(d.min() < S / 2)

    def accept(batch, order):
        added = 0
        for i in order:
            P = batch.polylines[i]
            if len(P) < 3 or near_existing(batch.polylines[i][batch.seed_offset[i]]):
                continue
            polys.append(P)
            arcs.append(_arclength(P))
            ii = np.clip(((P[:, 0] - sampler.x0) / sampler.hx).astype(int), 0, nxc - 1)
            jj = np.clip(((P[:, 1] - sampler.y0) / sampler.hy).astype(int), 0, nyc - 1)
            hit[ii, jj] = True
            added += 1
        return added

    if len(grid):
        usable = sampler.code_at(grid) == RUNNING
        seeds = grid[usable]
        if len(seeds):
            batch = trace_batch(sampler, seeds, NORMAL, close_tol=h / 4)
            accept(batch, range(len(seeds)))
    for _ in range(max_rounds):
        if hit.any():
            dist = ndimage.distance_transform_edt(~hit, sampling=(sampler.hx, sampler.hy))
        else:
            dist = np.full(hit.shape, np.inf)
        uncovered = np.argwhere(sampler.cell_ok & (dist > S))
        if not uncovered.size:
            return TransversalNet(polys, arcs, S, S)
        i, j = uncovered[0]
        seed = np.array([[cx[i], cy[j]]])
        batch = trace_batch(sampler, seed, NORMAL, close_tol=h / 4)
        if not accept(batch, [0]):
            # the cell cannot host a transversal; accept it unconditionally
            P = batch.polylines[0]
            polys.append(P)
            arcs.append(_arclength(P))
            hit[i, j] = True
    raise CoverageFailure([tuple(map(int, c)) for c in uncovered])


# ---------------------------------------------------------------------------
# crossings


class SegmentIndex:
    """Spatial hash of transversal segments for crossing queries."""

    def __init__(self, net: TransversalNet, cell: float, origin):
        self.cell = cell
        self.origin = np.asarray(origin, dtype=float)
        A, B, owner, s0 = [], [], [], []
        for k, (P, a) in enumerate(zip(net.polylines, net.arclength)):
            if len(P) < 2:
                continue
            A.append(P[:-1])
            B.append(P[1:])
            owner.append(np.full(len(P) - 1, k))
            s0.append(a[:-1])
        self.A = np.concatenate(A) if A else np.zeros((0, 2))
        self.B = np.concatenate(B) if B else np.zeros((0, 2))
        self.owner = np.concatenate(owner) if owner else np.zeros(0, dtype=np.int64)
        self.s0 = np.concatenate(s0) if s0 else np.zeros(0)
        self.lo_cells = np.floor((np.minimum(self.A, self.B) - self.origin) / cell).astype(np.int64)
        keys, ids = self._cells(self.A, self.B)
        order = np.argsort(keys, kind="stable")
        self.keys = keys[order]
        self.ids = ids[order]

    def _cells(self, A, B):
        """Hash cells touched by each segment's bounding box (one entry per cell)."""
        lo = np.floor((np.minimum(A, B) - self.origin) / self.cell).astype(np.int64)
        hi = np.floor((np.maximum(A, B) - self.origin) / self.cell).astype(np.int64)
        keys, ids = [], []
        base = np.arange(len(A))
        for dx in (0, 1):
            for dy in (0, 1):
                sel = ((dx == 0) | (hi[:, 0] > lo[:, 0])) & ((dy == 0) | (hi[:, 1] > lo[:, 1]))
                keys.append((lo[sel, 0] + dx) * 1_000_003 + lo[sel, 1] + dy)
                ids.append(base[sel])
        return np.concatenate(keys), np.concatenate(ids)

    def crossings(self, P, Q):
        """Intersections of segments ``P[i]Q[i]`` with the transversal segments.

        Returns ``(leaf segment index, transversal, arclength, leaf direction)``.
        """
        if not len(P) or not len(self.keys):
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, 2))
        keys, lids = self._cells(P, Q)
        lo = np.searchsorted(self.keys, keys, side="left")
        hi = np.searchsorted(self.keys, keys, side="right")
        cnt = hi - lo
        total = int(cnt.sum())
        if total == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, 2))
        li = np.repeat(lids, cnt)
        cell = np.repeat(keys, cnt)
        start = np.repeat(lo - np.concatenate([[0], np.cumsum(cnt)[:-1]]), cnt)
        ti = self.ids[start + np.arange(total)]
        # keep each pair once: in the cell holding the corner of the box overlap
        llo = np.floor((np.minimum(P, Q) - self.origin) / self.cell).astype(np.int64)
        tlo = self.lo_cells
        corner = np.maximum(llo[li], tlo[ti])
        keep = corner[:, 0] * 1_000_003 + corner[:, 1] == cell
        li, ti = li[keep], ti[keep]
        r = Q[li] - P[li]
        sv = self.B[ti] - self.A[ti]
        den = r[:, 0] * sv[:, 1] - r[:, 1] * sv[:, 0]
        qp = self.A[ti] - P[li]
        good = np.abs(den) > 1e-300
        den = np.where(good, den, 1.0)
        t = (qp[:, 0] * sv[:, 1] - qp[:, 1] * sv[:, 0]) / den
        u = (qp[:, 0] * r[:, 1] - qp[:, 1] * r[:, 0]) / den
        eps = 1e-9
        hitm = good & (t >= -eps) & (t <= 1 + eps) & (u >= -eps) & (u <= 1 + eps)
        li, ti, u, r = li[hitm], ti[hitm], u[hitm], r[hitm]
        seglen = np.hypot(*(self.B[ti] - self.A[ti]).T)
        rn = np.hypot(r[:, 0], r[:, 1])[:, None]
        return li, self.owner[ti], self.s0[ti] + u * seglen, r / np.where(rn > 0, rn, 1.0)


@dataclass(eq=False)
class LeafData:
    """Traced leaves with their transversal crossings in compressed rows."""

    stops: np.ndarray
    lengths: np.ndarray
    closed: np.ndarray
    directions: np.ndarray
    ptr: np.ndarray
    trans: np.ndarray
    param: np.ndarray
    robust: np.ndarray
    cdir: np.ndarray
    key: np.ndarray
    polylines: list

    def crossings(self, i):
        sl = slice(self.ptr[i], self.ptr[i + 1])
        return self.trans[sl], self.param[sl], self.robust[sl], self.cdir[sl]

    def keys(self, i):
        return self.key[self.ptr[i]:self.ptr[i + 1]]

    def robust_keys(self, i):
        sl = slice(self.ptr[i], self.ptr[i + 1])
        return self.key[sl][self.robust[sl]]

    def touches(self, i, codes) -> bool:
        return bool(np.isin(self.stops[i], codes).any())


class _Tracer:
    """Leaf tracing plus crossing extraction, in chunks."""

    def __init__(self, sampler: FieldSampler, net: TransversalNet, robust_tol: float, keep_every=4):
        self.sampler = sampler
        self.net = net
        self.index = SegmentIndex(net, sampler.h, (sampler.x0, sampler.y0))
        self.robust_tol = robust_tol
        self.stride = 10.0 * sampler.diameter + 10.0
        self.keep_every = keep_every

    def leaves(self, seeds, directions=None) -> LeafData:
        seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
        out = {k: [] for k in ("stops", "lengths", "closed", "dirs", "cnt", "trans", "param", "robust",
                               "cdir")}
        polys = []
        h = self.sampler.h
        for c0 in range(0, len(seeds), CHUNK):
            chunk = seeds[c0:c0 + CHUNK]
            dchunk = None if directions is None else directions[c0:c0 + CHUNK]
            batch = trace_batch(self.sampler, chunk, KERNEL, close_tol=h / 4, directions=dchunk)
            lens = np.array([len(p) for p in batch.polylines])
            owner = np.repeat(np.arange(len(chunk)), np.maximum(lens - 1, 0))
            P = np.concatenate([p[:-1] for p in batch.polylines if len(p) > 1] or [np.zeros((0, 2))])
            Q = np.concatenate([p[1:] for p in batch.polylines if len(p) > 1] or [np.zeros((0, 2))])
            li, tr, pa, di = self.index.crossings(P, Q)
            lo = owner[li] if len(li) else np.zeros(0, dtype=np.int64)
            pts = P[li] if len(li) else np.zeros((0, 2))
            order = np.lexsort((pa, tr, lo))
            lo, tr, pa, di, pts = lo[order], tr[order], pa[order], di[order], pts[order]
            # merge duplicates at shared vertices
            if len(lo):
                dup = np.zeros(len(lo), dtype=bool)
                dup[1:] = (lo[1:] == lo[:-1]) & (tr[1:] == tr[:-1]) & (np.diff(pa) < h / 8)
                keep = ~dup
                lo, tr, pa, di, pts = lo[keep], tr[keep], pa[keep], di[keep], pts[keep]
            rob = self.sampler.clearance_at(pts) > self.robust_tol if len(pts) else np.zeros(0, bool)
            out["stops"].append(batch.stops)
            out["lengths"].append(batch.lengths)
            out["closed"].append(batch.closed)
            out["dirs"].append(batch.directions)
            out["cnt"].append(np.bincount(lo, minlength=len(chunk)))
            out["trans"].append(tr)
            out["param"].append(pa)
            out["robust"].append(rob)
            out["cdir"].append(di)
            for p in batch.polylines:
                polys.append(p if self.keep_every <= 1 else
                             np.concatenate([p[::self.keep_every], p[-1:]]))
        cat = {k: (np.concatenate(v) if v else np.zeros(0)) for k, v in out.items()}
        ptr = np.concatenate([[0], np.cumsum(cat["cnt"])]).astype(np.int64)
        trans = cat["trans"].astype(np.int64)
        if len(seeds) == 0:
            cat["stops"] = np.zeros((0, 2), dtype=np.int64)
            cat["dirs"] = np.zeros((0, 2))
        cdir = cat["cdir"].reshape(-1, 2) if len(cat["cdir"]) else np.zeros((0, 2))
        return LeafData(cat["stops"].reshape(-1, 2).astype(np.int64), cat["lengths"],
                        cat["closed"].astype(bool), cat["dirs"].reshape(-1, 2), ptr, trans,
                        cat["param"], cat["robust"].astype(bool), cdir,
                        trans * self.stride + cat["param"], polys)


def _covered(a_keys, b_keys, tol) -> bool:
    """Every key of ``a_keys`` lies within ``tol`` of some key of ``b_keys``."""
    if not len(a_keys):
        return True
    if not len(b_keys):
        return False
    idx = np.searchsorted(b_keys, a_keys)
    right = b_keys[np.minimum(idx, len(b_keys) - 1)]
    left = b_keys[np.maximum(idx - 1, 0)]
    return bool(np.all(np.minimum(np.abs(right - a_keys), np.abs(left - a_keys)) <= tol))


def _compatible(A: LeafData, i, B: LeafData, j, tol) -> bool:
    return (_covered(A.robust_keys(i), np.sort(B.keys(j)), tol)
            and _covered(B.robust_keys(j), np.sort(A.keys(i)), tol))


# ---------------------------------------------------------------------------
# result types


@dataclass(eq=False)
class LeafClass:
    id: str
    intercepts: list
    representative: np.ndarray = field(repr=False)
    closed: bool = False
    limit: bool = False

    def to_dict(self) -> dict:
        return {"id": self.id, "closed": self.closed, "limit": self.limit,
                "intercepts": [[int(k), float(t)] for k, t in self.intercepts]}


@dataclass(eq=False)
class LimitLeaf:
    """A leaf where two runs of a transversal meet (one micro-edge)."""

    id: str
    sides: tuple
    sightings: list
    trace: np.ndarray | None = field(default=None, repr=False)


@dataclass(eq=False)
class ChartSegment:
    transversal: int
    params: np.ndarray
    t: np.ndarray
    reference: bool = False


@dataclass(eq=False)
class LeafSpaceGraph:
    form: SampledOneForm = field(repr=False)
    net: TransversalNet | None = field(repr=False)
    classes: list
    adjacency: dict
    limit_leaves: list
    inseparable: list
    endpoints: list
    configuration: GraphicalConfiguration
    charts: dict
    chart_segments: dict = field(repr=False, default_factory=dict)
    fastpath: str | None = None
    warnings: list = field(default_factory=list)
    sampler: FieldSampler | None = field(repr=False, default=None)
    tracer: _Tracer | None = field(repr=False, default=None)

    def charts_json(self) -> dict:
        return {e: [{"classId": c, "t": float(t)} for c, t in v] for e, v in sorted(self.charts.items())}


# ---------------------------------------------------------------------------
# the pipeline


class _Analysis:
    def __init__(self, form, spacing=None, tube=DEFAULT_TUBE, angle=DEFAULT_ANGLE,
                 ratio=DEFAULT_RATIO, exempt_mask=True):
        self.form = form
        self.sampler = FieldSampler(form)
        self.h = self.sampler.h
        self.net = build_transversal_net(form, spacing, self.sampler)
        S = self.net.spacing
        self.tube = tube * self.h
        self.cos_angle = math.cos(math.radians(angle))
        self.ratio = ratio
        self.match_tol = S
        self.tracer = _Tracer(self.sampler, self.net, robust_tol=4 * self.h)
        self.exempt_mask = exempt_mask
        self.warnings = []

    # samples -------------------------------------------------------------
    def sample(self):
        h = self.h
        t_of, j_of, params, pts = [], [], [], []
        for k in range(len(self.net)):
            L = self.net.length(k)
            s = np.arange(0.0, L + 1e-12, h)
            t_of.append(np.full(len(s), k))
            j_of.append(np.arange(len(s)))
            params.append(s)
            pts.append(self.net.point_at(k, s))
        self.s_trans = np.concatenate(t_of).astype(np.int64)
        self.s_index = np.concatenate(j_of).astype(np.int64)
        self.s_param = np.concatenate(params)
        self.s_point = np.concatenate(pts)
        counts = [len(p) for p in params]
        self.t_first = np.concatenate([[0], np.cumsum(counts)])[:-1].astype(np.int64)
        self.t_count = np.array(counts, dtype=np.int64)
        self.leaf = self.tracer.leaves(self.s_point)
        stops = self.leaf.stops
        dead = (self.leaf.lengths <= 0) & ~self.leaf.closed
        self.regular = ~(dead | (stops == PUNCTURE).any(axis=1))

    def sample_id(self, k, j):
        return self.t_first[k] + j

    def compat(self, a, b):
        return _compatible(self.leaf, a, self.leaf, b, self.match_tol)

    # classes -------------------------------------------------------------
    def classify(self):
        n = len(self.s_param)
        cls = np.full(n, -1, dtype=np.int64)
        members = []
        h = self.h
        for s in range(n):
            if cls[s] >= 0:
                continue
            c = len(members)
            cls[s] = c
            group = [s]
            tr, pa, _, di = self.leaf.crossings(s)
            for k2, t2, d2 in zip(tr, pa, di):
                if k2 == self.s_trans[s] and abs(t2 - self.s_param[s]) < h / 2:
                    continue
                j = int(round(t2 / h))
                if j < 0 or j >= self.t_count[k2]:
                    continue
                cand = int(self.sample_id(k2, j))
                if cls[cand] >= 0 or abs(self.s_param[cand] - t2) > self.tube:
                    continue
                if self.regular[cand] != self.regular[s]:
                    continue
                if abs(float(np.dot(d2, self.leaf.directions[cand]))) < self.cos_angle:
                    continue
                if not self.compat(s, cand):
                    continue
                cls[cand] = c
                group.append(cand)
            members.append(group)
        self.cls = cls
        self.members = members

    # runs, edges and gaps ----------------------------------------------
    def runs_and_gaps(self):
        runs = []
        run_of = np.full(len(self.s_param), -1, dtype=np.int64)
        per_trans = []
        for k in range(len(self.net)):
            first, cnt = self.t_first[k], self.t_count[k]
            mine = []
            cur = None
            for j in range(cnt):
                s = first + j
                if not self.regular[s]:
                    cur = None
                    continue
                if cur is not None and self.compat(s - 1, s):
                    runs[cur].append(s)
                else:
                    cur = len(runs)
                    runs.append([s])
                    mine.append(cur)
                run_of[s] = cur
            per_trans.append(mine)
        uf = list(range(len(runs)))

        def find(x):
            while uf[x] != x:
                uf[x] = uf[uf[x]]
                x = uf[x]
            return x

        for group in self.members:
            rs = [run_of[s] for s in group if run_of[s] >= 0]
            for r in rs[1:]:
                a, b = find(rs[0]), find(r)
                if a != b:
                    uf[max(a, b)] = min(a, b)
        roots = sorted({find(r) for r in range(len(runs))}, key=lambda r: runs[r][0])
        edge_of_root = {r: f"L{i}" for i, r in enumerate(roots)}
        self.runs = runs
        self.run_of = run_of
        self.run_edge = [edge_of_root[find(r)] for r in range(len(runs))]
        self.edge_ids = [edge_of_root[r] for r in roots]
        gaps = []
        for k, mine in enumerate(per_trans):
            for ra, rb in zip(mine, mine[1:]):
                ea, eb = self.run_edge[ra], self.run_edge[rb]
                if ea == eb:
                    self.warnings.append(f"transversal {k}: fold between samples {runs[ra][-1]} "
                                         f"and {runs[rb][0]} of edge {ea}")
                    continue
                gaps.append({"trans": k, "left_run": ra, "right_run": rb})
        self.gaps = gaps

    def bisect(self):
        if not self.gaps:
            return
        h = self.h
        jobs = []
        for g in self.gaps:
            a = self.runs[g["left_run"]][-1]
            b = self.runs[g["right_run"]][0]
            jobs.append((g, "left", a, self.s_param[a], self.s_param[a] + h))
            jobs.append((g, "right", b, self.s_param[b] - h, self.s_param[b]))
        lo = np.array([j[3] for j in jobs])
        hi = np.array([j[4] for j in jobs])
        ks = [j[0]["trans"] for j in jobs]
        refs = [j[2] for j in jobs]
        sides = [j[1] for j in jobs]
        m = 2 ** BISECTION_BITS
        q = np.arange(1, m) / m
        for _ in range(BISECTION_STEPS // BISECTION_BITS):
            probes = lo[:, None] + (hi - lo)[:, None] * q[None, :]
            pts = np.concatenate([self.net.point_at(k, p) for k, p in zip(ks, probes)])
            data = self.tracer.leaves(pts)
            for i, (ref, side) in enumerate(zip(refs, sides)):
                ok = np.zeros(m - 1, dtype=bool)
                for r in range(m - 1):
                    n = i * (m - 1) + r
                    dead = data.lengths[n] <= 0 or (data.stops[n] == PUNCTURE).any()
                    ok[r] = not dead and _compatible(data, n, self.leaf, ref, self.match_tol)
                width = hi[i] - lo[i]
                if side == "left":
                    # the left family occupies [lo, t*)
                    bad = np.flatnonzero(~ok)
                    first_bad = bad[0] + 1 if bad.size else m
                    lo[i], hi[i] = lo[i] + width * (first_bad - 1) / m, lo[i] + width * first_bad / m
                else:
                    bad = np.flatnonzero(~ok)
                    last_bad = bad[-1] + 1 if bad.size else 0
                    lo[i], hi[i] = lo[i] + width * last_bad / m, lo[i] + width * (last_bad + 1) / m
        for i, (g, side) in enumerate(zip((j[0] for j in jobs), sides)):
            g["t_" + side] = float(lo[i] if side == "left" else hi[i])
        for g in self.gaps:
            mid = self.net.point_at(g["trans"], 0.5 * (g["t_left"] + g["t_right"]))
            g["clearance"] = float(self.sampler.clearance_at(mid)[0])

    # charts --------------------------------------------------------------
    def charts(self):
        h = self.h
        by_edge = {}
        for r, e in enumerate(self.run_edge):
            by_edge.setdefault(e, []).append(r)
        gap_before = {g["right_run"]: g for g in self.gaps}
        gap_after = {g["left_run"]: g for g in self.gaps}
        self.chart_ref = {}
        segments = {}
        sample_t = np.full(len(self.s_param), np.nan)
        for e, rs in by_edge.items():
            ref = max(rs, key=lambda r: (len(self.runs[r]), -r))
            k = int(self.s_trans[self.runs[ref][0]])
            first, last = self.runs[ref][0], self.runs[ref][-1]
            u_lo = gap_before[ref]["t_right"] if ref in gap_before else (
                0.0 if self.s_index[first] == 0 else self.s_param[first] - h / 2)
            u_hi = gap_after[ref]["t_left"] if ref in gap_after else (
                self.net.length(k) if self.s_index[last] == self.t_count[k] - 1
                else self.s_param[last] + h / 2)
            self.chart_ref[e] = (k, float(u_lo), float(u_hi))
            segs = [ChartSegment(k, np.array([u_lo, u_hi]), np.array([0.0, 1.0]), True)]
            span = u_hi - u_lo
            for r in rs:
                ts, ps = [], []
                for s in self.runs[r]:
                    if r == ref:
                        t = (self.s_param[s] - u_lo) / span
                    else:
                        tr, pa, _, _ = self.leaf.crossings(s)
                        sel = (tr == k) & (pa >= u_lo) & (pa <= u_hi)
                        if not sel.any():
                            continue
                        t = (pa[sel][0] - u_lo) / span
                    sample_t[s] = t
                    ts.append(t)
                    ps.append(self.s_param[s])
                if r != ref and len(ts) >= 2:
                    ts, ps = np.array(ts), np.array(ps)
                    d = np.diff(ts)
                    if np.all(d > 0) or np.all(d < 0):
                        order = np.argsort(ps)
                        segs.append(ChartSegment(int(self.s_trans[self.runs[r][0]]), ps[order],
                                                 ts[order]))
            segments[e] = segs
        self.sample_t = sample_t
        self.segments = segments

    def side_end(self, run, toward_gap_last: bool):
        """Which end (``"min"``/``"max"``) of the run's edge the gap bounds."""
        seq = self.runs[run][::-1] if toward_gap_last else self.runs[run]
        ts = [self.sample_t[s] for s in seq if np.isfinite(self.sample_t[s])]
        if not ts:
            raise AmbiguityError(f"run {run} has no chart coordinate")
        for t in ts[1:]:
            if abs(t - ts[0]) > 1e-12:
                return "min" if ts[0] < t else "max"
        return "min" if ts[0] < 0.5 else "max"

    # limit leaves and vertices -------------------------------------------
    def limits(self):
        groups = {}
        for gi, g in enumerate(self.gaps):
            ea = (self.run_edge[g["left_run"]], self.side_end(g["left_run"], True))
            eb = (self.run_edge[g["right_run"]], self.side_end(g["right_run"], False))
            g["sides"] = (ea, eb)
            key = frozenset((ea, eb))
            groups.setdefault(key, []).append(gi)
        leaves = []
        for key, gis in sorted(groups.items(), key=lambda kv: kv[1][0]):
            leaves.append(LimitLeaf(f"F{len(leaves)}", tuple(sorted(key)), gis))
        self.limit_leaves = leaves
        # traces of limit leaves (for drawing), from the first sighting
        if leaves:
            pts = []
            for lf in leaves:
                g = self.gaps[lf.sightings[0]]
                pts.append(self.net.point_at(g["trans"], 0.5 * (g["t_left"] + g["t_right"]))[0])
            batch = trace_batch(self.sampler, np.array(pts), KERNEL, close_tol=self.h / 4)
            for lf, p in zip(leaves, batch.polylines):
                lf.trace = p

    def _normal_path(self, ga, side_a, gb, side_b):
        """Integrals of |ω| along shrinking normal paths between two sightings."""
        h = self.h
        vals = []
        ka, kb = ga["trans"], gb["trans"]
        ta = ga["t_left"] if side_a == "left" else ga["t_right"]
        tb = gb["t_left"] if side_b == "left" else gb["t_right"]
        sa = -1.0 if side_a == "left" else 1.0
        sb = -1.0 if side_b == "left" else 1.0
        deltas = [h / 2, h / 4, h / 8]
        starts = np.concatenate([self.net.point_at(ka, ta + sa * d) for d in deltas])
        batch = trace_batch(self.sampler, starts, KERNEL, close_tol=self.h / 4)
        for d, poly in zip(deltas, batch.polylines):
            if len(poly) < 2:
                vals.append(math.inf)
                continue
            li, tr, pa, _ = self.tracer.index.crossings(poly[:-1], poly[1:])
            sel = tr == kb
            cand = pa[sel]
            cand = cand[(np.sign(cand - tb) == sb) | (np.abs(cand - tb) < 1e-9)]
            if not cand.size:
                vals.append(math.inf)
                continue
            q = cand[np.argmin(np.abs(cand - tb))]
            if abs(q - tb) > self.match_tol:
                vals.append(math.inf)
                continue
            vals.append(self._abs_integral(ka, ta, ta + sa * d) + self._abs_integral(kb, tb, q))
        return vals

    def _abs_integral(self, k, s0, s1, n=9):
        s = np.linspace(min(s0, s1), max(s0, s1), n)
        w = self.sampler.norm_at(self.net.point_at(k, s))
        return float(np.trapezoid(w, s)) if hasattr(np, "trapezoid") else float(np.trapz(w, s))

    def _best_sighting(self, leaf_index, side):
        """Sighting of a limit leaf farthest from the box and the mask."""
        cands = [self.gaps[i] for i in self.limit_leaves[leaf_index].sightings]
        return max(cands, key=lambda g: g["clearance"])

    def vertices(self):
        side_groups = {}
        for li, lf in enumerate(self.limit_leaves):
            for side in lf.sides:
                side_groups.setdefault(side, []).append(li)
        parent = list(range(len(self.limit_leaves)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        pairs = []
        self.normal_paths = {}
        for side, lis in sorted(side_groups.items()):
            for a_i in range(len(lis)):
                for b_i in range(a_i + 1, len(lis)):
                    a, b = lis[a_i], lis[b_i]
                    ga = self._best_sighting(a, side)
                    gb = self._best_sighting(b, side)
                    side_a = "left" if ga["sides"][0] == side else "right"
                    side_b = "left" if gb["sides"][0] == side else "right"
                    vals = self._normal_path(ga, side_a, gb, side_b)
                    self.normal_paths[(self.limit_leaves[a].id, self.limit_leaves[b].id)] = vals
                    ok = all(math.isfinite(v) for v in vals) and all(
                        vals[i + 1] < self.ratio * vals[i] for i in range(len(vals) - 1))
                    if ok:
                        pairs.append((self.limit_leaves[a].id, self.limit_leaves[b].id))
                        ra, rb = find(a), find(b)
                        if ra != rb:
                            parent[max(ra, rb)] = min(ra, rb)
        for side, lis in side_groups.items():
            if len({find(x) for x in lis}) > 1:
                raise AmbiguityError(f"edge end {side} limits onto leaves that are not inseparable")
        self.inseparable = pairs
        roots = sorted({find(i) for i in range(len(self.limit_leaves))})
        self.vertex_of_leaf = {i: f"v{roots.index(find(i))}" for i in range(len(self.limit_leaves))}
        self.vertex_ids = [f"v{i}" for i in range(len(roots))]

    # endpoints -------------------------------------------------------------
    def endpoints(self):
        found = []
        for k in range(len(self.net)):
            first, cnt = self.t_first[k], self.t_count[k]
            seq = self.cls[first:first + cnt]
            for j in range(1, cnt):
                cands = []
                if seq[j] == seq[j - 1]:
                    cands.append(seq[j])
                if j + 1 < cnt and seq[j - 1] == seq[j + 1] and seq[j] != seq[j - 1]:
                    cands.append(seq[j])
                # a block of limit samples framed by one leaf class
                if j + 1 < cnt and self.regular[first + j - 1] and not self.regular[first + j]:
                    e = j
                    while e < cnt and not self.regular[first + e]:
                        e += 1
                    if e < cnt and seq[e] == seq[j - 1]:
                        cands.extend(seq[j:e].tolist())
                for c in cands:
                    if c not in found:
                        found.append(int(c))
        if self.exempt_mask:
            found = [c for c in found if not any(
                self.leaf.touches(s, (MASK, PUNCTURE)) for s in self.members[c])]
        self.endpoint_classes = sorted(set(found))

    # assembly --------------------------------------------------------------
    def configuration(self):
        ends = {e: [OPEN_END, OPEN_END] for e in self.edge_ids}
        micro = {v: [] for v in self.vertex_ids}
        for li, lf in enumerate(self.limit_leaves):
            v = self.vertex_of_leaf[li]
            (ea, ka), (eb, kb) = lf.sides
            for e, end in lf.sides:
                slot = 0 if end == "min" else 1
                if ends[e][slot] not in (OPEN_END, v):
                    raise AmbiguityError(f"edge {e} {end} end limits onto two vertices")
                ends[e][slot] = v
            if ea == eb:
                raise AmbiguityError(f"limit leaf {lf.id} bounds edge {ea} from both sides")
            micro[v].append(MicroEdge(lf.id, (ea, eb)))
        vertices = [Vertex(v) for v in self.vertex_ids]
        for n, c in enumerate(self.endpoint_classes):
            edges_here = sorted({self.run_edge[self.run_of[s]] for s in self.members[c]
                                 if self.run_of[s] >= 0})
            if not edges_here:
                self.warnings.append(f"endpoint class c{c} lies on no edge")
                continue
            e = edges_here[0]
            vid = f"e{n}"
            if ends[e][1] == OPEN_END:
                ends[e][1] = vid
            elif ends[e][0] == OPEN_END:
                ends[e][0] = vid
            else:
                raise AmbiguityError(f"endpoint class c{c} on edge {e} with both ends taken")
            vertices.append(Vertex(vid, True))
            micro[vid] = []
        for e, (a, b) in ends.items():
            if a == b and a != OPEN_END:
                raise AmbiguityError(f"edge {e} limits onto vertex {a} from both ends")
        config = GraphicalConfiguration(tuple(vertices), tuple(Edge(e, tuple(v)) for e, v in ends.items()),
                                        {v: tuple(m) for v, m in micro.items()})
        problems = validate(config)
        if problems:
            raise AmbiguityError("traced configuration is invalid: " + "; ".join(problems))
        self.config = config

    def leaf_classes(self):
        out = []
        for c, group in enumerate(self.members):
            rep = max(group, key=lambda s: (self.leaf.lengths[s], -s))
            out.append(LeafClass(f"c{c}", [(int(self.s_trans[s]), float(self.s_param[s])) for s in group],
                                 self.leaf.polylines[rep], bool(self.leaf.closed[rep]),
                                 not bool(self.regular[rep])))
        return out

    def chart_table(self):
        table = {e: [] for e in self.edge_ids}
        for c, group in enumerate(self.members):
            for s in group:
                if self.run_of[s] >= 0 and np.isfinite(self.sample_t[s]):
                    table[self.run_edge[self.run_of[s]]].append((f"c{c}", float(self.sample_t[s])))
                    break
        return {e: sorted(v, key=lambda ct: ct[1]) for e, v in table.items()}

    def run(self) -> LeafSpaceGraph:
        self.sample()
        self.classify()
        self.runs_and_gaps()
        self.bisect()
        self.charts()
        self.limits()
        self.vertices()
        self.endpoints()
        self.configuration()
        adjacency = {}
        for k in range(len(self.net)):
            first, cnt = self.t_first[k], self.t_count[k]
            adjacency[k] = [f"c{c}" for c in self.cls[first:first + cnt]]
        gaps = self.gaps
        for lf in self.limit_leaves:
            lf.sightings = [(gaps[i]["trans"], gaps[i]["t_left"], gaps[i]["t_right"]) for i in lf.sightings]
        return LeafSpaceGraph(self.form, self.net, self.leaf_classes(), adjacency, self.limit_leaves,
                              self.inseparable, [f"c{c}" for c in self.endpoint_classes], self.config,
                              self.chart_table(), self.segments, None, self.warnings, self.sampler,
                              self.tracer)


def analyze(form: SampledOneForm, spacing=None, tube=DEFAULT_TUBE, angle=DEFAULT_ANGLE,
            ratio=DEFAULT_RATIO, exempt_mask=True, fastpath=True) -> LeafSpaceGraph:
    """Leaf-space graph of a planar form (fast path first when allowed)."""
    if fastpath:
        for axis in ("y", "x"):
            if cylinder_fastpath(form, axis):
                return fastpath_graph(form, axis)
    return _Analysis(form, spacing, tube, angle, ratio, exempt_mask).run()


def classify_leaves(form: SampledOneForm, spacing=None, tube=DEFAULT_TUBE, angle=DEFAULT_ANGLE):
    """Leaf classes of the samples of the transversal net."""
    a = _Analysis(form, spacing, tube, angle)
    a.sample()
    a.classify()
    return a.leaf_classes()


def detect_inseparable(graph: LeafSpaceGraph) -> list:
    return list(graph.inseparable)


def detect_endpoints(form: SampledOneForm, spacing=None, exempt_mask=True) -> list:
    a = _Analysis(form, spacing, exempt_mask=exempt_mask)
    a.sample()
    a.classify()
    a.endpoints()
    return [f"c{c}" for c in a.endpoint_classes]


def build_configuration(graph: LeafSpaceGraph):
    return graph.configuration, graph.charts


def refinement_check(graph: LeafSpaceGraph, **options):
    """Re-analyze on the grid with half the step; ``(stable, fine_graph)``.

    ``stable`` is False when the fine configuration is not isomorphic to the
    coarse one, or the fine analysis fails with an :class:`AmbiguityError`
    or :class:`CoverageFailure` (``fine_graph`` is then the exception).
    """
    fine_form = resample(graph.form, refined_counts(graph.form.counts))
    try:
        fine = analyze(fine_form, **options)
    except (AmbiguityError, CoverageFailure) as exc:
        return False, exc
    return isomorphic(graph.configuration, fine.configuration), fine


# ---------------------------------------------------------------------------
# cylinder fast path


def cylinder_fastpath(form: SampledOneForm, axis: str = "y", bound: float = 1e3) -> bool:
    """True when the leaves are graphs over the other axis with bounded slope.

    With ``axis="y"`` this asks ``h != 0`` at every node and ``max |g/h| <= bound``
    on an unmasked rectangle; ``axis="x"`` swaps the roles of ``g`` and ``h``.
    """
    if form.dim != 2 or not form.mask.all():
        return False
    g, h = form.w
    num, den = (g, h) if axis == "y" else (h, g)
    if np.any(np.abs(den) < 1e-12):
        return False
    return bool(np.max(np.abs(num / den)) <= bound)


def fastpath_integral(form: SampledOneForm, axis: str = "y") -> np.ndarray:
    """Height at which each node's leaf meets the middle grid line.

    For ``axis="y"`` leaves solve ``dy/dx = -g/h``; they are integrated with
    RK4 from every node to the column ``x = x_c`` through a bicubic spline of
    the slope, extended smoothly in ``y`` past the box.
    """
    x0, x1, y0, y1 = form.box
    nx, ny = form.counts
    hx, hy = form.spacing
    g, h = form.w
    if axis == "x":
        # transpose the problem: leaves are graphs x(y), dx/dy = -h/g
        gt = SampledOneForm(2, (y0, y1, x0, x1), (ny, nx), (h.T, g.T), form.mask.T)
        return fastpath_integral(gt, "y").T
    xs = np.linspace(x0, x1, nx)
    spline = RectBivariateSpline(xs, np.linspace(y0, y1, ny), -g / h, kx=3, ky=3)

    def rate(x, y):
        # beyond the box the slope continues by its second-order Taylor expansion
        xc, yc = np.clip(x, x0, x1), np.clip(y, y0, y1)
        d = y - yc
        return (spline(xc, yc, grid=False) + d * spline(xc, yc, dy=1, grid=False)
                + 0.5 * d * d * spline(xc, yc, dy=2, grid=False))

    ic = nx // 2
    X, Y = np.meshgrid(xs, np.linspace(y0, y1, ny), indexing="ij")
    Y = Y.copy()
    col = np.repeat(np.arange(nx)[:, None], ny, axis=1).astype(float)
    x = X.copy()
    for _ in range(max(ic, nx - 1 - ic)):
        moving = np.abs(col - ic) > 0.5
        if not moving.any():
            break
        s = np.where(col > ic, -hx, hx) * moving
        k1 = rate(x, Y)
        k2 = rate(x + s / 2, Y + s / 2 * k1)
        k3 = rate(x + s / 2, Y + s / 2 * k2)
        k4 = rate(x + s, Y + s * k3)
        Y = Y + s / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        x = x + s
        col = col - np.sign(col - ic) * moving
    return Y


def fastpath_graph(form: SampledOneForm, axis: str = "y") -> LeafSpaceGraph:
    """Single open edge with the chart given by :func:`fastpath_integral`."""
    config = GraphicalConfiguration((), (Edge("L0", (OPEN_END, OPEN_END)),), {})
    Y = fastpath_integral(form, axis)
    lo, hi = float(Y.min()), float(Y.max())
    t = (Y - lo) / (hi - lo) if hi > lo else np.zeros_like(Y)
    cols = t[form.counts[0] // 2, :] if axis == "y" else t[:, form.counts[1] // 2]
    charts = {"L0": [(f"c{i}", float(v)) for i, v in enumerate(cols)]}
    classes = [LeafClass(f"c{i}", [], np.zeros((0, 2))) for i in range(len(cols))]
    graph = LeafSpaceGraph(form, None, classes, {}, [], [], [], config, charts, {}, axis, [])
    graph.fast_t = t
    return graph


# ---------------------------------------------------------------------------
# chart lookup for grid nodes


def node_charts(graph: LeafSpaceGraph, points=None):
    """Edge id and chart parameter of the leaf through every unmasked node.

    Returns ``(edges, t)`` arrays over the node grid; nodes whose leaf meets
    no chart segment get edge ``""`` and ``t = nan``.
    """
    form = graph.form
    shape = form.mask.shape
    edges = np.full(shape, "", dtype=object)
    tvals = np.full(shape, np.nan)
    if graph.fastpath is not None:
        edges[form.mask] = "L0"
        tvals[form.mask] = graph.fast_t[form.mask]
        return edges, tvals
    X, Y = form.coords()
    idx = np.argwhere(form.mask)
    pts = np.stack([X[form.mask], Y[form.mask]], axis=1)
    data = graph.tracer.leaves(pts)
    h = form.h
    node = np.repeat(np.arange(len(pts)), np.diff(data.ptr))
    segs = []
    for e in sorted(graph.chart_segments):
        for seg in graph.chart_segments[e]:
            segs.append((0 if seg.reference else 1, e, seg))
    segs.sort(key=lambda x: (x[0], x[1]))
    cand_c, cand_key, cand_e, cand_t = [], [], [], []
    for rank, (prio, e, seg) in enumerate(segs):
        lo, hi = seg.params[0], seg.params[-1]
        c = np.flatnonzero((data.trans == seg.transversal) & (data.param >= lo - h / 4)
                           & (data.param <= hi + h / 4))
        if not c.size:
            continue
        cand_c.append(c)
        cand_key.append(np.full(c.size, prio * len(segs) + rank))
        cand_e.append(np.full(c.size, rank))
        cand_t.append(np.clip(np.interp(data.param[c], seg.params, seg.t), 0.0, 1.0))
    if cand_c:
        c = np.concatenate(cand_c)
        prio = np.concatenate(cand_key) // len(segs)
        rank = np.concatenate(cand_e)
        t = np.concatenate(cand_t)
        # per node: reference segments first, then the earliest crossing, then the segment order
        order = np.lexsort((rank, c, prio, node[c]))
        nodes = node[c][order]
        first = np.r_[True, nodes[1:] != nodes[:-1]]
        pick = order[first]
        names = np.array([s[1] for s in segs], dtype=object)
        where = tuple(idx[node[c[pick]]].T)
        edges[where] = names[rank[pick]]
        tvals[where] = t[pick]
    return edges, tvals


# ---------------------------------------------------------------------------
# drawing


_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def render_leaves_svg(graph: LeafSpaceGraph, size: int = 480, max_classes: int = 400) -> str:
    """Traced class representatives coloured by edge with limit leaves in bold."""
    x0, x1, y0, y1 = graph.form.box
    scale = size / max(x1 - x0, y1 - y0)
    W, H = (x1 - x0) * scale, (y1 - y0) * scale

    def path(P):
        pts = " ".join(f"{(x - x0) * scale:.2f},{(y1 - y) * scale:.2f}" for x, y in P)
        return pts

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
             f'viewBox="0 0 {W:.2f} {H:.2f}">',
             f'<rect x="0" y="0" width="{W:.2f}" height="{H:.2f}" fill="white" stroke="black"/>']
    edge_of = {}
    for e, items in graph.charts.items():
        for c, _ in items:
            edge_of[c] = e
    order = sorted(graph.charts)
    colour = {e: _PALETTE[i % len(_PALETTE)] for i, e in enumerate(order)}
    step = max(1, len(graph.classes) // max_classes)
    for c in graph.classes[::step]:
        if len(c.representative) < 2:
            continue
        col = colour.get(edge_of.get(c.id, ""), "#999999")
        lines.append(f'<polyline points="{path(c.representative)}" fill="none" stroke="{col}" '
                     f'stroke-width="0.6"/>')
    if graph.net is not None:
        for P in graph.net.polylines:
            lines.append(f'<polyline points="{path(P[::4])}" fill="none" stroke="#bbbbbb" '
                         f'stroke-width="0.4" stroke-dasharray="2,2"/>')
    for lf in graph.limit_leaves:
        if lf.trace is not None and len(lf.trace) > 1:
            lines.append(f'<polyline points="{path(lf.trace[::2])}" fill="none" stroke="black" '
                         f'stroke-width="2.5"><title>{lf.id}</title></polyline>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
