"""Frobenius residuals and closing multipliers of a few sampled forms.

The residual of the winding cylinder form shrinks as the grid is refined
(its coefficients are only once differentiable at two radii), the contact
form stays at one on every grid, and ``e^y dx`` becomes closed after
multiplying by ``e^-y``, so the closing multiplier is ``-y`` up to a constant.

Run ``python demos/forms.py``.
"""

import numpy as np

from foliagraph.form_field import builtin, closing_multiplier, wedge_residual


def main():
    wc = builtin("winding-cylinder")
    for n in (32, 64, 128):
        print(f"winding-cylinder {n}^3: max |w ^ dw| = {wedge_residual(wc.sample((n, n, n))).max_abs:.2e}")
    for n in (5, 17):
        res = wedge_residual(builtin("contact").sample((n, n, n)))
        print(f"contact {n}^3: max |w ^ dw| = {res.max_abs:.6f}")
    form = builtin("exact-ey").sample()
    close = closing_multiplier(form)
    _, Y = form.coords()
    dev = close.lam + Y
    print(f"e^y dx: closing multiplier feasible, residual {close.residual:.1e}, "
          f"lambda + y = {np.nanmean(dev):.4f} up to {np.nanmax(dev) - np.nanmin(dev):.1e}")
    print(f"contact: closing multiplier feasible = {closing_multiplier(builtin('contact').sample()).feasible}")


if __name__ == "__main__":
    main()
