"""Builders for determinant-derived lattice fields used by the residual checks.

All builders keep quadrature rules fixed across the sweep, so discretization
errors vary smoothly with (t, x, r) and pass through finite-difference
stencils without noise amplification.
"""

from __future__ import annotations

import numpy as np

from .fredholm import assemble, boundary_resolvent, log_det_one_minus
from .kernels import KernelSpec
from .painleve import HMSolution, log_f_gue
from .residuals import GridField

__all__ = [
    "similarity_gue_field",
    "det_field",
    "logdet_value",
    "airy_two_point_logdet",
    "q_stencil",
    "phi_window_narrow_wedge",
    "phi_window_flat",
]


def _lattice(start, step, n):
    return start + step * np.arange(n)


def logdet_value(spec: KernelSpec, n_quad: int = 64) -> float:
    sign, logdet = log_det_one_minus(assemble(spec, n_quad))
    if sign <= 0:
        raise FloatingPointError("non-positive determinant in a field sweep")
    return logdet


def similarity_gue_field(hm: HMSolution, t0, x0, r0, ht, hx, hr, dims,
                         log: bool = False) -> GridField:
    """F(t,x,r) = F_GUE(t^(-1/3) r + t^(-4/3) x^2) on the lattice."""
    t = _lattice(t0, ht, dims[0])[:, None, None]
    x = _lattice(x0, hx, dims[1])[None, :, None]
    r = _lattice(r0, hr, dims[2])[None, None, :]
    s = r / np.cbrt(t) + x * x / np.cbrt(t ** 4)
    lf = log_f_gue(s.ravel(), hm).reshape(s.shape)
    return GridField(t0, x0, r0, ht, hx, hr, lf if log else np.exp(lf))


def det_field(family: str, t0, x0, r0, ht, hx, hr, dims, n_quad: int = 64,
              log: bool = True, spec_kw: dict | None = None) -> GridField:
    """log F (or F) from determinants of a one-point kernel family."""
    spec_kw = dict(spec_kw or {})
    vals = np.empty(dims)
    for i, t in enumerate(_lattice(t0, ht, dims[0])):
        for j, x in enumerate(_lattice(x0, hx, dims[1])):
            for k, r in enumerate(_lattice(r0, hr, dims[2])):
                spec = KernelSpec(family, float(t), (float(x),), (float(r),),
                                  **spec_kw)
                vals[i, j, k] = logdet_value(spec, n_quad)
    return GridField(t0, x0, r0, ht, hx, hr, vals if log else np.exp(vals))


def airy_two_point_logdet(t, xs, rs, y, a, n_quad: int = 64) -> float:
    """log F(t, xs + y, rs + a) for the two-point narrow-wedge determinant."""
    spec = KernelSpec("multiwedge_extended", float(t),
                      tuple(x + y for x in xs), tuple(r + a for r in rs),
                      ((0.0, 0.0),))
    return logdet_value(spec, n_quad)


def q_stencil(t0, xs, rs, ht, hy, ha, dims, n_quad: int = 64):
    """Q-matrices on a (t, y, a) lattice for the matrix KP check.

    Returns an array of shape dims + (n, n).
    """
    n = len(xs)
    out = np.empty(dims + (n, n))
    for i, t in enumerate(_lattice(t0, ht, dims[0])):
        for j, y in enumerate(_lattice(0.0, hy, dims[1]) - hy * (dims[1] // 2)):
            for k, a in enumerate(_lattice(0.0, ha, dims[2]) - ha * (dims[2] // 2)):
                spec = KernelSpec("multiwedge_extended", float(t),
                                  tuple(x + y for x in xs),
                                  tuple(r + a for r in rs), ((0.0, 0.0),))
                out[i, j, k] = boundary_resolvent(assemble(spec, n_quad)).q_matrix
    return out


def phi_window_narrow_wedge(hm: HMSolution, t: float, x_grid, r_grid) -> np.ndarray:
    """phi = d_r^2 log F = -t^(-2/3) q(s)^2 at s = t^(-1/3) r + t^(-4/3) x^2."""
    s = (r_grid[None, :] / np.cbrt(t)
         + (x_grid[:, None] ** 2) / np.cbrt(t ** 4))
    q = hm.q_at(s.ravel()).reshape(s.shape)
    return -q * q / np.cbrt(t * t)


def phi_window_flat(hm: HMSolution, t: float, r_grid) -> np.ndarray:
    """Flat-data phi(t, r) via the Miura form (q' - q^2)/2 of the reduction."""
    c = np.cbrt(4.0 / t)
    s = c * r_grid
    q = hm.q_at(s)
    qp = hm._q_spline.derivative()(np.clip(s, hm.left, hm.right))
    return c * c * 0.5 * (qp - q * q)
