"""Brownian hitting kernels, small-time limits and the path-integral formula.

For a finite collection of narrow wedges the hitting operator of the
hypograph factorizes into chains of heat kernels with level cutoffs, and the
constrained transition density is a finite-dimensional Gaussian integral
(the initial profile is -inf off the wedge points, so staying above it is a
pointwise constraint).  This module provides those objects together with the
checks that the finite-t scattering blocks converge to them as t -> 0, and
the whole-line path-integral form of the fixed point determinant.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .fredholm import assemble, boundary_resolvent
from .kernels import (
    KernelSpec,
    heat_kernel,
    scattering_part_logmat,
)
from .quadrature import (
    gauss_legendre,
    map_half_line,
    map_half_line_down,
    map_interval,
)

__all__ = [
    "WedgeConfig",
    "OrderingError",
    "hit_kernel",
    "no_hit_kernel",
    "constrained_bridge_density",
    "mc_bridge_density",
    "rk_limit_check",
    "t0_kernel_decay_check",
    "initial_data_determinant",
    "path_integral_determinant",
]


class OrderingError(ValueError):
    """Raised when x_i >= x_j where a left-to-right transition is required."""


@dataclass(frozen=True)
class WedgeConfig:
    """Narrow wedge collection with observation positions and levels."""

    wedges: tuple
    xs: tuple
    rs: tuple

    def __post_init__(self):
        a = np.asarray([w[0] for w in self.wedges], dtype=float)
        if a.size > 1 and np.any(np.diff(a) <= 0):
            raise ValueError("wedge positions must be strictly increasing")
        xs = np.asarray(self.xs, dtype=float)
        if xs.size > 1 and np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        if len(self.rs) != len(self.xs):
            raise ValueError("rs must match xs")

    def profile_at(self, x: float) -> float:
        """Initial profile value: b_k at wedge points, -inf elsewhere."""
        for (a, b) in self.wedges:
            if abs(x - a) < 1e-12:
                return float(b)
        return -np.inf


def _cutoff_rule(b: float, width: float, n: int = 64):
    return map_half_line_down(gauss_legendre(n), b, max(1.0, width))


def _chain_hit(xi, xj, pos, lev, u, v, n_inner=64):
    """Heat-kernel chain from x_i to x_j through cutoffs at (pos, lev).

    Wedges sitting exactly at x_i or x_j act as plain indicators on the
    endpoint argument; interior ones become cutoff integrals.  Returns the
    matrix over (u, v).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    pos = list(pos)
    lev = list(lev)
    pre_u = np.ones(u.size)
    pre_v = np.ones(v.size)
    if pos and pos[0] == xi:
        pre_u = (u <= lev[0]).astype(float)
        pos, lev = pos[1:], lev[1:]
    if pos and pos[-1] == xj:
        pre_v = (v <= lev[-1]).astype(float)
        pos, lev = pos[:-1], lev[:-1]
    width = 3.0 * np.sqrt(2.0 * (xj - xi))
    mat = None
    prev_nodes, prev_x = u, xi
    for (x, b) in zip(pos, lev):
        rule = _cutoff_rule(b, width, n_inner)
        hk = heat_kernel(x - prev_x, prev_nodes[:, None], rule.nodes[None, :])
        hk = hk * rule.weights[None, :]
        mat = hk if mat is None else mat @ hk
        prev_nodes, prev_x = rule.nodes, x
    hk = heat_kernel(xj - prev_x, prev_nodes[:, None], v[None, :])
    mat = hk if mat is None else mat @ hk
    return pre_u[:, None] * mat * pre_v[None, :]


def hit_kernel(cfg: WedgeConfig, i: int, j: int, u, v, n_inner: int = 64):
    """P^{Hit}_{x_i, x_j}(u, v) for the wedge profile, x_i < x_j.

    Inclusion-exclusion over nonempty subsets of the wedges lying inside
    [x_i, x_j]; each term is a heat-kernel chain with cutoffs at the wedge
    levels.  Wedges outside the window do not contribute.
    """
    xi, xj = cfg.xs[i], cfg.xs[j]
    if xi >= xj:
        raise OrderingError("hit_kernel requires x_i < x_j")
    inside = [(a, b) for (a, b) in cfg.wedges if xi <= a <= xj]
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    out = np.zeros((u.size, v.size))
    for n in range(1, len(inside) + 1):
        sgn = 1.0 if n % 2 == 1 else -1.0
        for subset in combinations(inside, n):
            pos = [a for (a, _) in subset]
            lev = [b for (_, b) in subset]
            out += sgn * _chain_hit(xi, xj, pos, lev, u, v, n_inner)
    return out[0, 0] if (u.size == 1 and v.size == 1) else out


def no_hit_kernel(cfg: WedgeConfig, i: int, j: int, u, v, n_inner: int = 64):
    """P^{No hit}_{x_i, x_j} = heat - P^{Hit}."""
    xi, xj = cfg.xs[i], cfg.xs[j]
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return heat_kernel(xj - xi, u[:, None], v[None, :]) - hit_kernel(cfg, i, j, u, v, n_inner)


# ----------------------------------------------------------------------------
# constrained bridge density (matrix KP initial data)
# ----------------------------------------------------------------------------

def _interior_constraints(cfg: WedgeConfig, i: int, j: int):
    """Sorted interior points with their (lower, upper) constraints."""
    xi, xj = cfg.xs[i], cfg.xs[j]
    pts = {}
    for (a, b) in cfg.wedges:
        if xi < a < xj:
            lo, hi = pts.get(a, (-np.inf, np.inf))
            pts[a] = (max(lo, b), hi)
    for k, xn in enumerate(cfg.xs):
        if xi < xn < xj:
            lo, hi = pts.get(xn, (-np.inf, np.inf))
            pts[xn] = (lo, min(hi, cfg.rs[k]))
    return sorted(pts.items())


def constrained_bridge_density(cfg: WedgeConfig, i: int, j: int, n_inner: int = 64):
    """Density of B(x_j) at r_j for B from (x_i, r_i), staying above every
    wedge level and below every intermediate observation level.

    Exact finite-dimensional Gaussian integral: the profile is -inf off the
    wedge points, so the constraints are pointwise.
    """
    xi, xj = cfg.xs[i], cfg.xs[j]
    if xi >= xj:
        raise OrderingError("need x_i < x_j")
    ri, rj = cfg.rs[i], cfg.rs[j]
    if cfg.profile_at(xi) > ri or cfg.profile_at(xj) > rj:
        return 0.0
    pts = _interior_constraints(cfg, i, j)
    base = gauss_legendre(n_inner)
    width = 3.0 * np.sqrt(2.0 * (xj - xi))

    vec = np.ones(1)
    prev_nodes = np.array([ri])
    prev_x = xi
    for (x, (lo, hi)) in pts:
        if lo > hi:
            return 0.0
        if np.isinf(lo) and np.isinf(hi):
            continue
        if np.isinf(hi):
            rule = map_half_line(base, lo, width)
        elif np.isinf(lo):
            rule = map_half_line_down(base, hi, width)
        else:
            rule = map_interval(base, lo, hi)
        hk = heat_kernel(x - prev_x, prev_nodes[:, None], rule.nodes[None, :])
        vec = vec @ (hk * rule.weights[None, :])
        prev_nodes, prev_x = rule.nodes, x
    hk = heat_kernel(xj - prev_x, prev_nodes, rj)
    return float(vec @ hk)


def mc_bridge_density(cfg: WedgeConfig, i: int, j: int, n_paths: int = 100_000,
                      seed: int = 0):
    """Monte-Carlo oracle for constrained_bridge_density.

    Samples the Brownian motion exactly at the constraint points (Gaussian
    increments with variance 2*dx) and weights accepted paths by the final
    heat kernel, so the estimator is unbiased; returns (estimate, stderr).
    """
    xi, xj = cfg.xs[i], cfg.xs[j]
    rng = np.random.default_rng(seed)
    pts = _interior_constraints(cfg, i, j)
    pos = np.full(n_paths, float(cfg.rs[i]))
    alive = np.ones(n_paths, dtype=bool)
    prev_x = xi
    for (x, (lo, hi)) in pts:
        pos = pos + rng.normal(0.0, np.sqrt(2.0 * (x - prev_x)), n_paths)
        alive &= (pos >= lo) & (pos <= hi)
        prev_x = x
    w = np.where(alive, heat_kernel(xj - prev_x, pos, cfg.rs[j]), 0.0)
    return float(np.mean(w)), float(np.std(w) / np.sqrt(n_paths))


# ----------------------------------------------------------------------------
# t -> 0 checks
# ----------------------------------------------------------------------------

def rk_limit_check(cfg: WedgeConfig, t_seq, n_quad: int = 64):
    """Compare boundary resolvent entries against the small-time limit.

    For each t: off-diagonal (i<j) entries of Q approach minus the
    constrained bridge density, all other entries approach 0.  Returns a
    list of dicts with per-entry errors.
    """
    n = len(cfg.xs)
    target = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            target[i, j] = -constrained_bridge_density(cfg, i, j)
    rows = []
    for t in t_seq:
        spec = KernelSpec("multiwedge_extended", float(t), cfg.xs, cfg.rs,
                          tuple(cfg.wedges))
        q = boundary_resolvent(assemble(spec, n_quad)).q_matrix
        err = np.abs(q - target)
        rows.append({
            "t": float(t),
            "q": q,
            "target": target.copy(),
            "max_err": float(np.max(err)),
            "max_lower_err": float(np.max(np.abs(np.tril(q, -1)))),
        })
    return rows


def t0_kernel_decay_check(a: float, b: float, x_i: float, x_j: float,
                          ts=(0.2, 0.1, 0.05), u: float = 0.5, v: float = 0.5):
    """Fit log|K_t(u, v)| against 1/t^2 for a wedge outside [x_i, x_j].

    Returns (c, r2): the fitted decay rate in exp(-c/t^2) and the fit
    quality.  Uses the log-space chain evaluator, since the values underflow
    ordinary doubles already at t ~ 0.1.
    """
    logs = []
    for t in ts:
        spec = KernelSpec("nw_fixed_point", float(t), (x_i, x_j),
                          (0.0, 0.0), ((a, b),))
        lm = scattering_part_logmat(spec, 0, 1, np.array([u]), np.array([v]))
        logs.append(lm.logabs[0, 0])
    xs = 1.0 / np.asarray(ts, dtype=float) ** 2
    ys = np.asarray(logs)
    coef = np.polyfit(xs, ys, 1)
    fit = np.polyval(coef, xs)
    ss_res = np.sum((ys - fit) ** 2)
    ss_tot = np.sum((ys - np.mean(ys)) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-coef[0]), float(r2)


def initial_data_determinant(cfg: WedgeConfig, n_quad: int = 64, scale: float = 4.0):
    """det(I - P_r K0 P_r) for the t -> 0 block kernel.

    K0 has multiplication blocks 1{u <= profile(x_i)} on the diagonal,
    -P^{No hit} above it and 0 below; the determinant reproduces
    prod_i 1{r_i >= profile(x_i)}.
    """
    n = len(cfg.xs)
    rule = map_half_line(gauss_legendre(n_quad), 0.0, scale)
    nq = rule.n
    sw = np.sqrt(rule.weights)
    m = np.zeros((n * nq, n * nq))
    for i in range(n):
        level = cfg.profile_at(cfg.xs[i])
        diag = (rule.nodes + cfg.rs[i] <= level).astype(float)
        m[i * nq:(i + 1) * nq, i * nq:(i + 1) * nq] = np.diag(diag)
        for j in range(i + 1, n):
            blk = -no_hit_kernel(cfg, i, j, rule.nodes + cfg.rs[i],
                                 rule.nodes + cfg.rs[j])
            m[i * nq:(i + 1) * nq, j * nq:(j + 1) * nq] = sw[:, None] * blk * sw[None, :]
    sign, logdet = np.linalg.slogdet(np.eye(n * nq) - m)
    return float(sign * np.exp(logdet))


# ----------------------------------------------------------------------------
# path-integral determinant (whole-line form)
# ----------------------------------------------------------------------------

def _panel_line_rule(breaks, left_edge, n_panel, tail_scale):
    base = gauss_legendre(n_panel)
    bp = np.unique(np.concatenate([[left_edge], np.asarray(breaks, dtype=float)]))
    nodes, weights = [], []
    for a, b in zip(bp[:-1], bp[1:]):
        if b - a < 1e-10:
            continue
        r = map_interval(base, a, b)
        nodes.append(r.nodes)
        weights.append(r.weights)
    tail = map_half_line(base, bp[-1], tail_scale)
    nodes.append(tail.nodes)
    weights.append(tail.weights)
    return np.concatenate(nodes), np.concatenate(weights)


def path_integral_determinant(t: float, xs, rs, n_panel: int = 72,
                              inner_n: int = 64, tail_scale: float = 4.0):
    """Fixed point distribution for a narrow wedge at the origin via the
    path-integral determinant on L^2(R):

        F = det(I - K_{t,x1} + Pbar_{r1} e^{(x2-x1)d^2} ... Pbar_{rm}
                e^{(x1-xm)d^2} K_{t,x1})

    The backward heat factor is absorbed into the Airy convolution kernel
    analytically; cutoff indicators are exact on the panel-split rule.  The
    kernels grow like exp(|u| max|x| / t) toward the left edge of the
    domain, so the panel resolution is kept high and the left edge no deeper
    than the constraint-cancellation tail requires.
    """
    xs = tuple(float(x) for x in xs)
    rs = tuple(float(r) for r in rs)
    m = len(xs)
    if m > 3:
        raise ValueError("at most 3 observation points")
    dxs = np.diff(xs)
    if m > 1 and np.any(dxs <= 0):
        raise OrderingError("xs must be strictly increasing")
    span = (xs[-1] - xs[0]) if m > 1 else 0.0
    left = min(min(rs), 0.0) - max(5.0, 8.0 * np.sqrt(2.0 * span) if m > 1 else 0.0)
    nodes, weights = _panel_line_rule(sorted(set(rs)), left, n_panel, tail_scale)

    if m == 1:
        spec1 = KernelSpec("nw_fixed_point", t, (xs[0],), (0.0,), ((0.0, 0.0),),
                           inner_n=inner_n)
        k1 = scattering_part_logmat(spec1, 0, 0, nodes, nodes).to_linear()
        op = (nodes > rs[0]).astype(float)[:, None] * k1
    else:
        # Backward heat absorbed: C = S[-t,-x_m] Pbar_0 S[t,x_1].  The free
        # kernel K_{t,x1} is rebuilt from the SAME discrete heat factors so
        # that the two terms cancel exactly at deep-left rows, where each is
        # separately an unresolved oscillatory integral.
        spec_c = KernelSpec("nw_fixed_point", t, (xs[0], xs[-1]), (0.0, 0.0),
                            ((0.0, 0.0),), inner_n=inner_n)
        c_mat = scattering_part_logmat(spec_c, 1, 0, nodes, nodes).to_linear()
        free = c_mat
        chain = (nodes <= rs[-1]).astype(float)[:, None] * c_mat
        for k in range(m - 2, -1, -1):
            hk = heat_kernel(xs[k + 1] - xs[k], nodes[:, None], nodes[None, :])
            a_k = hk * weights[None, :]
            free = a_k @ free
            chain = a_k @ chain
            if k > 0:
                chain = (nodes <= rs[k]).astype(float)[:, None] * chain
        chain = (nodes <= rs[0]).astype(float)[:, None] * chain
        op = free - chain
    sw = np.sqrt(weights)
    sign, logdet = np.linalg.slogdet(np.eye(nodes.size) - sw[:, None] * op * sw[None, :])
    return float(sign * np.exp(logdet))
