"""Nystrom discretization, Fredholm determinants and the boundary resolvent.

The determinant det(I - K) of a block kernel on a direct sum of L^2[0, inf)
spaces is approximated by the symmetric-scaled Nystrom matrix with entries
sqrt(w_i) K(u_i, u_j) sqrt(w_j).  The boundary resolvent

    Q[a, b] = [(I - K)^(-1) K]_{ab}(0, 0)

is evaluated through the resolvent identity R = K + K (I-K)^(-1) K, with the
kernel evaluated directly at the boundary points (exact, no node
extrapolation).  Its trace is the simultaneous-level logarithmic derivative
of the determinant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .kernels import BlockKernel, KernelSpec, build_block_kernel
from .quadrature import QuadRule, gauss_legendre, map_half_line, map_interval

__all__ = [
    "Discretization",
    "BoundaryResolvent",
    "SingularOperatorError",
    "assemble",
    "det_one_minus",
    "log_det_one_minus",
    "boundary_resolvent",
    "bracket",
    "boundary_bracket_product_check",
]


class SingularOperatorError(RuntimeError):
    """det(I - K) vanished where the resolvent was required."""


@dataclass
class Discretization:
    """Assembled symmetric-scaled Nystrom matrix for det(I - K)."""

    kernel: BlockKernel
    rule: QuadRule
    matrix: np.ndarray
    n_quad: int

    @property
    def spec(self) -> KernelSpec:
        return self.kernel.spec


@dataclass
class BoundaryResolvent:
    """Boundary values Q = [(I-K)^(-1) K](0,0) and the producing config."""

    q_matrix: np.ndarray
    config: tuple
    det_value: float


def assemble(spec_or_kernel, n_quad: int = 64, scale: float = 4.0) -> Discretization:
    """Assemble the scaled Nystrom matrix for a KernelSpec or BlockKernel."""
    if not (8 <= n_quad <= 512):
        raise ValueError("n_quad must lie in [8, 512]")
    kernel = (spec_or_kernel if hasattr(spec_or_kernel, "block")
              else build_block_kernel(spec_or_kernel))
    cut = getattr(kernel.spec, "domain_cut", 0.0)
    if cut:
        rule = map_interval(gauss_legendre(n_quad), 0.0, cut)
    else:
        rule = map_half_line(gauss_legendre(n_quad), 0.0, scale)
    n = kernel.n_blocks
    sw = np.sqrt(rule.weights)
    m = np.empty((n * n_quad, n * n_quad))
    for a in range(n):
        for b in range(n):
            blk = kernel.block(a, b, rule.nodes, rule.nodes)
            m[a * n_quad:(a + 1) * n_quad, b * n_quad:(b + 1) * n_quad] = (
                sw[:, None] * blk * sw[None, :]
            )
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("non-finite entries in Nystrom matrix")
    return Discretization(kernel, rule, m, n_quad)


def log_det_one_minus(disc: Discretization) -> tuple[float, float]:
    """(sign, log|det(I - K)|) via LU."""
    a = np.eye(disc.matrix.shape[0]) - disc.matrix
    sign, logdet = np.linalg.slogdet(a)
    return float(sign), float(logdet)


def det_one_minus(disc: Discretization) -> float:
    """det(I - K); for complex assemblies checks the imaginary part is tiny."""
    a = np.eye(disc.matrix.shape[0]) - disc.matrix
    if np.iscomplexobj(a):
        det = np.linalg.det(a)
        if abs(det.imag) > 1e-9 * max(1.0, abs(det.real)):
            raise FloatingPointError(f"determinant imaginary part {det.imag}")
        value = float(det.real)
    else:
        sign, logdet = np.linalg.slogdet(a)
        value = float(sign * np.exp(logdet))
    if abs(value) < 1e-14:
        warnings.warn("det(I-K) below 1e-14: operator nearly singular",
                      RuntimeWarning, stacklevel=2)
    return value


def boundary_resolvent(disc: Discretization) -> BoundaryResolvent:
    """Q[a,b] = K_ab(0,0) + sum_c int K_ac(0,s) [(I-K)^(-1)K]_cb(s,0) ds."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        det = det_one_minus(disc)
    if abs(det) < 1e-12 or not np.isfinite(det):
        raise SingularOperatorError(f"det(I-K) = {det}: resolvent undefined")
    kernel, rule, nq = disc.kernel, disc.rule, disc.n_quad
    n = kernel.n_blocks
    sw = np.sqrt(rule.weights)
    zero = np.zeros(1)
    # boundary rows/columns against the quadrature nodes
    row = np.empty((n, n * nq))     # K_ac(0, u_j), scaled
    col = np.empty((n * nq, n))     # K_cb(u_i, 0), scaled
    k00 = np.empty((n, n))
    for a in range(n):
        for c in range(n):
            row[a, c * nq:(c + 1) * nq] = kernel.block(a, c, zero, rule.nodes)[0] * sw
            col[c * nq:(c + 1) * nq, a] = kernel.block(c, a, rule.nodes, zero)[:, 0] * sw
            k00[a, c] = kernel.block(a, c, zero, zero)[0, 0]
    resolv = np.linalg.solve(np.eye(n * nq) - disc.matrix, col)
    q = k00 + row @ resolv
    spec = disc.spec
    return BoundaryResolvent(q, (spec.t, tuple(spec.xs), tuple(spec.rs)), det)


# ----------------------------------------------------------------------------
# boundary bracket algebra on explicit test kernels
# ----------------------------------------------------------------------------

def _rule_for_bracket(n_quad: int) -> QuadRule:
    return map_half_line(gauss_legendre(n_quad), 0.0, 2.0)


def bracket(blocks, rule: QuadRule) -> np.ndarray:
    """[A] = matrix of A_ab(0, 0) for a grid of callable blocks."""
    n = len(blocks)
    out = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            out[a, b] = blocks[a][b](np.zeros(1), np.zeros(1))[0, 0]
    return out


def _compose(ablocks, bblocks, rule: QuadRule):
    """(A B)_ab as callables, composing with the quadrature rule."""
    n = len(ablocks)
    u_nodes = rule.nodes
    w = rule.weights

    def make(a, b):
        def entry(u, v):
            acc = 0.0
            for c in range(n):
                left = ablocks[a][c](u, u_nodes)
                right = bblocks[c][b](u_nodes, v)
                acc = acc + (left * w[None, :]) @ right
            return acc
        return entry

    return [[make(a, b) for b in range(n)] for a in range(n)]


def boundary_bracket_product_check(ablocks, d2_ablocks, bblocks, d1_bblocks,
                                   n_quad: int = 96) -> float:
    """Residual of the integration-by-parts identity

        [A][B] + [A D1B + D2A B] = 0

    for block kernels given with analytic first partials.  Returns the
    max-abs entry of the left-hand side.
    """
    rule = _rule_for_bracket(n_quad)
    lhs = bracket(ablocks, rule) @ bracket(bblocks, rule)
    ad1b = bracket(_compose(ablocks, d1_bblocks, rule), rule)
    d2ab = bracket(_compose(d2_ablocks, bblocks, rule), rule)
    return float(np.max(np.abs(lhs + ad1b + d2ab)))
