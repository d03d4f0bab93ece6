"""Periodic pseudo-spectral KP-II integrator and the determinant-field closure test.

The equation

    phi_t + phi phi_r + (1/12) phi_rrr + (1/4) dr^{-1} phi_xx = 0

is integrated with a fourth-order exponential (ETDRK4) scheme: the linear
phase exp(dt (i k_r^3/12 - i k_x^2/(4 k_r))) is applied exactly, the
nonlinear term -(1/2) d_r(phi^2) is dealiased by the 2/3 rule.

Determinant-derived fields ride on a ramp (phi ~ r/(2t) as r -> -inf), so
the plain zero-mean spectral antiderivative would misrepresent dr^{-1} by a
column mean.  Instead dr^{-1} is anchored at the top of the box, where
d_r log F -> 0: the mean-free part is inverted spectrally and shifted to
vanish at the anchor row, and the per-column mean of phi_xx is carried by
an explicit smooth pseudo-ramp that is exact over the trusted window and
returns to periodicity inside the pads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpectralState",
    "KPSolver",
    "BlowUpError",
    "soliton_profile",
    "smooth_window",
    "evolve_and_compare",
]


class BlowUpError(RuntimeError):
    """Solution sup-norm exceeded the blow-up guard."""


@dataclass
class SpectralState:
    """Fourier modes of phi on the periodic (x, r) box."""

    phi_hat: np.ndarray     # shape (n_x, n_r), complex
    time: float

    def copy(self):
        return SpectralState(self.phi_hat.copy(), self.time)


def soliton_profile(r, c, r0=0.0):
    """Line soliton 3c sech^2(sqrt(3c)(r - r0)) of the KdV reduction."""
    arg = np.sqrt(3.0 * c) * (r - r0)
    return 3.0 * c / np.cosh(arg) ** 2


def smooth_window(xi):
    """C-infinity step: 0 for xi <= 0, 1 for xi >= 1."""
    xi = np.clip(xi, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        f = np.where(xi > 0, np.exp(-1.0 / np.maximum(xi, 1e-12)), 0.0)
        g = np.where(xi < 1, np.exp(-1.0 / np.maximum(1 - xi, 1e-12)), 0.0)
    return f / (f + g)


class KPSolver:
    """ETDRK4 stepper on a fixed periodic box."""

    def __init__(self, box_r, box_x, n_r, n_x, dt, anchor_r=None):
        self.r_lo, self.r_hi = box_r
        self.x_lo, self.x_hi = box_x
        self.len_r = self.r_hi - self.r_lo
        self.len_x = self.x_hi - self.x_lo
        self.n_r, self.n_x = n_r, n_x
        self.r = self.r_lo + self.len_r * np.arange(n_r) / n_r
        self.x = self.x_lo + self.len_x * np.arange(n_x) / n_x
        self.dt = dt
        kr = 2.0 * np.pi * np.fft.fftfreq(n_r, d=self.len_r / n_r)
        kx = 2.0 * np.pi * np.fft.fftfreq(n_x, d=self.len_x / n_x)
        self.kr = kr[None, :]
        self.kx = kx[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            lin = 1j * self.kr ** 3 / 12.0 - 1j * self.kx ** 2 / (4.0 * self.kr)
        lin[:, 0] = 0.0
        self.lin = np.broadcast_to(lin, (n_x, n_r)).copy()
        self._etd_coeffs()
        # 2/3 dealiasing mask
        mask_r = np.abs(kr) <= (2.0 / 3.0) * np.max(np.abs(kr))
        mask_x = np.abs(kx) <= (2.0 / 3.0) * np.max(np.abs(kx)) if n_x > 3 else np.ones(n_x, bool)
        self.dealias = mask_x[:, None] & mask_r[None, :]
        # anchored antiderivative machinery; the anchor row sits just below
        # the pseudo-ramp's return dip (top ~10% of the box)
        self.anchor_r = self.r_lo + 0.88 * self.len_r if anchor_r is None else anchor_r
        self._anchor_idx = int(np.argmin(np.abs(self.r - self.anchor_r)))
        self.pseudo_ramp = self._build_pseudo_ramp()
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_ikr = 1.0 / (1j * self.kr)
        inv_ikr[:, 0] = 0.0
        self.inv_ikr = inv_ikr

    def _build_pseudo_ramp(self):
        """Periodic pseudo-ramp with slope 1 everywhere except a C-infinity
        return dip in the top ~10% of the box, zero at the anchor row.

        It carries the column-mean part of dr^{-1} phi_xx exactly over the
        trusted window; the deliberate error is confined to the dip, which
        lies above the anchor inside the upper pad.
        """
        n = self.n_r
        u = np.arange(n) / n
        g = smooth_window((u - 0.90) / 0.03) * smooth_window((0.99 - u) / 0.03)
        g_int = np.sum(g) * (self.len_r / n)
        ramp_prime = 1.0 - (self.len_r / g_int) * g
        ramp_prime -= np.mean(ramp_prime)
        ramp = np.cumsum(ramp_prime) * (self.len_r / n)
        mid = slice(n // 5, 3 * n // 5)
        slope = np.mean(np.diff(ramp[mid])) / (self.len_r / n)
        ramp = ramp / slope
        return ramp - ramp[self._anchor_idx]

    def _etd_coeffs(self):
        """Kassam-Trefethen contour evaluation of the ETDRK4 coefficients."""
        dt = self.dt
        lam = dt * self.lin.ravel()
        m = 32
        pts = np.exp(1j * np.pi * (np.arange(m) + 0.5) / m)
        lr = lam[:, None] + pts[None, :]
        self.e_full = np.exp(lam).reshape(self.lin.shape)
        self.e_half = np.exp(lam / 2.0).reshape(self.lin.shape)
        def mean(f):
            return np.real_if_close(f.mean(axis=1), tol=1e6).reshape(self.lin.shape)
        self.q_half = dt * mean((np.exp(lr / 2.0) - 1.0) / lr)
        self.f1 = dt * mean((-4.0 - lr + np.exp(lr) * (4.0 - 3.0 * lr + lr ** 2)) / lr ** 3)
        self.f2 = dt * mean((2.0 + lr + np.exp(lr) * (lr - 2.0)) / lr ** 3)
        self.f3 = dt * mean((-4.0 - 3.0 * lr - lr ** 2 + np.exp(lr) * (4.0 - lr)) / lr ** 3)

    def _nonlinear(self, phi_hat):
        """-(1/2) d_r phi^2 plus the anchored-dr^{-1} corrections, in Fourier."""
        phi = np.fft.ifft2(phi_hat).real
        nl_hat = -0.5j * self.kr * np.fft.fft2(phi * phi)
        nl_hat *= self.dealias
        # corrections making dr^{-1}(phi_xx) anchored at the top row:
        # column means of phi_xx ride the pseudo-ramp, the mean-free spectral
        # antiderivative is shifted to vanish at the anchor row
        pxx_hat = -self.kx ** 2 * phi_hat
        means = np.fft.ifft(pxx_hat[:, 0], axis=0).real / self.n_r  # per-column mean over r
        a_perp_hat = pxx_hat * self.inv_ikr
        a_perp_anchor = np.fft.ifft2(a_perp_hat).real[:, self._anchor_idx]
        corr = -(0.25) * (means[:, None] * self.pseudo_ramp[None, :]
                          - a_perp_anchor[:, None])
        nl_hat += np.fft.fft2(corr)
        return nl_hat

    def step(self, state: SpectralState) -> SpectralState:
        v = state.phi_hat
        n0 = self._nonlinear(v)
        a = self.e_half * v + self.q_half * n0
        na = self._nonlinear(a)
        b = self.e_half * v + self.q_half * na
        nb = self._nonlinear(b)
        c = self.e_half * a + self.q_half * (2.0 * nb - n0)
        nc = self._nonlinear(c)
        out = (self.e_full * v + self.f1 * n0 + 2.0 * self.f2 * (na + nb)
               + self.f3 * nc)
        phi = np.fft.ifft2(out).real
        if np.max(np.abs(phi)) > 1e6:
            raise BlowUpError(f"|phi| = {np.max(np.abs(phi)):.3g} at t={state.time}")
        return SpectralState(out, state.time + self.dt)

    def evolve(self, phi0: np.ndarray, n_steps: int) -> np.ndarray:
        state = SpectralState(np.fft.fft2(phi0.astype(float)), 0.0)
        for _ in range(n_steps):
            state = self.step(state)
        return np.fft.ifft2(state.phi_hat).real

    def invariants(self, phi: np.ndarray):
        """(int phi, int phi^2) over the box."""
        cell = (self.len_r / self.n_r) * (self.len_x / self.n_x)
        return float(np.sum(phi) * cell), float(np.sum(phi * phi) * cell)


def evolve_and_compare(phi_builder, t0: float, t1: float,
                       window_r=(-8.0, 6.0), window_x=(-3.0, 3.0),
                       pad_lo: float = 6.0, pad_hi: float = 3.5,
                       box_x=(-4.5, 4.5), n_r: int = 512, n_x: int = 64,
                       dt: float = 2.0e-3, kdv: bool = False,
                       return_fields: bool = False):
    """Embed a determinant field at t0, evolve under KP-II, compare at t1.

    phi_builder(t, x_grid, r_grid) -> phi array of shape (n_x, n_r).  The
    comparison happens on the central 60% of the window in both directions;
    returns a dict with the interior sup/L2 errors and embedding metadata.
    """
    if t1 - t0 > 0.2 + 1e-12:
        raise ValueError("t1 - t0 must be <= 0.2")
    box_r = (window_r[0] - pad_lo, window_r[1] + pad_hi)
    if kdv:
        box_x, n_x = (-0.5, 0.5), 4
    solver = KPSolver(box_r, box_x, n_r, n_x, dt)
    r, x = solver.r, solver.x

    # C-infinity taper: 1 on a margin inside the box, 0 at the edges
    lo_w = 0.75 * pad_lo
    hi_w = 0.75 * pad_hi
    taper = (smooth_window((r - box_r[0]) / lo_w)
             * smooth_window((box_r[1] - r) / hi_w))

    phi0 = phi_builder(t0, x, r) * taper[None, :]
    n_steps = int(round((t1 - t0) / dt))
    if n_steps == 0:
        phi_end = phi0
    else:
        solver.dt = (t1 - t0) / n_steps
        solver._etd_coeffs()
        phi_end = solver.evolve(phi0, n_steps)

    target = phi_builder(t1, x, r)
    r_span = window_r[1] - window_r[0]
    x_span = window_x[1] - window_x[0]
    mask_r = (r >= window_r[0] + 0.2 * r_span) & (r <= window_r[1] - 0.2 * r_span)
    mask_x = ((x >= window_x[0] + 0.2 * x_span) & (x <= window_x[1] - 0.2 * x_span)
              if not kdv else np.ones(x.size, bool))
    diff = (phi_end - target)[np.ix_(mask_x, mask_r)]
    out = {
        "sup_error": float(np.max(np.abs(diff))),
        "l2_error": float(np.sqrt(np.mean(diff ** 2))),
        "n_steps": n_steps,
        "dt": float(solver.dt),
        "box_r": box_r,
        "interior_r": (float(r[mask_r][0]), float(r[mask_r][-1])),
        "edge_taper_max_change": float(np.max(np.abs(phi0 - phi_builder(t0, x, r))
                                              [np.ix_(mask_x, mask_r)])),
    }
    if return_fields:
        xi = x[mask_x]
        ri = r[mask_r]
        pe = phi_end[np.ix_(mask_x, mask_r)]
        pt = target[np.ix_(mask_x, mask_r)]
        out["fields"] = [(xi[i], ri[j], pe[i, j], pt[i, j])
                         for i in range(xi.size) for j in range(ri.size)]
    return out
