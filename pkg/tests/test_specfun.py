import numpy as np
import pytest
import scipy.special as sp

from kpdet import specfun


class TestAiry:
    def test_value_at_zero(self):
        # Maclaurin oracle: Ai(0) = 3^(-2/3)/Gamma(2/3)
        assert abs(specfun.airy_ai(0.0) - 0.35502805388781723) < 1e-15

    def test_decay_at_ten(self):
        assert specfun.airy_ai(10.0) < 1e-9

    def test_first_zero(self):
        assert abs(specfun.airy_ai(specfun.AI_ZERO1)) < 1e-8

    def test_abs_error_core(self):
        x = np.linspace(-12.0, 12.0, 6001)
        ref = sp.airy(x)[0]
        assert np.max(np.abs(specfun.airy_ai(x) - ref)) < 1e-13

    def test_oscillatory_tail(self):
        x = np.linspace(-60.0, -12.0, 2000)
        ref = sp.airy(x)[0]
        assert np.max(np.abs(specfun.airy_ai(x) - ref)) < 1e-12

    def test_monotone_decay_right(self):
        x = np.linspace(1.0, 12.0, 500)
        v = specfun.airy_ai(x)
        assert np.all(np.diff(v) < 0)

    def test_airy_ode_residual(self):
        # 5-point second difference, h = 1e-3.  The roundoff floor of the
        # stencil is sum|c| * eps ~ 5e-10, so the bound sits just above it.
        h = 1e-3
        x = np.linspace(-10, 10, 2001)
        offs = np.array([-2, -1, 0, 1, 2]) * h
        c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
        vals = np.stack([specfun.airy_ai(x + o) for o in offs])
        d2 = np.tensordot(c, vals, axes=1)
        assert np.max(np.abs(d2 - x * specfun.airy_ai(x))) < 5e-9

    def test_exp_bound_positive(self):
        x = np.linspace(0.0, 12.0, 200)
        bound = np.exp(-(2.0 / 3.0) * x ** 1.5)
        assert np.all(specfun.airy_ai(x) <= bound + 1e-15)

    def test_log_branch(self):
        x = np.linspace(9.0, 300.0, 400)
        la, sg = specfun.airy_ai_log_abs(x)
        ref = np.array([float(np.log(sp.airy(min(v, 103.0))[0])) if v < 103
                        else np.nan for v in x])
        mask = x < 103
        assert np.all(sg[mask] == 1.0)
        assert np.max(np.abs(la[mask] - ref[mask])) < 1e-12
        assert np.all(np.isfinite(la))


class TestAiryPrime:
    def test_value_at_zero(self):
        assert abs(specfun.airy_ai_prime(0.0) + 0.25881940379280680) < 1e-14

    def test_decay(self):
        assert abs(specfun.airy_ai_prime(10.0)) < 1e-8

    def test_central_difference_consistency(self):
        h = 1e-5
        fd = (specfun.airy_ai(1.0 + h) - specfun.airy_ai(1.0 - h)) / (2 * h)
        assert abs(fd - specfun.airy_ai_prime(1.0)) < 1e-9

    def test_abs_error_core(self):
        x = np.linspace(-12.0, 12.0, 4001)
        assert np.max(np.abs(specfun.airy_ai_prime(x) - sp.airy(x)[1])) < 1e-12


class TestLogGamma:
    def test_gamma_one(self):
        assert abs(specfun.log_gamma(1.0)) < 1e-14

    def test_half(self):
        assert abs(specfun.log_gamma(0.5) - np.log(np.sqrt(np.pi))) < 1e-13

    def test_reflection_point(self):
        z = 0.3 + 0.7j
        lhs = np.exp(specfun.log_gamma(z) + specfun.log_gamma(1 - z))
        assert abs(lhs - np.pi / np.sin(np.pi * z)) < 1e-11

    def test_recurrence_and_reflection_grid(self):
        rng = np.random.default_rng(7)
        z = rng.uniform(-9, 9, 100) + 1j * rng.uniform(-40, 40, 100)
        z = z[np.abs(z.imag) > 1e-3]
        rec = np.exp(specfun.log_gamma(z + 1)) - z * np.exp(specfun.log_gamma(z))
        scale = np.abs(np.exp(specfun.log_gamma(z + 1)))
        assert np.max(np.abs(rec) / scale) < 1e-11
        refl = (np.exp(specfun.log_gamma(z) + specfun.log_gamma(1 - z))
                - np.pi / np.sin(np.pi * z))
        refl_scale = np.abs(np.pi / np.sin(np.pi * z))
        assert np.max(np.abs(refl) / refl_scale) < 1e-11

    def test_relative_error_strip(self):
        rng = np.random.default_rng(1)
        z = rng.uniform(-10, 10, 500) + 1j * rng.uniform(-50, 50, 500)
        z = z[np.abs(z.imag) > 1e-6]
        lg = specfun.log_gamma(z)
        ref = sp.loggamma(z)
        rel = np.abs(lg - ref) / np.maximum(np.abs(ref), 1.0)
        assert np.max(rel) < 1e-12

    def test_pole_error(self):
        with pytest.raises(specfun.GammaPoleError):
            specfun.log_gamma(0.0)
        with pytest.raises(specfun.GammaPoleError):
            specfun.log_gamma(-3.0 + 1e-15j)
