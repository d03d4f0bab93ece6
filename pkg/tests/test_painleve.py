import numpy as np
import pytest

from kpdet import fredholm, painleve
from kpdet.kernels import KernelSpec
from kpdet.specfun import airy_ai


@pytest.fixture(scope="module")
def hm():
    return painleve.hastings_mcleod()


def gue_det(r, n=64):
    spec = KernelSpec("nw_fixed_point", 1.0, (0.0,), (float(r),), ((0.0, 0.0),))
    return fredholm.det_one_minus(fredholm.assemble(spec, n))


class TestHastingsMcleod:
    def test_right_boundary(self, hm):
        assert abs(hm._q_spline(8.0) + airy_ai(8.0)) < 1e-8

    def test_left_asymptote(self, hm):
        assert abs(hm._q_spline(-8.0) + 2.0) < 5e-3

    def test_value_at_zero(self, hm):
        assert abs(hm._q_spline(0.0) + 0.3670615) < 1e-5

    def test_value_at_zero_independent_oracle(self, hm):
        # psi = -q^2 turns q into the curvature of the determinant route:
        # q(0) = -sqrt(-(d/ds)^2 log F_GUE(0)) with F_GUE from Fredholm dets
        h = 5e-3
        ld = [np.log(gue_det(r)) for r in (-2 * h, -h, 0.0, h, 2 * h)]
        d2 = (-ld[0] + 16 * ld[1] - 30 * ld[2] + 16 * ld[3] - ld[4]) / (12 * h * h)
        assert abs(float(hm._q_spline(0.0)) + np.sqrt(-d2)) < 1e-5

    def test_interior_5pt_residual(self, hm):
        g, q = hm.grid, hm.q
        h = g[1] - g[0]
        r5 = ((-q[:-4] + 16 * q[1:-3] - 30 * q[2:-2] + 16 * q[3:-1] - q[4:])
              / (12 * h * h) - g[2:-2] * q[2:-2] - 2 * q[2:-2] ** 3)
        assert np.max(np.abs(r5)) < 1e-8

    def test_strictly_negative(self, hm):
        assert np.all(hm.q < 0)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            painleve.hastings_mcleod(L=4.0)


class TestDistributions:
    def test_gue_right_tail(self, hm):
        assert 1.0 - float(painleve.f_gue(4.0, hm)) < 1e-4

    def test_gue_cross_oracle(self, hm):
        assert abs(float(painleve.f_gue(0.0, hm)) - gue_det(0.0)) < 1e-7

    def test_gue_lower_tail_cubic(self, hm):
        # -log F ~ |s|^3/12 with small corrections at s = -6
        val = -float(painleve.log_f_gue(-6.0, hm))
        assert abs(val - 18.0) < 0.15 * 18.0

    def test_goe_right_tail(self, hm):
        assert 1.0 - float(painleve.f_goe(4.0, hm)) < 1e-3

    def test_goe_lower_tail_cubic(self, hm):
        # -log F_GOE(s) = |s|^3/24 + |s|^{3/2}/(3 sqrt 2) + smaller terms;
        # the bare cubic misses by ~40% at s = -6, the two-term form works
        val = -float(painleve.log_f_goe(-6.0, hm))
        two_term = 9.0 + 6.0 ** 1.5 / (3.0 * np.sqrt(2.0))
        assert abs(val - two_term) < 0.15 * 9.0

    def test_goe_matches_flat_determinant(self, hm):
        spec = KernelSpec("flat_fixed_point", 1.0, (0.0,), (0.0,))
        det = fredholm.det_one_minus(fredholm.assemble(spec, 64))
        assert abs(float(painleve.f_goe(0.0, hm)) - det) < 1e-6

    def test_monotonicity_and_limits(self, hm):
        s = np.linspace(hm.left + 1.0, hm.right - 1.0, 400)
        fg = painleve.f_gue(s, hm)
        fo = painleve.f_goe(s, hm)
        # strictly increasing until the CDF saturates at double precision
        strict = s[:-1] < 6.0
        assert np.all(np.diff(fg)[strict] > 0) and np.all(np.diff(fo)[strict] > 0)
        assert np.all(np.diff(fg) > -1e-15) and np.all(np.diff(fo) > -1e-15)
        assert fg[0] < 1e-12 and fo[0] < 1e-9
        assert fg[-1] > 1.0 - 1e-4 and fo[-1] > 1.0 - 1e-3

    def test_cross_oracle_uniform(self, hm):
        for r in (-4.0, -2.0, 0.0, 2.0, 4.0):
            assert abs(float(painleve.f_gue(r, hm)) - gue_det(r, 96)) < 1e-6

    def test_out_of_grid(self, hm):
        with pytest.raises(painleve.OutOfGridError):
            painleve.f_gue(hm.left, hm)


class TestSelfSimilarReductions:
    def test_residuals_small(self, hm):
        gue, goe = painleve.selfsimilar_ode_residuals(hm)
        assert gue < 1e-5 and goe < 1e-5

    def test_second_order_refinement(self):
        h1 = painleve.hastings_mcleod(n=1501)
        h2 = painleve.hastings_mcleod(n=3001)
        g1 = painleve.selfsimilar_ode_residuals(h1)
        g2 = painleve.selfsimilar_ode_residuals(h2)
        assert g1[0] / g2[0] > 2.5 and g1[1] / g2[1] > 2.5
