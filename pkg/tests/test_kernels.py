import numpy as np
import pytest

from kpdet import fredholm
from kpdet.kernels import (
    KernelDomainError,
    KernelSpec,
    SpikedKernel,
    flat_kernel,
    heat_kernel,
    kpz_nw_kernel,
    multiwedge_block,
    nw_fixed_point_kernel,
    s_kernel,
    scattering_part_logmat,
)
from kpdet.quadrature import gauss_legendre, map_whole_line


def det_of(spec, n=64):
    return fredholm.det_one_minus(fredholm.assemble(spec, n))


class TestHeatKernel:
    def test_peak_value(self):
        assert abs(heat_kernel(0.25, 1.0, 1.0) - np.pi ** -0.5) < 1e-14

    def test_symmetry(self):
        assert heat_kernel(0.7, 0.3, -1.1) == heat_kernel(0.7, -1.1, 0.3)

    def test_unit_mass(self):
        w = map_whole_line(gauss_legendre(128), 0.0, 4.0)
        assert abs(w.integrate(heat_kernel(0.8, 0.4, w.nodes)) - 1.0) < 1e-10

    def test_domain_error(self):
        with pytest.raises(KernelDomainError):
            heat_kernel(0.0, 0.0, 0.0)


class TestSKernel:
    def test_at_origin(self):
        assert abs(s_kernel(1.0, 0.0, 0.0) - 0.3550280538878172) < 1e-13

    def test_negative_time_reflection(self):
        assert abs(s_kernel(-1.0, 0.0, 2.0) - s_kernel(1.0, 0.0, -2.0)) < 1e-15

    def test_semigroup(self):
        w = map_whole_line(gauss_legendre(320), 0.0, 4.0)
        u, v = 0.5, -0.2
        comp = w.integrate(s_kernel(1.0, 0.3, u - w.nodes)
                           * s_kernel(1.0, -0.1, w.nodes - v))
        assert abs(comp - s_kernel(2.0, 0.2, u - v)) < 1e-7

    def test_zero_time_error(self):
        with pytest.raises(KernelDomainError):
            s_kernel(0.0, 0.0, 1.0)


class TestNarrowWedgeKernel:
    def test_level_shift_covariance(self):
        # wedge raised by 1 with levels raised by 1 is the same operator
        u = np.linspace(0.0, 3.0, 5)
        k1 = nw_fixed_point_kernel(1.0, 0.2, 0.0, 1.0, u + 1.0, u + 1.0)
        k0 = nw_fixed_point_kernel(1.0, 0.2, 0.0, 0.0, u, u)
        assert np.max(np.abs(k1 - k0)) < 1e-10

    def test_symmetry_at_wedge_position(self):
        u = np.array([0.1, 0.5, 1.0, 1.7, 2.4])
        k = nw_fixed_point_kernel(1.0, 0.3, 0.3, 0.2, u, u)
        assert np.max(np.abs(k - k.T)) < 1e-12

    def test_differential_relations(self):
        # d_t K = -(D1^3 + D2^3) K / 3 and d_x K = (D2^2 - D1^2) K
        rng = np.random.default_rng(3)
        u = rng.uniform(0.2, 2.0, 10)
        v = rng.uniform(0.2, 2.0, 10)
        h = 1e-3
        t0, x0 = 1.0, 0.3

        def kf(t, x, uu, vv):
            return np.diagonal(nw_fixed_point_kernel(t, x, 0.0, 0.0, uu, vv,
                                                     inner_n=96))

        offs = np.array([-2, -1, 0, 1, 2]) * h
        ku = np.stack([kf(t0, x0, u + o, v) for o in offs])
        kv = np.stack([kf(t0, x0, u, v + o) for o in offs])
        c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
        c3 = np.array([-0.5, 1.0, 0.0, -1.0, 0.5]) / h ** 3
        d13, d23 = np.tensordot(c3, ku, 1), np.tensordot(c3, kv, 1)
        d12, d22 = np.tensordot(c2, ku, 1), np.tensordot(c2, kv, 1)
        dt = (kf(t0 + h, x0, u, v) - kf(t0 - h, x0, u, v)) / (2 * h)
        dx = (kf(t0, x0 + h, u, v) - kf(t0, x0 - h, u, v)) / (2 * h)
        scale = np.abs(kf(t0, x0, u, v)).max()
        assert np.max(np.abs(dt + (d13 + d23) / 3.0)) / scale < 1e-4
        assert np.max(np.abs(dx - (d22 - d12))) / scale < 1e-4


class TestFlatKernel:
    def test_hankel_property(self):
        u, v, d = 0.7, 1.3, 0.37
        assert abs(flat_kernel(1.0, u, v) - flat_kernel(1.0, u + d, v - d)) < 1e-15

    def test_time_scaling(self):
        rng = np.random.default_rng(0)
        for t, u, v in rng.uniform(0.5, 2.0, (5, 3)):
            lhs = flat_kernel(t, u, v)
            rhs = flat_kernel(1.0, u / np.cbrt(t), v / np.cbrt(t)) / np.cbrt(t)
            assert abs(lhs - rhs) < 1e-14

    def test_domain_error(self):
        with pytest.raises(KernelDomainError):
            flat_kernel(-1.0, 0.0, 0.0)


class TestMultiwedge:
    def test_single_wedge_reduces(self):
        spec = KernelSpec("multiwedge_extended", 1.0, (0.2,), (0.5,), ((0.0, 0.0),))
        u = np.linspace(0.0, 2.0, 5)
        blk = multiwedge_block(spec, 0, 0, u, u)
        direct = nw_fixed_point_kernel(1.0, 0.2, 0.0, 0.0, u + 0.5, u + 0.5)
        assert np.max(np.abs(blk - direct)) < 1e-12

    def test_two_wedge_monotone_in_levels(self):
        base = KernelSpec("multiwedge_extended", 1.0, (0.0,), (0.0,),
                          ((-1.0, 0.0), (1.0, 0.0)))
        d0 = det_of(base)
        assert 0.0 < d0 < 1.0
        up1 = KernelSpec("multiwedge_extended", 1.0, (0.0,), (0.0,),
                         ((-1.0, 0.5), (1.0, 0.0)))
        up2 = KernelSpec("multiwedge_extended", 1.0, (0.0,), (0.0,),
                         ((-1.0, 0.0), (1.0, 0.5)))
        assert det_of(up1) < d0 and det_of(up2) < d0

    def test_small_time_hits_scattering_limit(self):
        from kpdet.scattering import WedgeConfig, hit_kernel
        spec = KernelSpec("nw_fixed_point", 1e-2, (-1.0, 1.0), (0.0, 0.0),
                          ((0.0, 0.0),), inner_n=96)
        u = np.array([0.6])
        v = np.array([0.9])
        blk = scattering_part_logmat(spec, 0, 1, u, v).to_linear()
        cfg = WedgeConfig(((0.0, 0.0),), (-1.0, 1.0), (0.0, 0.0))
        ref = hit_kernel(cfg, 0, 1, u, v)
        assert abs(blk[0, 0] - float(ref)) < 1e-3

    def test_levels_to_minus_infinity_leave_heat(self):
        spec = KernelSpec("multiwedge_extended", 1.0, (-0.5, 0.5), (0.0, 0.0),
                          ((0.0, -8.0),))
        u = np.linspace(0.0, 2.0, 4)
        blk = multiwedge_block(spec, 0, 1, u, u)
        ref = -heat_kernel(1.0, u[:, None], u[None, :])
        assert np.max(np.abs(blk - ref)) < 1e-6
        diag = multiwedge_block(spec, 0, 0, u, u)
        assert np.max(np.abs(diag)) < 1e-6

    def test_wedge_cap(self):
        with pytest.raises(KernelDomainError):
            KernelSpec("multiwedge_extended", 1.0, (0.0,), (0.0,),
                       tuple((float(a), 0.0) for a in range(4)))

    def test_far_node_decay(self):
        spec = KernelSpec("nw_fixed_point", 1.0, (0.0,), (0.0,), ((0.0, 0.0),))
        disc = fredholm.assemble(spec, 64)
        cut = np.quantile(disc.rule.nodes, 0.95)
        far = disc.rule.nodes[disc.rule.nodes > cut][:3]
        k = multiwedge_block(spec, 0, 0, far, far)
        assert np.max(np.abs(k)) < 1e-10


class TestKPZNarrowWedge:
    def test_symmetry(self):
        u = np.array([0.1, 1.0])
        k = kpz_nw_kernel(1.0, 0.3, 0.5, u, u)
        assert abs(k[0, 1] - k[1, 0]) < 1e-15

    def test_determinant_is_probability(self):
        d = det_of(KernelSpec("kpz_narrow_wedge", 1.0, (0.0,), (0.0,)))
        assert 0.0 < d < 1.0

    def test_large_r_limit(self):
        # right tail is exponential, deficit ~ C exp(-r)
        d8 = det_of(KernelSpec("kpz_narrow_wedge", 1.0, (0.0,), (8.0,)))
        assert 1.0 - d8 < 1e-3
        d15 = det_of(KernelSpec("kpz_narrow_wedge", 1.0, (0.0,), (15.0,)))
        assert 1.0 - d15 < 1e-6

    def test_differential_relations_in_gauge(self):
        # relations hold for e^{(v-u)x/t} K(u,v)
        rng = np.random.default_rng(3)
        u = rng.uniform(0.2, 2.0, 8)
        v = rng.uniform(0.2, 2.0, 8)
        h = 1e-3
        t0, x0 = 1.0, 0.2

        def kf(t, x, uu, vv):
            base = np.diagonal(kpz_nw_kernel(t, x, 0.4, uu, vv, fermi_n=256))
            return np.exp((vv - uu) * x / t) * base

        offs = np.array([-2, -1, 0, 1, 2]) * h
        ku = np.stack([kf(t0, x0, u + o, v) for o in offs])
        kv = np.stack([kf(t0, x0, u, v + o) for o in offs])
        c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
        c3 = np.array([-0.5, 1.0, 0.0, -1.0, 0.5]) / h ** 3
        d13, d23 = np.tensordot(c3, ku, 1), np.tensordot(c3, kv, 1)
        d12, d22 = np.tensordot(c2, ku, 1), np.tensordot(c2, kv, 1)
        dt = (kf(t0 + h, x0, u, v) - kf(t0 - h, x0, u, v)) / (2 * h)
        dx = (kf(t0, x0 + h, u, v) - kf(t0, x0 - h, u, v)) / (2 * h)
        scale = np.abs(kf(t0, x0, u, v)).max()
        assert np.max(np.abs(dt + (d13 + d23) / 3.0)) / scale < 1e-4
        assert np.max(np.abs(dx - (d22 - d12))) / scale < 1e-4


class TestSpiked:
    def test_determinant_real_probability(self):
        d = det_of(KernelSpec("kpz_spiked", 1.0, (0.0,), (0.0,), spikes=(0.0,)))
        assert 0.0 < d < 1.0  # kernel is real by construction: imag == 0

    def test_monotone_in_r(self):
        d0 = det_of(KernelSpec("kpz_spiked", 1.0, (0.0,), (0.0,), spikes=(0.0,)))
        d1 = det_of(KernelSpec("kpz_spiked", 1.0, (0.0,), (1.0,), spikes=(0.0,)))
        assert d1 > d0

    def test_anchor_independence(self):
        d0 = det_of(KernelSpec("kpz_spiked", 1.0, (0.0,), (0.0,), spikes=(0.0,)))
        d1 = det_of(KernelSpec("kpz_spiked", 1.0, (0.0,), (0.0,), spikes=(0.0,),
                               contour_anchor=0.35))
        assert abs(d0 - d1) < 1e-8

    def test_far_spike_degenerates_to_narrow_wedge(self):
        # spike at -B acts as the level shift r -> r + log B up to O(1/B)
        for big_b, tol in ((50.0, 2e-4), (100.0, 5e-5)):
            ds = det_of(KernelSpec("kpz_spiked", 1.0, (0.0,), (0.0,),
                                   spikes=(-big_b,)))
            dn = det_of(KernelSpec("kpz_narrow_wedge", 1.0, (0.0,),
                                   (np.log(big_b),)))
            assert abs(ds - dn) < tol

    def test_validation(self):
        with pytest.raises(KernelDomainError):
            KernelSpec("kpz_spiked", 1.0, (0.0,), (0.0,), spikes=(0.5,))
        with pytest.raises(KernelDomainError):
            KernelSpec("kpz_spiked", 1.0, (0.0,), (0.0,), spikes=(0.1, 0.1))
        with pytest.raises(KernelDomainError):
            KernelSpec("kpz_spiked", 1.0, (1.5,), (0.0,), spikes=(0.0,))

    def test_two_spikes(self):
        d = det_of(KernelSpec("kpz_spiked", 1.0, (0.0,), (0.0,),
                              spikes=(-0.5, 0.1)))
        assert 0.0 < d < 1.0


class TestQuadratureFailureGuard:
    def test_starved_inner_rule_raises(self):
        from kpdet.kernels import QuadratureFailure
        spec = KernelSpec("nw_fixed_point", 1.0, (0.0,), (-3.0,), ((0.0, 0.0),),
                          inner_n=8, inner_scale=0.05)
        with pytest.raises(QuadratureFailure):
            multiwedge_block(spec, 0, 0, np.array([0.0]), np.array([0.0]))


class TestThreeWedges:
    def test_three_wedge_determinant(self):
        spec = KernelSpec("multiwedge_extended", 1.0, (0.0,), (0.5,),
                          ((-1.0, 0.0), (0.2, -0.3), (1.1, 0.1)))
        d3 = det_of(spec)
        assert 0.0 < d3 < 1.0

    def test_sunk_third_wedge_reduces_to_two(self):
        sunk = KernelSpec("multiwedge_extended", 1.0, (0.0,), (0.5,),
                          ((-1.0, 0.0), (0.2, -0.3), (1.1, -8.0)))
        two = KernelSpec("multiwedge_extended", 1.0, (0.0,), (0.5,),
                         ((-1.0, 0.0), (0.2, -0.3)))
        assert abs(det_of(sunk) - det_of(two)) < 1e-9
