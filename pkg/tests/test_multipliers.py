import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from mfnls.grid import Field2D, Grid2D, Space, l2_norm, lp_norm
from mfnls.multipliers import (
    ALPHA_RULE,
    ORDER_RULE,
    DispersionParams,
    ParameterError,
    aniso_potential,
    bessel_kernel_positivity,
    dyadic_range,
    fit_tail_exponent,
    frac_deriv,
    frac_laplacian_1d_oracle,
    gn_quotient,
    gn_theta,
    lp_kernel,
    lp_project,
    phi,
    psi,
    remove_axis_lines,
    sobolev_norm,
)

GRID = Grid2D(32, 32, math.pi, math.pi)  # integer frequencies


def mode(grid, k, l):
    return Field2D.from_function(grid, lambda x, y: np.exp(1j * (k * x + l * y)))


def noise(grid, seed, frac=2 / 3):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    kx = np.abs(np.fft.fftfreq(grid.nx, 1 / grid.nx))[:, None]
    ky = np.abs(np.fft.fftfreq(grid.ny, 1 / grid.ny))[None, :]
    c *= (kx < frac * grid.nx / 2) & (ky < frac * grid.ny / 2)
    return Field2D(grid, c, Space.SPECTRAL).physical()


def gaussian_flap_at_zero(alpha):
    """``(-d^2/dx^2)^(alpha/2) exp(-x^2)`` at ``x = 0`` in closed form."""
    return 2.0**alpha * special.gamma((alpha + 1) / 2) / math.sqrt(math.pi)


class TestDispersionParams:
    def test_derived(self):
        p = DispersionParams(2.0, 1.5, 3.0, 1)
        assert p.alpha == pytest.approx(1.5)
        assert p.beta1 == 0.0 and p.beta2 == pytest.approx(0.25)
        assert p.s_c == pytest.approx(0.5 + 2 / 3 - 1.0)

    def test_derived_follow_replace(self):
        p = DispersionParams(2.0, 1.5, 3.0, 1).replace(alpha2=0.5)
        assert p.alpha == pytest.approx(0.5)

    @pytest.mark.parametrize("a1, a2", [(1.0, 0.5), (2.0, 1.0), (2.5, 2.0), (0.0, 0.0)])
    def test_alpha_rule(self, a1, a2):
        with pytest.raises(ParameterError) as e:
            DispersionParams(a1, a2)
        assert e.value.rule == ALPHA_RULE
        assert "(0, 2]" in str(e.value)

    def test_order_rule(self):
        with pytest.raises(ParameterError) as e:
            DispersionParams(1.5, 2.0)
        assert e.value.rule == ORDER_RULE

    @pytest.mark.parametrize("kw", [{"p": 1.0}, {"mu": 0}, {"mu": 2}])
    def test_power_and_sign(self, kw):
        with pytest.raises(ParameterError):
            DispersionParams(2.0, 2.0, **kw)


class TestBump:
    def test_psi_support(self):
        r = np.linspace(-3, 3, 6001)
        v = psi(r)
        assert np.all((v >= 0) & (v <= 1))
        assert np.all(v[np.abs(r) <= 1] == 1)
        assert np.all(v[np.abs(r) >= 2] == 0)

    def test_phi_support(self):
        r = np.linspace(0, 4, 8001)
        v = phi(r)
        assert np.all(v[(r < 0.5) | (r > 2)] == 0)
        assert phi(1.0) == 1.0

    def test_partition_of_unity(self):
        r = np.geomspace(1e-3, 1e3, 2000)
        total = sum(phi(r / 2.0**k) for k in range(-14, 15))
        np.testing.assert_allclose(total, 1.0, atol=1e-10)


class TestFracDeriv:
    def test_single_mode(self):
        a = 1.5
        out = frac_deriv(mode(GRID, 3, 2), "x", a)
        np.testing.assert_allclose(out.data, 3**a * mode(GRID, 3, 2).data, atol=1e-11)

    def test_zero_order_identity(self):
        u = noise(GRID, 0)
        np.testing.assert_allclose(frac_deriv(u, "y", 0.0).data, u.data, atol=1e-13)

    def test_negative_power_kills_axis_line(self):
        u = Field2D(GRID, np.ones(GRID.shape))
        assert l2_norm(frac_deriv(u, "x", -0.5)) < 1e-12

    def test_matches_singular_integral_oracle(self):
        # long period so the |y|^(-3/2) tail of the result does not wrap
        g = Grid2D(8, 1 << 15, 1.0, 2048.0)
        f = Field2D.from_function(g, lambda x, y: np.exp(-(y**2)) + 0 * x)
        d = frac_deriv(f, "y", 0.5).data[0].real
        sel = np.abs(g.y) <= 4
        pts = g.y[sel][::32]
        o = frac_laplacian_1d_oracle(lambda x: np.exp(-(x**2)), 0.5, pts)
        rel = np.linalg.norm(o - d[sel][::32]) / np.linalg.norm(o)
        assert rel < 1e-4


class TestOracle:
    def test_eigenfunction(self):
        x = np.array([0.0, 0.4, 1.1])
        o = frac_laplacian_1d_oracle(lambda t: np.cos(3 * t), 1.5, x)
        np.testing.assert_allclose(o, 3**1.5 * np.cos(3 * x), rtol=1e-4, atol=1e-4)

    def test_zero(self):
        assert np.all(frac_laplacian_1d_oracle(lambda t: 0 * t, 0.5, [0.0, 1.0]) == 0)

    @pytest.mark.parametrize("alpha", [0.5, 1.5])
    def test_gaussian_closed_form(self, alpha):
        o = frac_laplacian_1d_oracle(lambda t: np.exp(-(t**2)), alpha, [0.0])
        assert o[0] == pytest.approx(gaussian_flap_at_zero(alpha), rel=1e-6)

    def test_frozen_value(self):
        # closed form at alpha = 0.5, frozen
        assert gaussian_flap_at_zero(0.5) == pytest.approx(0.9777410674469238, rel=1e-14)

    def test_rejects_growing_input(self):
        with pytest.raises(ValueError):
            frac_laplacian_1d_oracle(lambda t: t**2, 0.5, [0.0])


class TestAnisoPotential:
    P2 = DispersionParams(2.0, 2.0)

    def test_zero_order_identity(self):
        u = noise(GRID, 1)
        np.testing.assert_allclose(aniso_potential(u, self.P2, 0.0).data, u.data, atol=1e-13)

    def test_single_mode(self):
        out = aniso_potential(mode(GRID, 1, 1), self.P2, 2.0)
        np.testing.assert_allclose(out.data, 3.0 * mode(GRID, 1, 1).data, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), s=st.floats(0.1, 3.0), a2=st.sampled_from([0.5, 1.5, 2.0]))
    def test_inverse(self, seed, s, a2):
        p = DispersionParams(2.0, a2)
        u = noise(GRID, seed)
        back = aniso_potential(aniso_potential(u, p, -s), p, s)
        assert l2_norm(back - u) <= 1e-10 * l2_norm(u)


class TestSobolevNorm:
    def test_zero_order_is_l2(self):
        u = noise(GRID, 2)
        assert sobolev_norm(u, DispersionParams(2.0, 1.5), 0.0) == lp_norm(u, 2)

    def test_alpha_two_is_classical(self):
        u = noise(GRID, 3)
        uh = u.spectral().data
        XI, ETA = GRID.freq_mesh()
        ref = np.sqrt(np.sum((1 + XI**2 + ETA**2) ** 1.3 * np.abs(uh) ** 2) * GRID.cell)
        assert sobolev_norm(u, DispersionParams(2.0, 2.0), 1.3) == pytest.approx(ref, rel=1e-12)


# the joint radius sqrt(xi^2 + |eta|^alpha) needs a long eta band when alpha < 2
LP_GRIDS = [
    (2.0, Grid2D(256, 256, 8 * math.pi, 8 * math.pi)),
    (1.5, Grid2D(256, 2048, 4 * math.pi, 8 * math.pi)),
]


class TestLittlewoodPaley:
    def test_single_mode_at_unit_radius(self):
        g = Grid2D(64, 64, 8 * math.pi, 8 * math.pi)
        u = mode(g, 1.0, 0.0)
        np.testing.assert_allclose(lp_project(u, 2.0, 1.0).data, u.data, atol=1e-12)

    @pytest.mark.parametrize("alpha, g", LP_GRIDS)
    def test_resolution_of_identity(self, alpha, g):
        # band-limited to the resolvable annuli
        u = noise(g, 4)
        uh = u.spectral().data
        XI, ETA = g.freq_mesh()
        rho = np.sqrt(XI**2 + np.abs(ETA) ** alpha)
        ns = dyadic_range(g, alpha)
        assert len(ns) >= 4
        band = (rho >= ns[0]) & (rho <= ns[-1])
        u = Field2D(g, uh * band, Space.SPECTRAL).physical()
        total = sum((lp_project(u, alpha, n) for n in ns), Field2D.zeros(g))
        # only the outermost half-annuli are incomplete
        inner_band = (rho >= 2 * ns[0]) & (rho <= ns[-1] / 2)
        diff = (total - u).spectral().data * inner_band
        assert np.abs(diff).max() < 1e-10

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            lp_project(noise(GRID, 0), 2.0, 1024.0)
        with pytest.raises(ValueError):
            lp_project(noise(GRID, 0), 2.0, 3.0)

    @pytest.mark.parametrize("s", [-1.0, 0.5, 1.0, 2.0])
    @pytest.mark.parametrize("alpha, g", LP_GRIDS)
    def test_dyadic_equivalence(self, s, alpha, g):
        ns = dyadic_range(g, alpha)
        assert len(ns) >= 4
        for n in ns:
            for seed in range(4):
                pn = lp_project(noise(g, seed), alpha, n)
                r = sobolev_norm(pn, alpha, s, homogeneous=True) / (n**s * l2_norm(pn))
                assert 2.0 ** -abs(s) <= r <= 2.0 ** abs(s)


class TestKernel:
    def test_fit_tail_exponent_power_law(self):
        r = np.geomspace(1, 1e4, 400)
        k, _ = fit_tail_exponent(r, 3.0 * r**-2.5, noise=1e-30)
        assert k == pytest.approx(2.5, abs=1e-6)

    def test_smooth_symbol_decays_fast(self):
        rep = lp_kernel(2.0, y_half=64.0, x_half=8.0, levels=2)
        assert rep.tail_exponent_y >= 4.0


class TestBessel:
    def test_classical(self):
        rep = bessel_kernel_positivity(DispersionParams(2.0, 2.0), 2.0, Grid2D(128, 128, 16.0, 16.0))
        assert rep.min_value >= -1e-6
        assert rep.l1_norm == pytest.approx(1.0, abs=1e-3)
        assert rep.resolved

    def test_anisotropic_positive(self):
        rep = bessel_kernel_positivity(DispersionParams(2.0, 1.5), 0.8, Grid2D(256, 256, 32.0, 32.0))
        assert rep.min_value >= -1e-6
        assert rep.l1_norm == pytest.approx(1.0, abs=1e-3)

    def test_s_positive(self):
        with pytest.raises(ValueError):
            bessel_kernel_positivity(DispersionParams(2.0, 2.0), 0.0)


class TestGagliardoNirenberg:
    def test_theta(self):
        assert gn_theta(2.0, 1.0, 4.0) == pytest.approx(0.5)
        assert gn_theta(0.5, 1.0, 6.0) == pytest.approx(5.0 / 3.0)

    def test_zero_field(self):
        assert gn_quotient(Field2D.zeros(GRID), 2.0, 1.0, 4.0) == 0.0

    @settings(max_examples=10, deadline=None)
    @given(c=st.floats(0.1, 10.0))
    def test_homogeneous_of_degree_zero(self, c):
        u = remove_axis_lines(noise(GRID, 5, frac=0.3))
        assert gn_quotient(u * c, 1.5, 1.0, 4.0) == pytest.approx(gn_quotient(u, 1.5, 1.0, 4.0), rel=1e-10)
