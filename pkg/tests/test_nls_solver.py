import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfnls.experiments import gaussian_datum, smooth_ensemble
from mfnls.grid import Field2D, Grid2D, l2_norm, lp_norm
from mfnls.linear_flow import propagate
from mfnls.multipliers import DispersionParams
from mfnls.nls_solver import (
    GlobalBranch,
    NonFiniteError,
    RunRecord,
    SolverConfig,
    TerminationReason,
    classify_global,
    dealias_mask,
    derivative_growth_check,
    energy,
    evolve,
    gn_energy_constant,
    growth_exponent,
    hs_alpha_half,
    mass,
    mass_exponent,
    potential_term,
    rescale,
    step_strang,
    time_reversal_defect,
)

DEFOC = DispersionParams(2.0, 2.0, 3.0, 1)
ANISO = DispersionParams(2.0, 1.5, 3.0, 1)
G64 = Grid2D(64, 64, 8.0, 8.0)


def plane_wave(grid, a, k):
    return Field2D.from_function(grid, lambda x, y: a * np.exp(1j * k * x) + 0 * y)


class TestSolverConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"dt": 0.0, "t_end": 1.0},
            {"dt": 0.1, "t_end": -1.0},
            {"dt": 0.1, "t_end": 1.0, "monitor_every": 0},
            {"dt": 0.1, "t_end": 1.0, "dealias": "three_halves"},
            {"dt": 0.1, "t_end": 1.0, "blowup_threshold": -1.0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


class TestRunRecord:
    CFG = SolverConfig(0.1, 1.0)

    def test_lengths_must_match(self):
        with pytest.raises(ValueError):
            RunRecord(DEFOC, self.CFG, times=[0.0, 1.0], mass=[1.0], energy=[1.0], hs_alpha_half=[1.0], sup_norm=[1.0])

    def test_negative_mass(self):
        with pytest.raises(ValueError):
            RunRecord(DEFOC, self.CFG, times=[0.0], mass=[-1.0], energy=[0.0], hs_alpha_half=[0.0], sup_norm=[0.0])

    def test_empty(self):
        rec = RunRecord(DEFOC, self.CFG)
        assert rec.mass_drift() == 0.0 and rec.energy_drift() == 0.0


class TestEnergy:
    def test_zero(self):
        assert energy(Field2D.zeros(G64), DEFOC) == 0.0

    @pytest.mark.parametrize("a1, a2", [(2.0, 2.0), (2.0, 1.5), (1.5, 0.5)])
    def test_plane_wave_closed_form(self, a1, a2):
        g = Grid2D(32, 32, math.pi, math.pi)
        amp, k = 0.7, 3.0
        p = DispersionParams(a1, a2, 3.0, 1)
        want = 0.5 * k**a1 * amp**2 * g.area + amp**4 / 4 * g.area
        assert energy(plane_wave(g, amp, k), p) == pytest.approx(want, rel=1e-8)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 1000), p=st.sampled_from([2.5, 3.0, 5.0]))
    def test_focusing_minus_defocusing(self, seed, p):
        u = smooth_ensemble(Grid2D(128, 128, 8.0, 8.0), 1, seed)[0] * 2.0
        foc, defoc = DispersionParams(2.0, 1.5, p, -1), DispersionParams(2.0, 1.5, p, 1)
        diff = energy(u, defoc) - energy(u, foc)
        want = 2.0 / (p + 1) * lp_norm(u, p + 1) ** (p + 1)
        assert diff == pytest.approx(want, rel=1e-12)

    def test_potential_term(self):
        u = gaussian_datum(G64)
        want = lp_norm(u, 4) ** 4 / 4
        assert potential_term(u, DEFOC) == pytest.approx(want, rel=1e-12)
        assert potential_term(u, DEFOC.replace(mu=-1)) == potential_term(u, DEFOC)

    def test_hs_alpha_half_plane_wave(self):
        g = Grid2D(32, 32, math.pi, math.pi)
        u = plane_wave(g, 1.0, 2.0)
        assert hs_alpha_half(u, ANISO) == pytest.approx(2.0 * math.sqrt(g.area), rel=1e-12)


class TestStepStrang:
    def test_zero(self):
        z = Field2D.zeros(G64)
        assert np.all(step_strang(z, DEFOC, 0.1).data == 0)

    def test_linear_limit(self):
        u = gaussian_datum(G64, 1.0, 1.0)
        a = step_strang(u, ANISO, 0.05, dealias="none", nonlinear=False)
        b = propagate(u, ANISO, 0.05)
        assert l2_norm(a - b) <= 1e-13 * l2_norm(u)

    def test_local_error_third_order(self):
        g = Grid2D(128, 128, 8.0, 8.0)
        u = smooth_ensemble(g, 1, 0)[0] * 4.0

        def defect(dt):
            one = step_strang(u, ANISO, dt, dealias="none")
            two = step_strang(step_strang(u, ANISO, dt / 2, dealias="none"), ANISO, dt / 2, dealias="none")
            return l2_norm(one - two)

        ratio = defect(0.01) / defect(0.005)
        assert 6.0 <= ratio <= 10.0

    def test_nonlinear_phase_exact(self):
        # a spatially constant field only picks up the nonlinear phase
        g = Grid2D(8, 8, 1.0, 1.0)
        u = Field2D(g, np.full(g.shape, 0.5 + 0j))
        out = step_strang(u, DEFOC, 0.3)
        np.testing.assert_allclose(out.data, 0.5 * np.exp(-1j * 0.3 * 0.25), atol=1e-15)

    def test_non_finite(self):
        u = Field2D(G64, np.full(G64.shape, np.nan))
        with pytest.raises(NonFiniteError):
            step_strang(u, DEFOC, 0.1)

    def test_dealias_mask(self):
        m = dealias_mask(Grid2D(12, 12, 1.0, 1.0))
        # modes with |k| < n/3 survive
        assert m[3, 3] and not m[4, 0] and not m[0, 4]


class TestEvolve:
    def test_zero(self):
        u, rec = evolve(Field2D.zeros(G64), DEFOC, SolverConfig(0.1, 1.0))
        assert np.all(u.data == 0)
        for k in RunRecord.SERIES[1:]:
            assert np.all(getattr(rec, k) == 0)
        assert rec.completed

    def test_mass_conserved(self):
        _, rec = evolve(gaussian_datum(G64), ANISO, SolverConfig(1e-2, 0.5, monitor_every=5))
        assert rec.mass_drift() <= 1e-10 + rec.filter_loss
        assert rec.filter_loss < 1e-8

    def test_energy_second_order(self):
        u0 = gaussian_datum(G64)
        drifts = [evolve(u0, DEFOC, SolverConfig(dt, 0.5, monitor_every=25))[1].energy_drift() for dt in (4e-3, 1e-3)]
        assert 12.0 <= drifts[0] / drifts[1] <= 20.0

    def test_monitoring_and_last_step(self):
        _, rec = evolve(gaussian_datum(G64), DEFOC, SolverConfig(0.03, 0.1, monitor_every=2))
        assert rec.times[0] == 0.0
        assert rec.times[-1] == pytest.approx(0.1)
        assert len(rec.times) == 3  # steps 0, 2 and the final short one

    def test_callback_sees_every_monitor(self):
        seen = []
        _, rec = evolve(gaussian_datum(G64), DEFOC, SolverConfig(0.05, 0.2), callback=lambda t, d: seen.append(t))
        np.testing.assert_allclose(seen, rec.times)

    def test_blowup_trigger(self):
        cfg = SolverConfig(1e-3, 1.0, blowup_threshold=1.5)
        u0 = gaussian_datum(Grid2D(64, 64, 4.0, 4.0), 3.0, 0.5)
        _, rec = evolve(u0, DispersionParams(2.0, 2.0, 3.0, -1), cfg)
        assert rec.terminated_reason is TerminationReason.BLOWUP
        assert rec.times[-1] < 1.0

    def test_time_reversal(self):
        cfg = SolverConfig(1e-2, 0.5, monitor_every=50)
        u0 = gaussian_datum(G64, 1.0, 1.0, modulation=(0.5, -0.3))
        _, rec = evolve(u0, ANISO, cfg)
        assert time_reversal_defect(u0, ANISO, cfg) <= max(10 * rec.energy_drift(), 1e-12)

    def test_scaling_symmetry(self):
        lam = 2.0
        cfg = SolverConfig(1e-3, 0.25, monitor_every=50)
        u0 = gaussian_datum(Grid2D(64, 64, 8.0, 8.0))
        u1, _ = evolve(u0, ANISO, cfg)
        cfg2 = SolverConfig(cfg.dt * lam**ANISO.alpha1, cfg.t_end * lam**ANISO.alpha1, monitor_every=50)
        u2, _ = evolve(rescale(u0, ANISO, lam), ANISO, cfg2)
        a = rescale(u1, ANISO, lam)
        assert l2_norm(a - u2) <= 0.01 * l2_norm(u2)


class TestClassify:
    @pytest.mark.parametrize(
        "a1, a2, p, branch",
        [
            (2.0, 2.0, 3.0, GlobalBranch.MASS_CRITICAL),
            (2.0, 2.0, 2.5, GlobalBranch.SUBCRITICAL),
            (2.0, 0.5, 3.0, GlobalBranch.SUPERCRITICAL),
        ],
    )
    def test_examples(self, a1, a2, p, branch):
        assert classify_global(DispersionParams(a1, a2, p, -1)) is branch

    @settings(max_examples=100, deadline=None)
    @given(
        a1=st.sampled_from([0.5, 1.5, 1.8, 2.0]),
        a2=st.sampled_from([0.3, 0.5, 1.5, 1.8, 2.0]),
        p=st.floats(1.01, 9.0),
    )
    def test_sign_rule(self, a1, a2, p):
        if a2 > a1:
            return
        prm = DispersionParams(a1, a2, p, -1)
        g = (p - 1) * (1 / a1 + 1 / a2) - 2
        b = classify_global(prm)
        if abs(g) > 1e-12:
            assert (b is GlobalBranch.SUBCRITICAL) == (g < 0)
            assert (b is GlobalBranch.SUPERCRITICAL) == (g > 0)

    def test_exponents(self):
        p = DispersionParams(2.0, 1.5, 3.0, -1)
        assert growth_exponent(p) == pytest.approx(2 * (0.5 + 1 / 1.5))
        assert mass_exponent(p) == pytest.approx(4 - growth_exponent(p))


class TestGrowthCheck:
    def test_holds_on_focusing_run(self):
        p = DispersionParams(2.0, 2.0, 2.5, -1)
        g = Grid2D(64, 64, 8.0, 8.0)
        _, rec = evolve(gaussian_datum(g, 1.0), p, SolverConfig(2e-3, 0.2, monitor_every=10))
        c = gn_energy_constant(p, smooth_ensemble(Grid2D(128, 128, 8.0, 8.0), 10, 0))
        chk = derivative_growth_check(rec, c)
        assert chk.holds and chk.slack >= 0
        assert chk.gamma + chk.delta == pytest.approx(p.p + 1)

    def test_fails_with_tiny_constant(self):
        # a forged record with large derivative and no energy violates the bound
        rec = RunRecord(
            DEFOC, SolverConfig(0.1, 0.1), times=[0.0], mass=[1e-6], energy=[0.0], hs_alpha_half=[10.0], sup_norm=[1.0]
        )
        assert not derivative_growth_check(rec, 0.0).holds
