"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary.  The whole file takes roughly ten minutes on one core.
"""

import math
import time

import numpy as np
import pytest

from mfnls.experiments import (
    ExperimentSpec,
    bernstein_suite,
    bessel_contraction_suite,
    equivalence_suite,
    exp_continuity,
    exp_decay,
    exp_decoherence,
    exp_scaling,
    exp_scattering_probe,
    exp_thresholds,
    gaussian_datum,
    gn_suite,
    kernel_k_sup,
    kernel_tail_floor,
)
from mfnls.grid import Grid2D
from mfnls.multipliers import DispersionParams, bessel_kernel_positivity, lp_kernel
from mfnls.nls_solver import GlobalBranch, SolverConfig, classify_global, evolve

pytestmark = pytest.mark.acceptance


class TestAcceptance:
    def test_01_conservation(self, criterion):
        grid = Grid2D(256, 256, 16.0, 16.0)
        u0 = gaussian_datum(grid, 1.0, 1.0)
        parts, ok = [], True
        for a2 in (2.0, 1.5):
            p = DispersionParams(2.0, a2, 3.0, 1)
            drifts, masses, secs = [], [], []
            for dt in (1e-3, 5e-4):
                t0 = time.perf_counter()
                _, rec = evolve(u0, p, SolverConfig(dt, 1.0, monitor_every=10))
                secs.append(time.perf_counter() - t0)
                drifts.append(rec.energy_drift())
                masses.append(rec.mass_drift())
                ok &= rec.completed
            ratio = drifts[0] / drifts[1]
            ok &= max(masses) <= 1e-10 and drifts[0] <= 1e-6 and 3.5 <= ratio <= 4.5 and max(secs) < 300
            parts.append(
                f"({2.0:g},{a2:g}) mass {max(masses):.1e}, energy {drifts[0]:.2e}->{drifts[1]:.2e} "
                f"(x{ratio:.2f}), {max(secs):.0f}s/run"
            )
        assert criterion(1, ok, "; ".join(parts) + " [mass<=1e-10, energy<=1e-6, ratio 3.5-4.5]")

    def test_02_scaling(self, criterion):
        p = DispersionParams(2.0, 1.5, 3.0, 1)
        spec = ExperimentSpec("scaling", p, Grid2D(128, 128, 16.0, 16.0), SolverConfig(1e-3, 0.5, monitor_every=50), lam=2.0)
        res = exp_scaling(spec)
        ratios = ", ".join(f"{r['value'] / r['target']:.6f}" for r in res.table[1:])
        detail = (
            f"commuting L2 error {res.headline:.1e} [<=1e-2]; norm ratio / lam^(s_c-s) for s in "
            f"(0, s_c, 1): {ratios} [within 2%]"
        )
        assert criterion(2, res.verdict, detail)

    def test_03_kernel_decay(self, criterion):
        parts, ok = [], True
        for a in (1.5, 0.5):
            rep = lp_kernel(a)
            lv = np.asarray(rep.l1_levels)
            spread = (lv.max() - lv.min()) / lv.min()
            nl = [lp_kernel(a, n=n, levels=1).l1_norm for n in (0.5, 1.0, 2.0)]
            nspread = (max(nl) - min(nl)) / min(nl)
            floor = kernel_tail_floor(a)
            ok &= rep.tail_exponent_y >= floor and spread < 0.02 and nspread < 0.01
            parts.append(
                f"alpha={a:g} y-exponent {rep.tail_exponent_y:.2f} [>={floor:.1f}], "
                f"L1 refinement spread {spread:.1e} [<2e-2], N spread {nspread:.1e} [<1e-2]"
            )
        assert criterion(3, ok, "; ".join(parts))

    def test_04_bernstein_equivalence(self, criterion):
        parts, ok = [], True
        for a, g in ((2.0, Grid2D(512, 512, 64.0, 64.0)), (1.5, Grid2D(512, 2048, 32.0, 64.0))):
            b = bernstein_suite(a, g)
            e = equivalence_suite(a, g)
            spread = max(max(v) / min(v) for v in b.upper.values())
            ok &= b.passed and e.passed and len(b.n_list) >= 4
            eq = max(max(max(e.upper[s]) / e.bounds[s][1], e.bounds[s][0] / min(e.lower[s])) for s in e.upper)
            parts.append(
                f"alpha={a:g} scales {len(b.n_list)}, Bernstein max/min {spread:.2f} [<=2], "
                f"equivalence worst/bound {eq:.3f} [<=1]"
            )
        assert criterion(4, ok, "; ".join(parts))

    def test_05_bessel(self, criterion):
        ok, worst_min, worst_l1 = True, math.inf, 0.0
        for a2 in (2.0, 1.5, 0.5):
            p = DispersionParams(2.0, a2)
            for s in (0.5, 0.8, 1.3, 2.0):
                rep = bessel_kernel_positivity(p, s)
                worst_min = min(worst_min, rep.min_value)
                worst_l1 = max(worst_l1, abs(rep.l1_norm - 1.0))
        ok &= worst_min >= -1e-6 and worst_l1 <= 1e-3
        cmax = 0.0
        for a2 in (2.0, 1.5, 0.5):
            c = bessel_contraction_suite(DispersionParams(2.0, a2), Grid2D(128, 128, 4 * math.pi, 4 * math.pi))
            cmax = max(cmax, max(c.values()))
        ok &= cmax <= 1.0 + 1e-6
        detail = (
            f"kernel min {worst_min:.1e} [>=-1e-6], |L1-1| {worst_l1:.1e} [<=1e-3], "
            f"max contraction ratio {cmax:.4f} [<=1+1e-6] over r in (1,2,inf), s in (0.5,1.3)"
        )
        assert criterion(5, ok, detail)

    def test_06_localized_decay(self, criterion):
        windows = {(2.0, 1.5): (16, 512), (2.0, 0.5): (4, 128), (1.5, 1.5): (16, 512), (0.5, 0.5): (24, 768)}
        parts, ok = [], True
        for (a1, a2), (lo, hi) in windows.items():
            p = DispersionParams(a1, a2)
            spec = ExperimentSpec(
                "decay", p, Grid2D(8, 8, 1.0, 1.0), SolverConfig(1.0, 1.0), n_list=(1.0, 2.0), t_list=tuple(np.geomspace(lo, hi, 12))
            )
            res = exp_decay(spec)
            ok &= res.verdict
            slopes = "/".join(f"{r['slope']:.3f}" for r in res.table)
            parts.append(f"({a1:g},{a2:g}) slopes {slopes}, constant spread {res.notes['constant_spread']:.1e}")
        assert criterion(6, ok, "; ".join(parts) + " [slope -1+-0.15, spread <25%]")

    def test_07_kernel_k(self, criterion):
        parts, ok = [], True
        for a, mu in ((1.5, 0.0), (1.5, 0.7), (0.5, 0.0), (0.5, 0.3)):
            ks = kernel_k_sup(a, mu)
            d = max(max(c[2], c[3]) for c in ks.checks)
            ok &= ks.stable and math.isfinite(ks.sup)
            parts.append(f"({a:g},{mu:g}) sup {ks.sup:.3f} at y={ks.y_at:.2f}, cutoff defect {d:.1e}")
        assert criterion(7, ok, "; ".join(parts) + " [finite, defect <3e-2]")

    def test_08_gagliardo_nirenberg(self, criterion):
        g = Grid2D(128, 128, 4 * math.pi, 4 * math.pi)
        parts, ok = [], True
        for a, s, q in ((2.0, 1.0, 4.0), (1.5, 1.0, 4.0), (0.5, 1.0, 6.0)):
            t = gn_suite(a, s, q, g, size=100)
            ok &= t.passed
            parts.append(f"({a:g},{s:g},{q:g}) theta {t.theta:.3f} max {t.max_quotient:.4f} drift {t.drift:.1e}")
        assert criterion(8, ok, "; ".join(parts) + " [bounded, drift <5%]")

    def test_09_continuity(self, criterion):
        p = DispersionParams(2.0, 1.5, 3.0, 1)
        spec = ExperimentSpec(
            "continuity", p, Grid2D(128, 128, 16.0, 16.0), SolverConfig(1e-3, 1.0, monitor_every=20),
            alpha_primes=(1.6, 1.55, 1.51), s=1.25,
        )
        t0 = time.perf_counter()
        res = exp_continuity(spec)
        secs = time.perf_counter() - t0
        d = ", ".join(f"{r['sup_diff']:.4g}" for r in res.table)
        ok = res.verdict and secs <= 600
        detail = f"sup H^1.25 differences ({d}) for alpha2'=(1.6,1.55,1.51), factor {res.headline:.2f} [>=3, monotone], {secs:.0f}s [<=600]"
        assert criterion(9, ok, detail)

    def test_10_decoherence(self, criterion):
        p = DispersionParams(2.0, 2.0, 5.0, 1)
        spec = ExperimentSpec(
            "decoherence", p, Grid2D(64, 2048, 128.0, 600.0), SolverConfig(0.05, 100.0, monitor_every=20),
            amplitude=0.3, width=10.0, alpha_primes=(1.8, 1.9), window=(60.0, 100.0),
        )
        res = exp_decoherence(spec)
        pl = ", ".join(f"{r['plateau_ratio']:.4f}" for r in res.table)
        detail = (
            f"pairing exponent {res.headline:.3f} [-0.5+-0.15]; plateau / sqrt2||u0|| for alpha2'=(1.8,1.9): {pl} "
            f"[1+-0.1, mutual <10%]"
        )
        assert criterion(10, res.verdict, detail)

    def test_11_thresholds(self, criterion):
        sign_ok = True
        for a1 in (2.0, 1.8, 1.5, 0.5):
            for a2 in (2.0, 1.8, 1.5, 0.5, 0.3):
                if a2 > a1:
                    continue
                for p in np.linspace(1.1, 6.0, 50):
                    g = (p - 1) * (1 / a1 + 1 / a2) - 2
                    b = classify_global(DispersionParams(a1, a2, p, -1))
                    if abs(g) > 1e-12:
                        sign_ok &= b is (GlobalBranch.SUBCRITICAL if g < 0 else GlobalBranch.SUPERCRITICAL)
        sign_ok &= classify_global(DispersionParams(2.0, 2.0, 3.0, -1)) is GlobalBranch.MASS_CRITICAL
        sign_ok &= classify_global(DispersionParams(2.0, 2.0, 2.5, -1)) is GlobalBranch.SUBCRITICAL
        sign_ok &= classify_global(DispersionParams(2.0, 0.5, 3.0, -1)) is GlobalBranch.SUPERCRITICAL

        spec = ExperimentSpec(
            "thresholds", DispersionParams(2.0, 2.0, 3.0, -1), Grid2D(256, 256, 8.0, 8.0),
            SolverConfig(5e-4, 1.0, monitor_every=10), amplitudes=(0.3, 3.0),
        )
        res = exp_thresholds(spec)
        sub = next(r for r in res.table if r["branch"] == "subcritical_global" and r["amplitude"] == 3.0)
        crit = next(r for r in res.table if r["branch"] == "mass_critical_small_data" and r["amplitude"] == 0.3)
        sup = next(r for r in res.table if r["branch"] == "supercritical_small_energy" and r["amplitude"] == 3.0)
        ok = sign_ok and res.verdict and math.isfinite(sub["max_hs_alpha_half"])
        detail = (
            f"classification {'matches' if sign_ok else 'MISMATCHES'} sign test; subcritical A=3 (10x small) "
            f"{sub['outcome']}, max hs {sub['max_hs_alpha_half']:.4g}, growth check {sub['growth_check']}, "
            f"filter loss {sub['filter_loss']:.0e}; mass-critical A=0.3 {crit['outcome']}; "
            f"supercritical A=3 {sup['outcome']} (recorded only)"
        )
        assert criterion(11, ok, detail)

    def test_12_scattering(self, criterion):
        p = DispersionParams(2.0, 1.5, 4.0, 1)
        spec = ExperimentSpec(
            "scattering", p, Grid2D(256, 512, 64.0, 128.0), SolverConfig(1e-2, 8.0, monitor_every=1),
            width=2.0, t_list=(1.0, 2.0, 4.0, 8.0), amplitudes=(0.2, 0.1),
        )
        res = exp_scattering_probe(spec)
        d = ", ".join(f"{r['drift']:.3g}" for r in res.table if r["amplitude"] == 0.2)
        detail = (
            f"drifts at A=0.2 over (1,2),(2,4),(4,8): {d} [decreasing]; ratio A=0.2/0.1 {res.headline:.2f} "
            f"vs 2^4 = {res.notes['expected_ratio']:g} [+-30%]"
        )
        assert criterion(12, res.verdict, detail)
