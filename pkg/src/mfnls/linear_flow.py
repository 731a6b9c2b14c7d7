"""Free propagator and measurements of dispersive and Strichartz-type bounds.

The linear flow ``U(t) = exp(-i t (D1^alpha1 + D2^alpha2))`` is applied
exactly in Fourier space.  Besides the propagator the module measures

* frequency-localized sup-norm decay of ``U(t) P_N f``,
* space-time Strichartz quotients with the dispersive weights,
* the one-dimensional oscillatory kernel ``K(y)`` behind the fixed-time
  estimate, by contour deformation (with a real-axis cross-check),
* the pairing ``<U_alpha(t) g, U_alpha'(t) g>`` that governs decoherence of
  flows with different dispersion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft, integrate

from .grid import Field2D, Grid2D, Space, apply_multiplier, l2_norm, lp_norm
from .multipliers import (
    DispersionParams,
    dispersive_weight,
    phi,
    psi,
)


class BoundaryError(RuntimeError):
    """The evolved wave reached the edge of the periodic box."""


@dataclass(frozen=True)
class AdmissiblePair:
    """Exponents ``(q, r)`` with ``1/q + 1/r = 1/2``, ``q in (2, inf]``, ``r in [2, inf)``."""

    q: float
    r: float

    def __post_init__(self) -> None:
        if not 2.0 < self.q <= math.inf:
            raise ValueError(f"q must lie in (2, inf], got {self.q!r}")
        if not 2.0 <= self.r < math.inf:
            raise ValueError(f"r must lie in [2, inf), got {self.r!r}")
        if abs(1.0 / self.q + 1.0 / self.r - 0.5) > 1e-12:
            raise ValueError(f"1/q + 1/r must equal 1/2, got q={self.q!r}, r={self.r!r}")

    @classmethod
    def from_r(cls, r: float) -> "AdmissiblePair":
        inv_q = 0.5 - 1.0 / r
        return cls(math.inf if inv_q == 0 else 1.0 / inv_q, r)


def dispersion_relation(grid: Grid2D, alpha1: float, alpha2: float) -> np.ndarray:
    """``|xi|^alpha1 + |eta|^alpha2`` on the frequency mesh."""
    return np.abs(grid.xi)[:, None] ** alpha1 + np.abs(grid.eta)[None, :] ** alpha2


def propagate(f: Field2D, params: DispersionParams, t: float) -> Field2D:
    """Exact linear flow ``U(t) f``."""
    if t == 0:
        return f
    w = dispersion_relation(f.grid, params.alpha1, params.alpha2)
    return apply_multiplier(f, np.exp(-1j * t * w))


# ---------------------------------------------------------------------------
# frequency-localized decay


@dataclass(frozen=True)
class DecayReport:
    """Sup-norm decay of ``U(t) P_N f``.

    Attributes
    ----------
    slope : float
        Least-squares log-log slope of ``sup_norm`` against ``t``.
    constant : float
        ``max_t t * sup_norm / (N^(1 + alpha1/alpha2 - alpha1) * l1)``.
    t, sup_norm : ndarray
    l1 : float
        ``L^1`` norm of the projected datum.
    contamination : float
        Relative change of the latest sup norm when the box is doubled in
        every direction where the wave reaches the outer frame (0 if none).
    grid : Grid2D
    """

    slope: float
    constant: float
    t: np.ndarray
    sup_norm: np.ndarray
    l1: float
    contamination: float
    grid: Grid2D


def _group_speed(a: float, k_hi: float) -> float:
    """Representative group speed ``a k^(a-1)`` on the band ``(0, k_hi]``.

    For ``a > 1`` the band edge is fastest.  For ``a < 1`` the speed is
    unbounded near ``k = 0`` but little mass travels that fast, so the speed
    at ``k_hi / 128`` is used; the box-doubling check catches the rest.
    """
    k = k_hi if a > 1 else k_hi / 128.0
    return a * k ** (a - 1.0)


def decay_grid(
    params: DispersionParams,
    n: float,
    t_max: float,
    margin: float = 1.2,
    oversample: float = 1.25,
) -> Grid2D:
    """Box and resolution sized for the packet ``U(t) P_N f`` up to ``t_max``.

    The band of ``P_N`` is ``|xi| <= 2N``, ``|eta| <= (2N)^(2/alpha)``; the
    Nyquist frequencies exceed it by ``oversample`` and the half-widths are
    ``margin`` times the distance travelled at the group speed.  Grids for
    different ``N`` are exact rescalings of one another.
    """
    a1, a2, alpha = params.alpha1, params.alpha2, params.alpha
    tr = t_max * n**a1  # reduced time
    kx, ky = 2.0, 2.0 ** (2.0 / alpha)
    lx = max(16.0, margin * _group_speed(a1, kx) * tr)
    ly = max(16.0, margin * _group_speed(a2, ky) * tr)
    nx = 4 * int(math.ceil(oversample * kx * lx / (2.0 * math.pi)))
    ny = 4 * int(math.ceil(oversample * ky * ly / (2.0 * math.pi)))
    return Grid2D(max(nx, 8), max(ny, 8), lx / n, ly / n ** (2.0 / alpha))


class _EvenLattice:
    """Fields even in ``x`` and ``y`` stored on the quarter box ``[0, lx] x [0, ly]``.

    A periodic field that is even in both variables is determined by its
    values at ``x_i = i dx``, ``i = 0..nx/2`` (likewise in ``y``), and its
    Fourier coefficients by ``xi_j = j pi / lx``, ``j = 0..nx/2``.  The
    transform pair is a type-I cosine transform, which gives the same
    numbers as the full periodic FFT at a quarter of the memory.
    """

    def __init__(self, grid: Grid2D):
        self.grid = grid
        self.mx, self.my = grid.nx // 2, grid.ny // 2
        self.x = grid.dx * np.arange(self.mx + 1)
        self.y = grid.dy * np.arange(self.my + 1)
        self.xi = np.pi / grid.lx * np.arange(self.mx + 1)
        self.eta = np.pi / grid.ly * np.arange(self.my + 1)
        wx = np.full(self.mx + 1, 2.0)
        wx[[0, -1]] = 1.0
        wy = np.full(self.my + 1, 2.0)
        wy[[0, -1]] = 1.0
        # multiplicity of each quarter point in the full periodic box
        self.wx, self.wy = wx, wy

    def forward(self, u: np.ndarray) -> np.ndarray:
        """``sum u(x) exp(-i (xi x + eta y)) dx dy`` over the full box."""
        return fft.dctn(u, type=1) * self.grid.cell

    def inverse(self, uh: np.ndarray) -> np.ndarray:
        return fft.dctn(uh, type=1) / self.grid.area

    def l1(self, u: np.ndarray) -> float:
        return float(self.wx @ np.abs(u) @ self.wy * self.grid.cell)

    def refined_sup(self, uh: np.ndarray, u: np.ndarray, sub: int = 8) -> float:
        """Sup of the trigonometric interpolant near the sampled maximum."""
        a = np.abs(u)
        i, j = np.unravel_index(np.argmax(a), a.shape)
        off = np.arange(-sub, sub + 1) / sub
        xs = self.x[i] + off * self.grid.dx
        ys = self.y[j] + off * self.grid.dy
        cx = np.cos(np.outer(xs, self.xi)) * self.wx
        cy = np.cos(np.outer(self.eta, ys)) * self.wy[:, None]
        patch = cx @ uh @ cy / self.grid.area
        return float(max(np.abs(patch).max(), a.max()))

    def edge_amplitude(self, u: np.ndarray, frame: float) -> tuple[float, float]:
        """Largest ``|u|`` in the outer ``x`` and ``y`` frames, relative to ``max |u|``."""
        a = np.abs(u)
        top = a.max()
        if top == 0:
            return 0.0, 0.0
        fx = self.x > (1.0 - frame) * self.grid.lx
        fy = self.y > (1.0 - frame) * self.grid.ly
        return float(a[fx, :].max() / top), float(a[:, fy].max() / top)


def _decay_series(params, n, t, grid):
    lat = _EvenLattice(grid)
    X, Y = np.meshgrid(lat.x, lat.y, indexing="ij")
    f = np.exp(-((X / grid.dx) ** 2 + (Y / grid.dy) ** 2) / 2.0)
    del X, Y
    rho = np.sqrt(lat.xi[:, None] ** 2 + lat.eta[None, :] ** params.alpha)
    fh = lat.forward(f) * phi(rho / n)
    del rho, f
    l1 = lat.l1(lat.inverse(fh))
    w = lat.xi[:, None] ** params.alpha1 + lat.eta[None, :] ** params.alpha2
    sup = np.empty_like(t)
    edge = np.zeros(2)
    for i, ti in enumerate(t):
        uh = fh * np.exp(-1j * ti * w)
        u = lat.inverse(uh)
        sup[i] = lat.refined_sup(uh, u)
        edge = np.maximum(edge, lat.edge_amplitude(u, 0.2))
    return sup, l1, edge


def measure_localized_decay(
    params: DispersionParams,
    n: float,
    t_list,
    grid: Grid2D | None = None,
    edge_tol: float = 1e-2,
    contamination_tol: float = 1e-2,
) -> DecayReport:
    """Fit the sup-norm decay rate of a frequency-localized free wave.

    The datum is a Gaussian one cell wide, multiplied in frequency by
    ``phi(sqrt(xi^2 + |eta|^alpha) / N)``; at the scale of ``P_N`` it acts as
    an approximate delta.  Because datum and symbols are even, the flow is
    evaluated on the quarter box (see :class:`_EvenLattice`).  Sup norms are
    taken of the trigonometric interpolant around the grid maximum.

    Parameters
    ----------
    params : DispersionParams
    n : float
        Dyadic frequency scale.
    t_list : array_like
        Positive times spanning at least 1.5 decades.
    grid : Grid2D, optional
        Full periodic box; defaults to :func:`decay_grid` for ``max(t_list)``.
    edge_tol : float
        If ``|u|`` in the outer fifth of the box exceeds this fraction of its
        maximum along some direction, the box is doubled along it and the
        sup norm at the latest time recomputed.
    contamination_tol : float
        Largest admissible relative change under that doubling.

    Raises
    ------
    BoundaryError
        If wrap-around changes the sup norm by more than ``contamination_tol``.
    """
    t = np.asarray(t_list, dtype=float)
    if np.any(t <= 0) or t.size < 3:
        raise ValueError("t_list needs at least three positive times")
    if np.log10(t.max() / t.min()) < 1.5 - 1e-12:
        raise ValueError("t_list must span at least 1.5 decades")
    if not n > 0 or math.frexp(n)[0] != 0.5:
        raise ValueError(f"n must be a power of two, got {n!r}")
    if grid is None:
        grid = decay_grid(params, n, float(t.max()))
    if grid.xi_nyquist <= 2.0 * n or grid.eta_nyquist <= (2.0 * n) ** (2.0 / params.alpha):
        raise ValueError("grid Nyquist frequencies do not contain the dyadic band")
    sup, l1, edge = _decay_series(params, n, t, grid)
    contamination = 0.0
    if np.any(edge > edge_tol):
        sx = 2.0 if edge[0] > edge_tol else 1.0
        sy = 2.0 if edge[1] > edge_tol else 1.0
        big = Grid2D(int(grid.nx * sx), int(grid.ny * sy), grid.lx * sx, grid.ly * sy)
        sup_big, _, _ = _decay_series(params, n, t[-1:], big)
        contamination = float(abs(sup_big[0] - sup[-1]) / sup_big[0])
        if contamination > contamination_tol:
            raise BoundaryError(
                f"doubling the box changes the sup norm by {contamination:.2e}; "
                "enlarge the box"
            )
    slope = float(np.polyfit(np.log(t), np.log(sup), 1)[0])
    scale = n ** (1.0 + params.alpha1 / params.alpha2 - params.alpha1)
    constant = float(np.max(t * sup) / (scale * l1))
    return DecayReport(slope, constant, t, sup, l1, contamination, grid)


# ---------------------------------------------------------------------------
# Strichartz quotient


def _axis_energy_fraction(fh: np.ndarray, params: DispersionParams) -> float:
    e = np.abs(fh) ** 2
    tot = e.sum()
    if tot == 0:
        return 0.0
    bad = 0.0
    if params.beta1 > 0:
        bad += e[0, :].sum()
    if params.beta2 > 0:
        bad += e[:, 0].sum()
    return float(bad / tot)


def strichartz_quotient(
    f: Field2D,
    params: DispersionParams,
    pair: AdmissiblePair,
    t_window: float,
    nt: int,
    axis_tol: float = 1e-20,
) -> float:
    """Space-time quotient ``||W U(t) f||_{L^q_t L^r} / ||f||_2`` on ``[0, t_window]``.

    ``W = D1^(-beta1 (1/2 - 1/r)) D2^(-beta2 (1/2 - 1/r))``.  The time norm
    is a composite trapezoid rule on ``nt`` uniform nodes.

    Raises
    ------
    ValueError
        If ``f`` carries spectral energy on a zero-frequency line on which
        ``W`` has a negative power (use
        :func:`mfnls.multipliers.remove_axis_lines` first).
    """
    if nt < 2:
        raise ValueError("nt must be at least 2")
    fh = f.spectral().data
    norm = l2_norm(f.spectral())
    if norm == 0:
        return 0.0
    frac = _axis_energy_fraction(fh, params)
    if frac > axis_tol:
        raise ValueError(
            f"datum has {frac:.2e} of its energy on a zero-frequency line where "
            "negative derivative powers act; remove the axis lines first"
        )
    grid = f.grid
    wfh = fh * dispersive_weight(grid, params, pair.r)
    om = dispersion_relation(grid, params.alpha1, params.alpha2)
    ts = np.linspace(0.0, t_window, nt)
    a = np.empty(nt)
    for i, ti in enumerate(ts):
        g = Field2D(grid, wfh * np.exp(-1j * ti * om), Space.SPECTRAL)
        a[i] = lp_norm(g, pair.r)
    if math.isinf(pair.q):
        tn = a.max()
    else:
        tn = integrate.trapezoid(a**pair.q, ts) ** (1.0 / pair.q)
    return float(tn / norm)


# ---------------------------------------------------------------------------
# oscillatory kernel K(y)


def _stationary_point(alpha: float, y: float) -> float:
    if y <= 0:
        return 0.0 if alpha > 1 else math.inf
    return (y / alpha) ** (1.0 / (alpha - 1.0))


def _quad_complex(func, a, b, points=None):
    val, err = integrate.quad(
        func, a, b, complex_func=True, points=points, limit=2000, epsabs=1e-13, epsrel=1e-11
    )
    # scipy reports the real and imaginary error estimates as one complex number
    return val, abs(complex(err).real) + abs(complex(err).imag)


def _half_line_contour(alpha, beta, mu, y, sign, kappa):
    """``int_0^inf exp(-i eta^alpha + i sign y eta) eta^(-beta (1 + i mu)) d eta``.

    The path is parametrized by ``s = v^(2/alpha)``, which removes the
    endpoint singularity, and lifted to ``z = s + i g(s)`` so that
    ``exp(i phase)`` decays away from the stationary point.
    """
    c = beta * (1.0 + 1j * mu)
    m = 2.0 / alpha
    if sign < 0 or y == 0:
        # both phase terms rotate the same way: a straight ray suffices
        th = 0.9 * min(math.pi / 2.0, math.pi / (2.0 * alpha))
        rot = np.exp(-1j * th)

        def path(s):
            return s * rot, rot * np.ones_like(s)

        s0 = None
    else:
        s0 = _stationary_point(alpha, y)
        k = kappa if alpha > 1 else -kappa

        def path(s):
            if math.isinf(s0):
                g, dg = -k * s, -k
            else:
                g = k * s * (s0 - s) / (s0 + s)
                dg = k * (s0**2 - 2 * s0 * s - s**2) / (s0 + s) ** 2
            return s + 1j * g, 1.0 + 1j * dg

    def phase(z):
        return -(z**alpha) + sign * y * z

    def integrand(v):
        s = v**m
        z, dz = path(s)
        return np.exp(1j * phase(z) - c * np.log(z)) * dz * m * v ** (m - 1.0)

    # upper limit: where Im(phase) is large enough to neglect the remainder
    def imph(s):
        return phase(path(s)[0]).imag

    s_hi = 1.0 if s0 is None or math.isinf(s0) else max(1.0, 2.0 * s0)
    while imph(s_hi) < 60.0:
        s_hi *= 1.5
        if s_hi > 1e12:
            raise RuntimeError("contour does not reach the decay region")
    probe = np.geomspace(1e-8, s_hi, 4000)
    worst = -min(0.0, float(np.min([imph(s) for s in probe])))
    if worst > 5.0:
        raise RuntimeError(f"contour crosses a growth region (Im phase = {-worst:.2f})")
    v_hi = s_hi ** (1.0 / m)
    bps = []
    if s0 is not None and 0 < s0 < s_hi:
        bps.append(s0 ** (1.0 / m))
    edges = np.unique(np.concatenate([[0.0], bps, np.linspace(0.0, v_hi, 9)[1:]]))
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = _quad_complex(integrand, a, b)
        total += val
        err += e
    return total, err


def kernel_k_contour(alpha: float, beta: float, mu: float, y: float, kappa: float = 0.5):
    """``K(y)`` by contour deformation of both half-line integrals."""
    y = abs(float(y))
    kp, e1 = _half_line_contour(alpha, beta, mu, y, +1, kappa)
    km, e2 = _half_line_contour(alpha, beta, mu, y, -1, kappa)
    return kp + km, e1 + e2


def kernel_k_real_axis(
    alpha: float,
    beta: float,
    mu: float,
    y: float,
    cutoff: float,
    nodes: int = 12,
    chunk: int = 1 << 18,
) -> complex:
    """``K(y)`` on the real axis with a smooth frequency cutoff ``psi(eta / cutoff)``.

    Uses ``eta = v^(2/alpha)``, under which ``eta^(-beta) d eta`` becomes a
    constant multiple of ``dv`` when ``beta = 1 - alpha/2``, and
    Gauss-Legendre panels whose length is inversely proportional to the
    local phase derivative plus one.  Panels are graded geometrically towards
    ``v = 0`` to resolve the ``v^(-i mu ...)`` factor.  Intended as an
    independent check of the contour evaluation at moderate ``y``; the
    cutoff must lie well beyond the stationary point.
    """
    y = abs(float(y))
    m = 2.0 / alpha
    c = beta * (1.0 + 1j * mu)
    v_hi = (2.0 * cutoff) ** (1.0 / m)

    def count(v):
        # 2 * int_0^v (|d/dv| of v^2 and y v^m, summed, plus one): the number of
        # panels of length 0.5 / (phase' + 1) needed to reach v
        return 2.0 * (v * v + y * v**m + v)

    h0 = 0.5 / (2.0 * y * (m == 1.0) + 1.0)
    n_panels = int(math.ceil(count(v_hi) - count(h0)))
    vs = np.linspace(h0, v_hi, max(4 * n_panels, 1 << 12))
    inner = np.interp(count(h0) + np.arange(1, n_panels), count(vs), vs)
    edges = np.concatenate(
        [[0.0], h0 * 2.0 ** -np.arange(60, 0, -1), [h0], inner, [v_hi]]
    )
    t, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0 + 0.0j
    step = max(1, chunk // nodes)
    for j in range(0, edges.size - 1, step):
        b = edges[j + 1 : j + step + 1, None]
        a = edges[j : j + b.shape[0], None]
        vv = (0.5 * (b - a) * t + 0.5 * (b + a)).ravel()
        wv = (0.5 * (b - a) * w).ravel()
        eta = vv**m
        amp = m * vv ** (m - 1.0) * np.exp(-c * np.log(eta)) * psi(eta / cutoff)
        base = -1j * eta**alpha
        total += np.sum(
            wv * amp * (np.exp(base + 1j * y * eta) + np.exp(base - 1j * y * eta))
        )
    return complex(total)


def kernel_k_oracle(
    alpha: float, beta: float, mu: float, y_list, kappa: float = 0.5
) -> np.ndarray:
    """Evaluate ``K(y) = int exp(-i |eta|^alpha + i y eta) |eta|^(-beta (1 + i mu)) d eta``.

    Parameters
    ----------
    alpha : float
        In ``(0, 2] \\ {1}``.
    beta : float
        Singular exponent, normally ``1 - alpha / 2``.
    mu : float
        Imaginary part of the power.
    y_list : array_like
    kappa : float
        Height of the deformed contour relative to its abscissa.

    Raises
    ------
    RuntimeError
        If the quadrature error estimate exceeds ``1e-8`` relative.
    """
    if not 0.0 < alpha <= 2.0 or alpha == 1.0:
        raise ValueError(f"alpha must lie in (0, 2] \\ {{1}}, got {alpha!r}")
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta!r}")
    ys = np.atleast_1d(np.asarray(y_list, dtype=float))
    out = np.empty(ys.shape, dtype=complex)
    for i, y in enumerate(ys):
        val, err = kernel_k_contour(alpha, beta, mu, y, kappa)
        if not np.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
            raise RuntimeError(f"quadrature did not converge at y = {y} (err {err:.2e})")
        out[i] = val
    return out


# ---------------------------------------------------------------------------
# decoherence


@dataclass(frozen=True)
class PairingReport:
    """Pairing ``<U_alpha(t) g, U_alpha'(t) g>`` and its fitted decay exponent."""

    t: np.ndarray
    pairing: np.ndarray
    exponent: float
    eta_c: float
    norm_sq: float


def critical_frequency(alpha: float, alpha_prime: float) -> float:
    """Stationary frequency of ``|eta|^alpha - |eta|^alpha'``."""
    return (alpha_prime / alpha) ** (1.0 / (alpha - alpha_prime))


def decoherence_pairing(g: Field2D, alpha: float, alpha_prime: float, t_list) -> PairingReport:
    """L2 pairing of two free flows differing only in the ``y`` dispersion.

    With ``alpha1 = 2`` the ``xi`` phases cancel and the pairing is
    ``sum |g_hat|^2 exp(-i t (|eta|^alpha - |eta|^alpha')) dx dy``.  The
    exponent is the log-log slope of ``|pairing|`` over ``t_list``
    (non-positive times are excluded from the fit).
    """
    for a in (alpha, alpha_prime):
        if not 0.0 < a <= 2.0 or a == 1.0:
            raise ValueError(f"dispersion order must lie in (0, 2] \\ {{1}}, got {a!r}")
    if alpha == alpha_prime:
        raise ValueError("alpha and alpha_prime must differ")
    t = np.asarray(t_list, dtype=float)
    gh = g.spectral().data
    marg = np.sum(np.abs(gh) ** 2, axis=0) * g.grid.cell
    ae = np.abs(g.grid.eta)
    d = ae**alpha - ae**alpha_prime
    pairing = np.array([np.sum(marg * np.exp(-1j * ti * d)) for ti in t])
    pos = t > 0
    if pos.sum() >= 2:
        expo = float(np.polyfit(np.log(t[pos]), np.log(np.abs(pairing[pos])), 1)[0])
    else:
        expo = math.nan
    return PairingReport(t, pairing, expo, critical_frequency(alpha, alpha_prime), float(marg.sum()))
