"""Anisotropic Fourier multipliers, dyadic projections and their kernels.

All operators here are diagonal in the discrete Fourier basis of
:mod:`mfnls.grid`.  The anisotropic weight is ``xi^2 + |eta|^alpha`` with
``alpha = 2 alpha2 / alpha1``; it is homogeneous of degree 2 under
``(xi, eta) -> (l xi, l^(2/alpha) eta)``.

Negative powers of homogeneous symbols are singular on a zero-frequency set.
The convention throughout is to set such multipliers to zero there, so they
should only be applied to data with no mass on that set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .grid import Field2D, Grid2D, apply_multiplier, l2_norm


class ParameterError(ValueError):
    """Invalid dispersion or nonlinearity parameters.

    ``rule`` names the violated constraint.
    """

    def __init__(self, rule: str, message: str):
        super().__init__(f"{message} (rule: {rule})")
        self.rule = rule


ALPHA_RULE = "alpha_i in (0, 2] \\ {1}"
ORDER_RULE = "alpha1 >= alpha2"
POWER_RULE = "p > 1"
SIGN_RULE = "mu in {-1, +1}"


@dataclass(frozen=True)
class DispersionParams:
    """Dispersion orders, nonlinearity power and sign.

    Derived quantities are properties, so they always follow the stored
    ``(alpha1, alpha2, p)``.
    """

    alpha1: float
    alpha2: float
    p: float = 3.0
    mu: int = 1

    def __post_init__(self) -> None:
        for name in ("alpha1", "alpha2"):
            a = getattr(self, name)
            if not (0.0 < a <= 2.0) or a == 1.0:
                raise ParameterError(ALPHA_RULE, f"{name} = {a!r} is not allowed")
        if self.alpha1 < self.alpha2:
            raise ParameterError(
                ORDER_RULE, f"alpha1 = {self.alpha1!r} < alpha2 = {self.alpha2!r}"
            )
        if not self.p > 1.0:
            raise ParameterError(POWER_RULE, f"p = {self.p!r}")
        if self.mu not in (-1, 1):
            raise ParameterError(SIGN_RULE, f"mu = {self.mu!r}")

    @property
    def alpha(self) -> float:
        return 2.0 * self.alpha2 / self.alpha1

    @property
    def beta1(self) -> float:
        return 1.0 - self.alpha1 / 2.0

    @property
    def beta2(self) -> float:
        return 1.0 - self.alpha2 / 2.0

    @property
    def s_c(self) -> float:
        """Scaling-critical regularity."""
        return 0.5 + self.alpha1 / (2.0 * self.alpha2) - self.alpha1 / (self.p - 1.0)

    def replace(self, **kw) -> "DispersionParams":
        d = dict(alpha1=self.alpha1, alpha2=self.alpha2, p=self.p, mu=self.mu)
        d.update(kw)
        return DispersionParams(**d)


def _alpha_of(params) -> float:
    return params.alpha if isinstance(params, DispersionParams) else float(params)


# ---------------------------------------------------------------------------
# dyadic bump


def _theta(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def psi(r):
    """Smooth even cutoff: 1 on ``[-1, 1]``, 0 outside ``(-2, 2)``.

    Built from ``theta(t) = exp(-1/t)`` as
    ``theta(2 - |r|) / (theta(2 - |r|) + theta(|r| - 1))``.
    """
    a = np.abs(np.asarray(r, dtype=float))
    up = _theta(2.0 - a)
    return up / (up + _theta(a - 1.0))


def phi(r):
    """Dyadic annulus bump ``psi(r) - psi(2r)``, supported in ``1/2 <= |r| <= 2``."""
    return psi(r) - psi(2.0 * np.asarray(r, dtype=float))


def joint_radius(grid: Grid2D, alpha: float) -> np.ndarray:
    """``sqrt(xi^2 + |eta|^alpha)`` on the frequency mesh."""
    XI, ETA = grid.freq_mesh()
    return np.sqrt(XI**2 + np.abs(ETA) ** alpha)


def _is_dyadic(n: float) -> bool:
    if not n > 0:
        return False
    m, _ = math.frexp(n)
    return m == 0.5


def dyadic_range(grid: Grid2D, alpha, kind: str = "joint") -> list[float]:
    """Dyadic ``N`` whose bump support fits comfortably on ``grid``.

    The admissible band is ``[4 rho_min, rho_max / 4]`` where ``rho_min`` is
    the coarser lattice spacing and ``rho_max`` the smaller Nyquist radius,
    both measured in the variable the bump is applied to.
    """
    alpha = _alpha_of(alpha)
    dxi, deta = np.pi / grid.lx, np.pi / grid.ly
    if kind == "joint":
        lo = max(dxi, deta ** (alpha / 2.0))
        hi = min(grid.xi_nyquist, grid.eta_nyquist ** (alpha / 2.0))
    elif kind == "axis1":
        lo, hi = dxi, grid.xi_nyquist
    elif kind == "axis2":
        lo, hi = deta, grid.eta_nyquist
    else:
        raise ValueError(f"unknown projection kind {kind!r}")
    k0 = math.ceil(math.log2(4.0 * lo) - 1e-12)
    k1 = math.floor(math.log2(hi / 4.0) + 1e-12)
    return [2.0**k for k in range(k0, k1 + 1)]


def lp_symbol(grid: Grid2D, alpha, n: float, kind: str = "joint") -> np.ndarray:
    """Symbol of the dyadic projection at scale ``n``."""
    alpha = _alpha_of(alpha)
    if not _is_dyadic(n):
        raise ValueError(f"n must be a power of two, got {n!r}")
    allowed = dyadic_range(grid, alpha, kind)
    if not allowed or not allowed[0] <= n <= allowed[-1]:
        span = f"[{allowed[0]}, {allowed[-1]}]" if allowed else "empty"
        raise ValueError(f"n = {n} outside resolvable dyadic range {span} for this grid")
    if kind == "joint":
        return phi(joint_radius(grid, alpha) / n)
    XI, ETA = grid.freq_mesh()
    return phi(np.abs(XI if kind == "axis1" else ETA) / n)


def lp_project(f: Field2D, params, n: float, kind: str = "joint") -> Field2D:
    """Non-smooth Littlewood-Paley projection ``P_N`` (or an axis projection).

    Parameters
    ----------
    f : Field2D
    params : DispersionParams or float
        Supplies ``alpha``; only used for ``kind="joint"``.
    n : float
        Dyadic scale, a power of two inside :func:`dyadic_range`.
    kind : {"joint", "axis1", "axis2"}
    """
    return apply_multiplier(f, lp_symbol(f.grid, params, n, kind))


# ---------------------------------------------------------------------------
# fractional derivatives and potentials


def _power(base: np.ndarray, s: float) -> np.ndarray:
    """``base**s`` with negative powers set to 0 where ``base == 0``."""
    if s == 0:
        return np.ones_like(base)
    if s > 0:
        return base**s
    out = np.zeros_like(base)
    nz = base > 0
    out[nz] = base[nz] ** s
    return out


def _axis_index(axis) -> int:
    if axis in ("x", 0):
        return 0
    if axis in ("y", 1):
        return 1
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def deriv_symbol(grid: Grid2D, axis, s: float) -> np.ndarray:
    """Broadcastable symbol ``|xi|^s`` (axis x) or ``|eta|^s`` (axis y)."""
    if _axis_index(axis) == 0:
        return _power(np.abs(grid.xi), s)[:, None]
    return _power(np.abs(grid.eta), s)[None, :]


def frac_deriv(f: Field2D, axis, s: float) -> Field2D:
    """Directional fractional derivative ``D_axis^s``.

    For ``s < 0`` the zero-frequency line of that axis is annihilated.
    """
    return apply_multiplier(f, deriv_symbol(f.grid, axis, s))


def aniso_symbol(grid: Grid2D, alpha, s: float, homogeneous: bool) -> np.ndarray:
    """``(1 + xi^2 + |eta|^alpha)^(s/2)`` or its homogeneous version."""
    XI, ETA = grid.freq_mesh()
    w = XI**2 + np.abs(ETA) ** _alpha_of(alpha)
    if not homogeneous:
        w = w + 1.0
    return _power(w, s / 2.0)


def aniso_potential(f: Field2D, params, s: float, homogeneous: bool = False) -> Field2D:
    """Apply ``<grad_alpha>^s`` (default) or ``|grad_alpha|^s``."""
    return apply_multiplier(f, aniso_symbol(f.grid, params, s, homogeneous))


def sobolev_norm(f: Field2D, params, s: float, homogeneous: bool = False) -> float:
    """Discrete ``H^s_alpha`` or homogeneous ``H^s_alpha`` norm."""
    if s == 0:
        return l2_norm(f.physical())
    fh = f.spectral()
    w = aniso_symbol(f.grid, params, s, homogeneous)
    return float(np.sqrt(np.sum(np.abs(w * fh.data) ** 2) * f.grid.cell))


def weighted_sobolev_norm(f: Field2D, params, s: float, r: float) -> float:
    """``L^r`` norm of ``<grad_alpha>^s f`` (the ``W^{s,r}_alpha`` norm)."""
    from .grid import lp_norm

    return lp_norm(aniso_potential(f, params, s), r)


def dispersive_weight(grid: Grid2D, params: DispersionParams, r: float) -> np.ndarray:
    """Symbol of ``D1^(-beta1 (1/2 - 1/r)) D2^(-beta2 (1/2 - 1/r))``."""
    g = 0.5 - 1.0 / r
    return deriv_symbol(grid, "x", -params.beta1 * g) * deriv_symbol(
        grid, "y", -params.beta2 * g
    )


def remove_axis_lines(f: Field2D) -> Field2D:
    """Zero the ``xi = 0`` and ``eta = 0`` spectral lines."""
    fh = f.spectral()
    d = fh.data.copy()
    d[0, :] = 0.0
    d[:, 0] = 0.0
    out = fh.with_data(d)
    return out if not f.is_physical else out.physical()


# ---------------------------------------------------------------------------
# singular-integral oracle


def frac_laplacian_constant(alpha: float) -> float:
    """Normalizing constant of the 1D singular-integral fractional Laplacian."""
    return (
        4.0 ** (alpha / 2.0)
        * special.gamma((1.0 + alpha) / 2.0)
        / (math.sqrt(math.pi) * abs(special.gamma(-alpha / 2.0)))
    )


def frac_laplacian_1d_oracle(
    g,
    alpha: float,
    points,
    h_far: float = 2000.0,
    tol: float = 1e-9,
    tail_tol: float = 1e-4,
) -> np.ndarray:
    """Fractional Laplacian ``(-d^2/dx^2)^(alpha/2) g`` by direct quadrature.

    Evaluates ``c * int_0^inf (2 g(x) - g(x+h) - g(x-h)) h^(-1-alpha) dh``
    independently of any FFT.  The near field uses the substitution
    ``h = v^m`` with ``m = 2 / (2 - alpha)``, which turns the ``h^(1-alpha)``
    endpoint behaviour into a smooth integrand; below ``h = 1e-3`` the
    second difference is replaced by its quadratic model to avoid
    cancellation.  The far field beyond ``h_far`` is bounded by the integral
    over ``[h_far, 2 h_far]``.

    Parameters
    ----------
    g : callable
        Vectorized function of one real variable.
    alpha : float
        Order in ``(0, 2)``.
    points : array_like
        Evaluation points.
    h_far : float
        Truncation of the ``g(x +- h)`` part of the integral.
    tol : float
        Absolute quadrature tolerance.
    tail_tol : float
        Largest admissible far-field block, relative to ``max |g(points)|``.

    Returns
    -------
    ndarray
        Values at ``points``.

    Raises
    ------
    ValueError
        If ``g`` does not decay fast enough for the far field to be negligible.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha!r}")
    x = np.atleast_1d(np.asarray(points, dtype=float))
    g0 = np.asarray(g(x), dtype=float)
    if not np.any(g0) and not np.any(g(x + 1.0)) and not np.any(g(x - 1.0)):
        probe = np.linspace(-h_far, h_far, 4001)
        if not np.any(g(probe)):
            return np.zeros_like(x)

    def second_diff(h):
        return 2.0 * g0 - g(x + h) - g(x - h)

    hc = 1e-3
    bc = second_diff(hc)
    near0 = bc / hc**2 * hc ** (2.0 - alpha) / (2.0 - alpha)

    m = 2.0 / (2.0 - alpha)

    def near_integrand(v):
        h = v**m
        return second_diff(h) * h ** (-1.0 - alpha) * m * v ** (m - 1.0)

    near, _ = integrate.quad_vec(near_integrand, hc ** (1.0 / m), 1.0, epsabs=tol, limit=2000)

    def far_integrand(h):
        return (g(x + h) + g(x - h)) * h ** (-1.0 - alpha)

    pts = np.geomspace(1.0, h_far, 24)
    far = np.zeros_like(x)
    for a, b in zip(pts[:-1], pts[1:]):
        part, _ = integrate.quad_vec(far_integrand, a, b, epsabs=tol, limit=4000)
        far += part
    tail, _ = integrate.quad_vec(far_integrand, h_far, 2.0 * h_far, epsabs=tol, limit=4000)
    scale = max(1.0, float(np.max(np.abs(g0))))
    if np.max(np.abs(tail)) > tail_tol * scale:
        raise ValueError(
            "non-decaying input: far-field contribution "
            f"{np.max(np.abs(tail)):.3e} exceeds tolerance"
        )
    return frac_laplacian_constant(alpha) * (near0 + near + 2.0 * g0 / alpha - far)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class KernelReport:
    """Summary of a sampled convolution kernel.

    Attributes
    ----------
    l1_norm : float
        ``L^1`` norm at the finest level, tail-completed in ``y``.
    l1_levels : tuple of float
        ``L^1`` norms at each refinement level.
    tail_exponent_x, tail_exponent_y : float
        Decay exponents fitted on the axis profiles.
    converged : bool
        Whether the last two refinement levels agree within ``rtol``.
    y, profile_y : ndarray
        ``|Phi(0, y)|`` for ``y >= 0`` at the finest level.
    """

    l1_norm: float
    l1_levels: tuple
    tail_exponent_x: float
    tail_exponent_y: float
    converged: bool
    y: np.ndarray
    profile_y: np.ndarray


def fit_tail_exponent(r: np.ndarray, values: np.ndarray, noise: float | None = None):
    """Fit ``|values| ~ r^(-k)`` over one decade above the noise floor.

    The monotone envelope ``sup_{r' >= r} |values(r')|`` is used so that
    oscillatory zeros do not bias the fit.  The window is the decade ending
    where the envelope last exceeds ten times ``noise`` (default: the
    envelope at the largest sample).

    Returns
    -------
    k : float
        Fitted exponent (``inf`` if the profile is at the noise floor).
    window : tuple of float
        The ``(r0, r1)`` fit interval.
    """
    r = np.asarray(r, dtype=float)
    env = np.maximum.accumulate(np.abs(values)[::-1])[::-1]
    if noise is None:
        noise = env[-1]
    noise = max(noise, np.finfo(float).tiny)
    above = np.nonzero((env > 10.0 * noise) & (r > 0))[0]
    if above.size == 0:
        return math.inf, (math.nan, math.nan)
    r1 = r[above[-1]]
    r0 = r1 / 10.0
    sel = (r >= r0) & (r <= r1) & (env > 0)
    if sel.sum() < 4 or r0 < r[r > 0][0]:
        return math.inf, (r0, r1)
    k = -np.polyfit(np.log(r[sel]), np.log(env[sel]), 1)[0]
    return float(k), (float(r0), float(r1))


def _gauss_legendre(a: float, b: float, n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (b + a), 0.5 * (b - a) * w


def _kernel_level(alpha, n, y_half, x_half, dx, eta_pts, n_xi):
    """One refinement level of the dyadic kernel, computed row by row in x."""
    eta_max = (2.0 * n) ** (2.0 / alpha)
    m = 1 << int(math.ceil(math.log2(eta_pts)))
    deta = 2.0 * math.pi / (2.0 * y_half)
    if m * deta / 2.0 <= 1.25 * eta_max:
        m = 1 << int(math.ceil(math.log2(2.5 * eta_max / deta)))
    eta = deta * np.fft.fftfreq(m, d=1.0 / m)
    sup = np.abs(eta) <= eta_max
    # symbol is smooth and compactly supported in xi: Gauss-Legendre is spectral
    xi, w = _gauss_legendre(-2.0 * n, 2.0 * n, n_xi)
    sym = phi(np.sqrt(xi[:, None] ** 2 + np.abs(eta[sup])[None, :] ** alpha) / n)
    x = dx * np.arange(-int(round(x_half / dx)), int(round(x_half / dx)) + 1)
    y = 2.0 * y_half * np.fft.fftfreq(m)
    ymask = y >= 0
    order = np.argsort(y[ymask])
    absprof = np.zeros(ymask.sum())
    row0 = None
    spec = np.zeros(m, dtype=complex)
    for block in np.array_split(np.arange(x.size), max(1, x.size // 16)):
        E = np.exp(1j * np.outer(x[block], xi)) * w / (2.0 * np.pi)
        A = E @ sym
        for i, xb in enumerate(block):
            spec[:] = 0.0
            spec[sup] = A[i]
            # sum_k spec_k e^{i y_j eta_k} deta / (2 pi)
            vals = np.fft.ifft(spec) * m * deta / (2.0 * np.pi)
            # the row is even in y; fold onto y >= 0
            a = np.abs(vals[ymask])[order]
            absprof += a * dx
            if x[xb] == 0.0:
                row0 = vals[ymask][order]
    return x, y[ymask][order], absprof, row0, eta, sup, xi, w


def lp_kernel(
    params,
    n: float = 1.0,
    y_half: float = 2048.0,
    x_half: float = 16.0,
    dx: float = 0.25,
    levels: int = 3,
    rtol: float = 0.02,
) -> KernelReport:
    """Sample ``Phi_N = F^{-1} phi_N`` and measure its decay and ``L^1`` norm.

    The kernel is evaluated as a Fourier series in ``y`` of period
    ``2 y_half`` (rows in ``x`` are computed one at a time so memory stays
    one-dimensional).  ``L^1`` is a Riemann sum over ``|y| <= y_end`` plus
    the fitted power-law tail beyond ``y_end``, where ``y_end`` is where the
    periodic images start to matter.

    Refinement level ``k`` doubles ``y_half`` and halves ``dx`` ``k``
    times; ``converged`` compares the last two levels.  ``alpha = 1`` is
    accepted here even though it is excluded from :class:`DispersionParams`.

    The scale ``n`` is handled by rescaled sampling: the box is scaled by
    ``1/n`` in ``x`` and ``n^(-2/alpha)`` in ``y`` so that every level samples
    ``n^(1+2/alpha) Phi_1(n x, n^(2/alpha) y)`` at the same reduced points.
    """
    alpha = _alpha_of(params)
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha!r}")
    if not _is_dyadic(n):
        raise ValueError(f"n must be a power of two, got {n!r}")
    sy = n ** (-2.0 / alpha)
    l1s = []
    for k in range(levels):
        yh = y_half * 2**k * sy
        h = dx / 2**k / n
        x, y, absprof, row0, *_ = _kernel_level(
            alpha, n, yh, x_half / n, h, 4096, 96
        )
        # images of the periodic sum dominate near the half period
        k_y, (_, y_end) = fit_tail_exponent(y[1:], absprof[1:])
        dy = y[1] - y[0]
        inside = y <= y_end if math.isfinite(y_end) else np.ones_like(y, dtype=bool)
        total = 2.0 * np.sum(absprof[inside]) * dy - absprof[0] * dy
        if math.isfinite(k_y) and k_y > 1.0 and math.isfinite(y_end):
            sel = (y >= y_end / 2.0) & inside
            c = np.exp(np.mean(np.log(absprof[sel]) + k_y * np.log(y[sel])))
            total += 2.0 * c * y_end ** (1.0 - k_y) / (k_y - 1.0)
        l1s.append(float(total))
    kx = _x_tail(alpha, n, x_half / n)
    ky, _ = fit_tail_exponent(y[1:], row0[1:])
    converged = len(l1s) < 2 or abs(l1s[-1] - l1s[-2]) <= rtol * abs(l1s[-1])
    return KernelReport(
        l1_norm=l1s[-1],
        l1_levels=tuple(l1s),
        tail_exponent_x=kx,
        tail_exponent_y=ky,
        converged=bool(converged),
        y=y,
        profile_y=np.abs(row0),
    )


def _x_tail(alpha: float, n: float, x_half: float) -> float:
    """Decay exponent of ``Phi(x, 0)`` from its eta-marginal symbol."""
    eta_max = (2.0 * n) ** (2.0 / alpha)
    # eta-marginal: int phi(sqrt(xi^2 + |eta|^alpha)/n) d eta; split at the cusp
    e, we = _gauss_legendre(0.0, eta_max, 400)
    period = 64.0 * x_half
    m = 1 << 14
    dxi = 2.0 * np.pi / period
    xi = dxi * np.fft.fftfreq(m, d=1.0 / m)
    sup = np.abs(xi) <= 2.0 * n
    marg = 2.0 * (phi(np.sqrt(xi[sup, None] ** 2 + e[None, :] ** alpha) / n) @ we)
    spec = np.zeros(m)
    spec[sup] = marg
    vals = np.fft.ifft(spec).real * m * dxi / (2.0 * np.pi) ** 2
    xs = period * np.fft.fftfreq(m)
    keep = xs > 0
    order = np.argsort(xs[keep])
    k, _ = fit_tail_exponent(xs[keep][order], vals[keep][order], noise=1e-13 * np.abs(vals).max())
    return k


@dataclass(frozen=True)
class BesselReport:
    min_value: float
    l1_norm: float
    mass: float
    resolved: bool


def bessel_kernel(grid: Grid2D, alpha, s: float, mollify: bool = True) -> np.ndarray:
    """Physical samples of the kernel of ``<grad_alpha>^(-s)`` on ``grid``.

    With ``mollify`` the symbol is multiplied by ``exp(-eps (xi^2 + eta^2))``
    (a positive Gaussian convolution in space) with ``eps`` chosen so the
    product is below ``1e-16`` at the Nyquist frequencies.  This removes the
    Gibbs ringing of the truncated symbol while preserving positivity and
    unit mass.
    """
    sym = aniso_symbol(grid, alpha, -s, homogeneous=False)
    if mollify:
        XI, ETA = grid.freq_mesh()
        kmax = min(grid.xi_nyquist, grid.eta_nyquist)
        eps = 37.0 / kmax**2
        sym = sym * np.exp(-eps * (XI**2 + ETA**2))
    # inverse DFT with the continuous-transform normalization 1/area
    vals = np.fft.ifft2(sym).real * (grid.nx * grid.ny) / grid.area
    return np.fft.fftshift(vals)


def bessel_kernel_positivity(
    params, s: float, grid: Grid2D | None = None, rtol: float = 1e-3
) -> BesselReport:
    """Minimum and ``L^1`` norm of the Bessel-potential kernel ``G_s``.

    ``mass`` is the signed integral (the zero-frequency symbol value).
    ``resolved`` compares against a grid with twice the points and box.
    """
    if not s > 0:
        raise ValueError(f"s must be positive, got {s!r}")
    alpha = _alpha_of(params)
    if grid is None:
        grid = Grid2D(512, 512, 64.0, 64.0)
    reports = []
    for g in (grid, Grid2D(2 * grid.nx, 2 * grid.ny, 2 * grid.lx, 2 * grid.ly)):
        G = bessel_kernel(g, alpha, s)
        reports.append(
            (float(G.min()), float(np.abs(G).sum() * g.cell), float(G.sum() * g.cell))
        )
    (m0, l0, s0), (m1, l1, s1) = reports
    return BesselReport(
        min_value=m0,
        l1_norm=l0,
        mass=s0,
        resolved=abs(l1 - l0) <= rtol and abs(m1 - m0) <= max(rtol * abs(m0), 1e-6),
    )


# ---------------------------------------------------------------------------
# Gagliardo-Nirenberg quotient


def gn_theta(alpha, s: float, q: float, p: float = 2.0) -> float:
    """Interpolation exponent from ``s theta = (1 + 2/alpha)(1/p - 1/q)``."""
    alpha = _alpha_of(alpha)
    return (1.0 + 2.0 / alpha) * (1.0 / p - 1.0 / q) / s


def gn_quotient(f: Field2D, alpha, s: float, q: float, p: float = 2.0) -> float:
    """``||f||_q / (|| |grad_alpha|^s f ||_p^theta ||f||_p^(1-theta))``.

    ``theta`` comes from :func:`gn_theta` and is used as computed, even when
    it falls outside ``(0, 1)``.  The zero field gives 0.
    """
    from .grid import lp_norm

    th = gn_theta(alpha, s, q, p)
    num = lp_norm(f, q)
    if num == 0:
        return 0.0
    d = lp_norm(aniso_potential(f, alpha, s, homogeneous=True), p)
    return float(num / (d**th * lp_norm(f, p) ** (1.0 - th)))
