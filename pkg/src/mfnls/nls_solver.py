"""Strang split-step integrator for the mixed fractional NLS.

Solves ``i u_t = (D1^alpha1 + D2^alpha2) u + mu |u|^(p-1) u`` on the
periodic box.  One step is

1. half nonlinear step ``u <- u exp(-i mu |u|^(p-1) dt/2)`` (exact, since
   the pointwise flow preserves ``|u|``),
2. full linear step in Fourier space, followed by the two-thirds filter,
3. another half nonlinear step.

Mass changes only through the filter; the removed mass is tracked so a
run can report how much of its mass drift is filtering.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Field2D, Grid2D, Space
from .linear_flow import dispersion_relation
from .multipliers import DispersionParams, aniso_symbol, gn_quotient


class NonFiniteError(FloatingPointError):
    """The state acquired NaN or infinite values."""


class TerminationReason(enum.Enum):
    COMPLETED = "completed"
    BLOWUP = "blowup_triggered"
    NAN = "nan_detected"


class GlobalBranch(enum.Enum):
    SUBCRITICAL = "subcritical_global"
    MASS_CRITICAL = "mass_critical_small_data"
    SUPERCRITICAL = "supercritical_small_energy"


DEALIAS_RULES = ("two_thirds", "none")


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-step integration settings.

    Attributes
    ----------
    dt : float
        Time step, positive.
    t_end : float
        Final time, non-negative.  A shorter last step is taken if ``t_end``
        is not a multiple of ``dt``.
    dealias : {"two_thirds", "none"}
    monitor_every : int
        Diagnostics are recorded every this many steps (and at the end).
    blowup_threshold : float or None
        Sup-norm that stops the run; ``None`` means ``blowup_factor`` times
        the initial sup norm.
    blowup_factor : float
    """

    dt: float
    t_end: float
    dealias: str = "two_thirds"
    monitor_every: int = 1
    blowup_threshold: float | None = None
    blowup_factor: float = 1e6

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end!r}")
        if self.dealias not in DEALIAS_RULES:
            raise ValueError(f"dealias must be one of {DEALIAS_RULES}, got {self.dealias!r}")
        if int(self.monitor_every) != self.monitor_every or self.monitor_every < 1:
            raise ValueError(f"monitor_every must be an integer >= 1, got {self.monitor_every!r}")
        if self.blowup_threshold is not None and not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")


@dataclass
class RunRecord:
    """Diagnostic time series of one run.

    ``hs_alpha_half`` is ``|| |grad_alpha|^(alpha1/2) u ||_2``.
    ``filter_loss`` is the mass removed by the dealiasing filter, relative
    to the initial mass.
    """

    params: DispersionParams
    config: SolverConfig
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mass: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    hs_alpha_half: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sup_norm: np.ndarray = field(default_factory=lambda: np.zeros(0))
    terminated_reason: TerminationReason = TerminationReason.COMPLETED
    filter_loss: float = 0.0
    meta: dict = field(default_factory=dict)

    SERIES = ("times", "mass", "energy", "hs_alpha_half", "sup_norm")

    def __post_init__(self) -> None:
        lengths = {len(getattr(self, k)) for k in self.SERIES}
        if len(lengths) > 1:
            raise ValueError("all diagnostic series must share one length")
        for k in self.SERIES:
            setattr(self, k, np.asarray(getattr(self, k), dtype=float))
        if np.any(self.mass < 0):
            raise ValueError("mass series must be non-negative")

    @property
    def completed(self) -> bool:
        return self.terminated_reason is TerminationReason.COMPLETED

    def mass_drift(self) -> float:
        """``max |M(t) - M(0)| / M(0)`` (0 for the zero solution)."""
        if self.mass.size == 0 or self.mass[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.mass - self.mass[0])) / self.mass[0])

    def energy_drift(self) -> float:
        """``max |E(t) - E(0)| / |E(0)|`` (absolute if ``E(0) = 0``)."""
        if self.energy.size == 0:
            return 0.0
        d = np.max(np.abs(self.energy - self.energy[0]))
        e0 = abs(self.energy[0])
        return float(d / e0) if e0 > 0 else float(d)


def mass(u: Field2D) -> float:
    """``int |u|^2``."""
    d = u.physical().data
    return float(np.sum(np.abs(d) ** 2) * u.grid.cell)


def energy(u: Field2D, params: DispersionParams) -> float:
    """Hamiltonian ``1/2 (||D1^(a1/2) u||^2 + ||D2^(a2/2) u||^2) + mu/(p+1) ||u||_(p+1)^(p+1)``."""
    uh = u.spectral().data
    w = dispersion_relation(u.grid, params.alpha1, params.alpha2)
    kinetic = 0.5 * float(np.sum(w * np.abs(uh) ** 2) * u.grid.cell)
    return kinetic + params.mu * potential_term(u, params)


def potential_term(u: Field2D, params: DispersionParams) -> float:
    """``||u||_(p+1)^(p+1) / (p+1)``."""
    a = np.abs(u.physical().data)
    return float(np.sum(a ** (params.p + 1.0)) * u.grid.cell / (params.p + 1.0))


def hs_alpha_half(u: Field2D, params: DispersionParams) -> float:
    """``|| |grad_alpha|^(alpha1/2) u ||_2``."""
    uh = u.spectral().data
    w = aniso_symbol(u.grid, params, params.alpha1 / 2.0, homogeneous=True)
    return float(np.sqrt(np.sum(np.abs(w * uh) ** 2) * u.grid.cell))


def dealias_mask(grid: Grid2D) -> np.ndarray:
    """Keep modes with ``|k| < n/3`` in each index direction (Nyquist dropped)."""
    kx = np.abs(np.fft.fftfreq(grid.nx, d=1.0 / grid.nx))
    ky = np.abs(np.fft.fftfreq(grid.ny, d=1.0 / grid.ny))
    return (kx[:, None] < grid.nx / 3.0) & (ky[None, :] < grid.ny / 3.0)


class _Stepper:
    """Precomputed symbols for repeated Strang steps on raw arrays.

    Works with unshifted unitary FFTs; the phase ramp used by
    :func:`mfnls.grid.to_spectral` cancels for diagonal multipliers.
    """

    def __init__(
        self,
        grid: Grid2D,
        params: DispersionParams,
        dt: float,
        dealias: str = "two_thirds",
        nonlinear: bool = True,
    ):
        self.grid, self.params, self.dt = grid, params, dt
        self.nonlinear = nonlinear
        self.omega = dispersion_relation(grid, params.alpha1, params.alpha2)
        self.mask = dealias_mask(grid) if dealias == "two_thirds" else None
        self.lin = self._linear(dt)
        self.removed = 0.0

    def _linear(self, dt: float) -> np.ndarray:
        lin = np.exp(-1j * dt * self.omega)
        if self.mask is not None:
            lin = lin * self.mask
        return lin

    def _half_nonlinear(self, u: np.ndarray, dt: float) -> np.ndarray:
        if not self.nonlinear:
            return u
        p = self.params.p
        a2 = u.real**2 + u.imag**2
        amp = a2 if p == 3.0 else a2 ** ((p - 1.0) / 2.0)
        return u * np.exp((-0.5j * self.params.mu * dt) * amp)

    def step(self, u: np.ndarray, dt: float | None = None) -> np.ndarray:
        lin = self.lin if dt is None or dt == self.dt else self._linear(dt)
        dt = self.dt if dt is None else dt
        u = self._half_nonlinear(u, dt)
        uh = np.fft.fft2(u, norm="ortho")
        if self.mask is not None:
            self.removed += float(np.sum(np.abs(uh[~self.mask]) ** 2))
        u = np.fft.ifft2(uh * lin, norm="ortho")
        u = self._half_nonlinear(u, dt)
        if not np.all(np.isfinite(u)):
            raise NonFiniteError("non-finite values after Strang step")
        return u


def step_strang(
    u: Field2D,
    params: DispersionParams,
    dt: float,
    dealias: str = "two_thirds",
    nonlinear: bool = True,
) -> Field2D:
    """One Strang step of size ``dt``.

    ``nonlinear=False`` switches the nonlinear substeps off, which reduces
    the step to the (filtered) linear propagator.

    Raises
    ------
    NonFiniteError
        If the result contains NaN or Inf.
    """
    if not u.is_physical:
        raise ValueError("step_strang expects a field in physical representation")
    if not np.all(np.isfinite(u.data)):
        raise NonFiniteError("non-finite input to step_strang")
    st = _Stepper(u.grid, params, dt, dealias, nonlinear)
    return Field2D(u.grid, st.step(u.data))


def evolve(
    u0: Field2D,
    params: DispersionParams,
    config: SolverConfig,
    nonlinear: bool = True,
    callback=None,
) -> tuple[Field2D, RunRecord]:
    """March ``u0`` to ``config.t_end`` (or until blowup / NaN).

    Parameters
    ----------
    u0 : Field2D
    params : DispersionParams
    config : SolverConfig
    nonlinear : bool
        Test hook: ``False`` runs the linear flow through the same code path.
    callback : callable, optional
        Called as ``callback(t, u)`` with the physical array at every
        monitored time; useful for recording snapshots.

    Returns
    -------
    u : Field2D
        Final state (the last finite state if the run stopped early).
    record : RunRecord
    """
    u = u0.physical().data.copy()
    if not np.all(np.isfinite(u)):
        raise NonFiniteError("non-finite initial data")
    grid = u0.grid
    st = _Stepper(grid, params, config.dt, config.dealias, nonlinear)
    n_full = int(math.floor(config.t_end / config.dt + 1e-9))
    rest = config.t_end - n_full * config.dt
    steps = [config.dt] * n_full
    if rest > 1e-12 * max(1.0, config.t_end):
        steps.append(rest)
    sup0 = float(np.abs(u).max())
    thresh = config.blowup_threshold
    if thresh is None:
        thresh = config.blowup_factor * sup0 if sup0 > 0 else math.inf
    m0 = float(np.sum(np.abs(u) ** 2) * grid.cell)

    rows = []

    def monitor(t, data):
        f = Field2D(grid, data)
        rows.append(
            (t, mass(f), energy(f, params), hs_alpha_half(f, params), float(np.abs(data).max()))
        )
        if callback is not None:
            callback(t, data)

    reason = TerminationReason.COMPLETED
    t = 0.0
    monitor(t, u)
    for k, h in enumerate(steps, start=1):
        try:
            new = st.step(u, h)
        except NonFiniteError:
            reason = TerminationReason.NAN
            break
        u = new
        t = t + h
        last = k == len(steps)
        sup = float(np.abs(u).max())
        if sup > thresh:
            monitor(t, u)
            reason = TerminationReason.BLOWUP
            break
        if k % config.monitor_every == 0 or last:
            monitor(t, u)
    cols = list(zip(*rows))
    rec = RunRecord(
        params=params,
        config=config,
        times=np.array(cols[0]),
        mass=np.array(cols[1]),
        energy=np.array(cols[2]),
        hs_alpha_half=np.array(cols[3]),
        sup_norm=np.array(cols[4]),
        terminated_reason=reason,
        filter_loss=st.removed * grid.cell / m0 if m0 > 0 else 0.0,
    )
    return Field2D(grid, u), rec


def time_reversal_defect(u0: Field2D, params: DispersionParams, config: SolverConfig) -> float:
    """Relative L2 error of forward-evolve, conjugate-flip, forward-evolve, conjugate-flip.

    The equation is invariant under ``u(x, y, t) -> conj(u(-x, -y, -t))``,
    so the round trip returns ``u0`` up to the integrator error.
    """
    u1, _ = evolve(u0, params, config)
    u2, _ = evolve(u1.conj().flip(), params, config)
    back = u2.conj().flip()
    d = back - u0.physical()
    return float(np.sqrt(mass(d) / mass(u0)))


def rescale(u: Field2D, params: DispersionParams, lam: float) -> Field2D:
    """Scaling map ``lam^(-alpha1/(p-1)) u(x/lam, y/lam^(alpha1/alpha2))`` on the scaled grid.

    The returned field lives on the box scaled by ``(lam, lam^(alpha1/alpha2))``
    with the same point counts, so the samples are exact.
    """
    sy = lam ** (params.alpha1 / params.alpha2)
    g = u.grid.scaled(lam, sy)
    return Field2D(g, lam ** (-params.alpha1 / (params.p - 1.0)) * u.physical().data)


def classify_global(params: DispersionParams) -> GlobalBranch:
    """Branch of the focusing global-existence trichotomy.

    Decided by the sign of ``(p-1)(1/alpha1 + 1/alpha2) - 2``; exact zero
    (to 1e-12) is the mass-critical case.
    """
    g = growth_exponent(params) - 2.0
    if abs(g) <= 1e-12:
        return GlobalBranch.MASS_CRITICAL
    return GlobalBranch.SUBCRITICAL if g < 0 else GlobalBranch.SUPERCRITICAL


def growth_exponent(params: DispersionParams) -> float:
    """``gamma = (p-1)(1/alpha1 + 1/alpha2)``."""
    return (params.p - 1.0) * (1.0 / params.alpha1 + 1.0 / params.alpha2)


def mass_exponent(params: DispersionParams) -> float:
    """``delta = p + 1 - gamma``.

    Gagliardo-Nirenberg with ``s = alpha1/2``, ``q = p+1`` and ``L^2``
    endpoint gives ``||u||_(p+1)^(p+1) <= C ||grad u||^gamma ||u||_2^delta``
    with ``theta (p+1) = gamma``, hence ``delta = (1 - theta)(p+1)``.
    """
    return params.p + 1.0 - growth_exponent(params)


def gn_energy_constant(params: DispersionParams, fields) -> float:
    """Largest ``||u||_(p+1)^(p+1) / (||grad u||^gamma ||u||_2^delta)`` over ``fields``."""
    s = params.alpha1 / 2.0
    q = params.p + 1.0
    return max(gn_quotient(f, params.alpha, s, q) ** q for f in fields)


@dataclass(frozen=True)
class GrowthCheck:
    """Derivative-growth consistency along a run.

    ``slack`` is ``min_t (C (E0 + h^gamma M^(delta/2)) - h^2)`` over the
    recorded times; the check holds when it is non-negative.
    """

    holds: bool
    slack: float
    constant: float
    gamma: float
    delta: float


def derivative_growth_check(record: RunRecord, gn_constant: float) -> GrowthCheck:
    """Test ``h^2 <= C (E[u0] + h^gamma ||u0||_2^delta)`` along ``record``.

    Here ``h`` is ``hs_alpha_half`` and ``C = max(2, 2 C_GN / (p+1))``, which
    follows from ``h^2 = 2E - 2 mu/(p+1) ||u||_(p+1)^(p+1)`` and the
    Gagliardo-Nirenberg bound with constant ``gn_constant``.
    """
    p = record.params
    gam, dl = growth_exponent(p), mass_exponent(p)
    c = max(2.0, 2.0 * gn_constant / (p.p + 1.0))
    e0 = record.energy[0]
    l2 = math.sqrt(record.mass[0])
    h = record.hs_alpha_half
    slack = c * (abs(e0) + h**gam * l2**dl) - h**2
    m = float(slack.min()) if slack.size else 0.0
    return GrowthCheck(m >= 0.0, m, c, gam, dl)


def with_config(config: SolverConfig, **kw) -> SolverConfig:
    return replace(config, **kw)


__all__ = [
    "GlobalBranch",
    "NonFiniteError",
    "RunRecord",
    "SolverConfig",
    "Space",
    "TerminationReason",
    "classify_global",
    "derivative_growth_check",
    "energy",
    "evolve",
    "hs_alpha_half",
    "mass",
    "rescale",
    "step_strang",
    "time_reversal_defect",
]
