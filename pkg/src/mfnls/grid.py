"""Periodic computational box, unitary FFT pair and the complex field container.

The whole-plane problem is truncated to the box ``[-lx, lx) x [-ly, ly)``
sampled on ``nx x ny`` points.  Frequencies are stored in FFT order, so
``xi[0] == eta[0] == 0`` and the unpaired Nyquist mode sits at index
``n // 2``.

Normalization
-------------
Transforms are unitary (``norm="ortho"``).  The discrete L2 norm of a field
is ``sqrt(sum |u|^2 dx dy)`` in physical space and ``sqrt(sum |u_hat|^2 dx dy)``
in spectral space, so Plancherel holds without constants.  Every other module
relies on this convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class Space(enum.Enum):
    PHYSICAL = "physical"
    SPECTRAL = "spectral"


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid on ``[-lx, lx) x [-ly, ly)``.

    Parameters
    ----------
    nx, ny : int
        Even point counts, at least 8.
    lx, ly : float
        Positive half-widths of the box.
    """

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self) -> None:
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n!r}")
        for name in ("lx", "ly"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dx(self) -> float:
        return 2.0 * self.lx / self.nx

    @property
    def dy(self) -> float:
        return 2.0 * self.ly / self.ny

    @property
    def cell(self) -> float:
        """Area element ``dx * dy`` used by every Riemann sum."""
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return 4.0 * self.lx * self.ly

    @cached_property
    def x(self) -> np.ndarray:
        return -self.lx + self.dx * np.arange(self.nx)

    @cached_property
    def y(self) -> np.ndarray:
        return -self.ly + self.dy * np.arange(self.ny)

    @cached_property
    def xi(self) -> np.ndarray:
        """Angular frequencies ``pi * j / lx`` in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    @cached_property
    def eta(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.ny, d=self.dy)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates, ``indexing="ij"``."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def freq_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xi, self.eta, indexing="ij")

    @property
    def xi_nyquist(self) -> float:
        return np.pi / self.dx

    @property
    def eta_nyquist(self) -> float:
        return np.pi / self.dy

    def refined(self, factor: int = 2) -> "Grid2D":
        """Same box, ``factor`` times as many points per axis."""
        return Grid2D(self.nx * factor, self.ny * factor, self.lx, self.ly)

    def scaled(self, sx: float, sy: float) -> "Grid2D":
        """Same point counts, box half-widths multiplied by ``sx``, ``sy``."""
        return Grid2D(self.nx, self.ny, self.lx * sx, self.ly * sy)

    @cached_property
    def _shift(self) -> np.ndarray:
        return np.exp(1j * np.add.outer(self.xi * self.lx, self.eta * self.ly))


def make_grid(nx: int, ny: int, lx: float, ly: float) -> Grid2D:
    return Grid2D(int(nx), int(ny), float(lx), float(ly))


@dataclass(frozen=True, eq=False)
class Field2D:
    """Complex scalar field on a :class:`Grid2D`.

    ``data`` holds physical samples ``u(x_j, y_k)`` or, in spectral space,
    unitary DFT coefficients.  Instances are treated as values: every
    operation returns a new field and leaves its inputs untouched.
    """

    grid: Grid2D
    data: np.ndarray
    space: Space = Space.PHYSICAL

    def __post_init__(self) -> None:
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"data shape {self.data.shape} does not match grid {self.grid.shape}"
            )
        if self.data.dtype != np.complex128:
            object.__setattr__(self, "data", self.data.astype(np.complex128))

    @classmethod
    def from_function(cls, grid: Grid2D, func) -> "Field2D":
        X, Y = grid.mesh()
        return cls(grid, np.asarray(func(X, Y), dtype=np.complex128))

    @classmethod
    def zeros(cls, grid: Grid2D) -> "Field2D":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @property
    def is_physical(self) -> bool:
        return self.space is Space.PHYSICAL

    def physical(self) -> "Field2D":
        return self if self.is_physical else to_physical(self)

    def spectral(self) -> "Field2D":
        return self if not self.is_physical else to_spectral(self)

    def with_data(self, data: np.ndarray) -> "Field2D":
        return Field2D(self.grid, data, self.space)

    def __add__(self, other: "Field2D") -> "Field2D":
        other = _match(self, other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "Field2D") -> "Field2D":
        other = _match(self, other)
        return self.with_data(self.data - other.data)

    def __mul__(self, c) -> "Field2D":
        return self.with_data(self.data * c)

    __rmul__ = __mul__

    def conj(self) -> "Field2D":
        """Complex conjugate in physical space."""
        u = self.physical()
        return u.with_data(np.conj(u.data))

    def flip(self) -> "Field2D":
        """Coordinate reflection ``(x, y) -> (-x, -y)`` on the periodic lattice."""
        u = self.physical()
        return u.with_data(np.roll(u.data[::-1, ::-1], 1, axis=(0, 1)))


def _match(a: Field2D, b: Field2D) -> Field2D:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    return b if b.space is a.space else (b.physical() if a.is_physical else b.spectral())


def to_spectral(f: Field2D) -> Field2D:
    if f.space is not Space.PHYSICAL:
        raise ValueError("to_spectral expects a field in physical representation")
    # the phase ramp references coefficients to x = y = 0 instead of the box
    # corner, matching the phases of the continuous transform
    data = np.fft.fft2(f.data, norm="ortho") * f.grid._shift
    return Field2D(f.grid, data, Space.SPECTRAL)


def to_physical(f: Field2D) -> Field2D:
    if f.space is not Space.SPECTRAL:
        raise ValueError("to_physical expects a field in spectral representation")
    data = np.fft.ifft2(f.data * np.conj(f.grid._shift), norm="ortho")
    return Field2D(f.grid, data, Space.PHYSICAL)


def apply_multiplier(f: Field2D, symbol: np.ndarray) -> Field2D:
    """Return ``F^{-1} symbol F f`` in the representation ``f`` came in."""
    g = f.spectral().with_data(f.spectral().data * symbol)
    return g if not f.is_physical else to_physical(g)


def lp_norm(f: Field2D, q: float) -> float:
    """Riemann-sum ``L^q`` norm ``(sum |f|^q dx dy)^(1/q)``; sup norm for ``q = inf``."""
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q!r}")
    a = np.abs(f.physical().data)
    if np.isinf(q):
        return float(a.max())
    if q == 2:
        return float(np.sqrt(np.sum(a * a) * f.grid.cell))
    return float((np.sum(a**q) * f.grid.cell) ** (1.0 / q))


def l2_norm(f: Field2D) -> float:
    """Discrete L2 norm evaluated in whichever space ``f`` is in."""
    return float(np.sqrt(np.sum(np.abs(f.data) ** 2) * f.grid.cell))


def inner(f: Field2D, g: Field2D) -> complex:
    """``<f, g> = sum f conj(g) dx dy``."""
    g = _match(f, g)
    return complex(np.sum(f.data * np.conj(g.data)) * f.grid.cell)
