"""Flat-torus discretization of the plane and its spectral calculus.

Conventions (the single source of truth for every operator in the package):

* samples live at ``x[a, b] = (-L/2 + a*L/N, -L/2 + b*L/N)``; axis 0 is x1,
  axis 1 is x2 and the complex coordinate is ``z = x1 + i*x2``;
* frequencies are ``xi = (k1/L, k2/L)`` with ``k`` in ``{-N/2, ..., N/2-1}``
  and complex frequency ``zeta = xi1 + i*xi2``;
* the Fourier transform is ``fhat(xi) = \\int f(x) exp(-2 pi i x.xi) dx``,
  so ``d/dx_j`` has symbol ``2 pi i xi_j``, the Wirtinger derivative
  ``dbar`` has symbol ``pi i zeta`` and ``d`` has ``pi i conj(zeta)``.

Under these conventions the Beurling transform is exactly the multiplier
``conj(zeta)/zeta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

__all__ = [
    "TorusGrid",
    "Field",
    "make_grid",
    "sample",
    "apply_symbol",
    "fourier_transform",
    "inverse_fourier_transform",
    "d_bar",
    "d",
    "lp_norm",
]


@dataclass(frozen=True)
class TorusGrid:
    """Square torus of side ``L`` sampled on ``N x N`` points."""

    N: int
    L: float

    def __post_init__(self):
        N = self.N
        if isinstance(N, bool) or not isinstance(N, (int, np.integer)):
            raise TypeError(f"N must be an integer, got {N!r}")
        if N < 4 or (N & (N - 1)) != 0:
            raise ValueError(f"N must be a power of two >= 4, got {N}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "N", int(N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        """Grid spacing."""
        return self.L / self.N

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @cached_property
    def x(self) -> np.ndarray:
        """1-D sample coordinates, shared by both axes."""
        return -0.5 * self.L + self.h * np.arange(self.N)

    @cached_property
    def z(self) -> np.ndarray:
        x1, x2 = np.meshgrid(self.x, self.x, indexing="ij")
        out = x1 + 1j * x2
        out.flags.writeable = False
        return out

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N).round().astype(np.int64)

    @cached_property
    def zeta(self) -> np.ndarray:
        """Complex frequency ``xi1 + i*xi2`` on the FFT layout."""
        xi = self.k / self.L
        xi1, xi2 = np.meshgrid(xi, xi, indexing="ij")
        out = xi1 + 1j * xi2
        out.flags.writeable = False
        return out

    @cached_property
    def xi_abs(self) -> np.ndarray:
        out = np.abs(self.zeta)
        out.flags.writeable = False
        return out

    @cached_property
    def nyquist(self) -> np.ndarray:
        """Bins with an unmatched ``k = -N/2`` component."""
        k1, k2 = np.meshgrid(self.k, self.k, indexing="ij")
        out = (k1 == -self.N // 2) | (k2 == -self.N // 2)
        out.flags.writeable = False
        return out

    def index_of(self, point: complex) -> tuple[int, int]:
        """Nearest sample index to a point of the plane."""
        a = int(round((point.real + 0.5 * self.L) / self.h)) % self.N
        b = int(round((point.imag + 0.5 * self.L) / self.h)) % self.N
        return a, b


def make_grid(N: int, L: float) -> TorusGrid:
    return TorusGrid(N, L)


class Field:
    """Immutable complex samples on a :class:`TorusGrid`."""

    __slots__ = ("grid", "samples")

    def __init__(self, grid: TorusGrid, samples):
        arr = np.array(samples, dtype=np.complex128, copy=True)
        if arr.ndim == 0:
            arr = np.full((grid.N, grid.N), arr, dtype=np.complex128)
        if arr.shape != (grid.N, grid.N):
            raise ValueError(f"samples shape {arr.shape} does not match grid N={grid.N}")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    def __repr__(self):
        return f"Field(N={self.grid.N}, L={self.grid.L})"

    # arithmetic -----------------------------------------------------------
    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.samples
        return other

    def __add__(self, other):
        return Field(self.grid, self.samples + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.samples - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.samples)

    def __mul__(self, other):
        return Field(self.grid, self.samples * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.samples / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.samples)

    def conj(self) -> Field:
        return Field(self.grid, np.conj(self.samples))

    def abs(self) -> np.ndarray:
        return np.abs(self.samples)

    def mean(self) -> complex:
        return complex(self.samples.mean())

    def sup(self) -> float:
        return float(np.abs(self.samples).max())

    def reflect(self) -> Field:
        """The field ``z -> f(conj(z))`` sampled on the same grid."""
        return Field(self.grid, np.roll(self.samples[:, ::-1], 1, axis=1))


def sample(grid: TorusGrid, fn: Callable) -> Field:
    """Evaluate ``fn(x1, x2)`` on every sample point."""
    x1 = grid.z.real
    x2 = grid.z.imag
    values = np.broadcast_to(np.asarray(fn(x1, x2), dtype=np.complex128), x1.shape)
    return Field(grid, values)


def apply_symbol(f: Field, symbol: np.ndarray, even: bool) -> Field:
    """Apply a frequency-domain symbol laid out like ``grid.zeta``.

    Symbols that are not even in ``xi`` get their Nyquist bins zeroed.
    """
    spec = np.fft.fft2(f.samples) * symbol
    if not even:
        spec[f.grid.nyquist] = 0.0
    return Field(f.grid, np.fft.ifft2(spec))


def _phase(grid: TorusGrid) -> np.ndarray:
    # exp(-2 pi i x0.xi) for the corner x0 = (-L/2, -L/2)
    sign = np.where(grid.k % 2 == 0, 1.0, -1.0)
    return np.outer(sign, sign)


def fourier_transform(f: Field) -> np.ndarray:
    """Riemann-sum Fourier transform ``fhat(k/L)`` on the FFT layout."""
    g = f.grid
    return g.cell_area * _phase(g) * np.fft.fft2(f.samples)


def inverse_fourier_transform(grid: TorusGrid, fhat: np.ndarray) -> Field:
    raw = np.asarray(fhat) * _phase(grid) / grid.cell_area
    return Field(grid, np.fft.ifft2(raw))


def d_bar(f: Field) -> Field:
    return apply_symbol(f, np.pi * 1j * f.grid.zeta, even=False)


def d(f: Field) -> Field:
    return apply_symbol(f, np.pi * 1j * np.conj(f.grid.zeta), even=False)


def lp_norm(f, p: float, weight: float | None = None) -> float:
    """Flat-quadrature L^p norm of a Field or of a raw sample array.

    ``weight`` is the per-sample area and defaults to the grid cell area.
    """
    if isinstance(f, Field):
        values = f.samples
        w = f.grid.cell_area if weight is None else weight
    else:
        values = np.asarray(f)
        if weight is None:
            raise ValueError("weight is required for raw arrays")
        w = weight
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    mag = np.abs(values)
    if np.isinf(p):
        return float(mag.max()) if mag.size else 0.0
    if mag.size == 0:
        return 0.0
    # scale to dodge overflow for large p
    top = mag.max()
    if top == 0:
        return 0.0
    return float(top * (w * np.sum((mag / top) ** p)) ** (1.0 / p))
