"""Fourier-multiplier singular integrals on the torus and planar CZ kernels."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import kernels
from .grid import Field, TorusGrid, apply_symbol

__all__ = [
    "FourierMultiplier",
    "BEURLING",
    "CAUCHY",
    "beurling",
    "cauchy",
    "beurling_iter",
    "beurling_eta",
    "bessel_potential",
    "riesz_potential",
    "fractional_laplacian",
    "CZKernelSpec",
    "beurling_kernel",
    "iterated_beurling_kernel",
    "cos2_kernel",
    "cz_constant",
    "lattice_moment",
    "kernel_quadrature",
]


@dataclass(frozen=True)
class FourierMultiplier:
    """A symbol ``m(zeta)`` applied by FFT.

    ``symbol`` maps a grid to the symbol on ``grid.zeta``; the zero mode is
    overwritten with ``zero_mode`` and, unless ``even``, the Nyquist bins are
    zeroed.
    """

    name: str
    symbol: Callable[[TorusGrid], np.ndarray]
    zero_mode: complex = 0.0
    even: bool = True
    bound: float | None = None

    def evaluate(self, grid: TorusGrid) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.array(self.symbol(grid), dtype=np.complex128)
        m[0, 0] = self.zero_mode
        if not self.even:
            m[grid.nyquist] = 0.0
        return m

    def __call__(self, f: Field) -> Field:
        return apply_symbol(f, _cached_symbol(self, f.grid), even=True)

    def as_field(self, grid: TorusGrid) -> Field:
        """The symbol itself as a Field on the frequency layout (for dumps)."""
        return Field(grid, self.evaluate(grid))


@lru_cache(maxsize=64)
def _cached_symbol(mult: FourierMultiplier, grid: TorusGrid) -> np.ndarray:
    m = mult.evaluate(grid)
    m.flags.writeable = False
    return m


def _unimodular(grid, power=1):
    zeta = grid.zeta
    return (np.conj(zeta) / zeta) ** power


BEURLING = FourierMultiplier("beurling", _unimodular, 0.0, even=True, bound=1.0)
CAUCHY = FourierMultiplier("cauchy", lambda g: 1.0 / (np.pi * 1j * g.zeta), 0.0, even=False)


def beurling(f: Field) -> Field:
    return BEURLING(f)


def cauchy(f: Field) -> Field:
    return CAUCHY(f)


@lru_cache(maxsize=32)
def _beurling_power(m: int) -> FourierMultiplier:
    return FourierMultiplier(f"beurling^{m}", lambda g: _unimodular(g, m), 0.0, even=True, bound=1.0)


def beurling_iter(f: Field, m: int) -> Field:
    if int(m) != m or m < 1:
        raise ValueError(f"iteration count must be a positive integer, got {m}")
    return _beurling_power(int(m))(f)


@lru_cache(maxsize=32)
def _bessel(s: float) -> FourierMultiplier:
    return FourierMultiplier(
        f"bessel[{s}]", lambda g: (1.0 + (2 * np.pi * g.xi_abs) ** 2) ** (-0.5 * s), 1.0, bound=1.0
    )


def bessel_potential(f: Field, s: float) -> Field:
    if not s > 0:
        raise ValueError(f"Bessel order must be positive, got {s}")
    return _bessel(float(s))(f)


def _check_alpha(alpha):
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")


@lru_cache(maxsize=32)
def _riesz(alpha: float, inverse: bool) -> FourierMultiplier:
    sign = 1.0 if inverse else -1.0
    name = f"fraclap[{alpha}]" if inverse else f"riesz[{alpha}]"
    return FourierMultiplier(name, lambda g: (2 * np.pi * g.xi_abs) ** (sign * alpha), 0.0)


def riesz_potential(f: Field, alpha: float) -> Field:
    """Multiplier ``|2 pi xi|**-alpha``; the mean is dropped."""
    _check_alpha(alpha)
    return _riesz(float(alpha), False)(f)


def fractional_laplacian(f: Field, alpha: float) -> Field:
    """``(-Laplacian)**(alpha/2)``, the inverse of :func:`riesz_potential`."""
    _check_alpha(alpha)
    return _riesz(float(alpha), True)(f)


# --------------------------------------------------------------------------
# regularized Beurling transform


@lru_cache(maxsize=16)
def _eta_kernel_hat(grid: TorusGrid, eta: float) -> np.ndarray:
    k = grid.k
    offs = (k[:, None] + 1j * k[None, :]) * grid.h
    r = np.abs(offs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ker = -kernels.smoothstep((r - 0.5 * eta) / (0.5 * eta)) / (np.pi * offs**2)
    ker[0, 0] = 0.0
    # keep the offset set symmetric under quarter turns
    ker[k == -grid.N // 2, :] = 0.0
    ker[:, k == -grid.N // 2] = 0.0
    out = np.fft.fft2(ker) * grid.cell_area
    out.flags.writeable = False
    return out


def beurling_eta(f: Field, eta: float) -> Field:
    """Discrete periodic convolution with ``-phi_eta(|w|) / (pi w**2)``.

    ``phi_eta`` is the quintic smoothstep from 0 at ``|w| = eta/2`` to 1 at
    ``|w| = eta``.  Requires at least four cells per ``eta``.
    """
    g = f.grid
    if not eta >= 4 * g.h * (1 - 1e-12):
        raise ValueError(f"eta={eta} is below 4 grid cells ({4 * g.h})")
    spec = np.fft.fft2(f.samples) * _eta_kernel_hat(g, float(eta))
    return Field(g, np.fft.ifft2(spec))


# --------------------------------------------------------------------------
# homogeneous Calderon-Zygmund kernels


@dataclass(frozen=True)
class CZKernelSpec:
    """``K(x) = omega(theta) / |x|**2`` with ``omega = sum_n c_n exp(i n theta)``."""

    modes_n: tuple[int, ...]
    modes_c: tuple[complex, ...]
    name: str = "kernel"
    even: bool = field(init=False)
    circle_mean: complex = field(init=False)

    def __post_init__(self):
        if len(self.modes_n) != len(self.modes_c):
            raise ValueError("mode index and coefficient lists differ in length")
        object.__setattr__(self, "modes_n", tuple(int(n) for n in self.modes_n))
        object.__setattr__(self, "modes_c", tuple(complex(c) for c in self.modes_c))
        object.__setattr__(self, "even", all(n % 2 == 0 for n, c in self._live()))
        mean = sum((c for n, c in self._live() if n == 0), 0j)
        object.__setattr__(self, "circle_mean", complex(mean))

    def _live(self):
        return [(n, c) for n, c in zip(self.modes_n, self.modes_c) if abs(c) > 1e-14]

    @classmethod
    def from_omega(cls, omega: Callable, n_theta: int = 256, name: str = "kernel",
                   tol: float = 1e-13) -> "CZKernelSpec":
        """Expand a sampled angular profile into Fourier modes."""
        theta = 2 * np.pi * np.arange(n_theta) / n_theta
        coef = np.fft.fft(np.asarray(omega(theta), dtype=np.complex128)) / n_theta
        n = np.fft.fftfreq(n_theta, d=1.0 / n_theta).round().astype(int)
        scale = max(np.abs(coef).max(), 1e-300)
        keep = np.abs(coef) > tol * scale
        keep[0] = True
        return cls(tuple(n[keep]), tuple(coef[keep]), name=name)

    @property
    def arrays(self):
        n = np.array(self.modes_n, dtype=np.int64)
        c = np.array(self.modes_c, dtype=np.complex128)
        return n, c

    def omega(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape, dtype=np.complex128)
        for n, c in zip(self.modes_n, self.modes_c):
            out += c * np.exp(1j * n * theta)
        return out

    def omega_prime(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape, dtype=np.complex128)
        for n, c in zip(self.modes_n, self.modes_c):
            out += 1j * n * c * np.exp(1j * n * theta)
        return out

    def __call__(self, w):
        """Kernel values at complex offsets; ``K(0)`` is 0."""
        w = np.asarray(w, dtype=np.complex128)
        n, c = self.arrays
        return kernels._kernel_numpy(w, n, c, 0.0, 0.0, 0.0)

    def reflected(self) -> "CZKernelSpec":
        """The kernel ``x -> K(-x)``."""
        return CZKernelSpec(self.modes_n, tuple(c * (-1) ** n for n, c in zip(self.modes_n, self.modes_c)),
                            name=f"{self.name}(-x)")

    def check_zero_mean(self, tol: float = 1e-10):
        if abs(self.circle_mean) > tol:
            raise ValueError(f"{self.name}: angular part has nonzero circle mean {self.circle_mean:.3g}")


def beurling_kernel() -> CZKernelSpec:
    """``-1/(pi z**2)``."""
    return CZKernelSpec((-2,), (-1.0 / np.pi,), name="beurling")


def iterated_beurling_kernel(m: int) -> CZKernelSpec:
    """Kernel of the m-th power: ``(-1)**m m conj(z)**(m-1) / (pi z**(m+1))``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return CZKernelSpec((-2 * m,), ((-1) ** m * m / np.pi,), name=f"beurling^{m}")


def cos2_kernel() -> CZKernelSpec:
    """Real even kernel ``cos(2 theta) / (pi |x|**2)``."""
    c = 0.5 / np.pi
    return CZKernelSpec((2, -2), (c, c), name="cos2")


def _jacobian_norm(a, b):
    # spectral norm of the real 2x2 matrix whose columns are the complex
    # directional derivatives a, b along an orthonormal frame: |f_z| + |f_zbar|
    return 0.5 * (np.abs(a - 1j * b) + np.abs(a + 1j * b))


def cz_constant(K: CZKernelSpec, n_theta: int = 8192) -> float:
    """``sup |K(x)| |x|**2 + sup |grad K(x)| |x|**3`` on a dense angular grid.

    ``|grad K|`` is the operator norm of the real Jacobian of ``K`` viewed as
    a map R^2 -> R^2.  Both terms are degree-0 homogeneous, so the unit
    circle suffices; there the radial derivative is ``-2 omega`` and the
    tangential one is ``omega'``.
    """
    K.check_zero_mean()
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    om = K.omega(theta)
    grad = _jacobian_norm(-2.0 * om, K.omega_prime(theta))
    return float(np.abs(om).max() + grad.max())


# --------------------------------------------------------------------------
# direct quadrature of homogeneous kernels against grid data


@lru_cache(maxsize=64)
def lattice_moment(K: CZKernelSpec, radius_cells: float) -> complex:
    """``sum_n K(n) g(|n|)`` over the unit lattice, ``n != 0``.

    ``g`` is 1 up to ``radius_cells/2`` and falls to 0 at ``radius_cells``
    by a quintic smoothstep.  The continuum integral of ``K g`` is zero,
    so this is exactly the error a midpoint sum makes on a constant.
    Kernels with quarter-turn antisymmetric angular part give 0.
    """
    R = float(radius_cells)
    m = int(np.ceil(R))
    idx = np.arange(-m, m + 1)
    n = idx[:, None] + 1j * idx[None, :]
    g = 1.0 - kernels.smoothstep((np.abs(n) - 0.5 * R) / (0.5 * R))
    return complex(np.sum(K(n) * g))


def kernel_quadrature(K: CZKernelSpec, f: Field, points, *, correct: bool = True,
                      radius_cells: float = 16.0, backend=None) -> np.ndarray:
    """Midpoint sum ``sum_w K(z - w) f(w) h**2`` over all samples, no wrap-around.

    ``points`` are snapped to the nearest grid samples (the singular cell is
    the one holding the target and contributes 0).  With ``correct`` the
    midpoint error on the locally constant part, ``f(z) * lattice_moment``,
    is subtracted.
    """
    g = f.grid
    pts = np.atleast_1d(np.asarray(points, dtype=np.complex128))
    ij = [g.index_of(p) for p in pts]
    targets = np.array([g.z[a, b] for a, b in ij])
    vals = f.samples.ravel()
    live = vals != 0
    n, c = K.arrays
    out = kernels.pair_sum(targets, g.z.ravel()[live], vals[live] * g.cell_area, n, c,
                           tiny=1e-9 * g.h, backend=backend)
    if correct:
        mom = lattice_moment(K, float(radius_cells))
        if mom != 0:
            out = out - np.array([f.samples[a, b] for a, b in ij]) * mom
    return out
