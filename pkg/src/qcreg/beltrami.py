"""Neumann-series solution of ``(I - mu B) h = mu`` and the principal map.

The principal solution of ``dbar phi = mu * d phi`` is ``phi = z + C(h)``.
On the torus the displacement ``C(h)`` is mean-free, which fixes the
additive constant that the planar normalization ``z + O(1/z)`` would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, TorusGrid, d, d_bar, lp_norm, sample
from .kernels import smoothstep
from .transforms import beurling, cauchy

__all__ = [
    "BeltramiCoefficient",
    "PrincipalSolution",
    "ConvergenceError",
    "disk_coefficient",
    "bump_coefficient",
    "solve_h",
    "residual",
    "beltrami_residual",
    "distortion_report",
    "default_max_iter",
]


class ConvergenceError(RuntimeError):
    """Neumann iteration hit ``max_iter`` before reaching the tolerance."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = list(residuals)

    @property
    def last_residual(self):
        return self.residuals[-1] if self.residuals else float("nan")


@dataclass(frozen=True)
class BeltramiCoefficient:
    field: Field
    k: float = field(init=False)
    support_radius: float = field(init=False)

    def __post_init__(self):
        vals = self.field.samples
        if not np.all(np.isfinite(vals)):
            raise ValueError("Beltrami coefficient has non-finite samples")
        k = float(np.abs(vals).max())
        if k >= 1.0:
            raise ValueError(f"sup |mu| = {k:.6g} must be < 1")
        g = self.field.grid
        nz = np.abs(vals) > 0
        rad = float(np.abs(g.z[nz]).max()) if nz.any() else 0.0
        if rad > 0.25 * g.L + 1e-12:
            raise ValueError(f"support radius {rad:.4g} exceeds L/4 = {0.25 * g.L:.4g}")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "support_radius", rad)

    @property
    def grid(self) -> TorusGrid:
        return self.field.grid

    def conj_reflected(self) -> "BeltramiCoefficient":
        """Coefficient ``conj(mu(conj z))``, whose solution is ``conj(h(conj z))``."""
        return BeltramiCoefficient(self.field.reflect().conj())


def disk_coefficient(grid: TorusGrid, k: float, radius: float = 1.0, center: complex = 0j) -> BeltramiCoefficient:
    """``k`` times the indicator of an open disk, sampled pointwise."""
    return BeltramiCoefficient(
        sample(grid, lambda x, y: k * (np.abs(x + 1j * y - center) < radius))
    )


def bump_profile(r, radius, smoothness):
    """C-infinity radial profile: 1 up to ``radius*(1-smoothness)``, 0 from ``radius`` on."""
    if not 0 < smoothness <= 1:
        raise ValueError("smoothness must lie in (0, 1]")
    inner = radius * (1.0 - smoothness)
    t = np.clip((np.asarray(r, dtype=float) - inner) / (radius - inner), 0.0, 1.0)
    out = np.zeros_like(t)
    live = t < 1
    tl = t[live]
    out[live] = np.exp(1.0 - 1.0 / (1.0 - tl * tl))
    return out


def bump_coefficient(grid: TorusGrid, k: float, radius: float = 1.0, smoothness: float = 1.0,
                     center: complex = 0j, phase: float = 0.0) -> BeltramiCoefficient:
    return BeltramiCoefficient(
        sample(grid, lambda x, y: k * np.exp(1j * phase) * bump_profile(np.abs(x + 1j * y - center), radius, smoothness))
    )


@dataclass(frozen=True)
class PrincipalSolution:
    mu: BeltramiCoefficient
    h: Field
    displacement: Field
    iterations: int
    residuals: tuple[float, ...]

    @property
    def d_phi(self) -> Field:
        """``d phi = 1 + B(h)``."""
        return 1.0 + beurling(self.h)

    @property
    def dbar_phi(self) -> Field:
        return self.h

    @property
    def phi(self) -> Field:
        return self.displacement + self.mu.grid.z


def default_max_iter(k: float, tol: float) -> int:
    if k <= 0:
        return 1
    return int(math.ceil(math.log(tol) / math.log(k))) + 20


def residual(mu: BeltramiCoefficient, candidate_h: Field) -> float:
    """``||h - mu B(h) - mu||_2``."""
    m = mu.field if isinstance(mu, BeltramiCoefficient) else mu
    if candidate_h.grid != m.grid:
        raise ValueError("candidate lives on a different grid")
    return lp_norm(candidate_h - m * beurling(candidate_h) - m, 2)


def solve_h(mu: BeltramiCoefficient, tol: float = 1e-10, max_iter: int | None = None) -> PrincipalSolution:
    """Fixed-point iteration ``h <- mu B(h) + mu`` from ``h = mu``.

    Stops once the relative residual ``||(I - mu B) h - mu|| / ||mu||``
    drops to ``tol``.  ``residuals`` records the relative residual of every
    iterate, starting with ``h_0 = mu``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    m = mu.field
    if max_iter is None:
        max_iter = default_max_iter(mu.k, tol)
    norm_mu = lp_norm(m, 2)
    if mu.k == 0 or norm_mu == 0:
        zero = Field(m.grid, 0.0)
        return PrincipalSolution(mu, zero, zero, 1, (0.0,))

    h = m
    history = []
    for it in range(1, max_iter + 1):
        h_next = m * beurling(h) + m
        # h - mu B h - mu = h - h_next
        rel = lp_norm(h - h_next, 2) / norm_mu
        history.append(rel)
        if rel <= tol:
            break
        h = h_next
    else:
        raise ConvergenceError(
            f"no convergence in {max_iter} iterations (last relative residual {history[-1]:.3e})", history
        )
    return PrincipalSolution(mu, h, cauchy(h), it, tuple(history))


def beltrami_residual(sol: PrincipalSolution) -> float:
    """``||dbar phi - mu d phi||_2`` with spectral derivatives of ``phi``.

    ``phi = z + displacement``; the identity map is differentiated exactly
    (``d z = 1``, ``dbar z = 0``) since ``z`` itself is not periodic.
    """
    disp = sol.displacement
    d_phi = 1.0 + d(disp)
    dbar_phi = d_bar(disp) + sol.h.mean()
    return lp_norm(dbar_phi - sol.mu.field * d_phi, 2)


def _jump_layer(mu: Field, width: int, rel_jump: float = 0.25) -> np.ndarray:
    """Cells within ``width`` cells of a jump in ``mu`` larger than ``rel_jump * k``."""
    v = mu.samples
    k = np.abs(v).max()
    if k == 0:
        return np.zeros(v.shape, dtype=bool)
    jump = np.zeros(v.shape, dtype=bool)
    for axis in (0, 1):
        dv = np.abs(np.roll(v, -1, axis=axis) - v) > rel_jump * k
        jump |= dv | np.roll(dv, 1, axis=axis)
    layer = jump.copy()
    for _ in range(width):
        grown = layer.copy()
        for axis in (0, 1):
            grown |= np.roll(layer, 1, axis=axis) | np.roll(layer, -1, axis=axis)
        layer = grown
    return layer


def distortion_report(sol: PrincipalSolution, layer_cells: int = 4, exclude=None) -> dict:
    """Pointwise quasiconformality diagnostics outside a boundary layer.

    The layer is every cell within ``layer_cells`` of a jump of ``mu``;
    ``exclude`` adds an explicit boolean mask.
    """
    d_phi = sol.d_phi.samples
    dbar_phi = sol.h.samples
    mask = ~_jump_layer(sol.mu.field, layer_cells)
    if exclude is not None:
        mask &= ~np.asarray(exclude, dtype=bool)
    abs_d = np.abs(d_phi[mask])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(dbar_phi[mask]) / abs_d
    jac = np.abs(d_phi[mask]) ** 2 - np.abs(dbar_phi[mask]) ** 2
    return {
        "k": sol.mu.k,
        "min_abs_d_phi": float(abs_d.min()),
        "max_mu_eff": float(np.nanmax(ratio)),
        "jacobian_positive_fraction": float(np.mean(jac > 0)),
        "cells_measured": int(mask.sum()),
        "layer_cells": int(layer_cells),
    }
