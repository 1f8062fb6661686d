"""Even homogeneous CZ operators restricted to planar domains.

``T_Omega f(x) = p.v. sum over Omega of K(x - u) f(u)`` is evaluated by a
midpoint rule on the grid samples, with no periodic wrap-around: the sum
runs over planar offsets, so a full-grid evaluation is an aperiodic
convolution done by zero-padded FFT, and probe evaluations are direct sums.
The sample holding the target contributes 0.

Quadrature weights are the exact fractional cell coverage of the domain;
``chi`` (sample point inside) is kept alongside as the 0/1 indicator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from . import kernels
from .grid import Field, TorusGrid, make_grid
from .kernels import smoothstep
from .transforms import CZKernelSpec, beurling, beurling_kernel, lattice_moment

__all__ = [
    "Disk",
    "Rectangle",
    "SmoothedSquare",
    "shape_from_json",
    "DomainMask",
    "BallBump",
    "apply_T_omega",
    "t_chi",
    "MeyerTerms",
    "meyer_decomposition",
    "BumpBoundReport",
    "bump_bound",
    "commutator",
    "pair_quotient_sup",
    "log_lipschitz_constant",
    "holder_constant",
    "CornerScan",
    "corner_scan",
]


# --------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Disk:
    center: complex = 0j
    radius: float = 1.0

    kind = "disk"

    def signed_distance(self, z):
        return np.abs(np.asarray(z) - self.center) - self.radius

    @property
    def diameter(self):
        return 2.0 * self.radius

    @property
    def perimeter(self):
        return 2 * np.pi * self.radius

    def boundary(self, t):
        """Points and outward normals at arclength fraction ``t`` in [0, 1)."""
        u = np.exp(2j * np.pi * np.asarray(t, dtype=float))
        return self.center + self.radius * u, u

    def to_json(self):
        return {"type": "disk", "center": [self.center.real, self.center.imag], "radius": self.radius}


def _box_sd(z, center, half_w, half_h):
    q = np.asarray(z) - center
    dx = np.abs(q.real) - half_w
    dy = np.abs(q.imag) - half_h
    outside = np.hypot(np.maximum(dx, 0), np.maximum(dy, 0))
    return outside + np.minimum(np.maximum(dx, dy), 0.0)


@dataclass(frozen=True)
class Rectangle:
    x0: float = -0.5
    y0: float = -0.5
    x1: float = 0.5
    y1: float = 0.5

    kind = "rectangle"

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("rectangle needs x1 > x0 and y1 > y0")

    def signed_distance(self, z):
        c = 0.5 * (self.x0 + self.x1) + 0.5j * (self.y0 + self.y1)
        return _box_sd(z, c, 0.5 * (self.x1 - self.x0), 0.5 * (self.y1 - self.y0))

    @property
    def corners(self):
        return np.array([self.x0 + 1j * self.y0, self.x1 + 1j * self.y0,
                         self.x1 + 1j * self.y1, self.x0 + 1j * self.y1])

    @property
    def diameter(self):
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    def to_json(self):
        return {"type": "rectangle", "corners": [[self.x0, self.y0], [self.x1, self.y1]]}


@dataclass(frozen=True)
class SmoothedSquare:
    """Square whose corners are replaced by circular arcs (a C^{1,1} boundary)."""

    center: complex = 0j
    side: float = 1.0
    rounding: float | None = None
    epsilon: float = 1.0

    kind = "smoothed_square"

    def __post_init__(self):
        if self.rounding is None:
            object.__setattr__(self, "rounding", 0.1 * self.side)
        if not 0 < self.rounding < 0.5 * self.side:
            raise ValueError("rounding radius must lie in (0, side/2)")

    def signed_distance(self, z):
        core = 0.5 * self.side - self.rounding
        return _box_sd(z, self.center, core, core) - self.rounding

    @property
    def diameter(self):
        core = 0.5 * self.side - self.rounding
        return float(2 * (np.sqrt(2) * core + self.rounding))

    @property
    def perimeter(self):
        core = self.side - 2 * self.rounding
        return 4 * core + 2 * np.pi * self.rounding

    def boundary(self, t):
        """Points and outward normals at arclength fraction ``t`` in [0, 1).

        Walks counterclockwise from the midpoint of the right edge: half
        edge, arc, edge, arc, ... so every piece is either straight or a
        quarter circle.
        """
        t = np.mod(np.asarray(t, dtype=float), 1.0)
        a = 0.5 * self.side - self.rounding
        rho = self.rounding
        edge = 2 * a
        arc = 0.5 * np.pi * rho
        s = t * self.perimeter + 0.5 * edge  # shift so s=0 is the lower-right corner start
        s = np.mod(s, self.perimeter)
        piece = edge + arc
        side_idx = np.floor(s / piece).astype(int) % 4
        rem = s - side_idx * piece
        rot = 1j ** side_idx
        on_edge = rem < edge
        # right edge running upward from (a, -a) in the unrotated frame
        p_edge = (a + rho) + 1j * (-a + rem)
        n_edge = np.ones_like(rem, dtype=complex)
        ang = (rem - edge) / rho
        n_arc = np.exp(1j * ang)
        p_arc = (a + 1j * a) + rho * n_arc
        p = np.where(on_edge, p_edge, p_arc) * rot + self.center
        n = np.where(on_edge, n_edge, n_arc) * rot
        return p, n

    def to_json(self):
        return {"type": "smoothed_square", "center": [self.center.real, self.center.imag],
                "side": self.side, "rounding": self.rounding, "epsilon": self.epsilon}


def shape_from_json(spec) -> Disk | Rectangle | SmoothedSquare:
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("type")
    if kind == "disk":
        c = spec.get("center", [0.0, 0.0])
        return Disk(complex(c[0], c[1]), float(spec.get("radius", 1.0)))
    if kind == "rectangle":
        (x0, y0), (x1, y1) = spec["corners"]
        return Rectangle(float(x0), float(y0), float(x1), float(y1))
    if kind == "smoothed_square":
        c = spec.get("center", [0.0, 0.0])
        return SmoothedSquare(complex(c[0], c[1]), float(spec.get("side", 1.0)),
                              spec.get("rounding"), float(spec.get("epsilon", 1.0)))
    raise ValueError(f"unknown domain type {kind!r}")


# --------------------------------------------------------------------------
# masks


@dataclass(frozen=True, eq=False)
class DomainMask:
    grid: TorusGrid
    shape: Disk | Rectangle | SmoothedSquare
    supersample: int = 32
    chi: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    sd: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.grid
        sd = self.shape.signed_distance(g.z)
        chi = sd < 0
        w = chi.astype(float)
        cut = np.abs(sd) < g.h
        if cut.any():
            off = (np.arange(self.supersample) + 0.5) / self.supersample - 0.5
            zc = g.z[cut]
            acc = np.zeros(zc.shape)
            for a in off:
                sub = zc[:, None] + g.h * (a + 1j * off[None, :])
                acc += (self.shape.signed_distance(sub) < 0).sum(axis=1)
            w[cut] = acc / self.supersample**2
        for arr in (sd, chi, w):
            arr.flags.writeable = False
        object.__setattr__(self, "sd", sd)
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "weights", w)

    def __hash__(self):
        return hash((self.grid, self.shape, self.supersample))

    def __eq__(self, other):
        return isinstance(other, DomainMask) and (self.grid, self.shape, self.supersample) == (
            other.grid, other.shape, other.supersample)

    @property
    def diameter(self) -> float:
        return self.shape.diameter

    def ring(self, width_cells: float = 1.0) -> np.ndarray:
        """Samples within ``width_cells`` cells of the boundary."""
        return np.abs(self.sd) < width_cells * self.grid.h

    def interior(self, width_cells: float = 2.0, width: float | None = None) -> np.ndarray:
        """Samples at least ``width_cells`` cells (or ``width``) inside."""
        w = width_cells * self.grid.h if width is None else width
        return self.sd < -w

    def away(self, width_cells: float = 2.0, width: float | None = None) -> np.ndarray:
        """Samples at least ``width_cells`` cells (or ``width``) from the boundary, either side."""
        w = width_cells * self.grid.h if width is None else width
        return np.abs(self.sd) >= w

    def normal_holder_quotient(self, epsilon: float | None = None, n: int = 2048,
                               max_sep: float | None = None) -> float:
        """Largest ``|N(s) - N(t)| / |p(s) - p(t)|**eps`` over sampled boundary pairs."""
        if not hasattr(self.shape, "boundary"):
            raise ValueError("rectangles have no continuous normal")
        eps = getattr(self.shape, "epsilon", 1.0) if epsilon is None else epsilon
        t = np.arange(n) / n
        p, nrm = self.shape.boundary(t)
        dp = np.abs(p[:, None] - p[None, :])
        dn = np.abs(nrm[:, None] - nrm[None, :])
        live = dp > 0
        if max_sep is not None:
            live &= dp <= max_sep
        return float((dn[live] / dp[live] ** eps).max())

    def to_json(self):
        return self.shape.to_json()


@dataclass(frozen=True)
class BallBump:
    """``(8/15) * smoothstep(1 - |x - c|/r)``: sup <= 1, gradient <= 1/r, support in B(c, r)."""

    center: complex
    radius: float

    def sample(self, grid: TorusGrid) -> Field:
        t = 1.0 - np.abs(grid.z - self.center) / self.radius
        return Field(grid, (8.0 / 15.0) * smoothstep(t))


# --------------------------------------------------------------------------
# restricted operators


def _check_kernel(K: CZKernelSpec):
    K.check_zero_mean()
    if not K.even:
        raise ValueError(f"{K.name}: odd kernels are not supported on domains")


@lru_cache(maxsize=16)
def _padded_kernel_hat(K: CZKernelSpec, grid: TorusGrid) -> np.ndarray:
    N = grid.N
    k = np.arange(-N, N)
    off = (k[:, None] + 1j * k[None, :]) * grid.h
    ker = K(off)
    ker[N, N] = 0.0
    out = np.fft.fft2(np.fft.ifftshift(ker))
    out.flags.writeable = False
    return out


def _values(f, grid):
    if isinstance(f, Field):
        return f.samples
    arr = np.asarray(f, dtype=np.complex128)
    if arr.ndim == 0:
        return np.full((grid.N, grid.N), arr)
    return arr


def apply_T_omega(K: CZKernelSpec, f, omega: DomainMask, points=None, *, correct: bool = True,
                  backend=None):
    """``T_Omega f`` on the whole grid (a Field) or at snapped probe ``points``.

    With ``correct``, the midpoint bias on the locally constant part,
    ``lattice_moment * f(x) * w(x)``, is removed; it vanishes for kernels
    whose angular part is antisymmetric under quarter turns (Beurling,
    ``cos 2 theta``).
    """
    _check_kernel(K)
    g = omega.grid
    local = _values(f, g) * omega.weights
    dens = local * g.cell_area
    mom = lattice_moment(K, 16.0) if correct else 0.0
    if points is None:
        N = g.N
        pad = np.zeros((2 * N, 2 * N), dtype=np.complex128)
        pad[:N, :N] = dens
        out = np.fft.ifft2(np.fft.fft2(pad) * _padded_kernel_hat(K, g))[:N, :N]
        if mom != 0:
            out -= mom * local
        return Field(g, out)
    pts = np.atleast_1d(np.asarray(points, dtype=np.complex128))
    ij = [g.index_of(p) for p in pts]
    targets = np.array([g.z[a, b] for a, b in ij])
    live = dens != 0
    n, c = K.arrays
    out = kernels.pair_sum(targets, g.z[live], dens[live], n, c, tiny=1e-9 * g.h, backend=backend)
    if mom != 0:
        out = out - mom * np.array([local[a, b] for a, b in ij])
    return out


def t_chi(K: CZKernelSpec, omega: DomainMask, points=None, *, correct: bool = True, backend=None):
    return apply_T_omega(K, 1.0, omega, points=points, correct=correct, backend=backend)


# --------------------------------------------------------------------------
# Meyer difference decomposition


def meyer_cutoff(v):
    """1 on ``|v| <= 2``, 0 on ``|v| >= 4``, quintic smoothstep between."""
    return 1.0 - smoothstep((np.abs(v) - 2.0) / 2.0)


@dataclass(frozen=True)
class MeyerTerms:
    g1: complex
    g2: complex
    g3: complex
    g4: complex
    chi_term: complex
    difference: complex
    g4_factor: complex  # int_Omega K(y - u) psi((u - x)/|y - x|) du, bounded by the bump lemma

    @property
    def total(self) -> complex:
        return self.g1 + self.g2 + self.g3 + self.g4 + self.chi_term

    @property
    def reconstruction_error(self) -> float:
        return abs(self.total - self.difference)

    def as_dict(self):
        return {k: complex(getattr(self, k)) for k in ("g1", "g2", "g3", "g4", "chi_term", "difference")}


def meyer_decomposition(K: CZKernelSpec, f, omega: DomainMask, x: complex, y: complex) -> MeyerTerms:
    """Split ``T f(y) - T f(x)`` into the four local terms plus ``f(x)(T chi(y) - T chi(x))``.

    ``x`` and ``y`` are snapped to samples; every term shares one
    quadrature (the uncorrected midpoint sum, ``apply_T_omega(...,
    correct=False)``), so the split is exact up to round-off.
    """
    _check_kernel(K)
    g = omega.grid
    ix, iy = g.index_of(x), g.index_of(y)
    if ix == iy:
        raise ValueError("x and y must be distinct samples")
    zx, zy = g.z[ix], g.z[iy]
    vals = _values(f, g)
    fx, fy = vals[ix], vals[iy]
    live = omega.weights > 0
    u = g.z[live]
    fu = vals[live]
    w = omega.weights[live] * g.cell_area
    Kx = K(zx - u)
    Ky = K(zy - u)
    psi = meyer_cutoff((u - zx) / abs(zy - zx))
    eta = 1.0 - psi
    g1 = np.sum((Ky - Kx) * (fu - fx) * eta * w)
    g2 = -np.sum(Kx * (fu - fx) * psi * w)
    g3 = np.sum(Ky * (fu - fy) * psi * w)
    factor = np.sum(Ky * psi * w)
    g4 = (fy - fx) * factor
    chi_term = fx * (np.sum(Ky * w) - np.sum(Kx * w))
    diff = np.sum(Ky * fu * w) - np.sum(Kx * fu * w)
    return MeyerTerms(complex(g1), complex(g2), complex(g3), complex(g4), complex(chi_term),
                      complex(diff), complex(factor))


# --------------------------------------------------------------------------
# uniform bound for bumps


@dataclass(frozen=True)
class BumpBoundReport:
    per_ball: tuple[tuple[complex, float, float], ...]  # (center, radius, sup)
    per_radius: dict
    overall: float
    spearman: float
    upward_trend: bool
    excluded_ring_cells: float

    def as_dict(self):
        return {
            "per_ball": [[c.real, c.imag, r, s] for c, r, s in self.per_ball],
            "per_radius": {str(r): s for r, s in self.per_radius.items()},
            "overall": self.overall,
            "spearman": self.spearman,
            "upward_trend": self.upward_trend,
            "excluded_ring_cells": self.excluded_ring_cells,
        }


def bump_bound(K: CZKernelSpec, omega: DomainMask, balls, ring_cells: float = 2.0,
               trend_threshold: float = 0.5) -> BumpBoundReport:
    """``sup ||T_Omega phi_B||_inf`` per ball, per radius and overall.

    The sup runs over all samples at least ``ring_cells`` from the boundary.
    ``upward_trend`` is raised when the Spearman correlation between the
    per-radius sup and ``1/r`` exceeds ``trend_threshold``.
    """
    if isinstance(omega.shape, Rectangle):
        raise ValueError("bump bound needs a C^{1,eps} domain; rectangles have corners")
    keep = omega.away(ring_cells)
    per_ball = []
    per_radius: dict = {}
    for ball in balls:
        phi = ball.sample(omega.grid)
        vals = np.abs(apply_T_omega(K, phi, omega).samples[keep])
        s = float(vals.max()) if vals.size else 0.0
        per_ball.append((complex(ball.center), float(ball.radius), s))
        per_radius[float(ball.radius)] = max(per_radius.get(float(ball.radius), 0.0), s)
    radii = sorted(per_radius)
    if len(radii) >= 3:
        rho = float(stats.spearmanr([1.0 / r for r in radii], [per_radius[r] for r in radii]).statistic)
        if not np.isfinite(rho):
            rho = 0.0
    else:
        rho = 0.0
    overall = max((s for _, _, s in per_ball), default=0.0)
    return BumpBoundReport(tuple(per_ball), per_radius, overall, rho, rho > trend_threshold, ring_cells)


# --------------------------------------------------------------------------
# commutator and moduli of continuity


def commutator(mu: Field, f: Field) -> Field:
    """``[mu, B] f = mu B(f) - B(mu f)``."""
    return mu * beurling(f) - beurling(mu * f)


def _lags(max_cells: int):
    out = []
    s = 1
    while s <= max_cells:
        out += [(s, 0), (0, s), (s, s), (s, -s)]
        s *= 2
    return out


def pair_quotient_sup(values: np.ndarray, mask: np.ndarray, h: float, scale, max_dist: float) -> float:
    """``max |F(z1) - F(z2)| / scale(|z1 - z2|)`` over pairs at dyadic lags.

    Lags are ``2**j`` cells along both axes and both diagonals, up to
    ``max_dist`` along an axis; both samples of a pair must lie in ``mask``;
    pairs do not wrap around.  Capping by distance rather than by cell
    count keeps the pair set physically comparable across grid sizes.
    """
    best = 0.0
    N = values.shape[0]
    for da, db in _lags(int(max_dist / h + 1e-9)):
        if abs(da) >= N or abs(db) >= N:
            continue
        a0, a1 = max(0, -da), N - max(0, da)
        b0, b1 = max(0, -db), N - max(0, db)
        v1 = values[a0:a1, b0:b1]
        v2 = values[a0 + da:a1 + da, b0 + db:b1 + db]
        m = mask[a0:a1, b0:b1] & mask[a0 + da:a1 + da, b0 + db:b1 + db]
        if not m.any():
            continue
        dist = h * np.hypot(da, db)
        best = max(best, float(np.abs(v1 - v2)[m].max() / scale(dist)))
    return best


def log_lipschitz_constant(F: Field, mask: np.ndarray, diameter: float, max_dist: float | None = None) -> float:
    """Fitted ``C`` in ``|F(z1) - F(z2)| <= C |z1 - z2| (1 + log(d/|z1 - z2|))``.

    Pairs reach out to ``max_dist`` (default ``d/4``).
    """
    max_dist = 0.25 * diameter if max_dist is None else max_dist
    return pair_quotient_sup(F.samples, mask, F.grid.h,
                             lambda r: r * (1.0 + np.log(diameter / r)), max_dist)


def holder_constant(F: Field, mask: np.ndarray, exponent: float, max_dist: float) -> float:
    return pair_quotient_sup(F.samples, mask, F.grid.h, lambda r: r**exponent, max_dist)


# --------------------------------------------------------------------------
# rectangle corner scan


@dataclass(frozen=True)
class CornerScan:
    rows: tuple[tuple[float, int, float], ...]  # (p, N, value)
    classification: dict
    last_ratio: dict
    threshold: float

    def as_rows(self):
        return [
            {"p": p, "N": N, "value": v, "class": self.classification[p]}
            for p, N, v in self.rows
        ]


def gradient_magnitude(F: Field) -> np.ndarray:
    """Euclidean norm of the centered-difference gradient of complex samples."""
    dx, dy = np.gradient(F.samples, F.grid.h)
    return np.sqrt(np.abs(dx) ** 2 + np.abs(dy) ** 2)


def corner_scan(rect: Rectangle, p_list, L: float | None = None, Ns=(128, 256, 512, 1024),
                K: CZKernelSpec | None = None, ring_cells: float = 2.0,
                threshold: float = 1.1) -> CornerScan:
    """Discrete ``int_Q |grad T chi_Q|**p`` for each ``p`` and grid size.

    Samples within ``ring_cells`` of the boundary are left out.  A ``p`` is
    ``stabilizing`` when the ratio of the last two values is below
    ``threshold`` and ``diverging`` otherwise.
    """
    p_list = [float(p) for p in p_list]
    if not p_list:
        raise ValueError("empty p list")
    for p in p_list:
        if not 1 < p < 3:
            raise ValueError(f"p={p} outside (1, 3)")
    if isinstance(rect, DomainMask):
        rect = rect.shape
    K = beurling_kernel() if K is None else K
    if L is None:
        L = 2.5 * max(abs(rect.x0), abs(rect.x1), abs(rect.y0), abs(rect.y1))
    rows = []
    table: dict = {p: [] for p in p_list}
    for N in Ns:
        mask = DomainMask(make_grid(N, L), rect)
        grad = gradient_magnitude(t_chi(K, mask))
        inner = mask.interior(ring_cells)
        for p in p_list:
            v = float(np.sum(grad[inner] ** p) * mask.grid.cell_area)
            rows.append((p, N, v))
            table[p].append(v)
    last_ratio = {p: (vals[-1] / vals[-2] if len(vals) > 1 and vals[-2] > 0 else float("nan"))
                  for p, vals in table.items()}
    cls = {p: ("stabilizing" if r < threshold else "diverging") for p, r in last_ratio.items()}
    return CornerScan(tuple(rows), cls, last_ratio, threshold)
