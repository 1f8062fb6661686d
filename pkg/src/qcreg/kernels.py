"""Direct-summation kernels: the O(M*S) loops behind every quadrature.

Each kernel exists twice, a numba ``@njit`` version and a chunked numpy
version with identical semantics.  The numba path is used when numba imports
and the environment variable ``QCREG_DISABLE_NUMBA`` is unset (or ``0``);
``backend=`` on each entry point overrides the default, which is how the
benchmark and the cross-backend tests reach both.

Homogeneous kernels are passed as angular Fourier modes:
``K(w) = sum_k c_k (w/|w|)**n_k / |w|**2``, optionally multiplied by a
quintic smoothstep in ``|w|`` rising from 0 at ``r_in`` to 1 at ``r_out``.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "HAVE_NUMBA",
    "pair_sum",
    "difference_sums",
    "smoothstep",
]

ENV_FLAG = "QCREG_DISABLE_NUMBA"

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAVE_NUMBA = False


def _numba_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "0").strip().lower() not in ("", "0", "false", "no")


BACKEND = "numba" if HAVE_NUMBA and not _numba_disabled() else "numpy"

# numpy chunk budget, in complex entries of the (targets x sources) block
_CHUNK = 1 << 21


def smoothstep(t):
    """Quintic smoothstep clamped to [0, 1]: C^2, zero slope at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _resolve(backend):
    backend = BACKEND if backend is None else backend
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


# --------------------------------------------------------------------------
# numpy implementations


def _kernel_numpy(w, modes_n, modes_c, r_in, r_out, tiny):
    r = np.abs(w)
    live = r > tiny
    r_safe = np.where(live, r, 1.0)
    u = np.where(live, w / r_safe, 1.0)
    ang = np.zeros(w.shape, dtype=np.complex128)
    for n, c in zip(modes_n, modes_c):
        ang += c * u ** int(n)
    out = ang / (r_safe * r_safe)
    if r_out > 0.0:
        out *= smoothstep((r - r_in) / (r_out - r_in))
    out[~live] = 0.0
    return out


def _pair_sum_numpy(targets, sources, values, modes_n, modes_c, r_in, r_out, tiny):
    out = np.empty(targets.shape[0], dtype=np.complex128)
    step = max(1, _CHUNK // max(1, sources.shape[0]))
    for lo in range(0, targets.shape[0], step):
        hi = min(lo + step, targets.shape[0])
        w = targets[lo:hi, None] - sources[None, :]
        out[lo:hi] = _kernel_numpy(w, modes_n, modes_c, r_in, r_out, tiny) @ values
    return out


def _difference_sums_numpy(points, f, src, a, b, tiny):
    out = np.empty(src.shape[0], dtype=np.float64)
    step = max(1, _CHUNK // max(1, points.shape[0]))
    for lo in range(0, src.shape[0], step):
        hi = min(lo + step, src.shape[0])
        j = src[lo:hi]
        r = np.abs(points[None, :] - points[j, None])
        df = np.abs(f[None, :] - f[j, None])
        live = r > tiny
        r_safe = np.where(live, r, 1.0)
        term = np.where(live, df**a / r_safe**b, 0.0)
        out[lo:hi] = term.sum(axis=1)
    return out


# --------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _ipow(u, n):
        # u on the unit circle, so u**-1 == conj(u)
        if n < 0:
            u = u.conjugate()
            n = -n
        out = 1.0 + 0.0j
        while n:
            if n & 1:
                out *= u
            u *= u
            n >>= 1
        return out

    @njit(cache=True, inline="always")
    def _kernel_point(w, modes_n, modes_c, r_in, r_out, tiny):
        r2 = w.real * w.real + w.imag * w.imag
        if r2 <= tiny * tiny:
            return 0.0 + 0.0j
        r = np.sqrt(r2)
        u = w / r
        acc = 0.0 + 0.0j
        for m in range(modes_n.shape[0]):
            acc += modes_c[m] * _ipow(u, modes_n[m])
        val = acc / r2
        if r_out > 0.0:
            t = (r - r_in) / (r_out - r_in)
            if t <= 0.0:
                return 0.0 + 0.0j
            if t < 1.0:
                val *= t * t * t * (t * (6.0 * t - 15.0) + 10.0)
        return val

    @njit(parallel=True, cache=True, fastmath=True)
    def _pair_sum_numba(targets, sources, values, modes_n, modes_c, r_in, r_out, tiny):
        out = np.empty(targets.shape[0], dtype=np.complex128)
        for i in prange(targets.shape[0]):
            acc = 0.0 + 0.0j
            t = targets[i]
            for j in range(sources.shape[0]):
                acc += _kernel_point(t - sources[j], modes_n, modes_c, r_in, r_out, tiny) * values[j]
            out[i] = acc
        return out

    @njit(parallel=True, cache=True, fastmath=True)
    def _difference_sums_numba(points, f, src, a, b, tiny):
        out = np.empty(src.shape[0], dtype=np.float64)
        half_a = 0.5 * a
        half_b = 0.5 * b
        square = a == 2.0
        for q in prange(src.shape[0]):
            j = src[q]
            pj = points[j]
            fj = f[j]
            acc = 0.0
            for i in range(points.shape[0]):
                dx = points[i].real - pj.real
                dy = points[i].imag - pj.imag
                r2 = dx * dx + dy * dy
                if r2 <= tiny * tiny:
                    continue
                du = f[i].real - fj.real
                dv = f[i].imag - fj.imag
                d2 = du * du + dv * dv
                if d2 == 0.0:
                    continue
                if square:
                    acc += d2 * np.exp(-half_b * np.log(r2))
                else:
                    acc += np.exp(half_a * np.log(d2) - half_b * np.log(r2))
            out[q] = acc
        return out


# --------------------------------------------------------------------------
# dispatch


def pair_sum(targets, sources, values, modes_n, modes_c, *, r_in=0.0, r_out=0.0,
             tiny=1e-12, backend=None):
    """``out[i] = sum_j K(targets[i] - sources[j]) * values[j]``, K(0) := 0."""
    targets = np.ascontiguousarray(targets, dtype=np.complex128).ravel()
    sources = np.ascontiguousarray(sources, dtype=np.complex128).ravel()
    values = np.ascontiguousarray(values, dtype=np.complex128).ravel()
    modes_n = np.ascontiguousarray(modes_n, dtype=np.int64)
    modes_c = np.ascontiguousarray(modes_c, dtype=np.complex128)
    if sources.shape != values.shape:
        raise ValueError("sources and values differ in length")
    if r_out > 0.0 and not r_out > r_in:
        raise ValueError("cutoff needs r_out > r_in")
    if _resolve(backend) == "numba":
        return _pair_sum_numba(targets, sources, values, modes_n, modes_c,
                               float(r_in), float(r_out), float(tiny))
    return _pair_sum_numpy(targets, sources, values, modes_n, modes_c,
                           float(r_in), float(r_out), float(tiny))


def difference_sums(points, f, a, b, *, sources=None, tiny=1e-12, backend=None):
    """Per-source inner sums ``sum_{i != j} |f_i - f_j|**a / |x_i - x_j|**b``.

    ``sources`` selects the outer indices ``j`` (all points by default).
    """
    points = np.ascontiguousarray(points, dtype=np.complex128).ravel()
    f = np.ascontiguousarray(f, dtype=np.complex128).ravel()
    if sources is None:
        sources = np.arange(points.shape[0], dtype=np.int64)
    sources = np.ascontiguousarray(sources, dtype=np.int64)
    if _resolve(backend) == "numba":
        return _difference_sums_numba(points, f, sources, float(a), float(b), float(tiny))
    return _difference_sums_numpy(points, f, sources, float(a), float(b), float(tiny))
