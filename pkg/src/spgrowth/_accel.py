"""Pairwise kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``SPGROWTH_DISABLE_NUMBA`` is unset (or ``0``).  Every public
function takes an optional ``backend`` argument ("numba" or "numpy") so the
two paths can be compared directly; see ``benchmarks/bench_kernels.py``.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_DISABLED = os.environ.get("SPGROWTH_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes", "on")
USE_NUMBA = HAVE_NUMBA and not _DISABLED

# kernel codes shared by both paths
INVERSE_SQUARE = 0
NEG_EXPONENTIAL = 1
POWER_DIFFERENCE = 2
RATIO_PROXIMITY = 3


def _resolve(backend):
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


# ---------------------------------------------------------------- numpy path


def _great_circle_numpy(lat, lon, radius):
    phi = np.radians(lat)
    lam = np.radians(lon)
    dphi = phi[:, None] - phi[None, :]
    dlam = lam[:, None] - lam[None, :]
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi)[:, None] * np.cos(phi)[None, :] * np.sin(dlam / 2.0) ** 2
    np.clip(h, 0.0, 1.0, out=h)
    d = 2.0 * radius * np.arcsin(np.sqrt(h))
    np.fill_diagonal(d, 0.0)
    return d


def _kernel_numpy(x, code, power, eps, cap):
    n = x.shape[0]
    if code == INVERSE_SQUARE:
        with np.errstate(divide="ignore"):
            w = x ** -2.0
    elif code == NEG_EXPONENTIAL:
        w = np.exp(-2.0 * x)
    elif code == POWER_DIFFERENCE:
        gap = np.maximum(np.abs(x[:, None] - x[None, :]), eps)
        w = gap ** (-2.0 * power)
    elif code == RATIO_PROXIMITY:
        ratio = np.minimum(x[:, None] / x[None, :], x[None, :] / x[:, None])
        gap = np.maximum(1.0 - ratio, eps)
        w = gap ** -2.0
    else:
        raise ValueError(f"unknown kernel code {code}")
    w = np.minimum(w, cap)
    w[np.arange(n), np.arange(n)] = 0.0
    return w


def _neg_exp_abs_numpy(z):
    w = np.exp(-2.0 * np.abs(z[:, None] - z[None, :]))
    np.fill_diagonal(w, 0.0)
    return w


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _great_circle_jit(lat, lon, radius):
        n = lat.shape[0]
        d = np.zeros((n, n))
        phi = np.radians(lat)
        lam = np.radians(lon)
        cphi = np.cos(phi)
        for i in range(n):
            for j in range(i + 1, n):
                s1 = np.sin(0.5 * (phi[i] - phi[j]))
                s2 = np.sin(0.5 * (lam[i] - lam[j]))
                h = s1 * s1 + cphi[i] * cphi[j] * s2 * s2
                if h > 1.0:
                    h = 1.0
                dij = 2.0 * radius * np.arcsin(np.sqrt(h))
                d[i, j] = dij
                d[j, i] = dij
        return d

    @njit(cache=True)
    def _distance_kernel_jit(d, code, cap):
        n = d.shape[0]
        w = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                dij = d[i, j]
                if code == 0:
                    v = np.inf if dij == 0.0 else 1.0 / (dij * dij)
                else:
                    v = np.exp(-2.0 * dij)
                w[i, j] = min(v, cap)
        return w

    @njit(cache=True)
    def _vector_kernel_jit(z, code, power, eps, cap):
        n = z.shape[0]
        w = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                if code == 2:
                    gap = max(abs(z[i] - z[j]), eps)
                    v = gap ** (-2.0 * power)
                else:
                    r = min(z[i] / z[j], z[j] / z[i])
                    gap = max(1.0 - r, eps)
                    v = 1.0 / (gap * gap)
                v = min(v, cap)
                w[i, j] = v
                w[j, i] = v
        return w

    @njit(cache=True)
    def _neg_exp_abs_jit(z):
        n = z.shape[0]
        w = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                v = np.exp(-2.0 * abs(z[i] - z[j]))
                w[i, j] = v
                w[j, i] = v
        return w


# ---------------------------------------------------------------- dispatch


def great_circle_matrix(lat, lon, radius, backend=None):
    """Pairwise great-circle distances (same units as ``radius``)."""
    lat = np.ascontiguousarray(lat, dtype=np.float64)
    lon = np.ascontiguousarray(lon, dtype=np.float64)
    if _resolve(backend) == "numba":
        return _great_circle_jit(lat, lon, float(radius))
    return _great_circle_numpy(lat, lon, float(radius))


def pairwise_kernel(x, code, power=1.0, eps=1e-8, cap=1e12, backend=None):
    """Evaluate a kernel on a distance matrix (codes 0, 1) or a vector (codes 2, 3).

    The diagonal of the result is zero and every entry is capped at ``cap``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if _resolve(backend) == "numba":
        if code in (INVERSE_SQUARE, NEG_EXPONENTIAL):
            return _distance_kernel_jit(x, int(code), float(cap))
        return _vector_kernel_jit(x, int(code), float(power), float(eps), float(cap))
    return _kernel_numpy(x, int(code), float(power), float(eps), float(cap))


def neg_exp_abs_difference(z, backend=None):
    """exp(-2|z_i - z_j|) off the diagonal, zero on it."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    if _resolve(backend) == "numba":
        return _neg_exp_abs_jit(z)
    return _neg_exp_abs_numpy(z)
