"""Batched numeric kernels, numba-accelerated with a pure-numpy fallback.

Backend selection happens once at import time: numba is used when it is
importable and the environment variable ``FOUHIT_NO_NUMBA`` is unset (or
set to a falsy value such as ``0``).  Both backends execute the same
floating-point operations in the same order, so results are bit-identical;
``tests/test_kernels.py`` asserts this and ``benchmarks/bench_kernels.py``
compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "backend",
    "fou_transform",
    "path_sups",
    "covariance_from_powers",
]


def _numba_requested() -> bool:
    flag = os.environ.get("FOUHIT_NO_NUMBA", "").strip().lower()
    if flag in {"1", "true", "yes", "on"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


_USE_NUMBA = _numba_requested()


def backend() -> str:
    """Active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if _USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def _fou_transform_np(values, exp_t, exp_neg_t, half_dt, eps, out):
    g = exp_t * values
    csum = np.cumsum(g[:, :-1] + g[:, 1:], axis=1)
    q = half_dt * csum
    out[:, 0] = eps * values[:, 0]
    out[:, 1:] = eps * (values[:, 1:] - exp_neg_t[1:] * q)
    return out


def _path_sups_np(values, out):
    np.max(values, axis=1, out=out)
    return out


def _covariance_np(pow_t, pow_lag, out):
    n = pow_t.shape[0]
    lag = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    out[...] = 0.5 * ((pow_t[:, None] + pow_t[None, :]) - pow_lag[lag])
    return out


NUMPY_IMPLS = {
    "fou": _fou_transform_np,
    "sups": _path_sups_np,
    "cov": _covariance_np,
}


# ---------------------------------------------------------------------------
# numba implementations (compiled lazily on first use)
# ---------------------------------------------------------------------------

def _build_numba_impls():
    from numba import njit, prange

    # Operation order inside each row mirrors the numpy implementations
    # exactly (sequential cumulative sum, scale applied to the running sum)
    # so the two backends stay bit-identical.

    @njit(cache=True, parallel=True)
    def fou(values, exp_t, exp_neg_t, half_dt, eps, out):  # pragma: no cover
        count, n = values.shape
        for p in prange(count):
            out[p, 0] = eps * values[p, 0]
            g_prev = exp_t[0] * values[p, 0]
            csum = 0.0
            for j in range(1, n):
                g = exp_t[j] * values[p, j]
                csum = csum + (g_prev + g)
                q = half_dt * csum
                out[p, j] = eps * (values[p, j] - exp_neg_t[j] * q)
                g_prev = g
        return out

    @njit(cache=True, parallel=True)
    def sups(values, out):  # pragma: no cover
        count, n = values.shape
        for p in prange(count):
            m = values[p, 0]
            for j in range(1, n):
                v = values[p, j]
                if v > m:
                    m = v
            out[p] = m
        return out

    @njit(cache=True, parallel=True)
    def cov(pow_t, pow_lag, out):  # pragma: no cover
        n = pow_t.shape[0]
        for i in prange(n):
            for j in range(n):
                d = i - j if i >= j else j - i
                out[i, j] = 0.5 * ((pow_t[i] + pow_t[j]) - pow_lag[d])
        return out

    return {"fou": fou, "sups": sups, "cov": cov}


_ACTIVE = None


def _impls():
    global _ACTIVE
    if _ACTIVE is None:
        _ACTIVE = _build_numba_impls() if _USE_NUMBA else NUMPY_IMPLS
    return _ACTIVE


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def fou_transform(values: np.ndarray, points: np.ndarray, eps: float) -> np.ndarray:
    """Map a batch of driving paths B to X = eps * (B(t) - e^{-t} Q(t)).

    Q(t_i) is the trapezoidal approximation of the integral of e^u B(u)
    over [0, t_i] on the (uniform) grid ``points``.  ``values`` has one
    path per row; a new array of the same shape is returned.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    half_dt = 0.5 * (points[1] - points[0])
    exp_t = np.exp(points)
    exp_neg_t = np.exp(-points)
    out = np.empty_like(values)
    return _impls()["fou"](values, exp_t, exp_neg_t, half_dt, float(eps), out)


def path_sups(values: np.ndarray) -> np.ndarray:
    """Rowwise maximum of a batch of paths."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.empty(values.shape[0], dtype=np.float64)
    return _impls()["sups"](values, out)


def covariance_from_powers(pow_t: np.ndarray, pow_lag: np.ndarray) -> np.ndarray:
    """Assemble the covariance matrix 0.5*(pow_t[i]+pow_t[j]-pow_lag[|i-j|]).

    ``pow_t`` holds t_i^{2H} and ``pow_lag`` holds (k*dt)^{2H} for lags
    k = 0..n-1 of a uniform grid, both precomputed by the caller so the
    kernel itself is free of transcendental calls.
    """
    pow_t = np.ascontiguousarray(pow_t, dtype=np.float64)
    pow_lag = np.ascontiguousarray(pow_lag, dtype=np.float64)
    out = np.empty((pow_t.shape[0], pow_t.shape[0]), dtype=np.float64)
    return _impls()["cov"](pow_t, pow_lag, out)
