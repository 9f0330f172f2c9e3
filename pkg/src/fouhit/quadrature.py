"""Deterministic quadrature for integrands with endpoint power singularities.

Two 1-D schemes:

* ``adaptive-simpson`` -- classic recursive interval bisection with the
  Richardson-corrected Simpson estimate.  Requires the integrand to be
  finite at both endpoints.
* ``graded-mesh-simpson`` -- geometric panels refined toward the lower
  endpoint, adaptive Simpson on every panel, and a midpoint sliver on the
  innermost panel so the integrand is never evaluated at ``lo`` itself.
  This is the scheme to use for integrands such as u^{2H} (unbounded
  derivatives at 0 for H < 1/2) or sqrt(log(1/x)) (unbounded value at 0).

The 2-D triangle rule maps {0 <= s <= u <= t} onto [0,t] x [0,1] via
s = u*w and applies a tensor product of per-panel Gauss-Legendre rules on
meshes graded toward u=0, w=0 and w=1.  Gauss nodes are interior, so the
mapped integrand is never evaluated on the singular edges.

All routines are pure functions of their arguments and safe to call from
multiple threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "QuadResult",
    "integrate_1d",
    "integrate_2d_triangle",
    "integrate_2d_triangle_result",
]

SCHEMES = ("adaptive-simpson", "graded-mesh-simpson")


class QuadratureError(RuntimeError):
    """Tolerance not met within the subdivision budget.

    Carries the best available estimate and the achieved error bound.
    """

    def __init__(self, message: str, best_estimate: float, error_bound: float):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tolerance: float = 1e-10
    max_subdivisions: int = 200_000
    scheme: str = "adaptive-simpson"

    def __post_init__(self):
        if not (self.abs_tolerance > 0):
            raise ValueError("abs_tolerance must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")


DEFAULT_SPEC = QuadratureSpec()
GRADED_SPEC = QuadratureSpec(scheme="graded-mesh-simpson")

# Number of geometric panels in the graded 1-D mesh.  With ratio 1/2 the
# innermost sliver has width (hi-lo) * 2^-54, below double resolution, so
# the midpoint stub contributes O(1e-16) for any integrable singularity.
_GRADED_PANELS = 54
_GRADED_RATIO = 0.5


def _adaptive_core(f, lo, hi, tol, budget):
    """Adaptive Simpson on [lo, hi]; returns (value, error_bound).

    ``budget`` is a single-element list holding the remaining number of
    bisections; segments whose error estimate still exceeds their local
    tolerance once the budget is exhausted are accepted as-is and their
    estimated error is reported to the caller.
    """
    flo = f(lo)
    fhi = f(hi)
    mid = 0.5 * (lo + hi)
    fmid = f(mid)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    stack = [(lo, hi, flo, fmid, fhi, whole, tol)]
    total = 0.0
    err = 0.0
    while stack:
        a, b, fa, fm, fb, s, seg_tol = stack.pop()
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        h12 = (b - a) / 12.0
        s_left = h12 * (fa + 4.0 * flm + fm)
        s_right = h12 * (fm + 4.0 * frm + fb)
        s2 = s_left + s_right
        delta = (s2 - s) / 15.0
        if abs(delta) <= seg_tol or budget[0] <= 0 or m <= a or b <= m:
            total += s2 + delta
            err += abs(delta)
        else:
            budget[0] -= 1
            half_tol = 0.5 * seg_tol
            stack.append((a, m, fa, flm, fm, s_left, half_tol))
            stack.append((m, b, fm, frm, fb, s_right, half_tol))
    return total, err


def _graded_core(f, lo, hi, tol, budget):
    width = hi - lo
    offsets = width * _GRADED_RATIO ** np.arange(_GRADED_PANELS, -1, -1.0)
    edges = lo + offsets
    edges[-1] = hi
    # Midpoint stub on [lo, edges[0]]: f(lo) may be infinite, the stub is not.
    stub_width = edges[0] - lo
    stub = stub_width * f(lo + 0.5 * stub_width)
    total = stub
    err = abs(stub)
    for a, b in zip(edges[:-1], edges[1:]):
        seg_tol = 0.5 * tol * (b - a) / width
        value, seg_err = _adaptive_core(f, a, b, seg_tol, budget)
        total += value
        err += seg_err
    return total, err


def integrate_1d(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """Integrate ``f`` over [lo, hi] to ``spec.abs_tolerance``.

    Returns 0.0 exactly when lo == hi.  Raises :class:`QuadratureError`
    (carrying the best estimate and achieved error bound) when the
    subdivision budget runs out before the tolerance is met.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("integration endpoints must be finite")
    if lo > hi:
        raise ValueError(f"lo={lo} exceeds hi={hi}")
    if lo == hi:
        return 0.0
    budget = [spec.max_subdivisions]
    if spec.scheme == "graded-mesh-simpson":
        value, err = _graded_core(f, lo, hi, spec.abs_tolerance, budget)
    else:
        value, err = _adaptive_core(f, lo, hi, spec.abs_tolerance, budget)
    if not (err <= spec.abs_tolerance):  # also catches NaN from a bad integrand
        raise QuadratureError(
            f"subdivision budget exhausted: error bound {err:.3e} exceeds "
            f"tolerance {spec.abs_tolerance:.3e}",
            best_estimate=value,
            error_bound=err,
        )
    return float(value)


# ---------------------------------------------------------------------------
# 2-D triangle rule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadResult:
    value: float
    error_bound: float
    nodes: int


def _graded_edges(lo, hi, panels, toward_lo):
    width = hi - lo
    offsets = width * _GRADED_RATIO ** np.arange(panels, -1, -1.0)
    if toward_lo:
        edges = lo + offsets
        edges = np.concatenate(([lo], edges))
    else:
        edges = hi - offsets[::-1]
        edges = np.concatenate((edges, [hi]))
    edges[0] = lo
    edges[-1] = hi
    return edges


def _panel_gauss(edges, order):
    """Gauss-Legendre nodes/weights of given order on every panel."""
    x, w = np.polynomial.legendre.leggauss(order)
    a = edges[:-1]
    b = edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights

_U_PANELS = 40
_W_PANELS = 34
_GAUSS_LADDER = (6, 10, 14, 18)


def integrate_2d_triangle_result(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    t: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> QuadResult:
    """Integrate ``f(u, s)`` over the triangle {0 <= s <= u <= t}.

    ``f`` must accept equal-shaped numpy arrays and evaluate elementwise.
    The achieved error bound (difference of the last two refinement
    levels) is reported in the result.  Only ``spec.abs_tolerance`` is
    consulted here; the refinement ladder of Gauss orders is fixed and
    ``spec.scheme``/``max_subdivisions`` apply to the 1-D routines.
    """
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"t must be finite and >= 0, got {t}")
    if t == 0:
        return QuadResult(0.0, 0.0, 0)

    u_edges = _graded_edges(0.0, t, _U_PANELS, toward_lo=True)
    w_lo = _graded_edges(0.0, 0.5, _W_PANELS, toward_lo=True)
    w_hi = _graded_edges(0.5, 1.0, _W_PANELS, toward_lo=False)
    w_edges = np.concatenate((w_lo, w_hi[1:]))

    previous = None
    nodes_used = 0
    best = 0.0
    err = math.inf
    for order in _GAUSS_LADDER:
        u_nodes, u_weights = _panel_gauss(u_edges, order)
        w_nodes, w_weights = _panel_gauss(w_edges, order)
        shape = (u_nodes.size, w_nodes.size)
        uu = np.broadcast_to(u_nodes[:, None], shape)
        ss = u_nodes[:, None] * w_nodes[None, :]
        values = f(uu, ss)
        # Jacobian of s = u*w is u.
        best = float((u_weights * u_nodes) @ values @ w_weights)
        nodes_used += shape[0] * shape[1]
        if previous is not None:
            err = abs(best - previous)
            if err <= spec.abs_tolerance:
                return QuadResult(best, err, nodes_used)
        previous = best
    raise QuadratureError(
        f"triangle rule did not converge to {spec.abs_tolerance:.3e} "
        f"(last refinement difference {err:.3e})",
        best_estimate=best,
        error_bound=err,
    )


def integrate_2d_triangle(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    t: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    return integrate_2d_triangle_result(f, t, spec).value
