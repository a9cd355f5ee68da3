"""Plain, weighted, and smoothed isotonic projections of grid-sampled functions.

``pav`` is an exact, single-pass pool-adjacent-violators solver for the
weighted isotonic regression

    min sum_i w_i * (x_i - values_i)**2   s.t.  x_1 <= x_2 <= ... <= x_n.

``spav`` adds a squared-increment penalty ``sum_i zeta_i * (x_{i+1} - x_i)**2``
that discourages large jumps; it is solved as an equality-constrained
quadratic program on the pooled block structure, where each equality solve
is a symmetric tridiagonal system (O(n)).

``project`` wraps both for functions sampled on an abscissa grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .errors import NotConvergedError, ValidationError

__all__ = ["GridFunction", "as_weights", "pav", "spav", "project"]


@dataclass(frozen=True)
class GridFunction:
    """A real function sampled on strictly increasing abscissae in (0, 1)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if u.ndim != 1 or v.ndim != 1 or u.size != v.size:
            raise ValidationError("abscissae and values must be 1-d and equally long")
        if u.size < 2:
            raise ValidationError("need at least two grid points")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise ValidationError("grid function contains non-finite entries")
        if u[0] <= 0.0 or u[-1] >= 1.0 or np.any(np.diff(u) <= 0.0):
            raise ValidationError("abscissae must be strictly increasing within (0, 1)")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.u.size


def as_weights(weights, n: int) -> np.ndarray:
    """Validate a weight vector: length ``n``, finite, >= 0, not all zero."""
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if w.ndim != 1 or w.size != n:
        raise ValidationError(f"weights must be a vector of length {n}")
    if not np.isfinite(w).all():
        raise ValidationError("weights contain non-finite entries")
    if np.any(w < 0.0):
        raise ValidationError("weights must be nonnegative")
    if not np.any(w > 0.0):
        raise ValidationError("weights must not be all zero")
    return w


def _validated_values(values) -> np.ndarray:
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("values must be a nonempty 1-d vector")
    if not np.isfinite(v).all():
        raise ValidationError("values contain non-finite entries")
    return v


def _pav_blocks(v: np.ndarray, w: np.ndarray):
    """Pooled block structure of the weighted isotonic regression.

    Returns (ends, means): ``ends[j]`` is the exclusive end index of block j
    and ``means[j]`` its pooled value.  Zero-weight blocks fall back to the
    plain mean, which is one of the (non-unique) minimisers there.
    """
    n = v.size
    ends = np.empty(n, dtype=np.intp)
    means = np.empty(n)
    wsum = np.empty(n)
    wvsum = np.empty(n)
    vsum = np.empty(n)
    m = 0
    for i in range(n):
        bw = w[i]
        bwv = w[i] * v[i]
        bv = v[i]
        end = i + 1
        mu = v[i]  # exact for singleton blocks, so pav is exactly idempotent
        while m > 0 and means[m - 1] > mu:
            m -= 1
            bw += wsum[m]
            bwv += wvsum[m]
            bv += vsum[m]
            start = ends[m - 1] if m > 0 else 0
            mu = bwv / bw if bw > 0.0 else bv / (end - start)
        ends[m] = end
        means[m] = mu
        wsum[m] = bw
        wvsum[m] = bwv
        vsum[m] = bv
        m += 1
    return ends[:m].copy(), means[:m].copy()


def pav(values, weights=None) -> np.ndarray:
    """Weighted isotonic regression via pool-adjacent-violators.

    Parameters
    ----------
    values : array_like
        Data to project onto nondecreasing vectors.
    weights : array_like, optional
        Nonnegative weights, same length; defaults to all-ones.

    Returns
    -------
    ndarray
        The unique minimiser of ``sum w_i (x_i - values_i)**2`` over
        nondecreasing ``x``.  Idempotent: applying it twice is a no-op.
    """
    v = _validated_values(values)
    w = np.ones(v.size) if weights is None else as_weights(weights, v.size)
    if v.size == 1 or np.all(np.diff(v) >= 0.0):
        return v.copy()
    ends, means = _pav_blocks(v, w)
    starts = np.concatenate(([0], ends[:-1]))
    return np.repeat(means, ends - starts)


def spav(values, weights=None, zeta: float = 0.0, u=None) -> np.ndarray:
    """Smoothed isotonic regression with a squared-increment penalty.

    The per-increment penalty coefficients are ``zeta / (u[i+1] - u[i])**2``;
    ``u`` defaults to the uniform midpoint grid on (0, 1), for which the
    coefficient is ``zeta * n**2``.  ``zeta = 0`` reproduces :func:`pav`
    exactly.
    """
    v = _validated_values(values)
    if not np.isfinite(zeta) or zeta < 0.0:
        raise ValidationError("smoothing parameter zeta must be finite and >= 0")
    w = np.ones(v.size) if weights is None else as_weights(weights, v.size)
    if zeta == 0.0 or v.size == 1:
        return pav(v, w)
    n = v.size
    if u is None:
        spacing = np.full(n - 1, 1.0 / n)
    else:
        ua = np.asarray(u, dtype=float)
        if ua.shape != v.shape:
            raise ValidationError("abscissae must match the values in length")
        spacing = np.diff(ua)
        if np.any(spacing <= 0.0):
            raise ValidationError("abscissae must be strictly increasing (no ties)")
    penalties = zeta / spacing**2
    return _smoothed_isotonic(v, w, penalties)


def _solve_block_system(ends, v, w, pen):
    """Minimise the smoothed objective with all within-block ties enforced.

    The reduced unknowns are one value per block; only the penalty terms at
    block boundaries survive, giving a symmetric positive-definite
    tridiagonal system solved in O(n).
    """
    starts = np.concatenate(([0], ends[:-1]))
    cw = np.concatenate(([0.0], np.cumsum(w)))
    cwv = np.concatenate(([0.0], np.cumsum(w * v)))
    block_w = cw[ends] - cw[starts]
    rhs = cwv[ends] - cwv[starts]
    m = block_w.size
    if m == 1:
        total = block_w[0]
        if total > 0.0:
            return np.array([rhs[0] / total])
        return np.array([v.mean()])
    boundary = pen[ends[:-1] - 1]
    diag = block_w.copy()
    diag[:-1] += boundary
    diag[1:] += boundary
    ab = np.zeros((2, m))
    ab[0, 1:] = -boundary
    ab[1] = diag
    return solveh_banded(ab, rhs)


def _expand(ends, block_values):
    starts = np.concatenate(([0], ends[:-1]))
    return np.repeat(block_values, ends - starts)


def _smoothed_isotonic(v, w, pen):
    """Primal active-set QP on the pooled block structure.

    Starts from the (feasible) plain isotonic fit.  Each iteration solves the
    tridiagonal equality system on the current blocks; infeasible directions
    trigger merges along the largest feasible step, feasible solutions with a
    negative tie multiplier trigger a split.
    """
    n = v.size
    ends, block_vals = _pav_blocks(v, w)
    x = _expand(ends, block_vals)
    scale = max(1.0, float(np.abs(v).max()))
    dual_tol = 1e-10 * scale * max(1.0, w.max(), pen.max())
    feas_tol = 1e-13 * scale

    for _ in range(8 * n + 100):
        b = _solve_block_system(ends, v, w, pen)
        gaps = np.diff(b)
        if gaps.size == 0 or gaps.min() >= -feas_tol:
            x = _expand(ends, np.maximum.accumulate(b))
            worst = _most_negative_tie_multiplier(ends, x, v, w, pen, dual_tol)
            if worst is None:
                return x
            ends = np.sort(np.append(ends, worst + 1))
            continue
        # Step from the current feasible iterate toward b until a block gap
        # closes, then merge every boundary that became tight.
        cur = x[np.concatenate(([0], ends[:-1]))]
        gap0 = np.diff(cur)
        dgap = gaps - gap0
        closing = dgap < 0.0
        steps = np.full(gap0.size, np.inf)
        steps[closing] = gap0[closing] / -dgap[closing]
        t = float(steps.min())
        tight = steps <= t + 1e-15 * (1.0 + t)
        moved = cur + t * (b - cur)
        keep_boundary = ~tight
        ends = ends[np.concatenate((keep_boundary, [True]))]
        first_member = np.concatenate(([0], np.flatnonzero(keep_boundary) + 1))
        x = _expand(ends, np.maximum.accumulate(moved[first_member]))
    raise NotConvergedError("smoothed isotonic active set did not terminate")


def _most_negative_tie_multiplier(ends, x, v, w, pen, tol):
    """Index of the active tie whose multiplier is most negative, if any.

    Stationarity gives mu_i = mu_{i-1} - grad_i along each block; inactive
    boundaries have mu = 0 by block optimality, so only within-block ties
    are inspected.
    """
    n = v.size
    grad = 2.0 * w * (x - v)
    inc = np.diff(x)
    grad[:-1] -= 2.0 * pen * inc
    grad[1:] += 2.0 * pen * inc
    mu = -np.cumsum(grad)[:-1]
    candidate = None
    worst = -tol
    start = 0
    for end in ends:
        for i in range(start, end - 1):
            if mu[i] < worst:
                worst = mu[i]
                candidate = i
        start = end
    return candidate


def project(f: GridFunction, weights=None, zeta: float = 0.0) -> GridFunction:
    """Weighted (optionally smoothed) isotonic projection of a grid function."""
    w = np.ones(f.n) if weights is None else as_weights(weights, f.n)
    if zeta == 0.0:
        return GridFunction(f.u, pav(f.v, w))
    return GridFunction(f.u, spav(f.v, w, zeta=zeta, u=f.u))
