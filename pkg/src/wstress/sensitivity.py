"""Reverse sensitivity measures and the moment-independent delta measure.

The reverse sensitivity of an input statistic s(X) to a reweighting w is the
change of its weighted mean, normalised by the largest change achievable by
any reweighting with the same weight distribution.  Those extremes are
attained by sorting: pairing the largest weights with the largest (smallest)
values of s, so the bounds are plain rearrangement sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .kde import kde_density, weighted_quantile
from .reweight import WeightSet

__all__ = [
    "SensitivityResult",
    "SensitivityReport",
    "reverse_sensitivity",
    "bivariate_reverse_sensitivity",
    "delta_measure",
    "identity_s",
    "power_s",
    "tail_indicator_s",
    "joint_tail_indicator_s",
]

_ZERO_NUMERATOR = 1e-12


@dataclass(frozen=True)
class SensitivityResult:
    """One reverse-sensitivity value with its normalisation diagnostics."""

    value: float
    numerator: float
    max_bound: float
    min_bound: float


@dataclass(frozen=True)
class SensitivityReport:
    """Named sensitivity rows, one per (target, s-function) pair."""

    rows: tuple

    def by_name(self, name: str, s_tag: str) -> SensitivityResult:
        for row_name, row_tag, result in self.rows:
            if row_name == name and row_tag == s_tag:
                return result
        raise KeyError((name, s_tag))


def reverse_sensitivity(s_values, weights: WeightSet) -> SensitivityResult:
    """Normalised change of mean(s) under the reweighting, in [-1, 1].

    The numerator is mean(w * s) - mean(s).  The upper bound pairs the
    ascending sort of s with the ascending sort of w (most comonotone
    rearrangement); the lower bound pairs it with the descending sort.  Sign
    conventions: a positive numerator is divided by the upper bound, a
    negative one by the (negative) lower bound with a sign flip, and
    0/0 reports 0.  Ties in s may be ordered arbitrarily by the sort: every
    tie order yields the same bound value.
    """
    s = np.asarray(s_values, dtype=float)
    if s.ndim != 1 or s.size != weights.n:
        raise ValidationError("s-values and weights must be equally long vectors")
    if not np.isfinite(s).all():
        raise ValidationError("s-values contain non-finite entries")
    w = weights.w
    s_mean = float(np.mean(s))
    numerator = float(np.mean(w * s)) - s_mean
    s_sorted = np.sort(s)
    w_sorted = np.sort(w)
    max_bound = float(np.mean(s_sorted * w_sorted)) - s_mean
    min_bound = float(np.mean(s_sorted * w_sorted[::-1])) - s_mean
    snap = 1e-12 * (abs(numerator) + abs(max_bound) + abs(min_bound))
    if abs(numerator) <= _ZERO_NUMERATOR * max(1.0, abs(s_mean)):
        value = 0.0
    elif numerator > 0.0:
        # equality of the rearrangement bound is exact comonotonicity; snap
        # float-summation hair so the attainment cases report exactly +-1
        value = 1.0 if numerator >= max_bound - snap else numerator / max_bound
    else:
        value = -1.0 if numerator <= min_bound + snap else -(numerator / min_bound)
    value = float(np.clip(value, -1.0, 1.0))
    return SensitivityResult(
        value=value,
        numerator=numerator,
        max_bound=max_bound,
        min_bound=min_bound,
    )


def bivariate_reverse_sensitivity(s_values, weights: WeightSet) -> SensitivityResult:
    """Same machinery applied to a precomputed s(X_i, X_j) vector."""
    return reverse_sensitivity(s_values, weights)


def identity_s(x):
    return np.asarray(x, dtype=float)


def power_s(x, k: int):
    return np.asarray(x, dtype=float) ** k


def tail_indicator_s(x, alpha: float):
    """1{x > empirical alpha-quantile of x} (type-7 quantile under P)."""
    x = np.asarray(x, dtype=float)
    return (x > np.quantile(x, alpha)).astype(float)


def joint_tail_indicator_s(x_i, x_j, alpha: float):
    """Joint exceedance indicator above the inputs' own alpha-quantiles."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    return (
        (x_i > np.quantile(x_i, alpha)) & (x_j > np.quantile(x_j, alpha))
    ).astype(float)


def delta_measure(
    y,
    x,
    weights: WeightSet | None = None,
    bins: int = 20,
    grid_size: int = 512,
    min_per_bin: int = 50,
) -> float:
    """Moment-independent sensitivity of the output to one input.

    Estimator: partition the input into ``bins`` (weighted) equal-probability
    bins by rank, estimate the output density marginally and within each bin
    by Gaussian KDE with the Silverman bandwidth on a shared grid spanning
    the 0.1%-99.9% weighted quantile range, and average half the L1 gap
    between conditional and marginal densities over bins.  Values lie in
    [0, 1]; binning by rank makes the estimate invariant under strictly
    monotone transforms of the input.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != x.shape or y.ndim != 1:
        raise ValidationError("output and input must be equally long vectors")
    n = y.size
    if n < bins * min_per_bin:
        raise ValidationError(
            f"need at least {bins * min_per_bin} samples for {bins} bins"
        )
    w = np.ones(n) if weights is None else weights.w
    lo, hi = weighted_quantile(y, [0.001, 0.999], w)
    if hi <= lo:
        raise ValidationError("degenerate output range")
    grid = np.linspace(lo, hi, grid_size)

    f_marginal = kde_density(y, grid, weights=w)

    order = np.argsort(x, kind="stable")
    cum = np.cumsum(w[order])
    edges = np.searchsorted(cum, np.arange(1, bins) * cum[-1] / bins, side="left")
    edges = np.concatenate(([0], edges + 1, [n]))
    total = 0.0
    for b in range(bins):
        members = order[edges[b] : edges[b + 1]]
        if members.size < min_per_bin:
            raise ValidationError(f"bin {b} holds fewer than {min_per_bin} samples")
        wb = w[members]
        if wb.sum() <= 0.0:
            continue
        f_bin = kde_density(y[members], grid, weights=wb)
        p_bin = wb.sum() / cum[-1]
        total += p_bin * 0.5 * float(np.trapezoid(np.abs(f_bin - f_marginal), grid))
    return float(np.clip(total, 0.0, 1.0))
