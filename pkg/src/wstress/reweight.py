"""Per-sample reweighting from a stressed output distribution.

The stressed model induces a change of measure whose density on the output
is the ratio of the stressed to the baseline output density.  Evaluating
that ratio at each Monte Carlo output sample turns baseline draws into
stressed-model expectations without re-simulation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    DEFAULT_GRID_N,
    DENSITY_FLOOR,
    BaselineSpec,
    Empirical,
    QuantileGrid,
    cdf_and_density,
    discretize,
)
from .errors import ValidationError
from .kde import kde_density, silverman_bandwidth, weighted_quantile

__all__ = [
    "SampleSet",
    "WeightSet",
    "rn_weights",
    "stressed_cdf",
    "stressed_expectation",
    "weighted_quantile",
]

ZERO_WEIGHT_WARN_FRACTION = 0.05


@dataclass(frozen=True)
class SampleSet:
    """A Monte Carlo matrix of inputs and the univariate output."""

    X: np.ndarray
    Y: np.ndarray
    columns: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.size:
            raise ValidationError("inputs must be (n_samples, n_inputs) with matching output")
        if X.shape[0] < 100:
            raise ValidationError("need at least 100 samples")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise ValidationError("samples contain non-finite entries")
        cols = tuple(self.columns)
        if len(cols) != X.shape[1]:
            raise ValidationError("column names must match the input count")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "columns", cols)

    @property
    def n_samples(self) -> int:
        return self.Y.size

    def column(self, name: str) -> np.ndarray:
        try:
            return self.X[:, self.columns.index(name)]
        except ValueError:
            raise ValidationError(f"unknown column {name!r}") from None


@dataclass(frozen=True)
class WeightSet:
    """Nonnegative per-sample weights normalised to mean one."""

    w: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValidationError("weights must be a nonempty vector")
        if np.any(w < 0.0) or not np.isfinite(w).all():
            raise ValidationError("weights must be finite and nonnegative")
        mean = w.mean()
        if mean <= 0.0:
            raise ValidationError("weights must not be all zero")
        if abs(mean - 1.0) > 1e-8:
            w = w / mean
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.size


def rn_weights(
    samples: SampleSet,
    baseline: BaselineSpec,
    stressed: QuantileGrid,
    value_grid_size: int = DEFAULT_GRID_N,
    density_floor: float = DENSITY_FLOOR,
) -> WeightSet:
    """Per-sample density-ratio weights stressed/baseline at the output.

    The ratio is formed on a common equally spaced value grid spanning the
    pooled range of the baseline support, the stressed grid, and the
    observed outputs, then linearly interpolated to the sample points.

    For parametric baselines the stressed density comes from the grid's CDF
    reconstruction: atoms (flat quantile segments) spread their mass over
    the local knot gap so weights stay bounded (the grid spacing is
    reported as ``bin_width``), stress-induced quantile jumps are mass-free
    and give weight zero (counted in ``zero_weight_count``), and past the
    outer knots the ratio follows the baseline density shifted by the
    stress's end displacement.  For empirical baselines the samples are
    pushed through the rank -> stressed-quantile transport map and both
    densities are kernel estimates with one shared bandwidth.
    """
    y = samples.Y
    base_grid = discretize(baseline, stressed.n)
    transported = None
    if isinstance(baseline, Empirical):
        # Push every sample through the rank -> stressed-quantile transport
        # map; beyond the grid's end knots the map continues with unit slope
        # (the stress acts as the end-cell displacement there).
        ranks = np.interp(y, base_grid.q, base_grid.u)
        transported = np.interp(ranks, stressed.u, stressed.q)
        top = y > base_grid.q[-1]
        transported[top] = stressed.q[-1] + (y[top] - base_grid.q[-1])
        bottom = y < base_grid.q[0]
        transported[bottom] = stressed.q[0] + (y[bottom] - base_grid.q[0])

    lo = min(base_grid.q[0], stressed.q[0], float(y.min()))
    hi = max(base_grid.q[-1], stressed.q[-1], float(y.max()))
    if transported is not None:
        lo = min(lo, float(transported.min()))
        hi = max(hi, float(transported.max()))
    span = hi - lo
    if span <= 0.0:
        raise ValidationError("degenerate output range")
    lo -= 1e-9 * span
    hi += 1e-9 * span
    grid = np.linspace(lo, hi, value_grid_size)

    f_base = np.asarray(baseline.pdf(grid), dtype=float)
    f_at_y = np.asarray(baseline.pdf(y), dtype=float)
    if np.any(f_at_y <= 0.0):
        raise ValidationError(
            "baseline density vanishes at observed outputs; weights undefined"
        )

    if transported is not None:
        # Match estimators: the transported samples are a sample of the
        # stressed law with the same size and tail granularity as the
        # baseline sample, so smoothing both with the same kernel and
        # bandwidth keeps the ratio free of one-sided estimator artifacts;
        # quantile jumps and atoms smear consistently on both sides.
        bandwidth = silverman_bandwidth(baseline.samples)
        g_stressed = kde_density(transported, grid, bandwidth=bandwidth)
        ratio = g_stressed / np.maximum(f_base, density_floor)
    else:
        curve = cdf_and_density(stressed, value_grid_size, density_floor=density_floor)
        g_stressed = np.interp(grid, curve.y, curve.f, left=0.0, right=0.0)
        ratio = g_stressed / np.maximum(f_base, density_floor)
        # Stress-induced quantile jumps are mass-free value intervals: zero
        # the ratio strictly inside them.  A jump is an increment that
        # dwarfs the baseline increment at the same rank, which leaves
        # natural tail spreading alone.
        dy = float(grid[1] - grid[0])
        s_inc = np.diff(stressed.q)
        b_inc = np.diff(base_grid.q)
        for j in np.flatnonzero(s_inc - b_inc > 5.0 * (b_inc + dy)):
            pad = max(dy, float(b_inc[j]))
            gap = (grid > stressed.q[j] + pad) & (grid < stressed.q[j + 1] - pad)
            ratio[gap] = 0.0
        # Tail continuation: the grid reconstruction is reliable only where
        # knots are dense, so beyond the last few knots (where the stress
        # acts as a locally constant displacement) the ratio switches to a
        # shifted/unshifted baseline density ratio.
        k = min(16, stressed.n // 8)
        shift_top = float(np.mean(stressed.q[-k:] - base_grid.q[-k:]))
        shift_bot = float(np.mean(stressed.q[:k] - base_grid.q[:k]))
        upper = grid > stressed.q[-k]
        if upper.any():
            ratio[upper] = np.asarray(
                baseline.pdf(grid[upper] - shift_top), dtype=float
            ) / np.maximum(f_base[upper], density_floor)
        lower_tail = grid < stressed.q[k - 1]
        if lower_tail.any():
            ratio[lower_tail] = np.asarray(
                baseline.pdf(grid[lower_tail] - shift_bot), dtype=float
            ) / np.maximum(f_base[lower_tail], density_floor)

    w = np.interp(y, grid, ratio)
    zero_count = int(np.sum(w < 1e-10))
    zero_fraction = zero_count / y.size
    meta = {
        "zero_weight_count": zero_count,
        "zero_weight_fraction": zero_fraction,
        "high_zero_fraction": zero_fraction > ZERO_WEIGHT_WARN_FRACTION,
        "bin_width": float(grid[1] - grid[0]),
        "normalisation": float(w.mean()),
    }
    if meta["high_zero_fraction"]:
        warnings.warn(
            f"{zero_fraction:.1%} of samples received zero weight; the stress "
            "removes mass from a region the baseline samples heavily",
            stacklevel=2,
        )
    if w.mean() <= 0.0:
        raise ValidationError("all weights vanished; stress incompatible with samples")
    return WeightSet(w=w, meta=meta)


@dataclass(frozen=True)
class WeightedEcdf:
    """Right-continuous weighted empirical distribution function."""

    x: np.ndarray
    p: np.ndarray

    def __call__(self, query):
        idx = np.searchsorted(self.x, np.asarray(query, dtype=float), side="right")
        padded = np.concatenate(([0.0], self.p))
        return padded[idx]


def stressed_cdf(values, weights: WeightSet) -> WeightedEcdf:
    """Weighted empirical CDF of a sample column under the stressed measure."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size != weights.n:
        raise ValidationError("values and weights must be equally long vectors")
    order = np.argsort(v, kind="stable")
    cum = np.cumsum(weights.w[order]) / weights.n
    return WeightedEcdf(x=v[order], p=cum)


def stressed_expectation(values, weights: WeightSet) -> float:
    """Weighted sample mean: the expectation under the stressed measure."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size != weights.n:
        raise ValidationError("values and weights must be equally long vectors")
    return float(np.mean(v * weights.w))
