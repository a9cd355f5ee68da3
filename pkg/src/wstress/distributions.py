"""Quantile-grid distributions, parametric baselines, and the transport metric.

Every distribution in the package is represented by its quantile function
sampled on the uniform midpoint grid ``u_i = (i - 0.5) / n`` of (0, 1).  The
midpoints avoid evaluating parametric quantiles at 0 and 1 (where lognormal
and gamma quantiles diverge) and turn every integral over (0, 1) into a plain
mean over the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import stats

from .errors import DegenerateGridError, ValidationError
from .kde import kde_density, silverman_bandwidth

__all__ = [
    "DEFAULT_GRID_N",
    "DENSITY_FLOOR",
    "QuantileGrid",
    "Lognormal",
    "Normal",
    "Gamma",
    "Empirical",
    "BaselineSpec",
    "DensityCurve",
    "midpoint_grid",
    "discretize",
    "wasserstein2",
    "cdf_and_density",
    "flat_segments",
    "excess_jumps",
]

DEFAULT_GRID_N = 4096
MIN_GRID_N = 16
DENSITY_FLOOR = 1e-12


def midpoint_grid(n: int) -> np.ndarray:
    """The uniform midpoint grid (i - 0.5) / n, i = 1..n."""
    return (np.arange(n) + 0.5) / n


@dataclass(frozen=True)
class QuantileGrid:
    """A quantile function sampled on the uniform midpoint grid.

    Attributes
    ----------
    q : ndarray
        Nondecreasing quantile values; ``q[i]`` represents the quantile over
        the probability cell ``((i)/n, (i+1)/n]`` (0-indexed).
    u : ndarray
        The midpoints, derived from ``len(q)``.
    """

    q: np.ndarray
    u: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1:
            raise ValidationError("quantile values must be a 1-d vector")
        if q.size < MIN_GRID_N:
            raise ValidationError(f"grid size must be at least {MIN_GRID_N}")
        if not np.isfinite(q).all():
            raise ValidationError("quantile values contain non-finite entries")
        scale = max(1.0, float(np.abs(q).max()))
        if np.any(np.diff(q) < -1e-9 * scale):
            raise ValidationError("quantile values must be nondecreasing")
        q = np.maximum.accumulate(q)  # repair float-level wiggles only
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "u", midpoint_grid(q.size))

    @property
    def n(self) -> int:
        return self.q.size


@dataclass(frozen=True)
class Lognormal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError("lognormal requires finite mu and sigma > 0")

    def quantile(self, u):
        return stats.lognorm.ppf(u, s=self.sigma, scale=math.exp(self.mu))

    def pdf(self, y):
        return stats.lognorm.pdf(y, s=self.sigma, scale=math.exp(self.mu))


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError("normal requires finite mu and sigma > 0")

    def quantile(self, u):
        return stats.norm.ppf(u, loc=self.mu, scale=self.sigma)

    def pdf(self, y):
        return stats.norm.pdf(y, loc=self.mu, scale=self.sigma)


@dataclass(frozen=True)
class Gamma:
    """Gamma distribution parameterised by shape and *rate*, plus a shift."""

    shape: float
    rate: float
    shift: float = 0.0

    def __post_init__(self):
        ok = (
            np.isfinite(self.shape)
            and np.isfinite(self.rate)
            and np.isfinite(self.shift)
            and self.shape > 0
            and self.rate > 0
        )
        if not ok:
            raise ValidationError("gamma requires shape > 0, rate > 0, finite shift")

    def quantile(self, u):
        return stats.gamma.ppf(u, a=self.shape, scale=1.0 / self.rate, loc=self.shift)

    def pdf(self, y):
        return stats.gamma.pdf(y, a=self.shape, scale=1.0 / self.rate, loc=self.shift)


@dataclass(frozen=True)
class Empirical:
    """Empirical baseline from a sample; quantiles use type-7 interpolation."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 100:
            raise ValidationError("empirical baseline needs at least 100 samples")
        if not np.isfinite(s).all():
            raise ValidationError("empirical samples contain non-finite entries")
        object.__setattr__(self, "samples", np.sort(s))

    def quantile(self, u):
        return np.quantile(self.samples, u)  # numpy default = type-7 linear

    def pdf(self, y):
        """Gaussian KDE with Silverman bandwidth, evaluated by interpolation."""
        y = np.asarray(y, dtype=float)
        h = silverman_bandwidth(self.samples)
        lo = self.samples[0] - 5.0 * h
        hi = self.samples[-1] + 5.0 * h
        grid = np.linspace(lo, hi, 4096)
        dens = kde_density(self.samples, grid, bandwidth=h)
        return np.interp(y, grid, dens, left=0.0, right=0.0)


BaselineSpec = Union[Lognormal, Normal, Gamma, Empirical]


def discretize(spec: BaselineSpec, n: int = DEFAULT_GRID_N) -> QuantileGrid:
    """Sample a baseline's quantile function on the midpoint grid."""
    if n < MIN_GRID_N:
        raise ValidationError(f"grid size must be at least {MIN_GRID_N}")
    return QuantileGrid(np.asarray(spec.quantile(midpoint_grid(n)), dtype=float))


def wasserstein2(a: QuantileGrid, b: QuantileGrid) -> float:
    """Order-2 transport distance between two grids of equal size.

    On the real line this is the L2 distance between quantile functions,
    here the root mean square gap across the midpoint grid.
    """
    if a.n != b.n:
        raise ValidationError("grids must have equal size")
    return float(np.sqrt(np.mean((a.q - b.q) ** 2)))


@dataclass(frozen=True)
class DensityCurve:
    """CDF and density of a quantile grid on an equally spaced value grid.

    ``raw_integral`` is the trapezoid integral of the density before it was
    normalised to one; it should be within about 1/n of 1 for absolutely
    continuous grids.
    """

    y: np.ndarray
    f: np.ndarray
    cdf: np.ndarray
    raw_integral: float

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        f = np.asarray(self.f, dtype=float)
        c = np.asarray(self.cdf, dtype=float)
        if not (y.size == f.size == c.size):
            raise ValidationError("density curve arrays must be equally long")
        if np.any(f < 0.0) or not np.isfinite(f).all():
            raise ValidationError("density values must be finite and nonnegative")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "cdf", c)

    def density_at(self, y):
        return np.interp(y, self.y, self.f, left=0.0, right=0.0)

    def cdf_at(self, y):
        return np.interp(y, self.y, self.cdf, left=0.0, right=1.0)


def cdf_and_density(
    grid: QuantileGrid,
    value_grid_size: int = DEFAULT_GRID_N,
    density_floor: float = DENSITY_FLOOR,
) -> DensityCurve:
    """Recover the CDF and density of a quantile grid.

    The CDF is the normalised count (1/n) * #{i : q_i <= y} with linear
    interpolation between distinct grid values; the density is its central
    finite difference on an equally spaced value grid spanning [q_1, q_n].
    Flat quantile segments (atoms) become density spikes spread over the
    local knot gap; quantile jumps become zero-density gaps (floored at
    ``density_floor``).
    """
    q = grid.q
    n = grid.n
    span = q[-1] - q[0]
    if span <= 1e-12 * max(1.0, abs(q[0])):
        raise DegenerateGridError("constant quantile grid: single atom, no density")
    if value_grid_size < 16:
        raise ValidationError("value grid needs at least 16 points")
    knots = np.unique(q)
    counts = np.searchsorted(q, knots, side="right")
    y = np.linspace(q[0], q[-1], value_grid_size)
    cdf = np.interp(y, knots, counts / n)
    f = np.empty(value_grid_size)
    dy = y[1] - y[0]
    f[1:-1] = (cdf[2:] - cdf[:-2]) / (2.0 * dy)
    f[0] = (cdf[1] - cdf[0]) / dy
    f[-1] = (cdf[-1] - cdf[-2]) / dy
    integral = float(np.trapezoid(f, y))
    if integral > 0.0:
        f = f / integral
    f = np.maximum(f, density_floor)
    return DensityCurve(y=y, f=f, cdf=cdf, raw_integral=integral)


def flat_segments(grid: QuantileGrid, rel_tol: float = 1e-9, min_cells: int = 2):
    """Maximal runs of (near-)zero quantile increments.

    Returns a list of ``(u_lo, u_hi, value)`` triples covering at least
    ``min_cells`` consecutive zero increments; these are the atoms of the
    distribution the grid represents.
    """
    q = grid.q
    scale = max(1.0, float(q[-1] - q[0]))
    flat = np.diff(q) <= rel_tol * scale
    segments = []
    i = 0
    n1 = flat.size
    while i < n1:
        if flat[i]:
            j = i
            while j < n1 and flat[j]:
                j += 1
            if j - i >= min_cells:
                segments.append((float(grid.u[i]), float(grid.u[j]), float(q[i])))
            i = j
        else:
            i += 1
    return segments


def excess_jumps(stressed: QuantileGrid, baseline: QuantileGrid, min_size: float):
    """Cells where the stressed increment exceeds the baseline's by min_size.

    Returns ``(u, size)`` pairs at the cell boundaries; sizes are the excess
    over the baseline increment, so a smooth baseline does not trigger in
    its own heavy tail.
    """
    if stressed.n != baseline.n:
        raise ValidationError("grids must have equal size")
    excess = np.diff(stressed.q) - np.diff(baseline.q)
    idx = np.flatnonzero(excess > min_size)
    boundaries = (idx + 1) / stressed.n
    return [(float(b), float(excess[i])) for b, i in zip(boundaries, idx)]
