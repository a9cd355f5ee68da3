"""Solvers for the transport-closest stressed quantile grid.

Every solver in this module answers the same question: which nondecreasing
grid is closest (root mean square over the midpoint grid) to a baseline
quantile grid while hitting user constraints.  The constraint families are

* ``RmStress``       -- equality constraints on distortion risk measures;
* ``MeanVarRm``      -- fixed mean, standard deviation, and risk measures;
* ``IntegralStress`` -- linear/quadratic integral inequality constraints;
* ``VarStress``      -- a left or right quantile pinned at a level;
* ``UtilityRm``      -- an expected-utility floor plus risk measures.

Each family has a known solution shape: an isotonic projection of the
baseline quantile plus multiplier-weighted constraint directions (scaled, or
pushed through the inverse of x - lam * u'(x) for the utility family).  The
multipliers are found by a damped Newton iteration on the constraint
residuals with forward-difference Jacobians, falling back to coordinate-wise
bisection at projection kinks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .distributions import QuantileGrid, wasserstein2
from .errors import (
    NoSolutionError,
    NotConvergedError,
    UtilityDomainError,
    ValidationError,
)
from .isotonic import pav, spav
from .risk_measures import (
    DistortionWeight,
    UtilitySpec,
    eval_rm,
    expected_utility,
    mean_sd,
    var,
    var_plus,
)

__all__ = [
    "RmConstraint",
    "RmStress",
    "MeanVarRm",
    "LinearConstraint",
    "QuadraticConstraint",
    "IntegralStress",
    "VarStress",
    "UtilityRm",
    "StressSpec",
    "StressedModel",
    "SearchResult",
    "multiplier_search",
    "solve_rm",
    "solve_coherent",
    "solve_mean_var_rm",
    "solve_integral",
    "solve_var",
    "solve_utility_rm",
    "solve",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-6
_SCALE_GUARD = 1e-6  # |1 + lam_scale| in the mean/variance family


@dataclass(frozen=True)
class RmConstraint:
    """One distortion risk measure pinned to a target value."""

    weight: DistortionWeight
    target: float

    def __post_init__(self):
        if not np.isfinite(self.target):
            raise ValidationError("risk-measure target must be finite")


@dataclass(frozen=True)
class RmStress:
    constraints: tuple[RmConstraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.constraints:
            raise ValidationError("need at least one risk-measure constraint")


@dataclass(frozen=True)
class MeanVarRm:
    mean: float
    sd: float
    constraints: tuple[RmConstraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not (np.isfinite(self.mean) and np.isfinite(self.sd) and self.sd > 0):
            raise ValidationError("need finite target mean and sd > 0")


@dataclass(frozen=True)
class LinearConstraint:
    """Upper bound on the grid mean of h * q, with h >= 0 on the grid."""

    h: np.ndarray
    bound: float
    name: str = "linear"

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if np.any(h < 0.0) or not np.isfinite(h).all():
            raise ValidationError("constraint function h must be finite and >= 0")
        if not np.isfinite(self.bound):
            raise ValidationError("constraint bound must be finite")
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class QuadraticConstraint:
    """Upper bound on the grid mean of h * q**2, with h >= 0 on the grid."""

    h: np.ndarray
    bound: float
    name: str = "quadratic"

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if np.any(h < 0.0) or not np.isfinite(h).all():
            raise ValidationError("constraint function h must be finite and >= 0")
        if not np.isfinite(self.bound):
            raise ValidationError("constraint bound must be finite")
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class IntegralStress:
    linear: tuple[LinearConstraint, ...] = ()
    quadratic: tuple[QuadraticConstraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "linear", tuple(self.linear))
        object.__setattr__(self, "quadratic", tuple(self.quadratic))
        if not self.linear and not self.quadratic:
            raise ValidationError("need at least one integral constraint")


@dataclass(frozen=True)
class VarStress:
    """Pin the left ('left') or right ('right') quantile at level alpha."""

    alpha: float
    value: float
    kind: str = "left"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("quantile level must lie in (0, 1)")
        if self.kind not in ("left", "right"):
            raise ValidationError("kind must be 'left' or 'right'")
        if not np.isfinite(self.value):
            raise ValidationError("quantile target must be finite")


@dataclass(frozen=True)
class UtilityRm:
    utility: UtilitySpec
    floor: float
    constraints: tuple[RmConstraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not np.isfinite(self.floor):
            raise ValidationError("utility floor must be finite")


StressSpec = Union[RmStress, MeanVarRm, IntegralStress, VarStress, UtilityRm]


@dataclass(frozen=True)
class StressedModel:
    """A converged stress: baseline, stressed grid, multipliers, diagnostics."""

    baseline: QuantileGrid
    stressed: QuantileGrid
    multipliers: np.ndarray
    residuals: np.ndarray
    constraint_names: tuple[str, ...]
    w2: float
    zeta: float = 0.0
    multipliers_quadratic: np.ndarray = field(default_factory=lambda: np.empty(0))
    evaluations: int = 0


@dataclass(frozen=True)
class SearchResult:
    multipliers: np.ndarray
    residuals: np.ndarray
    evaluations: int


def multiplier_search(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    lam0,
    *,
    scale=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
    lower=None,
) -> SearchResult:
    """Find multipliers driving a residual map to zero.

    Damped Newton with a forward-difference Jacobian (step 1e-6 * (1+|lam|));
    when the Jacobian is singular or the step fails to reduce the residual,
    one coordinate-wise bisection sweep is used instead.  Residuals are
    compared against ``tol`` after division by ``scale`` (default: ones).
    ``lower`` optionally bounds multipliers from below (projected steps).

    Raises ``NotConvergedError`` with the best residuals seen if the budget
    of ``max_iter`` outer iterations is exhausted.
    """
    lam = np.atleast_1d(np.asarray(lam0, dtype=float)).copy()
    d = lam.size
    sc = np.ones(d) if scale is None else np.maximum(np.asarray(scale, dtype=float), 1e-12)
    lo = np.full(d, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    lam = np.maximum(lam, lo)
    evaluations = 0

    def scaled(l):
        nonlocal evaluations
        evaluations += 1
        return np.asarray(residual_fn(l), dtype=float) / sc

    r = scaled(lam)
    best_norm = float(np.abs(r).max())
    best = (lam.copy(), r.copy())
    for _ in range(max_iter):
        norm = float(np.abs(r).max())
        if norm <= tol:
            return SearchResult(lam, r * sc, evaluations)
        if norm < best_norm:
            best_norm, best = norm, (lam.copy(), r.copy())
        jac = np.empty((d, d))
        for k in range(d):
            h = 1e-6 * (1.0 + abs(lam[k]))
            probe = lam.copy()
            probe[k] += h
            jac[:, k] = (scaled(probe) - r) / h
        step = None
        try:
            step = np.linalg.solve(jac, -r)
            if not np.isfinite(step).all():
                step = None
        except np.linalg.LinAlgError:
            step = None
        accepted = False
        if step is not None:
            t = 1.0
            for _ in range(12):
                cand = np.maximum(lam + t * step, lo)
                rc = scaled(cand)
                cn = float(np.abs(rc).max())
                if cn < norm or cn <= tol:
                    lam, r = cand, rc
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            lam, r = _bisection_sweep(scaled, lam, r, lo, tol)
        if float(np.abs(r).max()) <= tol:
            return SearchResult(lam, r * sc, evaluations)
    norm = float(np.abs(r).max())
    if norm < best_norm:
        best = (lam, r)
    raise NotConvergedError(
        "multiplier search exhausted its iteration budget",
        residuals=best[1] * sc,
        multipliers=best[0],
    )


def _bisection_sweep(scaled, lam, r, lo, tol):
    """One pass of per-coordinate bracketing bisection on the residual map."""
    lam = lam.copy()
    for k in range(lam.size):
        if abs(r[k]) <= tol:
            continue
        a = lam[k]
        fa = r[k]
        b = None
        width = max(1.0, abs(a)) * 0.25
        for _ in range(40):
            for cand in (a + width, max(a - width, lo[k])):
                if cand == a:
                    continue
                probe = lam.copy()
                probe[k] = cand
                fc = scaled(probe)[k]
                if np.sign(fc) != np.sign(fa) or fc == 0.0:
                    b, fb = cand, fc
                    break
            if b is not None:
                break
            width *= 2.0
        if b is None:
            continue
        # plain bisection: the residual is continuous but only piecewise smooth
        fa_, fb_ = (fa, fb) if a < b else (fb, fa)
        xa, xb = min(a, b), max(a, b)
        for _ in range(60):
            mid = 0.5 * (xa + xb)
            probe = lam.copy()
            probe[k] = mid
            fm = scaled(probe)[k]
            if abs(fm) <= tol:
                xa = xb = mid
                break
            if np.sign(fm) == np.sign(fa_):
                xa, fa_ = mid, fm
            else:
                xb, fb_ = mid, fm
        lam[k] = 0.5 * (xa + xb)
    return lam, scaled(lam)


def _subsets(n, size):
    """All index subsets of {0..n-1} with the given size, as sorted tuples."""
    return itertools.combinations(range(n), size)


class _ProjectionCache:
    """Memoises the most recent stressed grid per multiplier vector."""

    def __init__(self, builder):
        self._builder = builder
        self._key = None
        self._value = None

    def __call__(self, lam):
        key = np.asarray(lam, dtype=float).tobytes()
        if key != self._key:
            self._value = self._builder(np.asarray(lam, dtype=float))
            self._key = key
        return self._value


def _isotonic(values, weights=None, zeta: float = 0.0):
    if zeta > 0.0:
        return spav(values, weights, zeta=zeta)
    return pav(values, weights)


def _target_scale(targets):
    return np.maximum(1.0, np.abs(np.asarray(targets, dtype=float)))


def _model(baseline, stressed_q, multipliers, residuals, names, zeta, evaluations,
           multipliers_quadratic=None):
    stressed = QuantileGrid(stressed_q)
    return StressedModel(
        baseline=baseline,
        stressed=stressed,
        multipliers=np.atleast_1d(np.asarray(multipliers, dtype=float)),
        residuals=np.atleast_1d(np.asarray(residuals, dtype=float)),
        constraint_names=tuple(names),
        w2=wasserstein2(baseline, stressed),
        zeta=zeta,
        multipliers_quadratic=(
            np.empty(0)
            if multipliers_quadratic is None
            else np.atleast_1d(np.asarray(multipliers_quadratic, dtype=float))
        ),
        evaluations=evaluations,
    )


def _rm_arrays(baseline, constraints):
    gammas = []
    targets = []
    names = []
    for c in constraints:
        if c.weight.n != baseline.n:
            raise ValidationError("distortion weight grid size differs from baseline")
        gammas.append(c.weight.values)
        targets.append(c.target)
        names.append(f"{c.weight.tag}{c.weight.params}")
    return np.asarray(gammas), np.asarray(targets), names


def solve_rm(
    baseline: QuantileGrid,
    spec: RmStress,
    zeta: float = 0.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
) -> StressedModel:
    """Stress distortion risk measures to target values.

    The stressed quantile is the isotonic projection of the baseline quantile
    plus a multiplier-weighted sum of the distortion weights; the multipliers
    are chosen so every risk measure hits its target.
    """
    gammas, targets, names = _rm_arrays(baseline, spec.constraints)

    stressed_for = _ProjectionCache(
        lambda lam: _isotonic(baseline.q + gammas.T @ lam, zeta=zeta)
    )

    def residual(lam):
        qs = stressed_for(lam)
        return qs @ gammas.T / baseline.n - targets

    result = multiplier_search(
        residual,
        np.zeros(len(targets)),
        scale=_target_scale(targets),
        tol=tol,
        max_iter=max_iter,
    )
    qs = stressed_for(result.multipliers)
    return _model(
        baseline, qs, result.multipliers, result.residuals, names, zeta,
        result.evaluations,
    )


def solve_coherent(
    baseline: QuantileGrid,
    weight: DistortionWeight,
    target: float,
) -> StressedModel:
    """Closed form for one coherent risk measure stressed upward.

    Requires a (numerically) nondecreasing distortion weight and a target at
    or above the baseline value; then baseline quantile plus a nonnegative
    multiple of the weight is already nondecreasing and no projection is
    needed.
    """
    if weight.n != baseline.n:
        raise ValidationError("distortion weight grid size differs from baseline")
    if not weight.is_nondecreasing:
        raise ValidationError("weight is not nondecreasing: use solve_rm")
    base_value = eval_rm(baseline, weight)
    if target < base_value - 1e-12 * max(1.0, abs(base_value)):
        raise ValidationError("target below the baseline value: use solve_rm")
    lam = (target - base_value) / float(np.mean(weight.values**2))
    qs = baseline.q + lam * weight.values
    achieved = float(np.mean(qs * weight.values))
    return _model(
        baseline, qs, [lam], [achieved - target],
        [f"{weight.tag}{weight.params}"], 0.0, 1,
    )


def solve_mean_var_rm(
    baseline: QuantileGrid,
    spec: MeanVarRm,
    zeta: float = 0.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
) -> StressedModel:
    """Stress the mean and standard deviation, optionally with risk measures.

    The stressed quantile is the projection of an affine reshaping of the
    baseline quantile: (baseline + shift + scale_mult * target_mean + rm
    terms) / (1 + scale_mult).  The scale multiplier is kept away from -1,
    where the reshaping degenerates.
    """
    gammas, rm_targets, rm_names = (
        _rm_arrays(baseline, spec.constraints)
        if spec.constraints
        else (np.empty((0, baseline.n)), np.empty(0), [])
    )
    d = 2 + len(rm_targets)
    clamped = {"hit": False}

    def build(lam):
        denom = 1.0 + lam[1]
        if abs(denom) < _SCALE_GUARD:
            clamped["hit"] = True
            denom = _SCALE_GUARD if denom >= 0.0 else -_SCALE_GUARD
        ell = baseline.q + lam[0] + lam[1] * spec.mean
        if len(rm_targets):
            ell = ell + gammas.T @ lam[2:]
        return _isotonic(ell / denom, zeta=zeta)

    stressed_for = _ProjectionCache(build)

    targets = np.concatenate(([spec.mean, spec.sd], rm_targets))

    def residual(lam):
        qs = stressed_for(lam)
        m, sd = float(np.mean(qs)), float(np.sqrt(np.mean((qs - np.mean(qs)) ** 2)))
        out = [m - spec.mean, sd - spec.sd]
        if len(rm_targets):
            out.extend(qs @ gammas.T / baseline.n - rm_targets)
        return np.asarray(out)

    result = multiplier_search(
        residual,
        np.zeros(d),
        scale=np.maximum(_target_scale(targets), spec.sd),
        tol=tol,
        max_iter=max_iter,
    )
    if abs(1.0 + result.multipliers[1]) < _SCALE_GUARD:
        raise NotConvergedError(
            "degenerate solution: scale multiplier pinned near -1",
            residuals=result.residuals,
            multipliers=result.multipliers,
        )
    qs = stressed_for(result.multipliers)
    names = ["mean", "sd", *rm_names]
    return _model(
        baseline, qs, result.multipliers, result.residuals, names, zeta,
        result.evaluations,
    )


def solve_integral(
    baseline: QuantileGrid,
    spec: IntegralStress,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
) -> StressedModel:
    """Linear and quadratic integral inequality constraints.

    The stressed quantile is the weighted isotonic projection of
    (baseline - sum lam_k h_k) / Lambda with Lambda = 1 + sum lamq_l hq_l and
    projection weights Lambda; multipliers enter with a minus sign in the
    numerator so that the KKT multipliers of the upper-bound constraints are
    nonnegative.  An active-set loop solves binding constraints as equalities
    and drops any whose multiplier turns negative.
    """
    lin_h = (
        np.asarray([c.h for c in spec.linear])
        if spec.linear
        else np.zeros((0, baseline.n))
    )
    quad_h = (
        np.asarray([c.h for c in spec.quadratic])
        if spec.quadratic
        else np.zeros((0, baseline.n))
    )
    if lin_h.shape[1] != baseline.n or quad_h.shape[1] != baseline.n:
        raise ValidationError("constraint function length differs from grid")
    lin_c = np.asarray([c.bound for c in spec.linear], dtype=float)
    quad_c = np.asarray([c.bound for c in spec.quadratic], dtype=float)
    names = [c.name for c in spec.linear] + [c.name for c in spec.quadratic]
    d, dq = len(spec.linear), len(spec.quadratic)

    def build(full_lam):
        lam, lamq = full_lam[:d], full_lam[d:]
        weights = np.ones(baseline.n) + (quad_h.T @ lamq if dq else 0.0)
        weights = np.maximum(weights, 1e-9)
        ell = baseline.q - (lin_h.T @ lam if d else 0.0)
        return pav(ell / weights, weights)

    stressed_for = _ProjectionCache(build)

    def achieved(full_lam):
        qs = stressed_for(full_lam)
        out = np.empty(d + dq)
        if d:
            out[:d] = lin_h @ qs / baseline.n
        if dq:
            out[d:] = quad_h @ qs**2 / baseline.n
        return out

    bounds = np.concatenate((lin_c, quad_c))
    scale = _target_scale(bounds)
    K = d + dq
    total_evals = 1
    base_achieved = achieved(np.zeros(K))
    violated = tuple(k for k in range(K) if base_achieved[k] > bounds[k] + tol * scale[k])

    # Enumerate candidate active sets, starting with the constraints violated
    # at the baseline (usually the right set), then all subsets by size.  The
    # problem is strictly convex, so the first KKT-consistent point (solvable
    # with nonnegative multipliers, no inactive constraint violated) is the
    # unique optimum.
    candidates = [violated] if violated else [()]
    for size in range(K + 1):
        for combo in _subsets(K, size):
            if combo not in candidates:
                candidates.append(combo)

    failure = None
    for active in candidates:
        full = np.zeros(K)
        if active:
            idx = np.asarray(active, dtype=int)

            def residual(sub_lam, idx=idx):
                full_lam = np.zeros(K)
                full_lam[idx] = sub_lam
                return achieved(full_lam)[idx] - bounds[idx]

            try:
                result = multiplier_search(
                    residual,
                    np.zeros(idx.size),
                    scale=scale[idx],
                    tol=tol,
                    max_iter=min(max_iter, 80),
                    lower=np.zeros(idx.size),
                )
            except NotConvergedError as exc:
                total_evals += 0 if exc.residuals is None else 1
                failure = exc
                continue
            total_evals += result.evaluations
            full[idx] = result.multipliers
        current = achieved(full)
        if np.any(current - bounds > tol * scale):
            continue
        residuals = np.where(np.isin(np.arange(K), active), current - bounds, 0.0)
        qs = stressed_for(full)
        return _model(
            baseline, qs, full[:d], residuals, names, 0.0, total_evals,
            multipliers_quadratic=full[d:],
        )
    raise NotConvergedError(
        "no active set satisfies the integral constraints",
        residuals=None if failure is None else failure.residuals,
        multipliers=None if failure is None else failure.multipliers,
    )


def solve_var(baseline: QuantileGrid, spec: VarStress) -> StressedModel:
    """Pin a left or right grid quantile at a target value.

    The stressed quantile equals the baseline outside the probability band
    between the target's baseline rank and the stressed level, and is
    constant at the target inside it.  Stressing the left quantile upward
    (or the right quantile downward) has no solution: the minimising
    sequence loses left-continuity in the limit.
    """
    q = baseline.q
    n = baseline.n
    if spec.kind == "left":
        base = var(baseline, spec.alpha)
        if spec.value > base:
            raise NoSolutionError(
                f"no solution: target {spec.value:.6g} exceeds the baseline left "
                f"quantile {base:.6g} at level {spec.alpha}; a left-quantile "
                "stress must move the quantile down (use kind='right' or an "
                "interval risk measure to move it up)"
            )
        # midpoints in (alpha_F, alpha]: from the first baseline value at or
        # above the target up to the last midpoint at or below alpha
        start = int(np.searchsorted(q, spec.value, side="left"))
        stop = int(np.floor(spec.alpha * n + 0.5))
        name = f"var({spec.alpha})"
    else:
        base = var_plus(baseline, spec.alpha)
        if spec.value < base:
            raise NoSolutionError(
                f"no solution: target {spec.value:.6g} is below the baseline right "
                f"quantile {base:.6g} at level {spec.alpha}; a right-quantile "
                "stress must move the quantile up (use kind='left' or an "
                "interval risk measure to move it down)"
            )
        # midpoints in (alpha, alpha_F]: from the first midpoint above alpha
        # through the last baseline value at or below the target
        start = int(np.floor(spec.alpha * n + 0.5))
        stop = int(np.searchsorted(q, spec.value, side="right"))
        name = f"var_plus({spec.alpha})"
    qs = q.copy()
    if stop > start:
        qs[start:stop] = spec.value
    achieved = var(QuantileGrid(qs), spec.alpha) if spec.kind == "left" else var_plus(
        QuantileGrid(qs), spec.alpha
    )
    return _model(baseline, qs, [], [achieved - spec.value], [name], 0.0, 1)


def _inverse_shifted_marginal(values, utility, lam1, tol=1e-10):
    """Left-inverse of nu(x) = x - lam1 * u'(x), evaluated pointwise.

    ``nu`` is strictly increasing with slope >= 1 for concave u and lam1 >= 0,
    so each point has a unique root; found by bracketed bisection with Newton
    polish.  Raises if no bracket exists inside the utility's domain.
    """
    y = np.asarray(values, dtype=float)
    if lam1 == 0.0:
        return y.copy()
    domain_min = getattr(utility, "domain_min", -np.inf)

    def nu(x):
        return x - lam1 * utility.marginal(x)

    guess = np.maximum(y, domain_min + 1e-9 * (1.0 + abs(domain_min)))
    radius = lam1 * (np.abs(utility.marginal(guess)) + 1.0)
    lo = np.maximum(y - radius, domain_min + 1e-12 * (1.0 + abs(domain_min)))
    hi = y + radius
    for _ in range(80):
        bad_lo = nu(lo) > y
        bad_hi = nu(hi) < y
        if not bad_lo.any() and not bad_hi.any():
            break
        span = np.maximum(hi - lo, 1e-6)
        lo = np.where(bad_lo, np.maximum(lo - span, domain_min + (lo - domain_min) / 2.0), lo)
        hi = np.where(bad_hi, hi + span, hi)
    else:
        raise UtilityDomainError("could not bracket the utility inverse on its domain")
    x = 0.5 * (lo + hi)
    tol_abs = tol * max(1.0, float(np.max(np.abs(y))))
    for _ in range(200):
        fx = nu(x) - y
        done = np.abs(fx) <= tol_abs
        if done.all():
            break
        too_high = fx > 0.0
        lo = np.where(done | too_high, lo, x)
        hi = np.where(done | ~too_high, hi, x)
        slope = 1.0 - lam1 * utility.curvature(x)
        newton = x - fx / np.maximum(slope, 1.0)
        inside = (newton > lo) & (newton < hi)
        x = np.where(done, x, np.where(inside, newton, 0.5 * (lo + hi)))
    else:
        raise NotConvergedError("utility inverse did not converge on the grid")
    return x


def solve_utility_rm(
    baseline: QuantileGrid,
    spec: UtilityRm,
    zeta: float = 0.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
) -> StressedModel:
    """Expected-utility floor combined with risk-measure equalities.

    The utility constraint is an inequality: if the risk-measure-only
    solution already satisfies it the utility multiplier is zero; otherwise
    the constraint binds and the solution is the inverse of
    x - lam1 * u'(x) applied to the projected risk-measure solution.
    """
    gammas, rm_targets, rm_names = (
        _rm_arrays(baseline, spec.constraints)
        if spec.constraints
        else (np.empty((0, baseline.n)), np.empty(0), [])
    )
    d = len(rm_targets)
    names = ["utility", *rm_names]
    scale_u = max(1.0, abs(spec.floor))

    if d:
        rm_model = solve_rm(
            baseline, RmStress(spec.constraints), zeta=zeta, tol=tol, max_iter=max_iter
        )
        base_util = expected_utility(rm_model.stressed, spec.utility)
        if base_util >= spec.floor - tol * scale_u:
            return _model(
                baseline,
                rm_model.stressed.q,
                np.concatenate(([0.0], rm_model.multipliers)),
                np.concatenate(([min(base_util - spec.floor, 0.0)], rm_model.residuals)),
                names,
                zeta,
                rm_model.evaluations,
            )
    else:
        base_util = expected_utility(baseline, spec.utility)
        if base_util >= spec.floor - tol * scale_u:
            return _model(
                baseline, baseline.q.copy(), [0.0],
                [min(base_util - spec.floor, 0.0)], names, zeta, 1,
            )

    def build(lam):
        ell = baseline.q + (gammas.T @ lam[1:] if d else 0.0)
        projected = _isotonic(ell, zeta=zeta)
        return _inverse_shifted_marginal(projected, spec.utility, max(lam[0], 0.0))

    stressed_for = _ProjectionCache(build)

    targets = np.concatenate(([spec.floor], rm_targets))

    def residual(lam):
        qs = stressed_for(lam)
        out = [float(np.mean(spec.utility.value(qs))) - spec.floor]
        if d:
            out.extend(qs @ gammas.T / baseline.n - rm_targets)
        return np.asarray(out)

    lower = np.full(1 + d, -np.inf)
    lower[0] = 0.0
    result = multiplier_search(
        residual,
        np.zeros(1 + d),
        scale=_target_scale(targets),
        tol=tol,
        max_iter=max_iter,
        lower=lower,
    )
    qs = stressed_for(result.multipliers)
    return _model(
        baseline, qs, result.multipliers, result.residuals, names, zeta,
        result.evaluations,
    )


def solve(
    baseline: QuantileGrid,
    spec: StressSpec,
    zeta: float = 0.0,
    tol: float = DEFAULT_TOL,
) -> StressedModel:
    """Dispatch a stress specification to its solver."""
    if isinstance(spec, RmStress):
        return solve_rm(baseline, spec, zeta=zeta, tol=tol)
    if isinstance(spec, MeanVarRm):
        return solve_mean_var_rm(baseline, spec, zeta=zeta, tol=tol)
    if isinstance(spec, IntegralStress):
        return solve_integral(baseline, spec, tol=tol)
    if isinstance(spec, VarStress):
        return solve_var(baseline, spec)
    if isinstance(spec, UtilityRm):
        return solve_utility_rm(baseline, spec, zeta=zeta, tol=tol)
    raise ValidationError(f"unknown stress specification: {type(spec).__name__}")
