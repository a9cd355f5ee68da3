"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from wstress.distributions import Lognormal, QuantileGrid, discretize, midpoint_grid


def block_partitions(n):
    """All ways to cut 1..n into consecutive blocks (2**(n-1) of them)."""
    for cuts in itertools.product((False, True), repeat=n - 1):
        ends = [i + 1 for i, c in enumerate(cuts) if c] + [n]
        yield ends


def smoothed_isotonic_oracle(values, weights=None, penalties=None):
    """Exhaustive QP oracle for (smoothed) isotonic regression.

    Enumerates every block partition, solves the reduced least-squares
    problem by dense linear algebra, keeps feasible candidates, and returns
    the one with the smallest objective.  Independent of the implementation
    under test: no pooling, no banded solves.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    pen = np.zeros(n - 1) if penalties is None else np.asarray(penalties, dtype=float)
    diff = np.diff(np.eye(n), axis=0)

    def objective(x):
        return float(np.sum(w * (x - v) ** 2) + np.sum(pen * np.diff(x) ** 2))

    best_x, best_obj = None, np.inf
    for ends in block_partitions(n):
        starts = [0] + ends[:-1]
        m = len(ends)
        design = np.zeros((n, m))
        for j, (s, e) in enumerate(zip(starts, ends)):
            design[s:e, j] = 1.0
        quad = design.T @ np.diag(w) @ design
        quad += design.T @ diff.T @ np.diag(pen) @ diff @ design
        rhs = design.T @ (w * v)
        b, *_ = np.linalg.lstsq(quad, rhs, rcond=None)
        x = design @ b
        if np.any(np.diff(x) < -1e-11):
            continue
        obj = objective(x)
        if obj < best_obj - 1e-15:
            best_obj, best_x = obj, x
    return best_x


def uniform_grid(n=4096):
    """Quantile grid of the standard uniform distribution."""
    return QuantileGrid(midpoint_grid(n))


@pytest.fixture(scope="session")
def lognormal_spec():
    return Lognormal(mu=7.0 / 8.0, sigma=0.5)


@pytest.fixture(scope="session")
def lognormal_grid(lognormal_spec):
    return discretize(lognormal_spec, 4096)
