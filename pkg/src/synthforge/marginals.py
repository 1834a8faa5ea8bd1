"""Per-column marginal models: Gaussian KDE, tabulated CDF and its inverse.

The density of column ``j`` is a sum of Gaussian bumps with bandwidth ``h``,
rescaled so its mass over the support window is exactly one. The CDF is
tabulated on an even grid by cumulative Gauss-Legendre quadrature and both
the CDF and the quantile function are read off that table by linear
interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

DEFAULT_BANDWIDTH_GRID = tuple(np.round(0.05 * np.arange(1, 41), 10))
GRID_POINTS = 512
CELL_NODES = 16
SUPPORT_WIDTHS = 3.0

_CHUNK = 1 << 21


def gauss_legendre_integrate(f: Callable, a: float, b: float, nodes: int) -> float:
    """Integrate ``f`` over ``[a, b]`` with an ``nodes``-point Gauss-Legendre rule.

    ``f`` is called once with the array of mapped nodes. The rule is exact for
    polynomials of degree up to ``2 * nodes - 1``.
    """
    if int(nodes) != nodes or nodes < 1:
        raise ValueError(f"nodes must be a positive integer, got {nodes}")
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    z, w = leggauss(int(nodes))
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return float(half * np.dot(w, np.asarray(f(mid + half * z), dtype=float)))


def _gaussian_bump_mean(points: np.ndarray, samples: np.ndarray, bandwidth: float) -> np.ndarray:
    # (1/n) sum_k exp(-0.5 ((x - x_k)/h)^2), chunked over query points
    points = np.asarray(points, dtype=float)
    out = np.empty(points.shape[0])
    step = max(1, _CHUNK // max(samples.shape[0], 1))
    for start in range(0, points.shape[0], step):
        z = (points[start:start + step, None] - samples[None, :]) / bandwidth
        out[start:start + step] = np.exp(-0.5 * z * z).mean(axis=1)
    return out


@dataclass(frozen=True, eq=False)
class MarginalModel:
    """Fitted marginal of one column.

    Attributes
    ----------
    bandwidth : float
        KDE bandwidth.
    points : ndarray
        Evenly spaced grid over the support window.
    density : ndarray
        Normalized density at ``points``.
    cdf_values : ndarray
        Cumulative probability at ``points``; starts at 0 and ends at 1.
    normalizer : float
        Factor mapping the raw bump average to a unit-mass density.
    samples : ndarray
        Training values of the column.
    column_index : int
    """

    bandwidth: float
    points: np.ndarray
    density: np.ndarray
    cdf_values: np.ndarray
    normalizer: float
    samples: np.ndarray
    column_index: int = 0

    @property
    def support(self) -> tuple:
        return float(self.points[0]), float(self.points[-1])

    def pdf(self, x):
        """Normalized density at ``x``; zero outside the support window."""
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        vals = self.normalizer * _gaussian_bump_mean(flat, self.samples, self.bandwidth)
        lo, hi = self.support
        vals[(flat < lo) | (flat > hi)] = 0.0
        return vals.reshape(x.shape) if x.ndim else float(vals[0])

    def cdf(self, x):
        """Piecewise-linear CDF, clamped to [0, 1] outside the support."""
        out = np.interp(x, self.points, self.cdf_values)
        return np.clip(out, 0.0, 1.0)

    def icdf(self, q):
        """Generalized inverse ``inf{x : F(x) >= q}`` on the tabulated CDF."""
        q = np.asarray(q, dtype=float)
        if np.any(~np.isfinite(q)) or np.any((q < 0.0) | (q > 1.0)):
            raise ValueError("quantile levels must lie in [0, 1]")
        flat = np.atleast_1d(q).ravel()
        c, p = self.cdf_values, self.points
        k = np.searchsorted(c, flat, side="left")
        k = np.minimum(k, c.size - 1)
        out = np.empty_like(flat)
        first = k == 0
        out[first] = p[0]
        kk = k[~first]
        c0, c1 = c[kk - 1], c[kk]
        frac = (flat[~first] - c0) / (c1 - c0)
        out[~first] = p[kk - 1] + np.clip(frac, 0.0, 1.0) * (p[kk] - p[kk - 1])
        return out.reshape(q.shape) if q.ndim else float(out[0])


def _validate_column(values, column_index: int) -> np.ndarray:
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError(f"column {column_index} is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"column {column_index} contains non-finite values")
    return x


def fit_kde(
    values,
    bandwidth: float,
    column_index: int = 0,
    support: Optional[tuple] = None,
    grid_points: int = GRID_POINTS,
    cell_nodes: int = CELL_NODES,
) -> MarginalModel:
    """Fit the Gaussian KDE marginal of one column.

    The support window defaults to ``[min - 3h, max + 3h]``. The CDF table is
    the cumulative sum of per-cell Gauss-Legendre integrals of the density,
    and the density is normalized so the table ends at exactly one.
    """
    x = _validate_column(values, column_index)
    if not np.isfinite(bandwidth) or bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if support is None:
        lo = x.min() - SUPPORT_WIDTHS * bandwidth
        hi = x.max() + SUPPORT_WIDTHS * bandwidth
    else:
        lo, hi = map(float, support)
        if not lo < hi:
            raise ValueError(f"empty support window {support}")
    grid_points = int(grid_points)
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")

    points = np.linspace(lo, hi, grid_points)
    z, w = leggauss(int(cell_nodes))
    half = 0.5 * (points[1:] - points[:-1])
    mid = 0.5 * (points[1:] + points[:-1])
    nodes = (mid[:, None] + half[:, None] * z[None, :]).ravel()
    raw = _gaussian_bump_mean(nodes, x, bandwidth).reshape(mid.size, z.size)
    cell_mass = half * (raw @ w)

    total = cell_mass.sum()
    if not total > 0:
        raise ValueError(f"column {column_index}: density has no mass on the support window")
    cdf = np.concatenate(([0.0], np.cumsum(cell_mass) / total))
    cdf[-1] = 1.0
    cdf = np.maximum.accumulate(cdf)
    normalizer = 1.0 / total
    density = normalizer * _gaussian_bump_mean(points, x, bandwidth)
    return MarginalModel(
        bandwidth=float(bandwidth),
        points=points,
        density=density,
        cdf_values=cdf,
        normalizer=float(normalizer),
        samples=x,
        column_index=column_index,
    )


def _heldout_loglik(test: np.ndarray, train: np.ndarray, bandwidths: np.ndarray) -> np.ndarray:
    # total log-likelihood of ``test`` under a normalized Gaussian KDE on ``train``
    out = np.zeros(bandwidths.size)
    step = max(1, _CHUNK // max(train.size, 1))
    log_norm = np.log(train.size) + 0.5 * np.log(2.0 * np.pi) + np.log(bandwidths)
    for start in range(0, test.size, step):
        d2 = (test[start:start + step, None] - train[None, :]) ** 2
        nearest = d2.min(axis=1)
        excess = d2 - nearest[:, None]
        for i, h in enumerate(bandwidths):
            scale = -0.5 / (h * h)
            ll = scale * nearest + np.log(np.exp(scale * excess).sum(axis=1)) - log_norm[i]
            out[i] += ll.sum()
    return out


def select_bandwidth(
    values,
    grid: Sequence[float] = DEFAULT_BANDWIDTH_GRID,
    folds: int = 5,
    seed: int = 0,
    column_index: int = 0,
) -> float:
    """Pick the KDE bandwidth by k-fold held-out log-likelihood.

    Folds come from a seeded random permutation of the rows. Ties go to the
    smaller bandwidth.
    """
    x = _validate_column(values, column_index)
    grid = np.asarray(sorted(float(g) for g in grid))
    if grid.size == 0:
        raise ValueError("bandwidth grid is empty")
    if np.any(grid <= 0):
        raise ValueError("bandwidth grid values must be positive")
    if grid.size == 1:
        return float(grid[0])
    if folds < 2:
        raise ValueError(f"folds must be at least 2, got {folds}")
    if x.size < folds:
        raise ValueError(f"column {column_index}: {x.size} samples is fewer than {folds} folds")

    perm = np.random.default_rng(seed).permutation(x.size)
    parts = np.array_split(perm, folds)
    score = np.zeros(grid.size)
    for k, test_idx in enumerate(parts):
        train_idx = np.concatenate([p for i, p in enumerate(parts) if i != k])
        score += _heldout_loglik(x[test_idx], x[train_idx], grid)
    return float(grid[int(np.argmax(score))])


def fit_marginals(
    inputs: np.ndarray,
    bandwidths: Optional[Sequence[float]] = None,
    grid: Sequence[float] = DEFAULT_BANDWIDTH_GRID,
    folds: int = 5,
    seed: int = 0,
) -> list:
    """Fit one marginal per column, selecting bandwidths by CV when not given."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    models = []
    for j in range(inputs.shape[1]):
        col = inputs[:, j]
        if bandwidths is not None:
            h = bandwidths[j]
        elif len(grid) > 1 and col.size < folds:
            h = float(min(grid))
        else:
            h = select_bandwidth(col, grid, folds, seed + j, column_index=j)
        models.append(fit_kde(col, h, column_index=j))
    return models
