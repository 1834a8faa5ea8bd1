"""Kernel ridge regression and the Nadaraya-Watson estimator.

KRR minimizes ``(1/n) sum (f(x_i) - y_i)^2 + lam ||f||_K^2``; with the
representer expansion ``f = sum_j c_j K(x_j, .)`` the coefficients solve
``(K + n lam I) c = y``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .dataset import NumericalError

KERNEL_KINDS = ("wendland", "gaussian")
DEFAULT_LAMBDA_GRID = tuple(np.round(0.0002 * np.arange(11), 10))
DEFAULT_NW_GRID = tuple(0.01 * 2.0 ** np.arange(11))


def wendland(r):
    """Compactly supported kernel profile ``(1 - r)^4 (4 r + 1)`` on ``[0, 1]``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be non-negative")
    t = np.clip(1.0 - r, 0.0, None)
    out = t ** 4 * (4.0 * r + 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Kernel:
    """Radial kernel ``K(x, x') = h(||x - x'||)``.

    ``width`` is the Gaussian length scale; the Wendland kernel has unit
    support and ignores it.
    """

    kind: str = "wendland"
    width: float = 1.0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNEL_KINDS}")
        object.__setattr__(self, "kind", kind)
        if not self.width > 0:
            raise ValueError(f"kernel width must be positive, got {self.width}")

    def profile(self, r):
        if self.kind == "wendland":
            return wendland(r)
        r = np.asarray(r, dtype=float)
        return np.exp(-0.5 * (r / self.width) ** 2)

    def gram(self, a, b=None) -> np.ndarray:
        a = _as_matrix(a)
        b = a if b is None else _as_matrix(b)
        return self.profile(cdist(a, b))


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


@dataclass(frozen=True, eq=False)
class KrrModel:
    training_inputs: np.ndarray
    coefficients: np.ndarray
    lam: float
    kernel: Kernel

    def predict(self, queries) -> np.ndarray:
        """``f(x) = sum_j c_j K(x, x_j)`` at each query row."""
        q = _as_matrix(queries)
        if q.shape[1] != self.training_inputs.shape[1]:
            raise ValueError(
                f"query width {q.shape[1]} does not match training width {self.training_inputs.shape[1]}"
            )
        return self.kernel.gram(q, self.training_inputs) @ self.coefficients


def _solve_regularized(gram: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    n = gram.shape[0]
    a = gram + n * lam * np.eye(n)
    try:
        factor = cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        if lam > 0:
            raise NumericalError("regularized kernel system is not positive definite")
        jitter = 1e-10 * np.trace(gram) / n
        warnings.warn(
            f"kernel matrix is singular at lambda=0; retrying with jitter {jitter:.3g}",
            RuntimeWarning,
            stacklevel=3,
        )
        a = a + jitter * np.eye(n)
        try:
            factor = cho_factor(a, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("kernel system is singular; use lambda > 0") from exc
    c = cho_solve(factor, y, check_finite=False)
    # one step of iterative refinement
    c += cho_solve(factor, y - a @ c, check_finite=False)
    if not np.all(np.isfinite(c)):
        raise NumericalError("kernel solve produced non-finite coefficients; use lambda > 0")
    return c


def fit_krr(inputs, response, lam: float, kernel: Kernel = Kernel()) -> KrrModel:
    """Fit KRR by solving ``(K + n lam I) c = y`` with a Cholesky factorization."""
    x = _as_matrix(inputs)
    y = np.asarray(response, dtype=float).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise ValueError("response length does not match the number of inputs")
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be a non-negative number, got {lam}")
    if lam == 0 and np.unique(x, axis=0).shape[0] < x.shape[0]:
        raise ValueError("duplicated inputs make the lambda=0 system singular; use lambda > 0")
    with np.errstate(invalid="ignore", over="ignore"):
        gram = kernel.gram(x)
    if not np.all(np.isfinite(gram)):
        raise NumericalError("kernel matrix has non-finite entries")
    return KrrModel(x.copy(), _solve_regularized(gram, y, lam), float(lam), kernel)


def _fold_indices(n: int, folds: int, seed) -> list:
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def cv_lambda_scores(inputs, response, grid: Sequence[float], kernel: Kernel = Kernel(),
                     folds: int = 5, seed=0) -> np.ndarray:
    """Mean held-out MSE for each ``lam`` in ``grid`` over a seeded fold partition.

    Each training fold is eigendecomposed once and reused across the grid.
    Eigenvalues that vanish at ``lam = 0`` are dropped (pseudo-inverse).
    """
    x = _as_matrix(inputs)
    y = np.asarray(response, dtype=float).reshape(-1)
    grid = np.asarray(grid, dtype=float)
    parts = _fold_indices(x.shape[0], folds, seed)
    sse = np.zeros(grid.size)
    for k, test in enumerate(parts):
        train = np.concatenate([p for i, p in enumerate(parts) if i != k])
        evals, evecs = np.linalg.eigh(kernel.gram(x[train]))
        proj = evecs.T @ y[train]
        cross = kernel.gram(x[test], x[train]) @ evecs
        m = train.size
        tiny = max(evals[-1], 0.0) * m * np.finfo(float).eps
        for i, lam in enumerate(grid):
            denom = evals + m * lam
            inv = np.where(denom > tiny, 1.0 / np.where(denom > tiny, denom, 1.0), 0.0)
            pred = cross @ (inv * proj)
            sse[i] += np.sum((pred - y[test]) ** 2)
    return sse / x.shape[0]


def select_lambda(inputs, response, grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
                  kernel: Kernel = Kernel(), folds: int = 5, seed=0) -> float:
    """CV choice of ``lam``; ties go to the larger value."""
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(g < 0 for g in grid):
        raise ValueError("lambda grid values must be non-negative")
    if len(grid) == 1:
        return grid[0]
    n = _as_matrix(inputs).shape[0]
    if folds < 2 or n < folds:
        raise ValueError(f"need 2 <= folds <= n (folds={folds}, n={n})")
    scores = cv_lambda_scores(inputs, response, grid, kernel, folds, seed)
    best = np.flatnonzero(scores == scores.min())
    return grid[int(best[-1])]


def fit_krr_cv(inputs, response, grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
               kernel: Kernel = Kernel(), folds: int = 5, seed=0) -> KrrModel:
    lam = select_lambda(inputs, response, grid, kernel, folds, seed)
    return fit_krr(inputs, response, lam, kernel)


def nadaraya_watson(inputs, response, bandwidth: float, queries) -> np.ndarray:
    """Gaussian-weighted local average of the training responses.

    A query whose weights all underflow takes the response of its nearest
    training point.
    """
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    x = _as_matrix(inputs)
    y = np.asarray(response, dtype=float).reshape(-1)
    q = _as_matrix(queries)
    if q.shape[1] != x.shape[1]:
        raise ValueError("query width does not match training width")
    d2 = cdist(q, x, "sqeuclidean")
    w = np.exp(-0.5 * d2 / bandwidth ** 2)
    total = w.sum(axis=1)
    out = np.empty(q.shape[0])
    ok = total > 0
    out[ok] = (w[ok] @ y) / total[ok]
    if not np.all(ok):
        out[~ok] = y[np.argmin(d2[~ok], axis=1)]
    return out


def select_nw_bandwidth(inputs, response, grid: Sequence[float] = DEFAULT_NW_GRID,
                        folds: int = 5, seed=0) -> float:
    """CV choice of the Nadaraya-Watson bandwidth; ties go to the larger value."""
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("bandwidth grid is empty")
    if len(grid) == 1:
        return grid[0]
    x = _as_matrix(inputs)
    y = np.asarray(response, dtype=float).reshape(-1)
    if folds < 2 or x.shape[0] < folds:
        raise ValueError(f"need 2 <= folds <= n (folds={folds}, n={x.shape[0]})")
    parts = _fold_indices(x.shape[0], folds, seed)
    sse = np.zeros(len(grid))
    for k, test in enumerate(parts):
        train = np.concatenate([p for i, p in enumerate(parts) if i != k])
        for i, h in enumerate(grid):
            pred = nadaraya_watson(x[train], y[train], h, x[test])
            sse[i] += np.sum((pred - y[test]) ** 2)
    best = np.flatnonzero(sse == sse.min())
    return grid[int(best[-1])]
