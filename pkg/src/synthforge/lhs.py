"""Stage-1 input synthesis: Latin hypercube sampling with Iman-Conover
covariance induction, plus the non-statistical baseline samplers."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr, ndtri

from .dataset import NumericalError

SAMPLER_KINDS = ("sh", "random", "weibull", "cauchy")
_CLAMP = 1e-9
PIVOT_FLOOR = 1e-10


@dataclass(frozen=True)
class Stage1Sampler:
    """Stage-1 generator choice.

    ``sh`` is the statistics-retaining LHS sampler; the others draw i.i.d.
    entries from U(0, 1), Weibull(scale, shape) and Cauchy(loc, scale).
    """

    kind: str = "sh"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = self.kind.lower()
        aliases = {"ranweibull": "weibull", "rancauchy": "cauchy", "uniform": "random"}
        kind = aliases.get(kind, kind)
        if kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler {self.kind!r}; expected one of {SAMPLER_KINDS}")
        object.__setattr__(self, "kind", kind)
        p = self.resolved_params()
        if kind == "weibull" and not (p["scale"] > 0 and p["shape"] > 0):
            raise ValueError("Weibull scale and shape must be positive")
        if kind == "cauchy" and not p["scale"] > 0:
            raise ValueError("Cauchy scale must be positive")
        if kind == "random" and not p["low"] < p["high"]:
            raise ValueError("uniform sampler needs low < high")

    def resolved_params(self) -> dict:
        defaults = {
            "sh": {},
            "random": {"low": 0.0, "high": 1.0},
            "weibull": {"scale": 1.0, "shape": 8.0},
            "cauchy": {"loc": 0.0, "scale": 1.0},
        }[self.kind]
        return {**defaults, **self.params}


def covariance(x: np.ndarray) -> np.ndarray:
    """Mean-removed covariance with divisor n."""
    x = np.asarray(x, dtype=float)
    xc = x - x.mean(axis=0)
    return xc.T @ xc / x.shape[0]


def correlation(x: np.ndarray) -> np.ndarray:
    """Pearson correlation; constant columns get a unit diagonal and zero off-diagonal."""
    c = covariance(x)
    sd = np.sqrt(np.diag(c))
    sd_safe = np.where(sd > 0, sd, 1.0)
    r = c / np.outer(sd_safe, sd_safe)
    np.fill_diagonal(r, 1.0)
    return (r + r.T) / 2


def lhs_unit_sample(n: int, d: int, seed=None) -> np.ndarray:
    """Latin hypercube sample on (0, 1)^d using stratum centers.

    Every column is an independent random permutation of ``(k - 0.5) / n``.
    """
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    centers = (np.arange(n) + 0.5) / n
    return np.column_stack([rng.permutation(centers) for _ in range(d)])


def cholesky_factor(c: np.ndarray, name: str = "covariance", singular_ok: bool = True) -> np.ndarray:
    """Factor ``F`` with ``F @ F.T == c`` for a PSD matrix.

    A well-conditioned matrix gets its lower Cholesky factor. A matrix that
    is PSD but numerically singular gets, when ``singular_ok``, the symmetric
    eigen square root (clipped at zero) with a warning; this keeps
    ``F @ F.T`` equal to ``c`` without perturbing it.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"{name} must be square, got shape {c.shape}")
    scale = max(float(np.max(np.abs(c))), 1.0)
    if not np.allclose(c, c.T, atol=1e-10 * scale, rtol=0):
        raise ValueError(f"{name} is not symmetric")
    c = (c + c.T) / 2
    d = c.shape[0]
    try:
        chol = np.linalg.cholesky(c)
        if np.min(np.diag(chol)) ** 2 >= PIVOT_FLOOR * max(np.trace(c) / d, 1e-300):
            return chol
    except np.linalg.LinAlgError:
        pass
    evals, evecs = np.linalg.eigh(c)
    if evals[0] < -PIVOT_FLOOR * scale:
        raise ValueError(f"{name} is not positive semi-definite (min eigenvalue {evals[0]:.3g})")
    if not singular_ok:
        raise NumericalError(f"{name} is singular; cannot factor it")
    if not np.trace(c) > 0:
        raise NumericalError(f"{name} has zero trace")
    warnings.warn(
        f"{name} is numerically singular; using a rank-deficient square-root factor",
        RuntimeWarning,
        stacklevel=2,
    )
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def correlate_normal_scores(scores: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Linearly remix normal scores so their sample covariance equals ``target``.

    With ``target = P P^T`` and ``cov(scores) = Q Q^T`` (Q lower triangular)
    this returns ``scores @ (P Q^-1)^T``.
    """
    scores = np.asarray(scores, dtype=float)
    n, d = scores.shape
    target = np.asarray(target, dtype=float)
    if target.shape != (d, d):
        raise ValueError(f"target shape {target.shape} does not match {d} columns")
    if np.any(np.diag(target) <= 0):
        raise ValueError("target covariance needs a positive diagonal")
    if n <= d:
        raise ValueError(f"need more rows than columns for an invertible sample covariance (n={n}, d={d})")
    p = cholesky_factor(target, "target covariance")
    q = cholesky_factor(covariance(scores), "sample covariance of the normal scores", singular_ok=False)
    # (P Q^-1)^T = Q^-T P^T
    m_t = solve_triangular(q, p.T, lower=True, trans="T")
    return scores @ m_t


def iman_conover(unit_sample: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Impose ``target`` covariance on a unit-cube sample through a Gaussian copula.

    Columns go through the standard-normal quantile, get remixed by
    :func:`correlate_normal_scores`, and come back through the normal CDF.
    """
    u = np.asarray(unit_sample, dtype=float)
    if u.ndim != 2:
        raise ValueError("unit sample must be an n x d matrix")
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("unit sample must lie strictly inside (0, 1)")
    return ndtr(correlate_normal_scores(ndtri(u), target))


def synthesize(inputs: np.ndarray, models: Sequence, seed=None, target=None) -> np.ndarray:
    """Pure synthetic inputs with the marginals of ``models`` and the
    dependence structure of ``inputs``.

    ``target`` defaults to the correlation matrix of ``inputs``; its normal
    scores are mapped through each column's quantile function, so marginal
    scale comes from the fitted models rather than from the copula.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if len(models) != d:
        raise ValueError(f"{len(models)} marginal models for {d} columns")
    if n <= d:
        raise ValueError(f"synthesis needs more rows than columns (n={n}, d={d})")
    if target is None:
        target = correlation(x)
    u = lhs_unit_sample(n, d, seed)
    r = np.clip(iman_conover(u, target), _CLAMP, 1.0 - _CLAMP)
    return np.column_stack([models[j].icdf(r[:, j]) for j in range(d)])


def baseline_sample(sampler: Stage1Sampler, n: int, d: int, seed=None) -> np.ndarray:
    """i.i.d. draws from a non-statistical baseline distribution."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if isinstance(sampler, str):
        sampler = Stage1Sampler(sampler)
    if sampler.kind == "sh":
        raise ValueError("the SH sampler needs fitted marginals; use synthesize()")
    p = sampler.resolved_params()
    rng = np.random.default_rng(seed)
    if sampler.kind == "random":
        return rng.uniform(p["low"], p["high"], size=(n, d))
    if sampler.kind == "weibull":
        return p["scale"] * rng.weibull(p["shape"], size=(n, d))
    return p["loc"] + p["scale"] * rng.standard_cauchy(size=(n, d))
