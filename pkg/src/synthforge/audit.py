"""Privacy (location-based interval disclosure) and fidelity measurements."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lhs import covariance

SCHEMA_VERSION = 1
DEFAULT_BINS = 50
_TINY = 1e-12


@dataclass(frozen=True, eq=False)
class PrivacyReport:
    """Row-aligned LID of a perturbed dataset against its original.

    ``breached_rows`` holds the union over dimensions of the records that
    sit within ``eta`` of their original in at least one attribute.
    """

    lid_percent: float
    eta: float
    per_dimension_breach_counts: tuple
    breached_rows: np.ndarray
    n: int
    theoretical_bound_percent: Optional[float] = None
    bound_is_heuristic: bool = False

    def to_dict(self) -> dict:
        out = {
            "schemaVersion": SCHEMA_VERSION,
            "lidPercent": self.lid_percent,
            "eta": self.eta,
            "records": self.n,
            "breachedRecords": int(self.breached_rows.size),
            "perDimensionBreachCounts": list(self.per_dimension_breach_counts),
        }
        if self.theoretical_bound_percent is not None:
            out["theoreticalBoundPercent"] = self.theoretical_bound_percent
            out["boundIsHeuristic"] = self.bound_is_heuristic
        return out


@dataclass(frozen=True, eq=False)
class FidelityReport:
    """Distributional distance and relative moment deltas per column.

    A delta whose reference moment is below 1e-12 in magnitude is reported
    as an absolute difference and flagged in the matching ``*_absolute`` mask.
    """

    tv_per_column: np.ndarray
    mean_deltas: np.ndarray
    variance_deltas: np.ndarray
    covariance_deltas: np.ndarray
    mean_absolute: np.ndarray
    variance_absolute: np.ndarray
    covariance_absolute: np.ndarray
    bin_count: int = DEFAULT_BINS
    column_names: tuple = field(default=())

    @property
    def tv_mean(self) -> float:
        return float(np.mean(self.tv_per_column))

    def to_dict(self) -> dict:
        names = list(self.column_names) or [f"x{j + 1}" for j in range(self.tv_per_column.size)]
        return {
            "schemaVersion": SCHEMA_VERSION,
            "binCount": self.bin_count,
            "columns": names,
            "tvNorm": {"perColumn": self.tv_per_column.tolist(), "mean": self.tv_mean},
            "meanDeltas": self.mean_deltas.tolist(),
            "varianceDeltas": self.variance_deltas.tolist(),
            "covarianceDeltas": self.covariance_deltas.tolist(),
            "absoluteDeltaFlags": {
                "mean": self.mean_absolute.tolist(),
                "variance": self.variance_absolute.tolist(),
                "covariance": self.covariance_absolute.tolist(),
            },
        }


def _pair(original, synthetic) -> tuple:
    x = np.asarray(original, dtype=float)
    s = np.asarray(synthetic, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if s.ndim == 1:
        s = s[:, None]
    return x, s


def compute_lid(original, synthetic, eta: float) -> PrivacyReport:
    """Percentage of records with some attribute within ``eta`` of the original.

    Record ``i`` of ``synthetic`` is compared with record ``i`` of
    ``original``; no nearest-neighbour linkage is attempted.
    """
    x, s = _pair(original, synthetic)
    if x.shape != s.shape:
        raise ValueError(f"LID needs row-aligned data of equal shape, got {x.shape} and {s.shape}")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    close = np.abs(x - s) <= eta
    rows = np.flatnonzero(close.any(axis=1))
    n = x.shape[0]
    return PrivacyReport(
        lid_percent=100.0 * rows.size / n,
        eta=float(eta),
        per_dimension_breach_counts=tuple(int(c) for c in close.sum(axis=0)),
        breached_rows=rows,
        n=n,
    )


def lid_bound(alpha: float, eta: float, d: int, range_width: float = 1.0) -> float:
    """Uniform-marginal LID upper bound, in percent:
    ``(1 - (1 - 2 eta / (w (1 - alpha)))^d) * 100``."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if not eta >= 0 or not range_width > 0 or d < 1:
        raise ValueError("need eta >= 0, range_width > 0 and d >= 1")
    p = 2.0 * eta / (range_width * (1.0 - alpha))
    if not p < 1.0:
        raise ValueError("bound formula domain exceeded: 2 eta / (w (1 - alpha)) must be below 1")
    # 1 - (1 - p)^d, accurate for small p
    return -100.0 * np.expm1(d * np.log1p(-p))


def tv_norm(p, q) -> float:
    """Total variation ``0.5 * sum |p_i - q_i|`` of two probability vectors."""
    p = np.asarray(p, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    if p.shape != q.shape:
        raise ValueError("probability vectors differ in length")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a normalized probability vector")
    return float(min(0.5 * np.abs(p - q).sum(), 1.0))


def histogram_tv(original_column, synthetic_column, bins: int = DEFAULT_BINS) -> float:
    """TV distance between normalized histograms on shared equal-width bins
    spanning both samples."""
    a = np.asarray(original_column, dtype=float).reshape(-1)
    b = np.asarray(synthetic_column, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("histogram TV needs non-empty columns")
    if bins < 2:
        raise ValueError(f"bin count must be at least 2, got {bins}")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if lo == hi:
        return 0.0
    edges = np.linspace(lo, hi, int(bins) + 1)
    pa = np.histogram(a, edges)[0] / a.size
    pb = np.histogram(b, edges)[0] / b.size
    return tv_norm(pa, pb)


def _relative(ref: np.ndarray, other: np.ndarray) -> tuple:
    diff = np.abs(ref - other)
    absolute = np.abs(ref) < _TINY
    denom = np.where(absolute, 1.0, np.abs(ref))
    return diff / denom, absolute


def moment_deltas(original, synthetic) -> dict:
    """Relative deltas of means, variances and covariances (divisor n)."""
    x, s = _pair(original, synthetic)
    if x.shape[1] != s.shape[1]:
        raise ValueError(f"column counts differ: {x.shape[1]} vs {s.shape[1]}")
    mean_d, mean_abs = _relative(x.mean(axis=0), s.mean(axis=0))
    cx, cs = covariance(x), covariance(s)
    var_d, var_abs = _relative(np.diag(cx), np.diag(cs))
    cov_d, cov_abs = _relative(cx, cs)
    return {
        "mean_deltas": mean_d,
        "variance_deltas": var_d,
        "covariance_deltas": cov_d,
        "mean_absolute": mean_abs,
        "variance_absolute": var_abs,
        "covariance_absolute": cov_abs,
    }


def fidelity_report(original, synthetic, bins: int = DEFAULT_BINS, column_names=()) -> FidelityReport:
    x, s = _pair(original, synthetic)
    tv = np.array([histogram_tv(x[:, j], s[:, j], bins) for j in range(x.shape[1])])
    return FidelityReport(tv_per_column=tv, bin_count=int(bins),
                          column_names=tuple(column_names), **moment_deltas(x, s))
