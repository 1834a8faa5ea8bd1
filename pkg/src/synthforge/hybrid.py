"""Hybrid step: pair originals with synthetic rows, then mix them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

ALPHA_CEILING = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class HybridConfig:
    """Either a fixed mixing weight ``alpha`` or a LID budget (percent).

    With a budget, ``alpha`` is solved from the uniform-marginal bound using
    ``eta`` and ``range_width``; ``range_width=None`` defers to the data.
    """

    alpha: Optional[float] = None
    lid_budget: Optional[float] = None
    eta: float = 0.001
    range_width: Optional[float] = None
    pairing_seed: int = 0

    def __post_init__(self):
        if (self.alpha is None) == (self.lid_budget is None):
            raise ValueError("specify exactly one of alpha and lid_budget")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.lid_budget is not None and not 0.0 < self.lid_budget <= 100.0:
            raise ValueError(f"LID budget must lie in (0, 100], got {self.lid_budget}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.range_width is not None and not self.range_width > 0:
            raise ValueError(f"range width must be positive, got {self.range_width}")

    def resolve_alpha(self, d: int, range_width: Optional[float] = None) -> float:
        if self.alpha is not None:
            return float(self.alpha)
        width = self.range_width if self.range_width is not None else range_width
        if width is None:
            raise ValueError("a LID budget needs a range width")
        return solve_alpha_for_budget(self.lid_budget, self.eta, d, width)


def nearest_pairing(original: np.ndarray, synthetic: np.ndarray) -> np.ndarray:
    """Greedy nearest-neighbour matching without replacement.

    Originals are visited in row order; each takes the Euclidean-nearest
    synthetic row not yet taken, ties going to the lowest row index.
    Returns ``perm`` with ``synthetic[perm]`` aligned to ``original``.
    """
    x = np.asarray(original, dtype=float)
    s = np.asarray(synthetic, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if s.ndim == 1:
        s = s[:, None]
    if x.shape != s.shape:
        raise ValueError(f"shape mismatch: original {x.shape} vs synthetic {s.shape}")
    n = x.shape[0]
    perm = np.empty(n, dtype=np.intp)
    taken = np.zeros(n, dtype=bool)
    for i in range(n):
        d2 = np.sum((s - x[i]) ** 2, axis=1)
        d2[taken] = np.inf
        k = int(np.argmin(d2))
        perm[i] = k
        taken[k] = True
    return perm


def mix(original: np.ndarray, paired_synthetic: np.ndarray, alpha: float) -> np.ndarray:
    """``alpha * original + (1 - alpha) * paired_synthetic``, exact at both endpoints."""
    x = np.asarray(original, dtype=float)
    s = np.asarray(paired_synthetic, dtype=float)
    if x.shape != s.shape:
        raise ValueError(f"shape mismatch: original {x.shape} vs synthetic {s.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 1.0:
        return x.copy()
    if alpha == 0.0:
        return s.copy()
    return alpha * x + (1.0 - alpha) * s


def solve_alpha_for_budget(lid_budget: float, eta: float, d: int, range_width: float) -> float:
    """Largest alpha whose uniform-marginal LID bound equals ``lid_budget`` percent.

    ``alpha = 1 - 2 eta / (w (1 - (1 - B)^(1/d)))``, clamped to ``[0, 1)``.
    """
    if not 0.0 < lid_budget <= 100.0:
        raise ValueError(f"LID budget must lie in (0, 100], got {lid_budget}")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if not range_width > 0:
        raise ValueError(f"range width must be positive, got {range_width}")
    if lid_budget == 100.0:
        return ALPHA_CEILING
    frac = lid_budget / 100.0
    # per-dimension breach probability: 1 - (1 - B)^(1/d)
    per_dim = -math.expm1(math.log1p(-frac) / d)
    if not per_dim > 0:
        raise ValueError(f"LID budget {lid_budget}% is too small to invert for d={d}")
    alpha = 1.0 - 2.0 * eta / (range_width * per_dim)
    if alpha < 0.0:
        warnings.warn(
            f"LID budget {lid_budget}% is unreachable even with pure synthetic inputs "
            f"(unclamped alpha {alpha:.4g}); using alpha = 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    return min(alpha, ALPHA_CEILING)
