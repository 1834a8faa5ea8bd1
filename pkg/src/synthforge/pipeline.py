"""End-to-end two-stage synthesis.

Stage 1 fits per-column marginals, draws pure synthetic inputs, pairs each
original row with its nearest unused synthetic row and mixes the two.
Stage 2 fits kernel ridge regression on the original data and evaluates it
on the mixed inputs to produce noise-free synthetic responses.
"""

from __future__ import annotations

import time
import warnings
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .audit import DEFAULT_BINS, FidelityReport, PrivacyReport, compute_lid, fidelity_report, lid_bound
from .dataset import Dataset
from .hybrid import HybridConfig, mix, nearest_pairing
from .lhs import Stage1Sampler, baseline_sample, synthesize
from .marginals import DEFAULT_BANDWIDTH_GRID, fit_marginals
from .regression import DEFAULT_LAMBDA_GRID, Kernel, KrrModel, fit_krr, select_lambda

SCALINGS = ("none", "minmax")


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the error."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"stage '{stage}' failed: {error}")
        self.stage = stage
        self.error = error


@dataclass(frozen=True)
class SynthesisPlan:
    sampler: Stage1Sampler = field(default_factory=Stage1Sampler)
    hybrid: HybridConfig = field(default_factory=lambda: HybridConfig(alpha=0.5))
    kernel: Kernel = field(default_factory=Kernel)
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    bandwidth_grid: tuple = DEFAULT_BANDWIDTH_GRID
    folds: int = 5
    seed: int = 0
    scaling: str = "none"
    assume_uniform: bool = False
    bins: int = DEFAULT_BINS
    input_columns: Optional[tuple] = None
    response_column: Optional[str] = None

    def __post_init__(self):
        if not self.lambda_grid:
            raise ValueError("lambda grid is empty")
        if not self.bandwidth_grid:
            raise ValueError("bandwidth grid is empty")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.scaling not in SCALINGS:
            raise ValueError(f"unknown scaling {self.scaling!r}; expected one of {SCALINGS}")
        if (self.input_columns is not None and self.response_column is not None
                and self.response_column in self.input_columns):
            raise ValueError(f"response column {self.response_column!r} is also an input column")

    def with_alpha(self, alpha: float) -> "SynthesisPlan":
        return replace(self, hybrid=replace(self.hybrid, alpha=alpha, lid_budget=None))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda_grid"] = list(self.lambda_grid)
        out["bandwidth_grid"] = list(self.bandwidth_grid)
        if self.input_columns is not None:
            out["input_columns"] = list(self.input_columns)
        return out


def substream(seed: int, stream: int) -> int:
    """Independent integer seed for one named random stream of a run."""
    return int(np.random.SeedSequence([int(seed), stream]).generate_state(1)[0])


_BANDWIDTH_STREAM, _SAMPLE_STREAM, _LAMBDA_STREAM = 1, 2, 3


class _MinMax:
    def __init__(self, x: np.ndarray, enabled: bool):
        self.lo = x.min(axis=0) if enabled else np.zeros(x.shape[1])
        width = x.max(axis=0) - x.min(axis=0) if enabled else np.ones(x.shape[1])
        self.width = np.where(width > 0, width, 1.0)
        self.enabled = enabled

    def forward(self, x):
        return (x - self.lo) / self.width if self.enabled else x

    def inverse(self, z):
        return z * self.width + self.lo if self.enabled else z


@dataclass(eq=False)
class PipelineResult:
    dataset: Dataset
    privacy: PrivacyReport
    fidelity: FidelityReport
    alpha: float
    lam: float
    bandwidths: Optional[list]
    timings: dict


class TwoStageSynthesizer:
    """Fit once on the original data, then generate at any mixing weight.

    Examples
    --------
    >>> synth = TwoStageSynthesizer(plan).fit(data)      # doctest: +SKIP
    >>> synthetic = synth.generate(alpha=0.2)            # doctest: +SKIP
    """

    def __init__(self, plan: SynthesisPlan):
        self.plan = plan
        self.timings: dict = {}

    @contextmanager
    def _stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def fit(self, data: Dataset, response_model: Optional[KrrModel] = None) -> "TwoStageSynthesizer":
        plan = self.plan
        with self._stage("validate"):
            y = data.require_response()
            x = data.inputs
            if x.shape[0] <= x.shape[1]:
                raise ValueError(f"need more rows than input columns (n={x.shape[0]}, d={x.shape[1]})")
        self.data = data
        self.scaler = _MinMax(x, plan.scaling == "minmax")
        work = self.scaler.forward(x)

        self.marginals = None
        if plan.sampler.kind == "sh":
            with self._stage("marginals"):
                self.marginals = fit_marginals(
                    work, grid=plan.bandwidth_grid, folds=plan.folds,
                    seed=substream(plan.seed, _BANDWIDTH_STREAM),
                )
            with self._stage("synthesize"):
                pure = synthesize(work, self.marginals, seed=substream(plan.seed, _SAMPLE_STREAM))
        else:
            with self._stage("synthesize"):
                pure = baseline_sample(plan.sampler, x.shape[0], x.shape[1],
                                       seed=substream(plan.seed, _SAMPLE_STREAM))
        self.pure_synthetic = self.scaler.inverse(pure)

        with self._stage("pairing"):
            self.pairing = nearest_pairing(work, pure)
            self.paired_synthetic = self.pure_synthetic[self.pairing]

        with self._stage("regression"):
            if response_model is None:
                lam = select_lambda(work, y, plan.lambda_grid, plan.kernel, plan.folds,
                                    seed=substream(plan.seed, _LAMBDA_STREAM))
                response_model = fit_krr(work, y, lam, plan.kernel)
            self.response_model = response_model
        return self

    def range_width(self) -> float:
        """Hybrid range width: explicit in the plan, else the narrowest observed column range."""
        if self.plan.hybrid.range_width is not None:
            return float(self.plan.hybrid.range_width)
        span = np.ptp(self.data.inputs, axis=0)
        span = span[span > 0]
        return float(span.min()) if span.size else 1.0

    def resolve_alpha(self) -> float:
        hyb = self.plan.hybrid
        if hyb.lid_budget is not None and not self.plan.assume_uniform:
            warnings.warn(
                "solving alpha from a LID budget assumes uniform marginals; "
                "the bound is heuristic for this data",
                RuntimeWarning,
                stacklevel=2,
            )
        return hyb.resolve_alpha(self.data.d, self.range_width())

    def generate(self, alpha: Optional[float] = None) -> Dataset:
        if alpha is None:
            alpha = self.resolve_alpha()
        with self._stage("hybrid"):
            x_star = mix(self.data.inputs, self.paired_synthetic, alpha)
        with self._stage("response"):
            y_star = self.response_model.predict(self.scaler.forward(x_star))
        return self.data.with_values(x_star, y_star)

    def privacy_report(self, synthetic: Dataset, alpha: float) -> PrivacyReport:
        plan = self.plan
        with self._stage("audit"):
            report = compute_lid(self.data.inputs, synthetic.inputs, plan.hybrid.eta)
            if plan.hybrid.lid_budget is not None or plan.assume_uniform:
                try:
                    bound = float(lid_bound(alpha, plan.hybrid.eta, self.data.d, self.range_width()))
                except ValueError:
                    bound = 100.0
                report = replace(report, theoretical_bound_percent=bound,
                                 bound_is_heuristic=not plan.assume_uniform)
        return report

    def fidelity_report(self, synthetic: Dataset) -> FidelityReport:
        with self._stage("audit"):
            return fidelity_report(self.data.inputs, synthetic.inputs, self.plan.bins,
                                   self.data.names())


def run_pipeline(data: Dataset, plan: SynthesisPlan) -> PipelineResult:
    """Run both stages and audit the output; fully determined by ``plan.seed``."""
    synth = TwoStageSynthesizer(plan).fit(data)
    alpha = synth.resolve_alpha()
    synthetic = synth.generate(alpha)
    privacy = synth.privacy_report(synthetic, alpha)
    fidelity = synth.fidelity_report(synthetic)
    return PipelineResult(
        dataset=synthetic,
        privacy=privacy,
        fidelity=fidelity,
        alpha=alpha,
        lam=synth.response_model.lam,
        bandwidths=None if synth.marginals is None else [m.bandwidth for m in synth.marginals],
        timings=dict(synth.timings),
    )
