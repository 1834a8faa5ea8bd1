"""Two-stage synthetic tabular data generation.

Stage 1 draws synthetic inputs that keep the per-column marginals and the
correlation structure of the original inputs, then mixes them with the
originals at weight ``alpha``. Stage 2 replaces the responses with kernel
ridge regression predictions at the mixed inputs.
"""

from .audit import FidelityReport, PrivacyReport, compute_lid, fidelity_report, lid_bound
from .dataset import Dataset, NumericalError
from .hybrid import HybridConfig, mix, nearest_pairing, solve_alpha_for_budget
from .lhs import Stage1Sampler, iman_conover, lhs_unit_sample, synthesize
from .marginals import MarginalModel, fit_kde, fit_marginals, select_bandwidth
from .pipeline import PipelineResult, StageError, SynthesisPlan, TwoStageSynthesizer, run_pipeline
from .regression import Kernel, KrrModel, fit_krr, fit_krr_cv, nadaraya_watson, select_lambda

__version__ = "0.1.0"

__all__ = [
    "Dataset", "NumericalError", "MarginalModel", "fit_kde", "fit_marginals", "select_bandwidth",
    "Stage1Sampler", "lhs_unit_sample", "iman_conover", "synthesize", "HybridConfig",
    "nearest_pairing", "mix", "solve_alpha_for_budget", "Kernel", "KrrModel", "fit_krr",
    "fit_krr_cv", "select_lambda", "nadaraya_watson", "PrivacyReport", "FidelityReport",
    "compute_lid", "lid_bound", "fidelity_report", "SynthesisPlan", "TwoStageSynthesizer",
    "PipelineResult", "StageError", "run_pipeline", "__version__",
]
