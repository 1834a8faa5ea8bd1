"""Desk-scale experiments: the nonlinear regression benchmark, the log-log
price-sale model with marketing metrics, and distribution-mismatch sweeps.

Every preset runs one trial from an integer seed and returns a mapping
``{alpha: {(model, metric): value}}``; :func:`run_trials` aggregates trials
seeded ``base_seed + t`` into mean and standard deviation rows.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .audit import compute_lid, fidelity_report
from .dataset import Dataset
from .lhs import Stage1Sampler
from .pipeline import SynthesisPlan, TwoStageSynthesizer, substream
from .regression import fit_krr_cv, nadaraya_watson, select_nw_bandwidth

DEFAULT_ELASTICITIES = (-1.5, -1.7, -2.01, -1.98, -1.9)
MISMATCH_MEANS = tuple(np.round(0.1 * np.arange(1, 11), 10))
MISMATCH_PRICE_STDS = tuple(np.round(0.2 * np.arange(1, 11), 10))
DEFAULT_ALPHAS = (0.0, 0.2, 0.5, 0.8, 1.0)


# --------------------------------------------------------------------------
# nonlinear benchmark

def nonlinear_g(x) -> np.ndarray:
    """``(1 - r)_+^5 (1 + 5 r) + r^2 / 5`` with ``r = ||x||``; rows of ``x`` are points."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1) if x.ndim > 1 else np.abs(x)
    t = np.clip(1.0 - r, 0.0, None)
    return t ** 5 * (1.0 + 5.0 * r) + 0.2 * r * r


@dataclass(frozen=True)
class NonlinearScenario:
    train_size: int = 1000
    test_size: int = 200
    public_size: int = 1000
    noise_std: float = 0.1
    seed: int = 0
    mismatch_mean: Optional[float] = None
    mismatch_std: float = 0.14

    def __post_init__(self):
        if min(self.train_size, self.test_size, self.public_size) < 1:
            raise ValueError("dataset sizes must be at least 1")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")


def _nonlinear_inputs(rng: np.random.Generator, n: int) -> np.ndarray:
    x12 = rng.uniform(size=(n, 2))
    x3 = x12[:, 0] ** 2 + x12[:, 1] ** 2 + rng.standard_normal(n)
    return np.column_stack([x12, x3])


def gen_nonlinear(scenario: NonlinearScenario) -> tuple:
    """Train, noise-free test and public datasets of the nonlinear benchmark."""
    rng = np.random.default_rng(scenario.seed)
    names = ("x1", "x2", "x3")
    x = _nonlinear_inputs(rng, scenario.train_size)
    train = Dataset(x, nonlinear_g(x) + scenario.noise_std * rng.standard_normal(x.shape[0]), names, "y")
    xp = _nonlinear_inputs(rng, scenario.public_size)
    public = Dataset(xp, nonlinear_g(xp) + scenario.noise_std * rng.standard_normal(xp.shape[0]), names, "y")
    xt = _nonlinear_inputs(rng, scenario.test_size)
    if scenario.mismatch_mean is not None:
        xt[:, 2] = rng.normal(scenario.mismatch_mean, scenario.mismatch_std, scenario.test_size)
    test = Dataset(xt, nonlinear_g(xt), names, "y")
    return train, test, public


# --------------------------------------------------------------------------
# price-sale model and marketing metrics

@dataclass(frozen=True)
class MarketScenario:
    """Log-log sales model ``ln S = mu_j + delta_ij + beta_j ln P + eps``.

    ``log_price_range`` bounds the uniform law of ``ln P``; explicit
    ``prices`` (shape customers x brands x weeks) override it.
    """

    elasticities: tuple = DEFAULT_ELASTICITIES
    intercepts: Optional[tuple] = None
    customer_effects: Optional[np.ndarray] = None
    customer_effect_std: float = 0.2
    weeks: int = 52
    customers: int = 4
    log_price_range: tuple = (0.0, 1.0)
    noise_variance: float = 0.5
    seed: int = 0
    prices: Optional[np.ndarray] = None

    def __post_init__(self):
        if any(b >= -1 for b in self.elasticities):
            raise ValueError("every elasticity must be below -1 for the optimal mark-up to exist")
        if self.weeks < 1 or self.customers < 1:
            raise ValueError("weeks and customers must be at least 1")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")

    @property
    def brands(self) -> int:
        return len(self.elasticities)


@dataclass(frozen=True, eq=False)
class PriceSaleData:
    """Adjusted price-sale records: input ``ln P``, response ``ln S - mu_j - delta_ij``."""

    dataset: Dataset
    brand: np.ndarray
    log_sales: np.ndarray

    def brand_dataset(self, j: int) -> Dataset:
        return self.dataset.subset(np.flatnonzero(self.brand == j))


def log_prices(prices) -> np.ndarray:
    p = np.asarray(prices, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("prices must be positive and finite")
    return np.log(p)


def gen_price_sale(scenario: MarketScenario) -> PriceSaleData:
    """One row per (customer, brand, week)."""
    rng = np.random.default_rng(scenario.seed)
    shape = (scenario.customers, scenario.brands, scenario.weeks)
    if scenario.prices is not None:
        if np.shape(scenario.prices) != shape:
            raise ValueError(f"prices must have shape {shape}")
        lnp = log_prices(scenario.prices)
    else:
        lo, hi = scenario.log_price_range
        lnp = rng.uniform(lo, hi, size=shape)
    beta = np.asarray(scenario.elasticities, dtype=float)
    mu = (np.full(scenario.brands, 4.0) if scenario.intercepts is None
          else np.asarray(scenario.intercepts, dtype=float))
    if scenario.customer_effects is None:
        delta = scenario.customer_effect_std * rng.standard_normal(shape[:2])
    else:
        delta = np.asarray(scenario.customer_effects, dtype=float).reshape(shape[:2])
    eps = math.sqrt(scenario.noise_variance) * rng.standard_normal(shape)
    adjusted = beta[None, :, None] * lnp + eps
    log_sales = adjusted + mu[None, :, None] + delta[:, :, None]
    brand = np.broadcast_to(np.arange(scenario.brands)[None, :, None], shape)
    data = Dataset(lnp.reshape(-1, 1), adjusted.reshape(-1), ("log_price",), "adjusted_log_sales")
    return PriceSaleData(data, brand.reshape(-1).copy(), log_sales.reshape(-1))


def estimate_elasticity(x, y) -> float:
    """No-intercept least squares slope ``sum(x y) / sum(x^2)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    sxx = float(np.dot(x, x))
    if sxx == 0:
        raise ValueError("cannot estimate an elasticity from all-zero inputs")
    return float(np.dot(x, y)) / sxx


def optimal_markup(beta: float) -> float:
    """``100 / (|beta| - 1)`` percent; NaN when ``|beta| = 1``."""
    gap = abs(beta) - 1.0
    return math.nan if gap == 0 else 100.0 / gap


def optimal_profit_ratio(beta: float, beta_hat: float) -> float:
    """Profit at the price set from ``beta_hat`` relative to the optimum, percent."""
    if beta_hat == -1.0 or beta == 0.0:
        return math.nan
    r = (beta + 1.0) / (beta_hat + 1.0)
    base = r * beta_hat / beta
    if base <= 0:
        return math.nan
    return 100.0 * r * base ** beta


def marketing_metrics(true_betas: Sequence[float], estimated_betas: Sequence[float]) -> dict:
    """OMU and OPR per brand plus overall MAPD, all in percent."""
    true_betas = [float(b) for b in true_betas]
    est = [float(b) for b in estimated_betas]
    if len(true_betas) != len(est):
        raise ValueError("true and estimated elasticities differ in length")
    if any(b == 0 for b in true_betas):
        raise ValueError("true elasticities must be non-zero")
    return {
        "omu": [optimal_markup(b) for b in est],
        "opr": [optimal_profit_ratio(b, bh) for b, bh in zip(true_betas, est)],
        "mapd": 100.0 * float(np.mean([abs(bh - b) / abs(b) for b, bh in zip(true_betas, est)])),
    }


def mse(predictions, truth) -> float:
    p = np.asarray(predictions, dtype=float).reshape(-1)
    t = np.asarray(truth, dtype=float).reshape(-1)
    if p.shape != t.shape:
        raise ValueError("predictions and truth differ in length")
    return float(np.mean((p - t) ** 2))


def delta_mse(mse_public_only: float, mse_combined: float) -> float:
    """Relative MSE improvement (percent) from adding synthetic data to public data."""
    if mse_public_only == 0:
        raise ValueError("public-only MSE is zero; relative improvement undefined")
    return 100.0 * (mse_public_only - mse_combined) / mse_public_only


# --------------------------------------------------------------------------
# public models

def _public_krr(train: Dataset, plan: SynthesisPlan, seed: int) -> Callable:
    model = fit_krr_cv(train.inputs, train.response, plan.lambda_grid, plan.kernel,
                       plan.folds, seed=seed)
    return model.predict


def _public_nwk(train: Dataset, plan: SynthesisPlan, seed: int) -> Callable:
    h = select_nw_bandwidth(train.inputs, train.response, folds=plan.folds, seed=seed)
    return lambda q: nadaraya_watson(train.inputs, train.response, h, q)


PUBLIC_MODELS = {"krr": _public_krr, "nwk": _public_nwk}


# --------------------------------------------------------------------------
# presets

def _nonlinear_trial(seed: int, plan: SynthesisPlan, alphas: Sequence[float],
                     models: Sequence[str] = ("krr", "nwk"),
                     datasets: Sequence[str] = ("synthetic", "combined"),
                     mismatch_means: Sequence[Optional[float]] = (None,),
                     noise_std: float = 0.1) -> dict:
    plan = replace(plan, seed=seed)
    scenario = NonlinearScenario(seed=seed, noise_std=noise_std)
    train, _, public = gen_nonlinear(scenario)
    tests = {}
    for mu in mismatch_means:
        tests[mu] = gen_nonlinear(replace(scenario, mismatch_mean=mu))[1]
    model_seed = substream(seed, 11)

    def score(train_set: Dataset) -> dict:
        out = {}
        for name in models:
            predict = PUBLIC_MODELS[name](train_set, plan, model_seed)
            for mu, test in tests.items():
                out[(name, mu)] = mse(predict(test.inputs), test.response)
        return out

    def tag(metric: str, mu) -> str:
        return metric if mu is None else f"{metric}@mu={mu:g}"

    public_scores = score(public) if ("combined" in datasets or "public" in datasets) else {}
    synth = TwoStageSynthesizer(plan).fit(train)
    result = {}
    for alpha in alphas:
        star = synth.generate(alpha)
        row = {
            ("pipeline", "lid_percent"): compute_lid(train.inputs, star.inputs, plan.hybrid.eta).lid_percent,
            ("pipeline", "tv_mean"): fidelity_report(train.inputs, star.inputs, plan.bins).tv_mean,
        }
        syn_scores = score(star) if "synthetic" in datasets else {}
        comb_scores = score(Dataset.concat(public, star)) if "combined" in datasets else {}
        for (name, mu), value in public_scores.items():
            row[(name, tag("mse_public", mu))] = value
            if comb_scores:
                row[(name, tag("mse_combined", mu))] = comb_scores[(name, mu)]
                row[(name, tag("delta_mse_percent", mu))] = delta_mse(value, comb_scores[(name, mu)])
        for (name, mu), value in syn_scores.items():
            row[(name, tag("mse_synthetic", mu))] = value
        result[float(alpha)] = row
    return result


def _public_market(seed: int, scenario: MarketScenario, public_size: int) -> PriceSaleData:
    weeks = max(1, public_size // scenario.brands)
    return gen_price_sale(replace(scenario, customers=1, weeks=weeks, seed=substream(seed, 21),
                                  customer_effects=None))


def _price_trial(seed: int, plan: SynthesisPlan, alphas: Sequence[float],
                 public_size: int = 20, price_noise_stds: Sequence[Optional[float]] = (None,),
                 **_ignored) -> dict:
    plan = replace(plan, seed=seed)
    scenario = MarketScenario(seed=seed)
    data = gen_price_sale(scenario)
    public = _public_market(seed, scenario, public_size)
    betas = scenario.elasticities
    brands = range(scenario.brands)

    originals = [data.brand_dataset(j) for j in brands]
    publics = [public.brand_dataset(j) for j in brands]
    synths = [TwoStageSynthesizer(replace(plan, seed=substream(seed, 100 + j))).fit(originals[j])
              for j in brands]
    est_original = [estimate_elasticity(d.inputs, d.response) for d in originals]
    est_public = [estimate_elasticity(d.inputs, d.response) for d in publics]

    # mismatched test sets: noise added to log price
    rng = np.random.default_rng(substream(seed, 31))
    tests = {}
    for s in price_noise_stds:
        if s is None:
            continue
        lnp = rng.uniform(*scenario.log_price_range, size=(len(betas), 200))
        tests[s] = lnp + rng.normal(0.0, s, size=lnp.shape)

    def metrics(label: str, est: list, row: dict):
        m = marketing_metrics(betas, est)
        row[("ls", f"mapd_{label}")] = m["mapd"]
        for j in brands:
            row[("ls", f"omu_{label}_brand{j + 1}")] = m["omu"][j]
            row[("ls", f"opr_{label}_brand{j + 1}")] = m["opr"][j]
        for s, lnp in tests.items():
            truth = np.asarray(betas)[:, None] * lnp
            pred = np.asarray(est)[:, None] * lnp
            row[("ls", f"mse_{label}@sigma={s:g}")] = mse(pred, truth)

    result = {}
    for alpha in alphas:
        row = {}
        metrics("original", est_original, row)
        metrics("public", est_public, row)
        stars = [s.generate(alpha) for s in synths]
        metrics("synthetic", [estimate_elasticity(d.inputs, d.response) for d in stars], row)
        combined = [Dataset.concat(p, d) for p, d in zip(publics, stars)]
        metrics("combined", [estimate_elasticity(d.inputs, d.response) for d in combined], row)
        x_all = np.vstack([d.inputs for d in originals])
        s_all = np.vstack([d.inputs for d in stars])
        row[("pipeline", "lid_percent")] = compute_lid(x_all, s_all, plan.hybrid.eta).lid_percent
        for s in tests:
            pub, comb = row[("ls", f"mse_public@sigma={s:g}")], row[("ls", f"mse_combined@sigma={s:g}")]
            row[("ls", f"delta_mse_percent@sigma={s:g}")] = delta_mse(pub, comb)
        result[float(alpha)] = row
    return result


@dataclass(frozen=True)
class Preset:
    name: str
    trial: Callable
    options: dict
    default_eta: float


PRESETS = {
    "nonlinear": Preset("nonlinear", _nonlinear_trial, {}, 0.001),
    "price-sale": Preset("price-sale", _price_trial, {}, 0.0001),
    "mismatch-nonlinear": Preset(
        "mismatch-nonlinear", _nonlinear_trial,
        {"mismatch_means": MISMATCH_MEANS, "datasets": ("combined",)}, 0.001),
    "mismatch-price": Preset(
        "mismatch-price", _price_trial, {"price_noise_stds": MISMATCH_PRICE_STDS}, 0.0001),
}


def preset_plan(name: str, sampler: str = "sh", **overrides) -> SynthesisPlan:
    """Default plan for a preset (its eta, the requested sampler)."""
    preset = get_preset(name)
    plan = SynthesisPlan(sampler=Stage1Sampler(sampler))
    plan = replace(plan, hybrid=replace(plan.hybrid, eta=preset.default_eta))
    return replace(plan, **overrides)


def get_preset(name: str) -> Preset:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available presets: {', '.join(PRESETS)}")
    return PRESETS[name]


# --------------------------------------------------------------------------
# aggregation

@dataclass(eq=False)
class MetricTable:
    """Aggregated rows ``(preset, alpha, model, metric, mean, std, trials)``.

    ``raw[alpha][(model, metric)]`` keeps the per-trial values in trial order.
    """

    preset: str
    rows: list
    raw: dict

    FIELDS = ("preset", "alpha", "model", "metric", "mean", "std", "trials")

    def get(self, alpha: float, model: str, metric: str) -> dict:
        for r in self.rows:
            if r["alpha"] == float(alpha) and r["model"] == model and r["metric"] == metric:
                return r
        raise KeyError((alpha, model, metric))

    def values(self, alpha: float, model: str, metric: str) -> np.ndarray:
        return np.asarray(self.raw[float(alpha)][(model, metric)])

    def write_csv(self, target) -> None:
        """Write rows to a path or an open text stream."""
        if hasattr(target, "write"):
            self._write_rows(target)
            return
        with open(target, "w", newline="", encoding="utf-8") as fh:
            self._write_rows(fh)

    def _write_rows(self, fh) -> None:
        writer = csv.DictWriter(fh, fieldnames=self.FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})

    def to_dict(self) -> dict:
        return {"schemaVersion": 1, "preset": self.preset, "rows": self.rows}

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, allow_nan=True)
            fh.write("\n")


def aggregate(preset: str, trials: list) -> MetricTable:
    """Mean and sample standard deviation per (alpha, model, metric)."""
    raw: dict = {}
    for result in trials:
        for alpha, row in result.items():
            bucket = raw.setdefault(alpha, {})
            for key, value in row.items():
                bucket.setdefault(key, []).append(value)
    rows = []
    for alpha in sorted(raw):
        for (model, metric) in sorted(raw[alpha]):
            vals = np.asarray(raw[alpha][(model, metric)], dtype=float)
            std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
            rows.append({"preset": preset, "alpha": alpha, "model": model, "metric": metric,
                         "mean": float(np.mean(vals)), "std": std, "trials": int(vals.size)})
    return MetricTable(preset, rows, raw)


def run_trials(preset: str, plan: Optional[SynthesisPlan] = None, trials: int = 20,
               base_seed: int = 0, alphas: Sequence[float] = DEFAULT_ALPHAS,
               threads: int = 1, **options) -> MetricTable:
    """Run ``trials`` independent trials of a preset (seeds ``base_seed + t``)."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    entry = get_preset(preset)
    plan = plan if plan is not None else preset_plan(preset)
    kwargs = {**entry.options, **options}
    alphas = [float(a) for a in alphas]

    def one(t: int) -> dict:
        return entry.trial(base_seed + t, plan, alphas, **kwargs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(t) for t in range(trials)]
    return aggregate(preset, results)
