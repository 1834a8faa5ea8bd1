from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.polynomial import Polynomial
from scipy import integrate
from scipy.stats import norm

from synthforge.marginals import (
    DEFAULT_BANDWIDTH_GRID,
    GRID_POINTS,
    fit_kde,
    fit_marginals,
    gauss_legendre_integrate,
    select_bandwidth,
)


@pytest.fixture(scope="module")
def uniform_model():
    x = np.random.default_rng(3).uniform(size=1000)
    h = select_bandwidth(x)
    return x, fit_kde(x, h)


# ---------------------------------------------------------------- quadrature

def exact_poly_integral(coefs, a, b):
    # rational arithmetic on the exact binary values of the inputs
    a, b = Fraction(a), Fraction(b)
    return float(sum(Fraction(c) * (b ** (k + 1) - a ** (k + 1)) / (k + 1) for k, c in enumerate(coefs)))


def test_gl_constant():
    for m in (1, 3, 8):
        assert gauss_legendre_integrate(lambda t: np.ones_like(t), 0.0, 1.0, m) == pytest.approx(1.0, abs=1e-12)


def test_gl_cubic_two_nodes():
    assert gauss_legendre_integrate(lambda t: t ** 3, 0.0, 1.0, 2) == pytest.approx(0.25, abs=1e-12)


def test_gl_square_five_nodes():
    assert gauss_legendre_integrate(lambda t: t ** 2, -1.0, 1.0, 5) == pytest.approx(2 / 3, abs=1e-12)


def test_gl_rejects_bad_nodes():
    with pytest.raises(ValueError):
        gauss_legendre_integrate(np.sin, 0.0, 1.0, 0)
    with pytest.raises(ValueError):
        gauss_legendre_integrate(np.sin, 1.0, 0.0, 3)


@settings(max_examples=60, deadline=None)
@given(
    m=st.integers(2, 10),
    coefs=st.lists(st.floats(-1, 1), min_size=1, max_size=20),
    a=st.floats(-1, 0.9),
    width=st.floats(0.01, 1),
)
def test_gl_polynomial_exactness(m, coefs, a, width):
    # unit-scale interval so that 1e-12 is well above double round-off
    coefs = coefs[: 2 * m]  # degree <= 2m - 1
    b = min(a + width, 1.0)
    assert gauss_legendre_integrate(Polynomial(coefs), a, b, m) == pytest.approx(
        exact_poly_integral(coefs, a, b), abs=1e-12)


# ---------------------------------------------------------------- KDE fit

def test_single_point_cdf_at_center():
    m = fit_kde([0.5], 0.1, support=(0.0, 1.0))
    assert float(m.cdf(0.5)) == pytest.approx(0.5, abs=1e-3)
    # density is one Gaussian bump centred at 0.5
    xs = np.linspace(0.05, 0.95, 7)
    ratio = m.pdf(xs) / np.exp(-0.5 * ((xs - 0.5) / 0.1) ** 2)
    assert np.allclose(ratio, ratio[0], rtol=1e-12)


def test_bandwidth_must_be_positive():
    with pytest.raises(ValueError):
        fit_kde([0.1, 0.2], 0.0)
    with pytest.raises(ValueError):
        fit_kde([0.1, 0.2], -1.0)


def test_non_finite_column_names_index():
    with pytest.raises(ValueError, match="column 4"):
        fit_kde([0.1, np.nan], 0.2, column_index=4)
    with pytest.raises(ValueError, match="empty"):
        fit_kde([], 0.2)


def test_density_matches_direct_formula():
    x = np.random.default_rng(0).normal(size=40)
    h = 0.4
    m = fit_kde(x, h)
    lo, hi = m.support
    assert lo == pytest.approx(x.min() - 3 * h)
    assert hi == pytest.approx(x.max() + 3 * h)

    def raw(t):
        return np.mean(np.exp(-0.5 * ((t - x) / h) ** 2))

    mass = integrate.quad(raw, lo, hi, limit=200, points=sorted(x))[0]
    q = np.linspace(lo, hi, 9)
    expected = np.array([raw(t) for t in q]) / mass
    assert np.allclose(m.pdf(q), expected, rtol=1e-9)
    assert m.normalizer == pytest.approx(1 / mass, rel=1e-9)


def test_cdf_grid_shape_and_endpoints(uniform_model):
    _, m = uniform_model
    assert m.points.size == GRID_POINTS
    assert m.cdf_values[0] == pytest.approx(0.0, abs=1e-9)
    assert m.cdf_values[-1] == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diff(m.cdf_values) >= 0)
    assert np.all(m.density >= 0)


def test_uniform_cdf_matches_empirical_quantiles(uniform_model):
    x, m = uniform_model
    for q in (0.25, 0.5, 0.75):
        assert abs(float(m.cdf(np.quantile(x, q))) - q) < 0.05


def test_cdf_clamps_outside_support(uniform_model):
    _, m = uniform_model
    lo, hi = m.support
    assert float(m.cdf(lo - 5)) == 0.0
    assert float(m.cdf(hi + 5)) == 1.0


def test_uniform_cdf_at_half(uniform_model):
    x, m = uniform_model
    assert abs(float(m.cdf(0.5)) - np.mean(x <= 0.5)) < 0.02
    assert abs(float(m.cdf(0.5)) - 0.5) < 0.02


def test_icdf_endpoints_and_quartile(uniform_model):
    x, m = uniform_model
    lo, hi = m.support
    assert m.icdf(0.0) == lo
    assert m.icdf(1.0) == pytest.approx(hi)
    assert abs(m.icdf(0.25) - np.quantile(x, 0.25)) < 0.03
    assert abs(m.icdf(0.25) - 0.25) < 0.03


def test_icdf_rejects_out_of_range(uniform_model):
    _, m = uniform_model
    for q in (-0.01, 1.01, np.nan):
        with pytest.raises(ValueError):
            m.icdf(q)


def test_icdf_is_generalized_inverse():
    # flat CDF stretch: the smallest x reaching q is returned
    m = fit_kde([0.0, 10.0], 0.2)
    q = 0.5
    x = m.icdf(q)
    assert float(m.cdf(x)) >= q - 1e-6
    assert x < 5.0  # left edge of the flat region, not its middle


# ---------------------------------------------------------------- bandwidth CV

def test_singleton_grid():
    assert select_bandwidth(np.arange(10.0), [0.3]) == 0.3


def test_folds_exceed_samples():
    with pytest.raises(ValueError):
        select_bandwidth([0.1, 0.2, 0.3], DEFAULT_BANDWIDTH_GRID, folds=5)


def test_default_grid_values():
    assert len(DEFAULT_BANDWIDTH_GRID) == 40
    assert DEFAULT_BANDWIDTH_GRID[0] == 0.05 and DEFAULT_BANDWIDTH_GRID[-1] == 2.0


def test_normal_sample_bandwidth_range():
    x = np.random.default_rng(11).normal(size=500)
    h = select_bandwidth(x)
    assert 0.1 <= h <= 0.6


def _cv_oracle(x, grid, folds, seed):
    perm = np.random.default_rng(seed).permutation(x.size)
    parts = np.array_split(perm, folds)
    best, best_score = None, -np.inf
    for h in grid:
        total = 0.0
        for k in range(folds):
            train = np.concatenate([p for i, p in enumerate(parts) if i != k])
            for t in x[parts[k]]:
                total += np.log(np.mean(norm.pdf(t, loc=x[train], scale=h)))
        if total > best_score + 1e-9:
            best, best_score = h, total
    return best


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_bandwidth_matches_loop_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    x = np.concatenate([rng.normal(0, 1, 60), rng.normal(4, 0.3, 30)])
    grid = [0.1, 0.2, 0.3, 0.5, 0.8, 1.2]
    assert select_bandwidth(x, grid, folds=5, seed=seed) == _cv_oracle(x, grid, 5, seed)


def test_bandwidth_ties_prefer_smaller():
    # duplicated grid entries score identically
    x = np.random.default_rng(0).normal(size=50)
    assert select_bandwidth(x, [0.4, 0.4, 5.0, 6.0]) == 0.4


def test_fit_marginals_per_column():
    rng = np.random.default_rng(1)
    x = np.column_stack([rng.uniform(size=200), rng.normal(5, 2, 200)])
    models = fit_marginals(x, bandwidths=[0.1, 0.5])
    assert [m.bandwidth for m in models] == [0.1, 0.5]
    assert [m.column_index for m in models] == [0, 1]


# ---------------------------------------------------------------- properties

samples = arrays(np.float64, st.integers(1, 40), elements=st.floats(-50, 50))


@settings(max_examples=40, deadline=None)
@given(x=samples, h=st.floats(0.05, 5.0), a=st.floats(-80, 80), b=st.floats(-80, 80))
def test_cdf_monotone(x, h, a, b):
    m = fit_kde(x, h)
    lo, hi = min(a, b), max(a, b)
    assert m.cdf(lo) <= m.cdf(hi)


@settings(max_examples=40, deadline=None)
@given(x=samples, h=st.floats(0.05, 5.0))
def test_icdf_round_trip(x, h):
    m = fit_kde(x, h)
    q = np.linspace(0, 1, 101)
    back = m.cdf(m.icdf(q))
    grid_eps = np.max(np.diff(m.cdf_values))
    assert np.all(back >= q - 1e-6)
    assert np.all(back <= q + grid_eps + 1e-12)


@settings(max_examples=25, deadline=None)
@given(x=samples, h=st.floats(0.05, 5.0))
def test_normalization(x, h):
    m = fit_kde(x, h)
    lo, hi = m.support
    # independent mass check of the normalized density with a fine composite rule
    t = np.linspace(lo, hi, 20001)
    mass = integrate.simpson(m.pdf(t), x=t)
    assert mass == pytest.approx(1.0, abs=1e-6)
