import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from synthforge.audit import compute_lid, lid_bound
from synthforge.hybrid import ALPHA_CEILING, HybridConfig, mix, nearest_pairing, solve_alpha_for_budget
from synthforge.lhs import baseline_sample


def _pairing_oracle(x, s):
    # plain loops, ties to the lowest index
    n = len(x)
    used = [False] * n
    out = []
    for i in range(n):
        best, best_d = None, None
        for k in range(n):
            if used[k]:
                continue
            dist = float(np.sum((x[i] - s[k]) ** 2))
            if best_d is None or dist < best_d:
                best, best_d = k, dist
        used[best] = True
        out.append(best)
    return out


# ---------------------------------------------------------------- pairing

def test_pairing_identity():
    x = np.random.default_rng(0).uniform(size=(30, 2))
    assert np.array_equal(nearest_pairing(x, x.copy()), np.arange(30))


def test_pairing_greedy_example():
    perm = nearest_pairing(np.array([[0.0], [10.0]]), np.array([[9.0], [1.0]]))
    assert perm.tolist() == [1, 0]


def test_pairing_single_row():
    assert nearest_pairing(np.array([[3.0]]), np.array([[-1.0]])).tolist() == [0]


def test_pairing_ties_lowest_index():
    perm = nearest_pairing(np.array([[0.0]]), np.array([[0.0]]))
    assert perm.tolist() == [0]
    perm = nearest_pairing(np.array([[0.5], [0.5]]), np.array([[0.0], [1.0]]))
    assert perm.tolist() == [0, 1]


def test_pairing_shape_mismatch():
    with pytest.raises(ValueError):
        nearest_pairing(np.zeros((3, 2)), np.zeros((2, 2)))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_pairing_matches_oracle_and_is_bijection(data):
    n = data.draw(st.integers(1, 25))
    d = data.draw(st.integers(1, 3))
    grid = st.integers(0, 6).map(float)  # coarse values force distance ties
    x = data.draw(arrays(np.float64, (n, d), elements=grid))
    s = data.draw(arrays(np.float64, (n, d), elements=grid))
    perm = nearest_pairing(x, s)
    assert sorted(perm.tolist()) == list(range(n))
    assert perm.tolist() == _pairing_oracle(x, s)


# ---------------------------------------------------------------- mixing

def test_mix_endpoints_exact():
    rng = np.random.default_rng(1)
    x, s = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
    assert np.array_equal(mix(x, s, 1.0), x)
    assert np.array_equal(mix(x, s, 0.0), s)


def test_mix_midpoint():
    assert mix(np.array([[0.2]]), np.array([[0.6]]), 0.5)[0, 0] == pytest.approx(0.4, abs=1e-15)


@pytest.mark.parametrize("alpha", [-0.1, 1.1, np.nan])
def test_mix_alpha_range(alpha):
    with pytest.raises(ValueError):
        mix(np.zeros((2, 1)), np.ones((2, 1)), alpha)


@settings(max_examples=50, deadline=None)
@given(
    x=arrays(np.float64, (5, 2), elements=st.floats(-1e6, 1e6)),
    s=arrays(np.float64, (5, 2), elements=st.floats(-1e6, 1e6)),
)
def test_mix_endpoint_identity_property(x, s):
    assert np.array_equal(mix(x, s, 1.0), x)
    assert np.array_equal(mix(x, s, 0.0), s)


# ---------------------------------------------------------------- alpha solver

def test_solver_ten_percent():
    alpha = solve_alpha_for_budget(10.0, 0.001, 3, 1.0)
    per_dim = 1 - 0.9 ** (1 / 3)
    assert per_dim == pytest.approx(0.034511, abs=1e-6)
    assert alpha == pytest.approx(1 - 0.002 / per_dim, abs=1e-12)
    assert alpha == pytest.approx(0.94204, abs=1e-5)
    assert lid_bound(alpha, 0.001, 3, 1.0) == pytest.approx(10.0, abs=1e-6)


def test_solver_full_budget():
    for d in (1, 4):
        a = solve_alpha_for_budget(100.0, 0.01, d, 1.0)
        assert a < 1.0
        assert a == ALPHA_CEILING


def test_solver_one_dimension():
    assert solve_alpha_for_budget(0.025, 0.0001, 1, 1.0) == pytest.approx(0.2, abs=1e-12)


def test_solver_unreachable_budget_warns():
    with pytest.warns(RuntimeWarning, match="unreachable"):
        assert solve_alpha_for_budget(1.0, 0.1, 1, 1.0) == 0.0


def test_solver_budget_too_small():
    with pytest.raises(ValueError, match="too small"):
        solve_alpha_for_budget(5e-324, 0.001, 3, 1.0)


@pytest.mark.parametrize("args", [(0.0, 0.001, 2, 1.0), (101.0, 0.001, 2, 1.0),
                                  (5.0, 0.0, 2, 1.0), (5.0, 0.001, 0, 1.0), (5.0, 0.001, 2, 0.0)])
def test_solver_preconditions(args):
    with pytest.raises(ValueError):
        solve_alpha_for_budget(*args)


def test_solver_not_the_negative_exponent_form():
    # the -d exponent variant gives a negative denominator for every valid budget
    budget, eta, d = 0.05, 0.001, 3
    printed_denominator = 1 - (1 - budget) ** (-d)
    assert printed_denominator < 0
    assert 0 <= solve_alpha_for_budget(100 * budget, eta, d, 1.0) < 1


@settings(max_examples=100, deadline=None)
@given(
    budget=st.floats(0.01, 99.9),
    eta=st.floats(1e-5, 0.01),
    d=st.integers(1, 10),
    width=st.floats(0.5, 20),
)
def test_bound_consistency(budget, eta, d, width):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        alpha = solve_alpha_for_budget(budget, eta, d, width)
    assert 0.0 <= alpha < 1.0
    if alpha > 0.0:
        assert lid_bound(alpha, eta, d, width) == pytest.approx(budget, abs=1e-9)
        # agrees with a root-finding oracle on the bound itself
        upper = 1 - 2 * eta / width * (1 + 1e-9)  # bound tends to 100% here
        root = brentq(lambda a: lid_bound(a, eta, d, width) - budget, 0.0, upper, xtol=1e-14)
        assert root == pytest.approx(alpha, abs=1e-9)


# ---------------------------------------------------------------- config

def test_config_exactly_one_target():
    with pytest.raises(ValueError):
        HybridConfig()
    with pytest.raises(ValueError):
        HybridConfig(alpha=0.5, lid_budget=10.0)
    assert HybridConfig(lid_budget=10.0, eta=0.001).resolve_alpha(3, 1.0) == pytest.approx(0.94204, abs=1e-5)
    assert HybridConfig(alpha=0.3).resolve_alpha(3) == 0.3


def test_config_validation():
    with pytest.raises(ValueError):
        HybridConfig(alpha=1.5)
    with pytest.raises(ValueError):
        HybridConfig(lid_budget=0.0)
    with pytest.raises(ValueError):
        HybridConfig(alpha=0.5, eta=0.0)


# ---------------------------------------------------------------- privacy trend

def test_lid_grows_with_alpha():
    lids = {0.2: [], 0.8: []}
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.uniform(size=(500, 3))
        s = baseline_sample("random", 500, 3, seed=10_000 + seed)
        paired = s[nearest_pairing(x, s)]
        for a in lids:
            lids[a].append(compute_lid(x, mix(x, paired, a), 0.001).lid_percent)
    assert np.mean(lids[0.2]) <= np.mean(lids[0.8])
