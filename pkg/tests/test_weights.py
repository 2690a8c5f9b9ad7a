"""Weight tuning: first-entry distribution and the multiplicative update."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathsgl import (
    PathsglError,
    PathwayMap,
    StandardizedData,
    empirical_selection_distribution,
    first_selected_pathway,
    lambda_min_from_scores,
    load_weights_tsv,
    tune_weights,
    update_factors,
    write_weights_tsv,
)
from pathsgl.rng import derive_rng

from oracles import standardized_instance


def make_data(X, y):
    n, p = X.shape
    return StandardizedData(
        X=X,
        y=y,
        column_means=np.zeros(p),
        column_norms=np.ones(p),
        excluded_columns=np.empty(0, dtype=np.intp),
        y_mean=0.0,
    )


def make_map(groups, n_features):
    snp_ids = [f"s{j}" for j in range(n_features)]
    return PathwayMap(
        [f"p{l}" for l in range(len(groups))],
        [np.asarray(g, dtype=np.intp) for g in groups],
        snp_ids,
        {sid: (f"g{j}",) for j, sid in enumerate(snp_ids)},
    )


# ---------------------------------------------------------------------------
# multiplicative update


def test_zero_deviation_is_identity():
    assert np.array_equal(update_factors(np.zeros(5), 0.5, 5), np.ones(5))


@pytest.mark.parametrize("L", [1, 2, 3, 5, 7, 10, 12, 50])
@pytest.mark.parametrize("eta", [0.5, 0.3, 0.9])
def test_never_selected_factor_is_exactly_eta(L, eta):
    d = np.full(L, 0.0 - 1.0 / L)  # frequency 0 against target 1/L
    factors = update_factors(d, eta, L)
    assert np.all(factors == eta)


@settings(max_examples=80, deadline=None)
@given(
    st.integers(min_value=1, max_value=40),
    st.floats(min_value=0.05, max_value=0.95),
    st.data(),
)
def test_factors_clamped_and_signed(L, eta, data):
    dev = data.draw(
        st.lists(
            st.floats(min_value=-1.0, max_value=1.0),
            min_size=L,
            max_size=L,
        ).map(lambda v: np.array(v) / L)
    )
    factors = update_factors(dev, eta, L)
    assert np.all(factors >= eta) and np.all(factors <= 2.0 - eta)
    assert np.all(factors[dev > 0] >= 1.0)
    assert np.all(factors[dev < 0] <= 1.0)
    assert np.all(factors[dev == 0] == 1.0)


def test_unclamped_region_matches_formula():
    eta, L = 0.5, 4
    d = np.array([0.05, -0.05, 0.1, 0.0])
    expect = 1.0 - np.sign(d) * (eta - 1.0) * L**2 * d**2
    assert update_factors(d, eta, L) == pytest.approx(expect, abs=1e-15)


# ---------------------------------------------------------------------------
# first entry under permutation


def test_single_pathway_always_first():
    rng = np.random.default_rng(0)
    X, y = standardized_instance(rng, 10, 3)
    data = make_data(X, y)
    pmap = make_map([[0, 1, 2]], 3)
    for _ in range(5):
        perm = y[rng.permutation(10)]
        assert first_selected_pathway(data, pmap, 0.8, np.ones(1), perm) == 0


def test_vanishing_weight_always_first():
    # under the pure group penalty the entry threshold is ||X_l'y|| / w_l,
    # so a weight near zero makes the threshold arbitrarily large; with a
    # lasso component the threshold instead saturates at its full-shrinkage
    # level, so the guarantee is specific to alpha = 0
    rng = np.random.default_rng(1)
    X, y = standardized_instance(rng, 20, 9)
    data = make_data(X, y)
    pmap = make_map([[0, 1, 2], [3, 4, 5], [6, 7, 8]], 9)
    weights = np.array([1.0, 1e-9, 1.0])
    for _ in range(30):
        perm = y[rng.permutation(20)]
        assert first_selected_pathway(data, pmap, 0.0, weights, perm) == 1


def test_first_entry_matches_exhaustive_threshold_comparison():
    rng = np.random.default_rng(2)
    X, y = standardized_instance(rng, 15, 10)
    data = make_data(X, y)
    groups = [[0, 1], [2, 3, 4], [5], [6, 7], [8, 9]]
    pmap = make_map(groups, 10)
    weights = rng.uniform(0.5, 2.0, size=5)
    for _ in range(20):
        perm = y[rng.permutation(15)]
        got = first_selected_pathway(data, pmap, 0.75, weights, perm)
        scores = X.T @ perm
        mins = [
            lambda_min_from_scores(scores[np.asarray(g)], 0.75, float(weights[l]))
            for l, g in enumerate(groups)
        ]
        assert got == int(np.argmax(mins))


def test_exact_tie_resolves_to_lowest_index():
    rng = np.random.default_rng(3)
    X, y = standardized_instance(rng, 10, 3)
    data = make_data(X, y)
    pmap = make_map([[0, 1, 2], [0, 1, 2]], 3)
    assert first_selected_pathway(data, pmap, 0.6, np.ones(2), y) == 0


# ---------------------------------------------------------------------------
# empirical distribution


def test_distribution_single_permutation_is_one_hot():
    rng = np.random.default_rng(4)
    X, y = standardized_instance(rng, 12, 6)
    data = make_data(X, y)
    pmap = make_map([[0, 1], [2, 3], [4, 5]], 6)
    dist = empirical_selection_distribution(
        data, pmap, 0.8, np.ones(3), R=1, rng=np.random.default_rng(0)
    )
    assert sorted(dist.tolist()) == [0.0, 0.0, 1.0]


def test_distribution_sums_to_one_exactly_at_dyadic_R():
    # counts over a power-of-two R divide without rounding, so the float
    # sum realizes the event-partition identity exactly
    rng = np.random.default_rng(5)
    X, y = standardized_instance(rng, 12, 6)
    data = make_data(X, y)
    pmap = make_map([[0, 1], [2, 3], [4, 5]], 6)
    dist = empirical_selection_distribution(
        data, pmap, 0.8, np.ones(3), R=32, rng=np.random.default_rng(1)
    )
    assert float(dist.sum()) == 1.0
    assert np.array_equal(dist * 32, np.rint(dist * 32))


def test_distribution_partitions_all_draws():
    rng = np.random.default_rng(6)
    X, y = standardized_instance(rng, 12, 6)
    data = make_data(X, y)
    pmap = make_map([[0, 1], [2, 3], [4, 5]], 6)
    R = 37
    dist = empirical_selection_distribution(
        data, pmap, 0.8, np.ones(3), R=R, rng=np.random.default_rng(2)
    )
    counts = np.rint(dist * R)
    assert counts == pytest.approx(dist * R, abs=1e-9)
    assert int(counts.sum()) == R
    assert float(dist.sum()) == pytest.approx(1.0, abs=1e-12)


def test_distribution_deterministic_in_rng_state():
    rng = np.random.default_rng(7)
    X, y = standardized_instance(rng, 12, 6)
    data = make_data(X, y)
    pmap = make_map([[0, 1], [2, 3], [4, 5]], 6)
    d1 = empirical_selection_distribution(
        data, pmap, 0.8, np.ones(3), R=25, rng=derive_rng(9, "weight-tuning", 1)
    )
    d2 = empirical_selection_distribution(
        data, pmap, 0.8, np.ones(3), R=25, rng=derive_rng(9, "weight-tuning", 1)
    )
    assert np.array_equal(d1, d2)


def test_distribution_requires_positive_R():
    rng = np.random.default_rng(8)
    X, y = standardized_instance(rng, 8, 2)
    data = make_data(X, y)
    pmap = make_map([[0], [1]], 2)
    with pytest.raises(PathsglError):
        empirical_selection_distribution(
            data, pmap, 0.5, np.ones(2), R=0, rng=np.random.default_rng(0)
        )


def test_exchangeable_pathways_split_evenly():
    # two same-sized pathways with iid columns are statistically
    # interchangeable, so each enters first with probability 1/2 -- but
    # only marginally over designs: a single realized design favors one
    # block. Aggregating permutation draws across fresh designs makes the
    # binomial model with center 1/2 exact.
    rng = np.random.default_rng(9)
    pmap = make_map([[0, 1, 2, 3], [4, 5, 6, 7]], 8)
    R_per, K = 50, 40
    total = np.zeros(2)
    for k in range(K):
        X, y = standardized_instance(rng, 30, 8)
        data = make_data(X, y)
        dist = empirical_selection_distribution(
            data, pmap, 0.8, np.ones(2), R=R_per, rng=np.random.default_rng(100 + k)
        )
        total += dist * R_per
    R = R_per * K
    three_se = 3.0 * np.sqrt(0.25 / R)
    assert abs(total[0] / R - 0.5) <= three_se


# ---------------------------------------------------------------------------
# tuning loop


def test_single_pathway_converges_immediately():
    rng = np.random.default_rng(10)
    X, y = standardized_instance(rng, 10, 3)
    data = make_data(X, y)
    pmap = make_map([[0, 1, 2]], 3)
    result = tune_weights(data, pmap, 0.8, R=5, seed=1)
    assert result.converged and result.iterations == 1
    assert result.sum_abs_dev == 0.0
    assert np.array_equal(result.weights, np.ones(1))
    assert np.array_equal(result.trace[0]["factors"], np.ones(1))


def test_silent_pathway_weight_halves_exactly():
    # a pathway whose columns are identically zero can never enter, so its
    # frequency is 0 and each iteration multiplies its weight by eta
    rng = np.random.default_rng(11)
    X, y = standardized_instance(rng, 16, 9)
    X = X.copy()
    X[:, 6:9] = 0.0
    data = make_data(X, y)
    pmap = make_map([[0, 1, 2], [3, 4, 5], [6, 7, 8]], 9)
    result = tune_weights(data, pmap, 0.8, eta=0.5, R=40, max_iters=3, seed=2)
    for entry in result.trace:
        assert entry["distribution"][2] == 0.0
        assert entry["factors"][2] == 0.5
    assert result.trace[1]["weights"][2] == 0.5
    assert result.trace[2]["weights"][2] == 0.25


def test_tuning_reduces_size_bias():
    # one pathway four times larger than the rest dominates first entry
    # before tuning; deviations must shrink and its weight must rise
    rng = np.random.default_rng(12)
    X, y = standardized_instance(rng, 40, 21)
    data = make_data(X, y)
    pmap = make_map([list(range(12)), [12, 13, 14], [15, 16, 17], [18, 19, 20]], 21)
    result = tune_weights(data, pmap, 0.8, R=300, max_iters=12, seed=3)
    first = result.trace[0]["sum_abs_dev"]
    assert result.sum_abs_dev < first
    assert result.weights[0] > 1.0
    for entry in result.trace:
        assert np.all(entry["weights"] > 0.0)


def test_trace_structure():
    rng = np.random.default_rng(13)
    X, y = standardized_instance(rng, 14, 6)
    data = make_data(X, y)
    pmap = make_map([[0, 1, 2], [3, 4, 5]], 6)
    result = tune_weights(data, pmap, 0.8, R=50, max_iters=4, seed=4)
    assert 1 <= len(result.trace) <= 4
    for i, entry in enumerate(result.trace, start=1):
        assert entry["iteration"] == i
        assert set(entry) == {
            "iteration",
            "weights",
            "distribution",
            "sum_abs_dev",
            "factors",
        }


def test_nonconvergence_returns_best_iterate():
    rng = np.random.default_rng(14)
    X, y = standardized_instance(rng, 20, 8)
    data = make_data(X, y)
    pmap = make_map([[0, 1, 2, 3, 4, 5], [6], [7]], 8)
    result = tune_weights(data, pmap, 0.8, epsilon=1e-9, R=30, max_iters=5, seed=5)
    assert not result.converged
    assert result.iterations == 5
    best = min(t["sum_abs_dev"] for t in result.trace)
    assert result.sum_abs_dev == best


def test_tune_validates_parameters():
    rng = np.random.default_rng(15)
    X, y = standardized_instance(rng, 8, 2)
    data = make_data(X, y)
    pmap = make_map([[0], [1]], 2)
    with pytest.raises(PathsglError):
        tune_weights(data, pmap, 0.5, eta=1.0)
    with pytest.raises(PathsglError):
        tune_weights(data, pmap, 0.5, init_weights=np.array([1.0, -1.0]))
    with pytest.raises(PathsglError):
        tune_weights(data, pmap, 0.5, init_weights=np.ones(3))


# ---------------------------------------------------------------------------
# serialization


def test_weights_tsv_roundtrip(tmp_path):
    path = tmp_path / "weights.tsv"
    ids = ["alpha", "beta", "gamma"]
    weights = np.array([1.0, 0.3333333333333333, 2.718281828459045])
    write_weights_tsv(path, ids, weights)
    assert np.array_equal(load_weights_tsv(path, ids), weights)
    # alignment follows the requested id order, not file order
    assert np.array_equal(
        load_weights_tsv(path, ["gamma", "alpha"]), weights[[2, 0]]
    )


def test_weights_tsv_missing_pathway_raises(tmp_path):
    path = tmp_path / "weights.tsv"
    write_weights_tsv(path, ["a"], np.array([1.0]))
    with pytest.raises(PathsglError):
        load_weights_tsv(path, ["a", "b"])


def test_weights_tsv_bad_header_raises(tmp_path):
    path = tmp_path / "weights.tsv"
    path.write_text("id\tvalue\na\t1.0\n")
    with pytest.raises(PathsglError):
        load_weights_tsv(path, ["a"])
