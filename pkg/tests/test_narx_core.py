import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from narx2d.narx_core import (
    Dataset,
    DictionaryConfig,
    EstimatedModel,
    FitnessEvaluator,
    FitnessSpec,
    Term,
    build_dictionary,
    build_regressor_matrix,
    estimate_parameters,
    evaluate_fitness,
    information_criterion,
    model_size,
    predict_one_step,
    simulate_free_run,
    sse,
)
from narx2d.systems import SYSTEMS, make_dataset


def brute_force_count(n_vars, degree):
    # every sorted tuple over n_vars variables of length <= degree, via product + filter
    count = 1
    for d in range(1, degree + 1):
        count += sum(1 for t in itertools.product(range(n_vars), repeat=d) if list(t) == sorted(t))
    return count


@pytest.mark.parametrize("cfg, expected", [
    (DictionaryConfig(5, 5, 2), 66),
    (DictionaryConfig(3, 3, 3), 84),
    (DictionaryConfig(1, 1, 1), 3),
])
def test_model_size_table_values(cfg, expected):
    assert model_size(cfg) == expected
    assert len(build_dictionary(cfg)) == expected


def test_model_size_matches_enumeration_up_to_500_terms():
    checked = 0
    for n_y in range(0, 8):
        for n_u in range(0, 8):
            if n_y + n_u == 0:
                continue
            for degree in range(1, 6):
                cfg = DictionaryConfig(n_y, n_u, degree)
                n = model_size(cfg)
                if n > 500:
                    continue
                if n_y + n_u <= 6 and degree <= 4:
                    assert n == brute_force_count(n_y + n_u, degree)
                assert n == math.comb(n_y + n_u + degree, degree)
                assert len(build_dictionary(cfg)) == n
                checked += 1
    assert checked > 50


def test_noise_lags_counted_but_not_built():
    cfg = DictionaryConfig(2, 2, 2, n_e=1)
    assert model_size(cfg) == math.comb(7, 2)
    with pytest.raises(ValueError):
        build_dictionary(cfg)


def test_model_size_overflow_is_explicit():
    with pytest.raises(OverflowError):
        model_size(DictionaryConfig(500, 500, 12))


@pytest.mark.parametrize("kwargs", [
    dict(n_y=-1, n_u=1, degree=1),
    dict(n_y=0, n_u=0, degree=1),
    dict(n_y=1, n_u=1, degree=0),
    dict(n_y=1, n_u=1, degree=2, n_e=-1),
])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        DictionaryConfig(**kwargs)


def test_tiny_dictionary_listing():
    d = build_dictionary(DictionaryConfig(1, 1, 2))
    assert d.render() == ["1", "y(k-1)", "u(k-1)", "y(k-1)*y(k-1)", "y(k-1)*u(k-1)", "u(k-1)*u(k-1)"]


def test_dictionary_contains_table_terms():
    assert Term.parse("y(k-1)*u(k-1)") in build_dictionary(DictionaryConfig(5, 5, 2)).terms
    assert Term.parse("u(k-1)^3") in build_dictionary(DictionaryConfig(3, 3, 3)).terms


def test_dictionary_order_is_canonical_and_deterministic():
    cfg = DictionaryConfig(3, 2, 3)
    a, b = build_dictionary(cfg), build_dictionary(cfg)
    assert a.terms == b.terms
    assert len(set(a.terms)) == len(a.terms)
    assert a[0].degree == 0
    degrees = [t.degree for t in a.terms]
    assert degrees == sorted(degrees)
    key = lambda t: [(0 if s == "y" else 1, lag) for s, lag in t.factors]
    for d in range(1, 4):
        block = [t for t in a.terms if t.degree == d]
        assert block == sorted(block, key=key)


def test_term_parse_render_roundtrip():
    d = build_dictionary(DictionaryConfig(2, 3, 3))
    for t in d.terms:
        assert Term.parse(t.render()) == t


def _toy_data(y, u=None, split=None):
    y = np.asarray(y, dtype=float)
    u = np.zeros_like(y) if u is None else np.asarray(u, dtype=float)
    return Dataset(u, y, split or len(y) - 1)


def test_regressor_constant_column():
    d = build_dictionary(DictionaryConfig(1, 1, 2))
    data = _toy_data([1.0, 2.0, 3.0, 4.0, 5.0])
    m, target = build_regressor_matrix(d, d.structure(["1"]), data, range(1, 5))
    np.testing.assert_array_equal(m, np.ones((4, 1)))
    np.testing.assert_array_equal(target, [2, 3, 4, 5])


def test_regressor_single_lag():
    d = build_dictionary(DictionaryConfig(1, 1, 2))
    data = _toy_data([1.0, 2.0, 3.0, 4.0])
    m, _ = build_regressor_matrix(d, d.structure(["y(k-1)"]), data, range(1, 4))
    np.testing.assert_array_equal(m[:, 0], [1, 2, 3])


def test_regressor_range_before_max_lag():
    d = build_dictionary(DictionaryConfig(2, 1, 1))
    data = _toy_data(np.arange(6.0))
    with pytest.raises(ValueError):
        build_regressor_matrix(d, d.structure(["y(k-1)"]), data, range(1, 5))


def test_empty_structure_rejected():
    d = build_dictionary(DictionaryConfig(1, 1, 1))
    data = _toy_data(np.arange(6.0))
    with pytest.raises(ValueError):
        build_regressor_matrix(d, np.zeros(3, bool), data, range(1, 5))


def test_estimate_exact_fit():
    m = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    est = estimate_parameters(m, m[:, 0])
    np.testing.assert_allclose(est.theta, [1.0, 0.0], atol=1e-15)
    assert not est.condition_warning


def test_estimate_empty_matrix():
    with pytest.raises(ValueError):
        estimate_parameters(np.empty((0, 0)), np.empty(0))


def test_estimate_duplicated_column_min_norm():
    a = np.array([1.0, 2.0, 2.0])
    b = np.array([1.0, 0.5, 3.0])
    m = np.column_stack([a, a])
    est = estimate_parameters(m, b)
    assert est.condition_warning
    # oracle: SVD pseudo-inverse gives the minimum-norm solution
    np.testing.assert_allclose(est.theta, np.linalg.pinv(m) @ b, rtol=1e-12)
    theta1 = (a @ b) / (a @ a)
    np.testing.assert_allclose(sse(b, m @ est.theta), sse(b, a * theta1), rtol=1e-12)
    np.testing.assert_allclose(est.theta, [theta1 / 2, theta1 / 2], rtol=1e-12)


def test_estimate_rank_deficient_wide_block_matches_pinv():
    rng = np.random.default_rng(3)
    base = rng.normal(size=(12, 3))
    m = np.column_stack([base, base[:, 0] + base[:, 1], 2 * base[:, 2]])
    b = rng.normal(size=12)
    est = estimate_parameters(m, b)
    assert est.condition_warning
    np.testing.assert_allclose(est.theta, np.linalg.pinv(m) @ b, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rows=st.integers(4, 30), cols=st.integers(1, 4))
def test_estimate_is_least_squares_optimal(seed, rows, cols):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(rows, cols))
    b = rng.normal(size=rows)
    theta = estimate_parameters(m, b).theta
    best = sse(b, m @ theta)
    for _ in range(5):
        alt = theta + rng.normal(scale=0.1, size=cols)
        assert best <= sse(b, m @ alt) + 1e-12
    ref = np.linalg.lstsq(m, b, rcond=None)[0]
    assert best <= sse(b, m @ ref) * (1 + 1e-10) + 1e-12


def test_s1_noise_free_estimate():
    s = SYSTEMS["S1"]
    data = make_dataset(s, np.random.default_rng(0))
    m, target = build_regressor_matrix(s.dictionary, s.true_structure, data, range(s.max_lag, 1400))
    est = estimate_parameters(m, target)
    order = np.argsort(s.term_indices)
    np.testing.assert_allclose(est.theta, np.asarray(s.theta)[order], atol=1e-8)


def test_free_run_s1_zero_fixed_point():
    s = SYSTEMS["S1"]
    d = s.dictionary
    data = _toy_data(np.zeros(50))
    theta = np.asarray(s.theta)[np.argsort(s.term_indices)]
    sim = simulate_free_run(d, EstimatedModel(s.true_structure, theta), data, range(5, 50))
    assert not sim.diverged
    np.testing.assert_array_equal(sim.prediction, 0.0)


def test_free_run_s2_converges_to_fixed_point():
    s = SYSTEMS["S2"]
    theta = np.asarray(s.theta)[np.argsort(s.term_indices)]
    data = _toy_data(np.zeros(300))
    sim = simulate_free_run(s.dictionary, EstimatedModel(s.true_structure, theta), data, range(5, 300))
    # independent: positive root of 0.05 y^2 + 0.5 y - 0.5 = 0
    root = (-10 + math.sqrt(140)) / 2
    assert root == pytest.approx(0.9161, abs=1e-4)
    assert sim.prediction[-1] == pytest.approx(root, abs=1e-10)


def test_free_run_divergence_flag():
    d = build_dictionary(DictionaryConfig(1, 1, 1))
    data = _toy_data(np.ones(100))
    model = EstimatedModel(d.structure(["y(k-1)"]), np.array([2.0]))
    sim = simulate_free_run(d, model, data, range(1, 100))
    assert sim.diverged
    # 2**k first exceeds 1e8 at k = 27
    assert sim.steps == 27
    assert sim.steps <= 28


def test_free_run_uses_predictions_not_measurements():
    d = build_dictionary(DictionaryConfig(1, 1, 1))
    y = np.array([1.0, 100.0, 100.0, 100.0, 100.0])
    data = _toy_data(y)
    model = EstimatedModel(d.structure(["y(k-1)"]), np.array([0.5]))
    free = simulate_free_run(d, model, data, range(1, 5)).prediction
    one = predict_one_step(d, model, data, range(1, 5)).prediction
    np.testing.assert_array_equal(free, [0.5, 0.25, 0.125, 0.0625])
    np.testing.assert_array_equal(one, [0.5, 50, 50, 50])


def test_free_run_without_output_lags_equals_regression():
    rng = np.random.default_rng(1)
    d = build_dictionary(DictionaryConfig(2, 3, 3))
    data = Dataset(rng.uniform(-1, 1, 200), rng.normal(size=200), 150)
    no_y = np.array([not t.output_lags for t in d.terms])
    for _ in range(10):
        bits = no_y & (rng.random(len(d)) < 0.5)
        if not bits.any():
            continue
        theta = rng.normal(size=bits.sum())
        rows = range(3, 200)
        m, _ = build_regressor_matrix(d, bits, data, rows)
        expected = np.zeros(len(rows))
        for i in range(m.shape[1]):
            expected = expected + theta[i] * m[:, i]
        sim = simulate_free_run(d, EstimatedModel(bits, theta), data, rows)
        np.testing.assert_array_equal(sim.prediction, expected)


def test_sse_examples():
    assert sse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert sse([1.0, 2.0], [0.0, 0.0]) == 5.0
    c, n = 0.3, 17
    signs = np.where(np.arange(n) % 2, 1.0, -1.0)
    assert sse(np.zeros(n), c * signs) == pytest.approx(n * c * c, rel=1e-14)
    with pytest.raises(ValueError):
        sse([1.0], [1.0, 2.0])


def test_information_criterion_examples():
    assert information_criterion(1.0, 600, 5, FitnessSpec("BIC")) == pytest.approx(5 * math.log(600))
    assert information_criterion(1.0, 600, 5, FitnessSpec("BIC")) == pytest.approx(31.98, abs=0.01)
    assert information_criterion(math.e, 100, 3, FitnessSpec("AIC", 2)) == pytest.approx(106.0)


def test_fitness_spec_parsing():
    assert FitnessSpec.parse("bic") == FitnessSpec("BIC")
    assert FitnessSpec.parse("AIC(256)") == FitnessSpec("AIC", 256)
    assert FitnessSpec.parse("AIC:8").label == "AIC(8)"
    with pytest.raises(ValueError):
        FitnessSpec("AIC")
    with pytest.raises(ValueError):
        FitnessSpec("AIC", -1)


@pytest.fixture(scope="module")
def s1_50db():
    s = SYSTEMS["S1"]
    return s, make_dataset(s, np.random.default_rng(11), snr_db=50)


def test_true_structure_beats_true_plus_spurious(s1_50db):
    s, data = s1_50db
    spec = FitnessSpec("BIC")
    truth = s.true_structure
    j_true = evaluate_fitness(truth, s.dictionary, data, spec)
    rng = np.random.default_rng(0)
    for i in rng.choice(np.flatnonzero(~truth), size=5, replace=False):
        extra = truth.copy()
        extra[i] = True
        assert j_true < evaluate_fitness(extra, s.dictionary, data, spec)


def test_evaluator_matches_direct_route(s1_50db):
    s, data = s1_50db
    d = s.dictionary
    ev = FitnessEvaluator(d, data, FitnessSpec("BIC"))
    rng = np.random.default_rng(5)
    for _ in range(10):
        bits = rng.random(len(d)) < 0.15
        bits[0] = bits[0] or not bits.any()
        m, target = build_regressor_matrix(d, bits, data, range(d.max_lag, data.split_index))
        est = estimate_parameters(m, target, bits)
        sim = simulate_free_run(d, est, data, range(data.split_index, len(data)))
        if sim.diverged:
            assert ev(bits) == 1e12
            continue
        e = sse(data.y[data.split_index:], sim.prediction)
        j = 600 * math.log(e) + math.log(600) * bits.sum()
        got = ev.details(bits)
        np.testing.assert_allclose(got["model"].theta, est.theta, rtol=1e-7, atol=1e-9)
        assert got["fitness"] == pytest.approx(j, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_bic_equals_aic_with_log_l_penalty(s1_50db, data):
    s, ds = s1_50db
    n = len(s.dictionary)
    bits = np.array(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    if not bits.any():
        bits[0] = True
    bic = FitnessEvaluator(s.dictionary, ds, FitnessSpec("BIC"), cache=False)
    aic = FitnessEvaluator(s.dictionary, ds, FitnessSpec("AIC", math.log(ds.n_validation)), cache=False)
    assert bic(bits) == aic(bits)


def test_fitness_is_deterministic(s1_50db):
    s, data = s1_50db
    bits = s.true_structure.copy()
    bits[10] = True
    spec = FitnessSpec("AIC", 8)
    assert evaluate_fitness(bits, s.dictionary, data, spec) == evaluate_fitness(bits, s.dictionary, data, spec)


def test_divergent_structure_gets_penalty():
    d = build_dictionary(DictionaryConfig(1, 1, 1))
    n = 100
    y = 1.5 ** np.arange(n)  # exactly y(k) = 1.5 y(k-1); passes 1e8 during validation
    data = Dataset(np.zeros(n), y, 30)
    ev = FitnessEvaluator(d, data, FitnessSpec())
    assert ev.details(d.structure(["y(k-1)"]))["simulation"].diverged
    assert ev(d.structure(["y(k-1)"])) == 1e12


def test_evaluator_counts_every_call():
    s = SYSTEMS["S1"]
    data = make_dataset(s, np.random.default_rng(2), snr_db=40)
    ev = FitnessEvaluator(s.dictionary, data, FitnessSpec())
    for _ in range(3):
        ev(s.true_structure)
    assert ev.calls == 3


def test_dataset_csv_roundtrip(tmp_path):
    data = make_dataset("S3", np.random.default_rng(4), n=300, snr_db=30)
    path = tmp_path / "s3.csv"
    data.to_csv(path)
    assert path.read_text().splitlines()[0] == "k,u,y"
    back = Dataset.from_csv(path)
    np.testing.assert_array_equal(back.u, data.u)
    np.testing.assert_array_equal(back.y, data.y)
    assert back.split_index == data.split_index
