import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpqmc.diagnostics import (ReplicateSet, acceptance_rate, asymptotic_variance_batch_means,
                               empirical_variance, fit_rate, gold_standard_mean,
                               mean_squared_deviation, metric_stderr, mse, msjd,
                               replicate_set, squared_bias)
from mpqmc.driving import pseudo_random_stream
from mpqmc.errors import (ConfigError, NonPositiveMetric, NoReference, TooFewSamples, WrongMode)
from mpqmc.proposals import IndependentGaussian
from mpqmc.samplers import SamplerConfig, run_mp_mcmc, run_sampler
from mpqmc.targets import gaussian_target


def test_identical_replicates_have_zero_variance():
    rs = ReplicateSet([10], np.full((5, 1), 2.0), reference=[2.0])
    assert empirical_variance(rs, 10) == 0.0 and squared_bias(rs, 10) == 0.0


def test_reference_at_replicate_mean_has_zero_bias():
    est = np.array([[1.0], [2.0], [4.0]])
    rs = ReplicateSet([7], est, reference=[est.mean()])
    assert squared_bias(rs, 7) == pytest.approx(0.0, abs=1e-30)


def test_synthetic_variance_within_30_percent():
    rng = np.random.default_rng(0)
    s = 0.7
    est = 3.0 + s * rng.standard_normal((100, 1))
    rs = ReplicateSet([1], est, reference=[3.0])
    assert abs(empirical_variance(rs, 1) / s**2 - 1) < 0.3


@given(st.integers(2, 30), st.integers(1, 3), st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_mse_decomposition(R, p, seed):
    rng = np.random.default_rng(seed)
    est = rng.standard_normal((R, 2, p))
    ref = rng.standard_normal(p)
    rs = ReplicateSet([4, 8], est, reference=ref)
    for n in (4, 8):
        v, b = empirical_variance(rs, n), squared_bias(rs, n)
        assert mse(rs, n) == pytest.approx(v + b, abs=1e-12)
        assert mean_squared_deviation(rs, n) == pytest.approx((R - 1) / R * v + b, abs=1e-12)
        for metric in ("variance", "bias2", "mse", "msd"):
            assert metric_stderr(rs, n, metric) >= 0


def test_replicate_errors():
    rs = ReplicateSet([1], np.ones((3, 1)))
    with pytest.raises(NoReference):
        mse(rs, 1)
    with pytest.raises(TooFewSamples):
        empirical_variance(ReplicateSet([1], np.ones((1, 1))), 1)
    with pytest.raises(KeyError):
        rs.at(5)


@pytest.mark.parametrize("power", [1, 2])
def test_fit_rate_exact_power_law(power):
    n = 2.0 ** np.arange(4, 12)
    fit = fit_rate(np.column_stack([n, 3.7 / n**power]))
    assert fit.slope == pytest.approx(-power, abs=1e-12)
    assert fit.stderr < 1e-12


def test_fit_rate_errors():
    with pytest.raises(NonPositiveMetric):
        fit_rate([[1, 1.0], [2, 0.0], [4, 1.0]])
    with pytest.raises(ValueError):
        fit_rate([[1, 1.0], [2, 1.0]])
    with pytest.raises(ValueError):
        fit_rate([[4, 1.0], [4, 2.0], [8, 1.0]])


def test_still_chain_and_alternating_chain():
    still = np.zeros((10, 2))
    assert msjd(still) == 0.0
    assert acceptance_rate(np.zeros(10, dtype=bool)) == 0.0
    p, q = np.array([0.0, 1.0]), np.array([2.0, -1.0])
    alt = np.array([p, q] * 5)
    assert msjd(alt) == pytest.approx(np.sum((p - q) ** 2))


def test_acceptance_grows_with_proposals():
    target = gaussian_target([0.0], [[1.0]])
    kernel = IndependentGaussian([0.0], [[5.76]])
    rates = []
    for N in (4, 16, 64):
        run = run_mp_mcmc(SamplerConfig(N=N, L=2000), target, kernel, pseudo_random_stream(1), [0.0])
        rates.append(acceptance_rate(run))
        assert 0 <= rates[-1] <= 1 and msjd(run) >= 0
    assert rates[0] < rates[1] < rates[2]


def test_importance_runs_are_rejected():
    target = gaussian_target([0.0], [[1.0]])
    kernel = IndependentGaussian([0.0], [[2.0]])
    run = run_sampler(SamplerConfig(N=3, L=20, mode="importance"), target, kernel,
                      pseudo_random_stream(0), [0.0])
    with pytest.raises(WrongMode):
        acceptance_rate(run)
    with pytest.raises(WrongMode):
        msjd(run)


def test_batch_means_iid_and_constant():
    x = np.random.default_rng(3).standard_normal(100_000)
    # sqrt(n) batches keep the estimator's own spread near 8%
    assert abs(asymptotic_variance_batch_means(x, 316) - 1) < 0.25
    assert asymptotic_variance_batch_means(np.ones(1000)) == 0.0
    with pytest.raises(TooFewSamples):
        asymptotic_variance_batch_means(np.ones(100), 20)


def test_batch_means_stable_across_batch_counts():
    target = gaussian_target([0.0], [[1.0]])
    kernel = IndependentGaussian([0.0], [[5.76]])
    run = run_mp_mcmc(SamplerConfig(N=4, L=20_000), target, kernel, pseudo_random_stream(2), [0.0])
    a = asymptotic_variance_batch_means(run, 20)
    b = asymptotic_variance_batch_means(run, 50)
    assert 0.5 < a / b < 2


def test_replicate_set_from_runs():
    target = gaussian_target([1.0], [[1.0]])
    kernel = IndependentGaussian([1.0], [[4.0]])
    runs = [run_sampler(SamplerConfig(N=4, L=64, mode="importance"), target, kernel,
                        pseudo_random_stream(s), [1.0]) for s in range(3)]
    rs = replicate_set(runs, [16, 64], reference=[1.0], seeds=[0, 1, 2])
    assert rs.estimates.shape == (3, 2, 1)
    assert np.array_equal(rs.at(64)[:, 0], [r.estimate.mu[0] for r in runs])


def test_gold_standard_against_analytic_and_cache(tmp_path):
    target = gaussian_target([0.5, -1.0], [[1.0, 0.3], [0.3, 0.6]])
    kernel = IndependentGaussian([0.5, -1.0], 2.0 * np.eye(2))
    gs = gold_standard_mean(target, kernel, budget=1 << 13, N=31, cache_dir=tmp_path)
    assert np.all(np.abs(gs.mean - target.analytic_mean) <= 3 * gs.stderr + 1e-12)
    again = gold_standard_mean(target, kernel, budget=1 << 13, N=31)
    assert np.array_equal(gs.mean, again.mean) and gs.key == again.key
    assert len(list(tmp_path.glob("gold_*.json"))) == 1
    cached = gold_standard_mean(target, kernel, budget=1 << 13, N=31, cache_dir=tmp_path)
    assert np.array_equal(cached.mean, gs.mean)
    with pytest.raises(ConfigError):
        gold_standard_mean(target, kernel, budget=1000, largest_experiment=500)
    with pytest.raises(ConfigError):
        gold_standard_mean(target, kernel, replicates=5)
