import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from firmgrowth.core import (
    FirmEnsemble,
    GeneralizedRates,
    KDistribution,
    LognormalParams,
    UrnConfig,
    evolve_urn,
    generate_firms,
    make_rng,
    map_generalized_rates,
    prefix_growth,
    sample_k,
    sample_lognormal,
    simulate_growth,
    step_firms,
)
from firmgrowth.errors import ConfigurationError, InvalidRatesError
from firmgrowth.estimators import hill_tail_exponent


# -- urn -------------------------------------------------------------------


def test_urn_all_entry_creates_a_class_per_step():
    ens = evolve_urn(UrnConfig(2, 5, 1.0, 10), seed=3)
    assert ens.n_classes == 12
    assert ens.total_units == 15
    assert np.all(ens.unit_counts[2:] == 1)


def test_urn_attachment_is_proportional_to_class_size():
    cfg = UrnConfig(2, 5, 0.0, 1, initial_counts=(3, 2))
    picks = np.array([evolve_urn(cfg, seed=11, stream=r).unit_counts[0] == 4 for r in range(4000)])
    # binomial test of the share of steps that went to the 3-unit class
    res = stats.binomtest(int(picks.sum()), len(picks), 3 / 5)
    assert res.pvalue > 0.001
    assert abs(picks.mean() - 0.6) < 0.03


def test_urn_without_entry_gives_geometric_class_sizes():
    ens = evolve_urn(UrnConfig(100, 100, 0.0, 100_000), seed=5)
    k = ens.unit_counts
    assert ens.n_classes == 100 and k.sum() == 100_100
    assert k.mean() == pytest.approx(1001)
    # oracle: an exponential law with the observed mean (fitted), checked by KS
    assert stats.kstest(k, "expon", args=(0, k.mean())).pvalue > 0.01


@settings(max_examples=40, deadline=None)
@given(
    n0=st.integers(1, 20),
    extra=st.integers(0, 30),
    b=st.floats(0, 1),
    steps=st.integers(0, 3000),
    seed=st.integers(0, 2**32),
)
def test_urn_conserves_units(n0, extra, b, steps, seed):
    ens = evolve_urn(UrnConfig(n0, n0 + extra, b, steps), seed)
    assert ens.total_units == n0 + extra + steps
    assert ens.unit_counts.min() >= 1
    assert ens.n_classes >= n0


def test_urn_is_deterministic_per_seed_and_stream():
    cfg = UrnConfig(3, 3, 0.3, 5000)
    a = evolve_urn(cfg, 7, 0).unit_counts
    b = evolve_urn(cfg, 7, 0).unit_counts
    c = evolve_urn(cfg, 7, 1).unit_counts
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(initial_classes=0, initial_units=1),
        dict(initial_classes=3, initial_units=2),
        dict(entry_prob=1.5),
        dict(steps=-1),
        dict(initial_classes=2, initial_units=4, initial_counts=(1, 2)),
    ],
)
def test_urn_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        UrnConfig(**kwargs)


def test_stream_summaries_are_uncorrelated():
    means = np.array([[sample_lognormal(LognormalParams(0, 1), 200, 9, s).mean() for s in (2 * r, 2 * r + 1)]
                      for r in range(300)])
    r = np.corrcoef(means[:, 0], means[:, 1])[0, 1]
    assert abs(r) < 3 / math.sqrt(300)


def test_make_rng_rejects_bad_seeds():
    with pytest.raises(ConfigurationError):
        make_rng(-1)
    with pytest.raises(ConfigurationError):
        make_rng(np.random.default_rng(1), stream=2)


# -- generalized rates --------------------------------------------------------


def test_generalized_rates_pure_growth():
    assert map_generalized_rates(GeneralizedRates(1.0, 0.0, 0.0), 100) == (100, 0.0)


def test_generalized_rates_mapping():
    t, b = map_generalized_rates(GeneralizedRates(0.5, 0.1, 0.1), 1000)
    assert t == 500
    assert b == pytest.approx(0.2)


def test_generalized_rates_negative_denominator():
    with pytest.raises(InvalidRatesError):
        map_generalized_rates(GeneralizedRates(0.2, 0.3, 0.05), 100)


# -- K distributions ---------------------------------------------------------


def test_fixed_k():
    assert sample_k(KDistribution.fixed(7), 3, seed=0).tolist() == [7, 7, 7]


def test_exponential_k_mean():
    k = sample_k(KDistribution.exponential(10), 100_000, seed=1)
    assert k.min() >= 1
    assert 9.8 <= k.mean() <= 10.2


def test_power_law_k_tail():
    k = sample_k(KDistribution.power_law(2.0, 10**6), 100_000, seed=2)
    assert 1.85 <= hill_tail_exponent(k, 0.1) <= 2.15


def test_yule_family_matches_closed_form_pmf():
    kd = KDistribution.yule(0.5)
    k = kd.sample(20_000, seed=4)
    freq = np.bincount(k, minlength=6)[1:6] / len(k)
    assert np.allclose(freq, kd.pmf(np.arange(1, 6)), atol=0.01)
    # Yule-Simon with rho = 2: P(1) = rho / (rho + 1)
    assert kd.pmf(1) == pytest.approx(2 / 3)


def test_empirical_k_resamples_table():
    kd = KDistribution.empirical([1, 1, 2, 5])
    k = kd.sample(10_000, seed=0)
    assert set(np.unique(k).tolist()) <= {1, 2, 5}
    assert kd.mean() == pytest.approx(2.25)


@pytest.mark.parametrize(
    "factory",
    [
        lambda: KDistribution.fixed(0),
        lambda: KDistribution.exponential(0.5),
        lambda: KDistribution.yule(1.0),
        lambda: KDistribution.power_law(1.0),
        lambda: KDistribution.power_law(2.0, 0),
        lambda: KDistribution.empirical([]),
        lambda: KDistribution("weibull"),
    ],
)
def test_invalid_k_parameters(factory):
    with pytest.raises(ConfigurationError):
        factory()


@settings(max_examples=30, deadline=None)
@given(
    st.sampled_from([KDistribution.fixed(3), KDistribution.exponential(4.5), KDistribution.power_law(2.2, 1000),
                     KDistribution.empirical([1, 3, 9])]),
    st.integers(0, 500),
    st.integers(0, 2**32),
)
def test_k_samples_are_positive_integers_and_deterministic(kd, n, seed):
    a = kd.sample(n, seed)
    assert a.dtype.kind == "i" and len(a) == n
    assert np.all(a >= 1)
    assert np.array_equal(a, kd.sample(n, seed))


def test_quantiles_bracket_mass():
    for kd in (KDistribution.exponential(50), KDistribution.power_law(2.0, 10**5), KDistribution.yule(0.5)):
        q = kd.quantile(0.999)
        assert kd.pmf(np.arange(1, q + 1)).sum() >= 0.999 - 1e-9
        assert kd.pmf(np.arange(1, q)).sum() < 0.999


# -- lognormal ----------------------------------------------------------------


def test_degenerate_lognormal():
    assert sample_lognormal(LognormalParams(1.5, 0.0), 2, seed=0).tolist() == [math.exp(1.5)] * 2


def test_lognormal_moments():
    x = sample_lognormal(LognormalParams(0.0, 1.0), 10**6, seed=3)
    assert 1.640 <= x.mean() <= 1.657
    assert np.median(x) == pytest.approx(1.0, rel=0.01)


def test_lognormal_rejects_negative_variance():
    with pytest.raises(ConfigurationError):
        LognormalParams(0.0, -0.1)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 4), st.integers(1, 200), st.integers(0, 2**32))
def test_lognormal_samples_positive(m, V, n, seed):
    assert np.all(sample_lognormal(LognormalParams(m, V), n, seed) > 0)


# -- firms ---------------------------------------------------------------------


def test_single_unit_firms_are_lognormal():
    ens = generate_firms(KDistribution.fixed(1), LognormalParams(1.0, 0.5), 20_000, seed=1)
    lx = np.log(ens.firm_sizes)
    assert stats.kstest(lx, "norm", args=(1.0, math.sqrt(0.5))).pvalue > 0.001


def test_equal_units_give_exact_size():
    ens = generate_firms(KDistribution.fixed(100), LognormalParams(0.0, 0.0), 50, seed=1)
    assert np.all(ens.firm_sizes == 100.0)


def test_wald_identity_for_mean_size():
    ens = generate_firms(KDistribution.exponential(50), LognormalParams(0.0, 1.0), 10_000, seed=2)
    assert ens.firm_sizes.mean() == pytest.approx(50 * math.exp(0.5), rel=0.05)


def test_step_single_unit_growth_is_log_eta():
    ens = generate_firms(KDistribution.fixed(1), LognormalParams(0.0, 1.0), 50_000, seed=1)
    _, obs = step_firms(ens, LognormalParams(0.05, 0.36), seed=2)
    assert stats.kstest(obs.growth, "norm", args=(0.05, 0.6)).pvalue > 0.001
    assert np.all(obs.unit_count == 1)
    assert np.allclose(obs.effective_units, 1.0)


def test_step_without_growth_noise():
    ens = generate_firms(KDistribution.exponential(5), LognormalParams(0.0, 2.0), 200, seed=1)
    grown, obs = step_firms(ens, LognormalParams(0.1, 0.0), seed=2)
    assert np.allclose(obs.growth, 0.1, atol=1e-12)
    assert np.allclose(grown.firm_sizes, ens.firm_sizes * math.exp(0.1))


def test_step_large_firms_follow_gaussian_variance():
    xi, eta, K = LognormalParams(0.0, 1.0), LognormalParams(0.0, 0.36), 10_000
    _, G, _ = prefix_growth([K], 10_000, xi, eta, seed=4)
    V = math.exp(1.0) * math.expm1(0.36)
    assert G.var(ddof=1) * K == pytest.approx(V, rel=0.05)


def test_firm_ensemble_invariants():
    ens = FirmEnsemble.from_firms([[1.0, 3.0], [2.0]])
    assert ens.firm_sizes.tolist() == [4.0, 2.0]
    assert ens.largest_units.tolist() == [3.0, 2.0]
    with pytest.raises(ConfigurationError):
        FirmEnsemble.from_firms([[1.0, -1.0]])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 400), st.floats(0, 3), st.integers(0, 2**32))
def test_observation_bounds(n, V, seed):
    obs = simulate_growth(KDistribution.exponential(6), LognormalParams(0, V), LognormalParams(0, 0.2), n, seed,
                          chunk_units=97)
    ke = obs.effective_units
    assert np.all(ke >= 1 - 1e-12)
    assert np.all(ke <= obs.unit_count * (1 + 1e-12))
    assert np.all(obs.largest_unit <= obs.size * (1 + 1e-12))


def test_chunking_does_not_change_results():
    args = (KDistribution.exponential(20), LognormalParams(0, 1), LognormalParams(0, 0.3), 3000, 8)
    a = simulate_growth(*args, chunk_units=10**7)
    b = simulate_growth(*args, chunk_units=500)
    # sampling order differs between chunkings, so compare statistics only
    assert len(a) == len(b)
    assert np.array_equal(np.sort(a.unit_count), np.sort(b.unit_count))


def test_prefix_growth_matches_direct_sums():
    xi, eta = LognormalParams(0, 1), LognormalParams(0, 0.5)
    S, G, X = prefix_growth([1, 3, 8], 5, xi, eta, seed=1)
    rng = make_rng(1)
    units = xi.sample((5, 8), rng)
    factors = eta.sample((5, 8), rng)
    for j, k in enumerate([1, 3, 8]):
        assert np.allclose(S[:, j], units[:, :k].sum(1))
        assert np.allclose(G[:, j], np.log((units[:, :k] * factors[:, :k]).sum(1) / units[:, :k].sum(1)))
        assert np.allclose(X[:, j], units[:, :k].max(1))
