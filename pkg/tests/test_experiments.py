import math
from collections import Counter

import numpy as np
import pytest

from firmgrowth import analytics as A
from firmgrowth.core import KDistribution, LognormalParams, UrnConfig, evolve_urn, prefix_growth
from firmgrowth.errors import ConfigurationError, InsufficientDataError
from firmgrowth.estimators import bin_sigma_by_size
from firmgrowth.experiments import (
    ExperimentSpec,
    ReassignmentMode,
    k_grid,
    observed_beta,
    run_beta_min_sweep,
    run_collapse,
    run_conditional_pgsk,
    run_growth_tails,
    run_reassignment,
    run_sigma_k,
    run_sigma_s,
    run_urn_laws,
    run_vxi_sweep,
    simulate_observations,
)
from firmgrowth.observations import ObservationTable
from firmgrowth.panel import Panel, PanelRecord, compute_observations, simulate_panel

LN = LognormalParams


def test_k_grid():
    assert k_grid(8, 1).tolist() == [1, 2, 4, 8]
    g = k_grid(2**10, 4)
    assert g[0] == 1 and g[-1] == 1024 and np.all(np.diff(g) > 0)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        ExperimentSpec(KDistribution.fixed(1), LN(0, 1), LN(0, 1), 0)
    with pytest.raises(ConfigurationError):
        ExperimentSpec(KDistribution.fixed(1), LN(0, 1), LN(0, 1), 100, seed=-3)


# -- sigma(S) ---------------------------------------------------------------------------


def test_statistical_floor():
    spec = ExperimentSpec(KDistribution.fixed(1), LN(0, 1), LN(0, 0.36), 5000)
    with pytest.raises(ConfigurationError):
        run_sigma_s(spec)
    run_sigma_s(ExperimentSpec(KDistribution.fixed(1), LN(0, 1), LN(0, 0.36), 5000, replicas=2))


def test_single_unit_curve_is_flat():
    # 20000 firms per bin puts the standard error near 0.5 %
    spec = ExperimentSpec(KDistribution.fixed(1), LN(0, 1), LN(0, 0.36), 10**6, min_count=20_000, seed=1)
    res = run_sigma_s(spec)
    assert len(res.binned) >= 5
    for b in res.binned:
        assert b.sigma == pytest.approx(0.6, rel=0.02)
    assert res.overlays["sigma_small"] == pytest.approx(0.6)


def test_large_k0_reaches_central_limit_regime():
    spec = ExperimentSpec(KDistribution.exponential(10**4), LN(0, 1), LN(0, 0.36), 20_000, seed=2)
    res = run_sigma_s(spec)
    cutoff = 10**4 * math.exp(0.5)
    assert max(b for s, b in res.beta if s < cutoff) >= 0.4


def test_wide_unit_sizes_never_converge():
    spec = ExperimentSpec(KDistribution.exponential(100), LN(0, 10), LN(0, 0.36), 100_000, seed=3)
    assert run_sigma_s(spec).beta_max <= 0.2


@pytest.fixture(scope="module")
def crossover_run():
    spec = ExperimentSpec(KDistribution.exponential(10), LN(3.44, 5.13), LN(0.016, 0.36), 200_000, seed=0)
    return run_sigma_s(spec)


def test_small_size_bins_match_overlay(crossover_run):
    mu = math.exp(3.44 + 5.13 / 2)
    small = [b for b in crossover_run.binned if b.center < mu / 100 and b.count >= 100]
    assert len(small) >= 4
    for b in small:
        assert b.sigma == pytest.approx(crossover_run.overlays["sigma_small"], rel=0.05)


def test_beta_peaks_before_effective_units(crossover_run):
    ke_peak = max(crossover_run.ke_profile, key=lambda p: p[1])[0]
    assert crossover_run.beta_max_at < ke_peak
    assert crossover_run.overlays["S1"] == pytest.approx(A.crossover_size(LN(3.44, 5.13), LN(0.016, 0.36)).S1)


def test_sigma_s_is_deterministic():
    spec = ExperimentSpec(KDistribution.exponential(20), LN(0, 2), LN(0, 0.36), 5000, replicas=2, seed=9)
    a, b = run_sigma_s(spec), run_sigma_s(spec)
    assert [x.sigma for x in a.binned] == [x.sigma for x in b.binned]
    drop = lambda d: {k: v for k, v in d.items() if k != "runtime_s"}
    assert drop(a.provenance) == drop(b.provenance)


def test_replicas_use_distinct_streams():
    one = ExperimentSpec(KDistribution.fixed(1), LN(0, 1), LN(0, 0.36), 10_000, replicas=1, seed=4)
    two = ExperimentSpec(KDistribution.fixed(1), LN(0, 1), LN(0, 0.36), 10_000, replicas=2, seed=4)
    a, b = simulate_observations(one), simulate_observations(two)
    assert len(b) == 2 * len(a)
    assert np.array_equal(b.growth[:10_000], a.growth)
    assert not np.array_equal(b.growth[10_000:], a.growth)


# -- sigma(K) ---------------------------------------------------------------------------------


def test_sigma_k_single_unit():
    spec = ExperimentSpec(KDistribution.fixed(1), LN(0, 1), LN(0, 0.36), 100_000, seed=1)
    res = run_sigma_k(spec, [1])
    assert res.sigma2[0] == pytest.approx(0.36, rel=0.02)


def test_sigma_k_series_at_small_variance():
    xi = eta = LN(0, 0.1)
    spec = ExperimentSpec(KDistribution.fixed(1), xi, eta, 100_000, seed=2)
    res = run_sigma_k(spec, [100])
    assert res.sigma2[0] == pytest.approx(A.truncated_series_sigma2(100, A.series_coefficients(xi, eta), 2), rel=0.1)


def test_sigma_k_large_k_matches_C():
    xi, eta = LN(0, 1), LN(0, 0.36)
    spec = ExperimentSpec(KDistribution.fixed(1), xi, eta, 10_000, seed=3)
    res = run_sigma_k(spec, [10**4])
    assert res.sigma2[0] * 10**4 == pytest.approx(A.series_coefficients(xi, eta).C, rel=0.05)


def test_sigma_k_decreases_with_k():
    spec = ExperimentSpec(KDistribution.fixed(1), LN(0, 1), LN(0, 0.36), 20_000, seed=4)
    res = run_sigma_k(spec, [1, 4, 16, 64, 256])
    assert np.all(np.diff(res.sigma2) < 0)
    assert np.all(res.counts == 20_000)


# -- collapse -----------------------------------------------------------------------------------


def test_single_cell_collapse_is_trivial():
    run = run_collapse([(1.0, 1.0)], k_grid(2**6, 2), 10_000, seed=1)
    assert run.collapse.shifts.tolist() == [0.0]
    assert run.collapse.spread == 0.0


@pytest.mark.slow
def test_collapse_of_small_grid():
    grid = [(vx, ve) for vx in (1.0, 2.0, 3.0, 4.0) for ve in (0.5, 1.0)]
    run = run_collapse(grid, k_grid(2**14, 2), 10_000, seed=2)
    assert run.collapse.spread <= 0.15
    assert run.additive_residual <= 0.2


@pytest.mark.slow
def test_f_xi_is_nearly_linear():
    grid = [(float(v), 1.0) for v in range(2, 9)]
    run = run_collapse(grid, k_grid(2**14, 2), 10_000, seed=1)
    vals = [run.f_xi[v] for v in sorted(run.f_xi)]
    assert np.all(np.diff(vals) > 0)
    assert run.f_xi_linearity <= 0.15


# -- beta_min -----------------------------------------------------------------------------------


def test_beta_min_barely_depends_on_eta():
    sweep = run_beta_min_sweep([4.0, 6.0, 8.0], [0.5, 2.0], 100_000, seed=3)
    assert abs(sweep.lookup(6.0, 0.5).beta_min - sweep.lookup(6.0, 2.0).beta_min) <= 0.03
    assert sweep.lookup(8.0, 2.0).beta_min < sweep.lookup(4.0, 2.0).beta_min
    assert sweep.p > 0 and sweep.q > 0


def test_beta_min_sweep_needs_three_xi_values():
    with pytest.raises(ConfigurationError):
        run_beta_min_sweep([4.0, 6.0], [1.0], 10_000)


# -- fixed K conditional growth ----------------------------------------------------------------------


def test_pgsk_structure_at_moderate_k():
    res = run_conditional_pgsk(K=2**10, n_firms=100_000, min_firms=10_000, seed=2)
    assert res.modal.count == max(b.count for b in res.binned)
    assert res.abnormal.bin_lo == res.modal.bin_hi
    assert res.abnormal.sigma > res.modal.sigma
    assert res.ke_ratio > 1


def test_pgsk_without_unit_spread():
    # equal unit sizes put every firm in one bin, which leaves no abnormal bin
    with pytest.raises(InsufficientDataError, match="bin counts"):
        run_conditional_pgsk(xi_V=0.0, K=2**10, n_firms=20_000, min_firms=10_000)
    S, G, X = prefix_growth([2**10], 20_000, LN(0, 0), LN(0, 1), seed=0)
    binned = bin_sigma_by_size(ObservationTable(S[:, 0], G[:, 0], np.full(20_000, 2**10), X[:, 0]), "S")
    assert len(binned) <= 2


def test_pgsk_requires_enough_firms():
    with pytest.raises(ConfigurationError):
        run_conditional_pgsk(K=16, n_firms=1000)


# -- V_xi sweep ------------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def urn_k():
    return KDistribution.empirical(evolve_urn(UrnConfig(1, 1, 0.1, 300_000), seed=2).unit_counts)


def test_vxi_sweep_decreases(urn_k):
    xs = [0, 2, 5, 10, 15, 20, 25]
    rows = run_vxi_sweep({"firm": urn_k}, 7.58, xs, LN(0, 0.36), 100_000, seed=4)["firm"]
    betas = [b for _, b in rows]
    assert [v for v, _ in rows] == xs
    assert all(b1 <= b0 + 0.03 for b0, b1 in zip(betas, betas[1:]))


def test_vxi_sweep_needs_a_table():
    with pytest.raises(ConfigurationError):
        run_vxi_sweep({}, 0.0, [0], LN(0, 1), 10_000)


# -- reassignment --------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def panel():
    return simulate_panel(KDistribution.exponential(8), LN(2, 2), LN(0, 0.3), 3000, periods=5, n_markets=30, seed=1)


@pytest.mark.parametrize("mode", list(ReassignmentMode))
def test_reassignment_keeps_unit_counts(panel, mode):
    res = run_reassignment(panel, mode, ("firm", "market"), seed=5)
    for lv in ("firm", "market"):
        assert Counter(res.observations[lv].unit_count.tolist()) == Counter(
            compute_observations(panel, lv).unit_count.tolist())


@pytest.mark.parametrize("mode", ["keep_eta", "shuffle_eta"])
def test_reassignment_conserves_sales(panel, mode):
    res = run_reassignment(panel, mode, ("firm",), seed=6)
    base = compute_observations(panel, "firm")
    assert res.observations["firm"].size.sum() == pytest.approx(base.size.sum(), rel=1e-12)


def test_keep_eta_conserves_period_totals(panel):
    res = run_reassignment(panel, "keep_eta", ("firm",), seed=7)
    grown = res.observations["firm"].size * np.exp(res.observations["firm"].growth)
    base = compute_observations(panel, "firm")
    assert grown.sum() == pytest.approx((base.size * np.exp(base.growth)).sum(), rel=1e-12)


def test_identity_permutation_reproduces_observed_beta(panel):
    ident = np.arange(len(panel.product_labels))
    res = run_reassignment(panel, "keep_eta", ("firm", "market"), permutation=ident)
    assert res.beta == observed_beta(panel, ("firm", "market"))


def test_synthetic_mode_estimates_parameters(panel):
    res = run_reassignment(panel, "synthetic", ("firm",), seed=1)
    assert res.xi.m == pytest.approx(2.0, abs=0.1)
    assert res.eta.V == pytest.approx(0.3, rel=0.1)


def test_reassignment_is_deterministic(panel):
    a = run_reassignment(panel, "shuffle_eta", ("firm", "product"), seed=11)
    b = run_reassignment(panel, "shuffle_eta", ("firm", "product"), seed=11)
    assert a.beta == b.beta


def test_reassignment_needs_two_periods():
    p = Panel.from_records([PanelRecord("m", "f", "a", 1, 1.0)])
    with pytest.raises(InsufficientDataError):
        run_reassignment(p, "keep_eta")


def test_reassignment_rejects_bad_permutation(panel):
    with pytest.raises(ConfigurationError):
        run_reassignment(panel, "keep_eta", permutation=np.zeros(len(panel.product_labels), dtype=int))


# -- urn laws and growth tails --------------------------------------------------------------------


def test_urn_laws_small():
    chk = run_urn_laws(5, 10, 0.4, 500, replicas=200, seed=1)
    assert chk.conserved
    assert chk.expected_classes == 5 + 0.4 * 500
    assert abs(chk.z_score) <= 3


def test_urn_laws_without_entry_is_exact():
    chk = run_urn_laws(3, 3, 0.0, 100, replicas=10)
    assert chk.mean_classes == 3 and chk.z_score == 0.0


def test_growth_tail_threshold_default():
    xi, eta = LN(0, 2), LN(0, 0.36)
    res = run_growth_tails(KDistribution.exponential(50), xi, eta, 20_000, seed=1)
    assert res.threshold == pytest.approx(math.sqrt(A.gaussian_approx(xi, eta).V / KDistribution.exponential(50).mean()))
    assert 0 < res.tail_fraction <= 0.5
