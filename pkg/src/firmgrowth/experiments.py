"""End-to-end Monte-Carlo experiments built on the core, analytics and estimators.

Every runner is a pure function of its inputs and seed.  Replicas and grid
cells draw from independent streams ``(seed, stream)`` and are pooled in a
fixed order, so running them serially or on a process pool gives the same
numbers.
"""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import analytics
from .core import (
    KDistribution,
    LognormalParams,
    SeedLike,
    UrnConfig,
    evolve_urn,
    make_rng,
    prefix_growth,
    simulate_growth,
)
from .errors import ConfigurationError, DataError, InsufficientDataError
from .estimators import (
    DEFAULT_MIN_COUNT,
    DEFAULT_WINDOW,
    BetaMinimum,
    BinnedSigma,
    CollapseResult,
    PowerLawFit,
    SigmaKCurve,
    additive_shift_fit,
    bin_sigma_by_size,
    collapse_curves,
    effective_beta,
    extract_beta_min,
    fit_global_beta,
    fit_power_law,
    hill_tail_exponent,
)
from .observations import ObservationTable
from .panel import (
    Panel,
    compute_observations,
    empirical_k,
    estimate_lognormal_params,
    group_growth,
    unit_growth_factors,
)

STATISTICAL_FLOOR = 10_000


def _map(fn: Callable, args: Sequence, workers: int) -> list:
    """Ordered map, optionally over a process pool."""
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args)))


def k_grid(k_max: int, per_octave: int = 4) -> np.ndarray:
    """Distinct integers close to ``2**(j / per_octave)`` from 1 up to ``k_max``."""
    if k_max < 1 or per_octave < 1:
        raise ConfigurationError("k_max and per_octave must be >= 1")
    n = int(math.floor(math.log2(k_max) * per_octave + 1e-9))
    ks = np.unique(np.rint(2.0 ** (np.arange(n + 1) / per_octave)).astype(np.int64))
    return ks[ks <= k_max]


# ---------------------------------------------------------------------------
# Specs and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    """Parameter bundle shared by the sigma-curve experiments."""

    kdist: KDistribution
    xi: LognormalParams
    eta: LognormalParams
    n_firms: int
    replicas: int = 1
    seed: int = 0
    min_count: int = DEFAULT_MIN_COUNT
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.n_firms < 1 or self.replicas < 1:
            raise ConfigurationError("n_firms and replicas must be >= 1")
        if self.min_count < 2:
            raise ConfigurationError("min_count must be >= 2")
        if self.window < 3:
            raise ConfigurationError("window must be >= 3")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")

    @property
    def total_firms(self) -> int:
        return self.n_firms * self.replicas

    def require_floor(self) -> None:
        if self.total_firms < STATISTICAL_FLOOR:
            raise ConfigurationError(
                f"n_firms * replicas = {self.total_firms} is below the statistical floor {STATISTICAL_FLOOR}"
            )

    def describe(self) -> dict[str, Any]:
        return {
            "kdist": self.kdist.describe(),
            "xi": self.xi.describe(),
            "eta": self.eta.describe(),
            "n_firms": self.n_firms,
            "replicas": self.replicas,
            "seed": int(self.seed),
            "min_count": self.min_count,
            "window": self.window,
        }


class ReassignmentMode(enum.Enum):
    KEEP_ETA = "keep_eta"
    SHUFFLE_ETA = "shuffle_eta"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """Binned sigma(S) curve with its local exponent and analytic overlays.

    ``beta_max`` is the largest local exponent (steepest descent of
    ``ln sigma``) and ``beta_max_at`` the bin centre where it occurs.
    ``overlays`` holds ``sigma_small`` (scalar), ``sigma_large`` (per bin),
    ``S_star`` and ``S1``.
    """

    binned: list[BinnedSigma]
    beta: list[tuple[float, float]]
    beta_max: float
    beta_max_at: float
    beta_min: float
    global_beta: PowerLawFit | None
    ke_profile: list[tuple[float, float]]
    overlays: dict[str, Any]
    provenance: dict[str, Any]


def _replica_growth(kdist, xi, eta, n, seed, stream):
    return simulate_growth(kdist, xi, eta, n, seed, stream)


def simulate_observations(spec: ExperimentSpec, workers: int = 1) -> ObservationTable:
    """One growth step for every replica, pooled in replica order."""
    args = [(spec.kdist, spec.xi, spec.eta, spec.n_firms, spec.seed, r) for r in range(spec.replicas)]
    return ObservationTable.concat(_map(_replica_growth, args, workers))


def summarize_sigma_s(obs: ObservationTable, spec: ExperimentSpec | None = None,
                      min_count: int = DEFAULT_MIN_COUNT, window: int = DEFAULT_WINDOW,
                      provenance: dict | None = None) -> ExperimentResult:
    """Bin observations by size and derive the exponent profile and overlays."""
    binned = bin_sigma_by_size(obs, "S", min_count)
    if len(binned) < 3:
        raise InsufficientDataError(f"only {len(binned)} populated size bins")
    beta = effective_beta(binned, window)
    bvals = np.array([b for _, b in beta])
    i = int(np.argmax(bvals))
    overlays: dict[str, Any] = {}
    if spec is not None:
        centers = np.array([b.center for b in binned])
        overlays["sigma_small"] = analytics.sigma_small_s(spec.eta)
        overlays["sigma_large"] = analytics.sigma_large_s(centers, spec.xi, spec.eta).tolist()
        if spec.eta.V > 0:
            cp = analytics.crossover_size(spec.xi, spec.eta)
            overlays["S_star"] = cp.S_star
            overlays["S1"] = cp.S1
    return ExperimentResult(
        binned=binned,
        beta=beta,
        beta_max=float(bvals[i]),
        beta_max_at=float(beta[i][0]),
        beta_min=float(bvals.min()),
        global_beta=fit_global_beta(binned),
        ke_profile=[(b.center, b.mean_Ke) for b in binned],
        overlays=overlays,
        provenance=dict(provenance or {}),
    )


def run_sigma_s(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """sigma(S) for firms drawn from ``spec.kdist``, one growth step each."""
    spec.require_floor()
    t0 = time.perf_counter()
    obs = simulate_observations(spec, workers)
    prov = {"experiment": "sigma_s", "spec": spec.describe(), "fit": "unweighted OLS of ln sigma on mean ln S per bin"}
    res = summarize_sigma_s(obs, spec, spec.min_count, spec.window, prov)
    res.provenance["runtime_s"] = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# Fixed-K curves, collapse and beta_min
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SigmaKResult:
    curve: SigmaKCurve
    counts: np.ndarray
    stderr: np.ndarray

    @property
    def K(self) -> np.ndarray:
        return self.curve.K

    @property
    def sigma2(self) -> np.ndarray:
        return self.curve.sigma2


def _replica_prefix(k_values, n, xi, eta, seed, stream, dtype):
    _, G, _ = prefix_growth(k_values, n, xi, eta, seed, stream, dtype=dtype)
    return G


def run_sigma_k(spec: ExperimentSpec, k_values: Sequence[int], workers: int = 1,
                dtype=np.float64) -> SigmaKResult:
    """Monte-Carlo ``Var(g)`` for firms of exactly ``K`` units, for each ``K``.

    Firms are nested (the ``K``-unit firm is a prefix of the larger ones) so
    the curve is smooth in ``K``; ``spec.kdist`` is ignored.
    """
    ks = np.unique(np.asarray(k_values, dtype=np.int64))
    if ks.size == 0:
        raise ConfigurationError("K list must be nonempty")
    return _sigma_k_cell(spec, ks, 0, workers, dtype)


@dataclass(frozen=True, eq=False)
class CollapseRun:
    """Collapse of a ``(V_xi, V_eta)`` grid plus the additive and linear shift fits."""

    collapse: CollapseResult
    sigma_k: list[SigmaKResult]
    f_xi: dict[float, float]
    f_eta: dict[float, float]
    additive_residual: float
    f_xi_linear: PowerLawFit | None
    f_xi_linearity: float | None


def _linearity(table: dict[float, float]) -> tuple[PowerLawFit | None, float | None]:
    """Straight-line fit through ``table`` and its largest residual relative to the total rise."""
    if len(table) < 3:
        return None, None
    x = np.array(sorted(table))
    y = np.array([table[k] for k in x])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    rise = abs(y[-1] - y[0])
    rel = float(np.abs(resid).max() / rise) if rise > 0 else float("inf")
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 0.0
    return PowerLawFit(float(slope), float(icpt), 0.0, r2, len(x)), rel


def run_collapse(grid: Sequence[tuple[float, float]], k_values: Sequence[int], n_firms: int,
                 seed: int = 0, replicas: int = 1, m_xi: float = 0.0, m_eta: float = 0.0,
                 window: int = DEFAULT_WINDOW, workers: int = 1) -> CollapseRun:
    """sigma^2(K) for each ``(V_xi, V_eta)`` cell, collapsed onto one scaling curve.

    Cell ``i`` uses streams offset by ``i * replicas`` so cells never share
    random numbers.
    """
    if not grid:
        raise ConfigurationError("grid must contain at least one cell")
    results = []
    for i, (vx, ve) in enumerate(grid):
        spec = ExperimentSpec(KDistribution.fixed(1), LognormalParams(m_xi, vx), LognormalParams(m_eta, ve),
                              n_firms, replicas, seed, window=window)
        results.append(_sigma_k_cell(spec, k_values, i, workers))
    col = collapse_curves([r.curve for r in results], window)
    f_xi, f_eta, resid = additive_shift_fit(col.params, col.shifts)
    lin, rel = _linearity(f_xi)
    return CollapseRun(col, results, f_xi, f_eta, resid, lin, rel)


def _sigma_k_cell(spec: ExperimentSpec, k_values, cell: int, workers: int, dtype=np.float64) -> SigmaKResult:
    ks = np.unique(np.asarray(k_values, dtype=np.int64))
    spec.require_floor()
    base = cell * spec.replicas
    args = [(ks, spec.n_firms, spec.xi, spec.eta, spec.seed, base + r, dtype) for r in range(spec.replicas)]
    G = np.concatenate(_map(_replica_prefix, args, workers), axis=0)
    var = G.var(axis=0, ddof=1)
    m4 = np.mean((G - G.mean(axis=0)) ** 4, axis=0)
    se = np.sqrt(np.maximum(m4 - var**2, 0.0) / G.shape[0])
    return SigmaKResult(SigmaKCurve(spec.xi.V, spec.eta.V, ks.astype(float), var), np.full(ks.size, G.shape[0]), se)


@dataclass(frozen=True)
class BetaMinCell:
    xi_V: float
    eta_V: float
    beta_min: float
    argmin_K: float
    boundary: bool


@dataclass(frozen=True, eq=False)
class BetaMinSweep:
    """Per-cell minima of ``beta(K)``, the fit ``1/beta_min = p V_xi + q``,
    and the largest spread of ``beta_min`` across ``V_eta`` at fixed ``V_xi``."""

    cells: list[BetaMinCell]
    p: float
    q: float
    eta_spread: float
    curves: list[list[tuple[float, float]]] = field(default_factory=list)

    def lookup(self, xi_V: float, eta_V: float) -> BetaMinCell:
        for c in self.cells:
            if c.xi_V == xi_V and c.eta_V == eta_V:
                return c
        raise KeyError((xi_V, eta_V))


def beta_of_k(result: SigmaKResult, window: int = DEFAULT_WINDOW) -> list[tuple[float, float]]:
    """Local exponent of ``sigma(K) = sqrt(sigma^2)`` against ``K``."""
    return effective_beta(list(zip(result.K, np.sqrt(result.sigma2))), window)


def run_beta_min_sweep(xi_values: Sequence[float], eta_values: Sequence[float], n_firms: int,
                       k_values: Sequence[int] | None = None, seed: int = 0, replicas: int = 1,
                       window: int = DEFAULT_WINDOW, workers: int = 1, dtype=np.float64) -> BetaMinSweep:
    """Minimum of ``beta(K)`` over a ``V_xi x V_eta`` grid.

    ``k_values`` defaults to a quarter-octave grid up to ``2**10``; the
    minima sit at small ``K`` for ``V_xi`` up to about 8.
    """
    xs = [float(v) for v in xi_values]
    if len(set(xs)) < 3:
        raise ConfigurationError("need at least 3 distinct V_xi values")
    if k_values is None:
        k_values = k_grid(2**10, 4)
    cells, curves = [], []
    i = 0
    for vx in xs:
        for ve in eta_values:
            spec = ExperimentSpec(KDistribution.fixed(1), LognormalParams(0.0, vx), LognormalParams(0.0, float(ve)),
                                  n_firms, replicas, seed, window=window)
            res = _sigma_k_cell(spec, k_values, i, workers, dtype)
            i += 1
            b = beta_of_k(res, window)
            bm: BetaMinimum = extract_beta_min([(math.log(k), v) for k, v in b])
            cells.append(BetaMinCell(vx, float(ve), bm.beta_min, math.exp(bm.argmin), bm.boundary))
            curves.append(b)
    vx_arr = np.array([c.xi_V for c in cells])
    inv = np.array([1.0 / c.beta_min for c in cells])
    p, q = (float(v) for v in np.polyfit(vx_arr, inv, 1))
    spread = 0.0
    for vx in xs:
        vals = [c.beta_min for c in cells if c.xi_V == vx]
        spread = max(spread, max(vals) - min(vals))
    return BetaMinSweep(cells, p, q, spread, curves)


# ---------------------------------------------------------------------------
# Conditional distribution at fixed K
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PgskResult:
    """Size-binned growth statistics for firms of one fixed ``K``.

    ``modal`` is the most populated size bin and ``abnormal`` the bin just
    above it.
    """

    K: int
    n_firms: int
    binned: list[BinnedSigma]
    modal: BinnedSigma
    abnormal: BinnedSigma

    @property
    def ke_ratio(self) -> float:
        return self.modal.mean_Ke / self.abnormal.mean_Ke


def run_conditional_pgsk(xi_V: float = 6.0, eta_V: float = 1.0, m_xi: float = 0.0, m_eta: float = 0.0,
                         K: int = 2**15, n_firms: int = 400_000, seed: int = 0, min_firms: int = 100_000,
                         dtype=np.float32) -> PgskResult:
    """Growth dispersion and effective unit count per size bin at fixed ``K``.

    Defaults to single-precision unit draws (sums are accumulated in double)
    to keep the ``n_firms * K`` draws affordable.
    """
    if n_firms < min_firms:
        raise ConfigurationError(f"n_firms must be >= {min_firms}")
    xi = LognormalParams(m_xi, xi_V)
    eta = LognormalParams(m_eta, eta_V)
    S, G, X = prefix_growth([K], n_firms, xi, eta, seed, 0, dtype=dtype)
    obs = ObservationTable(S[:, 0], G[:, 0], np.full(n_firms, K), X[:, 0])
    binned = bin_sigma_by_size(obs, "S", min_count=2)
    if not binned:
        raise InsufficientDataError("no populated size bins")
    counts = np.array([b.count for b in binned])
    i = int(np.argmax(counts))
    if i + 1 >= len(binned) or binned[i + 1].bin_lo != binned[i].bin_hi:
        raise InsufficientDataError(
            f"bin above the modal bin holds fewer than 2 firms (modal bin count {counts[i]}, bin counts {counts.tolist()})"
        )
    return PgskResult(K, n_firms, binned, binned[i], binned[i + 1])


# ---------------------------------------------------------------------------
# V_xi sweep and reassignment
# ---------------------------------------------------------------------------


def run_vxi_sweep(kdists: dict[str, KDistribution], m_xi: float, xi_values: Sequence[float],
                  eta: LognormalParams, n_firms: int, seed: int = 0, replicas: int = 1,
                  min_count: int = DEFAULT_MIN_COUNT, window: int = DEFAULT_WINDOW,
                  workers: int = 1) -> dict[str, list[tuple[float, float]]]:
    """Global fitted beta against ``V_xi`` for each empirical ``P(K)``."""
    if not kdists:
        raise ConfigurationError("need at least one K table")
    out: dict[str, list[tuple[float, float]]] = {}
    for level, kd in kdists.items():
        rows = []
        for vx in xi_values:
            spec = ExperimentSpec(kd, LognormalParams(m_xi, float(vx)), eta, n_firms, replicas, seed,
                                  min_count, window)
            res = run_sigma_s(spec, workers)
            rows.append((float(vx), res.global_beta.exponent))
        out[level] = rows
    return out


def panel_beta(obs: ObservationTable, min_count: int = DEFAULT_MIN_COUNT) -> float:
    return fit_global_beta(bin_sigma_by_size(obs, "S", min_count)).exponent


def _product_owner(panel: Panel, codes: np.ndarray) -> np.ndarray:
    """Entity code of each product at its first appearance."""
    n = len(panel.product_labels)
    order = np.lexsort((panel.period, panel.product_code))
    pc = panel.product_code[order]
    first = np.ones(len(pc), dtype=bool)
    first[1:] = pc[1:] != pc[:-1]
    owner = np.empty(n, dtype=np.int64)
    owner[pc[first]] = codes[order][first]
    return owner


def reassign_units(panel: Panel, rng: np.random.Generator, permutation: np.ndarray | None = None) -> Panel:
    """Shuffle products across firms and markets, keeping each entity's product count.

    Product ``p`` takes over the firm (and, independently permuted, the
    market) slot of product ``perm[p]`` for its whole history.  An explicit
    ``permutation`` is used for both levels.
    """
    n = len(panel.product_labels)
    out = {}
    for name, labels, codes in (
        ("firm_id", panel.firm_labels, panel.firm_code),
        ("market_id", panel.market_labels, panel.market_code),
    ):
        perm = rng.permutation(n) if permutation is None else np.asarray(permutation)
        if sorted(perm.tolist()) != list(range(n)):
            raise ConfigurationError("permutation must be a permutation of the product indices")
        owner = _product_owner(panel, codes)
        new_owner = owner[perm]
        out[name] = labels[new_owner[panel.product_code]] if n else panel.firm_id
    return panel.replace_ids(market_id=out["market_id"], firm_id=out["firm_id"])


def _shuffled_observations(panel: Panel, level: str, rng: np.random.Generator) -> ObservationTable:
    """Observations with unit growth factors permuted across units within each period pair.

    Only units present in both periods of a pair take part; each keeps its
    base-period sales and its entity.
    """
    _, codes = panel.entity_codes(level)
    pers = panel.periods
    tables = []
    for t, t1 in zip(pers[:-1], pers[1:]):
        a = np.flatnonzero(panel.period == t)
        b = np.flatnonzero(panel.period == t1)
        _, ia, ib = np.intersect1d(panel.product_code[a], panel.product_code[b], return_indices=True)
        a, b = a[ia], b[ib]
        s0 = panel.sales[a]
        factors = panel.sales[b] / s0
        s1 = s0 * factors[rng.permutation(len(factors))]
        tables.append(group_growth(codes[a], s0, codes[a], s1))
    return ObservationTable.concat(tables)


def _synthetic_observations(panel: Panel, level: str, xi: LognormalParams, eta: LognormalParams,
                            rng: np.random.Generator) -> ObservationTable:
    ks = compute_observations(panel, level).unit_count
    total = int(ks.sum())
    sizes = xi.sample(total, rng)
    grown = sizes * eta.sample(total, rng)
    off = np.concatenate([[0], np.cumsum(ks)[:-1]])
    before = np.add.reduceat(sizes, off)
    after = np.add.reduceat(grown, off)
    return ObservationTable(before, np.log(after / before), ks, np.maximum.reduceat(sizes, off))


@dataclass(frozen=True, eq=False)
class ReassignmentResult:
    mode: ReassignmentMode
    beta: dict[str, float]
    observations: dict[str, ObservationTable]
    xi: LognormalParams | None = None
    eta: LognormalParams | None = None


def run_reassignment(panel: Panel, mode: ReassignmentMode | str, levels: Sequence[str] = ("firm",),
                     seed: SeedLike = 0, min_count: int = DEFAULT_MIN_COUNT,
                     permutation: np.ndarray | None = None, xi: LognormalParams | None = None,
                     eta: LognormalParams | None = None) -> ReassignmentResult:
    """Global beta at each level after one of the three reassignment surrogates.

    ``keep_eta`` moves products between firms and markets with their whole
    history; ``shuffle_eta`` does that and also permutes unit growth factors
    within every period pair; ``synthetic`` keeps each entity's unit count
    and replaces sizes and growth factors with lognormal draws whose
    parameters are estimated from the panel (or given as ``xi``/``eta``).
    """
    mode = ReassignmentMode(mode)
    if len(panel.periods) < 2:
        raise InsufficientDataError("reassignment needs a panel with at least two periods")
    for lv in levels:
        panel.entity_codes(lv)
    rng = make_rng(seed)
    obs: dict[str, ObservationTable] = {}
    if mode is ReassignmentMode.SYNTHETIC:
        xi = xi or estimate_lognormal_params(panel.sales)
        eta = eta or estimate_lognormal_params(unit_growth_factors(panel))
        for lv in levels:
            obs[lv] = _synthetic_observations(panel, lv, xi, eta, rng)
    else:
        moved = reassign_units(panel, rng, permutation)
        for lv in levels:
            if mode is ReassignmentMode.KEEP_ETA:
                obs[lv] = compute_observations(moved, lv)
            else:
                obs[lv] = _shuffled_observations(moved, lv, rng)
    beta = {lv: panel_beta(o, min_count) for lv, o in obs.items()}
    return ReassignmentResult(mode, beta, obs, xi, eta)


def observed_beta(panel: Panel, levels: Sequence[str] = ("firm",), min_count: int = DEFAULT_MIN_COUNT) -> dict[str, float]:
    """Global beta of the panel as observed, before any reassignment."""
    return {lv: panel_beta(compute_observations(panel, lv), min_count) for lv in levels}


# ---------------------------------------------------------------------------
# Urn laws and growth-rate tails
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UrnLawCheck:
    """Replicated urn runs: unit conservation, class-count z-score, tail exponent."""

    conserved: bool
    mean_classes: float
    expected_classes: float
    z_score: float
    tail_exponent: float | None
    expected_exponent: float | None


def run_urn_laws(initial_classes: int, initial_units: int, entry_prob: float, steps: int,
                 replicas: int = 1000, seed: int = 0, tail_steps: int = 0,
                 tail_fraction: float = 0.002) -> UrnLawCheck:
    """Check conservation and the mean class count over many urn runs.

    With ``tail_steps > 0`` an additional single long run (stream
    ``replicas``) feeds a Hill estimate of the class-size tail exponent.
    """
    cfg = UrnConfig(initial_classes, initial_units, entry_prob, steps)
    counts = np.empty(replicas)
    ok = True
    for r in range(replicas):
        ens = evolve_urn(cfg, seed, r)
        ok &= ens.total_units == initial_units + steps
        counts[r] = ens.n_classes
    expected = initial_classes + entry_prob * steps
    se = counts.std(ddof=1) / math.sqrt(replicas) if replicas > 1 else float("nan")
    z = (counts.mean() - expected) / se if se > 0 else (0.0 if counts.mean() == expected else float("inf"))
    tail = phi = None
    if tail_steps:
        big = evolve_urn(UrnConfig(1, 1, entry_prob, tail_steps), seed, replicas)
        tail = float(hill_tail_exponent(big.unit_counts, tail_fraction))
        phi = analytics.yule_exponent(entry_prob)
    return UrnLawCheck(bool(ok), float(counts.mean()), expected, float(z), tail, phi)


@dataclass(frozen=True)
class GrowthTailResult:
    hill_exponent: float
    threshold: float
    tail_fraction: float
    n: int


def run_growth_tails(kdist: KDistribution, xi: LognormalParams, eta: LognormalParams, n_firms: int,
                     seed: int = 0, threshold: float | None = None) -> GrowthTailResult:
    """Hill exponent of the ``|g - median|`` tail of the pooled growth-rate distribution.

    The tail starts at ``threshold``, by default the width ``sqrt(V / <K>)``
    of the Gaussian core for a firm of average unit count, so that the
    estimate covers the power-law wings rather than the core.
    """
    obs = simulate_growth(kdist, xi, eta, n_firms, seed)
    dev = np.abs(obs.growth - np.median(obs.growth))
    if threshold is None:
        threshold = math.sqrt(analytics.gaussian_approx(xi, eta).V / kdist.mean())
    frac = float(np.mean(dev > threshold))
    if not 0 < frac <= 0.5:
        raise InsufficientDataError(f"tail fraction {frac:.4f} above threshold {threshold:.4g} is outside (0, 0.5]")
    return GrowthTailResult(float(hill_tail_exponent(dev, frac)), float(threshold), frac, len(obs))


def mixture_tail_slope(kdist: KDistribution, xi: LognormalParams, eta: LognormalParams,
                       g_range: tuple[float, float]) -> float:
    """Log-log slope of the analytic mixture density over ``g_range`` (relative to its mean)."""
    approx = analytics.gaussian_approx(xi, eta)
    g = np.geomspace(g_range[0], g_range[1], 40)
    dens = analytics.mixture_growth_pdf(g + approx.m, kdist, approx)
    return fit_power_law(np.column_stack([g, dens])).exponent
