"""Random objects of the proportional-growth model.

Firms are classes of units.  The number of units per firm comes from the
Simon urn (or a parametric stand-in for its output), and unit sizes follow
a multiplicative Gibrat process with lognormal factors.

All samplers take a ``seed`` that may be an integer, a ``SeedSequence`` or
an existing ``numpy.random.Generator``.  An integer seed together with a
``stream`` index fully determines every draw (see :func:`make_rng`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Iterator, Sequence

import numpy as np
from scipy import special

from .errors import ConfigurationError, InvalidRatesError
from .observations import ObservationTable

SeedLike = int | np.random.SeedSequence | np.random.Generator | None

# Largest block of units materialised at once by the chunked simulators.
CHUNK_UNITS = 4_000_000


def make_rng(seed: SeedLike = None, stream: int = 0) -> np.random.Generator:
    """Generator for ``(seed, stream)``.

    Different ``stream`` values under the same integer seed give independent
    generators (``SeedSequence`` spawn keys), which is what replicas use.
    """
    if isinstance(seed, np.random.Generator):
        if stream:
            raise ConfigurationError("stream index needs an integer seed, not a Generator")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (stream,))
        return np.random.default_rng(ss)
    if seed is not None and (not isinstance(seed, (int, np.integer)) or seed < 0):
        raise ConfigurationError(f"seed must be a nonnegative integer, got {seed!r}")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


# ---------------------------------------------------------------------------
# Simon urn
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UrnConfig:
    """Initial state and length of a Simon urn run.

    ``initial_counts`` optionally fixes how the ``initial_units`` are spread
    over the ``initial_classes``; by default they are spread as evenly as
    possible.
    """

    initial_classes: int = 1
    initial_units: int = 1
    entry_prob: float = 0.0
    steps: int = 0
    initial_counts: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.initial_classes < 1:
            raise ConfigurationError("initial_classes must be >= 1")
        if self.initial_units < self.initial_classes:
            raise ConfigurationError("initial_units must be >= initial_classes")
        if not 0.0 <= self.entry_prob <= 1.0:
            raise ConfigurationError("entry_prob must lie in [0, 1]")
        if self.steps < 0:
            raise ConfigurationError("steps must be >= 0")
        if self.initial_counts is not None:
            counts = tuple(int(c) for c in self.initial_counts)
            if len(counts) != self.initial_classes or min(counts) < 1:
                raise ConfigurationError("initial_counts needs one positive entry per initial class")
            if sum(counts) != self.initial_units:
                raise ConfigurationError("initial_counts must sum to initial_units")
            object.__setattr__(self, "initial_counts", counts)

    def start_counts(self) -> np.ndarray:
        if self.initial_counts is not None:
            return np.array(self.initial_counts, dtype=np.int64)
        q, r = divmod(self.initial_units, self.initial_classes)
        counts = np.full(self.initial_classes, q, dtype=np.int64)
        counts[:r] += 1
        return counts


@dataclass(frozen=True, eq=False)
class ClassEnsemble:
    """Number of units per class after an urn run (classes in creation order)."""

    unit_counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.unit_counts)

    @property
    def total_units(self) -> int:
        return int(self.unit_counts.sum())


def evolve_urn(config: UrnConfig, seed: SeedLike = None, stream: int = 0) -> ClassEnsemble:
    """Run the Simon urn for ``config.steps`` steps.

    Each step adds one unit.  With probability ``entry_prob`` it founds a new
    class, otherwise it copies the class of a uniformly drawn existing unit,
    which selects class ``a`` with probability ``K_a / (units so far)``.

    The copy chains are resolved by pointer jumping, so the run is fully
    vectorised.
    """
    rng = make_rng(seed, stream)
    start = config.start_counts()
    n0, T = config.initial_units, config.steps
    n = n0 + T
    idx = np.arange(n, dtype=np.int64)

    root = np.zeros(n, dtype=bool)
    root[:n0] = True
    parent = idx.copy()
    if T:
        root[n0:] = rng.random(T) < config.entry_prob
        # unit i may copy any of the i units that precede it
        parent[n0:] = rng.integers(0, idx[n0:])
        parent[root] = idx[root]
    while True:
        hop = parent[parent]
        if np.array_equal(hop, parent):
            break
        parent = hop

    root_label = np.empty(n, dtype=np.int64)
    root_label[:n0] = np.repeat(np.arange(config.initial_classes), start)
    n_new = int(root[n0:].sum())
    root_label[n0:][root[n0:]] = config.initial_classes + np.arange(n_new)
    labels = root_label[parent]
    counts = np.bincount(labels, minlength=config.initial_classes + n_new)
    return ClassEnsemble(counts)


@dataclass(frozen=True)
class GeneralizedRates:
    """Per-step unit birth, unit death and class entry probabilities."""

    birth_prob: float
    death_prob: float
    entry_prob: float

    def __post_init__(self):
        for name in ("birth_prob", "death_prob", "entry_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")

    @property
    def net_rate(self) -> float:
        return self.birth_prob - self.death_prob + self.entry_prob


def map_generalized_rates(rates: GeneralizedRates, t_prime: int) -> tuple[int, float]:
    """Equivalent ``(steps, entry_prob)`` of the basic urn after ``t_prime`` steps."""
    d = rates.net_rate
    if d <= 0:
        raise InvalidRatesError(f"birth - death + entry must be positive, got {d:g}")
    t = int(round(t_prime * d))
    b = rates.entry_prob / d
    return t, min(max(b, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Distributions of the number of units
# ---------------------------------------------------------------------------

K_FAMILIES = ("fixed", "exponential", "yule", "power_law", "empirical")
DEFAULT_K_MAX = 10_000_000


@lru_cache(maxsize=8)
def _power_law_cdf(exponent: float, k_max: int) -> np.ndarray:
    w = np.arange(1, k_max + 1, dtype=float) ** -exponent
    c = np.cumsum(w)
    return c / c[-1]


@dataclass(frozen=True, eq=False)
class KDistribution:
    """Distribution of the number of units ``K >= 1`` per firm.

    Build instances with the class methods: :meth:`fixed`,
    :meth:`exponential`, :meth:`yule`, :meth:`power_law`, :meth:`empirical`.

    ``exponential`` is the geometric law on ``{1, 2, ...}`` with the given mean.
    ``yule`` samples are taken from an actual urn run; its :meth:`pmf` is the
    closed Yule-Simon form and is meant for checking, not sampling.
    """

    family: str
    k: int | None = None
    mean_k: float | None = None
    entry_prob: float | None = None
    exponent: float | None = None
    k_max: int | None = None
    support: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        f = self.family
        if f not in K_FAMILIES:
            raise ConfigurationError(f"unknown K family {f!r}; expected one of {K_FAMILIES}")
        if f == "fixed" and (self.k is None or self.k < 1):
            raise ConfigurationError("fixed K must be >= 1")
        if f == "exponential" and (self.mean_k is None or not self.mean_k >= 1):
            raise ConfigurationError("exponential mean K0 must be >= 1")
        if f == "yule" and (self.entry_prob is None or not 0 < self.entry_prob < 1):
            raise ConfigurationError("yule entry probability must lie in (0, 1)")
        if f == "power_law":
            if self.exponent is None or not self.exponent > 1:
                raise ConfigurationError("power-law exponent must be > 1")
            if self.k_max is None or self.k_max < 1:
                raise ConfigurationError("power-law k_max must be >= 1")
        if f == "empirical":
            if self.support is None or len(self.support) == 0:
                raise ConfigurationError("empirical K table is empty")
            sup = np.asarray(self.support, dtype=np.int64)
            w = np.asarray(self.weights, dtype=float)
            if sup.shape != w.shape or sup.min() < 1 or w.min() < 0 or w.sum() <= 0:
                raise ConfigurationError("empirical K table needs K >= 1 and nonnegative weights")
            object.__setattr__(self, "support", sup)
            object.__setattr__(self, "weights", w / w.sum())

    # -- constructors -------------------------------------------------------

    @classmethod
    def fixed(cls, k: int) -> "KDistribution":
        return cls("fixed", k=int(k))

    @classmethod
    def exponential(cls, mean_k: float) -> "KDistribution":
        return cls("exponential", mean_k=float(mean_k))

    @classmethod
    def yule(cls, entry_prob: float) -> "KDistribution":
        return cls("yule", entry_prob=float(entry_prob))

    @classmethod
    def power_law(cls, exponent: float, k_max: int = DEFAULT_K_MAX) -> "KDistribution":
        return cls("power_law", exponent=float(exponent), k_max=int(k_max))

    @classmethod
    def empirical(cls, values: Sequence[int] | np.ndarray) -> "KDistribution":
        """Table built from observed unit counts (one entry per firm)."""
        values = np.asarray(values, dtype=np.int64)
        if values.size == 0:
            raise ConfigurationError("empirical K table is empty")
        sup, cnt = np.unique(values, return_counts=True)
        return cls("empirical", support=sup, weights=cnt.astype(float))

    @classmethod
    def from_table(cls, support, weights) -> "KDistribution":
        return cls("empirical", support=np.asarray(support), weights=np.asarray(weights, float))

    # -- sampling -----------------------------------------------------------

    def sample(self, n: int, seed: SeedLike = None, stream: int = 0) -> np.ndarray:
        rng = make_rng(seed, stream)
        n = int(n)
        f = self.family
        if f == "fixed":
            return np.full(n, self.k, dtype=np.int64)
        if f == "exponential":
            return rng.geometric(1.0 / self.mean_k, size=n).astype(np.int64)
        if f == "power_law":
            cdf = _power_law_cdf(self.exponent, self.k_max)
            return np.searchsorted(cdf, rng.random(n), side="right").astype(np.int64) + 1
        if f == "empirical":
            return rng.choice(self.support, size=n, p=self.weights)
        return self._sample_urn(n, rng)

    def _sample_urn(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n == 0:
            return np.empty(0, dtype=np.int64)
        b = self.entry_prob
        steps = int(math.ceil(1.1 * n / b)) + 10
        while True:
            ens = evolve_urn(UrnConfig(1, 1, b, steps), rng)
            if ens.n_classes >= n:
                break
            steps *= 2
        pick = rng.choice(ens.n_classes, size=n, replace=False)
        return ens.unit_counts[pick]

    # -- probabilities ------------------------------------------------------

    def pmf(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        out = np.zeros(k.shape)
        ok = k >= 1
        f = self.family
        if f == "fixed":
            out[k == self.k] = 1.0
        elif f == "exponential":
            p = 1.0 / self.mean_k
            out[ok] = p * (1.0 - p) ** (k[ok] - 1)
        elif f == "yule":
            rho = 1.0 / (1.0 - self.entry_prob)
            out[ok] = rho * np.exp(special.betaln(k[ok], rho + 1.0))
        elif f == "power_law":
            cdf = _power_law_cdf(self.exponent, self.k_max)
            ok &= k <= self.k_max
            out[ok] = k[ok].astype(float) ** -self.exponent * cdf[0]
        else:
            table = dict(zip(self.support.tolist(), self.weights.tolist()))
            out = np.array([table.get(int(x), 0.0) for x in k.ravel()]).reshape(k.shape)
        return out

    def quantile(self, q: float) -> int:
        """Smallest ``K`` with ``P(K' <= K) >= q``."""
        if not 0 < q < 1:
            raise ConfigurationError("quantile level must lie in (0, 1)")
        f = self.family
        if f == "fixed":
            return self.k
        if f == "exponential":
            p = 1.0 / self.mean_k
            if p >= 1:
                return 1
            return max(1, int(math.ceil(math.log1p(-q) / math.log1p(-p))))
        if f == "power_law":
            cdf = _power_law_cdf(self.exponent, self.k_max)
            return int(np.searchsorted(cdf, q)) + 1
        if f == "empirical":
            c = np.cumsum(self.weights)
            return int(self.support[min(np.searchsorted(c, q), len(c) - 1)])
        # yule survival: P(K > k) = k B(k, rho + 1)
        rho = 1.0 / (1.0 - self.entry_prob)
        target = math.log1p(-q)
        lo, hi = 1, 2
        while math.log(hi) + special.betaln(hi, rho + 1.0) > target:
            hi *= 2
        while lo < hi:
            mid = (lo + hi) // 2
            if math.log(mid) + special.betaln(mid, rho + 1.0) > target:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def mean(self) -> float:
        f = self.family
        if f == "fixed":
            return float(self.k)
        if f == "exponential":
            return float(self.mean_k)
        if f == "yule":
            return 1.0 / self.entry_prob
        if f == "power_law":
            k = np.arange(1, self.k_max + 1, dtype=float)
            return float((k * self.pmf(k.astype(np.int64))).sum())
        return float((self.support * self.weights).sum())

    def describe(self) -> dict[str, Any]:
        """JSON-friendly parameter echo."""
        d: dict[str, Any] = {"family": self.family}
        for name in ("k", "mean_k", "entry_prob", "exponent", "k_max"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        if self.family == "empirical":
            d["support"] = self.support.tolist()
            d["weights"] = self.weights.tolist()
        return d


def sample_k(dist: KDistribution, n: int, seed: SeedLike = None, stream: int = 0) -> np.ndarray:
    return dist.sample(n, seed, stream)


# ---------------------------------------------------------------------------
# Lognormal units
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LognormalParams:
    """Mean ``m`` and variance ``V`` of the logarithm of a lognormal variable."""

    m: float = 0.0
    V: float = 0.0

    def __post_init__(self):
        if not self.V >= 0:
            raise ConfigurationError(f"log-variance must be >= 0, got {self.V}")
        if not math.isfinite(self.m):
            raise ConfigurationError("log-mean must be finite")

    @property
    def sd(self) -> float:
        return math.sqrt(self.V)

    def sample(self, n, seed: SeedLike = None, stream: int = 0, dtype=np.float64) -> np.ndarray:
        rng = make_rng(seed, stream)
        z = rng.standard_normal(n, dtype=dtype)
        z *= self.sd
        z += self.m
        return np.exp(z, out=z)

    def describe(self) -> dict[str, float]:
        return {"m": self.m, "V": self.V}


def sample_lognormal(params: LognormalParams, n: int, seed: SeedLike = None, stream: int = 0) -> np.ndarray:
    return params.sample(n, seed, stream)


# ---------------------------------------------------------------------------
# Firms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FirmEnsemble:
    """Unit sizes of many firms, stored flat with per-firm unit counts."""

    sizes: np.ndarray
    counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.size and counts.min() < 1:
            raise ConfigurationError("every firm needs at least one unit")
        if counts.sum() != sizes.size:
            raise ConfigurationError("unit counts do not match the number of unit sizes")
        if sizes.size and not sizes.min() > 0:
            raise ConfigurationError("unit sizes must be positive")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_firms(cls, firms: Sequence[Sequence[float]], **metadata) -> "FirmEnsemble":
        counts = [len(f) for f in firms]
        sizes = np.concatenate([np.asarray(f, float) for f in firms]) if firms else np.empty(0)
        return cls(sizes, np.array(counts, dtype=np.int64), dict(metadata))

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def n_firms(self) -> int:
        return len(self.counts)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)[:-1]]).astype(np.int64)

    @property
    def firm_sizes(self) -> np.ndarray:
        if not self.n_firms:
            return np.empty(0)
        return np.add.reduceat(self.sizes, self.offsets)

    @property
    def largest_units(self) -> np.ndarray:
        if not self.n_firms:
            return np.empty(0)
        return np.maximum.reduceat(self.sizes, self.offsets)

    @property
    def firms(self) -> list[np.ndarray]:
        return np.split(self.sizes, np.cumsum(self.counts)[:-1])


def generate_firms(
    kdist: KDistribution,
    xi: LognormalParams,
    n_firms: int,
    seed: SeedLike = None,
    stream: int = 0,
) -> FirmEnsemble:
    """``n_firms`` firms with ``K ~ kdist`` units of lognormal size each."""
    rng = make_rng(seed, stream)
    counts = kdist.sample(n_firms, rng)
    sizes = xi.sample(int(counts.sum()), rng)
    meta = {"kdist": kdist.describe(), "xi": xi.describe(), "n_firms": int(n_firms)}
    if isinstance(seed, (int, np.integer)):
        meta.update(seed=int(seed), stream=stream)
    return FirmEnsemble(sizes, counts, meta)


def step_firms(
    ensemble: FirmEnsemble,
    eta: LognormalParams,
    seed: SeedLike = None,
    stream: int = 0,
) -> tuple[FirmEnsemble, ObservationTable]:
    """Multiply every unit by an independent lognormal factor.

    Returns the grown ensemble and one observation per firm (pre-step size,
    log growth, unit count, pre-step largest unit).
    """
    rng = make_rng(seed, stream)
    factors = eta.sample(ensemble.sizes.size, rng)
    grown = FirmEnsemble(ensemble.sizes * factors, ensemble.counts, dict(ensemble.metadata))
    before = ensemble.firm_sizes
    after = grown.firm_sizes
    obs = ObservationTable(before, np.log(after / before), ensemble.counts, ensemble.largest_units)
    return grown, obs


def simulate_growth(
    kdist: KDistribution,
    xi: LognormalParams,
    eta: LognormalParams,
    n_firms: int,
    seed: SeedLike = None,
    stream: int = 0,
    chunk_units: int = CHUNK_UNITS,
) -> ObservationTable:
    """One growth step for ``n_firms`` fresh firms without holding all units at once."""
    rng = make_rng(seed, stream)
    counts = kdist.sample(n_firms, rng)
    tables = []
    for lo, hi in _chunks(counts, chunk_units):
        ks = counts[lo:hi]
        total = int(ks.sum())
        sizes = xi.sample(total, rng)
        factors = eta.sample(total, rng)
        off = np.concatenate([[0], np.cumsum(ks)[:-1]])
        before = np.add.reduceat(sizes, off)
        biggest = np.maximum.reduceat(sizes, off)
        sizes *= factors
        after = np.add.reduceat(sizes, off)
        tables.append(ObservationTable(before, np.log(after / before), ks, biggest))
    return ObservationTable.concat(tables)


def _chunks(counts: np.ndarray, chunk_units: int) -> Iterator[tuple[int, int]]:
    """Consecutive firm index ranges holding at most ``chunk_units`` units (or one firm)."""
    csum = np.cumsum(counts)
    lo = 0
    n = len(counts)
    base = 0
    while lo < n:
        hi = int(np.searchsorted(csum, base + chunk_units, side="right"))
        hi = max(hi, lo + 1)
        yield lo, hi
        base = int(csum[hi - 1])
        lo = hi


def prefix_growth(
    k_values: Sequence[int],
    n_firms: int,
    xi: LognormalParams,
    eta: LognormalParams,
    seed: SeedLike = None,
    stream: int = 0,
    dtype=np.float64,
    chunk_units: int = CHUNK_UNITS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Growth of nested firms of fixed sizes ``k_values``.

    Each of ``n_firms`` firms gets ``max(k_values)`` units; the firm with
    ``K`` units is the first ``K`` of them.  Estimates for different ``K``
    therefore share random numbers, which smooths differences between
    neighbouring ``K``.

    Returns arrays of shape ``(n_firms, len(k_values))``: size before the
    step, log growth, and largest unit before the step.
    """
    ks = np.asarray(k_values, dtype=np.int64)
    if ks.size == 0 or ks.min() < 1:
        raise ConfigurationError("k_values must be nonempty and >= 1")
    if np.any(np.diff(ks) <= 0):
        raise ConfigurationError("k_values must be strictly increasing")
    rng = make_rng(seed, stream)
    k_max = int(ks[-1])
    starts = np.concatenate([[0], ks[:-1]])
    rows = max(1, chunk_units // k_max)
    S = np.empty((n_firms, ks.size))
    G = np.empty((n_firms, ks.size))
    X = np.empty((n_firms, ks.size))
    for r0 in range(0, n_firms, rows):
        m = min(rows, n_firms - r0)
        sizes = xi.sample((m, k_max), rng, dtype=dtype)
        grown = eta.sample((m, k_max), rng, dtype=dtype)
        grown *= sizes
        before = np.cumsum(np.add.reduceat(sizes, starts, axis=1, dtype=np.float64), axis=1)
        after = np.cumsum(np.add.reduceat(grown, starts, axis=1, dtype=np.float64), axis=1)
        big = np.maximum.accumulate(np.maximum.reduceat(sizes, starts, axis=1), axis=1)
        S[r0:r0 + m] = before
        G[r0:r0 + m] = np.log(after / before)
        X[r0:r0 + m] = big
    return S, G, X
