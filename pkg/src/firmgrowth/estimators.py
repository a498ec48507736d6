"""Statistics computed from growth observations.

Log-binned growth dispersion, effective exponents, the scaling collapse of
``sigma^2(K)`` curves, power-law and tail fits, and correlation measures.
Growth rates are natural-log growth ``g = ln(S_t / S_{t-1})`` throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .analytics import lognormal_moment, series_coefficients
from .core import FirmEnsemble, LognormalParams
from .errors import CollapseError, ConfigurationError, DataError, DomainError, InsufficientDataError
from .observations import as_table

DEFAULT_MIN_COUNT = 10
DEFAULT_WINDOW = 5


# ---------------------------------------------------------------------------
# Binned dispersion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinnedSigma:
    """Growth dispersion of the observations in one factor-2 bin ``[lo, hi)``.

    ``mean_log_x`` is the average of ``ln S`` (or ``ln K``) inside the bin,
    which tracks where the observations actually sit better than the bin
    centre when the bin is sparsely or unevenly filled.
    """

    bin_lo: float
    bin_hi: float
    center: float
    count: int
    sigma: float
    mean_g: float
    mean_Ke: float
    mean_log_x: float

    @property
    def stderr(self) -> float:
        """Large-sample standard error of ``sigma`` (Gaussian approximation)."""
        return self.sigma / math.sqrt(2.0 * (self.count - 1))


def _log2_floor(x: np.ndarray) -> np.ndarray:
    # frexp is exact at powers of two, unlike floor(log2(x))
    _, e = np.frexp(x)
    return e.astype(np.int64) - 1


def bin_sigma_by_size(obs, axis: str = "S", min_count: int = DEFAULT_MIN_COUNT) -> list[BinnedSigma]:
    """Standard deviation of ``g`` in base-2 logarithmic bins of size (or of ``K``).

    Bins with fewer than ``min_count`` observations are dropped.
    """
    if min_count < 2:
        raise ConfigurationError("min_count must be >= 2")
    if axis not in ("S", "K"):
        raise ConfigurationError("axis must be 'S' or 'K'")
    t = as_table(obs)
    if len(t) == 0:
        return []
    x = t.size if axis == "S" else t.unit_count.astype(float)
    if not np.all(x > 0):
        raise DataError("bin coordinate must be positive")
    e = _log2_floor(x)
    order = np.argsort(e, kind="stable")
    e_sorted = e[order]
    edges, starts = np.unique(e_sorted, return_index=True)
    stops = np.append(starts[1:], len(e_sorted))
    ke = t.effective_units
    out = []
    for k, a, b in zip(edges, starts, stops):
        n = b - a
        if n < min_count:
            continue
        idx = order[a:b]
        g = t.growth[idx]
        lo = math.ldexp(1.0, int(k))
        out.append(
            BinnedSigma(
                bin_lo=lo,
                bin_hi=2.0 * lo,
                center=lo * math.sqrt(2.0),
                count=int(n),
                # shifting by one member keeps a constant bin at exactly zero
                sigma=float(np.std(g - g[0], ddof=1)),
                mean_g=float(np.mean(g)),
                mean_Ke=float(np.mean(ke[idx])),
                mean_log_x=float(np.mean(np.log(x[idx]))),
            )
        )
    return out


def binned_columns(binned: Sequence[BinnedSigma]) -> dict[str, np.ndarray]:
    names = BinnedSigma.__dataclass_fields__
    return {n: np.array([getattr(b, n) for b in binned]) for n in names}


# ---------------------------------------------------------------------------
# Effective exponents
# ---------------------------------------------------------------------------


def local_slopes(x, y, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Least-squares slope of ``y`` against ``x`` in a sliding window.

    Edge points use the truncated window that fits, but never fewer than
    three points (so the two outermost points use 3 and 4 points for a
    window of 5).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window < 3 or window % 2 == 0:
        raise ConfigurationError("window must be an odd count >= 3")
    n = len(x)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 points for a slope, got {n}")
    h = window // 2
    out = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - h), min(n, i + h + 1)
        if hi - lo < 3:
            lo, hi = (0, 3) if lo == 0 else (n - 3, n)
        xs, ys = x[lo:hi], y[lo:hi]
        xc = xs - xs.mean()
        out[i] = np.dot(xc, ys - ys.mean()) / np.dot(xc, xc)
    return out


def effective_beta(binned, window: int = DEFAULT_WINDOW) -> list[tuple[float, float]]:
    """``beta = -d ln(sigma) / d ln(x)`` along a binned curve.

    ``binned`` is a list of :class:`BinnedSigma` or of ``(x, sigma)`` pairs.
    """
    if binned and isinstance(binned[0], BinnedSigma):
        x = np.array([b.center for b in binned])
        s = np.array([b.sigma for b in binned])
    else:
        pts = np.asarray(binned, dtype=float).reshape(-1, 2)
        x, s = pts[:, 0], pts[:, 1]
    if len(x) < 3:
        raise InsufficientDataError(f"need at least 3 bins, got {len(x)}")
    if np.any(s <= 0) or np.any(x <= 0):
        raise DataError("sigma and bin positions must be positive to take logs")
    beta = -local_slopes(np.log(x), np.log(s), window)
    return list(zip(x.tolist(), beta.tolist()))


@dataclass(frozen=True)
class BetaMinimum:
    beta_min: float
    argmin: float
    boundary: bool


def extract_beta_min(beta_curve: Sequence[tuple[float, float]]) -> BetaMinimum:
    """Minimum of an effective-exponent curve.

    The curve is smoothed with a 3-point moving average only to locate the
    minimum; the parabola through the raw values at that point and its two
    neighbours gives the returned vertex.  A minimum at either end of the
    curve is reported as-is with ``boundary=True``.
    """
    pts = np.asarray(beta_curve, dtype=float).reshape(-1, 2)
    if len(pts) < 5:
        raise InsufficientDataError("need at least 5 points to locate a minimum")
    x, b = pts[:, 0], pts[:, 1]
    smooth = b.copy()
    smooth[1:-1] = (b[:-2] + b[1:-1] + b[2:]) / 3.0
    i = int(np.argmin(smooth))
    if i == 0 or i == len(b) - 1:
        return BetaMinimum(float(b[i]), float(x[i]), True)
    xs, ys = x[i - 1:i + 2], b[i - 1:i + 2]
    c2, c1, c0 = np.polyfit(xs, ys, 2)
    if c2 <= 0:
        j = i - 1 + int(np.argmin(ys))
        return BetaMinimum(float(b[j]), float(x[j]), False)
    xv = float(np.clip(-c1 / (2.0 * c2), xs[0], xs[-1]))
    return BetaMinimum(float(np.polyval([c2, c1, c0], xv)), xv, False)


# ---------------------------------------------------------------------------
# Power laws and tails
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    """``y ~ exp(intercept) * x**exponent`` fitted by OLS in log-log space."""

    exponent: float
    intercept: float
    stderr: float
    r2: float
    n: int = 0


def fit_power_law(points) -> PowerLawFit:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise InsufficientDataError("need at least 3 points for a power-law fit")
    if np.any(pts <= 0):
        raise DomainError("power-law fit needs positive coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(ly) == 0:
        return PowerLawFit(0.0, float(ly[0]), 0.0, 0.0, len(pts))
    res = stats.linregress(lx, ly)
    return PowerLawFit(float(res.slope), float(res.intercept), float(res.stderr), float(res.rvalue**2), len(pts))


def fit_global_beta(binned: Sequence[BinnedSigma]) -> PowerLawFit:
    """OLS of ``ln sigma`` on the mean ``ln S`` of each bin, unweighted.

    The returned fit's ``exponent`` is ``beta`` (sign already flipped).
    """
    if len(binned) < 3:
        raise InsufficientDataError(f"need at least 3 bins for a global fit, got {len(binned)}")
    x = np.array([b.mean_log_x for b in binned])
    y = np.log([b.sigma for b in binned])
    res = stats.linregress(x, y)
    return PowerLawFit(-float(res.slope), float(res.intercept), float(res.stderr), float(res.rvalue**2), len(binned))


def hill_tail_exponent(samples, tail_fraction: float = 0.1, min_tail: int = 50) -> float:
    """Hill estimate of the density exponent ``alpha + 1`` of a Pareto-like tail.

    Uses the largest ``tail_fraction`` of the samples.  Light tails give large
    values (an exponential sample typically reads above 4), not an error.
    """
    if not 0 < tail_fraction <= 0.5:
        raise ConfigurationError("tail_fraction must lie in (0, 0.5]")
    x = np.sort(np.asarray(samples, dtype=float))[::-1]
    k = int(tail_fraction * len(x))
    if k < min_tail:
        raise InsufficientDataError(f"only {k} tail samples, need {min_tail}")
    u = x[k]
    if not u > 0:
        raise InsufficientDataError("tail threshold is not positive")
    total = np.log(x[:k] / u).sum()
    if total <= 0:
        raise InsufficientDataError("degenerate tail: all tail samples equal the threshold")
    return 1.0 + k / total


# ---------------------------------------------------------------------------
# Unit-level structure
# ---------------------------------------------------------------------------


def _firm_list(firms) -> list[np.ndarray]:
    if isinstance(firms, FirmEnsemble):
        return firms.firms
    return [np.asarray(f, dtype=float) for f in firms]


def _k_bins(ks: np.ndarray, values: np.ndarray) -> list[tuple[float, float]]:
    e = _log2_floor(ks.astype(float))
    out = []
    for k in np.unique(e):
        m = e == k
        out.append((float(ks[m].mean()), float(values[m].mean())))
    return out


def mean_unit_size_by_k(firms) -> list[tuple[float, float]]:
    """Average of the within-firm mean unit size, in base-2 bins of ``K``.

    The ``K`` coordinate of each bin is the mean unit count of its firms.
    """
    fl = _firm_list(firms)
    if not fl:
        raise InsufficientDataError("no firms")
    ks = np.array([len(f) for f in fl])
    means = np.array([f.mean() for f in fl])
    return _k_bins(ks, means)


def _firm_mean_correlation(series: np.ndarray, min_periods: int) -> float | None:
    m = np.asarray(series, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2:
        return None
    if not np.isnan(m).any():
        if m.shape[1] < min_periods:
            return None
        sd = m.std(axis=1)
        m = m[sd > 0]
        if m.shape[0] < 2:
            return None
        c = np.corrcoef(m)
        iu = np.triu_indices(m.shape[0], 1)
        return float(c[iu].mean())
    vals = []
    for i in range(m.shape[0]):
        for j in range(i + 1, m.shape[0]):
            ok = ~np.isnan(m[i]) & ~np.isnan(m[j])
            if ok.sum() < min_periods:
                continue
            a, b = m[i, ok], m[j, ok]
            if a.std() == 0 or b.std() == 0:
                continue
            vals.append(np.corrcoef(a, b)[0, 1])
    return float(np.mean(vals)) if vals else None


def mean_pairwise_correlation_by_k(
    firm_series: Iterable[np.ndarray], min_periods: int = 5
) -> list[tuple[float, float]]:
    """Mean Pearson correlation between unit growth series, averaged in base-2 ``K`` bins.

    ``firm_series`` holds one ``(units, periods)`` array of log growth rates
    per firm; NaN marks periods a unit is absent.  Pairs with fewer than
    ``min_periods`` common periods are skipped.
    """
    ks, rhos = [], []
    for s in firm_series:
        r = _firm_mean_correlation(s, min_periods)
        if r is not None:
            ks.append(np.asarray(s).shape[0])
            rhos.append(r)
    if not ks:
        raise InsufficientDataError("no firm has two units with enough common periods")
    return _k_bins(np.array(ks), np.array(rhos))


def autocorrelation(series, lag: int = 1) -> float:
    """Pearson correlation between the series and itself shifted by ``lag``."""
    x = np.asarray(series, dtype=float)
    if lag < 1:
        raise ConfigurationError("lag must be >= 1")
    if len(x) <= lag + 2:
        raise InsufficientDataError("series too short for this lag")
    a, b = x[:-lag], x[lag:]
    if a.std() == 0 or b.std() == 0:
        raise DataError("autocorrelation of a constant series is undefined")
    return float(np.corrcoef(a, b)[0, 1])


def ab_statistics(units, growths, xi: LognormalParams, eta: LognormalParams):
    """The ``A`` and ``B`` statistics of the large-``K`` expansion of ``g``.

    ``A = sum(xi_i (eta_i - mu_eta)) / (mu_eta mu_xi)`` and
    ``B = sum(xi_i - mu_xi) / mu_xi`` with ``mu`` the lognormal means.
    The last axis indexes units, so 2-D input gives one ``(A, B)`` per row.
    """
    u = np.asarray(units, dtype=float)
    g = np.asarray(growths, dtype=float)
    if u.shape != g.shape:
        raise DomainError("units and growth factors must have the same shape")
    if u.shape[-1] < 1:
        raise DomainError("need at least one unit")
    mu_xi = lognormal_moment(1, xi)
    mu_eta = lognormal_moment(1, eta)
    A = (u * (g - mu_eta)).sum(axis=-1) / (mu_eta * mu_xi)
    B = (u - mu_xi).sum(axis=-1) / mu_xi
    if A.ndim == 0:
        return float(A), float(B)
    return A, B


# ---------------------------------------------------------------------------
# Scaling collapse
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SigmaKCurve:
    """``sigma^2`` of growth rates for firms with exactly ``K`` units."""

    xi_V: float
    eta_V: float
    K: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        s2 = np.asarray(self.sigma2, dtype=float)
        if K.shape != s2.shape or K.ndim != 1:
            raise DataError("K and sigma2 must be 1-D arrays of equal length")
        if np.any(K <= 0) or np.any(s2 <= 0):
            raise DataError("need K > 0 and sigma2 > 0")
        o = np.argsort(K)
        object.__setattr__(self, "K", K[o])
        object.__setattr__(self, "sigma2", s2[o])

    def scaled(self) -> tuple[np.ndarray, np.ndarray]:
        """``(ln K, ln(sigma^2 K / C))``."""
        C = series_coefficients(LognormalParams(0.0, self.xi_V), LognormalParams(0.0, self.eta_V)).C
        return np.log(self.K), np.log(self.sigma2 * self.K / C)


@dataclass(frozen=True, eq=False)
class CollapseResult:
    """Curves on the common scaling variable ``z = ln K - f``.

    ``shifts[i]`` is ``f`` for input curve ``i`` (the reference curve has
    ``f = 0``).  ``master`` is the merged curve averaged on a regular ``z``
    grid and ``beta_of_z`` is ``(1 - dF/dz) / 2`` along it.  ``spread`` is the
    largest vertical spread between curves over the ``z`` range they all
    cover.  ``fit_p``/``fit_q`` fit ``1/beta_min = p V_xi + q`` over the
    per-curve minima when at least two distinct ``V_xi`` are present.
    """

    params: list[tuple[float, float]]
    curves: list[tuple[np.ndarray, np.ndarray]]
    shifts: np.ndarray
    rms: np.ndarray
    master: tuple[np.ndarray, np.ndarray]
    beta_of_z: list[tuple[float, float]]
    beta_min: float
    argmin_z: float
    spread: float
    curve_beta_min: list[BetaMinimum] = field(default_factory=list)
    fit_p: float | None = None
    fit_q: float | None = None


SHIFT_GRID = np.round(np.arange(-20.0, 20.0 + 1e-9, 0.01), 2)
MIN_OVERLAP = 3


def _best_shift(x, y, mx, my, grid=SHIFT_GRID) -> tuple[float, float]:
    z = x[None, :] - grid[:, None]
    inside = (z >= mx[0]) & (z <= mx[-1])
    ref = np.interp(z, mx, my)
    d2 = np.where(inside, (ref - y[None, :]) ** 2, 0.0)
    n = inside.sum(axis=1)
    cost = np.where(n >= MIN_OVERLAP, d2.sum(axis=1) / np.maximum(n, 1), np.inf)
    i = int(np.argmin(cost))
    if not np.isfinite(cost[i]):
        raise CollapseError("curve does not overlap the reference for any shift")
    return float(grid[i]), float(math.sqrt(cost[i]))


def _merge(mx, my, x, y):
    X = np.concatenate([mx, x])
    Y = np.concatenate([my, y])
    o = np.argsort(X, kind="stable")
    return X[o], Y[o]


def _master_curve(zs: list[np.ndarray], ys: list[np.ndarray], step: float):
    z = np.concatenate(zs)
    y = np.concatenate(ys)
    lo = math.floor(z.min() / step)
    idx = np.floor(z / step).astype(np.int64) - lo
    cnt = np.bincount(idx)
    tot = np.bincount(idx, weights=y)
    zc = np.bincount(idx, weights=z)
    keep = cnt > 0
    return zc[keep] / cnt[keep], tot[keep] / cnt[keep]


def collapse_spread(curves: Sequence[tuple[np.ndarray, np.ndarray]], n_grid: int = 400) -> float:
    """Largest vertical spread between curves over their common ``z`` range."""
    if len(curves) < 2:
        return 0.0
    lo = max(c[0][0] for c in curves)
    hi = min(c[0][-1] for c in curves)
    if hi <= lo:
        raise CollapseError("collapsed curves share no common z range")
    zg = np.linspace(lo, hi, n_grid)
    Y = np.array([np.interp(zg, z, y) for z, y in curves])
    return float((Y.max(axis=0) - Y.min(axis=0)).max())


def collapse_curves(curves: Sequence[SigmaKCurve], window: int = DEFAULT_WINDOW) -> CollapseResult:
    """Shift ``ln(sigma^2 K / C)`` curves horizontally onto one scaling curve.

    The reference is the curve spanning the widest ``ln K`` range (first such
    curve on ties) and gets ``f = 0``.  The remaining curves are aligned one
    at a time against everything aligned so far, choosing next the curve
    with the largest share of points inside the vertical range already
    covered.  Each shift is a grid search over ``f`` in ``[-20, 20]`` with
    step 0.01 minimising the mean squared vertical distance over the overlap
    (at least three points), with linear interpolation.
    """
    if not curves:
        raise CollapseError("no curves to collapse")
    scaled = [c.scaled() for c in curves]
    widths = [x[-1] - x[0] for x, _ in scaled]
    ref = int(np.argmax(widths))
    shifts = np.zeros(len(curves))
    rms = np.zeros(len(curves))
    mx, my = scaled[ref]
    remaining = [i for i in range(len(curves)) if i != ref]
    while remaining:
        lo, hi = my.min(), my.max()
        share = [np.mean((scaled[i][1] >= lo) & (scaled[i][1] <= hi)) for i in remaining]
        i = remaining.pop(int(np.argmax(share)))
        x, y = scaled[i]
        shifts[i], rms[i] = _best_shift(x, y, mx, my)
        mx, my = _merge(mx, my, x - shifts[i], y)

    collapsed = [(x - f, y) for (x, y), f in zip(scaled, shifts)]
    spacing = [np.median(np.diff(x)) for x, _ in scaled if len(x) > 1]
    step = float(np.median(spacing)) if spacing else 1.0
    mz, mF = _master_curve([c[0] for c in collapsed], [c[1] for c in collapsed], step)
    if len(mz) >= 3:
        beta_z = (1.0 - local_slopes(mz, mF, window)) / 2.0
        beta_curve = list(zip(mz.tolist(), beta_z.tolist()))
    else:
        beta_curve = []
    if len(beta_curve) >= 5:
        bm = extract_beta_min(beta_curve)
        beta_min, argmin_z = bm.beta_min, bm.argmin
    else:
        beta_min, argmin_z = float("nan"), float("nan")

    per_curve = []
    for c in curves:
        if len(c.K) >= 5:
            b = effective_beta(list(zip(c.K, np.sqrt(c.sigma2))), window)
            per_curve.append(extract_beta_min([(math.log(k), v) for k, v in b]))
    fit_p = fit_q = None
    vx = np.array([c.xi_V for c in curves])
    if len(per_curve) == len(curves) and len(np.unique(vx)) >= 2:
        inv = np.array([1.0 / m.beta_min for m in per_curve])
        fit_p, fit_q = (float(v) for v in np.polyfit(vx, inv, 1))

    return CollapseResult(
        params=[(c.xi_V, c.eta_V) for c in curves],
        curves=collapsed,
        shifts=shifts,
        rms=rms,
        master=(mz, mF),
        beta_of_z=beta_curve,
        beta_min=beta_min,
        argmin_z=argmin_z,
        spread=collapse_spread(collapsed),
        curve_beta_min=per_curve,
        fit_p=fit_p,
        fit_q=fit_q,
    )


def additive_shift_fit(params: Sequence[tuple[float, float]], shifts) -> tuple[dict, dict, float]:
    """Least-squares ``f(V_xi, V_eta) ~ f_xi(V_xi) + f_eta(V_eta)``.

    Returns the two component tables (``f_eta`` pinned to 0 at the first
    ``V_eta`` level) and the largest absolute residual.
    """
    params = [tuple(map(float, p)) for p in params]
    f = np.asarray(shifts, dtype=float)
    xs = sorted({p[0] for p in params})
    es = sorted({p[1] for p in params})
    M = np.zeros((len(params), len(xs) + len(es) - 1))
    for r, (a, b) in enumerate(params):
        M[r, xs.index(a)] = 1.0
        j = es.index(b)
        if j:
            M[r, len(xs) + j - 1] = 1.0
    coef, *_ = np.linalg.lstsq(M, f, rcond=None)
    resid = f - M @ coef
    f_xi = dict(zip(xs, coef[: len(xs)].tolist()))
    f_eta = dict(zip(es, [0.0] + coef[len(xs):].tolist()))
    return f_xi, f_eta, float(np.abs(resid).max())

