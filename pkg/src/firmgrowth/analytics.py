"""Closed-form quantities of the proportional-growth model.

Everything here is a pure function of lognormal parameters (and, for the
growth-rate mixture, of a :class:`~firmgrowth.core.KDistribution`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import KDistribution, LognormalParams
from .errors import ConfigurationError, DomainError

# Empirical fit of the minimum effective exponent, beta_min = 1 / (P * V_xi + Q),
# read off large Monte-Carlo sweeps of sigma(K).  Re-estimated by
# experiments.run_beta_min_sweep.
BETA_MIN_P = 0.54
BETA_MIN_Q = 2.66

# Upper limit of the crossover-feasibility condition for power-law P(K).
POWER_LAW_PHI_LIMIT = 17.0 / 8.0


def lognormal_moment(n: int, params: LognormalParams) -> float:
    """``<x**n>`` for a lognormal ``x``: ``exp(n m + n**2 V / 2)``."""
    return math.exp(n * params.m + n * n * params.V / 2.0)


@dataclass(frozen=True)
class GibratApprox:
    """Gaussian limit of ``P(g|K)``: mean ``m`` and variance ``V / K``."""

    m: float
    V: float

    def __post_init__(self):
        if not self.V >= 0:
            raise ConfigurationError("variance scale V must be >= 0")
        if not math.isfinite(self.m):
            raise ConfigurationError("mean growth must be finite")


def gaussian_approx(xi: LognormalParams, eta: LognormalParams) -> GibratApprox:
    m = eta.m + eta.V / 2.0
    V = math.exp(xi.V) * math.expm1(eta.V)
    return GibratApprox(m, V)


def sigma_small_s(eta: LognormalParams) -> float:
    """Growth-rate dispersion of single-unit firms."""
    return math.sqrt(eta.V)


def sigma_large_s(S, xi: LognormalParams, eta: LognormalParams):
    """Central-limit asymptote ``sqrt(V / K_S)`` with ``K_S = S / mu_xi``."""
    S_arr = np.asarray(S, dtype=float)
    if np.any(~(S_arr > 0)):
        raise DomainError("firm size must be positive")
    amp = math.exp(0.75 * xi.V + 0.5 * xi.m) * math.sqrt(math.expm1(eta.V))
    out = amp / np.sqrt(S_arr)
    return float(out) if np.ndim(S) == 0 else out


@dataclass(frozen=True)
class CrossoverPrediction:
    """Sizes bounding the crossover from ``beta = 0`` to ``beta = 1/2``.

    ``S_star_small_eta`` is the approximation ``exp(3 V_xi / 2 + m_xi)``,
    accurate when ``V_eta`` is small.  ``feasible`` is the exponential-tail
    condition and is only filled in when a mean unit count is supplied.
    """

    mu_xi: float
    S1: float
    S_star: float
    K_star: float
    S_star_small_eta: float
    feasible: bool | None = None


def crossover_size(
    xi: LognormalParams, eta: LognormalParams, mean_k: float | None = None
) -> CrossoverPrediction:
    if not eta.V > 0:
        raise DomainError("crossover size is undefined for V_eta = 0")
    mu_xi = math.exp(xi.m + xi.V / 2.0)
    base = math.exp(1.5 * xi.V + xi.m)
    s_star = base * math.expm1(eta.V) / eta.V
    feasible = None if mean_k is None else crossover_feasible_exponential(xi.V, mean_k)
    return CrossoverPrediction(
        mu_xi=mu_xi,
        S1=mu_xi,
        S_star=s_star,
        K_star=math.exp(xi.V),
        S_star_small_eta=base,
        feasible=feasible,
    )


def crossover_feasible_exponential(xi_V: float, K0: float) -> bool:
    """Whether an exponential ``P(K)`` with mean ``K0`` reaches the ``beta = 1/2`` regime."""
    if not K0 > 0:
        raise DomainError("K0 must be positive")
    return xi_V > 8.0 * math.exp(xi_V) / (9.0 * K0)


def crossover_feasible_powerlaw(phi: float) -> bool:
    if not phi > 1:
        raise DomainError("power-law exponent must exceed 1")
    return phi < POWER_LAW_PHI_LIMIT


def yule_exponent(b: float) -> float:
    if not 0.0 <= b < 1.0:
        raise DomainError("entry probability must lie in [0, 1)")
    return 2.0 + b / (1.0 - b)


@dataclass(frozen=True)
class SeriesCoefficients:
    """Coefficients of the large-``K`` expansions of mean and variance of ``g``.

    ``b_series`` is ``exp(V_eta)``; it is unrelated to the urn entry
    probability.
    """

    a: float
    b_series: float
    C: float
    m0: float
    m1: float
    V1: float
    V2: float


def series_coefficients(xi: LognormalParams, eta: LognormalParams) -> SeriesCoefficients:
    a = math.exp(xi.V)
    b = math.exp(eta.V)
    C = a * (b - 1.0)
    V2 = C * (a * (5.0 * b + 1.0) / 2.0 - 1.0 - a * a * b * (b + 1.0))
    return SeriesCoefficients(
        a=a, b_series=b, C=C, m0=eta.m + eta.V / 2.0, m1=-C / 2.0, V1=C, V2=V2
    )


def truncated_series_sigma2(K, coeffs: SeriesCoefficients, order: int = 2):
    """``V1/K`` (order 1) or ``V1/K + V2/K**2`` (order 2).

    The full series has zero radius of convergence; the truncation is only
    meaningful as ``K`` grows.
    """
    if order not in (1, 2):
        raise ConfigurationError("series order must be 1 or 2")
    K_arr = np.asarray(K, dtype=float)
    if np.any(K_arr < 1):
        raise DomainError("K must be >= 1")
    out = coeffs.V1 / K_arr
    if order == 2:
        out = out + coeffs.V2 / K_arr**2
    return float(out) if np.ndim(K) == 0 else out


def laplace_center_pdf(g, V: float):
    """Laplace shape of the growth-rate density near its centre."""
    if not V > 0:
        raise DomainError("V must be positive")
    g = np.asarray(g, dtype=float)
    out = np.exp(-math.sqrt(2.0) * np.abs(g) / math.sqrt(V)) / math.sqrt(2.0 * V)
    return float(out) if out.ndim == 0 else out


def gaussian_conditional_pdf(g, K, approx: GibratApprox):
    """Gaussian approximation of ``P(g|K)``."""
    if not approx.V > 0:
        raise DomainError("V must be positive")
    K = np.asarray(K, dtype=float)
    if np.any(K < 1):
        raise DomainError("K must be >= 1")
    g = np.asarray(g, dtype=float)
    out = np.sqrt(K / (2.0 * math.pi * approx.V)) * np.exp(-((g - approx.m) ** 2) * K / (2.0 * approx.V))
    return float(out) if out.ndim == 0 else out


def mixture_growth_pdf(
    g,
    kdist: KDistribution,
    approx: GibratApprox,
    K_max_eval: int | None = None,
    tail_mass: float = 1e-6,
):
    """``sum_K P(K) P(g|K)`` truncated at ``K_max_eval`` and renormalised.

    ``K_max_eval`` defaults to the ``1 - tail_mass`` quantile of ``kdist``.
    """
    if K_max_eval is None:
        K_max_eval = kdist.quantile(1.0 - tail_mass)
    if K_max_eval < 1:
        raise ConfigurationError("K_max_eval must be >= 1")
    ks = np.arange(1, int(K_max_eval) + 1)
    w = kdist.pmf(ks)
    keep = w > 0
    ks, w = ks[keep], w[keep]
    if w.sum() <= 0:
        raise ConfigurationError("K distribution has no mass below K_max_eval")
    w = w / w.sum()
    g_arr = np.asarray(g, dtype=float)
    flat = g_arr.ravel()
    out = np.empty(flat.size)
    block = max(1, 4_000_000 // ks.size)
    for i in range(0, flat.size, block):
        dens = gaussian_conditional_pdf(flat[i:i + block, None], ks[None, :], approx)
        out[i:i + block] = np.atleast_2d(dens) @ w
    out = out.reshape(g_arr.shape)
    return float(out) if out.ndim == 0 else out


def beta_min_empirical_fit(xi_V: float, p: float = BETA_MIN_P, q: float = BETA_MIN_Q) -> float:
    """Minimum of the effective exponent ``beta(K)`` as a function of ``V_xi``."""
    if xi_V < 0:
        raise DomainError("V_xi must be >= 0")
    return 1.0 / (p * xi_V + q)
