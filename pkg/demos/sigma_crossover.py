"""Size dependence of growth volatility in a firm made of lognormal units.

Run with ``python3 demos/sigma_crossover.py``.  A figure is written next to
the script when matplotlib is installed.
"""

# %% Setup
import math
from pathlib import Path

from firmgrowth import analytics
from firmgrowth.core import KDistribution, LognormalParams
from firmgrowth.experiments import ExperimentSpec, run_sigma_s

xi = LognormalParams(3.44, 5.13)  # unit sizes: broad, as in product-level sales
eta = LognormalParams(0.016, 0.36)  # one-period unit growth factors
kdist = KDistribution.exponential(10)

# %% Where the analytic asymptotes meet
cross = analytics.crossover_size(xi, eta)
print(f"small-firm plateau sigma = {analytics.sigma_small_s(eta):.3f}")
print(f"crossover starts near S1 = {cross.S1:.4g} and ends near S* = {cross.S_star:.4g}")
print("exponential P(K) reaches S*:", analytics.crossover_feasible_exponential(xi.V, 10))

# %% Monte Carlo sigma(S)
res = run_sigma_s(ExperimentSpec(kdist, xi, eta, n_firms=200_000, seed=0))
print(f"{'S':>12} {'n':>7} {'sigma':>7} {'K_e':>6}")
for b in res.binned:
    print(f"{b.center:12.4g} {b.count:7d} {b.sigma:7.3f} {b.mean_Ke:6.2f}")
print(f"largest local beta {res.beta_max:.3f} at S = {res.beta_max_at:.4g}")
print(f"global fitted beta {res.global_beta.exponent:.3f}")

# %% Effective unit count peaks after beta does
ke_at, ke = max(res.ke_profile, key=lambda p: p[1])
print(f"K_e peaks at {ke:.2f} near S = {ke_at:.4g}")

# %% Figure
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    S = [b.center for b in res.binned]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.loglog(S, [b.sigma for b in res.binned], "o", label="simulated")
    ax1.axhline(math.sqrt(eta.V), ls="--", c="k", label="single unit")
    ax1.loglog(S, res.overlays["sigma_large"], ":", c="k", label="many units")
    ax1.set(xlabel="S", ylabel="sigma", ylim=(0.05, 2))
    ax1.legend()
    ax2.semilogx(*zip(*res.beta), "s-")
    ax2.set(xlabel="S", ylabel="local beta")
    out = Path(__file__).with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print("figure written to", out)
