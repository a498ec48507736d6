"""Collapse of sigma^2(K) curves onto one master curve.

Each curve is for a fixed number of units ``K``; shifting ``ln K`` by a
function of the two lognormal variances lines them up.  Takes under a minute.
"""

# %% Curves on a small variance grid
from firmgrowth.experiments import k_grid, run_collapse

grid = [(vx, ve) for vx in (1.0, 2.0, 3.0, 4.0) for ve in (0.5, 1.0)]
run = run_collapse(grid, k_grid(2**14, 2), n_firms=10_000, seed=2)

# %% Fitted shifts
for (vx, ve), f in zip(run.collapse.params, run.collapse.shifts):
    print(f"V_xi={vx:3.1f} V_eta={ve:3.1f}  f = {f:6.3f}")
print(f"largest vertical spread after alignment: {run.collapse.spread:.3f}")
print(f"worst additive-model residual: {run.additive_residual:.3f}")

# %% The shift splits into a V_xi part and a V_eta part
print("f_xi :", {k: round(v, 3) for k, v in run.f_xi.items()})
print("f_eta:", {k: round(v, 3) for k, v in run.f_eta.items()})

# %% Local exponent along the master curve
z, beta = min(run.collapse.beta_of_z, key=lambda p: p[1])
print(f"beta(z) dips to {beta:.3f} at z = {z:.2f} before rising towards 1/2")
