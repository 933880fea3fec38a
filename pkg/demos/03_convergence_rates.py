"""
Convergence rates on a Zellner regression posterior
===================================================

The posterior mean is known in closed form, so the MSE of the weighted
estimator can be tracked exactly as the number of proposals grows.
"""

# %%
from pathlib import Path

from mpqmc.runner import ExperimentSpec, load_toml, run_experiment

configs = Path(__file__).resolve().parent.parent / "configs"

# %% [markdown]
# Same grid, two dimensions.  In 1-d the CUD-driven slope is far steeper
# than the pseudo-random one; in 5-d the gap mostly closes at this budget.

# %%
for d in (1, 5):
    spec = ExperimentSpec.from_dict(load_toml(configs / f"zellner_rates_d{d}.toml")["experiment"])
    res = run_experiment(spec)
    print(f"d={d}")
    for row in res.rows:
        if row[4] == "mse":
            print(f"  {row[3]:<7} N={row[2]:3d} n={row[1]:6d} mse={row[5]:.3e}")
    for row in res.rows:
        if row[4] == "rate_mse":
            print(f"  slope {row[3]:<7} {row[5]:.2f} +- {row[6]:.2f}")
