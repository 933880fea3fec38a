"""
Multiple proposals on a 1-d Gaussian
====================================

N proposals per iteration, then an index chain over the N+1 candidates.
More proposals means more moves per iteration; importance weights keep
every candidate instead of picking one.
"""

# %%
import numpy as np

from mpqmc import (SamplerConfig, acceptance_rate, make_driving, msjd, pseudo_random_stream,
                   run_sampler)
from mpqmc.driving import period_register
from mpqmc.finite_chain import CONSTRUCTIONS, stationary_weights, transition_matrix, weighted_rejection
from mpqmc.proposals import IndependentGaussian, uniforms_per_iteration
from mpqmc.targets import gaussian_target

target = gaussian_target([0.0], [[1.0]])
kernel = IndependentGaussian([0.0], [[2.4**2]])

# %% [markdown]
# Acceptance and jump size grow with N.

# %%
for N in (1, 4, 16, 64):
    run = run_sampler(SamplerConfig(N=N, L=4000), target, kernel, pseudo_random_stream(1), [0.0])
    print(f"N={N:3d}  acceptance={acceptance_rate(run):.3f}  msjd={msjd(run):.3f}")

# %% [markdown]
# The four index-chain constructions share the same stationary weights but
# differ in how often they stay put.

# %%
w = stationary_weights(np.log([0.1, 0.5, 0.2, 0.15, 0.05]))
for name in CONSTRUCTIONS:
    A = transition_matrix(name, np.log(w)).A
    print(f"{name:<11} rejection={weighted_rejection(A, w):.4f}")

# %% [markdown]
# Importance sampling with pseudo-random and CUD driving, 10 replicates
# each at 256 proposals per iteration.

# %%
N, L = 256, 255
cfg = SamplerConfig(N=N, L=L, mode="importance")
width = uniforms_per_iteration(kernel, N, 1)
m = period_register(width, L)
psr = [run_sampler(cfg, target, kernel, pseudo_random_stream(r), [0.0]).estimate.mu[0]
       for r in range(10)]
qmc = [run_sampler(cfg, target, kernel, make_driving("cud_lfsr", r, m=m, width=width, variant=r),
                   [0.0]).estimate.mu[0] for r in range(10)]
print("PSR MSE", np.mean(np.square(psr)))
print("CUD MSE", np.mean(np.square(qmc)))
