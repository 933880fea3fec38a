"""
Driving sequences: LFSR CUD points versus Van der Corput
=========================================================

A sampler here never calls a random number generator directly.  It reads
uniforms from a stream, so swapping the stream swaps pseudo-random for
quasi-random driving without touching anything else.
"""

# %%
import numpy as np

from mpqmc.discrepancy import nonoverlapping_tuples, overlapping_tuples, star_discrepancy
from mpqmc.driving import (POLYNOMIAL_FAMILIES, build_lfsr_cud, make_tuple_schedule,
                           pseudo_random_stream, van_der_corput)

# %% [markdown]
# One period of an m-bit register visits every non-zero level k / 2^m once.

# %%
u = build_lfsr_cud(10).values
print(u.size, u.min() * 1024, u.max() * 1024)
print(np.array_equal(np.sort(np.round(u * 1024)), np.arange(1, 1024)))

# %% [markdown]
# Van der Corput is uniform in 1-d but consecutive pairs never land in the
# lower-left quarter, so its pair discrepancy is stuck at 1/4.

# %%
vdc = van_der_corput().take(256)
pairs = overlapping_tuples(vdc, 2)
print("VdC pairs D* =", star_discrepancy(pairs))
print("LFSR pairs D* =", star_discrepancy(overlapping_tuples(np.append(u, u[:1]), 2)))
print("PRNG pairs D* =", star_discrepancy(overlapping_tuples(pseudo_random_stream(0).take(1024), 2)))

# %% [markdown]
# Non-overlapping pairs, as a sampler with d=2 would consume them, improve
# with the register size.

# %%
for m in (10, 12, 14):
    print(m, star_discrepancy(nonoverlapping_tuples(build_lfsr_cud(m).values, 2)))

# %% [markdown]
# The tuple schedule for width d prepends a near-zero tuple and then reads
# the sequence d times at shifted offsets; every tuple appears once.

# %%
sched = make_tuple_schedule(build_lfsr_cud(10, seed=3), 3)
T = sched.tuples()
print(T.shape, np.unique(T, axis=0).shape[0] == T.shape[0])
print(T[:3])

# %% [markdown]
# Replicates use different feedback polynomials of the same degree.

# %%
print([hex(p) for p in POLYNOMIAL_FAMILIES[10][:4]])
a = build_lfsr_cud(10, variant=0).values
b = build_lfsr_cud(10, variant=1).values
print(np.corrcoef(a, b)[0, 1])
