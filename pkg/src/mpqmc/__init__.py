"""Multiple-proposal MCMC driven by pseudo-random or CUD uniforms."""

from .diagnostics import (ReplicateSet, acceptance_rate, asymptotic_variance_batch_means,
                          empirical_variance, fit_rate, gold_standard_mean, msjd, mse,
                          squared_bias)
from .driving import (UniformStream, build_lfsr_cud, cud_capacity, make_driving,
                      make_tuple_schedule, pseudo_random_stream, van_der_corput)
from .errors import ConfigError, MPQMCError
from .finite_chain import stationary_weights, transition_matrix
from .proposals import build_kernel
from .samplers import (SamplerConfig, run_adaptive, run_is_mp_mcmc, run_mp_mcmc,
                       run_qmcmc_variant, run_sampler)
from .targets import build_target

__version__ = "0.1.0"
