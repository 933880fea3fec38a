"""Multiple-proposal samplers driven by an explicit stream of uniforms.

One engine covers every variant:

=================  ==========  ==============  =================
variant            mode        adapt           driving
=================  ==========  ==============  =================
MP-MCMC            sampling    off             pseudo-random
adaptive MP-MCMC   sampling    cov / mean+cov  pseudo-random
IS-MP-MCMC         importance  off             pseudo-random
adaptive IS        importance  cov / mean+cov  pseudo-random
MP-QMCMC           sampling    off             CUD
IS-MP-QMCMC        importance  off             CUD
adaptive IS-QMC    importance  cov / mean+cov  CUD
=================  ==========  ==============  =================

Per iteration the sampler takes one block of uniforms from the stream: the
proposal uniforms first (``d`` for the auxiliary state when present, then
``N*d`` for the proposals), followed by ``M`` uniforms for the index draws in
sampling mode or a single one in importance mode.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from .driving import UniformStream, pseudo_random_stream
from .errors import (AllZeroMass, ConfigError, MetricNotSPD, ResampleBudgetExceeded,
                     SequenceExhausted, WrongMode)
from .finite_chain import (CONSTRUCTIONS, peskun_row, sample_index, stationary_weights,
                           transition_matrix)
from .proposals import (AuxiliaryState, GaussianKernel, ProposalSet, draw_proposals,
                        score_proposals, uniforms_per_iteration)
from .targets import Target

MODES = ("sampling", "importance")
ADAPT = ("off", "cov", "mean_and_cov")
RESAMPLE_BUDGET = 100
ZERO_MASS_RETRIES = 3


@dataclass
class SamplerConfig:
    N: int
    L: int
    M: int = 1
    mode: str = "sampling"
    transition: str = "barker"
    adapt: str = "off"
    burn_in: int = 0
    bounded_jump: float | None = None
    freeze_box: tuple | None = None
    seed: int = 0
    workers: int = 1
    record_proposals: bool = False
    eig_bounds: tuple = (1e-6, 1e6)

    def validate(self) -> "SamplerConfig":
        if self.N < 1 or self.M < 1 or self.L < 1 or self.burn_in < 0:
            raise ConfigError("need N >= 1, M >= 1, L >= 1 and burn_in >= 0")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.transition not in CONSTRUCTIONS:
            raise ConfigError(f"transition must be one of {CONSTRUCTIONS}")
        if self.adapt not in ADAPT:
            raise ConfigError(f"adapt must be one of {ADAPT}")
        if self.bounded_jump is not None and not self.bounded_jump > 0:
            raise ConfigError("bounded_jump must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    @property
    def index_draws(self) -> int:
        return self.M if self.mode == "sampling" else 1

    def as_dict(self) -> dict:
        out = asdict(self)
        if self.freeze_box is not None:
            out["freeze_box"] = [np.asarray(b).tolist() for b in self.freeze_box]
        out.pop("workers")  # results do not depend on it
        return out


@dataclass
class WeightedEstimate:
    """Running mean (and covariance) updated by the 1/ell recursion.

    With ``ell = 0`` initially, after k updates ``mu`` is the plain average of
    the k per-iteration weighted sums.  Starting from a guess with
    ``ell = 1`` counts the guess as one extra term.
    """

    mu: np.ndarray
    Sigma: np.ndarray | None = None
    ell: int = 0

    def update_mean(self, mu_tilde: np.ndarray) -> None:
        self.ell += 1
        self.mu = self.mu + (mu_tilde - self.mu) / self.ell

    def update_cov(self, Sigma_tilde: np.ndarray) -> None:
        S = self.Sigma + (Sigma_tilde - self.Sigma) / self.ell
        self.Sigma = 0.5 * (S + S.T)


@dataclass
class RunOutput:
    samples: np.ndarray
    fresh: np.ndarray
    estimate: WeightedEstimate | None
    weighted_sums: np.ndarray | None
    diagnostics: dict
    meta: dict
    proposals: list = field(default_factory=list)
    final_state: np.ndarray | None = None

    @property
    def mode(self) -> str:
        return self.meta["config"]["mode"]


def regularize_covariance(S: np.ndarray, bounds=(1e-6, 1e6)) -> np.ndarray:
    """S + 1e-8 tr(S)/d I with eigenvalues clamped into ``bounds``."""
    d = S.shape[0]
    S = 0.5 * (S + S.T) + 1e-8 * np.trace(S) / d * np.eye(d)
    vals, vecs = np.linalg.eigh(S)
    clipped = np.clip(vals, *bounds)
    if np.array_equal(clipped, vals):
        return S
    S = (vecs * clipped) @ vecs.T
    return 0.5 * (S + S.T)


def _identity(points: np.ndarray) -> np.ndarray:
    return points


EVAL_CHUNK = 64


@contextmanager
def _evaluator(target: Target, workers: int):
    """Batch log-density in fixed chunks of ``EVAL_CHUNK`` rows, optionally
    fanned out over a thread pool.

    The chunking depends only on the batch size and results are concatenated
    in index order, so the output is bit-identical for any number of workers.
    """
    def pieces(Y):
        return np.array_split(Y, -(-len(Y) // EVAL_CHUNK)) if len(Y) > EVAL_CHUNK else [Y]

    if workers <= 1:
        def evaluate(Y):
            parts = pieces(Y)
            if len(parts) == 1:
                return target.log_density_batch(Y)
            return np.concatenate([target.log_density_batch(p) for p in parts])
        yield evaluate
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        def evaluate(Y):
            return np.concatenate(list(pool.map(target.log_density_batch, pieces(Y))))
        yield evaluate


class _Prefetch:
    """Reads a stream in large chunks without ever reading past what the
    remaining nominal iterations need, so the stream cursor stays exact."""

    CHUNK = 1 << 18

    def __init__(self, stream: UniformStream, per_iter: int, n_iter: int):
        self.stream = stream
        self.per_iter = per_iter
        self.left = n_iter
        self.buf = np.empty(0)
        self.pos = 0

    def take(self, n: int, nominal: bool = True) -> np.ndarray:
        if self.pos + n > self.buf.size:
            want = max(n, min(self.left * self.per_iter, max(self.CHUNK, self.per_iter)))
            self.buf = np.concatenate([self.buf[self.pos :], self.stream.take(want - (self.buf.size - self.pos))])
            self.pos = 0
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        if nominal:
            self.left -= 1
        return out


def _outside(x: np.ndarray, box) -> bool:
    lo, hi = box
    return bool(np.any(x < np.asarray(lo)) or np.any(x > np.asarray(hi)))


def apply_safeguards(kernel: GaussianKernel, carried: np.ndarray, Y: np.ndarray,
                     z: np.ndarray | None, bounded_jump: float | None,
                     spare: UniformStream | None) -> np.ndarray:
    """Redraw proposals farther than ``bounded_jump`` from the carried sample.

    Redraws come from the same proposal law (from ``z`` for auxiliary
    kernels) using ``spare`` uniforms, so the main stream's consumption is
    unchanged.
    """
    if bounded_jump is None or not np.isfinite(bounded_jump):
        return Y
    Y = np.array(Y)
    law = kernel.second if isinstance(kernel, AuxiliaryState) else kernel
    origin = carried if z is None else z
    for k in range(len(Y)):
        tries = 0
        while np.linalg.norm(Y[k] - carried) > bounded_jump:
            if tries == RESAMPLE_BUDGET:
                raise ResampleBudgetExceeded(
                    f"no proposal within {bounded_jump} after {RESAMPLE_BUDGET} redraws")
            Y[k] = law.sample(origin, spare.take(law.dim))[0]
            tries += 1
    return Y


def select_kernel(kernel: GaussianKernel, fallback: GaussianKernel, carried, box) -> GaussianKernel:
    """The fixed fallback kernel is used whenever the carried sample leaves the box."""
    if box is not None and _outside(carried, box):
        return fallback
    return kernel


@dataclass
class IterationResult:
    proposal_set: ProposalSet
    weights: np.ndarray
    indices: list


def select_indices(ps: ProposalSet, u_idx: np.ndarray, config: SamplerConfig):
    """Stationary weights and the drawn indices (one per trailing uniform)."""
    w = stationary_weights(ps)
    if config.mode == "importance":
        return w, [sample_index(w, u_idx[0])]
    if config.transition == "barker":
        row = lambda i: w
    elif config.transition == "peskun":
        # only the visited rows are needed
        lm = ps.log_mass
        row = lambda i: peskun_row(lm, i)
    else:
        A = transition_matrix(config.transition, w).A
        row = lambda i: A[i]
    I = ps.i0
    picked = []
    for m in range(config.M):
        I = sample_index(row(I), u_idx[m])
        picked.append(I)
    return w, picked


def mp_iteration(kernel: GaussianKernel, evaluate, carried: np.ndarray, log_pi_carried: float,
                 u: np.ndarray, config: SamplerConfig,
                 spare: UniformStream | None = None) -> IterationResult:
    """One iteration: proposals from the leading uniforms, then index draws
    from the trailing ``config.index_draws`` uniforms."""
    n_draw = u.size - config.index_draws
    Y, z = draw_proposals(kernel, carried, u[:n_draw])
    Y = apply_safeguards(kernel, carried, Y, z, config.bounded_jump, spare)
    ps = score_proposals(kernel, evaluate, Y, carried, log_pi_carried, z)
    w, picked = select_indices(ps, u[n_draw:], config)
    return IterationResult(ps, w, picked)


class _IndependentBatches:
    """Proposals of an independent kernel do not depend on the carried state,
    so they and their densities are computed for many iterations at once.
    Consumption of the stream is identical to the per-iteration path."""

    ROWS = 1 << 14

    def __init__(self, kernel, evaluate, feed, config, n_u, n_iter):
        self.kernel, self.evaluate, self.feed = kernel, evaluate, feed
        self.N, self.n_u, self.left = config.N, n_u, n_iter
        self.n_draw = config.N * kernel.dim
        self.block = max(1, self.ROWS // config.N)
        self.pos = self.size = 0

    def _refill(self):
        B = min(self.block, self.left)
        U = np.concatenate([self.feed.take(self.n_u) for _ in range(B)]).reshape(B, self.n_u)
        Y = self.kernel.sample(None, U[:, : self.n_draw].ravel())
        self.Y = Y.reshape(B, self.N, -1)
        self.lp = self.evaluate(Y).reshape(B, self.N)
        self.lq = self.kernel.logpdf(None, Y).reshape(B, self.N)
        self.U_idx = U[:, self.n_draw :]
        self.pos, self.size = 0, B
        self.left -= B

    def next(self, carried, log_pi_carried, lq_carried, config):
        if self.pos == self.size:
            self._refill()
        k = self.pos
        self.pos += 1
        points = np.concatenate([self.Y[k], carried[None]])
        log_pi = np.concatenate([self.lp[k], [log_pi_carried]])
        lq = np.concatenate([self.lq[k], [lq_carried]])
        ps = ProposalSet(points, log_pi, lq.sum() - lq, self.N)
        w, picked = select_indices(ps, self.U_idx[k], config)
        return IterationResult(ps, w, picked), lq


def listing(config: SamplerConfig, stream: UniformStream) -> str:
    cud = stream.kind == "cud_lfsr"
    if config.mode == "sampling":
        if config.adapt != "off":
            return "adaptive-mp-mcmc"
        return "mp-qmcmc" if cud else "mp-mcmc"
    if config.adapt != "off":
        return "adaptive-is-mp-qmcmc" if cud else "adaptive-is-mp-mcmc"
    return "is-mp-qmcmc" if cud else "is-mp-mcmc"


def config_hash(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return str(obj)


def run_sampler(config: SamplerConfig, target: Target, kernel: GaussianKernel,
                stream: UniformStream, x0, f=None) -> RunOutput:
    """Run ``config.burn_in + config.L`` iterations; keep the last ``L``."""
    config.validate()
    f = _identity if f is None else f
    d = target.dim
    if kernel.dim != d:
        raise ConfigError(f"kernel dimension {kernel.dim} != target dimension {d}")
    adapt = config.adapt != "off"
    if adapt:
        try:
            kernel.with_params()
        except NotImplementedError as exc:
            raise ConfigError(str(exc)) from exc
    n_u = uniforms_per_iteration(kernel, config.N, config.index_draws)
    n_iter = config.burn_in + config.L
    cud = stream.kind == "cud_lfsr"
    if stream.length is not None and stream.remaining < n_iter * n_u:
        raise SequenceExhausted(
            f"{n_iter} iterations need {n_iter * n_u} uniforms, stream holds {stream.remaining}")

    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    lp = target.log_density(x)
    if not np.isfinite(lp):
        raise AllZeroMass("initial state has zero target density")
    spare = pseudo_random_stream(config.seed + 0x5EED)
    cursor_start = stream.cursor

    base_kernel = kernel
    current = kernel
    adapt_state = None
    if adapt:
        mean0 = getattr(_adaptable(kernel), "mean", x)
        adapt_state = WeightedEstimate(np.array(mean0, dtype=float),
                                       np.array(_adaptable(kernel).cov, dtype=float), ell=1)

    L, M = config.L, config.M
    sampling = config.mode == "sampling"
    samples = np.empty((L * M if sampling else 0, d))
    fresh = np.zeros(L * M if sampling else 0, dtype=bool)
    estimate = None
    sums = []
    rows = {"iter": np.arange(1, L + 1), "acpt_rate": np.empty(L), "msjd": np.empty(L),
            "mu": None, "trace_Sigma": np.full(L, np.nan), "sigma_step": np.full(L, np.nan)}
    mu_rows = []
    running = np.zeros(d)
    recorded = []

    feed = _Prefetch(stream, n_u, n_iter)
    batched = (kernel.independent and not adapt and config.freeze_box is None
               and config.bounded_jump is None)
    with _evaluator(target, config.workers) as evaluate:
        if batched:
            batches = _IndependentBatches(kernel, evaluate, feed, config, n_u, n_iter)
            lq_x = float(kernel.logpdf(None, x[None])[0])
        for it in range(n_iter):
            kept = it - config.burn_in
            if batched:
                # the carried state always has positive mass, so no retries are needed
                res, lq_all = batches.next(x, lp, lq_x, config)
                lq_x = float(lq_all[res.indices[-1]])
            else:
                k_used = select_kernel(current, base_kernel, x, config.freeze_box)
                u = feed.take(n_u)
                for attempt in range(ZERO_MASS_RETRIES + 1):
                    try:
                        res = mp_iteration(k_used, evaluate, x, lp, u, config, spare)
                        break
                    except AllZeroMass:
                        if cud or attempt == ZERO_MASS_RETRIES:
                            raise
                        u = feed.take(n_u, nominal=False)
            ps, w = res.proposal_set, res.weights
            pts = ps.points

            if sampling and kept >= 0:
                idx = res.indices
                chosen = pts[idx]
                samples[kept * M : (kept + 1) * M] = chosen
                moved = [I != ps.i0 for I in idx]
                fresh[kept * M : (kept + 1) * M] = moved
                steps = chosen - np.concatenate([x[None], chosen[:-1]])
                rows["acpt_rate"][kept] = sum(moved) / M
                rows["msjd"][kept] = np.einsum("ij,ij->", steps, steps) / M
                running += (chosen.sum(axis=0) / M - running) / (kept + 1)
                mu_rows.append(running.copy())
            elif not sampling:
                mt = w @ np.asarray(f(pts), dtype=float).reshape(len(pts), -1)
                if kept >= 0:
                    if estimate is None:
                        estimate = WeightedEstimate(np.zeros_like(mt))
                    estimate.update_mean(mt)
                    sums.append(mt)
                    rows["acpt_rate"][kept] = 1.0 - w[ps.i0]
                    rows["msjd"][kept] = float(w @ np.sum((pts - x) ** 2, axis=1))
                    mu_rows.append(estimate.mu.copy())

            I_last = res.indices[-1]
            if adapt:
                before = adapt_state.Sigma
                adapt_state.update_mean(w @ pts)
                diff = pts - adapt_state.mu
                adapt_state.update_cov((diff * w[:, None]).T @ diff)
                cov = regularize_covariance(adapt_state.Sigma, config.eig_bounds)
                mean = adapt_state.mu if config.adapt == "mean_and_cov" else None
                try:
                    current = kernel.with_params(mean=mean, cov=cov)
                except MetricNotSPD:
                    current = kernel.with_params(mean=mean, cov=cov + 1e-6 * np.eye(d))
                if kept >= 0:
                    rows["trace_Sigma"][kept] = np.trace(adapt_state.Sigma)
                    rows["sigma_step"][kept] = np.linalg.norm(adapt_state.Sigma - before)
            if config.record_proposals and kept >= 0:
                recorded.append({"points": pts, "weights": w, "indices": list(res.indices),
                                 "i0": ps.i0, "log_pi": ps.log_pi, "log_kappa": ps.log_kappa})
            x, lp = pts[I_last].copy(), float(ps.log_pi[I_last])

    rows["mu"] = np.array(mu_rows)
    meta = {
        "config": config.as_dict(),
        "target": target.describe(),
        "kernel": kernel.describe(),
        "stream": {"kind": stream.kind, "seed": stream.seed,
                   "params": {k: v for k, v in stream.params.items()}},
        "listing": listing(config, stream),
        "uniforms_per_iteration": n_u,
        "cursor_start": cursor_start,
        "cursor_end": stream.cursor,
        "consistency_guarantee": (not cud) or kernel.independent,
        "x0": np.atleast_1d(np.asarray(x0, dtype=float)).tolist(),
    }
    meta["config_hash"] = config_hash(meta["config"], meta["target"], meta["kernel"],
                                      meta["stream"], meta["x0"])
    return RunOutput(samples, fresh, estimate,
                     np.array(sums) if sums else None, rows, meta, recorded,
                     adapt_state.Sigma if adapt else None)


def _adaptable(kernel: GaussianKernel) -> GaussianKernel:
    return kernel.second if isinstance(kernel, AuxiliaryState) else kernel


def run_mp_mcmc(config, target, kernel, stream, x0) -> RunOutput:
    if config.mode != "sampling":
        raise WrongMode("run_mp_mcmc needs mode='sampling'")
    return run_sampler(config, target, kernel, stream, x0)


def run_is_mp_mcmc(config, target, kernel, stream, x0, f=None) -> RunOutput:
    if config.mode != "importance":
        raise WrongMode("run_is_mp_mcmc needs mode='importance'")
    return run_sampler(config, target, kernel, stream, x0, f)


def run_adaptive(config, target, kernel, stream, x0, f=None) -> RunOutput:
    if config.adapt == "off":
        raise ConfigError("run_adaptive needs adapt != 'off'")
    return run_sampler(config, target, kernel, stream, x0, f)


def run_qmcmc_variant(config, target, kernel, stream, x0, f=None) -> RunOutput:
    if stream.kind != "cud_lfsr":
        raise ConfigError("QMC variants need a CUD-driven stream")
    return run_sampler(config, target, kernel, stream, x0, f)


def coupling_check(kernel: GaussianKernel, target: Target, u: np.ndarray, x, x_other,
                   config: SamplerConfig | None = None) -> bool:
    """Whether one iteration from two carried points with the same uniforms
    lands both chains on the same state."""
    if config is None:
        config = SamplerConfig(N=(len(u) - 1) // kernel.dim, L=1)
    out = []
    for start in (x, x_other):
        start = np.atleast_1d(np.asarray(start, dtype=float))
        res = mp_iteration(kernel, target.log_density_batch, start, target.log_density(start),
                           np.asarray(u, dtype=float), config)
        out.append(res.proposal_set.points[res.indices[-1]])
    return bool(np.array_equal(out[0], out[1]))
