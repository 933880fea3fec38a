"""Gaussian proposal kernels driven through the inverse CDF.

A block of ``d`` uniforms maps to one proposal as
``y = mean + chol(cov) @ ndtri(u_block)`` with the lower Cholesky factor, so
a uniform tuple deterministically fixes the whole proposal set.

Within an iteration the carried-over sample is stored *last*
(``i0 = N``); the N fresh proposals come first in the order their uniforms
were consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import ndtri

from .errors import DegenerateTuple, MetricNotSPD
from .targets import LOG_2PI, Target

KERNEL_KINDS = ("independent", "random_walk", "smmala", "auxiliary")


def inverse_normal_cdf(u) -> np.ndarray:
    """Standard normal quantile (Cephes ``ndtri``, accurate to a few ulp)."""
    u = np.asarray(u, dtype=float)
    if u.size and (u.min() <= 0.0 or u.max() >= 1.0):
        raise DegenerateTuple("uniforms must lie strictly inside (0, 1)")
    return ndtri(u)


def _chol(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise MetricNotSPD("proposal covariance is not positive definite") from exc


def _log_norm(chol: np.ndarray) -> float:
    return -np.log(np.diag(chol)).sum() - 0.5 * chol.shape[0] * LOG_2PI


def gaussian_logpdf(Y: np.ndarray, mean: np.ndarray, chol: np.ndarray,
                    chol_inv: np.ndarray | None = None,
                    log_norm: float | None = None) -> np.ndarray:
    """Row-wise N(mean, chol chol^T) log density; ``chol_inv`` skips the solve."""
    R = np.atleast_2d(Y) - mean
    if chol_inv is None:
        z = linalg.solve_triangular(chol, R.T, lower=True, check_finite=False).T
    else:
        z = R @ chol_inv.T
    if log_norm is None:
        log_norm = _log_norm(chol)
    return log_norm - 0.5 * np.einsum("ij,ij->i", z, z)


class GaussianKernel:
    """Base for kernels whose law from a point x is N(mean(x), cov(x))."""

    kind = "gaussian"
    independent = False
    symmetric = False
    dim: int

    def params(self, x) -> tuple[np.ndarray, np.ndarray]:
        """(mean, lower Cholesky factor) of the proposal law from ``x``."""
        raise NotImplementedError

    def sample(self, x, u) -> np.ndarray:
        mean, chol = self.params(x)
        z = inverse_normal_cdf(u).reshape(-1, self.dim)
        return mean + z @ chol.T

    def logpdf(self, x, Y) -> np.ndarray:
        """log kappa(x, y) for every row y of ``Y``."""
        mean, chol = self.params(x)
        return gaussian_logpdf(Y, mean, chol)

    def log_matrix(self, P) -> np.ndarray:
        """K[i, j] = log kappa(P_i, P_j)."""
        return np.stack([self.logpdf(p, P) for p in P])

    def log_from_each(self, P, y) -> np.ndarray:
        """log kappa(P_i, y) for every row P_i."""
        return np.array([self.logpdf(p, y[None])[0] for p in P])

    def with_params(self, mean=None, cov=None) -> "GaussianKernel":
        raise NotImplementedError(f"{self.kind} kernels are not adaptable")

    @property
    def origin_dependent(self) -> bool:
        return not self.independent

    def describe(self) -> dict:
        return {"kind": self.kind}


class IndependentGaussian(GaussianKernel):
    kind = "independent"
    independent = True

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self.dim = self.mean.size
        self.chol = _chol(self.cov)
        self._chol_inv = np.linalg.inv(self.chol)
        self._log_norm = _log_norm(self.chol)

    def params(self, x=None):
        return self.mean, self.chol

    def logpdf(self, x, Y):
        return gaussian_logpdf(Y, self.mean, self.chol, self._chol_inv, self._log_norm)

    def log_matrix(self, P):
        return np.tile(self.logpdf(None, P), (len(P), 1))

    def log_from_each(self, P, y):
        return np.full(len(P), self.logpdf(None, np.atleast_2d(y))[0])

    def with_params(self, mean=None, cov=None):
        return IndependentGaussian(self.mean if mean is None else mean,
                                   self.cov if cov is None else cov)


class RandomWalkGaussian(GaussianKernel):
    kind = "random_walk"
    symmetric = True

    def __init__(self, cov):
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self.dim = self.cov.shape[0]
        self.chol = _chol(self.cov)
        self._chol_inv = np.linalg.inv(self.chol)
        self._logdet = np.log(np.diag(self.chol)).sum()
        self._log_norm = _log_norm(self.chol)

    def params(self, x):
        return np.asarray(x, dtype=float), self.chol

    def logpdf(self, x, Y):
        return gaussian_logpdf(Y, np.asarray(x, dtype=float), self.chol, self._chol_inv,
                               self._log_norm)

    def log_matrix(self, P):
        P = np.atleast_2d(P)
        Z = P @ self._chol_inv.T
        sq = np.sum((Z[:, None, :] - Z[None, :, :]) ** 2, axis=2)
        return -0.5 * sq - self._logdet - 0.5 * self.dim * LOG_2PI

    def log_from_each(self, P, y):
        return self.logpdf(y, P)  # symmetric

    def with_params(self, mean=None, cov=None):
        return RandomWalkGaussian(self.cov if cov is None else cov)


def smmala_params(target: Target, x, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean x + eps^2/2 G(x)^-1 grad log pi(x) and covariance eps^2 G(x)^-1."""
    x = np.asarray(x, dtype=float)
    G = np.atleast_2d(target.fisher_metric(x))
    try:
        cf = linalg.cho_factor(G, lower=True)
    except linalg.LinAlgError as exc:
        raise MetricNotSPD("Fisher metric is not positive definite") from exc
    Ginv = linalg.cho_solve(cf, np.eye(x.size))
    Ginv = 0.5 * (Ginv + Ginv.T)
    mean = x + 0.5 * eps**2 * (Ginv @ target.grad_log_density(x))
    return mean, eps**2 * Ginv


class SmMALA(GaussianKernel):
    kind = "smmala"

    def __init__(self, target: Target, eps: float = 1.0):
        if not (target.has_gradient and target.has_metric):
            raise MetricNotSPD("SmMALA needs a target with gradient and Fisher metric")
        self.target = target
        self.eps = float(eps)
        self.dim = target.dim

    def params(self, x):
        mean, cov = smmala_params(self.target, x, self.eps)
        return mean, _chol(cov)

    def describe(self):
        return {"kind": self.kind, "eps": self.eps}


class AuxiliaryState(GaussianKernel):
    """Two-step proposal: z ~ first(carried, .), then N points ~ second(z, .).

    The joint law of the N+1 points given index i is
    first(y_i, z) * prod_{j != i} second(z, y_j), so the per-index mass is
    pi(y_i) first(y_i, z) / second(z, y_i) up to a common factor.
    """

    kind = "auxiliary"

    def __init__(self, second: GaussianKernel, first: GaussianKernel | None = None):
        self.second = second
        self.first = second if first is None else first
        self.dim = second.dim
        self.independent = False
        self.symmetric = self.first is self.second and second.symmetric

    def params(self, x):
        return self.second.params(x)

    def with_params(self, mean=None, cov=None):
        second = self.second.with_params(mean, cov)
        if self.first is self.second:
            return AuxiliaryState(second)
        return AuxiliaryState(second, self.first.with_params(mean, cov))

    def describe(self):
        return {"kind": self.kind, "first": self.first.describe(),
                "second": self.second.describe()}


def propose_batch(kernel: GaussianKernel, carried, u) -> np.ndarray:
    """N proposals from kernel(carried, .) using N*d uniforms."""
    u = np.asarray(u, dtype=float)
    if u.size % kernel.dim:
        raise ValueError(f"{u.size} uniforms do not split into blocks of {kernel.dim}")
    return kernel.sample(carried, u)


def auxiliary_state_batch(kernel: AuxiliaryState, carried, u) -> tuple[np.ndarray, np.ndarray]:
    """(z, proposals): the first d uniforms give z, the remaining N*d the proposals."""
    d = kernel.dim
    u = np.asarray(u, dtype=float)
    z = kernel.first.sample(carried, u[:d])[0]
    return z, propose_batch(kernel.second, z, u[d:])


def kernel_logdensity(kernel: GaussianKernel, origin, to_set) -> float:
    """log kappa(origin, to_set) for a kernel that factorises over proposals."""
    return float(np.sum(kernel.logpdf(origin, np.atleast_2d(to_set))))


@dataclass
class ProposalSet:
    """The N+1 points of one iteration with their log target densities and
    log kappa(y_j, y_without_j) values; ``points[i0]`` is the carried sample."""

    points: np.ndarray
    log_pi: np.ndarray
    log_kappa: np.ndarray
    i0: int
    z: np.ndarray | None = None

    @property
    def log_mass(self) -> np.ndarray:
        return self.log_pi + self.log_kappa

    @property
    def N(self) -> int:
        return self.points.shape[0] - 1


def uniforms_per_iteration(kernel: GaussianKernel, N: int, index_draws: int) -> int:
    aux = 1 if isinstance(kernel, AuxiliaryState) else 0
    return (N + aux) * kernel.dim + index_draws


def draw_proposals(kernel: GaussianKernel, carried, u) -> tuple[np.ndarray, np.ndarray | None]:
    """Fresh proposals (and the auxiliary state, if any) from one uniform block."""
    if isinstance(kernel, AuxiliaryState):
        z, Y = auxiliary_state_batch(kernel, carried, u)
        return Y, z
    return propose_batch(kernel, carried, u), None


def log_kappa_terms(kernel: GaussianKernel, points: np.ndarray,
                    z: np.ndarray | None = None) -> np.ndarray:
    """log kappa(y_j, y_without_j) for every point of the set."""
    if isinstance(kernel, AuxiliaryState):
        to_z = kernel.first.log_from_each(points, z)
        from_z = kernel.second.logpdf(z, points)
        return to_z + (from_z.sum() - from_z)
    if kernel.independent:
        lq = kernel.logpdf(None, points)
        return lq.sum() - lq
    K = kernel.log_matrix(points)
    return K.sum(axis=1) - np.diag(K)


def score_proposals(kernel: GaussianKernel, log_density_batch, Y: np.ndarray, carried,
                    log_pi_carried: float, z: np.ndarray | None = None) -> ProposalSet:
    points = np.concatenate([Y, np.reshape(carried, (1, -1))])
    log_pi = np.concatenate([log_density_batch(Y), [log_pi_carried]])
    return ProposalSet(points, log_pi, log_kappa_terms(kernel, points, z), len(Y), z)


def build_kernel(spec: dict, target: Target, dim: int | None = None) -> GaussianKernel:
    """Construct a kernel from a config mapping (``kind``, ``eps``, ``init_cov``,
    ``init_mean``, ``scale``, ``first``)."""
    kind = spec.get("kind", "independent")
    d = target.dim if dim is None else dim
    cov = spec.get("init_cov")
    if cov is None:
        cov = np.eye(d)
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = float(cov) * np.eye(d)
    elif cov.ndim == 1:
        cov = np.diag(cov)
    cov = cov * spec.get("scale", 1.0) ** 2
    if kind == "independent":
        mean = spec.get("init_mean")
        mean = np.zeros(d) if mean is None else np.asarray(mean, dtype=float)
        return IndependentGaussian(mean, cov)
    if kind == "random_walk":
        return RandomWalkGaussian(cov)
    if kind == "smmala":
        return SmMALA(target, spec.get("eps", 1.0))
    if kind == "auxiliary":
        second = build_kernel(dict(spec.get("second", {"kind": "smmala"}),
                                   eps=spec.get("eps", 1.0)), target, d)
        first = spec.get("first")
        return AuxiliaryState(second, None if first is None else build_kernel(first, target, d))
    raise ValueError(f"unknown kernel kind {kind!r}")
