"""Posterior targets: Gaussian, Zellner g-prior regression, logistic
regression and ODE parameter inference, plus synthetic datasets for them.

Every target evaluates batches of points (``log_density_batch``), which is
what the samplers call; ``log_density`` is the single-point convenience.
Points outside the support get ``-inf``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.special import expit, gammaln

from .errors import DegenerateDesign, NotSPD, SolverDiverged

LOG_2PI = np.log(2.0 * np.pi)


def _cholesky(cov: np.ndarray, err=NotSPD) -> np.ndarray:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14):
        raise err("matrix is not symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise err("matrix is not positive definite") from exc


class Target:
    """Base class.  Subclasses implement ``log_density_batch``."""

    dim: int
    analytic_mean: np.ndarray | None = None
    analytic_cov: np.ndarray | None = None
    has_gradient = False
    has_metric = False

    def log_density_batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, x) -> float:
        return float(self.log_density_batch(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def grad_log_density(self, x) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no gradient")

    def fisher_metric(self, x) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no metric")

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "dim": self.dim}


class GaussianTarget(Target):
    has_gradient = True
    has_metric = True

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self.dim = self.mean.size
        self.chol = _cholesky(self.cov)
        self.precision = linalg.cho_solve((self.chol, True), np.eye(self.dim))
        self._chol_inv = np.linalg.inv(self.chol)
        self._log_norm = -0.5 * self.dim * LOG_2PI - np.log(np.diag(self.chol)).sum()
        self.analytic_mean = self.mean
        self.analytic_cov = self.cov

    def log_density_batch(self, X):
        z = (np.asarray(X, dtype=float) - self.mean) @ self._chol_inv.T
        return self._log_norm - 0.5 * np.einsum("ij,ij->i", z, z)

    def grad_log_density(self, x):
        return -self.precision @ (np.asarray(x, dtype=float) - self.mean)

    def fisher_metric(self, x):
        return self.precision

    def describe(self):
        return {"kind": "gaussian", "dim": self.dim}


def gaussian_target(mean, cov) -> GaussianTarget:
    return GaussianTarget(mean, cov)


class ZellnerTarget(Target):
    """Linear regression y = X beta + noise(sigma2) with Zellner's g-prior.

    The prior is N(0, sigma2/g (X^T X)^-1), so the posterior is Gaussian with
    mean beta_hat / (1 + g) and covariance sigma2 / (1 + g) (X^T X)^-1, where
    beta_hat is the least-squares solution.  The default g is 1/n.
    """

    has_gradient = True
    has_metric = True

    def __init__(self, X, y, sigma2: float = 1.0, g: float | None = None):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.y = np.asarray(y, dtype=float).ravel()
        n, d = self.X.shape
        if self.y.size != n:
            raise ValueError("X and y disagree on the number of observations")
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        self.dim = d
        self.sigma2 = float(sigma2)
        self.g = 1.0 / n if g is None else float(g)
        self.gram = self.X.T @ self.X
        if np.linalg.matrix_rank(self.gram) < d:
            raise DegenerateDesign("X^T X is rank deficient; the g-prior posterior is improper")
        gram_inv = np.linalg.pinv(self.gram, hermitian=True)
        self.xty = self.X.T @ self.y
        self.analytic_mean = gram_inv @ self.xty / (1.0 + self.g)
        self.analytic_cov = self.sigma2 / (1.0 + self.g) * gram_inv
        self.analytic_cov = 0.5 * (self.analytic_cov + self.analytic_cov.T)

    def log_density_batch(self, B):
        B = np.asarray(B, dtype=float)
        resid = self.y[None, :] - B @ self.X.T
        quad = np.einsum("ij,jk,ik->i", B, self.gram, B)
        return -0.5 / self.sigma2 * (np.sum(resid * resid, axis=1) + self.g * quad)

    def grad_log_density(self, b):
        b = np.asarray(b, dtype=float)
        return (self.xty - (1.0 + self.g) * self.gram @ b) / self.sigma2

    def fisher_metric(self, b):
        return (1.0 + self.g) * self.gram / self.sigma2

    def describe(self):
        return {"kind": "zellner", "dim": self.dim, "n": self.X.shape[0],
                "sigma2": self.sigma2, "g": self.g}


def zellner_linreg_target(X, y, sigma2: float = 1.0, g: float | None = None) -> ZellnerTarget:
    return ZellnerTarget(X, y, sigma2, g)


class LogisticTarget(Target):
    """Bayesian logistic regression with a N(0, alpha I) prior."""

    has_gradient = True
    has_metric = True

    def __init__(self, X, y, alpha: float = 100.0):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.y = np.asarray(y, dtype=float).ravel()
        self.dim = self.X.shape[1]
        self.alpha = float(alpha)

    def log_density_batch(self, T):
        Z = np.asarray(T, dtype=float) @ self.X.T
        # y log s(z) + (1 - y) log(1 - s(z)) = y z - log(1 + e^z)
        ll = np.sum(self.y * Z - np.logaddexp(0.0, Z), axis=1)
        return ll - 0.5 * np.sum(np.asarray(T) ** 2, axis=1) / self.alpha

    def grad_log_density(self, t):
        t = np.asarray(t, dtype=float)
        return self.X.T @ (self.y - expit(self.X @ t)) - t / self.alpha

    def fisher_metric(self, t):
        s = expit(self.X @ np.asarray(t, dtype=float))
        return (self.X.T * (s * (1.0 - s))) @ self.X + np.eye(self.dim) / self.alpha

    def describe(self):
        return {"kind": "logistic", "dim": self.dim, "n": self.X.shape[0], "alpha": self.alpha}


def logistic_target(X, y, alpha: float = 100.0) -> LogisticTarget:
    return LogisticTarget(X, y, alpha)


# --------------------------------------------------------------------------
# ODE models


def _lotka_volterra(state, p):
    u, v = state[:, 0], state[:, 1]
    return np.stack([p[:, 0] * u - p[:, 1] * u * v,
                     p[:, 2] * u * v - p[:, 3] * v], axis=1)


def _fitzhugh_nagumo(state, p):
    u, v = state[:, 0], state[:, 1]
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    return np.stack([c * (u - u**3 / 3.0 + v), -(u - a + b * v) / c], axis=1)


@dataclass(frozen=True)
class OdeModel:
    """Two-state ODE with a vectorised right-hand side.

    ``rhs(states, params)`` maps (k, state_dim) states and (k, param_dim)
    parameters to (k, state_dim) derivatives.
    """

    name: str
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    param_dim: int
    true_params: tuple = ()
    init_state: tuple = ()
    t_end: float = 1.0
    n_obs: int = 100
    noise_sd: tuple = (1.0, 1.0)
    max_step: float | None = None
    state_dim: int = 2

    def times(self, n_obs: int | None = None) -> np.ndarray:
        n = self.n_obs if n_obs is None else n_obs
        return np.linspace(0.0, self.t_end, n + 1)[1:]


LOTKA_VOLTERRA = OdeModel("lotka_volterra", _lotka_volterra, 4, (1.8, 0.5, 2.5, 1.0),
                          (10.0, 5.0), 8.0, 400, (0.25, 0.25), max_step=0.0025)
FITZHUGH_NAGUMO = OdeModel("fitzhugh_nagumo", _fitzhugh_nagumo, 3, (0.5, 0.5, 1.5),
                           (-1.0, 1.0), 2.0, 200, (1.0, 1.0), max_step=0.0025)
ODE_MODELS = {m.name: m for m in (LOTKA_VOLTERRA, FITZHUGH_NAGUMO)}


def _substep_counts(t_grid, substeps: int, max_step: float | None, t0: float) -> np.ndarray:
    gaps = np.diff(np.concatenate([[t0], t_grid]))
    counts = np.full(gaps.size, int(substeps))
    if max_step:
        counts = np.maximum(counts, np.ceil(gaps / max_step - 1e-9).astype(int))
    return counts


def _rk4_batch(rhs, params, init_state, t_grid, substeps, t0, max_step=None):
    params = np.atleast_2d(params)
    k = params.shape[0]
    state = np.tile(np.asarray(init_state, dtype=float), (k, 1))
    out = np.empty((k, len(t_grid), state.shape[1]))
    counts = _substep_counts(t_grid, substeps, max_step, t0)
    t_prev = t0
    with np.errstate(over="ignore", invalid="ignore"):
        for i, t in enumerate(t_grid):
            h = (t - t_prev) / counts[i]
            for _ in range(counts[i]):
                k1 = rhs(state, params)
                k2 = rhs(state + 0.5 * h * k1, params)
                k3 = rhs(state + 0.5 * h * k2, params)
                k4 = rhs(state + h * k3, params)
                state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[:, i] = state
            t_prev = t
    return out


def solve_rk4(model: OdeModel, params, init_state, t_grid, substeps: int = 4,
              t0: float = 0.0, max_step: float | None = None) -> np.ndarray:
    """Classical RK4 from ``t0`` with equal steps between grid points.

    Each interval gets ``substeps`` steps, more if needed to keep the step at
    or below ``max_step``.

    Returns the (len(t_grid), state_dim) trajectory; raises SolverDiverged if
    the state becomes non-finite.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size > 1 and np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if t_grid[0] < t0:
        raise ValueError("t_grid must start at or after t0")
    traj = _rk4_batch(model.rhs, np.asarray(params, dtype=float), init_state, t_grid,
                      substeps, t0, max_step)[0]
    if not np.all(np.isfinite(traj)):
        raise SolverDiverged(f"{model.name}: state became non-finite")
    return traj


class OdeTarget(Target):
    """Posterior over ODE parameters with a Gaussian observation model.

    The prior is an independent Gamma(shape, scale) per parameter, restricted
    to positive values without renormalisation (constants cancel in every
    weight ratio).  Trajectories that diverge give ``-inf``.
    """

    has_metric = True

    def __init__(self, model: OdeModel, times, observations, shape: float = 1.0,
                 scale: float = 3.0, substeps: int = 4, max_step: float | None = None):
        self.model = model
        self.times = np.asarray(times, dtype=float)
        self.obs = np.asarray(observations, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("observation times must be strictly increasing")
        self.noise_sd = np.asarray(model.noise_sd, dtype=float)
        if np.any(self.noise_sd <= 0):
            raise ValueError("noise standard deviations must be positive")
        self.dim = model.param_dim
        self.shape = float(shape)
        self.scale = float(scale)
        self.substeps = substeps
        self.max_step = max_step

    def trajectories(self, P) -> np.ndarray:
        return _rk4_batch(self.model.rhs, P, self.model.init_state, self.times,
                          self.substeps, 0.0, self.max_step)

    def log_prior_batch(self, P):
        P = np.asarray(P, dtype=float)
        out = np.full(P.shape[0], -np.inf)
        ok = np.all(P > 0, axis=1)
        Q = P[ok]
        out[ok] = np.sum((self.shape - 1.0) * np.log(Q) - Q / self.scale
                         - gammaln(self.shape) - self.shape * np.log(self.scale), axis=1)
        return out

    def log_density_batch(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = self.log_prior_batch(P)
        ok = np.isfinite(out)
        if np.any(ok):
            traj = self.trajectories(P[ok])
            resid = (traj - self.obs[None]) / self.noise_sd
            with np.errstate(invalid="ignore", over="ignore"):
                ll = -0.5 * np.sum(resid * resid, axis=(1, 2))
            ll[~np.isfinite(ll)] = -np.inf
            out[ok] += ll
        return out

    def fisher_metric(self, p, h: float = 1e-6):
        """Gauss-Newton metric J^T S^-1 J from central-difference sensitivities,
        plus the prior curvature (shape - 1) / p^2."""
        p = np.asarray(p, dtype=float)
        steps = h * np.maximum(np.abs(p), 1.0)
        E = np.diag(steps)
        traj = self.trajectories(np.vstack([p + E, p - E]))
        J = (traj[: self.dim] - traj[self.dim :]) / (2.0 * steps[:, None, None])
        J = (J / self.noise_sd).reshape(self.dim, -1)
        G = J @ J.T + np.diag(np.maximum(self.shape - 1.0, 0.0) / p**2)
        return 0.5 * (G + G.T)

    def describe(self):
        return {"kind": "ode", "model": self.model.name, "dim": self.dim,
                "n_obs": int(self.times.size)}


def ode_target(model, times, observations, shape: float = 1.0, scale: float = 3.0,
               substeps: int = 4, max_step: float | None = None) -> OdeTarget:
    if isinstance(model, str):
        model = ODE_MODELS[model]
    return OdeTarget(model, times, observations, shape, scale, substeps, max_step)


# --------------------------------------------------------------------------
# synthetic data

# observation counts matching common benchmark designs at each dimension
LOGISTIC_DESIGNS = {3: 250, 8: 532, 14: 270, 15: 690, 25: 1000}


def ar1_covariance(d: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


@dataclass
class Dataset:
    kind: str
    X: np.ndarray | None = None
    y: np.ndarray | None = None
    times: np.ndarray | None = None
    observations: np.ndarray | None = None
    info: dict = field(default_factory=dict)


def simulate_dataset(kind: str, seed: int, **kw) -> Dataset:
    """Deterministic synthetic data.

    kinds: ``linreg`` (d, n, sigma2), ``logistic`` (d, n),
    ``lotka_volterra`` / ``fitzhugh_nagumo`` (n_obs, substeps, max_step; the
    solver settings should match the ones the inference target uses).
    """
    rng = np.random.default_rng(seed)
    if kind == "linreg":
        d, n, sigma2 = kw.get("d", 2), kw.get("n", 500), kw.get("sigma2", 1.0)
        X = rng.multivariate_normal(np.zeros(d), ar1_covariance(d), size=n, method="cholesky")
        beta = np.ones(d)
        y = X @ beta + np.sqrt(sigma2) * rng.standard_normal(n)
        return Dataset(kind, X=X, y=y, info={"beta_star": beta, "sigma2": sigma2})
    if kind == "logistic":
        d = kw.get("d", 3)
        n = kw.get("n") or LOGISTIC_DESIGNS.get(d, 500)
        X = np.hstack([np.ones((n, 1)), rng.standard_normal((n, d - 1))])
        theta = rng.standard_normal(d) / np.sqrt(d)
        y = (rng.random(n) < expit(X @ theta)).astype(float)
        return Dataset(kind, X=X, y=y, info={"theta_star": theta})
    if kind in ODE_MODELS:
        model = ODE_MODELS[kind]
        times = model.times(kw.get("n_obs"))
        clean = solve_rk4(model, model.true_params, model.init_state, times,
                          kw.get("substeps", 4), max_step=kw.get("max_step", model.max_step))
        obs = clean + np.asarray(model.noise_sd) * rng.standard_normal(clean.shape)
        return Dataset(kind, times=times, observations=obs, info={"clean": clean})
    raise ValueError(f"unknown dataset kind {kind!r}")


def write_dataset_csv(ds: Dataset, path) -> None:
    if ds.times is not None:
        header = "t,u_obs,v_obs"
        rows = np.column_stack([ds.times, ds.observations])
    else:
        header = ",".join([f"x_{j}" for j in range(ds.X.shape[1])] + ["y"])
        rows = np.column_stack([ds.X, ds.y])
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")


def read_dataset_csv(path, kind: str) -> Dataset:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if kind in ODE_MODELS:
        return Dataset(kind, times=arr[:, 0], observations=arr[:, 1:3])
    return Dataset(kind, X=arr[:, :-1], y=arr[:, -1])


def build_target(spec: dict, seed: int = 0) -> Target:
    """Construct a target from a config mapping (see the README for keys)."""
    kind = spec.get("kind", "gaussian")
    if kind == "gaussian":
        mean = np.atleast_1d(np.asarray(spec.get("mean", [0.0]), dtype=float))
        cov = spec.get("cov")
        cov = np.eye(mean.size) if cov is None else np.atleast_2d(np.asarray(cov, dtype=float))
        return gaussian_target(mean, cov)
    data_seed = spec.get("data_seed", seed)
    if kind == "zellner":
        ds = simulate_dataset("linreg", data_seed, d=spec.get("d", 2), n=spec.get("n", 500),
                              sigma2=spec.get("sigma2", 1.0))
        return zellner_linreg_target(ds.X, ds.y, spec.get("sigma2", 1.0), spec.get("g"))
    if kind == "logistic":
        ds = simulate_dataset("logistic", data_seed, d=spec.get("d", 3), n=spec.get("n"))
        return logistic_target(ds.X, ds.y, spec.get("alpha", 100.0))
    if kind in ODE_MODELS:
        solver = {"substeps": spec.get("substeps", 4),
                  "max_step": spec.get("max_step", ODE_MODELS[kind].max_step) or None}
        ds = simulate_dataset(kind, data_seed, n_obs=spec.get("n_obs"), **solver)
        return ode_target(kind, ds.times, ds.observations, spec.get("prior_shape", 1.0),
                          spec.get("prior_scale", 3.0), **solver)
    raise ValueError(f"unknown target kind {kind!r}")
