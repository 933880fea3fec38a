"""Transition laws over the N+1 proposal indices of one iteration.

Every construction here leaves the stationary weights
``w_j ∝ pi(y_j) kappa(y_j, y_without_j)`` invariant.  Inputs are the log
masses ``log pi + log kappa`` (or a :class:`~mpqmc.proposals.ProposalSet`),
or already-normalised weights for the constructions that only need those.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroMass, InvalidWeights

CONSTRUCTIONS = ("barker", "peskun", "suwa_todo", "tjelmeland")
TJELMELAND_MAX_STATES = 129
_CLEANUP_TOL = 1e-12


@dataclass(frozen=True)
class TransitionMatrix:
    A: np.ndarray
    construction: str

    @property
    def n_states(self) -> int:
        return self.A.shape[0]


def _log_mass(ps_or_log_mass) -> np.ndarray:
    if hasattr(ps_or_log_mass, "log_mass"):
        return np.asarray(ps_or_log_mass.log_mass, dtype=float)
    return np.asarray(ps_or_log_mass, dtype=float)


def stationary_weights(ps_or_log_mass) -> np.ndarray:
    """Normalised weights from log masses, via max-subtraction in log space."""
    lm = _log_mass(ps_or_log_mass)
    top = lm.max()
    if np.isnan(top) or top == np.inf:
        raise InvalidWeights("log masses must be finite or -inf")
    if top == -np.inf:
        raise AllZeroMass("every proposal has zero target mass")
    w = np.exp(lm - top)
    return w / w.sum()


def check_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1 or np.any(~np.isfinite(w)) or np.any(w < 0):
        raise InvalidWeights("weights must be a non-negative finite vector")
    if abs(w.sum() - 1.0) > 1e-12:
        raise InvalidWeights(f"weights sum to {w.sum()!r}, not 1")
    return w


def _cleanup(A: np.ndarray) -> np.ndarray:
    """Clamp rounding-level negatives and renormalise rows; larger drift is an error."""
    if np.any(A < -_CLEANUP_TOL):
        raise InvalidWeights(f"transition entry {A.min()!r} is negative beyond rounding")
    A = np.clip(A, 0.0, None)
    sums = A.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > _CLEANUP_TOL):
        raise InvalidWeights("transition rows drifted from 1 beyond rounding")
    return A / sums[:, None]


def peskun_row(log_mass: np.ndarray, i: int) -> np.ndarray:
    """Row ``i`` of :func:`peskun_matrix` without building the full matrix.

    ``log_mass`` must already be validated (finite or -inf, not all -inf).
    """
    n = log_mass.size
    row = np.zeros(n)
    if n == 1:
        row[0] = 1.0
        return row
    if log_mass[i] == -np.inf:
        row[np.isfinite(log_mass)] = 1.0 / (n - 1)
    else:
        with np.errstate(invalid="ignore"):
            row[:] = np.exp(np.minimum(log_mass - log_mass[i], 0.0)) / (n - 1)
    row[i] = 0.0
    row[i] = max(1.0 - row.sum(), 0.0)
    return row


def barker_matrix(w) -> TransitionMatrix:
    w = check_weights(w)
    return TransitionMatrix(np.tile(w, (w.size, 1)), "barker")


def peskun_matrix(ps_or_log_mass) -> TransitionMatrix:
    """Metropolised transitions: off-diagonal (1/N) min(1, mass_j / mass_i)."""
    lm = _log_mass(ps_or_log_mass)
    stationary_weights(lm)  # validates and raises AllZeroMass
    n = lm.size
    if n == 1:
        return TransitionMatrix(np.ones((1, 1)), "peskun")
    finite = np.isfinite(lm)
    with np.errstate(invalid="ignore"):
        diff = lm[None, :] - lm[:, None]
    ratio = np.where(diff >= 0, 1.0, np.exp(np.minimum(diff, 0.0)))
    ratio[:, ~finite] = 0.0
    ratio[np.ix_(~finite, finite)] = 1.0
    A = ratio / (n - 1)
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(A, 1.0 - A.sum(axis=1))
    return TransitionMatrix(_cleanup(A), "peskun")


def suwa_todo_matrix(w) -> TransitionMatrix:
    """Non-reversible weight allocation minimising the average rejection.

    States are ordered by descending weight (ties by index).  With cumulative
    weights S_i in that order (S_0 taken as S_n), the flow from i to j is
    ``max(0, min(D, w_i + w_j - D, w_i, w_j))`` where
    ``D = S_i - S_{j-1} + w_max``.  The flows have row sums w_i and column sums
    w_j, so the matrix A = flow / w_i has w as its stationary law, and the
    weighted rejection equals max(0, 2 w_max - 1).
    """
    w = check_weights(w)
    n = w.size
    order = np.argsort(-w, kind="stable")
    ws = w[order]
    S = np.cumsum(ws)
    S_prev = np.concatenate([[S[-1]], S[:-1]])  # S_0 is identified with S_n
    D = S[:, None] - S_prev[None, :] + ws[0]
    flow = np.maximum(0.0, np.minimum.reduce([
        D, ws[:, None] + ws[None, :] - D,
        np.broadcast_to(ws[:, None], (n, n)), np.broadcast_to(ws[None, :], (n, n))]))
    A = np.empty((n, n))
    A[np.ix_(order, order)] = _rows_from_flow(flow, ws)
    return TransitionMatrix(_cleanup(A), "suwa_todo")


def _rows_from_flow(flow: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row-normalise a flow matrix whose row sums equal w up to rounding.

    Dividing by the computed row sum instead of w_i keeps tiny-weight rows
    stochastic; the balance error this introduces is bounded by w_i times the
    relative rounding of that row, i.e. machine precision in absolute terms.
    Rows carrying no flow fall back to the weights themselves.
    """
    A = np.tile(w, (w.size, 1))
    sums = flow.sum(axis=1)
    pos = (w > 0) & (sums > 0)
    A[pos] = flow[pos] / sums[pos, None]
    return A


def tjelmeland_optimized_matrix(w) -> TransitionMatrix:
    """Reversible matrix with at most one non-zero diagonal entry.

    Starts from the stationary matrix A(i, j) = w_j and works on the symmetric
    flow F = diag(w) A.  Each step moves mass t from the two largest diagonal
    entries F_ii, F_jj (ties by index) to F_ij and F_ji, with
    t = min(F_jj, S/2 - r) where S is the total diagonal mass and r the
    largest diagonal outside the pair.  Symmetry and row sums hold at every
    step.  The cap on t keeps "no diagonal exceeds the others combined" true
    whenever it held initially, so the diagonal empties completely in that
    case; otherwise only the largest state keeps mass, the minimum possible.
    """
    w = check_weights(w)
    n = w.size
    if n > TJELMELAND_MAX_STATES:
        raise InvalidWeights(f"optimized transitions are capped at {TJELMELAND_MAX_STATES} states")
    F = np.outer(w, w)
    diag = w * w
    for _ in range(4 * n):
        order = np.argsort(-diag, kind="stable")
        i, j = order[0], order[1] if n > 1 else order[0]
        if n < 2 or diag[j] <= 0.0:
            break
        rest = diag[order[2]] if n > 2 else 0.0
        t = min(diag[j], 0.5 * diag.sum() - rest)
        if t <= 0.0:
            break
        diag[i] -= t
        diag[j] = 0.0 if t == diag[j] else diag[j] - t
        F[i, j] += t
        F[j, i] += t
    diag[diag < 1e-300] = 0.0
    np.fill_diagonal(F, diag)
    return TransitionMatrix(_cleanup(_rows_from_flow(F, w)), "tjelmeland")


def transition_matrix(construction: str, ps_or_log_mass) -> TransitionMatrix:
    """Build the named construction from log masses."""
    if construction == "peskun":
        return peskun_matrix(ps_or_log_mass)
    w = stationary_weights(ps_or_log_mass)
    if construction == "barker":
        return barker_matrix(w)
    if construction == "suwa_todo":
        return suwa_todo_matrix(w)
    if construction == "tjelmeland":
        return tjelmeland_optimized_matrix(w)
    raise ValueError(f"unknown transition construction {construction!r}")


def weighted_rejection(A: np.ndarray, w: np.ndarray) -> float:
    return float(np.dot(w, np.diag(A)))


def sample_index(p, u: float) -> int:
    """Index j with u in (gamma_{j-1}, gamma_j], gamma the cumulative sums of p.

    u beyond the last cumulative sum (rounding) maps to the last index with
    positive mass.
    """
    p = np.asarray(p, dtype=float)
    gamma = np.cumsum(p)
    j = int(gamma.searchsorted(u, side="left"))
    if j >= len(p):
        j = int(np.flatnonzero(p > 0)[-1])
    return j
