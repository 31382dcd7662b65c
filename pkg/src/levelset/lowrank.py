"""Factorized low-rank completion with a residual-ball constraint.

Solves, by cycling exact block minimizations::

    min_{L, R, W}  (||L||_F^2 + ||R||_F^2) / 2 + ||W - L R^T||_F^2 / (2 eta)
    s.t.           psi(W[obs] - b) <= sigma
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .operators import DimensionError, NumericalError
from .prox import BallSpec, ball_distance, project_ball
from .solvers import IterateTrace

__all__ = [
    "MaskedData",
    "FactorTriple",
    "lowrank_objective",
    "update_L",
    "update_R",
    "update_W",
    "init_factors",
    "solve_lowrank",
    "NU_TOL",
]

NU_TOL = 1e-5


@dataclass
class MaskedData:
    """Observed entries ``b[t] = X[rows[t], cols[t]]`` of an ``shape`` matrix."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    shape: tuple

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64).ravel()
        self.cols = np.asarray(self.cols, dtype=np.int64).ravel()
        self.values = np.asarray(self.values, dtype=float).ravel()
        self.shape = (int(self.shape[0]), int(self.shape[1]))
        if not (self.rows.size == self.cols.size == self.values.size):
            raise DimensionError("rows, cols and values must have equal length")
        n, m = self.shape
        if self.rows.size and (
            self.rows.min() < 0 or self.rows.max() >= n or self.cols.min() < 0 or self.cols.max() >= m
        ):
            raise DimensionError(f"observed index outside a {n}x{m} matrix")
        flat = self.rows * m + self.cols
        if np.unique(flat).size != flat.size:
            raise DimensionError("observed indices must be unique")

    @classmethod
    def from_mask(cls, matrix, mask):
        """Observe ``matrix`` where ``mask`` is true, in row-major order."""
        matrix = np.asarray(matrix, dtype=float)
        r, c = np.nonzero(mask)
        return cls(r, c, matrix[r, c], matrix.shape)

    def __len__(self):
        return self.values.size

    def gather(self, M):
        return M[self.rows, self.cols]

    def mask(self):
        out = np.zeros(self.shape, dtype=bool)
        out[self.rows, self.cols] = True
        return out


@dataclass
class FactorTriple:
    L: np.ndarray
    R: np.ndarray
    W: np.ndarray
    eta: float

    def __post_init__(self):
        n, k = self.L.shape
        m, k2 = self.R.shape
        if k != k2 or self.W.shape != (n, m):
            raise DimensionError(f"inconsistent shapes L{self.L.shape} R{self.R.shape} W{self.W.shape}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def rank(self):
        return self.L.shape[1]

    def product(self):
        return self.L @ self.R.T

    def nu(self):
        """``||L R^T - W||_F^2``."""
        return float(np.sum((self.product() - self.W) ** 2))


def lowrank_objective(triple: FactorTriple) -> float:
    L, R = triple.L, triple.R
    return 0.5 * (float(np.sum(L**2)) + float(np.sum(R**2))) + triple.nu() / (2 * triple.eta)


def _ridge(gram, eta, rhs):
    # rhs @ (eta I + gram)^{-1}, one k x k factor shared by every row.
    k = gram.shape[0]
    try:
        factor = scipy.linalg.cho_factor(gram + eta * np.eye(k))
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"ridge factorization failed: {err}") from err
    return scipy.linalg.cho_solve(factor, rhs.T).T


def update_L(triple: FactorTriple):
    """Exact minimizer over L: ``L = W R (eta I + R^T R)^{-1}``."""
    return _ridge(triple.R.T @ triple.R, triple.eta, triple.W @ triple.R)


def update_R(triple: FactorTriple):
    """Exact minimizer over R given the (already updated) L."""
    return _ridge(triple.L.T @ triple.L, triple.eta, triple.W.T @ triple.L)


def update_W(triple: FactorTriple, data: MaskedData, ball: BallSpec):
    """Closest W to ``L R^T`` whose observed residual lies in ``ball``.

    Unobserved entries copy ``L R^T``; observed entries are
    ``b + proj(L R^T[obs] - b)``.
    """
    W = triple.product()
    v = data.gather(W)
    W[data.rows, data.cols] = data.values + project_ball(v - data.values, ball)
    return W


def init_factors(data: MaskedData, rank: int, eta: float, seed: int = 0) -> FactorTriple:
    """Gaussian factors with entries scaled by ``(||b|| / sqrt(|obs| k))^{1/2}``.

    W starts as ``L R^T`` with the observed entries replaced by the data.
    """
    n, m = data.shape
    rng = np.random.default_rng(seed)
    nobs = max(len(data), 1)
    scale = np.sqrt(np.linalg.norm(data.values) / np.sqrt(nobs * rank))
    L = scale * rng.standard_normal((n, rank))
    R = scale * rng.standard_normal((m, rank))
    W = L @ R.T
    W[data.rows, data.cols] = data.values
    return FactorTriple(L, R, W, eta)


def solve_lowrank(
    data: MaskedData,
    rank: int,
    ball: BallSpec,
    eta: float = 1e-3,
    max_iters: int = 150,
    seed: int = 0,
    continuation: Optional[tuple] = None,
    nu_tol: float = NU_TOL,
    callback: Optional[Callable] = None,
):
    """Block-coordinate descent over (L, R, W).

    Parameters
    ----------
    eta : float
        Final relaxation parameter.
    continuation : (eta_init, factor, every), optional
        Start at ``eta_init`` and multiply by ``factor`` every ``every``
        iterations until ``eta`` is reached, e.g. ``(10.0, 0.5, 25)``.
    nu_tol : float
        Stop once ``eta`` is reached and both ``nu = ||L R^T - W||_F^2`` and
        the squared change of ``L R^T`` over the last cycle fall below it.
        The second test keeps a run from ending while ``L R^T`` happens to
        sit inside a large ball but is still moving.
    callback : callable, optional
        Called as ``callback(iteration, triple)`` after each full cycle.

    Returns
    -------
    (FactorTriple, IterateTrace)
        The trace's ``stationarity`` column holds ``nu`` and ``feasibility``
        the ball distance of the observed residual.
    """
    n, m = data.shape
    if not 1 <= rank <= min(n, m):
        raise ValueError(f"rank must lie in [1, {min(n, m)}]")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not eta > 0:
        raise ValueError("eta must be positive")
    if continuation is not None:
        eta_init, factor, every = continuation
        if not (eta_init >= eta and 0 < factor < 1 and every >= 1):
            raise ValueError("continuation needs eta_init >= eta, factor in (0, 1), every >= 1")
    else:
        eta_init, factor, every = eta, 1.0, 1
    triple = init_factors(data, rank, eta_init, seed)
    trace = IterateTrace()
    t0 = time.perf_counter()
    level = 0
    prev = triple.product()
    for it in range(max_iters):
        if it and it % every == 0 and triple.eta > eta:
            level += 1
            triple.eta = max(triple.eta * factor, eta)
        triple.L = update_L(triple)
        triple.R = update_R(triple)
        triple.W = update_W(triple, data, ball)
        if not (np.all(np.isfinite(triple.L)) and np.all(np.isfinite(triple.R))):
            raise NumericalError(f"non-finite factors at iteration {it}")
        prod = triple.product()
        nu = float(np.sum((prod - triple.W) ** 2))
        moved = float(np.sum((prod - prev) ** 2))
        prev = prod
        feas = ball_distance(data.gather(triple.W) - data.values, ball)
        trace.append(level, it, triple.eta, lowrank_objective(triple), nu, feas, time.perf_counter() - t0)
        if callback is not None:
            callback(it, triple)
        if triple.eta <= eta and nu < nu_tol and moved < nu_tol:
            break
    return triple, trace
