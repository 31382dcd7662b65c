"""Relaxed level-set problems and the three splitting schemes that solve them.

The relaxed problem over ``z = (x, w1, w2)`` is::

    phi(w1) + ||C x - w1||^2 / (2 eta1) + ||w2 - A x + b||^2 / (2 eta2)
    subject to psi(w2) <= sigma

and the original constrained problem is recovered by driving both etas to
zero with warm starts.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .operators import DimensionError, LinearMap, NumericalError, SpdSolveConfig, solve_spd, WoodburySolver
from .prox import BallSpec, Regularizer, ball_distance, is_feasible, project_ball

__all__ = [
    "ProblemSpec",
    "SplitState",
    "ContinuationSchedule",
    "IterateTrace",
    "NormalSolver",
    "TRACE_HEADER",
    "objective",
    "value_function",
    "value_gradient",
    "step_alg1",
    "step_alg2",
    "step_alg3",
    "stationarity",
    "rate_constant",
    "initial_state",
    "solve",
]

TRACE_HEADER = ("level", "iter", "eta", "objective", "stationarity", "feasibility", "seconds")
ALGORITHMS = ("alg1", "alg2", "alg3")


@dataclass
class ProblemSpec:
    """``min phi(C x)  s.t.  psi(A x - b) <= sigma``."""

    A: LinearMap
    C: LinearMap
    b: np.ndarray
    regularizer: Regularizer
    ball: BallSpec

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if self.A.cols != self.C.cols:
            raise DimensionError(f"A has {self.A.cols} columns but C has {self.C.cols}")
        if self.b.shape != (self.A.rows,):
            raise DimensionError(f"b has shape {self.b.shape}, A has {self.A.rows} rows")

    @property
    def n(self):
        return self.A.cols

    @property
    def c(self):
        return self.C.rows

    @property
    def d(self):
        return self.A.rows


@dataclass
class SplitState:
    x: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    eta1: float
    eta2: float

    def __post_init__(self):
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("eta1 and eta2 must be positive")

    def copy(self):
        return SplitState(self.x.copy(), self.w1.copy(), self.w2.copy(), self.eta1, self.eta2)

    def with_eta(self, eta1, eta2=None):
        return replace(self.copy(), eta1=eta1, eta2=eta1 if eta2 is None else eta2)

    def stacked(self):
        return np.concatenate([self.x, self.w1, self.w2])


@dataclass(frozen=True)
class ContinuationSchedule:
    eta_init: float = 1.0
    shrink: float = 0.5
    eta_floor: float = 1e-6
    inner_iters: int = 100
    warm_start: bool = True

    def __post_init__(self):
        if not (0 < self.eta_floor < self.eta_init):
            raise ValueError("need 0 < eta_floor < eta_init")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")

    def levels(self):
        """Eta values visited, ending exactly at ``eta_floor``."""
        etas = []
        eta = self.eta_init
        while eta > self.eta_floor * (1 + 1e-12):
            etas.append(eta)
            eta *= self.shrink
        etas.append(self.eta_floor)
        return etas


@dataclass
class IterateTrace:
    level: list = field(default_factory=list)
    iteration: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    stationarity: list = field(default_factory=list)
    feasibility: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    consistency: float = math.nan

    def append(self, level, iteration, eta, obj, stat, feas, seconds):
        self.level.append(level)
        self.iteration.append(iteration)
        self.eta.append(eta)
        self.objective.append(obj)
        self.stationarity.append(stat)
        self.feasibility.append(feas)
        self.seconds.append(seconds)

    def __len__(self):
        return len(self.objective)

    def rows(self):
        return zip(self.level, self.iteration, self.eta, self.objective, self.stationarity, self.feasibility, self.seconds)

    def to_csv(self, path, timing: bool = True):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_HEADER)
            for row in self.rows():
                row = list(row)
                if not timing:
                    row[-1] = 0.0
                w.writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])


def _check_state(spec: ProblemSpec, state: SplitState):
    for name, arr, size in (("x", state.x, spec.n), ("w1", state.w1, spec.c), ("w2", state.w2, spec.d)):
        if np.shape(arr) != (size,):
            raise DimensionError(f"state.{name} has shape {np.shape(arr)}, expected ({size},)")


def _finite(state: SplitState, what: str) -> SplitState:
    # a sum is non-finite iff some entry is (barring overflow, which is also a failure)
    if not math.isfinite(state.x.sum() + state.w1.sum() + state.w2.sum()):
        raise NumericalError(f"non-finite iterate in {what}")
    return state


def objective(spec: ProblemSpec, state: SplitState) -> float:
    """Relaxed objective; ``inf`` when ``w2`` lies outside the ball."""
    _check_state(spec, state)
    if not is_feasible(state.w2, spec.ball):
        return math.inf
    r1 = spec.C.apply(state.x) - state.w1
    r2 = state.w2 - spec.A.apply(state.x) + spec.b
    return (
        spec.regularizer.value(state.w1)
        + float(r1 @ r1) / (2 * state.eta1)
        + float(r2 @ r2) / (2 * state.eta2)
    )


def rate_constant(spec: ProblemSpec, eta1: float, eta2: float) -> float:
    """Upper bound on the squared norm of the stacked least-squares operator."""
    if eta1 <= 0 or eta2 <= 0:
        raise ValueError("eta1 and eta2 must be positive")
    return (spec.c + spec.C.frobenius_norm_sq) / eta1 + (spec.d + spec.A.frobenius_norm_sq) / eta2


class NormalSolver:
    """Solves ``H x = rhs`` with ``H = C^T C / eta1 + A^T A / eta2``.

    ``"auto"`` chooses the diagonal path when both Gram matrices are
    diagonal, Woodbury when ``C^T C = I`` and ``A`` is wide, and a dense
    Cholesky factor of ``H`` otherwise.
    """

    def __init__(self, spec: ProblemSpec, eta1: float, eta2: float, config: Optional[SpdSolveConfig] = None):
        self.spec = spec
        self.eta1 = float(eta1)
        self.eta2 = float(eta2)
        self.config = config or SpdSolveConfig()
        A, C = spec.A, spec.C
        method = self.config.method
        if method == "auto":
            if C.gram_diagonal() is not None and A.gram_diagonal() is not None:
                method = "diagonal"
            elif C.is_isometry and A.rows < A.cols:
                method = "woodbury"
            else:
                method = "dense"
        self.method = method
        self._fused = None
        if method == "diagonal":
            gc, ga = C.gram_diagonal(), A.gram_diagonal()
            if gc is None or ga is None:
                raise ValueError("diagonal solve needs diagonal C^T C and A^T A")
            self.operator = gc / self.eta1 + ga / self.eta2
        elif method == "woodbury":
            if not C.is_isometry:
                raise ValueError("Woodbury path needs C^T C = I")
            # H = (eta2 I + eta1 A^T A) / (eta1 eta2)
            self.operator = A.cached(("woodbury", self.eta1, self.eta2), lambda: WoodburySolver(A, self.eta1, self.eta2))
        elif method == "dense":
            self.operator = A.cached(("H", id(C), self.eta1, self.eta2), self._dense_h)
        else:
            self.operator = self.apply

    def _dense_h(self):
        a = self.spec.A.to_dense()
        c = self.spec.C.to_dense()
        return c.T @ c / self.eta1 + a.T @ a / self.eta2

    def apply(self, x):
        A, C = self.spec.A, self.spec.C
        return C.adjoint(C.apply(x)) / self.eta1 + A.adjoint(A.apply(x)) / self.eta2

    def rhs(self, w1, w2):
        return self.spec.C.adjoint(w1) / self.eta1 + self.spec.A.adjoint(self.spec.b + w2) / self.eta2

    def solve(self, rhs, x0=None):
        cfg = replace(self.config, method=self.method)
        x, it = solve_spd(self.operator, rhs, cfg, x0)
        if self.method == "woodbury":
            x = x * (self.eta1 * self.eta2)
        return x, it

    def minimize(self, w1, w2, x0=None):
        """The x that minimizes the relaxed objective for fixed (w1, w2)."""
        return self.solve(self.rhs(w1, w2), x0)[0]

    def minimize_with_image(self, w1, w2, x0=None):
        """Like ``minimize`` but also returns ``A x``.

        On the Woodbury path both come from the d x d Gram matrix,
        with ``kappa = eta1 / eta2``, ``u = b + w2``, ``a = A C^T w1``::

            q = kappa u - (I/eta1 + G/eta2)^{-1} (a + kappa G u) / eta2
            x = C^T w1 + A^T q,   A x = a + G q
        """
        A = self.spec.A
        if self.method != "woodbury" or A.rows == 0:
            x = self.minimize(w1, w2, x0)
            return x, A.apply(x)
        if self._fused is None:
            wb = self.operator
            kappa = self.eta1 / self.eta2
            p = wb.inner_solve(np.eye(A.rows)) / self.eta2
            self._fused = (wb.gram, kappa, p, kappa * (p @ wb.gram))
        gram, kappa, p, pg = self._fused
        c1 = self.spec.C.adjoint(w1)
        a = A.apply(c1)
        u = self.spec.b + w2
        q = kappa * u - p @ a - pg @ u
        return c1 + A.adjoint(q), a + gram @ q


def value_function(spec: ProblemSpec, w1, w2, eta1, eta2, ls: Optional[SpdSolveConfig] = None) -> float:
    """``min_x ||C x - w1||^2/(2 eta1) + ||w2 - A x + b||^2/(2 eta2)``."""
    x = NormalSolver(spec, eta1, eta2, ls).minimize(w1, w2)
    r1 = spec.C.apply(x) - w1
    r2 = w2 - spec.A.apply(x) + spec.b
    return float(r1 @ r1) / (2 * eta1) + float(r2 @ r2) / (2 * eta2)


def value_gradient(spec: ProblemSpec, w1, w2, eta1, eta2, ls: Optional[SpdSolveConfig] = None):
    """Gradient of :func:`value_function` in ``(w1, w2)`` via the inner minimizer.

    Returns ``(g1, g2, x)``.
    """
    x = NormalSolver(spec, eta1, eta2, ls).minimize(w1, w2)
    g1 = (w1 - spec.C.apply(x)) / eta1
    g2 = (w2 - spec.A.apply(x) + spec.b) / eta2
    return g1, g2, x


def _prepare_alpha(spec, state, alpha):
    if alpha is None:
        alpha = 1.0 / rate_constant(spec, state.eta1, state.eta2)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return alpha


def _alg1(spec, state, alpha, cx, r):
    # r is A x - b at the incoming iterate; returns (state, C x+, A x+ - b).
    e1, e2 = state.eta1, state.eta2
    r1 = cx - state.w1
    r2 = r - state.w2
    x = state.x - alpha * (spec.C.adjoint(r1) / e1 + spec.A.adjoint(r2) / e2)
    w1 = spec.regularizer.prox(state.w1 + (alpha / e1) * r1, alpha)
    w2 = project_ball(state.w2 + (alpha / e2) * r2, spec.ball)
    return SplitState(x, w1, w2, e1, e2), spec.C.apply(x), spec.A.apply(x) - spec.b


def _alg2(spec, state, beta, solver):
    e1, e2 = state.eta1, state.eta2
    x, ax = solver.minimize_with_image(state.w1, state.w2, state.x)
    cx = spec.C.apply(x)
    r = ax - spec.b
    w1 = spec.regularizer.prox(state.w1 - (beta / e1) * (state.w1 - cx), beta)
    w2 = project_ball(state.w2 - (beta / e2) * (state.w2 - r), spec.ball)
    return SplitState(x, w1, w2, e1, e2), cx, r


def _alg3(spec, state, solver):
    e1, e2 = state.eta1, state.eta2
    x, ax = solver.minimize_with_image(state.w1, state.w2, state.x)
    cx = spec.C.apply(x)
    r = ax - spec.b
    w1 = spec.regularizer.prox(cx, e1)
    w2 = project_ball(r, spec.ball)
    return SplitState(x, w1, w2, e1, e2), cx, r


def _check_beta(state, beta):
    if beta is None:
        beta = min(state.eta1, state.eta2)
    if not 0 < beta <= min(state.eta1, state.eta2) * (1 + 1e-12):
        raise ValueError(f"beta={beta} must lie in (0, min(eta1, eta2)]")
    return beta


def step_alg1(spec: ProblemSpec, state: SplitState, alpha: Optional[float] = None) -> SplitState:
    """One prox-gradient step on the joint variable ``z``.

    All three gradient blocks are evaluated at the incoming iterate, then
    ``w1`` goes through ``prox_{alpha phi}`` and ``w2`` through the ball
    projection.  ``alpha`` defaults to ``1 / rate_constant``.
    """
    _check_state(spec, state)
    alpha = _prepare_alpha(spec, state, alpha)
    nxt, _, _ = _alg1(spec, state, alpha, spec.C.apply(state.x), spec.A.apply(state.x) - spec.b)
    return _finite(nxt, "step_alg1")


def step_alg2(
    spec: ProblemSpec,
    state: SplitState,
    beta: Optional[float] = None,
    ls: Optional[SpdSolveConfig] = None,
) -> SplitState:
    """Value-function prox-gradient step with step ``beta <= min(eta1, eta2)``.

    The x update solves the normal equations (exactly, or inexactly with a
    CG budget warm-started from ``state.x``); w1 and w2 take a prox-gradient
    step on the value function whose gradient is read off that x.
    """
    _check_state(spec, state)
    beta = _check_beta(state, beta)
    nxt, _, _ = _alg2(spec, state, beta, NormalSolver(spec, state.eta1, state.eta2, ls))
    return _finite(nxt, "step_alg2")


def step_alg3(spec: ProblemSpec, state: SplitState, ls: Optional[SpdSolveConfig] = None) -> SplitState:
    """Block-coordinate descent: exact minimization in x, then w1, then w2."""
    _check_state(spec, state)
    nxt, _, _ = _alg3(spec, state, NormalSolver(spec, state.eta1, state.eta2, ls))
    return _finite(nxt, "step_alg3")


def _stationarity_parts(spec, dz, dcx, dr, L, eta1, eta2):
    # (L I - S^T S) dz, with S dz assembled from the already-known C dx, A dx.
    n, c = spec.n, spec.c
    q1, q2 = math.sqrt(eta1), math.sqrt(eta2)
    s1 = (dcx - dz[n : n + c]) / q1
    s2 = (dr - dz[n + c :]) / q2
    gram = np.concatenate([spec.C.adjoint(s1) / q1 + spec.A.adjoint(s2) / q2, -s1 / q1, -s2 / q2])
    return float(np.linalg.norm(L * dz - gram))


def stationarity(spec: ProblemSpec, prev: SplitState, nxt: SplitState) -> float:
    """``||(L I - S^T S)(z_prev - z_next)||`` with ``L = rate_constant``.

    ``S`` is the stacked least-squares operator of the relaxed problem in
    ``z = (x, w1, w2)``.
    """
    dz = prev.stacked() - nxt.stacked()
    if not np.any(dz):
        return 0.0
    dx = dz[: spec.n]
    L = rate_constant(spec, prev.eta1, prev.eta2)
    return _stationarity_parts(spec, dz, spec.C.apply(dx), spec.A.apply(dx), L, prev.eta1, prev.eta2)


def _objective_from(spec, state, cx, r):
    if not is_feasible(state.w2, spec.ball):
        return math.inf
    r1 = cx - state.w1
    r2 = state.w2 - r
    return spec.regularizer.value(state.w1) + float(r1 @ r1) / (2 * state.eta1) + float(r2 @ r2) / (2 * state.eta2)


def initial_state(spec: ProblemSpec, eta1: float, eta2: Optional[float] = None, x0=None) -> SplitState:
    """Feasible starting point.

    Without ``x0`` this is ``t * A^T b`` with ``t`` the least-squares scale
    along that direction.
    """
    eta2 = eta1 if eta2 is None else eta2
    if x0 is None:
        g = spec.A.adjoint(spec.b)
        ag = spec.A.apply(g)
        denom = float(ag @ ag)
        x0 = g * (float(ag @ spec.b) / denom) if denom > 0 else np.zeros(spec.n)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.n,):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({spec.n},)")
    w1 = spec.C.apply(x0)
    w2 = project_ball(spec.A.apply(x0) - spec.b, spec.ball)
    return SplitState(x0.copy(), w1, w2, eta1, eta2)


def solve(
    spec: ProblemSpec,
    schedule: ContinuationSchedule = ContinuationSchedule(),
    algorithm: str = "alg3",
    ls: Optional[SpdSolveConfig] = None,
    x0=None,
    seed: int = 0,
    stop_tol: float = 1e-9,
    accelerate: bool = False,
):
    """Run ``algorithm`` under eta-continuation.

    Parameters
    ----------
    algorithm : {"alg1", "alg2", "alg3"}
        Joint prox-gradient, value-function prox-gradient (``ls`` controls
        the x solve, e.g. a CG budget) or block-coordinate descent.
    x0 : array or SplitState, optional
        Starting point; a SplitState is used as is (its etas are replaced
        by the first level).
    seed : int
        Seeds the Frobenius-norm estimate of matrix-free maps.
    stop_tol : float
        A level ends early once stationarity drops below
        ``stop_tol * C * (1 + ||z0||)`` with ``C = rate_constant``; since
        ``||v|| <= C ||dz||`` this is a relative-step test.
    accelerate : bool
        For alg2/alg3, apply each step to the extrapolated point
        ``w_k + theta_k (w_k - w_{k-1})`` (Nesterov weights) and fall back
        to the plain step, resetting the momentum, whenever that would
        raise the objective.  Every accepted iterate is therefore still
        monotone in ``p``.

    Returns
    -------
    (SplitState, IterateTrace)
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    if accelerate and algorithm == "alg1":
        raise ValueError("accelerate applies to alg2 and alg3 only")
    for op in (spec.A, spec.C):
        if not op.frobenius_exact and op._fro is None:
            op._fro = op._frobenius(seed)
    levels = schedule.levels()
    if isinstance(x0, SplitState):
        state = x0.with_eta(levels[0])
    else:
        state = initial_state(spec, levels[0], x0=x0)
    trace = IterateTrace()
    t0 = time.perf_counter()
    for lvl, eta in enumerate(levels):
        state = state.with_eta(eta) if schedule.warm_start or lvl == 0 else initial_state(spec, eta, x0=x0)
        cx = spec.C.apply(state.x)
        r = spec.A.apply(state.x) - spec.b
        p0 = _objective_from(spec, state, cx, r)

        L = rate_constant(spec, eta, eta)
        threshold = stop_tol * L * (1 + float(np.linalg.norm(state.stacked())))
        solver = NormalSolver(spec, eta, eta, ls) if algorithm != "alg1" else None
        p_cur = p0
        t_mom = 1.0
        prev_w = (state.w1, state.w2)

        def step(st):
            if algorithm == "alg1":
                return _alg1(spec, st, 1.0 / L, cx, r)
            if algorithm == "alg2":
                return _alg2(spec, st, eta, solver)
            return _alg3(spec, st, solver)

        for it in range(schedule.inner_iters):
            try:
                if accelerate:
                    t_next = 0.5 * (1 + np.sqrt(1 + 4 * t_mom * t_mom))
                    theta = (t_mom - 1) / t_next
                    probe = SplitState(
                        state.x,
                        state.w1 + theta * (state.w1 - prev_w[0]),
                        state.w2 + theta * (state.w2 - prev_w[1]),
                        eta,
                        eta,
                    )
                    nxt, ncx, nr = step(probe)
                    p_next = _objective_from(spec, nxt, ncx, nr)
                    if p_next > p_cur:
                        t_next = 1.0
                        nxt, ncx, nr = step(state)
                        p_next = _objective_from(spec, nxt, ncx, nr)
                    t_mom = t_next
                    prev_w = (state.w1, state.w2)
                else:
                    nxt, ncx, nr = step(state)
                    p_next = None
                _finite(nxt, algorithm)
            except NumericalError as err:
                raise NumericalError(f"level {lvl} (eta={eta:g}), iteration {it}: {err}") from err
            dz = state.stacked() - nxt.stacked()
            stat = _stationarity_parts(spec, dz, cx - ncx, r - nr, L, eta, eta) if np.any(dz) else 0.0
            state, cx, r = nxt, ncx, nr
            # alg3 sets w2 = proj(r) already
            feas = float(np.linalg.norm(r - state.w2)) if algorithm == "alg3" else ball_distance(r, spec.ball)
            p_cur = _objective_from(spec, state, cx, r) if p_next is None else p_next
            trace.append(lvl, it, eta, p_cur, stat, feas, time.perf_counter() - t0)
            if stat <= threshold:
                break
    trace.consistency = float(np.linalg.norm(cx - state.w1))
    return state, trace
