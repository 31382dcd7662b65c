"""Synthetic experiments, SNR metrics and CSV reports."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lowrank import MaskedData, solve_lowrank
from .operators import DenseMap, IdentityMap, OrthonormalMap, RestrictionMap, SpdSolveConfig
from .prox import BallSpec, Norm, Regularizer, ball_distance, ball_norm
from .solvers import ContinuationSchedule, IterateTrace, ProblemSpec, initial_state, objective, solve, stationarity, step_alg1, step_alg2, step_alg3

__all__ = [
    "SNR_CAP",
    "snr_db",
    "SpikeTrainConfig",
    "SpikeTrainProblem",
    "gen_spike_train",
    "Method",
    "ReportRow",
    "RunReport",
    "exact_sigma",
    "BPDN_SCHEDULE",
    "DEFAULT_BPDN_METHODS",
    "bpdn_spec",
    "run_bpdn_study",
    "run_convergence_study",
    "write_convergence_csv",
    "LowRankExperimentConfig",
    "gen_lowrank",
    "run_lowrank_study",
    "ImageConfig",
    "gen_dct_image",
    "run_image_study",
]

SNR_CAP = 300.0
REPORT_HEADER = ("method", "norm", "snr_db", "snr_w_db", "seconds", "status")


def snr_db(truth, estimate) -> float:
    """``20 log10(||truth|| / ||truth - estimate||)``, capped at 300 dB."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {estimate.shape}")
    tn = np.linalg.norm(truth)
    if tn == 0:
        raise ValueError("SNR is undefined for a zero reference")
    err = np.linalg.norm(truth - estimate)
    if err == 0:
        return SNR_CAP
    return float(min(SNR_CAP, 20 * np.log10(tn / err)))


# ---------------------------------------------------------------------------
# Spike-train BPDN


@dataclass(frozen=True)
class SpikeTrainConfig:
    n: int = 512
    m: int = 120
    spike_frac: float = 0.04
    outlier_frac: float = 0.10
    # None means 10x the largest clean observation.
    outlier_magnitude: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.spike_frac < 1 and 0 < self.outlier_frac < 1):
            raise ValueError("spike_frac and outlier_frac must lie in (0, 1)")
        if not self.m < self.n:
            raise ValueError("need m < n")


@dataclass
class SpikeTrainProblem:
    A: DenseMap
    x_true: np.ndarray
    b: np.ndarray
    outlier_support: np.ndarray
    noise: np.ndarray


def gen_spike_train(cfg: SpikeTrainConfig) -> SpikeTrainProblem:
    """Gaussian A, a +-1 spike train and sparse large outliers on b."""
    rng = np.random.default_rng(cfg.seed)
    A = rng.standard_normal((cfg.m, cfg.n))
    x = np.zeros(cfg.n)
    k = int(round(cfg.spike_frac * cfg.n))
    support = rng.choice(cfg.n, k, replace=False)
    x[support] = rng.choice([-1.0, 1.0], k)
    clean = A @ x
    mag = cfg.outlier_magnitude
    if mag is None:
        mag = 10.0 * float(np.max(np.abs(clean))) if k else 10.0
    no = int(round(cfg.outlier_frac * cfg.m))
    osup = np.sort(rng.choice(cfg.m, no, replace=False))
    noise = np.zeros(cfg.m)
    noise[osup] = mag * rng.choice([-1.0, 1.0], no)
    return SpikeTrainProblem(DenseMap(A), x, clean + noise, osup, noise)


def exact_sigma(noise, norm) -> float:
    """Noise budget that makes the true signal exactly feasible."""
    return float(ball_norm(noise, norm))


@dataclass(frozen=True)
class Method:
    """A solver run: algorithm ``alg1``/``alg2``/``alg3`` with a residual ball.

    ``cg_iters`` switches the x solve to CG with that budget; ``accelerate``
    turns on momentum with restart (alg2/alg3 only).
    """

    algorithm: str = "alg3"
    norm: str = "l1"
    cg_iters: Optional[int] = None
    accelerate: bool = False

    @property
    def label(self):
        tag = self.algorithm if self.cg_iters is None else f"{self.algorithm}-cg{self.cg_iters}"
        if self.accelerate:
            tag += "-acc"
        return f"{tag}-{Norm(self.norm).value}"

    def ls_config(self):
        return None if self.cg_iters is None else SpdSolveConfig.cg(self.cg_iters)


DEFAULT_BPDN_METHODS = tuple(Method("alg3", nm, accelerate=True) for nm in ("l2", "l1", "linf", "l0"))
BPDN_SCHEDULE = ContinuationSchedule(eta_init=0.1, shrink=0.6, eta_floor=1e-5, inner_iters=500)


@dataclass
class ReportRow:
    method: str
    norm: str
    snr_db: float
    snr_w_db: float = float("nan")
    seconds: float = 0.0
    status: str = "ok"


@dataclass
class RunReport:
    rows: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def by_norm(self):
        return {r.norm: r for r in self.rows}

    @property
    def failed(self):
        return [r for r in self.rows if r.status != "ok"]

    def to_csv(self, path, timing: bool = True):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REPORT_HEADER)
            for r in self.rows:
                w.writerow(
                    [r.method, r.norm, f"{r.snr_db:.10g}", f"{r.snr_w_db:.10g}", f"{r.seconds:.4f}" if timing else "", r.status]
                )


def _normalized(problem: SpikeTrainProblem):
    # Dividing A, b and sigma by ||A||_2 leaves the constrained problem
    # unchanged but balances the two penalty blocks of the relaxation.
    s = float(np.linalg.norm(problem.A.matrix, 2))
    return DenseMap(problem.A.matrix / s), problem.b / s, s


def bpdn_spec(problem: SpikeTrainProblem, norm, sigma_policy="exact", normalize=True):
    """ProblemSpec for one ball: l1 regularizer, C = I, radius from ``sigma_policy``."""
    norm = Norm(norm)
    if normalize:
        A, b, scale = _normalized(problem)
    else:
        A, b, scale = problem.A, problem.b, 1.0
    if norm is Norm.L0:
        radius = float(problem.outlier_support.size)
    elif sigma_policy == "exact":
        radius = exact_sigma(problem.noise, norm) / scale
    else:
        radius = float(sigma_policy) / scale
    return ProblemSpec(A, IdentityMap(problem.x_true.size), b, Regularizer("l1"), BallSpec(norm, radius))


def run_bpdn_study(
    cfg: SpikeTrainConfig = SpikeTrainConfig(),
    methods: Sequence[Method] = DEFAULT_BPDN_METHODS,
    sigma_policy="exact",
    schedule: ContinuationSchedule = BPDN_SCHEDULE,
    normalize: bool = True,
):
    """Solve one spike-train instance with each method; SNR is against x_true.

    ``sigma_policy`` is ``"exact"`` (the true noise norm) or a number used
    for every non-l0 ball; the l0 radius is always the outlier count.
    Returns ``(RunReport, {label: IterateTrace})``; a failing row is marked
    and the others still run.
    """
    if not methods:
        raise ValueError("methods must be nonempty")
    problem = gen_spike_train(cfg)
    report, traces = RunReport(), {}
    for meth in methods:
        t0 = time.perf_counter()
        try:
            spec = bpdn_spec(problem, meth.norm, sigma_policy, normalize)
            state, trace = solve(
                spec, schedule, meth.algorithm, ls=meth.ls_config(), seed=cfg.seed, accelerate=meth.accelerate
            )
            row = ReportRow(meth.label, Norm(meth.norm).value, snr_db(problem.x_true, state.x), snr_db(problem.x_true, state.w1))
            traces[meth.label] = trace
        except Exception as err:  # noqa: BLE001  per-row isolation
            row = ReportRow(meth.label, Norm(meth.norm).value, float("nan"), status=f"error: {type(err).__name__}: {err}")
        row.seconds = time.perf_counter() - t0
        report.rows.append(row)
    return report, traces


def run_convergence_study(
    cg_budgets: Sequence[int] = (1, 5, 20),
    iters: int = 100,
    cfg: SpikeTrainConfig = SpikeTrainConfig(),
    eta: float = 1e-4,
):
    """Objective decay at fixed ``eta1 = eta2 = eta`` for l1 / l1 BPDN.

    Variants: joint prox-gradient (``alg1``), exact block-coordinate descent
    (``alg3``) and block-coordinate descent with a warm-started CG x solve
    of each budget (``alg2-cg<k>``, i.e. Alg. 2 with ``beta = eta``), all
    from the same starting point.  Returns ``{variant: IterateTrace}``;
    row 0 of each trace is the starting point.
    """
    if not cg_budgets:
        raise ValueError("cg_budgets must be nonempty")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    problem = gen_spike_train(cfg)
    spec = bpdn_spec(problem, "l1")
    z0 = initial_state(spec, eta)
    variants = {"alg1": lambda z: step_alg1(spec, z), "alg3": lambda z: step_alg3(spec, z)}
    for k in cg_budgets:
        variants[f"alg2-cg{k}"] = lambda z, k=k: step_alg2(spec, z, ls=SpdSolveConfig.cg(k))
    out = {}
    for name, step in variants.items():
        z = z0.copy()
        trace = IterateTrace()
        t0 = time.perf_counter()
        feas = lambda st: ball_distance(spec.A.apply(st.x) - spec.b, spec.ball)  # noqa: E731
        trace.append(0, 0, eta, objective(spec, z), 0.0, feas(z), 0.0)
        for it in range(1, iters + 1):
            nxt = step(z)
            stat = stationarity(spec, z, nxt)
            z = nxt
            trace.append(0, it, eta, objective(spec, z), stat, feas(z), time.perf_counter() - t0)
        out[name] = trace
    return out


def write_convergence_csv(path, traces: dict):
    """Wide table: one objective column per variant."""
    names = list(traces)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter"] + names)
        for i in range(len(traces[names[0]])):
            w.writerow([i] + [repr(float(traces[nm].objective[i])) for nm in names])


# ---------------------------------------------------------------------------
# Low-rank completion / denoising


@dataclass(frozen=True)
class LowRankExperimentConfig:
    n: int = 40
    m: int = 40
    true_rank: int = 3
    k: int = 5
    missing_frac: float = 0.5
    # None means 1% of all entries (only for modes with noise).
    outlier_count: Optional[int] = None
    outlier_scale: float = 10.0
    mode: str = "both"
    eta: float = 1e-3
    # continuation: start at eta_init, halve every eta_every iterations
    eta_init: float = 10.0
    eta_every: int = 25
    max_iters: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("denoise", "interpolate", "both"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.true_rank <= self.k <= min(self.n, self.m):
            raise ValueError("need true_rank <= k <= min(n, m)")
        if not 0 <= self.missing_frac < 1:
            raise ValueError("missing_frac must lie in [0, 1)")


def gen_lowrank(cfg: LowRankExperimentConfig):
    """Ground truth, observed data and the added noise (on observed entries).

    ``denoise`` observes everything, ``interpolate`` adds no noise.
    Outliers are +-``outlier_scale * max|X|`` on randomly chosen observed
    entries.
    """
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((cfg.n, cfg.true_rank)) @ rng.standard_normal((cfg.m, cfg.true_rank)).T
    nm = cfg.n * cfg.m
    missing = 0.0 if cfg.mode == "denoise" else cfg.missing_frac
    n_obs = nm - int(round(missing * nm))
    flat = np.sort(rng.choice(nm, n_obs, replace=False))
    data = MaskedData(flat // cfg.m, flat % cfg.m, X.ravel()[flat], X.shape)
    noise = np.zeros(n_obs)
    if cfg.mode != "interpolate":
        count = cfg.outlier_count if cfg.outlier_count is not None else int(round(0.01 * nm))
        where = rng.choice(n_obs, count, replace=False)
        noise[where] = cfg.outlier_scale * np.abs(X).max() * rng.choice([-1.0, 1.0], count)
    data.values = data.values + noise
    return X, data, noise


def run_lowrank_study(cfg: LowRankExperimentConfig = LowRankExperimentConfig(), norms=("l2", "l1", "linf", "l0"), callback=None):
    """Complete/denoise one synthetic matrix with each residual ball.

    The radius is the exact noise norm (outlier count for l0).  SNR is
    reported for ``L R^T`` and for ``W`` against the ground truth.
    """
    if not norms:
        raise ValueError("norms must be nonempty")
    X, data, noise = gen_lowrank(cfg)
    report, traces = RunReport(), {}
    for norm in norms:
        norm = Norm(norm)
        label = f"alg4-{norm.value}"
        t0 = time.perf_counter()
        try:
            radius = float(np.count_nonzero(noise)) if norm is Norm.L0 else exact_sigma(noise, norm)
            cb = None if callback is None else (lambda it, tr, label=label: callback(label, it, tr))
            triple, trace = solve_lowrank(
                data,
                cfg.k,
                BallSpec(norm, radius),
                eta=cfg.eta,
                max_iters=cfg.max_iters,
                seed=cfg.seed,
                continuation=(cfg.eta_init, 0.5, cfg.eta_every),
                callback=cb,
            )
            row = ReportRow(label, norm.value, snr_db(X, triple.product()), snr_db(X, triple.W))
            traces[label] = trace
        except Exception as err:  # noqa: BLE001
            row = ReportRow(label, norm.value, float("nan"), status=f"error: {type(err).__name__}: {err}")
        row.seconds = time.perf_counter() - t0
        report.rows.append(row)
    return report, traces


# ---------------------------------------------------------------------------
# 2-D DCT stand-in for the transform-domain interpolation experiment


@dataclass(frozen=True)
class ImageConfig:
    rows: int = 32
    cols: int = 32
    coef_frac: float = 0.05
    missing_frac: float = 0.5
    outlier_frac: float = 0.01
    outlier_scale: float = 4.0
    seed: int = 0


def gen_dct_image(cfg: ImageConfig):
    """Image with sparse 2-D DCT coefficients, masked, with sparse outliers.

    Returns ``(C, A, image, b, noise)`` where ``C`` is the orthonormal 2-D DCT
    and ``A`` restricts the flattened image to the observed pixels.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.rows * cfg.cols
    C = OrthonormalMap(n, "dct", grid=(cfg.rows, cfg.cols))
    coef = np.zeros(n)
    k = max(1, int(round(cfg.coef_frac * n)))
    coef[rng.choice(n, k, replace=False)] = rng.standard_normal(k)
    image = C.adjoint(coef)
    observed = np.sort(rng.choice(n, n - int(round(cfg.missing_frac * n)), replace=False))
    A = RestrictionMap(observed, n)
    noise = np.zeros(observed.size)
    count = int(round(cfg.outlier_frac * observed.size))
    if count:
        noise[rng.choice(observed.size, count, replace=False)] = cfg.outlier_scale * np.abs(image).max() * rng.choice([-1.0, 1.0], count)
    return C, A, image, A.apply(image) + noise, noise


def run_image_study(cfg: ImageConfig = ImageConfig(), norms=("l2", "l1", "linf", "l0"), schedule: ContinuationSchedule = BPDN_SCHEDULE):
    """Sparse-in-DCT interpolation and denoising; x is the image itself.

    The relaxation uses ``phi(C x)`` with C the 2-D DCT and a restriction A,
    so every x update takes the diagonal fast path.
    """
    C, A, image, b, noise = gen_dct_image(cfg)
    report, traces = RunReport(), {}
    for norm in norms:
        norm = Norm(norm)
        label = f"alg3-{norm.value}"
        t0 = time.perf_counter()
        try:
            radius = float(np.count_nonzero(noise)) if norm is Norm.L0 else exact_sigma(noise, norm)
            spec = ProblemSpec(A, C, b, Regularizer("l1"), BallSpec(norm, radius))
            state, trace = solve(spec, schedule, "alg3", seed=cfg.seed, accelerate=True)
            row = ReportRow(label, norm.value, snr_db(image, state.x), snr_db(C.apply(image), state.w1))
            traces[label] = trace
        except Exception as err:  # noqa: BLE001
            row = ReportRow(label, norm.value, float("nan"), status=f"error: {type(err).__name__}: {err}")
        row.seconds = time.perf_counter() - t0
        report.rows.append(row)
    return report, traces
