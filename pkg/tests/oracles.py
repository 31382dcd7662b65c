"""Brute-force reference implementations used only by the tests."""

import itertools

import numpy as np


def _face_patterns(n):
    # every s in {-1, 0, 1}^n
    return np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=n)))


_PATTERNS = {}


def l1_projection_by_faces(z, radius):
    """Project onto the l1 ball by enumerating its faces.

    Each face fixes a sign pattern ``s`` (zero entries pinned to 0) and
    optionally the active constraint ``s.w = radius``.  On each face's affine
    hull the projection is explicit; the answer is the closest candidate
    that actually lies in the ball with consistent signs.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    if radius == 0:
        return np.zeros(n)
    if n not in _PATTERNS:
        _PATTERNS[n] = _face_patterns(n)
    S = _PATTERNS[n]
    support = S != 0
    cnt = support.sum(axis=1)
    # inactive constraint: w = z on the support
    free = np.where(support, z, 0.0)
    # active: w = z - mu s on the support, with s.w = radius
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = ((S * z).sum(axis=1) - radius) / cnt
        act = np.where(support, z - mu[:, None] * S, 0.0)
    act[cnt == 0] = 0.0
    cands = np.vstack([free, act])
    signs = np.vstack([S, S])
    ok = np.all(cands * signs >= -1e-12, axis=1) & (np.abs(cands).sum(axis=1) <= radius * (1 + 1e-12) + 1e-12)
    dist = np.where(ok, ((cands - z) ** 2).sum(axis=1), np.inf)
    return cands[int(np.argmin(dist))]


def best_sparse_residual(z, tau):
    """Smallest ``||z - w||^2`` over every support of size ``tau``."""
    z = np.asarray(z, dtype=float)
    total = float(z @ z)
    if tau >= z.size:
        return 0.0
    best = np.inf
    for sup in itertools.combinations(range(z.size), tau):
        kept = float(np.sum(z[list(sup)] ** 2))
        best = min(best, total - kept)
    return best


def scalar_prox_by_grid(f, y, step, lo=-10.0, hi=10.0, num=200001):
    """argmin_t f(t) + (t - y)^2 / (2 step) on a fine grid."""
    t = np.linspace(lo, hi, num)
    return float(t[np.argmin(f(t) + (t - y) ** 2 / (2 * step))])


def dense_relaxed_matrices(spec):
    """Dense ``A``, ``C`` of a ProblemSpec."""
    return spec.A.to_dense(), spec.C.to_dense()


def random_problem(rng, n=None, d=None, norm="l1", c_kind="identity"):
    """Small random BPDN-type spec with a ball that cuts into the data."""
    from levelset.operators import DenseMap, IdentityMap, OrthonormalMap
    from levelset.prox import BallSpec, Regularizer, ball_norm
    from levelset.solvers import ProblemSpec

    n = int(rng.integers(4, 33)) if n is None else n
    d = int(rng.integers(2, n)) if d is None else d
    A = DenseMap(rng.standard_normal((d, n)) / np.sqrt(n))
    b = rng.standard_normal(d)
    if norm == "l0":
        radius = int(rng.integers(0, d + 1))
    else:
        radius = float(rng.uniform(0.1, 0.9) * ball_norm(b, norm))
    C = {"identity": IdentityMap(n), "dct": OrthonormalMap(n, "dct"), "dense": DenseMap(rng.standard_normal((n + 2, n)) / np.sqrt(n))}[c_kind]
    return ProblemSpec(A, C, b, Regularizer("l1"), BallSpec(norm, radius))


def random_state(rng, spec, eta1, eta2=None):
    from levelset.prox import project_ball
    from levelset.solvers import SplitState

    eta2 = eta1 if eta2 is None else eta2
    w2 = project_ball(rng.standard_normal(spec.d), spec.ball)
    return SplitState(rng.standard_normal(spec.n), rng.standard_normal(spec.c), w2, eta1, eta2)


def stacked_operator(spec, eta1, eta2):
    """Dense S with ``S z = [(C x - w1)/sqrt(eta1); (A x - w2)/sqrt(eta2)]``."""
    A, C = spec.A.to_dense(), spec.C.to_dense()
    c, d = C.shape[0], A.shape[0]
    top = np.hstack([C, -np.eye(c), np.zeros((c, d))]) / np.sqrt(eta1)
    bot = np.hstack([A, np.zeros((d, c)), -np.eye(d)]) / np.sqrt(eta2)
    return np.vstack([top, bot])
