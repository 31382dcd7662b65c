"""Matrix-free linear maps and solvers for the normal equations.

Every map exposes ``apply`` / ``adjoint`` over 1-D float arrays.  Dense
storage is one kind among several; solvers only rely on products.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft
import scipy.linalg

__all__ = [
    "DimensionError",
    "NumericalError",
    "LinearMap",
    "DenseMap",
    "RestrictionMap",
    "IdentityMap",
    "OrthonormalMap",
    "ScaledMap",
    "CompositeMap",
    "adjoint_test",
    "SpdSolveConfig",
    "CG_BUDGETS",
    "solve_spd",
    "conjugate_gradient",
    "WoodburySolver",
    "woodbury_solve",
]

CG_BUDGETS = (1, 5, 20)
FRO_PROBES = 20


class DimensionError(ValueError):
    """Raised when array shapes disagree with a map's dimensions."""


class NumericalError(ArithmeticError):
    """Raised on non-finite values or failed factorizations."""


class LinearMap:
    """Base class: a real linear map ``R^cols -> R^rows`` with adjoint.

    Subclasses implement ``_apply`` and ``_adjoint``.  ``frobenius_norm_sq``
    is exact when ``frobenius_exact`` is true, otherwise it is a stochastic
    upper estimate (twice a Hutchinson estimate).
    """

    name = "LinearMap"

    def __init__(self, rows: int, cols: int):
        self.rows = int(rows)
        self.cols = int(cols)
        self._fro: Optional[float] = None
        self._cache: "OrderedDict[tuple, object]" = OrderedDict()

    def __repr__(self):
        return f"{self.name}({self.rows}x{self.cols})"

    @property
    def shape(self):
        return (self.rows, self.cols)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.cols,):
            raise DimensionError(f"{self!r}.apply expected length {self.cols}, got shape {x.shape}")
        return self._apply(x)

    def adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.rows,):
            raise DimensionError(f"{self!r}.adjoint expected length {self.rows}, got shape {y.shape}")
        return self._adjoint(y)

    __call__ = apply

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    @property
    def is_isometry(self) -> bool:
        """True when ``adjoint(apply(x)) == x`` for all x."""
        return False

    def gram_diagonal(self) -> Optional[np.ndarray]:
        """Diagonal of ``A^T A`` if that matrix is diagonal, else None."""
        return None

    @property
    def frobenius_exact(self) -> bool:
        return False

    @property
    def frobenius_norm_sq(self) -> float:
        if self._fro is None:
            self._fro = self._frobenius()
        return self._fro

    def _frobenius(self, seed: int = 0) -> float:
        # Rademacher probes; the 2x margin makes this a safe upper value.
        rng = np.random.default_rng(seed)
        total = 0.0
        for _ in range(FRO_PROBES):
            z = rng.choice([-1.0, 1.0], size=self.cols)
            total += float(np.sum(self._apply(z) ** 2))
        return 2.0 * total / FRO_PROBES

    def to_dense(self) -> np.ndarray:
        eye = np.eye(self.cols)
        return np.column_stack([self._apply(eye[:, j]) for j in range(self.cols)]) if self.cols else np.zeros((self.rows, 0))

    def cached(self, key, factory):
        """Small per-map LRU store used for factorizations."""
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        value = factory()
        self._cache[key] = value
        while len(self._cache) > 8:
            self._cache.popitem(last=False)
        return value


class DenseMap(LinearMap):
    name = "Dense"

    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=float, ndmin=2)
        if matrix.ndim != 2:
            raise DimensionError("Dense map needs a 2-D matrix")
        super().__init__(*matrix.shape)
        self.matrix = matrix

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y

    @property
    def frobenius_exact(self):
        return True

    def _frobenius(self, seed=0):
        return float(np.sum(self.matrix**2))

    def to_dense(self):
        return self.matrix.copy()


class RestrictionMap(LinearMap):
    """Select entries ``x[indices]``; the adjoint zero-pads."""

    name = "Restriction"

    def __init__(self, indices: Sequence[int], n: int):
        idx = np.asarray(indices, dtype=np.int64).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DimensionError(f"restriction indices must lie in [0, {n})")
        if np.any(np.diff(idx) <= 0):
            raise DimensionError("restriction indices must be unique and sorted")
        super().__init__(idx.size, n)
        self.indices = idx

    def _apply(self, x):
        return x[self.indices]

    def _adjoint(self, y):
        out = np.zeros(self.cols)
        out[self.indices] = y
        return out

    def gram_diagonal(self):
        d = np.zeros(self.cols)
        d[self.indices] = 1.0
        return d

    @property
    def frobenius_exact(self):
        return True

    def _frobenius(self, seed=0):
        return float(self.indices.size)


class IdentityMap(LinearMap):
    name = "Identity"

    def __init__(self, n: int):
        super().__init__(n, n)

    def _apply(self, x):
        return x.copy()

    _adjoint = _apply

    @property
    def is_isometry(self):
        return True

    def gram_diagonal(self):
        return np.ones(self.cols)

    @property
    def frobenius_exact(self):
        return True

    def _frobenius(self, seed=0):
        return float(self.cols)


class OrthonormalMap(LinearMap):
    """Orthonormal transform on vectors or flattened 2-D grids.

    ``transform`` is ``"dct"`` (type-II, unitary scaling) or ``"identity"``.
    With ``grid=(r, c)`` the DCT is applied separably along both axes.
    """

    name = "Orthonormal"

    def __init__(self, n: int, transform: str = "dct", grid: Optional[tuple] = None):
        if grid is not None and grid[0] * grid[1] != n:
            raise DimensionError(f"grid {grid} does not hold {n} entries")
        if transform not in ("dct", "identity"):
            raise ValueError(f"unknown transform {transform!r}")
        super().__init__(n, n)
        self.transform = transform
        self.grid = grid

    def __repr__(self):
        return f"Orthonormal[{self.transform}]({self.rows})"

    def _apply(self, x):
        if self.transform == "identity":
            return x.copy()
        if self.grid is None:
            return scipy.fft.dct(x, type=2, norm="ortho")
        return scipy.fft.dctn(x.reshape(self.grid), type=2, norm="ortho").ravel()

    def _adjoint(self, y):
        if self.transform == "identity":
            return y.copy()
        if self.grid is None:
            return scipy.fft.idct(y, type=2, norm="ortho")
        return scipy.fft.idctn(y.reshape(self.grid), type=2, norm="ortho").ravel()

    @property
    def is_isometry(self):
        return True

    def gram_diagonal(self):
        return np.ones(self.cols)

    @property
    def frobenius_exact(self):
        return True

    def _frobenius(self, seed=0):
        return float(self.cols)


class ScaledMap(LinearMap):
    name = "Scaled"

    def __init__(self, scale: float, inner: LinearMap):
        super().__init__(inner.rows, inner.cols)
        self.scale = float(scale)
        self.inner = inner

    def __repr__(self):
        return f"Scaled({self.scale:g}, {self.inner!r})"

    def _apply(self, x):
        return self.scale * self.inner._apply(x)

    def _adjoint(self, y):
        return self.scale * self.inner._adjoint(y)

    def gram_diagonal(self):
        d = self.inner.gram_diagonal()
        return None if d is None else self.scale**2 * d

    @property
    def frobenius_exact(self):
        return self.inner.frobenius_exact

    def _frobenius(self, seed=0):
        return self.scale**2 * self.inner.frobenius_norm_sq


class CompositeMap(LinearMap):
    """``outer(inner(x))``."""

    name = "Composite"

    def __init__(self, outer: LinearMap, inner: LinearMap):
        if outer.cols != inner.rows:
            raise DimensionError(f"cannot compose {outer!r} after {inner!r}")
        super().__init__(outer.rows, inner.cols)
        self.outer = outer
        self.inner = inner

    def __repr__(self):
        return f"Composite({self.outer!r} o {self.inner!r})"

    def _apply(self, x):
        return self.outer._apply(self.inner._apply(x))

    def _adjoint(self, y):
        return self.inner._adjoint(self.outer._adjoint(y))

    @property
    def is_isometry(self):
        return self.outer.is_isometry and self.inner.is_isometry

    def gram_diagonal(self):
        # (RQ)^T (RQ) = Q^T D Q is diagonal only when D is a multiple of I.
        if self.outer.is_isometry:
            return self.inner.gram_diagonal()
        return None

    @property
    def frobenius_exact(self):
        # Square isometries preserve the Frobenius norm on either side.
        if self.outer.is_isometry and self.outer.rows == self.outer.cols:
            return self.inner.frobenius_exact
        if self.inner.is_isometry and self.inner.rows == self.inner.cols:
            return self.outer.frobenius_exact
        return False

    def _frobenius(self, seed=0):
        if self.outer.is_isometry and self.outer.rows == self.outer.cols:
            return self.inner.frobenius_norm_sq
        if self.inner.is_isometry and self.inner.rows == self.inner.cols:
            return self.outer.frobenius_norm_sq
        return super()._frobenius(seed)


def adjoint_test(linmap: LinearMap, trials: int = 10, seed: int = 0) -> float:
    """Largest relative defect of ``<Ax, y> = <x, A^T y>`` over random pairs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(linmap.cols)
        y = rng.standard_normal(linmap.rows)
        ax = linmap.apply(x)
        aty = linmap.adjoint(y)
        if ax.shape != (linmap.rows,) or aty.shape != (linmap.cols,):
            raise DimensionError(f"{linmap!r} returned arrays of the wrong length")
        defect = abs(float(ax @ y) - float(x @ aty))
        scale = np.linalg.norm(ax) * np.linalg.norm(y) + np.finfo(float).eps
        worst = max(worst, defect / scale)
    return worst


@dataclass(frozen=True)
class SpdSolveConfig:
    """How to solve ``H x = rhs``.

    method is one of ``"cg"``, ``"woodbury"``, ``"diagonal"``, ``"dense"``
    or ``"auto"`` (pick an exact direct path from the operator structure).
    ``max_iters`` and ``rel_tol`` only affect CG.
    """

    method: str = "auto"
    max_iters: int = 20
    rel_tol: float = 1e-10
    warm_start: bool = True

    def __post_init__(self):
        if self.method not in ("auto", "cg", "woodbury", "diagonal", "dense"):
            raise ValueError(f"unknown solve method {self.method!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")

    @classmethod
    def cg(cls, max_iters: int = 20, rel_tol: float = 1e-10, warm_start: bool = True):
        return cls("cg", max_iters, rel_tol, warm_start)


def conjugate_gradient(H_apply: Callable, rhs, x0=None, max_iters: int = 20, rel_tol: float = 1e-10):
    """Plain CG; stops on ``||r|| <= rel_tol * ||rhs||`` or after max_iters."""
    rhs = np.asarray(rhs, dtype=float)
    bnorm = np.linalg.norm(rhs)
    if not np.isfinite(bnorm):
        raise NumericalError("non-finite right-hand side")
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - H_apply(x) if x0 is not None else rhs.copy()
    p = r.copy()
    rr = float(r @ r)
    it = 0
    while it < max_iters and np.sqrt(rr) > rel_tol * bnorm:
        hp = H_apply(p)
        php = float(p @ hp)
        if not np.isfinite(php) or php <= 0.0:
            raise NumericalError(f"CG breakdown at iteration {it}: p^T H p = {php}")
        a = rr / php
        x += a * p
        r -= a * hp
        rr_new = float(r @ r)
        if not np.isfinite(rr_new):
            raise NumericalError(f"CG produced non-finite residual at iteration {it}")
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    return x, it


def solve_spd(H, rhs, config: SpdSolveConfig = SpdSolveConfig("cg"), x0=None):
    """Solve ``H x = rhs`` for symmetric positive definite H.

    ``H`` is a callable for CG, a 1-D array of diagonal entries for
    ``"diagonal"``, a 2-D array for ``"dense"`` and an object with a
    ``solve`` method for ``"woodbury"``.  Returns ``(x, iterations)``; direct
    methods report zero iterations.
    """
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise NumericalError("non-finite right-hand side")
    if not np.any(rhs):
        return np.zeros_like(rhs), 0
    method = config.method
    if method == "auto":
        if isinstance(H, np.ndarray):
            method = "diagonal" if H.ndim == 1 else "dense"
        elif hasattr(H, "solve"):
            method = "woodbury"
        else:
            method = "cg"
    if method == "cg":
        if isinstance(H, np.ndarray):
            mat = H
            H = (lambda v: mat * v) if mat.ndim == 1 else (lambda v: mat @ v)
        elif hasattr(H, "apply"):
            H = H.apply
        start = x0 if (config.warm_start and x0 is not None) else None
        return conjugate_gradient(H, rhs, start, config.max_iters, config.rel_tol)
    if method == "diagonal":
        diag = np.asarray(H, dtype=float)
        if np.any(diag <= 0):
            raise NumericalError("diagonal system has non-positive entries")
        return rhs / diag, 0
    if method == "dense":
        try:
            factor = scipy.linalg.cho_factor(np.asarray(H, dtype=float))
        except np.linalg.LinAlgError as err:
            raise NumericalError(f"Cholesky failed: {err}") from err
        return scipy.linalg.cho_solve(factor, rhs), 0
    return H.solve(rhs), 0


class WoodburySolver:
    """Applies ``(eta2 I + eta1 A^T A)^{-1}`` through a d x d Cholesky factor.

    Uses::

        (eta2 I + eta1 A^T A)^{-1}
            = I/eta2 - A^T (I/eta1 + A A^T/eta2)^{-1} A / eta2**2

    ``factorizations`` counts how many inner factors were ever built.
    """

    factorizations = 0

    def __init__(self, A: LinearMap, eta1: float, eta2: float):
        if eta1 <= 0 or eta2 <= 0:
            raise ValueError("eta1 and eta2 must be positive")
        self.A = A
        self.eta1 = float(eta1)
        self.eta2 = float(eta2)
        dense = A.matrix if isinstance(A, DenseMap) else A.to_dense()
        self.gram = dense @ dense.T
        inner = np.eye(A.rows) / self.eta1 + self.gram / self.eta2
        try:
            self._factor = scipy.linalg.cho_factor(inner, lower=True)
        except np.linalg.LinAlgError as err:
            raise NumericalError(f"Woodbury inner Cholesky failed for {A!r}: {err}") from err
        WoodburySolver.factorizations += 1
        # For dense A, fold the inner solve into a d x n matrix once.
        self._gain = scipy.linalg.cho_solve(self._factor, dense) if isinstance(A, DenseMap) else None

    def inner_solve(self, v):
        """``(I/eta1 + A A^T/eta2)^{-1} v`` for a length-d ``v``."""
        return scipy.linalg.cho_solve(self._factor, v)

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.A.cols,):
            raise DimensionError(f"Woodbury rhs must have length {self.A.cols}")
        if self.A.rows == 0:
            return rhs / self.eta2
        if self._gain is not None:
            inner = self._gain @ rhs
        else:
            inner = scipy.linalg.cho_solve(self._factor, self.A.apply(rhs))
        return rhs / self.eta2 - self.A.adjoint(inner) / self.eta2**2


def woodbury_solve(A: LinearMap, eta1: float, eta2: float, rhs):
    """``(eta2 I + eta1 A^T A)^{-1} rhs`` with the factor cached on ``A``."""
    solver = A.cached(("woodbury", float(eta1), float(eta2)), lambda: WoodburySolver(A, eta1, eta2))
    return solver.solve(rhs)
