"""Proximal operators and Euclidean projections onto lp balls."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Norm",
    "BallSpec",
    "Regularizer",
    "prox_l1",
    "project_ball",
    "ball_distance",
    "ball_norm",
    "is_feasible",
]


class Norm(str, Enum):
    L0 = "l0"
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"


@dataclass(frozen=True)
class BallSpec:
    """``{x : ||x||_p <= radius}``; for ``l0`` the radius is a cardinality."""

    norm: Norm
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "norm", Norm(self.norm))
        if not self.radius >= 0:
            raise ValueError(f"ball radius must be >= 0, got {self.radius}")
        if self.norm is Norm.L0 and float(self.radius) != int(self.radius):
            raise ValueError(f"l0 radius must be an integer, got {self.radius}")

    def __str__(self):
        return f"{self.norm.value}(radius={self.radius:g})"


@dataclass(frozen=True)
class Regularizer:
    """``weight * ||w||_1`` (kind ``"l1"``) or the zero function."""

    kind: str = "l1"
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in ("l1", "zero"):
            raise ValueError(f"unknown regularizer {self.kind!r}")
        if not self.weight > 0:
            raise ValueError("regularizer weight must be positive")

    def value(self, w) -> float:
        if self.kind == "zero":
            return 0.0
        return self.weight * float(np.sum(np.abs(w)))

    def prox(self, y, step: float):
        """``argmin_x ||x - y||^2 / (2 step) + value(x)``."""
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return y.copy()
        return prox_l1(y, step * self.weight)


def prox_l1(y, alpha: float):
    """Soft thresholding, ``sign(y) * max(|y| - alpha, 0)``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - alpha, 0.0)


def ball_norm(z, norm) -> float:
    z = np.asarray(z, dtype=float)
    norm = Norm(norm)
    if norm is Norm.L0:
        return float(np.count_nonzero(z))
    if z.size == 0:
        return 0.0
    if norm is Norm.L1:
        return float(np.sum(np.abs(z)))
    if norm is Norm.L2:
        return float(np.linalg.norm(z))
    return float(np.max(np.abs(z)))


def _project_simplex_l1(z, radius):
    # Sort |z| descending, find the largest k with u_k > (cumsum_k - r) / k.
    a = np.abs(z)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    cond = u - (css - radius) / k > 0
    # cond holds on a prefix; at least the top entry survives, even when
    # rounding hides it for radii far below |z|
    rho = max(1, int(np.count_nonzero(cond)))
    theta = (css[rho - 1] - radius) / rho
    return np.sign(z) * np.maximum(a - theta, 0.0)


def project_ball(z, ball: BallSpec):
    """Euclidean projection of ``z`` onto ``ball``.

    The l0 case keeps the ``radius`` largest-magnitude entries; equal
    magnitudes resolve toward the lowest index.
    """
    z = np.asarray(z, dtype=float)
    r = float(ball.radius)
    norm = ball.norm
    if norm is Norm.L0:
        tau = int(r)
        if tau > z.size:
            raise ValueError(f"l0 radius {tau} exceeds vector length {z.size}")
        if np.count_nonzero(z) <= tau:
            return z.copy()
        out = np.zeros_like(z)
        if tau:
            keep = np.argsort(-np.abs(z), kind="stable")[:tau]
            out[keep] = z[keep]
        return out
    if r == 0.0:
        return np.zeros_like(z)
    if norm is Norm.LINF:
        return np.clip(z, -r, r)
    if norm is Norm.L2:
        nz = np.linalg.norm(z)
        return z.copy() if nz <= r else z * (r / nz)
    if np.sum(np.abs(z)) <= r:
        return z.copy()
    return _project_simplex_l1(z, r)


def ball_distance(z, ball: BallSpec) -> float:
    """``||z - project_ball(z, ball)||_2``."""
    z = np.asarray(z, dtype=float)
    return float(np.linalg.norm(z - project_ball(z, ball)))


def is_feasible(z, ball: BallSpec, tol: float = 1e-9) -> bool:
    """Norm test with a relative slack of ``tol`` (exact count for l0)."""
    value = ball_norm(z, ball.norm)
    if ball.norm is Norm.L0:
        return value <= ball.radius
    return value <= ball.radius + tol * max(1.0, ball.radius)
