"""Level-set relaxation for nonsmooth residual constraints.

Basis pursuit denoise with l0/l1/l2/linf residual balls, solved through a
relaxation with splitting variables and continuation in the relaxation
parameter, plus a factorized low-rank completion variant.
"""

from .lowrank import FactorTriple, MaskedData, solve_lowrank
from .operators import (
    CompositeMap,
    DenseMap,
    DimensionError,
    IdentityMap,
    LinearMap,
    NumericalError,
    OrthonormalMap,
    RestrictionMap,
    ScaledMap,
    SpdSolveConfig,
    adjoint_test,
    solve_spd,
    woodbury_solve,
)
from .prox import BallSpec, Norm, Regularizer, project_ball, prox_l1
from .solvers import (
    ContinuationSchedule,
    IterateTrace,
    ProblemSpec,
    SplitState,
    objective,
    rate_constant,
    solve,
    stationarity,
    step_alg1,
    step_alg2,
    step_alg3,
)

__version__ = "0.1.0"

__all__ = [
    "BallSpec",
    "CompositeMap",
    "ContinuationSchedule",
    "DenseMap",
    "DimensionError",
    "FactorTriple",
    "IdentityMap",
    "IterateTrace",
    "LinearMap",
    "MaskedData",
    "Norm",
    "NumericalError",
    "OrthonormalMap",
    "ProblemSpec",
    "Regularizer",
    "RestrictionMap",
    "ScaledMap",
    "SplitState",
    "SpdSolveConfig",
    "adjoint_test",
    "objective",
    "project_ball",
    "prox_l1",
    "rate_constant",
    "solve",
    "solve_lowrank",
    "solve_spd",
    "stationarity",
    "step_alg1",
    "step_alg2",
    "step_alg3",
    "woodbury_solve",
]
