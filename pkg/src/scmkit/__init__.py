"""Sequential Constraint Method for variational inequalities over the
common fixed points of firmly nonexpansive operators."""

from ._backend import HAVE_COMPILED
from .monotone import Affine, ClosestPoint, Identity, StepParams, evaluate, tau, u_beta_step
from .operators import (
    BallProjection,
    BoxProjection,
    HalfspaceProjection,
    HyperplaneProjection,
    LinearResolvent,
    OperatorStack,
    SoftThreshold,
    apply,
    apply_stack,
    fixed_point_residual,
)
from .solver import (
    ConstantLambda,
    ExplicitBeta,
    ExplicitLambda,
    NoError,
    PowerBeta,
    PowerFixedError,
    PowerRandomError,
    ScmConfig,
    SolveResult,
    Status,
    draw_errors,
    scm_step,
    solve,
)

__version__ = "0.1.0"
