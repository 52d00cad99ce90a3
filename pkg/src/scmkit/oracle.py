"""Exact desk-scale reference solvers.

``project_polyhedron_exact`` enumerates candidate active sets and solves the
least-distance KKT system for each; it is independent of the iterative
method it is used to check.  An optional single ball constraint is handled
in closed form per active set (a ball cut by an affine subspace is a ball in
that subspace).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .monotone import MonotoneMap
from .operators import (
    BallProjection,
    BoxProjection,
    HalfspaceProjection,
    HyperplaneProjection,
    OperatorStack,
    as_vector,
    fixed_point_residual,
)

__all__ = [
    "Infeasible",
    "BudgetExceeded",
    "UnsupportedSet",
    "NonConvergence",
    "Polyhedron",
    "Ball",
    "ProjectionResult",
    "project_polyhedron_exact",
    "feasible_set_from_stack",
    "exact_projector",
    "dykstra_projector",
    "solve_vip_reference",
    "vip_result",
    "vip_residual",
    "sample_feasible",
]

MAX_CONSTRAINTS = 12
MAX_DIM = 12
FEAS_TOL = 1e-10
MULT_TOL = 1e-10


class Infeasible(Exception):
    """The constraint set is empty."""


class BudgetExceeded(ValueError):
    pass


class UnsupportedSet(ValueError):
    """The operator's fixed-point set has no exact projector here."""


class NonConvergence(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """``{x : A x <= b}``, one row per halfspace."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b disagree on the number of halfspaces")
        if A.shape[0] and np.any(np.linalg.norm(A, axis=1) == 0):
            raise ValueError("every halfspace needs ||a|| > 0")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_halfspaces(cls, halfspaces: Sequence[tuple], dim: int | None = None):
        if not halfspaces:
            if dim is None:
                raise ValueError("dim required for an empty halfspace list")
            return cls(np.zeros((0, dim)), np.zeros(0))
        A = np.array([np.asarray(a, dtype=float) for a, _ in halfspaces])
        b = np.array([float(bb) for _, bb in halfspaces])
        return cls(A, b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def __len__(self):
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float


@dataclass
class ProjectionResult:
    x: np.ndarray
    active: tuple[int, ...]       # halfspace indices
    multipliers: np.ndarray       # one per active halfspace
    ball_active: bool = False
    ball_multiplier: float = 0.0
    distance_sq: float = 0.0


def _feasible(P, ball, x, scale):
    tol = FEAS_TOL * scale
    if len(P) and np.any(P.A @ x - P.b > tol * np.linalg.norm(P.A, axis=1)):
        return False
    if ball is not None and np.linalg.norm(x - ball.center) > ball.radius + tol:
        return False
    return True


def _affine_projection(AS, bS, y):
    """Project ``y`` onto ``{x : AS x = bS}`` and return ``(x, nu)`` with
    ``y - x = AS^T nu``; None when the rows are linearly dependent."""
    G = AS @ AS.T
    if np.linalg.matrix_rank(AS) < AS.shape[0]:
        return None
    nu = np.linalg.solve(G, AS @ y - bS)
    return y - AS.T @ nu, nu


def project_polyhedron_exact(P: Polyhedron, y, ball: Ball | None = None) -> ProjectionResult:
    """Euclidean projection of ``y`` onto ``P`` (intersected with ``ball``).

    Raises ``Infeasible`` when no active set yields a feasible KKT point.
    Among valid candidates the one of minimal distance wins; near-ties go to
    the lexicographically smallest active set.
    """
    m, d = len(P), P.dim
    y = as_vector(y, d, name="y")
    if m > MAX_CONSTRAINTS or d > MAX_DIM:
        raise BudgetExceeded(
            f"enumeration budget: need m <= {MAX_CONSTRAINTS} and dim <= {MAX_DIM}, got m={m}, dim={d}"
        )
    scale = 1.0 + np.linalg.norm(y) + (np.abs(P.b).max() if m else 0.0)
    if ball is not None:
        scale += np.linalg.norm(ball.center) + ball.radius
    cands = []
    for k in range(0, min(m, d) + 1):
        for S in combinations(range(m), k):
            AS, bS = P.A[list(S)], P.b[list(S)]
            if k:
                res = _affine_projection(AS, bS, y)
                if res is None:
                    continue
                x, nu = res
            else:
                x, nu = y.copy(), np.zeros(0)
            if np.all(nu >= -MULT_TOL * scale) and _feasible(P, ball, x, scale):
                cands.append((float(np.sum((x - y) ** 2)), S, x, nu, False, 0.0))
            if ball is None or k >= d:
                continue
            # same active halfspaces plus the sphere
            c = ball.center
            if k:
                cproj, _ = _affine_projection(AS, bS, c)
                py = res[0]
            else:
                cproj, py = c, y
            h2 = float(np.sum((c - cproj) ** 2))
            if h2 > ball.radius**2:
                continue
            rad = np.sqrt(ball.radius**2 - h2)
            u = py - cproj
            nu_ = np.linalg.norm(u)
            if nu_ == 0.0:
                continue
            x = cproj + (rad / nu_) * u
            M = np.column_stack([AS.T, x - c]) if k else (x - c)[:, None]
            coef, *_ = np.linalg.lstsq(M, y - x, rcond=None)
            if np.linalg.norm(M @ coef - (y - x)) > 1e-9 * scale:
                continue
            if np.all(coef >= -MULT_TOL * scale) and _feasible(P, ball, x, scale):
                cands.append((float(np.sum((x - y) ** 2)), S, x, coef[:-1], True, float(coef[-1])))
    if not cands:
        raise Infeasible("no active set gives a feasible KKT point; the set is empty")
    best = min(c[0] for c in cands)
    tie = 1e-12 * (1.0 + best)
    dist2, S, x, nu, on_ball, nub = min(
        (c for c in cands if c[0] <= best + tie), key=lambda c: (c[1], c[4])
    )
    return ProjectionResult(x=x, active=tuple(S), multipliers=np.asarray(nu, dtype=float),
                            ball_active=on_ball, ball_multiplier=nub, distance_sq=dist2)


def feasible_set_from_stack(stack: OperatorStack) -> tuple[Polyhedron, Ball | None]:
    """Halfspace/hyperplane/box/ball operators as ``(Polyhedron, Ball)``.

    Hyperplanes become two opposite halfspaces, boxes up to ``2*dim``
    halfspaces.  At most one ball is supported.
    """
    rows, rhs, ball = [], [], None
    for op in stack.ops:
        if isinstance(op, HalfspaceProjection):
            rows.append(op.a); rhs.append(op.b)
        elif isinstance(op, HyperplaneProjection):
            rows += [op.a, -op.a]; rhs += [op.b, -op.b]
        elif isinstance(op, BoxProjection):
            for j in range(op.dim):
                e = np.zeros(op.dim); e[j] = 1.0
                if np.isfinite(op.hi[j]):
                    rows.append(e); rhs.append(op.hi[j])
                if np.isfinite(op.lo[j]):
                    rows.append(-e); rhs.append(-op.lo[j])
        elif isinstance(op, BallProjection):
            if ball is not None:
                raise UnsupportedSet("at most one ball constraint is supported by the exact oracle")
            ball = Ball(op.center, op.radius)
        else:
            raise UnsupportedSet(f"operator {op.kind!r} has no exact feasibility oracle")
    P = Polyhedron(np.array(rows).reshape(len(rows), stack.dim), np.array(rhs, dtype=float))
    return P, ball


def exact_projector(stack: OperatorStack) -> Callable[[np.ndarray], np.ndarray]:
    """Exact projector onto the common fixed-point set of an oracle-supported stack."""
    P, ball = feasible_set_from_stack(stack)
    if len(P) == 0 and ball is not None:
        single = BallProjection(ball.center, ball.radius)
        return single._apply
    return lambda y: project_polyhedron_exact(P, y, ball).x


def dykstra_projector(stack: OperatorStack, tol: float = 1e-14, max_cycles: int = 10**6):
    """Projector onto the common fixed-point set by Dykstra's algorithm over
    the stack's own projections.

    Shares no code with the active-set enumeration, so the two serve as
    independent oracles.  Only projection operators are accepted.
    """
    ops = stack.ops
    bad = [op.kind for op in ops if not op.is_projection]
    if bad:
        raise UnsupportedSet(f"Dykstra needs metric projections, got {bad[0]!r}")

    def project(y):
        x = as_vector(y, stack.dim, name="y").copy()
        incr = np.zeros((len(ops), stack.dim))
        for _ in range(max_cycles):
            x_start, change = x.copy(), 0.0
            for i, op in enumerate(ops):
                v = x + incr[i]
                x_new = op._apply(v)
                new_incr = v - x_new
                change += float(np.sum((new_incr - incr[i]) ** 2))
                incr[i] = new_incr
                x = x_new
            if np.linalg.norm(x - x_start) <= tol * (1.0 + np.linalg.norm(x)) and change <= tol**2:
                return x
        raise NonConvergence(f"Dykstra did not settle to {tol} in {max_cycles} cycles")

    return project


def solve_vip_reference(
    F: MonotoneMap,
    project_C: Callable[[np.ndarray], np.ndarray],
    x0,
    tol: float = 1e-12,
    max_iter: int = 10**7,
) -> np.ndarray:
    """Projected iteration ``x <- P_C(x - gamma F(x))`` with ``gamma = eta/kappa^2``."""
    gamma = F.eta / F.kappa**2
    x = np.asarray(project_C(as_vector(x0, F.dim, name="x0")), dtype=float)
    for _ in range(max_iter):
        x_new = np.asarray(project_C(x - gamma * F._eval(x)), dtype=float)
        if np.linalg.norm(x_new - x) <= tol:
            return x_new
        x = x_new
    raise NonConvergence(f"reference VIP iteration did not reach {tol} in {max_iter} steps")


def vip_result(F: MonotoneMap, stack: OperatorStack, x0=None):
    """Reference solution plus the active set and VIP multipliers at it.

    The multipliers ``nu`` satisfy ``F(x*) + sum_j nu_j a_j (+ nu_ball (x* - c)) = 0``.
    """
    P, ball = feasible_set_from_stack(stack)
    x0 = np.zeros(stack.dim) if x0 is None else x0
    proj = lambda y: project_polyhedron_exact(P, y, ball).x
    x = solve_vip_reference(F, proj, x0)
    gamma = F.eta / F.kappa**2
    pr = project_polyhedron_exact(P, x - gamma * F._eval(x), ball)
    return x, pr.active, pr.multipliers / gamma, pr.ball_active, pr.ball_multiplier / gamma


def vip_residual(F: MonotoneMap, x, feasible_samples: Sequence) -> float:
    """``max(0, max_v -<F(x), v - x>)`` over the given feasible points."""
    if len(feasible_samples) == 0:
        raise ValueError("vip_residual needs at least one feasible sample")
    x = as_vector(x, F.dim)
    Fx = F._eval(x)
    V = np.asarray(feasible_samples, dtype=float)
    return max(0.0, float(np.max(-(V - x) @ Fx)))


def sample_feasible(
    stack: OperatorStack,
    count: int,
    seed: int,
    center,
    radius: float,
    max_draws: int = 10**6,
) -> np.ndarray:
    """Rejection-sample points with zero fixed-point residual from the box
    ``center +- radius``."""
    rng = np.random.default_rng(seed)
    center = as_vector(center, stack.dim, name="center")
    out = []
    drawn = 0
    batch = max(64, 4 * count)
    while len(out) < count:
        if drawn >= max_draws:
            raise RuntimeError(f"only {len(out)} of {count} feasible samples after {drawn} draws")
        pts = center + radius * rng.uniform(-1.0, 1.0, size=(batch, stack.dim))
        drawn += batch
        for p in pts:
            if fixed_point_residual(stack, p) == 0.0:
                out.append(p)
                if len(out) == count:
                    break
    return np.array(out)
