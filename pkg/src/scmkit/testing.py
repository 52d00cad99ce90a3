"""Seeded random problem fixtures for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .monotone import Affine, Identity
from .operators import BallProjection, BoxProjection, HalfspaceProjection, OperatorStack
from .oracle import Polyhedron

__all__ = [
    "random_unit",
    "halfspaces_around_ball",
    "min_norm_problem",
    "random_feasible_stack",
    "affine_with_constants",
    "ball_and_halfspaces",
    "random_polyhedron",
]


def random_unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def halfspaces_around_ball(rng, d, m, center, radius, slack=(0.0, 1.0), tilt=0.7):
    """``m`` halfspaces each containing ``B(center, radius)``, normals tilted
    towards ``-center`` so the origin tends to be cut off."""
    c_hat = center / np.linalg.norm(center)
    ops = []
    for _ in range(m):
        a = -c_hat + tilt * rng.standard_normal(d)
        a /= np.linalg.norm(a)
        b = float(a @ center) + radius + rng.uniform(*slack)
        ops.append(HalfspaceProjection(a, b))
    return ops


def min_norm_problem(seed: int, d: int = 5, m: int = 3):
    """Minimal-norm problem over ``m`` random halfspaces containing a unit
    ball, with the origin infeasible.  Returns ``(stack, F)``."""
    rng = np.random.default_rng(seed)
    while True:
        center = 3.0 * random_unit(rng, d)
        ops = halfspaces_around_ball(rng, d, m, center, 1.0)
        if any(op.b < 0 for op in ops):
            return OperatorStack(tuple(ops)), Identity()


def random_feasible_stack(rng, d, m, kinds=("halfspace", "ball", "box")):
    """Stack of projections all containing a random anchor point.

    Returns ``(stack, anchor)``; the anchor is a common fixed point.
    """
    z0 = rng.uniform(-2.0, 2.0, d)
    ops = []
    for _ in range(m):
        kind = kinds[rng.integers(len(kinds))]
        if kind == "halfspace":
            a = random_unit(rng, d)
            ops.append(HalfspaceProjection(a, float(a @ z0) + rng.uniform(0.0, 2.0)))
        elif kind == "ball":
            off = rng.uniform(0.0, 2.0) * random_unit(rng, d)
            ops.append(BallProjection(z0 + off, np.linalg.norm(off) + rng.uniform(0.1, 2.0)))
        else:
            ops.append(BoxProjection(z0 - rng.uniform(0.0, 2.0, d), z0 + rng.uniform(0.0, 2.0, d)))
    return OperatorStack(tuple(ops)), z0


def affine_with_constants(rng, d, eta, kappa, skew=0.0):
    """Affine map whose computed modulus and Lipschitz constant are ``eta``
    and ``kappa`` (exactly, up to rounding, when ``skew == 0``)."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = np.concatenate([[eta, kappa], rng.uniform(eta, kappa, d - 2)]) if d >= 2 else np.array([eta])
    A = Q @ np.diag(lam) @ Q.T
    A = 0.5 * (A + A.T)
    if skew:
        K = rng.standard_normal((d, d))
        A = A + skew * (K - K.T)
    return A


def ball_and_halfspaces(seed: int, d: int = 4, eta: float = 1.0, kappa: float = 2.0):
    """Affine ``F`` over ``ball(0, 1.5)`` intersected with two halfspaces cutting the
    ball; the unconstrained zero of ``F`` lies outside the set."""
    rng = np.random.default_rng(seed)
    A = affine_with_constants(rng, d, eta, kappa)
    target = 4.0 * random_unit(rng, d)
    F = Affine(A, -A @ target)
    ops = [BallProjection(np.zeros(d), 1.5)]
    for _ in range(2):
        a = random_unit(rng, d)
        ops.append(HalfspaceProjection(a, rng.uniform(0.0, 0.8)))
    return OperatorStack(tuple(ops)), F


def random_polyhedron(rng, d, m):
    """Polyhedron with ``m`` halfspaces containing a random interior point.

    Returns ``(Polyhedron, stack, interior_point)``.
    """
    z0 = rng.uniform(-3.0, 3.0, d)
    A = np.array([random_unit(rng, d) for _ in range(m)])
    b = A @ z0 + rng.uniform(0.2, 2.0, m)
    stack = OperatorStack(tuple(HalfspaceProjection(a, bb) for a, bb in zip(A, b)))
    return Polyhedron(A, b), stack, z0
