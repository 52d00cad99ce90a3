"""Finite-sample certificates for the inequalities the convergence argument uses.

Each check returns a ``CheckReport`` carrying the worst violation seen; a
check never raises on failure.  Random inputs are standard normal vectors
scaled by ``radius`` drawn from a generator seeded by ``(seed, check name)``.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .monotone import MonotoneMap, StepParams, tau
from .operators import FneOperator, OperatorStack, apply_stack, as_vector, fixed_point_residual
from .oracle import (
    Infeasible,
    UnsupportedSet,
    dykstra_projector,
    feasible_set_from_stack,
    project_polyhedron_exact,
    solve_vip_reference,
)

__all__ = [
    "CheckReport",
    "check_fne",
    "check_nonexpansive",
    "check_cutter",
    "check_idempotent",
    "check_strong_monotonicity",
    "check_lipschitz",
    "check_contraction",
    "check_composition_bound",
    "check_composition_bound_sampled",
    "check_composition_fix",
    "check_fejer_trace",
    "check_convex_combination",
    "check_oracle_agreement",
    "common_fixed_point",
    "run_full_suite",
]

TOL = 1e-10
RADIUS = 10.0


@dataclass(frozen=True)
class CheckReport:
    name: str
    samples: int
    worst_violation: float
    tolerance: float
    skipped: bool = False
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tolerance

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d


def _rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFF, zlib.crc32(name.encode())])


def _mx(worst, v):
    v = float(v)
    return np.inf if v != v else max(worst, v)


def _mx_rows(worst, v):
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return worst
    return np.inf if np.isnan(v).any() else max(worst, float(v.max()))


def _report(name, samples, worst, tol, **kw):
    return CheckReport(name, int(samples), _mx(0.0, worst), float(tol), **kw)


def _pairs(rng, dim, samples, radius):
    X = radius * rng.standard_normal((samples, dim))
    Y = radius * rng.standard_normal((samples, dim))
    return X, Y


def _dim_of(op, dim):
    if op.dim is not None and dim is not None and op.dim != dim:
        raise ValueError(f"operator has dimension {op.dim}, check asked for {dim}")
    return op.dim if dim is None else dim


# -- single-operator checks ------------------------------------------------------


def check_fne(op, dim=None, samples=1000, seed=0, tol=TOL, radius=RADIUS, name="fne"):
    """``||Tx - Ty||^2 - <Tx - Ty, x - y>``, worst case over random pairs."""
    dim = _dim_of(op, dim)
    X, Y = _pairs(_rng(seed, name), dim, samples, radius)
    worst = 0.0
    for x, y in zip(X, Y):
        dT = op._apply(x) - op._apply(y)
        worst = _mx(worst, float(dT @ dT - dT @ (x - y)))
    return _report(name, samples, worst, tol)


def check_nonexpansive(op, dim=None, samples=1000, seed=0, tol=1e-12, radius=RADIUS,
                       name="nonexpansive"):
    dim = _dim_of(op, dim)
    X, Y = _pairs(_rng(seed, name), dim, samples, radius)
    worst = 0.0
    for x, y in zip(X, Y):
        worst = _mx(worst, float(np.linalg.norm(op._apply(x) - op._apply(y)) - np.linalg.norm(x - y)))
    return _report(name, samples, worst, tol)


def check_cutter(op, dim=None, samples=1000, seed=0, tol=TOL, radius=RADIUS, name="cutter"):
    """``||Tx - x||^2 - <Tx - x, z - x>`` with ``z`` drawn from ``Fix T``.

    Equivalent to 1-strong quasi-nonexpansiveness.
    """
    dim = _dim_of(op, dim)
    rng = _rng(seed, name)
    worst = 0.0
    for _ in range(samples):
        x = radius * rng.standard_normal(dim)
        z = op.sample_fixed_point(rng, radius)
        r = op._apply(x) - x
        worst = _mx(worst, float(r @ r - r @ (z - x)))
    return _report(name, samples, worst, tol)


def check_idempotent(op, dim=None, samples=1000, seed=0, tol=1e-12, radius=RADIUS,
                     name="idempotent"):
    dim = _dim_of(op, dim)
    rng = _rng(seed, name)
    worst = 0.0
    for _ in range(samples):
        p = op._apply(radius * rng.standard_normal(dim))
        worst = _mx(worst, float(np.linalg.norm(op._apply(p) - p)))
    return _report(name, samples, worst, tol)


# -- monotone map checks -----------------------------------------------------------


def check_strong_monotonicity(F: MonotoneMap, dim, samples=1000, seed=0, tol=TOL,
                              radius=RADIUS, name="strong_monotonicity"):
    X, Y = _pairs(_rng(seed, name), dim, samples, radius)
    D, dF = X - Y, F._eval_rows(X) - F._eval_rows(Y)
    v = F.eta * np.einsum("ij,ij->i", D, D) - np.einsum("ij,ij->i", dF, D)
    return _report(name, samples, _mx_rows(0.0, v), tol)


def check_lipschitz(F: MonotoneMap, dim, samples=1000, seed=0, tol=TOL, radius=RADIUS,
                    name="lipschitz"):
    X, Y = _pairs(_rng(seed, name), dim, samples, radius)
    dF = F._eval_rows(X) - F._eval_rows(Y)
    v = np.linalg.norm(dF, axis=1) - F.kappa * np.linalg.norm(X - Y, axis=1)
    return _report(name, samples, _mx_rows(0.0, v), tol)


def check_contraction(F: MonotoneMap, mu, beta, dim, samples=1000, seed=0, tol=TOL,
                      radius=RADIUS, name="contraction"):
    """``||U x - U y|| - (1 - beta*tau)||x - y||`` for ``U = Id - mu*beta*F``."""
    p = StepParams(mu, beta).validate(F)
    factor = 1.0 - beta * tau(mu, F.eta, F.kappa)
    X, Y = _pairs(_rng(seed, name), dim, samples, radius)
    step = p.mu * p.beta
    UX, UY = X - step * F._eval_rows(X), Y - step * F._eval_rows(Y)
    v = np.linalg.norm(UX - UY, axis=1) - factor * np.linalg.norm(X - Y, axis=1)
    return _report(name, samples, _mx_rows(0.0, v), tol)


# -- composition checks ------------------------------------------------------------


def _require_common_fixed(stack, z, tol=TOL):
    z = as_vector(z, stack.dim, name="z")
    r = fixed_point_residual(stack, z)
    if r > tol:
        raise ValueError(f"z is not a common fixed point (residual {r:.3e})")
    return z


def _composition_gap(stack, x, z):
    _, S = apply_stack(stack, x)
    L = max(float(np.linalg.norm(x - z)), 1e-12)
    lhs = sum(float(np.sum((S[i] - S[i - 1]) ** 2)) for i in range(1, len(S))) / (2.0 * L)
    return lhs - float(np.linalg.norm(S[-1] - x))


def check_composition_bound(stack: OperatorStack, x, z, tol=TOL, name="composition_bound"):
    """``(1/2L) sum_i ||S_i x - S_{i-1} x||^2 - ||Tx - x||`` with ``L = ||x - z||``
    floored at 1e-12."""
    z = _require_common_fixed(stack, z)
    x = as_vector(x, stack.dim)
    return _report(name, 1, _composition_gap(stack, x, z), tol)


def check_composition_bound_sampled(stack, z, samples=1000, seed=0, tol=TOL, radius=RADIUS,
                                    name="composition_bound"):
    z = _require_common_fixed(stack, z)
    rng = _rng(seed, name)
    worst = 0.0
    for _ in range(samples):
        x = z + radius * rng.standard_normal(stack.dim)
        worst = _mx(worst, _composition_gap(stack, x, z))
    return _report(name, samples, worst, tol)


def check_composition_fix(stack, points: Sequence, tol=1e-12, name="composition_fix"):
    """Fix of the composition equals the common fixed set: on every point,
    ``max_i ||T_i x - x|| <= tol`` iff ``||T x - x|| <= tol``.  The violation
    recorded for a disagreeing point is the larger of the two residuals."""
    worst = 0.0
    for x in points:
        x = as_vector(x, stack.dim)
        r_each = fixed_point_residual(stack, x)
        r_comp = float(np.linalg.norm(apply_stack(stack, x)[0] - x))
        if (r_each <= tol) != (r_comp <= tol):
            worst = _mx(worst, max(r_each, r_comp))
    return _report(name, len(points), worst, tol)


def check_fejer_trace(trace_intermediates, lambda_values, stack: OperatorStack, z, tol=TOL,
                      name="fejer_step"):
    """Per iteration: ``||w - z||^2 - ||phi0 - z||^2 + lam(1-lam)||T phi0 - phi0||^2``
    with ``w = phi0 + lam (T phi0 - phi0)`` recomputed error-free."""
    if trace_intermediates is None or len(trace_intermediates) == 0:
        raise ValueError("missing intermediates: run solve(..., keep_intermediates=True)")
    if len(trace_intermediates) != len(lambda_values):
        raise ValueError("one lambda value per recorded iteration is required")
    z = _require_common_fixed(stack, z)
    worst = 0.0
    for phis, lam in zip(trace_intermediates, lambda_values):
        phi0 = np.asarray(phis[0], dtype=float)
        Tphi0, _ = apply_stack(stack, phi0)
        w = phi0 + lam * (Tphi0 - phi0)
        lhs = float(np.sum((w - z) ** 2))
        rhs = float(np.sum((phi0 - z) ** 2)) - lam * (1.0 - lam) * float(np.sum((Tphi0 - phi0) ** 2))
        worst = _mx(worst, lhs - rhs)
    return _report(name, len(lambda_values), worst, tol)


def check_convex_combination(dim, samples=1000, seed=0, tol=1e-12, name="convex_combination"):
    """``||l x + (1-l) y||^2 = l||x||^2 + (1-l)||y||^2 - l(1-l)||x-y||^2`` for
    real ``l``; discrepancy measured relative to ``1 + ||x||^2 + ||y||^2``."""
    rng = _rng(seed, name)
    worst = 0.0
    for _ in range(samples):
        x, y = rng.standard_normal(dim), rng.standard_normal(dim)
        lam = rng.uniform(-2.0, 3.0)
        lhs = float(np.sum((lam * x + (1 - lam) * y) ** 2))
        xx, yy, dd = float(x @ x), float(y @ y), float(np.sum((x - y) ** 2))
        rhs = lam * xx + (1 - lam) * yy - lam * (1 - lam) * dd
        worst = _mx(worst, abs(lhs - rhs) / (1.0 + xx + yy))
    return _report(name, samples, worst, tol)


def check_oracle_agreement(stack, y=None, tol=1e-9, name="oracle_agreement"):
    """Exact projection of ``y`` (default: origin) versus the reference VIP
    solver with ``F = Id - y`` run on a Dykstra projector; both compute the
    same point by unrelated routes."""
    from .monotone import ClosestPoint

    y = np.zeros(stack.dim) if y is None else as_vector(y, stack.dim)
    P, ball = feasible_set_from_stack(stack)
    p = project_polyhedron_exact(P, y, ball).x
    q = solve_vip_reference(ClosestPoint(y), dykstra_projector(stack), np.zeros(stack.dim))
    return _report(name, 1, float(np.linalg.norm(p - q)), tol)


# -- suite ---------------------------------------------------------------------------


def common_fixed_point(stack: OperatorStack, known=None, tol=TOL):
    """An exact common fixed point, or None.

    Tries the oracle projection of the origin, then ``known``, then zero.
    """
    cands = []
    try:
        P, ball = feasible_set_from_stack(stack)
        cands.append(project_polyhedron_exact(P, np.zeros(stack.dim), ball).x)
    except (UnsupportedSet, Infeasible, ValueError):
        pass
    if known is not None:
        cands.append(np.asarray(known, dtype=float))
    cands.append(np.zeros(stack.dim))
    for z in cands:
        if fixed_point_residual(stack, z) <= tol:
            return z
    return None


def run_full_suite(problem, cfg, samples=1000, seed=None, fejer_iters=2000, radius=RADIUS):
    """Run every check on ``problem`` (a ``scmkit.io.Problem``) and return the reports."""
    from .solver import solve

    seed = cfg.seed if seed is None else seed
    stack, F, d = problem.stack, problem.F, problem.dim
    reports: list[CheckReport] = []
    kw = dict(samples=samples, seed=seed, radius=radius)

    for i, op in enumerate(stack.ops):
        tag = f"[{i + 1}:{op.kind}]"
        reports.append(check_fne(op, d, name=f"fne{tag}", **kw))
        reports.append(check_nonexpansive(op, d, name=f"nonexpansive{tag}", **kw))
        reports.append(check_cutter(op, d, name=f"cutter{tag}", **kw))
        if op.is_projection:
            reports.append(check_idempotent(op, d, name=f"idempotent{tag}", **kw))

    reports.append(check_strong_monotonicity(F, d, **kw))
    reports.append(check_lipschitz(F, d, **kw))
    try:
        mu = cfg.resolve_mu(F)
        beta = float(cfg.beta.values(1, 1)[0])
        for b in sorted({1.0, 0.5, beta}):
            reports.append(check_contraction(F, mu, b, d, name=f"contraction[beta={b!r}]", **kw))
    except ValueError as exc:
        reports.append(_report("contraction", 0, np.inf, TOL, detail=str(exc)))
    reports.append(check_convex_combination(d, samples=samples, seed=seed))

    z = common_fixed_point(stack, problem.known_solution)
    if z is None:
        for name in ("composition_bound", "composition_fix", "fejer_step"):
            reports.append(_report(name, 0, 0.0, TOL, skipped=True,
                                   detail="no exact common fixed point available"))
    else:
        reports.append(check_composition_bound_sampled(stack, z, **kw))
        rng = _rng(seed, "composition_fix")
        pts = [z] + [z + radius * rng.standard_normal(d) for _ in range(samples)]
        reports.append(check_composition_fix(stack, pts))
        run_cfg = replace(cfg.error_free(), max_iters=min(cfg.max_iters, fejer_iters),
                          residual_tol=0.0, trace_every=1)
        try:
            res = solve(stack, F, None, run_cfg, keep_intermediates=True)
            lams = [r.lambda_n for r in res.trace]
            reports.append(check_fejer_trace(res.intermediates, lams, stack, z))
        except (ValueError, IndexError) as exc:
            reports.append(_report("fejer_step", 0, np.inf, TOL, detail=str(exc)))

    try:
        feasible_set_from_stack(stack)
        supported = True
    except UnsupportedSet:
        supported = False
    if supported:
        try:
            reports.append(check_oracle_agreement(stack))
        except Infeasible:
            reports.append(_report("oracle_agreement", 0, np.inf, 1e-9, detail="infeasible"))
        except ValueError as exc:
            reports.append(_report("oracle_agreement", 0, 0.0, 1e-9, skipped=True, detail=str(exc)))
    else:
        reports.append(_report("oracle_agreement", 0, 0.0, 1e-9, skipped=True,
                               detail="operators outside the exact-oracle class"))
    return reports
