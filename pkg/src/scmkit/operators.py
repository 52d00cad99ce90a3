"""Firmly nonexpansive operators and their sequential composition.

Every catalog member is a metric projection, a proximal map or a resolvent,
so each one is firmly nonexpansive and its fixed-point set is exactly the
underlying convex set (or zero set).  Two non-catalog fixtures are provided
for exercising the diagnostics; they are never FNE.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, Sequence

import numpy as np
from scipy import linalg as sla

__all__ = [
    "DimensionError",
    "FneOperator",
    "HalfspaceProjection",
    "HyperplaneProjection",
    "BallProjection",
    "BoxProjection",
    "SoftThreshold",
    "LinearResolvent",
    "ScaleFixture",
    "FoldFixture",
    "OperatorStack",
    "apply",
    "apply_stack",
    "fixed_point_residual",
    "as_vector",
]

MONOTONE_TOL = 1e-10

# kernel dispatch codes, shared with the compiled core
K_HALFSPACE, K_HYPERPLANE, K_BALL, K_BOX, K_SOFT, K_RESOLVENT = range(6)


class DimensionError(ValueError):
    """Operand dimension does not match the operator or problem."""


def as_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def _nonzero_normal(a) -> np.ndarray:
    a = as_vector(a, name="a")
    if not np.linalg.norm(a) > 0:
        raise ValueError("normal vector a must satisfy ||a|| > 0")
    return a


class FneOperator:
    """Base class for the operator catalog.

    Subclasses implement ``_apply`` on a validated vector and
    ``sample_fixed_point``.  ``kernel_code`` is None for operators the
    compiled core cannot evaluate.
    """

    kind: ClassVar[str] = ""
    is_projection: ClassVar[bool] = False
    in_catalog: ClassVar[bool] = True
    kernel_code: ClassVar[int | None] = None

    @property
    def dim(self) -> int | None:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return apply(self, x)

    def _apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def in_fix(self, x, tol: float = 0.0) -> bool:
        x = as_vector(x, self.dim)
        return bool(np.linalg.norm(self._apply(x) - x) <= tol)

    def sample_fixed_point(self, rng: np.random.Generator, radius: float = 10.0) -> np.ndarray:
        raise NotImplementedError

    def pack(self, d: int):
        """Return ``(v1, v2, scal, lu, piv)`` rows for the compiled core."""
        v1 = np.zeros(d)
        v2 = np.zeros(d)
        sc = np.zeros(2)
        lu = np.zeros((d, d))
        piv = np.zeros(d, dtype=np.int32)
        return v1, v2, sc, lu, piv


@dataclass(frozen=True, eq=False)
class HalfspaceProjection(FneOperator):
    """Projection onto ``{x : <a, x> <= b}``."""

    a: np.ndarray
    b: float

    kind: ClassVar[str] = "halfspace"
    is_projection: ClassVar[bool] = True
    kernel_code: ClassVar[int] = K_HALFSPACE

    def __post_init__(self):
        object.__setattr__(self, "a", _nonzero_normal(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not np.isfinite(self.b):
            raise ValueError("b must be finite")

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @cached_property
    def _a_sq(self) -> float:
        return float(self.a @ self.a)

    def _apply(self, x):
        s = float(self.a @ x) - self.b
        if s <= 0.0:
            return x.copy()
        return x - (s / self._a_sq) * self.a

    def sample_fixed_point(self, rng, radius=10.0):
        return self._apply(radius * rng.standard_normal(self.dim))

    def pack(self, d):
        v1, v2, sc, lu, piv = super().pack(d)
        v1[:] = self.a
        sc[:] = (self.b, self._a_sq)
        return v1, v2, sc, lu, piv


@dataclass(frozen=True, eq=False)
class HyperplaneProjection(FneOperator):
    """Projection onto ``{x : <a, x> = b}``."""

    a: np.ndarray
    b: float

    kind: ClassVar[str] = "hyperplane"
    is_projection: ClassVar[bool] = True
    kernel_code: ClassVar[int] = K_HYPERPLANE

    def __post_init__(self):
        object.__setattr__(self, "a", _nonzero_normal(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not np.isfinite(self.b):
            raise ValueError("b must be finite")

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @cached_property
    def _a_sq(self) -> float:
        return float(self.a @ self.a)

    def _apply(self, x):
        s = float(self.a @ x) - self.b
        if s == 0.0:
            return x.copy()
        return x - (s / self._a_sq) * self.a

    def sample_fixed_point(self, rng, radius=10.0):
        return self._apply(radius * rng.standard_normal(self.dim))

    def pack(self, d):
        v1, v2, sc, lu, piv = super().pack(d)
        v1[:] = self.a
        sc[:] = (self.b, self._a_sq)
        return v1, v2, sc, lu, piv


@dataclass(frozen=True, eq=False)
class BallProjection(FneOperator):
    """Projection onto the closed ball ``{x : ||x - center|| <= radius}``."""

    center: np.ndarray
    radius: float

    kind: ClassVar[str] = "ball"
    is_projection: ClassVar[bool] = True
    kernel_code: ClassVar[int] = K_BALL

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, name="center"))
        object.__setattr__(self, "radius", float(self.radius))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError("ball radius must be finite and > 0")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def _apply(self, x):
        d = x - self.center
        r = float(np.linalg.norm(d))
        if r <= self.radius:
            return x.copy()
        return self.center + (self.radius / r) * d

    def sample_fixed_point(self, rng, radius=10.0):
        # uniform direction, radius scaled into the ball
        u = rng.standard_normal(self.dim)
        u /= np.linalg.norm(u)
        return self.center + self.radius * rng.uniform() * u

    def pack(self, d):
        v1, v2, sc, lu, piv = super().pack(d)
        v1[:] = self.center
        sc[0] = self.radius
        return v1, v2, sc, lu, piv


@dataclass(frozen=True, eq=False)
class BoxProjection(FneOperator):
    """Projection onto ``{x : lo <= x <= hi}``; infinite bounds allowed."""

    lo: np.ndarray
    hi: np.ndarray

    kind: ClassVar[str] = "box"
    is_projection: ClassVar[bool] = True
    kernel_code: ClassVar[int] = K_BOX

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimensionError("box bounds must be 1-D vectors of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("box bounds must not be NaN")
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi componentwise")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValueError("box is empty: lo = +inf or hi = -inf")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def _apply(self, x):
        return np.minimum(np.maximum(x, self.lo), self.hi)

    def sample_fixed_point(self, rng, radius=10.0):
        return self._apply(radius * rng.standard_normal(self.dim))

    def pack(self, d):
        v1, v2, sc, lu, piv = super().pack(d)
        v1[:] = self.lo
        v2[:] = self.hi
        return v1, v2, sc, lu, piv


@dataclass(frozen=True, eq=False)
class SoftThreshold(FneOperator):
    """Proximal map of ``t * ||.||_1``; its fixed-point set is ``{0}``.

    ``dim`` may be left as None, in which case any dimension is accepted.
    """

    t: float
    size: int | None = None

    kind: ClassVar[str] = "soft_threshold"
    kernel_code: ClassVar[int] = K_SOFT

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        if not (np.isfinite(self.t) and self.t > 0):
            raise ValueError("soft threshold t must be finite and > 0")
        if self.size is not None and self.size < 1:
            raise ValueError("size must be >= 1")

    @property
    def dim(self) -> int | None:
        return self.size

    def _apply(self, x):
        return np.sign(x) * np.maximum(np.abs(x) - self.t, 0.0)

    def sample_fixed_point(self, rng, radius=10.0):
        if self.size is None:
            raise ValueError("dimension unknown; construct with size=")
        return np.zeros(self.size)

    def pack(self, d):
        v1, v2, sc, lu, piv = super().pack(d)
        sc[0] = self.t
        return v1, v2, sc, lu, piv


@dataclass(frozen=True, eq=False)
class LinearResolvent(FneOperator):
    """Resolvent ``(I + r A)^{-1}`` of a monotone linear map ``A``.

    Monotonicity is validated at construction: the smallest eigenvalue of
    the symmetric part must be ``>= -1e-10``.  Fixed points are ``ker A``.
    """

    A: np.ndarray
    r: float

    kind: ClassVar[str] = "linear_resolvent"
    kernel_code: ClassVar[int] = K_RESOLVENT

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise DimensionError(f"A must be a square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("A contains non-finite entries")
        r = float(self.r)
        if not (np.isfinite(r) and r > 0):
            raise ValueError("resolvent parameter r must be finite and > 0")
        lam_min = float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])
        if lam_min < -MONOTONE_TOL:
            raise ValueError(
                f"A is not monotone: smallest eigenvalue of (A + A^T)/2 is {lam_min:.3e}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "r", r)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @cached_property
    def _lu(self):
        M = np.eye(self.dim) + self.r * self.A
        lu, piv = sla.lu_factor(M, check_finite=False)
        if np.any(np.diag(lu) == 0.0):
            # unreachable for monotone A: I + rA has eigenvalues with real part >= 1
            raise RuntimeError("singular resolvent factorization")
        return lu, piv

    @cached_property
    def _kernel_basis(self) -> np.ndarray:
        return sla.null_space(self.A, rcond=1e-10)

    def _apply(self, x):
        return sla.lu_solve(self._lu, x, check_finite=False)

    def sample_fixed_point(self, rng, radius=10.0):
        N = self._kernel_basis
        if N.shape[1] == 0:
            return np.zeros(self.dim)
        return N @ (radius * rng.standard_normal(N.shape[1]))

    def pack(self, d):
        v1, v2, sc, lu, piv = super().pack(d)
        lu[:, :] = self._lu[0]
        piv[:] = self._lu[1]
        return v1, v2, sc, lu, piv


# -- test fixtures (not firmly nonexpansive, excluded from the catalog) --


@dataclass(frozen=True, eq=False)
class ScaleFixture(FneOperator):
    """``x -> factor * x``.  For ``factor > 1`` it violates FNE, nonexpansiveness
    and the cutter property at once."""

    factor: float = 2.0
    size: int | None = None

    kind: ClassVar[str] = "fixture_scale"
    in_catalog: ClassVar[bool] = False

    @property
    def dim(self) -> int | None:
        return self.size

    def _apply(self, x):
        return self.factor * x

    def sample_fixed_point(self, rng, radius=10.0):
        return np.zeros(self.size)


@dataclass(frozen=True, eq=False)
class FoldFixture(FneOperator):
    """Odd, coordinatewise map that is nonexpansive and a cutter but not FNE.

    Per coordinate with ``s = |x|``: ``s/2`` on ``[0, 2w]``, then slope -1 down
    to zero at ``3w``, zero beyond.  The decreasing piece breaks firm
    nonexpansiveness while ``Tx`` stays between 0 and ``x`` (cutter, Fix = {0})
    and every piece has slope at most 1 in magnitude.
    """

    width: float = 1.0
    size: int | None = None

    kind: ClassVar[str] = "fixture_fold"
    in_catalog: ClassVar[bool] = False

    @property
    def dim(self) -> int | None:
        return self.size

    def _apply(self, x):
        w = self.width
        s = np.abs(x)
        g = np.where(s <= 2 * w, 0.5 * s, np.maximum(3 * w - s, 0.0))
        return np.sign(x) * g

    def sample_fixed_point(self, rng, radius=10.0):
        return np.zeros(self.size)


def apply(op: FneOperator, x) -> np.ndarray:
    """Evaluate ``op`` at ``x``."""
    x = as_vector(x, op.dim)
    return op._apply(x)


@dataclass(frozen=True, eq=False)
class OperatorStack:
    """Ordered family ``T_1, ..., T_m`` sharing one ambient dimension."""

    ops: tuple[FneOperator, ...]
    dim: int = field(default=None)

    def __post_init__(self):
        ops = tuple(self.ops)
        if len(ops) < 1:
            raise ValueError("operator stack needs at least one operator (m >= 1)")
        dims = {op.dim for op in ops if op.dim is not None}
        if self.dim is not None:
            dims.add(int(self.dim))
        if len(dims) > 1:
            raise DimensionError(f"operators disagree on dimension: {sorted(dims)}")
        if not dims:
            raise DimensionError("stack dimension cannot be inferred; pass dim=")
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "dim", dims.pop())

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __getitem__(self, i):
        return self.ops[i]

    @property
    def compiled(self) -> bool:
        """True when every member can be evaluated by the compiled core."""
        return all(op.kernel_code is not None for op in self.ops)

    @cached_property
    def packed(self):
        """Parameter arrays consumed by the SCM kernels."""
        d, m = self.dim, len(self.ops)
        kinds = np.empty(m, dtype=np.int32)
        v1 = np.zeros((m, d))
        v2 = np.zeros((m, d))
        sc = np.zeros((m, 2))
        lu = np.zeros((m, d, d))
        piv = np.zeros((m, d), dtype=np.int32)
        for i, op in enumerate(self.ops):
            if op.kernel_code is None:
                raise TypeError(f"operator {op.kind!r} has no compiled form")
            kinds[i] = op.kernel_code
            v1[i], v2[i], sc[i], lu[i], piv[i] = op.pack(d)
        return kinds, v1, v2, sc, lu, piv


def apply_stack(stack: OperatorStack, x, errors: Sequence | None = None):
    """Sequential pass ``phi_i = T_i(phi_{i-1}) + e_i`` starting at ``phi_0 = x``.

    Returns ``(phi_m, [phi_0, ..., phi_m])``.
    """
    phi = as_vector(x, stack.dim)
    m = len(stack)
    if errors is not None:
        if len(errors) != m:
            raise DimensionError(f"expected {m} error vectors, got {len(errors)}")
        errors = [as_vector(e, stack.dim, name="error") for e in errors]
    seq = [phi.copy()]
    for i, op in enumerate(stack.ops):
        phi = op._apply(phi)
        if errors is not None:
            phi = phi + errors[i]
        seq.append(phi)
    return phi, seq


def fixed_point_residual(stack: OperatorStack, x) -> float:
    """``max_i ||T_i x - x||``, zero exactly on the common fixed-point set."""
    x = as_vector(x, stack.dim)
    return max(_scaled_norm(op._apply(x) - x) for op in stack.ops)


def _scaled_norm(r) -> float:
    # plain sqrt(sum r^2) underflows to 0 for tiny nonzero r
    s = float(np.max(np.abs(r)))
    return s * float(np.linalg.norm(r / s)) if s > 0.0 else 0.0
