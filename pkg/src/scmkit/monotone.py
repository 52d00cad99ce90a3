"""Strongly monotone, Lipschitz maps and the damped step ``x - mu*beta*F(x)``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .operators import DimensionError, as_vector

__all__ = [
    "ParameterError",
    "MonotoneMap",
    "Identity",
    "ClosestPoint",
    "Affine",
    "StepParams",
    "evaluate",
    "tau",
    "mu_upper",
    "auto_mu",
    "u_beta_step",
]

OVERRIDE_TOL = 1e-8

# kernel dispatch codes, shared with the compiled core
F_IDENTITY, F_CLOSEST, F_AFFINE = range(3)


class ParameterError(ValueError):
    """A step parameter lies outside the range where the iteration is valid."""


class MonotoneMap:
    """Map ``F`` with strong-monotonicity modulus ``eta`` and Lipschitz ``kappa``."""

    kind: ClassVar[str] = ""
    kernel_code: ClassVar[int] = -1
    eta: float
    kappa: float

    @property
    def dim(self) -> int | None:
        return None

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _eval_rows(self, X: np.ndarray) -> np.ndarray:
        """``F`` applied to every row of ``X``."""
        return np.array([self._eval(x) for x in X])

    def pack(self, d: int):
        return np.zeros(d), np.zeros((d, d))


@dataclass(frozen=True, eq=False)
class Identity(MonotoneMap):
    """``F = Id``; the VIP then selects the minimal-norm common fixed point."""

    kind: ClassVar[str] = "identity"
    kernel_code: ClassVar[int] = F_IDENTITY
    eta: ClassVar[float] = 1.0
    kappa: ClassVar[float] = 1.0

    def _eval(self, x):
        return x.copy()

    def _eval_rows(self, X):
        return X.copy()


@dataclass(frozen=True, eq=False)
class ClosestPoint(MonotoneMap):
    """``F = Id - a``; the VIP solution is the projection of ``a``."""

    a: np.ndarray

    kind: ClassVar[str] = "closest_point"
    kernel_code: ClassVar[int] = F_CLOSEST
    eta: ClassVar[float] = 1.0
    kappa: ClassVar[float] = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", as_vector(self.a, name="a"))

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def _eval(self, x):
        return x - self.a

    def _eval_rows(self, X):
        return X - self.a

    def pack(self, d):
        vec, mat = super().pack(d)
        vec[:] = self.a
        return vec, mat


@dataclass(frozen=True, eq=False, init=False)
class Affine(MonotoneMap):
    """``F(x) = A x + b``.

    ``eta`` is the smallest eigenvalue of the symmetric part of ``A`` and
    ``kappa`` its largest singular value, both computed here.  Declared
    values are accepted only when the computed ones imply them (within
    1e-8); the declared values are then used.
    """

    A: np.ndarray
    b: np.ndarray
    eta: float
    kappa: float

    kind: ClassVar[str] = "affine"
    kernel_code: ClassVar[int] = F_AFFINE

    def __init__(self, A, b=None, eta: float | None = None, kappa: float | None = None):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise DimensionError(f"A must be a square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("A contains non-finite entries")
        b = np.zeros(A.shape[0]) if b is None else as_vector(b, A.shape[0], name="b")
        eta_c = float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])
        kappa_c = float(np.linalg.norm(A, 2))
        if not eta_c > 0:
            raise ParameterError(
                f"affine map is not strongly monotone: lambda_min((A+A^T)/2) = {eta_c:.3e}"
            )
        if eta is not None:
            eta = float(eta)
            if not (0 < eta <= eta_c + OVERRIDE_TOL):
                raise ParameterError(
                    f"declared eta={eta!r} is not certified (computed {eta_c!r})"
                )
        if kappa is not None:
            kappa = float(kappa)
            if not kappa >= kappa_c - OVERRIDE_TOL:
                raise ParameterError(
                    f"declared kappa={kappa!r} is not certified (computed {kappa_c!r})"
                )
        eta = eta_c if eta is None else eta
        kappa = max(kappa_c, eta) if kappa is None else kappa
        if kappa < eta:
            raise ParameterError(f"kappa={kappa!r} < eta={eta!r}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "kappa", kappa)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def _eval(self, x):
        return self.A @ x + self.b

    def _eval_rows(self, X):
        return X @ self.A.T + self.b

    def pack(self, d):
        return self.b.copy(), self.A.copy()


def evaluate(F: MonotoneMap, x) -> np.ndarray:
    """Evaluate ``F`` at ``x``."""
    return F._eval(as_vector(x, F.dim))


def mu_upper(eta: float, kappa: float) -> float:
    """Open upper end ``2*eta/kappa**2`` of the admissible ``mu`` interval."""
    return 2.0 * eta / kappa**2


def auto_mu(eta: float, kappa: float) -> float:
    """Midpoint of ``(0, 2*eta/kappa**2)``."""
    return eta / kappa**2


def _check_constants(eta, kappa):
    if not (math.isfinite(eta) and math.isfinite(kappa)):
        raise ParameterError("eta and kappa must be finite")
    if not (kappa >= eta > 0):
        raise ParameterError(f"need kappa >= eta > 0, got eta={eta!r}, kappa={kappa!r}")


def _check_mu(mu, eta, kappa):
    _check_constants(eta, kappa)
    if not (0 < mu < mu_upper(eta, kappa)):
        raise ParameterError(
            f"mu={mu!r} outside (0, 2*eta/kappa^2) = (0, {mu_upper(eta, kappa)!r})"
        )


def tau(mu: float, eta: float, kappa: float) -> float:
    """Contraction constant ``1 - sqrt(1 + mu^2 kappa^2 - 2 mu eta)``."""
    _check_mu(mu, eta, kappa)
    radicand = 1.0 + mu * mu * kappa * kappa - 2.0 * mu * eta
    return 1.0 - math.sqrt(max(radicand, 0.0))


@dataclass(frozen=True)
class StepParams:
    mu: float
    beta: float

    def __post_init__(self):
        if not (0 < self.beta <= 1):
            raise ParameterError(f"beta={self.beta!r} outside (0, 1]")

    def validate(self, F: MonotoneMap) -> "StepParams":
        _check_mu(self.mu, F.eta, F.kappa)
        return self


def u_beta_step(F: MonotoneMap, p: StepParams, x) -> np.ndarray:
    """Damped step ``x - mu*beta*F(x)``."""
    p.validate(F)
    x = as_vector(x, F.dim)
    return x - (p.mu * p.beta) * F._eval(x)
