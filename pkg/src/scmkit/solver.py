"""Sequential Constraint Method: schedules, error injection and the driver loop.

One iteration, for the current iterate ``x`` and index ``n >= 1``::

    phi_0 = x - mu * beta_n * F(x)
    phi_i = T_i(phi_{i-1}) + e_i^n,      i = 1..m
    x_next = (1 - lambda_n) * phi_0 + lambda_n * phi_m
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _backend
from .monotone import MonotoneMap, ParameterError, StepParams, auto_mu, mu_upper, u_beta_step
from .operators import OperatorStack, apply_stack, as_vector, fixed_point_residual

__all__ = [
    "ConfigError",
    "ScheduleExhausted",
    "PowerBeta",
    "ExplicitBeta",
    "ConstantLambda",
    "ExplicitLambda",
    "NoError",
    "PowerRandomError",
    "PowerFixedError",
    "ScmConfig",
    "IterationRecord",
    "Status",
    "SolveResult",
    "draw_errors",
    "draw_error_block",
    "scm_step",
    "solve",
]

log = logging.getLogger(__name__)

CHUNK = 8192


class ConfigError(ValueError):
    """Configuration violates a convergence hypothesis."""


class ScheduleExhausted(IndexError):
    """An explicit schedule has no entry for the requested iteration."""


# -- step-size schedules ------------------------------------------------------


@dataclass(frozen=True)
class PowerBeta:
    """``beta_n = beta0 / n**p`` with ``beta0 in (0, 1]`` and ``p in (0, 1]``."""

    beta0: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if not (0 < self.beta0 <= 1):
            raise ConfigError(f"beta0={self.beta0!r} outside (0, 1]: violates beta_n in (0, 1]")
        if not self.p > 0:
            raise ConfigError(f"p={self.p!r} <= 0 violates lim beta_n = 0")
        if self.p > 1:
            raise ConfigError(f"p={self.p!r} > 1 violates sum beta_n = infinity")

    def values(self, n0: int, count: int) -> np.ndarray:
        n = np.arange(n0, n0 + count, dtype=float)
        return self.beta0 / n**self.p


@dataclass(frozen=True)
class ExplicitBeta:
    """User-listed ``beta_n``; decay and divergence are user-asserted."""

    values_: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values_)
        if not vals:
            raise ConfigError("explicit beta schedule is empty")
        bad = [v for v in vals if not (0 < v <= 1)]
        if bad:
            raise ConfigError(f"beta value {bad[0]!r} outside (0, 1]")
        object.__setattr__(self, "values_", vals)
        log.info("explicit beta schedule: lim beta_n = 0 and sum beta_n = inf are user-asserted")

    def values(self, n0: int, count: int) -> np.ndarray:
        if n0 + count - 1 > len(self.values_):
            raise ScheduleExhausted(
                f"beta schedule has {len(self.values_)} entries, iteration {n0 + count - 1} requested"
            )
        return np.array(self.values_[n0 - 1 : n0 - 1 + count])


def _check_epsilon(eps):
    if not (0 < eps <= 0.5):
        raise ConfigError(f"epsilon={eps!r} outside (0, 1/2]")


@dataclass(frozen=True)
class ConstantLambda:
    value: float = 0.5
    epsilon: float = 0.5

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        if not (self.epsilon <= self.value <= 1 - self.epsilon):
            raise ConfigError(
                f"lambda={self.value!r} outside [epsilon, 1 - epsilon] = "
                f"[{self.epsilon!r}, {1 - self.epsilon!r}]"
            )

    def values(self, n0: int, count: int) -> np.ndarray:
        return np.full(count, self.value)


@dataclass(frozen=True)
class ExplicitLambda:
    values_: tuple[float, ...]
    epsilon: float = 0.5

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        vals = tuple(float(v) for v in self.values_)
        if not vals:
            raise ConfigError("explicit lambda schedule is empty")
        for v in vals:
            if not (self.epsilon <= v <= 1 - self.epsilon):
                raise ConfigError(
                    f"lambda value {v!r} outside [epsilon, 1 - epsilon] = "
                    f"[{self.epsilon!r}, {1 - self.epsilon!r}]"
                )
        object.__setattr__(self, "values_", vals)

    def values(self, n0: int, count: int) -> np.ndarray:
        if n0 + count - 1 > len(self.values_):
            raise ScheduleExhausted(
                f"lambda schedule has {len(self.values_)} entries, iteration {n0 + count - 1} requested"
            )
        return np.array(self.values_[n0 - 1 : n0 - 1 + count])


# -- error models ---------------------------------------------------------------


def _check_power(c, q, unsafe):
    if not (math.isfinite(c) and c >= 0):
        raise ConfigError(f"error scale c={c!r} must be finite and >= 0")
    if not q > 1 and not unsafe:
        raise ConfigError(f"q={q!r} <= 1 violates sum_n ||e_i^n|| < infinity")
    if not q > 0:
        raise ConfigError(f"q={q!r} must be > 0")


@dataclass(frozen=True)
class NoError:
    def block(self, n0, count, m, dim):
        return None


@dataclass(frozen=True)
class PowerRandomError:
    """``||e_i^n|| = c / n**q`` along a uniform random direction.

    The direction for ``(i, n)`` is read from a Philox stream keyed by
    ``(seed, i)`` at a block offset fixed by ``n``, so any chunking of the
    run reproduces the same vectors.
    """

    c: float
    q: float
    seed: int = 0
    unsafe: bool = False

    def __post_init__(self):
        _check_power(self.c, self.q, self.unsafe)

    def block(self, n0, count, m, dim):
        out = np.empty((count, m, dim))
        blocks = (2 * dim + 3) // 4  # 4 raw words per Philox block, 2 per normal
        words = 4 * blocks
        for i in range(m):
            bitgen = np.random.Philox(key=[self.seed & 0xFFFFFFFFFFFFFFFF, i + 1],
                                      counter=(n0 - 1) * blocks)
            raw = bitgen.random_raw(count * words).reshape(count, words)[:, : 2 * dim]
            u = ((raw >> np.uint64(11)).astype(float) + 1.0) * 2.0**-53  # (0, 1]
            u1, u2 = u[:, :dim], u[:, dim:]
            z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
            z /= np.linalg.norm(z, axis=1, keepdims=True)
            out[:, i, :] = z
        n = np.arange(n0, n0 + count, dtype=float)
        out *= (self.c / n**self.q)[:, None, None]
        return out


@dataclass(frozen=True, eq=False)
class PowerFixedError:
    """``e_i^n = (c / n**q) * direction / ||direction||`` for every operator."""

    c: float
    q: float
    direction: np.ndarray
    unsafe: bool = False

    def __post_init__(self):
        _check_power(self.c, self.q, self.unsafe)
        d = as_vector(self.direction, name="direction")
        norm = np.linalg.norm(d)
        if not norm > 0:
            raise ConfigError("error direction must be nonzero")
        object.__setattr__(self, "direction", d / norm)

    def block(self, n0, count, m, dim):
        if self.direction.shape[0] != dim:
            raise ConfigError(f"error direction has dimension {self.direction.shape[0]}, problem has {dim}")
        n = np.arange(n0, n0 + count, dtype=float)
        scale = self.c / n**self.q
        out = np.broadcast_to(self.direction, (count, m, dim)) * scale[:, None, None]
        return np.ascontiguousarray(out)


def draw_error_block(model, n0: int, count: int, m: int, dim: int) -> np.ndarray | None:
    """Errors for iterations ``n0..n0+count-1``, shape ``(count, m, dim)``, or None."""
    if n0 < 1:
        raise ValueError("iteration index n must be >= 1")
    return model.block(n0, count, m, dim)


def draw_errors(model, n: int, m: int, dim: int) -> list[np.ndarray]:
    """The ``m`` error vectors ``e_1^n, ..., e_m^n``."""
    blk = draw_error_block(model, n, 1, m, dim)
    if blk is None:
        return [np.zeros(dim) for _ in range(m)]
    return [blk[0, i].copy() for i in range(m)]


# -- configuration and results ----------------------------------------------


@dataclass(frozen=True)
class ScmConfig:
    mu: float | str = "auto"
    beta: PowerBeta | ExplicitBeta = field(default_factory=PowerBeta)
    lam: ConstantLambda | ExplicitLambda = field(default_factory=ConstantLambda)
    error: NoError | PowerRandomError | PowerFixedError = field(default_factory=NoError)
    max_iters: int = 1_000_000
    residual_tol: float = 1e-6
    trace_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.mu, str) and self.mu == "auto"):
            if isinstance(self.mu, str):
                raise ConfigError(f"mu must be a number or 'auto', got {self.mu!r}")
            if not (math.isfinite(self.mu) and self.mu > 0):
                raise ConfigError(f"mu={self.mu!r} must be finite and > 0")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters={self.max_iters!r} must be an integer >= 1")
        if not self.residual_tol >= 0:
            raise ConfigError(f"residual_tol={self.residual_tol!r} must be >= 0")
        if int(self.trace_every) != self.trace_every or self.trace_every < 1:
            raise ConfigError(f"trace_every={self.trace_every!r} must be an integer >= 1")

    def resolve_mu(self, F: MonotoneMap) -> float:
        mu = auto_mu(F.eta, F.kappa) if self.mu == "auto" else float(self.mu)
        if not (0 < mu < mu_upper(F.eta, F.kappa)):
            raise ConfigError(
                f"mu={mu!r} outside (0, 2*eta/kappa^2) = (0, {mu_upper(F.eta, F.kappa)!r})"
            )
        return mu

    def error_free(self) -> "ScmConfig":
        return replace(self, error=NoError())


@dataclass(frozen=True)
class IterationRecord:
    n: int
    beta_n: float
    lambda_n: float
    fixed_point_residual: float
    step_norm: float
    error_norm_total: float
    dist_to_known: float | None = None


class Status(str, enum.Enum):
    RESIDUAL_MET = "ResidualMet"
    MAX_ITERS = "MaxIters"


@dataclass
class SolveResult:
    x_final: np.ndarray
    status: Status
    iters: int
    trace: list[IterationRecord]
    final_residual: float
    # phi_0..phi_m per recorded iteration, shape (len(trace), m+1, d), when requested
    intermediates: np.ndarray | None = None
    backend: str = ""


# -- iteration ------------------------------------------------------------------


def scm_step(x, n: int, stack: OperatorStack, F: MonotoneMap, cfg: ScmConfig, known=None):
    """One iteration from ``x = x^n``.

    Returns ``(x_next, record, [phi_0, ..., phi_m])``.  The record's residual
    refers to ``x_next``.
    """
    if n < 1:
        raise ValueError("iteration index n must be >= 1")
    x = as_vector(x, stack.dim)
    mu = cfg.resolve_mu(F)
    beta = float(cfg.beta.values(n, 1)[0])
    lam = float(cfg.lam.values(n, 1)[0])
    errs = draw_error_block(cfg.error, n, 1, len(stack), stack.dim)
    phi0 = u_beta_step(F, StepParams(mu, beta), x)
    err_list = None if errs is None else list(errs[0])
    phim, seq = apply_stack(stack, phi0, err_list)
    x_next = (1.0 - lam) * phi0 + lam * phim
    rec = IterationRecord(
        n=n,
        beta_n=beta,
        lambda_n=lam,
        fixed_point_residual=fixed_point_residual(stack, x_next),
        step_norm=float(np.linalg.norm(x_next - x)),
        error_norm_total=0.0 if errs is None else float(np.linalg.norm(errs[0], axis=1).sum()),
        dist_to_known=None if known is None else float(np.linalg.norm(x_next - known)),
    )
    return x_next, rec, seq


def solve(
    stack: OperatorStack,
    F: MonotoneMap,
    x0=None,
    cfg: ScmConfig | None = None,
    *,
    known=None,
    keep_intermediates: bool = False,
    backend: str | None = None,
) -> SolveResult:
    """Run the iteration from ``x0`` (default: zero) until both the fixed-point
    residual and the step norm are ``<= residual_tol``, or ``max_iters``."""
    cfg = ScmConfig() if cfg is None else cfg
    d, m = stack.dim, len(stack)
    if F.dim is not None and F.dim != d:
        raise ValueError(f"F has dimension {F.dim}, operators have {d}")
    x = np.zeros(d) if x0 is None else as_vector(x0, d, name="x0").copy()
    known = None if known is None else as_vector(known, d, name="known_solution")
    mu = cfg.resolve_mu(F)
    kern = _backend.select(backend, stack)

    trace: list[IterationRecord] = []
    kept: list[np.ndarray] = []
    every = int(cfg.trace_every)
    n0 = 1
    status = Status.MAX_ITERS
    last = None
    while n0 <= cfg.max_iters:
        count = min(CHUNK, cfg.max_iters - n0 + 1)
        betas = np.ascontiguousarray(cfg.beta.values(n0, count), dtype=float)
        lams = np.ascontiguousarray(cfg.lam.values(n0, count), dtype=float)
        errs = draw_error_block(cfg.error, n0, count, m, d)
        out = kern.run_chunk(
            stack, F, mu, x, n0, betas, lams, errs, float(cfg.residual_tol), known,
            keep_intermediates,
        )
        done, met = out.executed, out.met
        ns = np.arange(n0, n0 + done)
        sel = np.flatnonzero(ns % every == 0)
        if met or n0 + done - 1 == cfg.max_iters:
            if sel.size == 0 or sel[-1] != done - 1:
                sel = np.append(sel, done - 1)
        cols = zip(ns[sel].tolist(), betas[sel].tolist(), lams[sel].tolist(),
                   out.residual[sel].tolist(), out.step[sel].tolist(), out.err_norm[sel].tolist(),
                   out.dist[sel].tolist() if known is not None else [None] * sel.size)
        trace.extend(IterationRecord(*c) for c in cols)
        if keep_intermediates:
            kept.append(out.phis[sel])
        last = (int(ns[done - 1]), float(out.residual[done - 1]))
        n0 += done
        if met:
            status = Status.RESIDUAL_MET
            break

    return SolveResult(
        x_final=x,
        status=status,
        iters=last[0],
        trace=trace,
        final_residual=last[1],
        intermediates=np.concatenate(kept) if keep_intermediates else None,
        backend=kern.NAME,
    )
