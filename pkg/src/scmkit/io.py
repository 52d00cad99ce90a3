"""Problem/config JSON schemas, JSONL traces and atomic file output.

Problem file (``schema_version`` 1)::

    {"schema_version": 1, "dim": 2,
     "operators": [{"type": "halfspace", "a": [1, 0], "b": 0}, ...],
     "F": {"type": "identity"},
     "known_solution": [0.5, 0.5]}

Operator types: ``halfspace{a,b}``, ``hyperplane{a,b}``, ``ball{center,radius}``,
``box{lo,hi}`` (``null`` = unbounded), ``soft_threshold{t}``,
``linear_resolvent{A,r}``; test fixtures ``fixture_scale{factor}`` and
``fixture_fold{width}``.  Map types: ``identity``, ``closest_point{a}``,
``affine{A,b[,eta,kappa]}``.  Matrices are row-major nested arrays.

Config file: every field optional, see ``DEFAULT_CONFIG``.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .monotone import Affine, ClosestPoint, Identity, MonotoneMap
from .operators import (
    BallProjection,
    BoxProjection,
    FneOperator,
    FoldFixture,
    HalfspaceProjection,
    HyperplaneProjection,
    LinearResolvent,
    OperatorStack,
    ScaleFixture,
    SoftThreshold,
)
from .solver import (
    ConfigError,
    ConstantLambda,
    ExplicitBeta,
    ExplicitLambda,
    IterationRecord,
    NoError,
    PowerBeta,
    PowerFixedError,
    PowerRandomError,
    ScmConfig,
    SolveResult,
)

__all__ = [
    "SCHEMA_VERSION",
    "SchemaError",
    "Problem",
    "problem_from_dict",
    "problem_to_dict",
    "load_problem",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "record_to_dict",
    "record_from_dict",
    "write_trace",
    "read_trace",
    "summary_dict",
    "atomic_write_text",
    "dumps",
]

SCHEMA_VERSION = 1
SEED_ENV = "SCMKIT_SEED"


class SchemaError(ValueError):
    """Malformed problem/config document; the message names the field."""


@dataclass(frozen=True, eq=False)
class Problem:
    dim: int
    stack: OperatorStack
    F: MonotoneMap
    known_solution: np.ndarray | None = None


# -- helpers ---------------------------------------------------------------------


def _req(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in d:
        raise SchemaError(f"{where}.{key}: missing required field")
    return d[key]


def _num(v, where: str, allow_null=False) -> float:
    if v is None and allow_null:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise SchemaError(f"{where}: must be finite")
    return v


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise SchemaError(f"{where}: expected an integer, got {v!r}")
    return int(v)


def _vec(v, where: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(v, list):
        raise SchemaError(f"{where}: expected an array of numbers")
    out = np.array([_num(x, f"{where}[{i}]") for i, x in enumerate(v)], dtype=float)
    if dim is not None and out.shape[0] != dim:
        raise SchemaError(f"{where}: has length {out.shape[0]}, dim is {dim}")
    return out


def _bounds(v, where: str, dim: int, fill: float) -> np.ndarray:
    if not isinstance(v, list) or len(v) != dim:
        raise SchemaError(f"{where}: expected an array of length {dim}")
    return np.array([fill if x is None else _num(x, f"{where}[{i}]") for i, x in enumerate(v)])


def _mat(v, where: str, dim: int) -> np.ndarray:
    if not isinstance(v, list) or len(v) != dim:
        raise SchemaError(f"{where}: expected {dim} rows")
    return np.array([_vec(row, f"{where}[{i}]", dim) for i, row in enumerate(v)])


def _tolist(v: np.ndarray) -> list:
    return [float(x) for x in v]


def _bounds_list(v: np.ndarray) -> list:
    return [None if not math.isfinite(x) else float(x) for x in v]


# -- problem -----------------------------------------------------------------------


def _operator_from_dict(d: dict, where: str, dim: int) -> FneOperator:
    kind = _req(d, "type", where)
    try:
        if kind == "halfspace":
            return HalfspaceProjection(_vec(_req(d, "a", where), f"{where}.a", dim), _num(_req(d, "b", where), f"{where}.b"))
        if kind == "hyperplane":
            return HyperplaneProjection(_vec(_req(d, "a", where), f"{where}.a", dim), _num(_req(d, "b", where), f"{where}.b"))
        if kind == "ball":
            return BallProjection(_vec(_req(d, "center", where), f"{where}.center", dim),
                                  _num(_req(d, "radius", where), f"{where}.radius"))
        if kind == "box":
            return BoxProjection(_bounds(_req(d, "lo", where), f"{where}.lo", dim, -np.inf),
                                 _bounds(_req(d, "hi", where), f"{where}.hi", dim, np.inf))
        if kind == "soft_threshold":
            return SoftThreshold(_num(_req(d, "t", where), f"{where}.t"), size=dim)
        if kind == "linear_resolvent":
            return LinearResolvent(_mat(_req(d, "A", where), f"{where}.A", dim),
                                   _num(_req(d, "r", where), f"{where}.r"))
        if kind == "fixture_scale":
            return ScaleFixture(_num(d.get("factor", 2.0), f"{where}.factor"), size=dim)
        if kind == "fixture_fold":
            return FoldFixture(_num(d.get("width", 1.0), f"{where}.width"), size=dim)
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    raise SchemaError(f"{where}.type: unknown operator type {kind!r}")


def _operator_to_dict(op: FneOperator) -> dict:
    if isinstance(op, (HalfspaceProjection, HyperplaneProjection)):
        return {"type": op.kind, "a": _tolist(op.a), "b": op.b}
    if isinstance(op, BallProjection):
        return {"type": op.kind, "center": _tolist(op.center), "radius": op.radius}
    if isinstance(op, BoxProjection):
        return {"type": op.kind, "lo": _bounds_list(op.lo), "hi": _bounds_list(op.hi)}
    if isinstance(op, SoftThreshold):
        return {"type": op.kind, "t": op.t}
    if isinstance(op, LinearResolvent):
        return {"type": op.kind, "A": [_tolist(r) for r in op.A], "r": op.r}
    if isinstance(op, ScaleFixture):
        return {"type": op.kind, "factor": op.factor}
    if isinstance(op, FoldFixture):
        return {"type": op.kind, "width": op.width}
    raise TypeError(f"cannot serialize operator {op!r}")


def _map_from_dict(d: dict, dim: int) -> MonotoneMap:
    kind = _req(d, "type", "F")
    try:
        if kind == "identity":
            return Identity()
        if kind == "closest_point":
            return ClosestPoint(_vec(_req(d, "a", "F"), "F.a", dim))
        if kind == "affine":
            A = _mat(_req(d, "A", "F"), "F.A", dim)
            b = _vec(d["b"], "F.b", dim) if "b" in d else None
            eta = _num(d["eta"], "F.eta") if "eta" in d else None
            kappa = _num(d["kappa"], "F.kappa") if "kappa" in d else None
            return Affine(A, b, eta=eta, kappa=kappa)
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(f"F: {exc}") from exc
    raise SchemaError(f"F.type: unknown map type {kind!r}")


def _map_to_dict(F: MonotoneMap) -> dict:
    if isinstance(F, Identity):
        return {"type": "identity"}
    if isinstance(F, ClosestPoint):
        return {"type": "closest_point", "a": _tolist(F.a)}
    if isinstance(F, Affine):
        return {"type": "affine", "A": [_tolist(r) for r in F.A], "b": _tolist(F.b),
                "eta": F.eta, "kappa": F.kappa}
    raise TypeError(f"cannot serialize map {F!r}")


def _check_version(doc, what):
    v = doc.get("schema_version", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise SchemaError(f"{what}.schema_version: unsupported version {v!r}")


def problem_from_dict(doc: dict) -> Problem:
    if not isinstance(doc, dict):
        raise SchemaError("problem: expected a JSON object")
    _check_version(doc, "problem")
    dim = _int(_req(doc, "dim", "problem"), "problem.dim")
    if dim < 1:
        raise SchemaError("problem.dim: must be >= 1")
    ops = _req(doc, "operators", "problem")
    if not isinstance(ops, list) or not ops:
        raise SchemaError("problem.operators: must be a nonempty array")
    stack = OperatorStack(tuple(_operator_from_dict(o, f"operators[{i}]", dim) for i, o in enumerate(ops)), dim=dim)
    F = _map_from_dict(_req(doc, "F", "problem"), dim)
    known = doc.get("known_solution")
    known = None if known is None else _vec(known, "problem.known_solution", dim)
    return Problem(dim, stack, F, known)


def problem_to_dict(p: Problem) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "dim": p.dim,
        "operators": [_operator_to_dict(op) for op in p.stack.ops],
        "F": _map_to_dict(p.F),
    }
    if p.known_solution is not None:
        out["known_solution"] = _tolist(p.known_solution)
    return out


def _load_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


def load_problem(path) -> Problem:
    return problem_from_dict(_load_json(path))


# -- config ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "mu": "auto",
    "beta": {"type": "power", "beta0": 1.0, "p": 1.0},
    "lambda": {"type": "constant", "value": 0.5},
    "epsilon": 0.5,
    "error": {"type": "none"},
    "max_iters": 1_000_000,
    "residual_tol": 1e-6,
    "trace_every": 1,
    "seed": 0,
}


def default_seed() -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return DEFAULT_CONFIG["seed"]
    try:
        return int(env)
    except ValueError as exc:
        raise SchemaError(f"{SEED_ENV}: expected an integer, got {env!r}") from exc


def config_from_dict(doc: dict | None, unsafe_error: bool = False) -> ScmConfig:
    doc = {} if doc is None else doc
    if not isinstance(doc, dict):
        raise SchemaError("config: expected a JSON object")
    _check_version(doc, "config")
    unknown = set(doc) - set(DEFAULT_CONFIG)
    if unknown:
        raise SchemaError(f"config.{sorted(unknown)[0]}: unknown field")
    g = lambda k: doc.get(k, DEFAULT_CONFIG[k])
    try:
        mu = g("mu")
        if mu != "auto":
            mu = _num(mu, "config.mu")
        eps = _num(g("epsilon"), "config.epsilon")

        b = g("beta")
        bt = _req(b, "type", "config.beta")
        if bt == "power":
            beta = PowerBeta(_num(b.get("beta0", 1.0), "config.beta.beta0"), _num(b.get("p", 1.0), "config.beta.p"))
        elif bt == "explicit":
            beta = ExplicitBeta(tuple(_vec(_req(b, "values", "config.beta"), "config.beta.values")))
        else:
            raise SchemaError(f"config.beta.type: unknown schedule {bt!r}")

        lam_doc = g("lambda")
        lt = _req(lam_doc, "type", "config.lambda")
        if lt == "constant":
            lam = ConstantLambda(_num(lam_doc.get("value", 0.5), "config.lambda.value"), eps)
        elif lt == "explicit":
            lam = ExplicitLambda(tuple(_vec(_req(lam_doc, "values", "config.lambda"), "config.lambda.values")), eps)
        else:
            raise SchemaError(f"config.lambda.type: unknown schedule {lt!r}")

        seed = _int(doc["seed"], "config.seed") if "seed" in doc else default_seed()
        e = g("error")
        et = _req(e, "type", "config.error")
        if et == "none":
            err = NoError()
        elif et == "power_random":
            err = PowerRandomError(_num(_req(e, "c", "config.error"), "config.error.c"),
                                   _num(_req(e, "q", "config.error"), "config.error.q"),
                                   _int(e.get("seed", seed), "config.error.seed"), unsafe=unsafe_error)
        elif et == "power_fixed":
            err = PowerFixedError(_num(_req(e, "c", "config.error"), "config.error.c"),
                                  _num(_req(e, "q", "config.error"), "config.error.q"),
                                  _vec(_req(e, "direction", "config.error"), "config.error.direction"),
                                  unsafe=unsafe_error)
        else:
            raise SchemaError(f"config.error.type: unknown error model {et!r}")

        return ScmConfig(
            mu=mu, beta=beta, lam=lam, error=err,
            max_iters=_int(g("max_iters"), "config.max_iters"),
            residual_tol=_num(g("residual_tol"), "config.residual_tol"),
            trace_every=_int(g("trace_every"), "config.trace_every"),
            seed=seed,
        )
    except (SchemaError, ConfigError):
        raise
    except (TypeError, AttributeError) as exc:
        raise SchemaError(f"config: malformed document ({exc})") from exc


def config_to_dict(cfg: ScmConfig) -> dict:
    out: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "mu": cfg.mu}
    if isinstance(cfg.beta, PowerBeta):
        out["beta"] = {"type": "power", "beta0": cfg.beta.beta0, "p": cfg.beta.p}
    else:
        out["beta"] = {"type": "explicit", "values": list(cfg.beta.values_)}
    if isinstance(cfg.lam, ConstantLambda):
        out["lambda"] = {"type": "constant", "value": cfg.lam.value}
    else:
        out["lambda"] = {"type": "explicit", "values": list(cfg.lam.values_)}
    out["epsilon"] = cfg.lam.epsilon
    e = cfg.error
    if isinstance(e, NoError):
        out["error"] = {"type": "none"}
    elif isinstance(e, PowerRandomError):
        out["error"] = {"type": "power_random", "c": e.c, "q": e.q, "seed": e.seed}
    else:
        out["error"] = {"type": "power_fixed", "c": e.c, "q": e.q, "direction": _tolist(e.direction)}
    out.update(max_iters=cfg.max_iters, residual_tol=cfg.residual_tol,
               trace_every=cfg.trace_every, seed=cfg.seed)
    return out


def load_config(path, unsafe_error: bool = False) -> ScmConfig:
    return config_from_dict(_load_json(path), unsafe_error=unsafe_error)


# -- traces and summaries -------------------------------------------------------------


_ENCODER = json.JSONEncoder(allow_nan=False)


def dumps(obj) -> str:
    # repr-based float formatting round-trips exactly
    return _ENCODER.encode(obj)


_RECORD_FIELDS = tuple(IterationRecord.__dataclass_fields__)


def record_to_dict(r: IterationRecord) -> dict:
    # asdict deep-copies and is slow on 10^6-line traces
    return {f: getattr(r, f) for f in _RECORD_FIELDS}


def record_from_dict(d: dict) -> IterationRecord:
    rec = IterationRecord(**d)
    vals = [rec.beta_n, rec.lambda_n, rec.fixed_point_residual, rec.step_norm, rec.error_norm_total]
    if rec.dist_to_known is not None:
        vals.append(rec.dist_to_known)
    if not all(math.isfinite(v) for v in vals):
        raise SchemaError(f"trace record n={rec.n}: non-finite field")
    return rec


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _num_json(v) -> str:
    if v is None:
        return "null"
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {v!r} in trace record")
    return repr(float(v))


def record_line(r: IterationRecord) -> str:
    """One JSONL line; byte-identical to ``dumps(record_to_dict(r))``."""
    return (
        f'{{"n": {int(r.n)}, "beta_n": {_num_json(r.beta_n)}, "lambda_n": {_num_json(r.lambda_n)}, '
        f'"fixed_point_residual": {_num_json(r.fixed_point_residual)}, '
        f'"step_norm": {_num_json(r.step_norm)}, "error_norm_total": {_num_json(r.error_norm_total)}, '
        f'"dist_to_known": {_num_json(r.dist_to_known)}}}'
    )


def write_trace(path, records: Iterable[IterationRecord]) -> None:
    atomic_write_text(path, "".join(record_line(r) + "\n" for r in records))


def read_trace(path) -> list[IterationRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(record_from_dict(json.loads(line)))
    for a, b in zip(out, out[1:]):
        if not b.n > a.n:
            raise SchemaError(f"trace: n not strictly increasing at n={b.n}")
    return out


def summary_dict(res: SolveResult, known=None) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "x_final": _tolist(res.x_final),
        "status": res.status.value,
        "iters": res.iters,
        "final_residual": res.final_residual,
    }
    if known is not None:
        out["dist_to_known"] = float(np.linalg.norm(res.x_final - known))
    return out
