"""Pure-Python SCM loop.  Mirrors ``_kernels.pyx`` and also handles
operators without a compiled form."""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

NAME = "python"


def run_chunk(stack, F, mu, x, n0, betas, lams, errs, tol, known, keep_phis):
    """Advance ``x`` in place over ``len(betas)`` iterations starting at ``n0``.

    Stops early, after the iteration that meets it, once both the fixed-point
    residual of the new iterate and the step norm are ``<= tol``.
    """
    count = betas.shape[0]
    m, d = len(stack), stack.dim
    ops = [op._apply for op in stack.ops]
    Fe = F._eval
    residual = np.zeros(count)
    step = np.zeros(count)
    err_norm = np.zeros(count)
    dist = np.zeros(count)
    phis = np.zeros((count, m + 1, d)) if keep_phis else None
    norm = np.linalg.norm
    cur = x.copy()
    met = False
    k = 0
    while k < count:
        phi0 = cur - (mu * betas[k]) * Fe(cur)
        phi = phi0
        if keep_phis:
            phis[k, 0] = phi0
        en = 0.0
        for i in range(m):
            phi = ops[i](phi)
            if errs is not None:
                e = errs[k, i]
                phi = phi + e
                en += norm(e)
            if keep_phis:
                phis[k, i + 1] = phi
        lam = lams[k]
        nxt = (1.0 - lam) * phi0 + lam * phi
        step[k] = norm(nxt - cur)
        residual[k] = max(norm(T(nxt) - nxt) for T in ops)
        err_norm[k] = en
        if known is not None:
            dist[k] = norm(nxt - known)
        cur = nxt
        k += 1
        if residual[k - 1] <= tol and step[k - 1] <= tol:
            met = True
            break
    x[:] = cur
    return SimpleNamespace(
        executed=k, met=met, residual=residual, step=step, err_norm=err_norm,
        dist=dist, phis=phis,
    )
