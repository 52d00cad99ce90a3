# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SCM loop over the closed-form operator catalog."""

from types import SimpleNamespace

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, fmax, fmin

cnp.import_array()

NAME = "compiled"

# must match operators.K_* and monotone.F_*
cdef enum:
    K_HALFSPACE = 0
    K_HYPERPLANE = 1
    K_BALL = 2
    K_BOX = 3
    K_SOFT = 4
    K_RESOLVENT = 5
    F_IDENTITY = 0
    F_CLOSEST = 1
    F_AFFINE = 2


cdef inline double _dot(const double* a, const double* b, Py_ssize_t d) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t j
    for j in range(d):
        s += a[j] * b[j]
    return s


cdef inline double _dist(const double* a, const double* b, Py_ssize_t d) noexcept nogil:
    cdef double s = 0.0, t
    cdef Py_ssize_t j
    for j in range(d):
        t = a[j] - b[j]
        s += t * t
    return sqrt(s)


cdef void _apply(int kind, const double* v1, const double* v2, const double* sc,
                 const double* lu, const int* piv, const double* x, double* out,
                 Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t j, k
    cdef double s, r, coef, t, v
    if kind == K_HALFSPACE or kind == K_HYPERPLANE:
        s = _dot(v1, x, d) - sc[0]
        if s <= 0.0 and (kind == K_HALFSPACE or s == 0.0):
            for j in range(d):
                out[j] = x[j]
        else:
            coef = s / sc[1]
            for j in range(d):
                out[j] = x[j] - coef * v1[j]
    elif kind == K_BALL:
        r = _dist(x, v1, d)
        if r <= sc[0]:
            for j in range(d):
                out[j] = x[j]
        else:
            coef = sc[0] / r
            for j in range(d):
                out[j] = v1[j] + coef * (x[j] - v1[j])
    elif kind == K_BOX:
        for j in range(d):
            out[j] = fmin(fmax(x[j], v1[j]), v2[j])
    elif kind == K_SOFT:
        t = sc[0]
        for j in range(d):
            v = fabs(x[j]) - t
            if v <= 0.0:
                out[j] = 0.0
            elif x[j] > 0.0:
                out[j] = v
            else:
                out[j] = -v
    elif kind == K_RESOLVENT:
        # LAPACK getrf layout: row swaps in sequence, unit-lower L, upper U
        for j in range(d):
            out[j] = x[j]
        for j in range(d):
            k = piv[j]
            if k != j:
                t = out[j]
                out[j] = out[k]
                out[k] = t
        for j in range(1, d):
            s = out[j]
            for k in range(j):
                s -= lu[j * d + k] * out[k]
            out[j] = s
        for j in range(d - 1, -1, -1):
            s = out[j]
            for k in range(j + 1, d):
                s -= lu[j * d + k] * out[k]
            out[j] = s / lu[j * d + j]


cdef void _eval_F(int fkind, const double* fvec, const double* fmat, const double* x,
                  double* out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t j
    if fkind == F_IDENTITY:
        for j in range(d):
            out[j] = x[j]
    elif fkind == F_CLOSEST:
        for j in range(d):
            out[j] = x[j] - fvec[j]
    else:
        for j in range(d):
            out[j] = _dot(&fmat[j * d], x, d) + fvec[j]


def _run(double[::1] x, const int[::1] kinds, const double[:, ::1] v1,
         const double[:, ::1] v2, const double[:, ::1] sc, const double[:, :, ::1] lu,
         const int[:, ::1] piv, int fkind, const double[::1] fvec,
         const double[:, ::1] fmat, double mu, const double[::1] betas,
         const double[::1] lams, const double[:, :, ::1] errs, bint has_err,
         double tol, const double[::1] known, bint has_known,
         double[::1] residual, double[::1] step, double[::1] err_norm,
         double[::1] dist, double[:, :, ::1] phis, bint keep_phis):
    cdef Py_ssize_t d = x.shape[0], m = kinds.shape[0], count = betas.shape[0]
    cdef Py_ssize_t k = 0, i, j
    cdef double[::1] cur = np.array(x, dtype=np.float64)
    cdef double[::1] phi0 = np.empty(d), a = np.empty(d), b = np.empty(d)
    cdef double[::1] nxt = np.empty(d), fx = np.empty(d)
    cdef double c, lam, en, res, r, s
    cdef bint met = False
    with nogil:
        while k < count:
            _eval_F(fkind, &fvec[0], &fmat[0, 0], &cur[0], &fx[0], d)
            c = mu * betas[k]
            for j in range(d):
                phi0[j] = cur[j] - c * fx[j]
            if keep_phis:
                for j in range(d):
                    phis[k, 0, j] = phi0[j]
            for j in range(d):
                a[j] = phi0[j]
            en = 0.0
            for i in range(m):
                _apply(kinds[i], &v1[i, 0], &v2[i, 0], &sc[i, 0], &lu[i, 0, 0],
                       &piv[i, 0], &a[0], &b[0], d)
                if has_err:
                    s = 0.0
                    for j in range(d):
                        b[j] += errs[k, i, j]
                        s += errs[k, i, j] * errs[k, i, j]
                    en += sqrt(s)
                if keep_phis:
                    for j in range(d):
                        phis[k, i + 1, j] = b[j]
                for j in range(d):
                    a[j] = b[j]
            lam = lams[k]
            for j in range(d):
                nxt[j] = (1.0 - lam) * phi0[j] + lam * a[j]
            step[k] = _dist(&nxt[0], &cur[0], d)
            res = 0.0
            for i in range(m):
                _apply(kinds[i], &v1[i, 0], &v2[i, 0], &sc[i, 0], &lu[i, 0, 0],
                       &piv[i, 0], &nxt[0], &b[0], d)
                r = _dist(&b[0], &nxt[0], d)
                if r > res:
                    res = r
            residual[k] = res
            err_norm[k] = en
            if has_known:
                dist[k] = _dist(&nxt[0], &known[0], d)
            for j in range(d):
                cur[j] = nxt[j]
            k += 1
            if res <= tol and step[k - 1] <= tol:
                met = True
                break
    x[:] = cur
    return k, met


_EMPTY3 = np.zeros((1, 1, 1))


def run_chunk(stack, F, mu, x, n0, betas, lams, errs, tol, known, keep_phis):
    """Compiled counterpart of ``_pykernels.run_chunk``."""
    kinds, v1, v2, sc, lu, piv = stack.packed
    d, m = stack.dim, len(stack)
    count = betas.shape[0]
    fvec, fmat = F.pack(d)
    residual = np.zeros(count)
    step = np.zeros(count)
    err_norm = np.zeros(count)
    dist = np.zeros(count)
    phis = np.zeros((count, m + 1, d)) if keep_phis else _EMPTY3
    has_err = errs is not None
    has_known = known is not None
    k, met = _run(
        x, kinds, v1, v2, sc, lu, piv, F.kernel_code,
        np.ascontiguousarray(fvec), np.ascontiguousarray(fmat), mu,
        betas, lams, np.ascontiguousarray(errs) if has_err else _EMPTY3, has_err,
        tol, np.ascontiguousarray(known) if has_known else np.zeros(d), has_known,
        residual, step, err_norm, dist, phis, keep_phis,
    )
    return SimpleNamespace(
        executed=k, met=met, residual=residual, step=step, err_norm=err_norm,
        dist=dist, phis=phis if keep_phis else None,
    )
