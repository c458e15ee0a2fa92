"""Hot numeric kernels with numba and pure-numpy implementations.

Each kernel has two interchangeable implementations: a loop version
compiled with numba (``*_nb``) and a vectorized numpy version (``*_np``).
The public names dispatch according to :data:`bdml.accel.NUMBA_ENABLED`.
Both variants are kept importable so tests and the benchmark script can
compare them directly.
"""

import numpy as np

from .accel import NUMBA_ENABLED, njit


# ---------------------------------------------------------------------------
# loop implementations (numba-compiled when enabled)


def _pair_sq_proj_loop(proj, ii, jj):
    m = ii.shape[0]
    k = proj.shape[1]
    out = np.empty((m, k + 1))
    for c in range(m):
        out[c, 0] = -1.0
        for l in range(k):
            d = proj[ii[c], l] - proj[jj[c], l]
            out[c, l + 1] = d * d
    return out


def _nn1_indices_loop(train, queries):
    nq = queries.shape[0]
    nt = train.shape[0]
    k = train.shape[1]
    out = np.empty(nq, dtype=np.int64)
    for q in range(nq):
        best = np.inf
        best_i = 0
        for t in range(nt):
            acc = 0.0
            for l in range(k):
                d = queries[q, l] - train[t, l]
                acc += d * d
            if acc < best:
                best = acc
                best_i = t
        out[q] = best_i
    return out


def _weighted_outer_sum_loop(rows, coef):
    m, k = rows.shape
    out = np.zeros((k, k))
    for c in range(m):
        w = coef[c]
        for a in range(k):
            va = w * rows[c, a]
            for b in range(k):
                out[a, b] += va * rows[c, b]
    return out


def _row_quad_forms_loop(rows, mat):
    m, k = rows.shape
    out = np.empty(m)
    for c in range(m):
        acc = 0.0
        for a in range(k):
            inner = 0.0
            for b in range(k):
                inner += mat[a, b] * rows[c, b]
            acc += rows[c, a] * inner
        out[c] = acc
    return out


pair_sq_proj_nb = njit(cache=True)(_pair_sq_proj_loop)
nn1_indices_nb = njit(cache=True)(_nn1_indices_loop)
weighted_outer_sum_nb = njit(cache=True)(_weighted_outer_sum_loop)
row_quad_forms_nb = njit(cache=True)(_row_quad_forms_loop)


# ---------------------------------------------------------------------------
# numpy fallbacks


def pair_sq_proj_np(proj, ii, jj):
    diff = proj[ii] - proj[jj]
    out = np.empty((diff.shape[0], diff.shape[1] + 1))
    out[:, 0] = -1.0
    out[:, 1:] = diff * diff
    return out


def nn1_indices_np(train, queries, chunk=256):
    out = np.empty(queries.shape[0], dtype=np.int64)
    for start in range(0, queries.shape[0], chunk):
        block = queries[start : start + chunk]
        d2 = ((block[:, None, :] - train[None, :, :]) ** 2).sum(axis=-1)
        out[start : start + block.shape[0]] = d2.argmin(axis=1)
    return out


def weighted_outer_sum_np(rows, coef):
    return (rows * coef[:, None]).T @ rows


def row_quad_forms_np(rows, mat):
    return np.einsum("ij,jk,ik->i", rows, mat, rows)


# ---------------------------------------------------------------------------
# dispatch

if NUMBA_ENABLED:
    pair_sq_proj = pair_sq_proj_nb
    nn1_indices = nn1_indices_nb
    weighted_outer_sum = weighted_outer_sum_nb
    row_quad_forms = row_quad_forms_nb
else:
    pair_sq_proj = pair_sq_proj_np
    nn1_indices = nn1_indices_np
    weighted_outer_sum = weighted_outer_sum_np
    row_quad_forms = row_quad_forms_np


def as_f64(a):
    """Contiguous float64 view or copy, the layout the kernels expect."""
    return np.ascontiguousarray(a, dtype=np.float64)


def as_i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)
