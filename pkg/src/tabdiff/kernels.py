"""Hot inner loops with numba-compiled and pure-numpy implementations.

The numba path is used when numba imports cleanly and the environment
variable ``TABDIFF_DISABLE_NUMBA`` is unset (or falsy). Both paths accumulate
in float64 over columns in the same order, so they produce bit-identical
results; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("TABDIFF_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag not in ("", "0", "false", "no")

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled via TABDIFF_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


# --- pure-numpy implementations -------------------------------------------

def nearest_codes_np(queries, candidates):
    """Index of the nearest candidate row (squared Euclidean) per query row.

    Ties break to the lowest index. Distances accumulate over dimensions in
    order, in float64.
    """
    q = queries.astype(np.float64, copy=False)
    e = candidates.astype(np.float64, copy=False)
    d2 = np.zeros((q.shape[0], e.shape[0]))
    for k in range(q.shape[1]):
        diff = q[:, k, None] - e[None, :, k]
        d2 += diff * diff
    return np.argmin(d2, axis=1).astype(np.int64)


def min_euclidean_np(query_num, ref_num, query_cat, ref_cat, block=256):
    """Distance from each query row to its closest reference row.

    Numeric columns contribute squared differences, categorical columns 0/1
    mismatch indicators; the result is the Euclidean distance of the combined
    representation.
    """
    n_query = query_num.shape[0]
    n_ref = ref_num.shape[0]
    out = np.empty(n_query, dtype=np.float64)
    for start in range(0, n_query, block):
        stop = min(start + block, n_query)
        d2 = np.zeros((stop - start, n_ref))
        for j in range(query_num.shape[1]):
            diff = query_num[start:stop, j, None] - ref_num[None, :, j]
            d2 += diff * diff
        for j in range(query_cat.shape[1]):
            d2 += (query_cat[start:stop, j, None] != ref_cat[None, :, j]).astype(np.float64)
        out[start:stop] = np.sqrt(d2.min(axis=1))
    return out


def match_mask_np(query_num, ref_num, query_cat, ref_cat, rel_tol=0.01, zero_tol=1e-9,
                  block=256):
    """True per query row when some reference row matches it: all categorical
    cells equal and every numeric cell within ``rel_tol`` of the reference
    value (``zero_tol`` absolute when the reference value is 0)."""
    n_query = query_num.shape[0]
    n_ref = ref_num.shape[0]
    out = np.zeros(n_query, dtype=bool)
    for start in range(0, n_query, block):
        stop = min(start + block, n_query)
        ok = np.ones((stop - start, n_ref), dtype=bool)
        for j in range(query_cat.shape[1]):
            ok &= query_cat[start:stop, j, None] == ref_cat[None, :, j]
        for j in range(query_num.shape[1]):
            ref = ref_num[:, j]
            tol = np.where(ref == 0.0, zero_tol, rel_tol * np.abs(ref))
            ok &= np.abs(query_num[start:stop, j, None] - ref[None, :]) <= tol[None, :]
        out[start:stop] = ok.any(axis=1)
    return out


# --- numba implementations -------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _nearest_codes_nb(queries, candidates):
        n_query, dim = queries.shape
        n_cand = candidates.shape[0]
        out = np.empty(n_query, dtype=np.int64)
        for b in range(n_query):
            best = 0
            best_d2 = np.inf
            for c in range(n_cand):
                acc = 0.0
                for k in range(dim):
                    diff = np.float64(queries[b, k]) - np.float64(candidates[c, k])
                    acc += diff * diff
                if acc < best_d2:
                    best_d2 = acc
                    best = c
            out[b] = best
        return out

    @njit(cache=True)
    def _min_euclidean_nb(query_num, ref_num, query_cat, ref_cat):
        n_query = query_num.shape[0]
        n_ref = ref_num.shape[0]
        n_num = query_num.shape[1]
        n_cat = query_cat.shape[1]
        out = np.empty(n_query, dtype=np.float64)
        for s in range(n_query):
            best = np.inf
            for r in range(n_ref):
                acc = 0.0
                for j in range(n_num):
                    diff = query_num[s, j] - ref_num[r, j]
                    acc += diff * diff
                for j in range(n_cat):
                    if query_cat[s, j] != ref_cat[r, j]:
                        acc += 1.0
                if acc < best:
                    best = acc
            out[s] = np.sqrt(best)
        return out

    @njit(cache=True)
    def _match_mask_nb(query_num, ref_num, query_cat, ref_cat, rel_tol, zero_tol):
        n_query = query_num.shape[0]
        n_ref = ref_num.shape[0]
        n_num = query_num.shape[1]
        n_cat = query_cat.shape[1]
        out = np.zeros(n_query, dtype=np.bool_)
        for s in range(n_query):
            for r in range(n_ref):
                ok = True
                for j in range(n_cat):
                    if query_cat[s, j] != ref_cat[r, j]:
                        ok = False
                        break
                if ok:
                    for j in range(n_num):
                        ref = ref_num[r, j]
                        tol = zero_tol if ref == 0.0 else rel_tol * abs(ref)
                        if abs(query_num[s, j] - ref) > tol:
                            ok = False
                            break
                if ok:
                    out[s] = True
                    break
        return out

    def nearest_codes_nb(queries, candidates):
        return _nearest_codes_nb(np.ascontiguousarray(queries), np.ascontiguousarray(candidates))

    def min_euclidean_nb(query_num, ref_num, query_cat, ref_cat):
        return _min_euclidean_nb(
            np.ascontiguousarray(query_num), np.ascontiguousarray(ref_num),
            np.ascontiguousarray(query_cat), np.ascontiguousarray(ref_cat),
        )

    def match_mask_nb(query_num, ref_num, query_cat, ref_cat, rel_tol=0.01, zero_tol=1e-9):
        return _match_mask_nb(
            np.ascontiguousarray(query_num), np.ascontiguousarray(ref_num),
            np.ascontiguousarray(query_cat), np.ascontiguousarray(ref_cat),
            rel_tol, zero_tol,
        )

else:
    nearest_codes_nb = None
    min_euclidean_nb = None
    match_mask_nb = None


# --- dispatch ---------------------------------------------------------------

if HAS_NUMBA:
    nearest_codes = nearest_codes_nb
    min_euclidean = min_euclidean_nb
    match_mask = match_mask_nb
else:
    nearest_codes = nearest_codes_np
    min_euclidean = min_euclidean_np
    match_mask = match_mask_np
