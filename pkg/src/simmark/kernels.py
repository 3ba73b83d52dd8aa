"""Hot numeric kernels, numba-compiled when available.

Every kernel has a pure-numpy twin (``*_numpy``) with identical semantics.
Which one backs the public name is decided once at import time:

* default: numba ``@njit`` versions when numba imports cleanly;
* ``SIMMARK_NUMBA=0`` (or ``false``/``off``/``no``): force the numpy path.

``benchmarks/bench_kernels.py`` times the two paths against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "USING_NUMBA",
    "soft_counts",
    "hard_counts",
    "consecutive_cosine",
    "consecutive_euclidean",
    "rank_auc",
    "beta_sweep_index",
    "soft_counts_numpy",
    "hard_counts_numpy",
    "consecutive_cosine_numpy",
    "consecutive_euclidean_numpy",
    "rank_auc_numpy",
    "beta_sweep_index_numpy",
]


def _numba_requested() -> bool:
    flag = os.environ.get("SIMMARK_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


# ---------------------------------------------------------------------------
# pure numpy implementations
# ---------------------------------------------------------------------------

def soft_counts_numpy(s: np.ndarray, a: float, b: float, k: float) -> np.ndarray:
    """Smoothed interval-membership count for each similarity in ``s``.

    1 inside the closed interval [a, b]; exp(-k * distance-to-interval)
    outside. k = inf reproduces the hard step function exactly.
    """
    s = np.asarray(s, dtype=np.float64)
    dist = np.minimum(np.abs(a - s), np.abs(b - s))
    inside = (s >= a) & (s <= b)
    with np.errstate(under="ignore"):
        out = np.exp(-k * dist)
    out[inside] = 1.0
    return out


def hard_counts_numpy(s: np.ndarray, a: float, b: float) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    return ((s >= a) & (s <= b)).astype(np.float64)


def consecutive_cosine_numpy(emb: np.ndarray) -> np.ndarray:
    """Cosine similarity between each pair of consecutive rows of ``emb``."""
    emb = np.asarray(emb, dtype=np.float64)
    dots = np.einsum("ij,ij->i", emb[:-1], emb[1:])
    norms = np.sqrt(np.einsum("ij,ij->i", emb, emb))
    return dots / (norms[:-1] * norms[1:])


def consecutive_euclidean_numpy(emb: np.ndarray) -> np.ndarray:
    """Euclidean distance between each pair of consecutive rows of ``emb``."""
    emb = np.asarray(emb, dtype=np.float64)
    diff = emb[1:] - emb[:-1]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def rank_auc_numpy(neg: np.ndarray, pos: np.ndarray) -> float:
    """Midrank AUC: P(pos > neg) with ties counted half."""
    neg = np.asarray(neg, dtype=np.float64)
    pos = np.asarray(pos, dtype=np.float64)
    n0, n1 = neg.size, pos.size
    values = np.concatenate([neg, pos])
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    n = n0 + n1
    change = np.nonzero(np.diff(sorted_vals) != 0)[0]
    starts = np.concatenate([[0], change + 1])
    ends = np.concatenate([change, [n - 1]])
    midranks_per_group = (starts + ends) / 2.0 + 1.0
    group_sizes = ends - starts + 1
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(midranks_per_group, group_sizes)
    r_pos = ranks[n0:].sum()
    return float((r_pos - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def beta_sweep_index_numpy(
    sorted_scores: np.ndarray, j0: int, n_grid: int, step: float, fp_target: float
) -> int:
    """Smallest grid index j with frac(score > (j0+j)*step) <= fp_target, or -1.

    ``sorted_scores`` must be ascending. Grid point j maps to threshold
    (j0 + j) * step; the exceedance fraction is non-increasing in j, so a
    binary search over the grid is exact.
    """
    sorted_scores = np.asarray(sorted_scores, dtype=np.float64)
    n = sorted_scores.size
    allowed = fp_target * n

    def exceed(j: int) -> float:
        beta = (j0 + j) * step
        return n - np.searchsorted(sorted_scores, beta, side="right")

    if exceed(n_grid - 1) > allowed:
        return -1
    lo, hi = 0, n_grid - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if exceed(mid) <= allowed:
            hi = mid
        else:
            lo = mid + 1
    return lo


# ---------------------------------------------------------------------------
# numba-compiled implementations
# ---------------------------------------------------------------------------

USING_NUMBA = False

if _numba_requested():
    try:
        from numba import njit
    except ImportError:
        njit = None
    if njit is not None:
        USING_NUMBA = True

        @njit(cache=True)
        def _soft_counts_jit(s, a, b, k):
            out = np.empty(s.size, dtype=np.float64)
            for i in range(s.size):
                v = s[i]
                if a <= v <= b:
                    out[i] = 1.0
                else:
                    d = min(abs(a - v), abs(b - v))
                    out[i] = math.exp(-k * d)
            return out

        @njit(cache=True)
        def _hard_counts_jit(s, a, b):
            out = np.empty(s.size, dtype=np.float64)
            for i in range(s.size):
                out[i] = 1.0 if a <= s[i] <= b else 0.0
            return out

        @njit(cache=True)
        def _consecutive_cosine_jit(emb):
            n, d = emb.shape
            out = np.empty(n - 1, dtype=np.float64)
            prev_norm = 0.0
            for j in range(d):
                prev_norm += emb[0, j] * emb[0, j]
            prev_norm = math.sqrt(prev_norm)
            for i in range(1, n):
                dot = 0.0
                norm = 0.0
                for j in range(d):
                    dot += emb[i - 1, j] * emb[i, j]
                    norm += emb[i, j] * emb[i, j]
                norm = math.sqrt(norm)
                out[i - 1] = dot / (prev_norm * norm)
                prev_norm = norm
            return out

        @njit(cache=True)
        def _consecutive_euclidean_jit(emb):
            n, d = emb.shape
            out = np.empty(n - 1, dtype=np.float64)
            for i in range(1, n):
                acc = 0.0
                for j in range(d):
                    diff = emb[i, j] - emb[i - 1, j]
                    acc += diff * diff
                out[i - 1] = math.sqrt(acc)
            return out

        @njit(cache=True)
        def _rank_auc_jit(neg, pos):
            n0 = neg.size
            n1 = pos.size
            n = n0 + n1
            values = np.empty(n, dtype=np.float64)
            values[:n0] = neg
            values[n0:] = pos
            order = np.argsort(values, kind="mergesort")
            r_pos = 0.0
            i = 0
            while i < n:
                j = i
                v = values[order[i]]
                while j + 1 < n and values[order[j + 1]] == v:
                    j += 1
                midrank = 0.5 * (i + j) + 1.0
                for t in range(i, j + 1):
                    if order[t] >= n0:
                        r_pos += midrank
                i = j + 1
            return (r_pos - n1 * (n1 + 1) / 2.0) / (n1 * n0)

        @njit(cache=True)
        def _beta_sweep_index_jit(sorted_scores, j0, n_grid, step, fp_target):
            n = sorted_scores.size
            allowed = fp_target * n

            def exceed(j):
                beta = (j0 + j) * step
                return n - np.searchsorted(sorted_scores, beta, side="right")

            if exceed(n_grid - 1) > allowed:
                return -1
            lo = 0
            hi = n_grid - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if exceed(mid) <= allowed:
                    hi = mid
                else:
                    lo = mid + 1
            return lo


def _as_f64(arr) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=np.float64)


if USING_NUMBA:

    def soft_counts(s, a, b, k):
        return _soft_counts_jit(_as_f64(s), float(a), float(b), float(k))

    def hard_counts(s, a, b):
        return _hard_counts_jit(_as_f64(s), float(a), float(b))

    def consecutive_cosine(emb):
        return _consecutive_cosine_jit(_as_f64(emb))

    def consecutive_euclidean(emb):
        return _consecutive_euclidean_jit(_as_f64(emb))

    def rank_auc(neg, pos):
        return float(_rank_auc_jit(_as_f64(neg), _as_f64(pos)))

    def beta_sweep_index(sorted_scores, j0, n_grid, step, fp_target):
        return int(
            _beta_sweep_index_jit(
                _as_f64(sorted_scores), j0, n_grid, float(step), float(fp_target)
            )
        )

    soft_counts.__doc__ = soft_counts_numpy.__doc__
    rank_auc.__doc__ = rank_auc_numpy.__doc__
    beta_sweep_index.__doc__ = beta_sweep_index_numpy.__doc__
else:
    soft_counts = soft_counts_numpy
    hard_counts = hard_counts_numpy
    consecutive_cosine = consecutive_cosine_numpy
    consecutive_euclidean = consecutive_euclidean_numpy
    rank_auc = rank_auc_numpy
    beta_sweep_index = beta_sweep_index_numpy
