"""Numba kernel backend: scalar loops compiled with @njit.

Same contract and algorithm as the NumPy backend (Dinkelbach iteration for
the min-ratio window DTW); see that module for the derivation. Kernels are
compiled nogil so the pair scan can run on a thread pool, and cached so CLI
subprocesses do not pay compilation on every run.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"

MAX_RATIO_ITERATIONS = 64


@njit(cache=True, nogil=True, fastmath=True)
def scaled_distance_matrix(qs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    m, d = qs.shape
    n = ts.shape[0]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for k in range(d):
                diff = qs[i, k] - ts[j, k]
                acc += diff * diff
            out[i, j] = np.sqrt(acc)
    return out


@njit(cache=True, nogil=True)
def _min_sum_dp(dist, start, length, lam, red_row, len_row):
    """One min-sum DP over the window dist[:, start:start+length] with
    reduced costs (cell - lam); rolling single-row buffers.

    Returns (reduced cost, cell count) of one optimal corner-to-corner path.
    Ties prefer diagonal, then vertical, then horizontal.
    """
    m = dist.shape[0]

    acc = dist[0, start] - lam
    red_row[0] = acc
    len_row[0] = 1
    for j in range(1, length):
        acc += dist[0, start + j] - lam
        red_row[j] = acc
        len_row[j] = j + 1

    for i in range(1, m):
        diag_red = red_row[0]
        diag_len = len_row[0]
        red_row[0] = diag_red + dist[i, start] - lam
        len_row[0] = diag_len + 1
        for j in range(1, length):
            vert_red = red_row[j]
            vert_len = len_row[j]
            best_red = diag_red
            best_len = diag_len
            if vert_red < best_red:
                best_red = vert_red
                best_len = vert_len
            horz_red = red_row[j - 1]
            if horz_red < best_red:
                best_red = horz_red
                best_len = len_row[j - 1]
            red_row[j] = best_red + dist[i, start + j] - lam
            len_row[j] = best_len + 1
            diag_red = vert_red
            diag_len = vert_len

    return red_row[length - 1], len_row[length - 1]


@njit(cache=True, nogil=True)
def window_dtw_costs(dist: np.ndarray, length: int, starts: np.ndarray) -> np.ndarray:
    costs = np.empty(len(starts))
    red_row = np.empty(length)
    len_row = np.empty(length, dtype=np.int64)
    tol = 1e-14 * (dist.shape[0] + length)

    # Warm-start each window's ratio from the previous (overlapping) window;
    # Dinkelbach converges from either side, terminating when no path beats
    # the current ratio by more than tol in reduced cost.
    lam = 0.0
    for w in range(len(starts)):
        start = starts[w]
        for _ in range(MAX_RATIO_ITERATIONS):
            red, plen = _min_sum_dp(dist, start, length, lam, red_row, len_row)
            if abs(red) <= tol:
                break
            lam += red / plen
        if lam < 0.0:
            lam = 0.0
        elif lam > 1.0:
            lam = 1.0
        costs[w] = lam

    return costs
