"""Pure-NumPy kernel backend.

The windowed DTW cost minimizes (path cost sum) / (path cell count) over
monotone paths anchored to the window corners, with steps (1,1), (1,0),
(0,1). That ratio objective is solved exactly by Dinkelbach iteration:
repeatedly run a min-sum DP on costs shifted by the current ratio until no
path improves on it. The DP here is vectorized across all windows at once;
within a row, the horizontal-step recurrence is a (min, +) prefix scan,
expressed with cumsum + running minimum.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

MAX_RATIO_ITERATIONS = 64


def scaled_distance_matrix(qs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    diff = qs[:, None, :] - ts[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _dp_all(dist: np.ndarray, cols: np.ndarray, lam: np.ndarray):
    """Min-sum DP on reduced costs (cell - lam) for every window at once.

    Returns the reduced cost and the cell count of one optimal path per
    window (corner to corner). Ties prefer the diagonal step, then vertical.
    """
    num_windows, length = cols.shape
    num_rows = dist.shape[0]
    positions = np.arange(length)

    cost = dist[0][cols] - lam[:, None]
    red = np.cumsum(cost, axis=1)
    plen = np.broadcast_to(positions + 1, (num_windows, length)).copy()

    for i in range(1, num_rows):
        cost = dist[i][cols] - lam[:, None]
        cum = np.cumsum(cost, axis=1)
        cum_prev = np.zeros_like(cum)
        cum_prev[:, 1:] = cum[:, :-1]

        diag = np.empty_like(red)
        diag[:, 0] = np.inf
        diag[:, 1:] = red[:, :-1]
        use_diag = diag <= red
        entry_red = np.where(use_diag, diag, red)
        dlen = np.empty_like(plen)
        dlen[:, 0] = 0
        dlen[:, 1:] = plen[:, :-1]
        entry_len = np.where(use_diag, dlen, plen) + 1

        # Paths reach (i, j) by entering row i at some column e <= j and
        # moving right; min over e is a running minimum of entry values
        # offset by the cost prefix sum.
        t = entry_red - cum_prev
        runmin = np.minimum.accumulate(t, axis=1)
        entry_col = np.maximum.accumulate(
            np.where(t == runmin, positions, -1), axis=1
        )
        red = runmin + cum
        plen = np.take_along_axis(entry_len, entry_col, axis=1) + (positions - entry_col)

    return red[:, -1], plen[:, -1]


def window_dtw_costs(dist: np.ndarray, length: int, starts: np.ndarray) -> np.ndarray:
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.int64)
    num_windows = len(starts)
    cols = starts[:, None] + np.arange(length)[None, :]

    raw_sum, raw_len = _dp_all(dist, cols, np.zeros(num_windows))
    lam = np.maximum(raw_sum / raw_len, 0.0)

    tol = 1e-14 * (dist.shape[0] + length)
    active = np.ones(num_windows, dtype=bool)
    for _ in range(MAX_RATIO_ITERATIONS):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        red, plen = _dp_all(dist, cols[idx], lam[idx])
        improving = red < -tol
        lam[idx[improving]] += red[improving] / plen[improving]
        active[idx[~improving]] = False

    return np.clip(lam, 0.0, 1.0)
