"""NumPy implementations of the compiled kernels (same signatures, same results)."""
from __future__ import annotations

import numpy as np


def _group_ends(s: np.ndarray) -> np.ndarray:
    # exclusive end index of each run of equal values
    n = s.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    brk = np.flatnonzero(s[1:] != s[:-1]) + 1
    return np.append(brk, n)


def sweep_threshold(s: np.ndarray, y: np.ndarray, c_fn: float, c_fp: float):
    y = y.astype(np.int64)
    pos = int(y.sum())
    ends = _group_ends(s)
    tp = np.cumsum(y)[ends - 1] if ends.size else np.empty(0, dtype=np.int64)
    fp = ends - tp
    losses = np.empty(ends.size + 1)
    losses[0] = c_fn * float(pos) + c_fp * 0.0
    losses[1:] = c_fn * (pos - tp).astype(np.float64) + c_fp * fp.astype(np.float64)
    best = int(np.flatnonzero(losses == losses.min())[-1])
    if best == 0:
        return 0, float(losses[0]), 0, 0
    k = best - 1
    return int(ends[k]), float(losses[best]), int(tp[k]), int(fp[k])


def roc_auc_sorted(s: np.ndarray, y: np.ndarray) -> float:
    y = y.astype(np.int64)
    ends = _group_ends(s)
    starts = np.concatenate(([0], ends[:-1]))
    cum_pos = np.concatenate(([0], np.cumsum(y)))
    g_pos = cum_pos[ends] - cum_pos[starts]
    g_neg = (ends - starts) - g_pos
    neg_below = np.concatenate(([0], np.cumsum(g_neg)[:-1]))
    wins = 0.0
    # sequential accumulation keeps parity with the compiled loop
    for gp, nb, gn in zip(g_pos.tolist(), neg_below.tolist(), g_neg.tolist()):
        wins += float(gp) * (float(nb) + 0.5 * float(gn))
    return wins / (float(g_pos.sum()) * float(g_neg.sum()))


def average_precision_sorted(s: np.ndarray, y: np.ndarray) -> float:
    y = y.astype(np.int64)
    pos = int(y.sum())
    ends = _group_ends(s)
    tp = np.cumsum(y)[ends - 1]
    fp = ends - tp
    d_tp = np.diff(np.concatenate(([0], tp)))
    ap = 0.0
    for dt, t, f in zip(d_tp.tolist(), tp.tolist(), fp.tolist()):
        if dt > 0:
            ap += (float(dt) / float(pos)) * (float(t) / float(t + f))
    return ap


def block_means(x: np.ndarray, starts: np.ndarray, block_len: int) -> np.ndarray:
    n = x.shape[0]
    offsets = np.arange(block_len)
    idx = (starts[:, :, None] + offsets[None, None, :]).reshape(starts.shape[0], -1)[:, :n]
    # cumsum accumulates left to right, matching the compiled loop bit for bit
    return np.cumsum(x[idx], axis=1)[:, -1] / float(n)
