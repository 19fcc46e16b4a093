"""Batched statistic kernels over replication matrices.

Each kernel maps an ``(R, d)`` int64 count matrix (row = one replication) to
per-replication statistic values.  Two implementations exist: a numba loop
(no temporaries, fused passes) and a vectorized numpy fallback; see
``backend`` for selection.  Both use identical formulas; only float
summation order differs.

The exceedance kernel exploits that the events ``|D_j| >= t`` are nested
downward in t (upper thresholds increase, lower thresholds decrease), so a
coordinate is scanned only until the first threshold it fails.
"""

from __future__ import annotations

import math

import numpy as np

from .backend import HAVE_NUMBA, USE_NUMBA, njit


def _chi_sq_loop(counts, lam):
    reps, d = counts.shape
    out = np.empty(reps, dtype=np.float64)
    for r in range(reps):
        acc = 0.0
        for j in range(d):
            z = counts[r, j]
            dev = z - lam
            acc += dev * dev - z
        out[r] = acc
    return out


def _max_std_loop(counts, lam):
    reps, d = counts.shape
    root = math.sqrt(lam)
    out = np.empty(reps, dtype=np.float64)
    for r in range(reps):
        worst = 0.0
        for j in range(d):
            dev = abs(counts[r, j] - lam)
            if dev > worst:
                worst = dev
        out[r] = worst / root
    return out


def _max_count_loop(counts):
    reps, d = counts.shape
    out = np.empty(reps, dtype=np.float64)
    for r in range(reps):
        worst = counts[r, 0]
        for j in range(1, d):
            if counts[r, j] > worst:
                worst = counts[r, j]
        out[r] = worst
    return out


def _exceedance_loop(counts, k_lo, k_up):
    reps, d = counts.shape
    n_thresh = k_up.size
    out = np.zeros((reps, n_thresh), dtype=np.int64)
    for r in range(reps):
        for j in range(d):
            z = counts[r, j]
            for t in range(n_thresh):
                if z >= k_up[t] or z <= k_lo[t]:
                    out[r, t] += 1
                else:
                    break  # events are nested: failing t fails all larger t
    return out


def chi_sq_batch_numpy(counts: np.ndarray, lam: float) -> np.ndarray:
    dev = counts - lam
    return (dev * dev - counts).sum(axis=1)


def max_std_batch_numpy(counts: np.ndarray, lam: float) -> np.ndarray:
    return np.abs(counts - lam).max(axis=1) / math.sqrt(lam)


def max_count_batch_numpy(counts: np.ndarray) -> np.ndarray:
    return counts.max(axis=1).astype(np.float64)


def exceedance_batch_numpy(
    counts: np.ndarray, k_lo: np.ndarray, k_up: np.ndarray
) -> np.ndarray:
    reps = counts.shape[0]
    out = np.empty((reps, k_up.size), dtype=np.int64)
    for t in range(k_up.size):
        out[:, t] = ((counts >= k_up[t]) | (counts <= k_lo[t])).sum(axis=1)
    return out


if HAVE_NUMBA:
    chi_sq_batch_numba = njit(_chi_sq_loop)
    max_std_batch_numba = njit(_max_std_loop)
    max_count_batch_numba = njit(_max_count_loop)
    exceedance_batch_numba = njit(_exceedance_loop)
else:  # pragma: no cover - exercised only without numba
    chi_sq_batch_numba = None
    max_std_batch_numba = None
    max_count_batch_numba = None
    exceedance_batch_numba = None


if USE_NUMBA:
    chi_sq_batch = chi_sq_batch_numba
    max_std_batch = max_std_batch_numba
    max_count_batch = max_count_batch_numba
    exceedance_batch = exceedance_batch_numba
else:
    chi_sq_batch = chi_sq_batch_numpy
    max_std_batch = max_std_batch_numpy
    max_count_batch = max_count_batch_numpy
    exceedance_batch = exceedance_batch_numpy
