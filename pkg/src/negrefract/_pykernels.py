"""Pure-numpy envelope kernels.

Arithmetic mirrors ``_ckernels.pyx`` operation for operation so both paths give
bit-identical results (quotients, then differences against the best value).
"""
from __future__ import annotations

import numpy as np


def envelope(denom, b, maximize: bool, tie_tol: float):
    """Max (or min) over columns of ``b[k] / denom[:, k]``.

    Returns ``(rho, winner, tie, margin)``. ``winner`` is the lowest index whose
    value is within ``tie_tol * rho`` of the best; ``tie`` marks nodes where more
    than one index is that close; ``margin`` is the gap from the best value to
    the runner-up (``inf`` with a single column).
    """
    denom = np.asarray(denom, dtype=float)
    b = np.asarray(b, dtype=float)
    q = b[None, :] / denom
    if maximize:
        best = np.argmax(q, axis=1)
        top = q[np.arange(len(q)), best]
        gap = top[:, None] - q
    else:
        best = np.argmin(q, axis=1)
        top = q[np.arange(len(q)), best]
        gap = q - top[:, None]
    close = gap <= (tie_tol * top)[:, None]
    tie = np.count_nonzero(close, axis=1) > 1
    winner = np.argmax(close, axis=1).astype(np.intp)
    gap[np.arange(len(q)), best] = np.inf
    margin = gap.min(axis=1) if q.shape[1] > 1 else np.full(len(q), np.inf)
    return top, winner, tie, margin


def best_other(denom, b, i: int, maximize: bool):
    """Per row, the best of ``b[k] / denom[:, k]`` over ``k != i``."""
    denom = np.asarray(denom, dtype=float)
    b = np.asarray(b, dtype=float)
    q = b[None, :] / denom
    q[:, i] = -np.inf if maximize else np.inf
    return q.max(axis=1) if maximize else q.min(axis=1)
