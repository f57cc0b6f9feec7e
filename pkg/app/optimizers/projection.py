"""Euclidean projection onto {w : sum(w) = 1, lower <= w <= upper}.

For a row v the projection is ``clip(v - tau, lower, upper)`` where tau solves
``sum(clip(v - tau, lower, upper)) = 1``. That sum is piecewise linear and
non-increasing in tau with kinks at ``v_i - upper`` and ``v_i - lower``; after
sorting the kinks, tau is found by linear interpolation on the one segment
where the sum crosses 1. Rows are projected independently.
"""

import numpy as np


def project_to_feasible(v: np.ndarray, lower: float, upper: float) -> np.ndarray:
    """Project each row of ``v`` (1-D or K x N) onto the capped simplex."""
    points = np.atleast_2d(np.asarray(v, dtype=float))
    k, n = points.shape
    kinks = np.sort(np.concatenate([points - upper, points - lower], axis=1), axis=1)
    totals = np.clip(points[:, None, :] - kinks[:, :, None], lower, upper).sum(axis=2)

    # totals[:, 0] == n * upper >= 1 when the box is feasible
    segment = np.clip((totals >= 1.0).sum(axis=1) - 1, 0, 2 * n - 1)
    rows = np.arange(k)
    tau = kinks[rows, segment]
    inner = segment < 2 * n - 1
    if np.any(inner):
        left = segment[inner]
        right = left + 1
        t_left = totals[rows[inner], left]
        t_right = totals[rows[inner], right]
        b_left = kinks[rows[inner], left]
        b_right = kinks[rows[inner], right]
        span = t_left - t_right
        safe = np.where(span > 0, span, 1.0)
        tau[inner] = np.where(span > 0, b_left + (t_left - 1.0) / safe * (b_right - b_left), b_left)

    projected = np.clip(points - tau[:, None], lower, upper)
    return projected if np.ndim(v) > 1 else projected[0]
