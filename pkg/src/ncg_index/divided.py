"""Divided differences of ``x -> exp(-x)`` and simplex heat weights.

By the Hermite-Genocchi formula

    int_{Delta^k} exp(-sum_i s_i y_i) ds = (-1)^k f[y_0, ..., y_k],   f(x) = exp(-x),

so every heat-kernel simplex integral in the JLO formulas reduces to one
divided difference per eigenvalue path.  The evaluator is vectorised over rows.
"""

from __future__ import annotations

from math import factorial

import numpy as np

# Blocks whose spread is at most TAYLOR_SPAN use the Taylor rule.  Its rounding
# error grows like exp(spread), while the recursion loses roughly a factor
# (order / spread) per level, so a fairly wide Taylor window keeps high-order
# paths (two clusters of repeated eigenvalues) accurate.
TAYLOR_SPAN = 12.0
TAYLOR_TERMS = 48


def _taylor_block(z: np.ndarray, center: np.ndarray) -> np.ndarray:
    """``f[c + z_0, ..., c + z_m]`` via ``e^{-c} sum_j (-1)^{m+j} h_j(z) / (m+j)!``.

    ``h_j`` are the complete homogeneous symmetric polynomials of the offsets.
    """
    rows, npts = z.shape
    m = npts - 1
    # h[:, j] after processing variables one at a time
    h = np.zeros((rows, TAYLOR_TERMS))
    h[:, 0] = 1.0
    for i in range(npts):
        zi = z[:, i]
        for j in range(1, TAYLOR_TERMS):
            h[:, j] = h[:, j] + zi * h[:, j - 1]
    coef = np.array([(-1.0) ** (m + j) / factorial(m + j) for j in range(TAYLOR_TERMS)])
    return np.exp(-center) * (h @ coef)


def exp_divided_difference(y: np.ndarray) -> np.ndarray:
    """Row-wise ``f[y_0, ..., y_k]`` for ``f(x) = exp(-x)``; ``y`` has shape ``(rows, k + 1)``.

    Points are sorted first.  Sub-blocks with spread ``<= TAYLOR_SPAN`` are
    evaluated by a Taylor expansion about their midpoint (exact for coincident
    points); wider blocks use the standard recursion, whose denominators are
    then bounded below.
    """
    y = np.sort(np.atleast_2d(np.asarray(y, dtype=float)), axis=1)
    rows, npts = y.shape
    table = np.exp(-y)  # level 0: table[:, i] = f[y_i]
    for m in range(1, npts):
        lo = y[:, : npts - m]
        hi = y[:, m:]
        span = hi - lo
        small = span <= TAYLOR_SPAN
        nxt = np.empty((rows, npts - m))
        big = ~small
        if big.any():
            with np.errstate(invalid="ignore", divide="ignore"):
                rec = (table[:, 1 : npts - m + 1] - table[:, : npts - m]) / np.where(big, span, 1.0)
            nxt[big] = rec[big]
        if small.any():
            r_idx, i_idx = np.nonzero(small)
            sp = span[r_idx, i_idx]
            exact = sp == 0.0
            vals = np.empty(r_idx.size)
            if exact.any():
                vals[exact] = np.exp(-lo[r_idx[exact], i_idx[exact]]) * ((-1.0) ** m / factorial(m))
            rest = ~exact
            if rest.any():
                rr, ii = r_idx[rest], i_idx[rest]
                block = y[rr[:, None], ii[:, None] + np.arange(m + 1)[None, :]]
                center = 0.5 * (block[:, 0] + block[:, -1])
                vals[rest] = _taylor_block(block - center[:, None], center)
            nxt[r_idx, i_idx] = vals
        table = nxt
    return table[:, 0]


def simplex_weight(points: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``int_{Delta^k} exp(-t sum_i s_i x_i) ds`` for each row of ``points``.

    ``ds`` is the measure ``dt_1 ... dt_k`` on the standard simplex (total mass ``1/k!``).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    k = pts.shape[1] - 1
    return (-1.0) ** k * exp_divided_difference(t * pts)


def monte_carlo_simplex_weight(points, t: float = 1.0, samples: int = 100_000, rng=None):
    """Monte-Carlo estimate and standard error of :func:`simplex_weight` for one row.

    Uniform points on the simplex come from normalised exponential variates.
    """
    rng = np.random.default_rng(rng)
    x = np.asarray(points, dtype=float)
    k = x.size - 1
    s = rng.exponential(size=(samples, k + 1))
    s /= s.sum(axis=1, keepdims=True)
    vals = np.exp(-t * (s @ x)) / factorial(k)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples))
