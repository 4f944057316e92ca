"""Compiled helpers for point-set metrics."""
from __future__ import annotations

import numba as nb
import numpy as np

from .kdtree import static_radius


@nb.njit(nogil=True, cache=True)
def spacing_violations(tree, pts, hv, factor):
    """Pairs (i < j) with |p_i - p_j| < min(h_i, h_j) * factor.

    ``tree`` indexes ``pts``; a violating pair is always within h_i of p_i,
    so one radius query per point finds every pair.
    """
    n = pts.shape[0]
    d = pts.shape[1]
    buf = np.empty(n, dtype=np.int64)
    out = np.empty((16, 2), dtype=np.int64)
    m = 0
    for i in range(n):
        r = hv[i] * factor
        cnt = static_radius(tree, pts[i], r * r, buf)
        if cnt > n:
            cnt = n
        for t in range(cnt):
            j = buf[t]
            if j <= i:
                continue
            lim = min(hv[i], hv[j]) * factor
            s = 0.0
            for k in range(d):
                dk = pts[i, k] - pts[j, k]
                s += dk * dk
            if s < lim * lim:
                if m == out.shape[0]:
                    grown = np.empty((2 * m, 2), dtype=np.int64)
                    grown[:m] = out
                    out = grown
                out[m, 0] = i
                out[m, 1] = j
                m += 1
    return out[:m]


@nb.njit(nogil=True, cache=True)
def farthest_probe(owner, dist, n):
    """Per node, the largest distance of a probe it is nearest to (0 if none)."""
    far = np.zeros(n)
    hit = np.zeros(n, dtype=np.bool_)
    for t in range(owner.shape[0]):
        j = owner[t]
        hit[j] = True
        if dist[t] > far[j]:
            far[j] = dist[t]
    return far, hit
