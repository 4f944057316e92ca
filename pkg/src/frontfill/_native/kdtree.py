"""Array-backed k-d trees.

Static tree
    Balanced, built once by median selection. The subtree covering
    positions ``[lo, hi)`` of the permuted point array has its splitting
    point at ``(lo + hi) // 2``; ranges of at most ``LEAF`` points are
    scanned linearly. No child pointers are stored.

Dynamic trees
    Bucket trees grown by insertion and never rebalanced: a leaf holds up to
    ``BUCKET`` slots and, when it overflows, becomes an internal node split
    at the midpoint of its cell along the cell's longest side. Cells are
    carved out of a fixed bounding box, so depth stays logarithmic in
    extent / spacing whatever the insertion order (a front grows in a very
    non-random order, which wrecks point-per-node trees). Several trees
    (one per cell) share one ``Store`` (points by slot, nodes from a common
    pool) so that slot numbers double as a global insertion order.

All queries break distance ties by the lower original index.
"""
from __future__ import annotations

from collections import namedtuple

import numba as nb
import numpy as np

from .atomics import fetch_add

LEAF = 8
_STACK = 256

StaticTree = namedtuple("StaticTree", ["data", "idx", "axis"])

BUCKET = 16

_MAX_DEPTH = 400

# coords/cell/thread per slot; axis..items per node; roots/maxdepth per
# cell; next_node is a one-element allocation counter; box is the (2, d)
# root cell shared by all trees
Store = namedtuple(
    "Store",
    [
        "coords", "cell", "thread",
        "axis", "split", "left", "right", "count", "items",
        "roots", "maxdepth", "next_node", "box",
    ],
)


@nb.njit(nogil=True, cache=True)
def _select(data, perm, lo, hi, kth, ax):
    """Partial sort perm[lo:hi] so that perm[kth] holds the median along ax."""
    while hi - lo > 1:
        mid = (lo + hi) // 2
        # median of three pivot
        a = data[perm[lo], ax]
        b = data[perm[mid], ax]
        c = data[perm[hi - 1], ax]
        if (a <= b <= c) or (c <= b <= a):
            pv = b
        elif (b <= a <= c) or (c <= a <= b):
            pv = a
        else:
            pv = c
        i = lo
        j = hi - 1
        while i <= j:
            while data[perm[i], ax] < pv:
                i += 1
            while data[perm[j], ax] > pv:
                j -= 1
            if i <= j:
                t = perm[i]
                perm[i] = perm[j]
                perm[j] = t
                i += 1
                j -= 1
        if kth <= j:
            hi = j + 1
        elif kth >= i:
            lo = i
        else:
            return


@nb.njit(nogil=True, cache=True)
def build_static(points):
    n, d = points.shape
    perm = np.arange(n)
    axis = np.full(n, -1, dtype=np.int64)
    stack = np.empty((_STACK, 2), dtype=np.int64)
    top = 0
    if n > 0:
        stack[0, 0] = 0
        stack[0, 1] = n
        top = 1
    while top > 0:
        top -= 1
        lo = stack[top, 0]
        hi = stack[top, 1]
        if hi - lo <= LEAF:
            continue
        best_ax = 0
        best_spread = -1.0
        for ax in range(d):
            mn = np.inf
            mx = -np.inf
            for t in range(lo, hi):
                v = points[perm[t], ax]
                if v < mn:
                    mn = v
                if v > mx:
                    mx = v
            if mx - mn > best_spread:
                best_spread = mx - mn
                best_ax = ax
        mid = (lo + hi) // 2
        _select(points, perm, lo, hi, mid, best_ax)
        axis[mid] = best_ax
        stack[top, 0] = lo
        stack[top, 1] = mid
        top += 1
        stack[top, 0] = mid + 1
        stack[top, 1] = hi
        top += 1
    data = np.empty((n, d))
    for t in range(n):
        for k in range(d):
            data[t, k] = points[perm[t], k]
    return StaticTree(data, perm, axis)


@nb.njit(nogil=True, cache=True, inline="always")
def _dist2(data, t, q):
    s = 0.0
    for k in range(q.shape[0]):
        dk = data[t, k] - q[k]
        s += dk * dk
    return s


@nb.njit(nogil=True, cache=True)
def static_nearest(tree, q):
    """Return (original index, squared distance) of the nearest point."""
    data = tree.data
    idx = tree.idx
    n = data.shape[0]
    best = np.inf
    best_i = -1
    slo = np.empty(_STACK, dtype=np.int64)
    shi = np.empty(_STACK, dtype=np.int64)
    sb = np.empty(_STACK)
    slo[0] = 0
    shi[0] = n
    sb[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        lo = slo[top]
        hi = shi[top]
        if sb[top] > best:
            continue
        if hi - lo <= LEAF:
            for t in range(lo, hi):
                d2 = _dist2(data, t, q)
                if d2 < best or (d2 == best and idx[t] < best_i):
                    best = d2
                    best_i = idx[t]
            continue
        mid = (lo + hi) // 2
        d2 = _dist2(data, mid, q)
        if d2 < best or (d2 == best and idx[mid] < best_i):
            best = d2
            best_i = idx[mid]
        ax = tree.axis[mid]
        diff = q[ax] - data[mid, ax]
        if diff < 0.0:
            nlo, nhi, flo, fhi = lo, mid, mid + 1, hi
        else:
            nlo, nhi, flo, fhi = mid + 1, hi, lo, mid
        slo[top] = flo
        shi[top] = fhi
        sb[top] = diff * diff
        top += 1
        slo[top] = nlo
        shi[top] = nhi
        sb[top] = 0.0
        top += 1
    return best_i, best


@nb.njit(nogil=True, cache=True, inline="always")
def _before(d2a, ia, d2b, ib):
    return d2a < d2b or (d2a == d2b and ia < ib)


@nb.njit(nogil=True, cache=True)
def _heap_replace_top(hd, hi_, k, d2, i):
    """Replace the max of a (d2, index) max-heap and sift down."""
    pos = 0
    while True:
        c = 2 * pos + 1
        if c >= k:
            break
        if c + 1 < k and _before(hd[c], hi_[c], hd[c + 1], hi_[c + 1]):
            c += 1
        if _before(d2, i, hd[c], hi_[c]):
            hd[pos] = hd[c]
            hi_[pos] = hi_[c]
            pos = c
        else:
            break
    hd[pos] = d2
    hi_[pos] = i


@nb.njit(nogil=True, cache=True)
def static_knn(tree, q, k, out_i, out_d2):
    """k nearest, ascending by (distance, index), into out_i / out_d2."""
    data = tree.data
    idx = tree.idx
    n = data.shape[0]
    hd = np.full(k, np.inf)
    hi_ = np.full(k, np.iinfo(np.int64).max)
    slo = np.empty(_STACK, dtype=np.int64)
    shi = np.empty(_STACK, dtype=np.int64)
    sb = np.empty(_STACK)
    slo[0] = 0
    shi[0] = n
    sb[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        lo = slo[top]
        hi = shi[top]
        if sb[top] > hd[0]:
            continue
        if hi - lo <= LEAF:
            for t in range(lo, hi):
                d2 = _dist2(data, t, q)
                if _before(d2, idx[t], hd[0], hi_[0]):
                    _heap_replace_top(hd, hi_, k, d2, idx[t])
            continue
        mid = (lo + hi) // 2
        d2 = _dist2(data, mid, q)
        if _before(d2, idx[mid], hd[0], hi_[0]):
            _heap_replace_top(hd, hi_, k, d2, idx[mid])
        ax = tree.axis[mid]
        diff = q[ax] - data[mid, ax]
        if diff < 0.0:
            nlo, nhi, flo, fhi = lo, mid, mid + 1, hi
        else:
            nlo, nhi, flo, fhi = mid + 1, hi, lo, mid
        slo[top] = flo
        shi[top] = fhi
        sb[top] = diff * diff
        top += 1
        slo[top] = nlo
        shi[top] = nhi
        sb[top] = 0.0
        top += 1
    # heap -> ascending order by repeated extraction
    for j in range(k - 1, -1, -1):
        out_d2[j] = hd[0]
        out_i[j] = hi_[0]
        last_d = hd[j]
        last_i = hi_[j]
        hd[j] = np.inf
        hi_[j] = np.iinfo(np.int64).max
        if j > 0:
            _heap_replace_top(hd, hi_, j, last_d, last_i)


@nb.njit(nogil=True, cache=True)
def static_radius(tree, q, r2, out):
    """Indices with squared distance <= r2, written to out; returns count.

    Stops counting into ``out`` once full but still returns the total.
    """
    data = tree.data
    idx = tree.idx
    n = data.shape[0]
    cnt = 0
    slo = np.empty(_STACK, dtype=np.int64)
    shi = np.empty(_STACK, dtype=np.int64)
    sb = np.empty(_STACK)
    slo[0] = 0
    shi[0] = n
    sb[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        lo = slo[top]
        hi = shi[top]
        if sb[top] > r2:
            continue
        if hi - lo <= LEAF:
            for t in range(lo, hi):
                if _dist2(data, t, q) <= r2:
                    if cnt < out.shape[0]:
                        out[cnt] = idx[t]
                    cnt += 1
            continue
        mid = (lo + hi) // 2
        if _dist2(data, mid, q) <= r2:
            if cnt < out.shape[0]:
                out[cnt] = idx[mid]
            cnt += 1
        ax = tree.axis[mid]
        diff = q[ax] - data[mid, ax]
        slo[top] = lo
        shi[top] = mid
        sb[top] = diff * diff if diff > 0.0 else 0.0
        top += 1
        slo[top] = mid + 1
        shi[top] = hi
        sb[top] = diff * diff if diff < 0.0 else 0.0
        top += 1
    return cnt


@nb.njit(nogil=True, cache=True)
def static_nearest_many(tree, qs, out_i, out_d2):
    for j in range(qs.shape[0]):
        i, d2 = static_nearest(tree, qs[j])
        out_i[j] = i
        out_d2[j] = d2


@nb.njit(nogil=True, cache=True)
def static_knn_many(tree, qs, k, out_i, out_d2):
    for j in range(qs.shape[0]):
        static_knn(tree, qs[j], k, out_i[j], out_d2[j])


# ---------------------------------------------------------------- dynamic


def node_capacity(capacity: int, n_cells: int) -> int:
    return capacity // 2 + 2 * n_cells + 64


def new_store(capacity: int, dim: int, n_cells: int, box=None) -> Store:
    """``box`` is a (2, dim) array [lo, hi] enclosing every point to be
    inserted; points outside it still work but deepen the trees."""
    # np.empty leaves untouched pages unmapped; entries are set on use
    cap = max(capacity, 1)
    if box is None:
        box = np.array([[-1.0] * dim, [1.0] * dim])
    box = np.array(box, dtype=np.float64).reshape(2, dim)
    nn = node_capacity(cap, max(n_cells, 1))
    return Store(
        np.empty((cap, dim)),
        np.empty(cap, dtype=np.int64),
        np.empty(cap, dtype=np.int64),
        np.empty(nn, dtype=np.int64),
        np.empty(nn),
        np.empty(nn, dtype=np.int64),
        np.empty(nn, dtype=np.int64),
        np.empty(nn, dtype=np.int64),
        np.empty((nn, BUCKET), dtype=np.int64),
        np.full(max(n_cells, 1), -1, dtype=np.int64),
        np.zeros(max(n_cells, 1), dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        box,
    )


@nb.njit(nogil=True, cache=True, inline="always")
def _new_leaf(store):
    node = fetch_add(store.next_node, 0, 1)
    if node >= store.axis.shape[0]:
        return -1
    store.axis[node] = -1
    store.count[node] = 0
    return node


@nb.njit(nogil=True, cache=True)
def _split_leaf(store, node, extra, lo, hi, depth):
    """Turn the full leaf ``node`` (cell [lo, hi]) into an internal node;
    ``extra`` is the slot that did not fit. Returns the depth of the deepest
    new leaf, or -1 if the node pool or the depth limit ran out."""
    coords = store.coords
    d = coords.shape[1]
    n = BUCKET + 1
    pts = np.empty(n, dtype=np.int64)
    for t in range(BUCKET):
        pts[t] = store.items[node, t]
    pts[BUCKET] = extra
    # the cell only steers split placement; widen it to cover points that
    # fell outside the root box so that halving can separate them
    same = True
    for k in range(d):
        for t in range(n):
            v = coords[pts[t], k]
            if v < lo[k]:
                lo[k] = v
            if v > hi[k]:
                hi[k] = v
            if v != coords[pts[0], k]:
                same = False
    if same:
        # identical points: split at their shared coordinate, which is a
        # valid bound for both halves; repeats grow a chain
        a = _new_leaf(store)
        b = _new_leaf(store)
        if a < 0 or b < 0 or depth + 1 >= _MAX_DEPTH:
            return -1
        store.left[node] = a
        store.right[node] = b
        store.split[node] = coords[pts[0], 0]
        store.axis[node] = 0
        for t in range(n):
            tgt = a if t < n // 2 else b
            store.items[tgt, store.count[tgt]] = pts[t]
            store.count[tgt] += 1
        return depth + 1
    while depth < _MAX_DEPTH:
        ax = 0
        for k in range(1, d):
            if hi[k] - lo[k] > hi[ax] - lo[ax]:
                ax = k
        sv = 0.5 * (lo[ax] + hi[ax])
        nl = 0
        for t in range(n):
            if coords[pts[t], ax] < sv:
                nl += 1
        a = _new_leaf(store)
        b = _new_leaf(store)
        if a < 0 or b < 0:
            return -1
        store.left[node] = a
        store.right[node] = b
        store.split[node] = sv
        store.axis[node] = ax
        depth += 1
        if nl == 0:
            node = b
            lo[ax] = sv
            continue
        if nl == n:
            node = a
            hi[ax] = sv
            continue
        for t in range(n):
            s = pts[t]
            tgt = a if coords[s, ax] < sv else b
            store.items[tgt, store.count[tgt]] = s
            store.count[tgt] += 1
        return depth
    return -1


@nb.njit(nogil=True, cache=True)
def dyn_insert(store, cell, slot):
    """Link an already written slot into the tree of ``cell``.

    Returns False if the node pool is exhausted or the tree would exceed
    its depth limit.
    """
    coords = store.coords
    d = coords.shape[1]
    store.cell[slot] = cell
    node = store.roots[cell]
    if node < 0:
        node = _new_leaf(store)
        if node < 0:
            return False
        store.roots[cell] = node
    lo = np.empty(d)
    hi = np.empty(d)
    for k in range(d):
        lo[k] = store.box[0, k]
        hi[k] = store.box[1, k]
    depth = 0
    while store.axis[node] >= 0:
        ax = store.axis[node]
        sv = store.split[node]
        if coords[slot, ax] < sv:
            node = store.left[node]
            hi[ax] = sv
        else:
            node = store.right[node]
            lo[ax] = sv
        depth += 1
    c = store.count[node]
    if c < BUCKET:
        store.items[node, c] = slot
        store.count[node] = c + 1
    else:
        depth = _split_leaf(store, node, slot, lo, hi, depth)
        if depth < 0:
            return False
    if depth + 1 > store.maxdepth[cell]:
        store.maxdepth[cell] = depth + 1
    return True


@nb.njit(nogil=True, cache=True)
def dyn_nearest(store, cell, q, best, best_i, exclude, snode, sbound):
    """Nearest slot in ``cell`` other than ``exclude`` improving on (best, best_i).

    Pass ``best = r*r, best_i = -1`` to search only inside radius r (a point
    at exactly r does not qualify). Scratch stacks must hold
    ``maxdepth[cell] + 2`` entries.
    """
    coords = store.coords
    d = coords.shape[1]
    root = store.roots[cell]
    if root < 0:
        return best_i, best
    snode[0] = root
    sbound[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        if sbound[top] > best:
            continue
        node = snode[top]
        ax = store.axis[node]
        if ax < 0:
            for t in range(store.count[node]):
                s = store.items[node, t]
                d2 = 0.0
                for k in range(d):
                    dk = coords[s, k] - q[k]
                    d2 += dk * dk
                if s != exclude and (d2 < best or (d2 == best and best_i >= 0 and s < best_i)):
                    best = d2
                    best_i = s
            continue
        diff = q[ax] - store.split[node]
        if diff < 0.0:
            near = store.left[node]
            far = store.right[node]
        else:
            near = store.right[node]
            far = store.left[node]
        snode[top] = far
        sbound[top] = diff * diff
        top += 1
        snode[top] = near
        sbound[top] = 0.0
        top += 1
    return best_i, best


@nb.njit(nogil=True, cache=True)
def dyn_collect(store, cell, out, start):
    """Write the slots of ``cell`` into out[start:], returning the new end."""
    root = store.roots[cell]
    if root < 0:
        return start
    stack = np.empty(store.maxdepth[cell] + 2, dtype=np.int64)
    stack[0] = root
    top = 1
    pos = start
    while top > 0:
        top -= 1
        node = stack[top]
        if store.axis[node] < 0:
            for t in range(store.count[node]):
                out[pos] = store.items[node, t]
                pos += 1
            continue
        stack[top] = store.left[node]
        top += 1
        stack[top] = store.right[node]
        top += 1
    return pos


@nb.njit(nogil=True, cache=True)
def dyn_nearest_one(store, cell, q):
    """Exact nearest slot of ``cell`` (-1 when empty) and its squared distance."""
    n = store.maxdepth[cell] + 2
    snode = np.empty(n, dtype=np.int64)
    sbound = np.empty(n)
    return dyn_nearest(store, cell, q, np.inf, -1, -1, snode, sbound)


@nb.njit(nogil=True, cache=True)
def dyn_insert_many(store, cell, start, stop):
    for s in range(start, stop):
        if not dyn_insert(store, cell, s):
            return s
    return stop
