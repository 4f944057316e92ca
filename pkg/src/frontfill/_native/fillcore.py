"""Advancing-front kernels.

Slot layout of the shared ``Store``: sequential runs put fixed points then
seeds in the first slots and grow one tree (cell 0). Parallel runs put the
top-level seeds in slots ``[0, n_seeds)`` (never linked into a cell tree;
they are found through the static top index), fixed points next, and every
accepted candidate after that, so slot order is global acceptance order.
"""
from __future__ import annotations

import math
from collections import namedtuple

import numba as nb
import numpy as np

from .atomics import LOCK_STRIDE, acquire_write, atomic_load, atomic_store, cas, fetch_add
from .kdtree import dyn_insert, dyn_nearest, static_nearest, static_radius
from .program import contains, eval_spacing
from .rng import random_rotation_into

Sync = namedtuple("Sync", ["locks", "contention", "counter", "diag"])

OK, CAPACITY, BAD_SPACING = 0, 1, 2
# guarded_place codes (returned in place of a slot)
REJECTED, FULL, NEED_STACK = -1, -2, -3
# stats columns
ST_EXPANSIONS, ST_PLACED, ST_OUTSIDE, ST_CLOSE = 0, 1, 2, 3
_INIT_STACK = 256
_SCAN_SEEDS = 32


@nb.njit(nogil=True, cache=True, inline="always")
def _bad(h):
    return not (h > 0.0) or h == np.inf


@nb.njit(nogil=True, cache=True, inline="always")
def _candidate(c, p, rp, rot, dirs, m):
    d = c.shape[0]
    for k in range(d):
        s = 0.0
        for l in range(d):
            s += rot[k, l] * dirs[m, l]
        c[k] = p[k] + rp * s


@nb.njit(nogil=True, cache=True, error_model="numpy")
def fill_sequential(dom, sp, dirs, store, n_init, rng, cap, stats, errpt):
    """Single-front fill into cell 0. Returns (count, status)."""
    coords = store.coords
    d = coords.shape[1]
    rot = np.empty((d, d))
    c = np.empty(d)
    stack = np.empty(64)
    n_st = _INIT_STACK
    snode = np.empty(n_st, dtype=np.int64)
    sbound = np.empty(n_st)
    for s in range(n_init):
        store.thread[s] = 0
        if not dyn_insert(store, 0, s):
            return s, CAPACITY
    head = 0
    count = n_init
    n_dirs = dirs.shape[0]
    while head < count:
        parent = head
        p = coords[head]
        head += 1
        rp = eval_spacing(sp, p, stack)
        if _bad(rp):
            errpt[:] = p
            return count, BAD_SPACING
        stats[ST_EXPANSIONS] += 1
        random_rotation_into(rot, rng)
        for m in range(n_dirs):
            _candidate(c, p, rp, rot, dirs, m)
            if not contains(dom, c, stack):
                stats[ST_OUTSIDE] += 1
                continue
            hc = eval_spacing(sp, c, stack)
            if _bad(hc):
                errpt[:] = c
                return count, BAD_SPACING
            if store.maxdepth[0] + 2 > n_st:
                n_st = 2 * (store.maxdepth[0] + 2)
                snode = np.empty(n_st, dtype=np.int64)
                sbound = np.empty(n_st)
            bi, _ = dyn_nearest(store, 0, c, hc * hc, -1, parent, snode, sbound)
            if bi >= 0:
                stats[ST_CLOSE] += 1
                continue
            if count >= cap:
                return count, CAPACITY
            for k in range(d):
                coords[count, k] = c[k]
            store.thread[count] = 0
            if not dyn_insert(store, 0, count):
                return count, CAPACITY
            count += 1
            stats[ST_PLACED] += 1
    return count, OK


@nb.njit(nogil=True, cache=True, inline="always")
def _sort_small(a, m, lo=0):
    """Insertion sort of a[lo:lo+m] in place (no slicing, so no new views)."""
    for i in range(lo + 1, lo + m):
        v = a[i]
        j = i - 1
        while j >= lo and a[j] > v:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v


@nb.njit(nogil=True, cache=True)
def involved_cells(top, c, r, out):
    """Cells whose seed lies within d1 + 2r of c; sorted ascending.

    Returns (count, nearest seed, squared distance to it).
    """
    n = top.data.shape[0]
    if n <= _SCAN_SEEDS:
        # few seeds: a linear scan beats the tree walk and its scratch stacks
        j1 = -1
        d1sq = np.inf
        for t in range(n):
            d2 = 0.0
            for k in range(c.shape[0]):
                dk = top.data[t, k] - c[k]
                d2 += dk * dk
            i = top.idx[t]
            if d2 < d1sq or (d2 == d1sq and i < j1):
                d1sq = d2
                j1 = i
        reach = math.sqrt(d1sq) + 2.0 * r
        reach2 = reach * reach
        m = 0
        for t in range(n):
            d2 = 0.0
            for k in range(c.shape[0]):
                dk = top.data[t, k] - c[k]
                d2 += dk * dk
            if d2 <= reach2:
                out[m] = top.idx[t]
                m += 1
        _sort_small(out, m)
        return m, j1, d1sq
    j1, d1sq = static_nearest(top, c)
    reach = math.sqrt(d1sq) + 2.0 * r
    m = static_radius(top, c, reach * reach, out)
    _sort_small(out, m)
    return m, j1, d1sq


@nb.njit(nogil=True, cache=True)
def _scan_seeds(tdata, tidx, cands, i, r, out, pos):
    """involved_cells by linear scan, for few seeds; writes out[pos:pos+m]."""
    d = tdata.shape[1]
    n = tdata.shape[0]
    if n == 1:
        # a lone seed is nearest and always within d1 + 2r
        out[pos] = tidx[0]
        return 1, tidx[0]
    j1 = -1
    d1sq = np.inf
    for t in range(n):
        d2 = 0.0
        for k in range(d):
            dk = tdata[t, k] - cands[i, k]
            d2 += dk * dk
        jt = tidx[t]
        if d2 < d1sq or (d2 == d1sq and jt < j1):
            d1sq = d2
            j1 = jt
    reach = math.sqrt(d1sq) + 2.0 * r
    reach2 = reach * reach
    m = 0
    for t in range(n):
        d2 = 0.0
        for k in range(d):
            dk = tdata[t, k] - cands[i, k]
            d2 += dk * dk
        if d2 <= reach2:
            out[pos + m] = tidx[t]
            m += 1
    _sort_small(out, m, pos)
    return m, j1


@nb.njit(nogil=True, cache=True, inline="always")
def guarded_place(top, store, sync, cap, cands, radii, start, stop, tid, exclude,
                  flat, off, cnt, union, mark, q, snode, sbound, codes, cells, d2s):
    """Check-and-insert a run of candidates from ``start``, in order.

    The run takes candidates while their involved-cell lists fit in ``flat``
    and ``off``. The sorted union of those cells is locked once, in ascending
    order, and each candidate then searches only its own cells, so it sees
    every point accepted before it. Slot ``exclude`` (the point being
    expanded, or -1) never blocks.

    Per candidate, ``codes`` gets the new slot when accepted, otherwise
    REJECTED (``d2s`` = squared distance to the blocker) or FULL. Returns
    (next unprocessed index, status); status NEED_STACK means the scratch
    stacks are shorter than maxdepth + 2 of a locked cell.
    """
    d = cands.shape[1]
    tdata = top.data
    tidx = top.idx
    n_top = tdata.shape[0]
    coords = store.coords
    maxdepth = store.maxdepth
    locks = sync.locks
    contention = sync.contention
    pos = 0
    nu = 0
    i = start
    while i < stop:
        g = i - start
        if g > 0 and (g >= off.shape[0] or pos + n_top > flat.shape[0]):
            break
        r = radii[i]
        if n_top <= _SCAN_SEEDS:
            m, j1 = _scan_seeds(tdata, tidx, cands, i, r, flat, pos)
        else:
            m, j1, d1sq = involved_cells(top, cands[i], r, flat[pos:])
        cells[i] = j1
        off[g] = pos
        cnt[g] = m
        # every seed closer than r is among the involved ones
        r2 = r * r
        for t in range(m):
            j = flat[pos + t]
            if j == exclude:
                continue
            d2 = 0.0
            for k in range(d):
                dk = coords[j, k] - cands[i, k]
                d2 += dk * dk
            if d2 < r2:
                codes[i] = REJECTED
                cells[i] = j
                d2s[i] = d2
                cnt[g] = -1
                break
        if cnt[g] >= 0:
            for t in range(m):
                j = flat[pos + t]
                if mark[j] == 0:
                    mark[j] = 1
                    union[nu] = j
                    nu += 1
            pos += m
        i += 1
    end = i
    _sort_small(union, nu)
    prev = -1
    need = 0
    for t in range(nu):
        j = union[t]
        mark[j] = 0
        if j <= prev:
            fetch_add(sync.diag, 0, 1)
        prev = j
        # uncontended fast path; the spinning acquire counts contention
        if cas(locks, j * LOCK_STRIDE, 0, -1) != 0:
            acquire_write(locks, contention, j)
        if maxdepth[j] > need:
            need = maxdepth[j]
    status = OK
    for i in range(start, end):
        g = i - start
        m = cnt[g]
        if m < 0:
            continue
        if need + 2 > snode.shape[0]:
            end = i
            status = NEED_STACK
            break
        r = radii[i]
        best = r * r
        bi = -1
        base = off[g]
        for k in range(d):
            q[k] = cands[i, k]
        for t in range(m):
            bi, best = dyn_nearest(store, flat[base + t], q, best, bi, exclude, snode, sbound)
        code = REJECTED
        if bi < 0:
            slot = fetch_add(sync.counter, 0, 1)
            if slot >= cap:
                code = FULL
            else:
                for k in range(d):
                    coords[slot, k] = cands[i, k]
                store.thread[slot] = tid
                j1 = cells[i]
                code = slot if dyn_insert(store, j1, slot) else FULL
                if maxdepth[j1] > need:
                    need = maxdepth[j1]
        codes[i] = code
        d2s[i] = best
    for t in range(nu - 1, -1, -1):
        atomic_store(locks, union[t] * LOCK_STRIDE, 0)
    return end, status


@nb.njit(nogil=True, cache=True, inline="always")
def _scratch(n_top, n_run, dim):
    """Per-thread buffers for guarded_place runs of up to ``n_run`` candidates."""
    flat = np.empty(n_top + 4 * n_run, dtype=np.int64)
    off = np.empty(n_run, dtype=np.int64)
    cnt = np.empty(n_run, dtype=np.int64)
    union = np.empty(n_top, dtype=np.int64)
    mark = np.zeros(n_top, dtype=np.int64)
    return flat, off, cnt, union, mark, np.empty(dim)


@nb.njit(nogil=True, cache=True)
def place_many(top, store, sync, cap, cands, radii, tid, out_code, out_cell, out_d2):
    n_st = _INIT_STACK
    snode = np.empty(n_st, dtype=np.int64)
    sbound = np.empty(n_st)
    flat, off, cnt, union, mark, q = _scratch(top.data.shape[0], 64, cands.shape[1])
    i = 0
    n = cands.shape[0]
    while i < n:
        i, status = guarded_place(top, store, sync, cap, cands, radii, i, n, tid, -1,
                                  flat, off, cnt, union, mark, q, snode, sbound, out_code, out_cell, out_d2)
        if status == NEED_STACK:
            n_st *= 2
            snode = np.empty(n_st, dtype=np.int64)
            sbound = np.empty(n_st)


@nb.njit(nogil=True, cache=True)
def setup_cells(top, store, n_seeds, n_fixed):
    """Tag seeds with their own cell and link fixed points into cell trees."""
    for s in range(n_seeds):
        store.cell[s] = s
    for s in range(n_seeds, n_seeds + n_fixed):
        j, _ = static_nearest(top, store.coords[s])
        if not dyn_insert(store, j, s):
            return False
    return True


@nb.njit(nogil=True, cache=True, error_model="numpy")
def parallel_worker(dom, sp, dirs, top, store, sync, cap, init_slots, tid, rng, abort, stats, errpt):
    """One thread of the cell-parallel fill. Returns a status code."""
    coords = store.coords
    d = coords.shape[1]
    rot = np.empty((d, d))
    c = np.empty(d)
    stack = np.empty(64)
    n_st = _INIT_STACK
    snode = np.empty(n_st, dtype=np.int64)
    sbound = np.empty(n_st)
    n_dirs = dirs.shape[0]
    flat, off, cnt, union, mark, q = _scratch(top.data.shape[0], n_dirs, d)
    cands = np.empty((n_dirs, d))
    radii = np.empty(n_dirs)
    codes = np.empty(n_dirs, dtype=np.int64)
    cells = np.empty(n_dirs, dtype=np.int64)
    d2s = np.empty(n_dirs)
    queue = np.empty(max(1024, 2 * init_slots.shape[0]), dtype=np.int64)
    tail = init_slots.shape[0]
    queue[:tail] = init_slots
    head = 0
    while head < tail:
        if atomic_load(abort, 0) != 0:
            return OK
        parent = queue[head]
        p = coords[parent]
        head += 1
        rp = eval_spacing(sp, p, stack)
        if _bad(rp):
            errpt[:] = p
            atomic_store(abort, 0, 1)
            return BAD_SPACING
        stats[ST_EXPANSIONS] += 1
        random_rotation_into(rot, rng)
        nc = 0
        for m in range(n_dirs):
            _candidate(c, p, rp, rot, dirs, m)
            if not contains(dom, c, stack):
                stats[ST_OUTSIDE] += 1
                continue
            hc = eval_spacing(sp, c, stack)
            if _bad(hc):
                errpt[:] = c
                atomic_store(abort, 0, 1)
                return BAD_SPACING
            for k in range(d):
                cands[nc, k] = c[k]
            radii[nc] = hc
            nc += 1
        i = 0
        while i < nc:
            i, status = guarded_place(top, store, sync, cap, cands, radii, i, nc, tid, parent,
                                      flat, off, cnt, union, mark, q, snode, sbound, codes, cells, d2s)
            if status == NEED_STACK:
                n_st *= 2
                snode = np.empty(n_st, dtype=np.int64)
                sbound = np.empty(n_st)
        for t in range(nc):
            code = codes[t]
            if code == FULL:
                atomic_store(abort, 0, 1)
                return CAPACITY
            if code == REJECTED:
                stats[ST_CLOSE] += 1
                continue
            stats[ST_PLACED] += 1
            if tail == queue.shape[0]:
                grown = np.empty(2 * tail, dtype=np.int64)
                grown[:tail] = queue
                queue = grown
            queue[tail] = code
            tail += 1
    return OK
