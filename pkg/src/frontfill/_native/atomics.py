"""Atomic primitives and spin readers-writer locks for nogil kernels.

Lock words live in an int64 array with a stride of ``LOCK_STRIDE`` so
that each lock owns a cache line. A word holds 0 when free, -1 while a
writer owns it, and the reader count otherwise.
"""
from __future__ import annotations

import numba as nb
import numpy as np
from llvmlite import ir
from numba import types
from numba.core import cgutils
from numba.extending import intrinsic

LOCK_STRIDE = 8
_SPINS_BEFORE_YIELD = 32


def _item_pointer(context, builder, arrty, arr, idx):
    ary = context.make_array(arrty)(context, builder, arr)
    return cgutils.get_item_pointer(context, builder, arrty, ary, [idx])


@intrinsic
def cas(typingctx, arr, idx, expected, new):
    """Compare-and-swap ``arr[idx]``; returns the value seen before the swap."""
    sig = types.int64(arr, idx, expected, new)

    def codegen(context, builder, signature, args):
        a, i, e, n = args
        ptr = _item_pointer(context, builder, signature.args[0], a, i)
        res = builder.cmpxchg(ptr, e, n, "acq_rel", "monotonic")
        return builder.extract_value(res, 0)

    return sig, codegen


@intrinsic
def fetch_add(typingctx, arr, idx, val):
    sig = types.int64(arr, idx, val)

    def codegen(context, builder, signature, args):
        a, i, v = args
        ptr = _item_pointer(context, builder, signature.args[0], a, i)
        return builder.atomic_rmw("add", ptr, v, "acq_rel")

    return sig, codegen


@intrinsic
def atomic_load(typingctx, arr, idx):
    sig = types.int64(arr, idx)

    def codegen(context, builder, signature, args):
        a, i = args
        ptr = _item_pointer(context, builder, signature.args[0], a, i)
        return builder.load_atomic(ptr, "acquire", 8)

    return sig, codegen


@intrinsic
def atomic_store(typingctx, arr, idx, val):
    sig = types.void(arr, idx, val)

    def codegen(context, builder, signature, args):
        a, i, v = args
        ptr = _item_pointer(context, builder, signature.args[0], a, i)
        builder.store_atomic(v, ptr, "release", 8)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def yield_cpu(typingctx):
    sig = types.int32()

    def codegen(context, builder, signature, args):
        fnty = ir.FunctionType(ir.IntType(32), [])
        fn = cgutils.get_or_insert_function(builder.module, fnty, "sched_yield")
        return builder.call(fn, [])

    return sig, codegen


@nb.njit(nogil=True, cache=True)
def acquire_write(locks, contention, j):
    """Take lock ``j`` exclusively. Returns True if the first attempt failed."""
    w = j * LOCK_STRIDE
    if cas(locks, w, 0, -1) == 0:
        return False
    fetch_add(contention, j, 1)
    spins = 0
    while True:
        if atomic_load(locks, w) == 0 and cas(locks, w, 0, -1) == 0:
            return True
        spins += 1
        if spins >= _SPINS_BEFORE_YIELD:
            yield_cpu()
            spins = 0


@nb.njit(nogil=True, cache=True)
def release_write(locks, j):
    atomic_store(locks, j * LOCK_STRIDE, 0)


@nb.njit(nogil=True, cache=True)
def acquire_read(locks, contention, j):
    w = j * LOCK_STRIDE
    first = True
    spins = 0
    while True:
        s = atomic_load(locks, w)
        if s >= 0 and cas(locks, w, s, s + 1) == s:
            return not first
        if first:
            fetch_add(contention, j, 1)
            first = False
        spins += 1
        if spins >= _SPINS_BEFORE_YIELD:
            yield_cpu()
            spins = 0


@nb.njit(nogil=True, cache=True)
def release_read(locks, j):
    fetch_add(locks, j * LOCK_STRIDE, -1)


def new_lock_array(n: int) -> np.ndarray:
    return np.zeros(max(n, 1) * LOCK_STRIDE, dtype=np.int64)
