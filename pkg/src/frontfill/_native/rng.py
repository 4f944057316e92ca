"""splitmix64 generator and random rotations.

State is a one-element uint64 array owned by the calling thread.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(nogil=True, cache=True)
def next_u64(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(nogil=True, cache=True)
def uniform(state):
    """Uniform double in [0, 1)."""
    return float(next_u64(state) >> _S11) * _INV53


def new_state(seed: int) -> np.ndarray:
    return np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)


@nb.njit(nogil=True, cache=True)
def random_rotation_into(rot, state):
    """Fill ``rot`` (d x d) with a uniformly random rotation for d in {1, 2, 3}."""
    d = rot.shape[0]
    if d == 1:
        rot[0, 0] = 1.0
    elif d == 2:
        a = 2.0 * math.pi * uniform(state)
        c = math.cos(a)
        s = math.sin(a)
        rot[0, 0] = c
        rot[0, 1] = -s
        rot[1, 0] = s
        rot[1, 1] = c
    else:
        # Shoemake's uniform unit quaternion
        u1 = uniform(state)
        u2 = 2.0 * math.pi * uniform(state)
        u3 = 2.0 * math.pi * uniform(state)
        a = math.sqrt(1.0 - u1)
        b = math.sqrt(u1)
        w = a * math.sin(u2)
        x = a * math.cos(u2)
        y = b * math.sin(u3)
        z = b * math.cos(u3)
        rot[0, 0] = 1.0 - 2.0 * (y * y + z * z)
        rot[0, 1] = 2.0 * (x * y - z * w)
        rot[0, 2] = 2.0 * (x * z + y * w)
        rot[1, 0] = 2.0 * (x * y + z * w)
        rot[1, 1] = 1.0 - 2.0 * (x * x + z * z)
        rot[1, 2] = 2.0 * (y * z - x * w)
        rot[2, 0] = 2.0 * (x * z - y * w)
        rot[2, 1] = 2.0 * (y * z + x * w)
        rot[2, 2] = 1.0 - 2.0 * (x * x + y * y)
