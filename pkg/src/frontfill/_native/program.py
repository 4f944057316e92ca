"""Postfix interpreter, spacing presets and containment tests.

Domains and spacing functions cross into compiled code as ``Packed``
namedtuples: integer header, float payload, and an optional postfix
program with its constant pool.
"""
from __future__ import annotations

import math
from collections import namedtuple

import numba as nb
import numpy as np

Packed = namedtuple("Packed", ["ints", "floats", "code", "consts"])

# spacing kinds
SP_CONSTANT, SP_PRESET, SP_EXPR = 0, 1, 2
# preset ids (ints[1])
PRESET_IDS = {
    "uniform": 0,
    "clover2d": 1,
    "bunny2d": 2,
    "maze2d": 3,
    "clover3d": 4,
    "bunny3d": 5,
    "maze3d": 6,
}
# domain kinds
DOM_BOX, DOM_STAR2, DOM_STAR3, DOM_POLYGON, DOM_MESH = 0, 1, 2, 3, 4

_EMPTY_CODE = np.zeros((0, 2), dtype=np.int64)
_EMPTY_F = np.zeros(0, dtype=np.float64)

_RAY_RETRIES = 8
_PARALLEL_TOL = 1e-12
_EDGE_TOL = 1e-12


def pack(ints, floats, code=None, consts=None) -> Packed:
    return Packed(
        np.ascontiguousarray(ints, dtype=np.int64),
        np.ascontiguousarray(floats, dtype=np.float64).ravel(),
        _EMPTY_CODE if code is None else np.ascontiguousarray(code, dtype=np.int64),
        _EMPTY_F if consts is None else np.ascontiguousarray(consts, dtype=np.float64),
    )


def new_stack() -> np.ndarray:
    return np.empty(64, dtype=np.float64)


@nb.njit(nogil=True, cache=True, inline="always")
def arg2(x, y):
    if x == 0.0 and y == 0.0:
        return 0.0
    return math.atan2(y, x)


@nb.njit(nogil=True, cache=True, error_model="numpy")
def run_program(code, consts, env, stack):
    sp = 0
    for i in range(code.shape[0]):
        op = code[i, 0]
        if op == 0:
            stack[sp] = consts[code[i, 1]]
            sp += 1
        elif op == 1:
            stack[sp] = env[code[i, 1]]
            sp += 1
        elif op == 2:
            stack[sp - 1] = -stack[sp - 1]
        elif op < 10:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == 3:
                r = a + b
            elif op == 4:
                r = a - b
            elif op == 5:
                r = a * b
            elif op == 6:
                r = a / b
            else:
                r = a**b
            stack[sp - 1] = r
        elif op < 20:
            a = stack[sp - 1]
            if op == 10:
                r = math.sin(a)
            elif op == 11:
                r = math.cos(a)
            elif op == 12:
                r = math.tan(a)
            elif op == 13:
                r = math.tanh(a)
            elif op == 14:
                r = math.sqrt(a) if a >= 0.0 else np.nan
            elif op == 15:
                r = abs(a)
            else:
                r = math.exp(a)
            stack[sp - 1] = r
        else:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == 20:
                r = min(a, b)
            elif op == 21:
                r = max(a, b)
            elif op == 22:
                r = math.atan2(a, b)
            elif op == 23:
                r = arg2(a, b)
            else:
                r = math.hypot(a, b)
            stack[sp - 1] = r
    return stack[0]


@nb.njit(nogil=True, cache=True, error_model="numpy", inline="always")
def preset_value(pid, x):
    """Table-style presets with the length scale factored out."""
    if pid == 0:
        return 1.0
    if pid == 1:
        c = math.cos(3.0 * arg2(x[0], x[1]))
        return 1.0 + 4.0 * c * c * math.tanh(math.sqrt(x[0] * x[0] + x[1] * x[1]))
    if pid == 2:
        b = 1.0 + x[1] / 100.0
        return b**1.5 if b >= 0.0 else np.nan
    if pid == 3:
        b = 1.0 + x[1] / 20.0
        return b**1.5 if b >= 0.0 else np.nan
    if pid == 4:
        c = math.cos(3.0 * arg2(x[0], x[1]) + math.pi / 3.0)
        r = math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
        return 0.5 + c * c * math.tanh((2.0 - x[2]) * r)
    if pid == 5:
        return 1.0 + 4.0 * (180.0 - x[2]) / 180.0
    return 4.0 + math.sin(x[0] * math.pi / 5.0)


@nb.njit(nogil=True, cache=True, error_model="numpy", inline="always")
def eval_spacing(sp, x, stack):
    kind = sp.ints[0]
    if kind == 0:
        return sp.floats[0]
    if kind == 1:
        return sp.floats[0] * preset_value(sp.ints[1], x)
    return sp.floats[0] * run_program(sp.code, sp.consts, x, stack)


@nb.njit(nogil=True, cache=True, error_model="numpy", inline="always")
def star_radius2(dom, x, stack):
    """Squared point radius and squared boundary radius along its direction."""
    d = x.shape[0]
    env = stack[56:58]
    if d == 2:
        env[0] = arg2(x[0], x[1])
        rr = x[0] * x[0] + x[1] * x[1]
    else:
        env[0] = arg2(x[0], x[1])
        rr = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
        if rr > 0.0:
            c = x[2] / math.sqrt(rr)
            c = min(1.0, max(-1.0, c))
            env[1] = math.acos(c)
        else:
            env[1] = 0.0
    r = run_program(dom.code, dom.consts, env, stack[:56])
    return rr, r * r


_RAY2 = np.array(
    [0.3807289, 2.1184653, 4.0149210, 1.2940173, 5.5512981, 2.8871103, 0.7702554, 3.6031917]
)
_RAY3 = np.array(
    [
        [0.4522873, 0.6271541, 0.6341120],
        [-0.5816472, 0.3012279, 0.7555040],
        [0.2318990, -0.8733205, 0.4283621],
        [-0.3310214, -0.4201177, -0.8448813],
        [0.8152003, -0.2093321, -0.5399157],
        [-0.7044213, 0.6521450, -0.2800411],
        [0.1037721, 0.9301245, -0.3523107],
        [0.6099812, 0.4472301, -0.6541199],
    ]
)


@nb.njit(nogil=True, cache=True)
def polygon_contains(verts, px, py):
    """Even-odd rule along a fixed pseudo-random ray, retried on grazing hits."""
    n = verts.shape[0] // 2
    inside = False
    for attempt in range(_RAY_RETRIES):
        a = _RAY2[attempt]
        dx = math.cos(a)
        dy = math.sin(a)
        crossings = 0
        degenerate = False
        for i in range(n):
            j = i + 1 if i + 1 < n else 0
            ax = verts[2 * i]
            ay = verts[2 * i + 1]
            ex = verts[2 * j] - ax
            ey = verts[2 * j + 1] - ay
            elen = math.sqrt(ex * ex + ey * ey)
            if elen == 0.0:
                continue
            denom = dx * ey - dy * ex
            wx = ax - px
            wy = ay - py
            if abs(denom) < _PARALLEL_TOL * elen:
                # parallel: only an issue when the ray runs along the edge
                if abs(wx * dy - wy * dx) < _PARALLEL_TOL * elen:
                    degenerate = True
                    break
                continue
            t = (wx * ey - wy * ex) / denom
            s = (wx * dy - wy * dx) / denom
            if t <= 0.0 or s < -_EDGE_TOL or s > 1.0 + _EDGE_TOL:
                continue
            if s < _EDGE_TOL or s > 1.0 - _EDGE_TOL:
                degenerate = True
                break
            crossings += 1
        inside = (crossings & 1) == 1
        if not degenerate:
            return inside
    return inside


@nb.njit(nogil=True, cache=True)
def mesh_contains(tris, px, py, pz):
    """Ray parity against a triangle soup (Moller-Trumbore)."""
    m = tris.shape[0] // 9
    inside = False
    for attempt in range(_RAY_RETRIES):
        dx = _RAY3[attempt, 0]
        dy = _RAY3[attempt, 1]
        dz = _RAY3[attempt, 2]
        nrm = math.sqrt(dx * dx + dy * dy + dz * dz)
        dx /= nrm
        dy /= nrm
        dz /= nrm
        crossings = 0
        degenerate = False
        for k in range(m):
            b = 9 * k
            e1x = tris[b + 3] - tris[b]
            e1y = tris[b + 4] - tris[b + 1]
            e1z = tris[b + 5] - tris[b + 2]
            e2x = tris[b + 6] - tris[b]
            e2y = tris[b + 7] - tris[b + 1]
            e2z = tris[b + 8] - tris[b + 2]
            hx = dy * e2z - dz * e2y
            hy = dz * e2x - dx * e2z
            hz = dx * e2y - dy * e2x
            det = e1x * hx + e1y * hy + e1z * hz
            nx = e1y * e2z - e1z * e2y
            ny = e1z * e2x - e1x * e2z
            nz = e1x * e2y - e1y * e2x
            area2 = math.sqrt(nx * nx + ny * ny + nz * nz)
            if area2 == 0.0:
                continue
            sx = px - tris[b]
            sy = py - tris[b + 1]
            sz = pz - tris[b + 2]
            if abs(det) < _PARALLEL_TOL * area2:
                # ray parallel to the plane; degenerate only if it lies in it
                if abs(sx * nx + sy * ny + sz * nz) < _PARALLEL_TOL * area2:
                    degenerate = True
                    break
                continue
            inv = 1.0 / det
            u = (sx * hx + sy * hy + sz * hz) * inv
            if u < -_EDGE_TOL or u > 1.0 + _EDGE_TOL:
                continue
            qx = sy * e1z - sz * e1y
            qy = sz * e1x - sx * e1z
            qz = sx * e1y - sy * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < -_EDGE_TOL or u + v > 1.0 + _EDGE_TOL:
                continue
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            if t <= 0.0:
                continue
            if u < _EDGE_TOL or v < _EDGE_TOL or u + v > 1.0 - _EDGE_TOL:
                degenerate = True
                break
            crossings += 1
        inside = (crossings & 1) == 1
        if not degenerate:
            return inside
    return inside


@nb.njit(nogil=True, cache=True, error_model="numpy", inline="always")
def contains(dom, x, stack):
    kind = dom.ints[0]
    d = dom.ints[1]
    if kind == 0:
        for k in range(d):
            if x[k] < dom.floats[k] or x[k] > dom.floats[d + k]:
                return False
        return True
    if kind == 1 or kind == 2:
        rr, rb2 = star_radius2(dom, x, stack)
        return rr < rb2
    # polytopes: cheap bounding-box rejection first
    nb_ = dom.floats.shape[0]
    for k in range(d):
        if x[k] < dom.floats[nb_ - 2 * d + k] or x[k] > dom.floats[nb_ - d + k]:
            return False
    if kind == 3:
        return polygon_contains(dom.floats[: nb_ - 4], x[0], x[1])
    return mesh_contains(dom.floats[: nb_ - 6], x[0], x[1], x[2])


@nb.njit(nogil=True, cache=True)
def contains_many(dom, pts, out):
    stack = np.empty(64)
    for i in range(pts.shape[0]):
        out[i] = contains(dom, pts[i], stack)


@nb.njit(nogil=True, cache=True)
def spacing_many(sp, pts, out):
    stack = np.empty(64)
    for i in range(pts.shape[0]):
        out[i] = eval_spacing(sp, pts[i], stack)


@nb.njit(nogil=True, cache=True)
def run_program_many(code, consts, env, out):
    stack = np.empty(64)
    for i in range(env.shape[0]):
        out[i] = run_program(code, consts, env[i], stack)
