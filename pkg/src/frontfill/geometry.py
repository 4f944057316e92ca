"""Domains described by a characteristic function and a bounding box."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import expr
from ._native import program as _prog

__all__ = [
    "Aabb",
    "Domain",
    "Box",
    "StarPolar2D",
    "StarSpherical3D",
    "Polygon2D",
    "TriMesh3D",
    "DomainError",
    "clover2d",
    "clover3d",
    "contains",
    "bounding_box",
    "boundary_sample_2d",
    "interior_point",
    "load_polygon_csv",
    "load_stl",
    "load_obj",
    "load_mesh",
]

CLOVER2D_RADIUS = "3/2 - cos(3*(theta - pi/6))^3"
CLOVER3D_RADIUS = "3/2 - cos(3*(phi - pi/6))^3*(pi - theta)^2*theta^2/8"

_ANGLE_SAMPLES = 20_000
_BOX_PAD = 1e-3


class DomainError(ValueError):
    """Invalid domain definition or query."""


@dataclass(frozen=True)
class Aabb:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi):
            raise DomainError("Aabb corners differ in dimension")
        if any(a > b for a, b in zip(lo, hi)):
            raise DomainError(f"Aabb lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def as_array(self) -> np.ndarray:
        return np.array([self.lo, self.hi], dtype=np.float64)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def padded(self, rel: float) -> "Aabb":
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        ext = np.maximum(hi - lo, 1e-300)
        return Aabb(tuple(lo - rel * ext), tuple(hi + rel * ext))


class Domain:
    """Base class. Subclasses provide ``dim``, ``_pack`` and ``_bbox``."""

    dim: int

    @cached_property
    def packed(self) -> _prog.Packed:
        return self._pack()

    @cached_property
    def bbox(self) -> Aabb:
        return self._bbox()

    def contains(self, p) -> bool:
        p = _as_point(p, self.dim)
        return bool(self.contains_many(p[None, :])[0])

    def contains_many(self, pts) -> np.ndarray:
        pts = np.ascontiguousarray(pts, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise DomainError(f"expected points of dimension {self.dim}, got shape {pts.shape}")
        out = np.empty(pts.shape[0], dtype=np.bool_)
        if len(pts):
            _prog.contains_many(self.packed, pts, out)
        return out

    def _pack(self) -> _prog.Packed:  # pragma: no cover - abstract
        raise NotImplementedError

    def _bbox(self) -> Aabb:  # pragma: no cover - abstract
        raise NotImplementedError


def _as_point(p, dim: int) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64).reshape(-1)
    if arr.shape[0] != dim:
        raise DomainError(f"point {tuple(arr)} has dimension {arr.shape[0]}, domain has {dim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"point {tuple(arr)} has non-finite coordinates")
    return arr


@dataclass(eq=False)
class Box(Domain):
    """Closed axis-aligned box."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        self.aabb = Aabb(self.lo, self.hi)
        self.dim = self.aabb.dim
        if self.dim not in (1, 2, 3):
            raise DomainError(f"unsupported dimension {self.dim}")

    def _pack(self):
        return _prog.pack([_prog.DOM_BOX, self.dim], list(self.aabb.lo) + list(self.aabb.hi))

    def _bbox(self):
        return self.aabb


class _Star(Domain):
    variables: tuple
    radius_src: str

    def _compile(self):
        node = expr.parse(self.radius_src, self.variables)
        code, consts = expr.compile_program(node, self.variables)
        return node, code, consts

    def radius(self, *angles) -> np.ndarray:
        """Boundary radius at the given angle arrays (broadcast)."""
        cols = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in angles))
        shape = cols[0].shape
        env = np.ascontiguousarray(np.stack([c.ravel() for c in cols], axis=1))
        out = np.empty(env.shape[0])
        _prog.run_program_many(self._code, self._consts, env, out)
        return out.reshape(shape)

    def _pack(self):
        return _prog.pack([self._kind, self.dim], [], self._code, self._consts)


@dataclass(eq=False)
class StarPolar2D(_Star):
    """Region ``|p| < r(theta)`` with theta = arg(x, y)."""

    radius_src: str
    variables: tuple = field(default=("theta",), init=False)

    def __post_init__(self):
        self.dim = 2
        self._kind = _prog.DOM_STAR2
        self.ast, self._code, self._consts = self._compile()
        theta = np.linspace(-math.pi, math.pi, _ANGLE_SAMPLES, endpoint=False)
        r = self.radius(theta)
        if not np.all(np.isfinite(r)) or r.min() <= 0.0:
            raise DomainError(f"star radius {self.radius_src!r} must be positive and finite")
        self._rmax = float(r.max())

    def _bbox(self):
        R = self._rmax * (1.0 + _BOX_PAD)
        return Aabb((-R, -R), (R, R))


@dataclass(eq=False)
class StarSpherical3D(_Star):
    """Region ``|p| < r(phi, theta)``, phi = arg(x, y), theta = acos(z/|p|)."""

    radius_src: str
    variables: tuple = field(default=("phi", "theta"), init=False)

    def __post_init__(self):
        self.dim = 3
        self._kind = _prog.DOM_STAR3
        self.ast, self._code, self._consts = self._compile()
        phi, theta = np.meshgrid(
            np.linspace(-math.pi, math.pi, 200, endpoint=False),
            np.linspace(0.0, math.pi, 101),
        )
        r = self.radius(phi, theta)
        if not np.all(np.isfinite(r)) or r.min() <= 0.0:
            raise DomainError(f"star radius {self.radius_src!r} must be positive and finite")
        self._rmax = float(r.max())

    def _bbox(self):
        R = self._rmax * (1.0 + _BOX_PAD)
        return Aabb((-R, -R, -R), (R, R, R))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return (
        (o1 == 0 and on_seg(p1, p2, q1))
        or (o2 == 0 and on_seg(p1, p2, q2))
        or (o3 == 0 and on_seg(q1, q2, p1))
        or (o4 == 0 and on_seg(q1, q2, p2))
    )


@dataclass(eq=False)
class Polygon2D(Domain):
    """Simple polygon; the closing edge is implicit."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise DomainError("polygon vertices must be an (n, 2) array")
        if len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise DomainError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise DomainError("polygon vertices must be finite")
        self.vertices = v
        self.dim = 2
        self._check_simple()

    def _check_simple(self):
        v = self.vertices
        n = len(v)
        edges = [(v[i], v[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            if np.array_equal(edges[i][0], edges[i][1]):
                raise DomainError(f"polygon edge {i} has zero length")
        # bounding-box prefilter keeps the pairwise scan cheap on typical inputs
        lo = np.minimum(v, np.roll(v, -1, axis=0))
        hi = np.maximum(v, np.roll(v, -1, axis=0))
        for i in range(n):
            overlap = np.all((lo[i] <= hi) & (lo <= hi[i]), axis=1)
            for j in np.nonzero(overlap)[0]:
                if j <= i or j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_cross(*edges[i], *edges[j]):
                    raise DomainError(f"polygon edges {i} and {j} intersect")

    @property
    def perimeter(self) -> float:
        return float(np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1).sum())

    def _pack(self):
        b = self.bbox
        return _prog.pack([_prog.DOM_POLYGON, 2], np.concatenate([self.vertices.ravel(), b.lo, b.hi]))

    def _bbox(self):
        return Aabb(tuple(self.vertices.min(axis=0)), tuple(self.vertices.max(axis=0)))


@dataclass(eq=False)
class TriMesh3D(Domain):
    """Closed triangle surface; ``triangles`` has shape (m, 3, 3)."""

    triangles: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.triangles, dtype=np.float64)
        if t.ndim != 3 or t.shape[1:] != (3, 3) or len(t) == 0:
            raise DomainError("mesh triangles must be a non-empty (m, 3, 3) array")
        if not np.all(np.isfinite(t)):
            raise DomainError("mesh coordinates must be finite")
        self.triangles = t
        self.dim = 3
        check_watertight(t)

    def _pack(self):
        b = self.bbox
        return _prog.pack([_prog.DOM_MESH, 3], np.concatenate([self.triangles.ravel(), b.lo, b.hi]))

    def _bbox(self):
        flat = self.triangles.reshape(-1, 3)
        return Aabb(tuple(flat.min(axis=0)), tuple(flat.max(axis=0)))


def check_watertight(tris: np.ndarray) -> None:
    """Every undirected edge must be shared by exactly two triangles."""
    flat = tris.reshape(-1, 3)
    _, vid = np.unique(flat, axis=0, return_inverse=True)
    vid = vid.reshape(-1, 3)
    if np.any((vid[:, 0] == vid[:, 1]) | (vid[:, 1] == vid[:, 2]) | (vid[:, 0] == vid[:, 2])):
        raise DomainError("mesh has degenerate triangles")
    edges = np.concatenate([vid[:, [0, 1]], vid[:, [1, 2]], vid[:, [2, 0]]])
    edges.sort(axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    bad = np.count_nonzero(counts != 2)
    if bad:
        raise DomainError(f"mesh is not watertight: {bad} edge(s) not shared by exactly two triangles")


def clover2d() -> StarPolar2D:
    return StarPolar2D(CLOVER2D_RADIUS)


def clover3d() -> StarSpherical3D:
    return StarSpherical3D(CLOVER3D_RADIUS)


def contains(domain: Domain, p) -> bool:
    return domain.contains(p)


def bounding_box(domain: Domain) -> Aabb:
    return domain.bbox


def interior_point(domain: Domain, rng_seed: int = 0, tries: int = 100_000) -> np.ndarray:
    """A point inside the domain: the origin for star shapes, else the box
    centre if inside, else the first hit of uniform sampling."""
    if isinstance(domain, _Star):
        return np.zeros(domain.dim)
    b = domain.bbox
    centre = 0.5 * (np.array(b.lo) + np.array(b.hi))
    if domain.contains(centre):
        return centre
    rng = np.random.default_rng(rng_seed)
    done = 0
    while done < tries:
        pts = rng.uniform(b.lo, b.hi, size=(4096, domain.dim))
        hit = np.nonzero(domain.contains_many(pts))[0]
        if len(hit):
            return pts[hit[0]]
        done += len(pts)
    raise DomainError("could not find a point inside the domain")


# ------------------------------------------------------------ boundary


def _curve(domain) -> tuple[Callable[[np.ndarray], np.ndarray], np.ndarray, np.ndarray]:
    """Return (point_at(s), s_grid, points_on_grid) for arc-length traversal."""
    if isinstance(domain, Polygon2D):
        v = domain.vertices
        closed = np.vstack([v, v[:1]])
        seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        s_knots = np.concatenate([[0.0], np.cumsum(seg)])

        def at(s):
            s = np.atleast_1d(s)
            k = np.clip(np.searchsorted(s_knots, s, side="right") - 1, 0, len(seg) - 1)
            t = ((s - s_knots[k]) / seg[k])[:, None]
            return closed[k] * (1.0 - t) + closed[k + 1] * t

        return at, s_knots, closed
    if isinstance(domain, StarPolar2D):
        # small parameter steps; the accumulated chord length approximates arc length
        theta = np.linspace(0.0, 2.0 * math.pi, 64 * _ANGLE_SAMPLES + 1)
        r = domain.radius(theta)
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        s_grid = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])

        def at(s):
            th = np.interp(np.atleast_1d(s), s_grid, theta)
            rr = domain.radius(th)
            return np.stack([rr * np.cos(th), rr * np.sin(th)], axis=1)

        return at, s_grid, pts
    raise DomainError(f"boundary sampling needs a 2-D polygon or star domain, got {type(domain).__name__}")


def boundary_sample_2d(domain: Domain, h) -> np.ndarray:
    """Points on the boundary curve, consecutive arc-length gaps close to h.

    ``h`` is a SpacingFn or any callable mapping an (n, 2) array to spacings.
    Gaps lie in [0.5 h, 1.5 h] of the earlier point of each pair; if h
    exceeds the perimeter, three evenly spaced points are returned.
    """
    if getattr(domain, "dim", None) != 2:
        raise DomainError("boundary sampling is only defined for 2-D domains")
    at, s_grid, _ = _curve(domain)
    total = float(s_grid[-1])

    def hval(p):
        v = float(np.asarray(h(p[None, :])).reshape(-1)[0])
        if not (v > 0.0 and math.isfinite(v)):
            raise DomainError(f"spacing {v} at boundary point {tuple(p)} is not positive")
        return v

    s_list = [0.0]
    p = at(0.0)[0]
    pts = [p]
    while True:
        hp = hval(p)
        s_next = s_list[-1] + hp
        if s_next > total - 0.5 * hp:
            break
        s_list.append(s_next)
        p = at(s_next)[0]
        pts.append(p)
    if len(pts) < 3:
        return at(np.arange(3) * total / 3.0)
    return np.array(pts)


# ------------------------------------------------------------ loaders


def load_polygon_csv(path) -> Polygon2D:
    """CSV of ``x,y`` rows in boundary order; a non-numeric first row is a header."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [c.strip() for c in line.split(",")]
        try:
            vals = [float(c) for c in parts]
        except ValueError:
            if not rows and lineno == 1:
                continue
            raise DomainError(f"{path}:{lineno}: non-numeric vertex row {line!r}") from None
        if len(vals) != 2:
            raise DomainError(f"{path}:{lineno}: expected 2 columns, got {len(vals)}")
        rows.append(vals)
    return Polygon2D(np.array(rows))


def load_stl(path) -> TriMesh3D:
    data = Path(path).read_bytes()
    if len(data) >= 84:
        (n,) = struct.unpack_from("<I", data, 80)
        if 84 + 50 * n == len(data):
            rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
            arr = np.frombuffer(data, dtype=rec, count=n, offset=84)
            return TriMesh3D(arr["v"].astype(np.float64))
    verts = []
    for lineno, line in enumerate(data.decode("ascii", errors="replace").splitlines(), 1):
        tok = line.split()
        if tok and tok[0] == "vertex":
            if len(tok) != 4:
                raise DomainError(f"{path}:{lineno}: malformed vertex line")
            verts.append([float(t) for t in tok[1:]])
    if not verts or len(verts) % 3:
        raise DomainError(f"{path}: no complete facets found")
    return TriMesh3D(np.array(verts).reshape(-1, 3, 3))


def load_obj(path) -> TriMesh3D:
    verts = []
    faces = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "v":
            verts.append([float(t) for t in tok[1:4]])
        elif tok[0] == "f":
            idx = [int(t.split("/")[0]) for t in tok[1:]]
            if len(idx) != 3:
                raise DomainError(f"{path}:{lineno}: only triangular faces are supported")
            faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    if not faces:
        raise DomainError(f"{path}: no faces found")
    v = np.array(verts)
    return TriMesh3D(v[np.array(faces)])


def load_mesh(path) -> TriMesh3D:
    suffix = Path(path).suffix.lower()
    if suffix == ".stl":
        return load_stl(path)
    if suffix == ".obj":
        return load_obj(path)
    raise DomainError(f"unsupported mesh format {suffix!r}")
