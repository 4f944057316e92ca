"""Candidate directions on the unit sphere and point expansion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["SpherePattern", "unit_sphere_pattern", "expand", "random_rotation"]


@dataclass(frozen=True, eq=False)
class SpherePattern:
    dim: int
    n_c: int
    dirs: np.ndarray

    def __len__(self) -> int:
        return len(self.dirs)


def unit_sphere_pattern(dim: int, n_c: int) -> SpherePattern:
    """Directions used to expand a point.

    1-D gives {-1, +1}. 2-D gives ``n_c`` equally spaced angles. 3-D uses
    ``m = ceil(n_c / 2)`` latitude bands at ``theta_j = j*pi/m``; band j holds
    ``round(n_c * sin(theta_j))`` equally spaced azimuths, at least one.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
    if dim == 1:
        return SpherePattern(1, int(n_c), np.array([[-1.0], [1.0]]))
    if int(n_c) != n_c or n_c < 3:
        raise ValueError(f"n_c must be an integer >= 3, got {n_c}")
    n_c = int(n_c)
    if dim == 2:
        a = 2.0 * math.pi * np.arange(n_c) / n_c
        return SpherePattern(2, n_c, np.stack([np.cos(a), np.sin(a)], axis=1))
    m = -(-n_c // 2)
    dirs = []
    for j in range(m + 1):
        theta = j * math.pi / m
        if j == 0 or j == m:
            dirs.append((0.0, 0.0, 1.0 if j == 0 else -1.0))
            continue
        # half-up rounding; Python's round() would send 6.5 to 6
        k = max(1, int(math.floor(n_c * math.sin(theta) + 0.5)))
        for i in range(k):
            phi = 2.0 * math.pi * i / k
            st = math.sin(theta)
            dirs.append((st * math.cos(phi), st * math.sin(phi), math.cos(theta)))
    return SpherePattern(3, n_c, np.array(dirs))


def expand(p, radius: float, pattern: SpherePattern, rot=None) -> np.ndarray:
    """Candidates ``p + radius * rot @ u`` for every pattern direction u."""
    p = np.asarray(p, dtype=np.float64)
    dirs = pattern.dirs if rot is None else pattern.dirs @ np.asarray(rot, dtype=np.float64).T
    return p[None, :] + radius * dirs


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random rotation: a uniform angle in 2-D, a uniform unit
    quaternion in 3-D, the identity in 1-D."""
    if dim == 1:
        return np.eye(1)
    if dim == 2:
        a = rng.uniform(0.0, 2.0 * math.pi)
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, -s], [s, c]])
    if dim != 3:
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
    w, x, y, z = rng.standard_normal(4)
    n = math.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
