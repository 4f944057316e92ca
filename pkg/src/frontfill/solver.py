"""RBF-FD Poisson solver with Dirichlet conditions, used to validate nodes.

Weights come from cubic polyharmonic splines augmented with all monomials
of degree <= 2, computed in coordinates translated to the stencil centre.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fill import FillConfig, fill_parallel, fill_sequential, scale_spacing_for_target
from .geometry import Domain, boundary_sample_2d, clover2d
from .index import StaticIndex
from .spacing import Preset, SpacingFn

__all__ = [
    "SolverError",
    "Discretization",
    "build_stencils",
    "monomial_exponents",
    "laplacian_weights",
    "laplacian_weights_batch",
    "exactness_residual",
    "discretize",
    "solve_poisson_dirichlet",
    "error_norms",
    "manufactured_solution",
    "ManufacturedResult",
    "run_manufactured",
    "convergence_order",
]

PHS_POWER = 3
DEFAULT_STENCIL = 15


class SolverError(RuntimeError):
    """Singular local system or failed global solve."""


def monomial_exponents(dim: int, degree: int = 2) -> np.ndarray:
    """Exponent rows ordered by degree, e.g. 1, x, y, x^2, xy, y^2 in 2-D."""
    rows = []
    for deg in range(degree + 1):
        for combo in combinations_with_replacement(range(dim), deg):
            e = [0] * dim
            for c in combo:
                e[c] += 1
            rows.append(e)
    return np.array(rows, dtype=np.int64)


def _laplacian_of_monomials(exps: np.ndarray) -> np.ndarray:
    """Laplacian of each monomial evaluated at the origin."""
    out = np.zeros(len(exps))
    for i, e in enumerate(exps):
        if e.sum() == 2 and e.max() == 2:
            out[i] = 2.0
    return out


def _phs_laplacian(r: np.ndarray, dim: int) -> np.ndarray:
    # Laplacian of r^k in d dimensions: k (k + d - 2) r^(k - 2)
    k = PHS_POWER
    return k * (k + dim - 2) * r ** (k - 2)


def build_stencils(nodes, n: int, rows=None) -> np.ndarray:
    """Indices of the n nearest nodes (self included) for each row node."""
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    if n > len(nodes):
        raise ValueError(f"stencil size {n} exceeds the {len(nodes)} available nodes")
    if n < 1:
        raise ValueError(f"stencil size must be positive, got {n}")
    centres = nodes if rows is None else nodes[np.asarray(rows)]
    idx, _ = StaticIndex(nodes).knn_many(centres, n)
    return idx


def _saddle_systems(local: np.ndarray, exps: np.ndarray):
    """Stacked saddle matrices and right-hand sides for translated stencils."""
    m_count, n, dim = local.shape
    q = len(exps)
    r = np.linalg.norm(local[:, :, None, :] - local[:, None, :, :], axis=-1)
    P = np.prod(local[:, :, None, :] ** exps[None, None, :, :], axis=-1)
    A = np.zeros((m_count, n + q, n + q))
    A[:, :n, :n] = r**PHS_POWER
    A[:, :n, n:] = P
    A[:, n:, :n] = np.transpose(P, (0, 2, 1))
    rhs = np.zeros((m_count, n + q))
    rhs[:, :n] = _phs_laplacian(np.linalg.norm(local, axis=-1), dim)
    rhs[:, n:] = _laplacian_of_monomials(exps)
    return A, rhs, P


def laplacian_weights_batch(nodes, stencils, centres=None, degree: int = 2) -> np.ndarray:
    """Laplacian weights for many stencils at once; returns (M, n)."""
    nodes = np.asarray(nodes, dtype=np.float64)
    stencils = np.asarray(stencils, dtype=np.int64)
    if centres is None:
        centres = nodes[stencils[:, 0]]
    dim = nodes.shape[1]
    exps = monomial_exponents(dim, degree)
    n = stencils.shape[1]
    if n < len(exps):
        raise SolverError(f"stencil size {n} is below the {len(exps)} monomials of degree <= {degree}")
    local = nodes[stencils] - np.asarray(centres, dtype=np.float64)[:, None, :]
    out = np.empty(stencils.shape)
    # bounded batches keep the (M, n+q, n+q) stack small
    for a in range(0, len(stencils), 2048):
        b = min(len(stencils), a + 2048)
        A, rhs, P = _saddle_systems(local[a:b], exps)
        try:
            sol = np.linalg.solve(A, rhs[..., None])[..., 0]
            # one step of iterative refinement
            res = rhs - np.einsum("mij,mj->mi", A, sol)
            sol += np.linalg.solve(A, res[..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise SolverError("singular local RBF-FD system (degenerate stencil)") from None
        if not np.all(np.isfinite(sol)):
            raise SolverError("non-finite RBF-FD weights (degenerate stencil)")
        out[a:b] = sol[:, :n]
        # rank-deficient P shows up as failed polynomial reproduction
        resid = np.abs(np.einsum("mi,miq->mq", sol[:, :n], P) - rhs[:, n:]).max(axis=1)
        scale = np.abs(sol[:, :n]).sum(axis=1) * np.abs(P).max(axis=(1, 2)) + 1.0
        bad = resid > 1e-6 * scale
        if bad.any():
            raise SolverError(f"ill-conditioned stencil around node {int(stencils[a + np.argmax(bad), 0])}")
    return out


def laplacian_weights(stencil_points, center, degree: int = 2) -> np.ndarray:
    pts = np.asarray(stencil_points, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64)
    return laplacian_weights_batch(pts, np.arange(len(pts))[None, :], c[None, :], degree)[0]


def exactness_residual(nodes, stencils, weights, degree: int = 2) -> np.ndarray:
    """Per stencil, max over monomials m of |sum w_i m(x_i) - Lap m(centre)|,
    in coordinates translated to the centre."""
    nodes = np.asarray(nodes, dtype=np.float64)
    exps = monomial_exponents(nodes.shape[1], degree)
    local = nodes[stencils] - nodes[stencils[:, 0]][:, None, :]
    P = np.prod(local[:, :, None, :] ** exps[None, None, :, :], axis=-1)
    return np.abs(np.einsum("mi,miq->mq", weights, P) - _laplacian_of_monomials(exps)).max(axis=1)


@dataclass
class Discretization:
    """Interior nodes first, then boundary nodes; stencils index that order."""

    interior: np.ndarray
    boundary: np.ndarray
    stencils: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return np.vstack([self.interior, self.boundary])

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def __len__(self) -> int:
        return len(self.interior) + len(self.boundary)


def discretize(interior, boundary, n: int = DEFAULT_STENCIL) -> Discretization:
    interior = np.asarray(interior, dtype=np.float64)
    boundary = np.asarray(boundary, dtype=np.float64)
    dim = interior.shape[1]
    if n < len(monomial_exponents(dim)):
        raise SolverError(f"stencil size {n} too small for degree-2 augmentation in {dim}-D")
    if len(boundary) == 0:
        raise SolverError("at least one boundary node is required")
    nodes = np.vstack([interior, boundary])
    st = build_stencils(nodes, n, rows=np.arange(len(interior)))
    # knn returns the centre first unless another node coincides with it
    if not np.all(st[:, 0] == np.arange(len(interior))):
        raise SolverError("coincident nodes in the discretization")
    w = laplacian_weights_batch(nodes, st)
    return Discretization(interior, boundary, st, w)


def solve_poisson_dirichlet(disc: Discretization, f: Callable, g: Callable, rtol: float = 1e-10) -> np.ndarray:
    """Solve Lap u = f inside and u = g on the boundary nodes."""
    nodes = disc.nodes
    ni = disc.n_interior
    nb = len(disc.boundary)
    N = ni + nb
    rows = np.concatenate([np.repeat(np.arange(ni), disc.stencils.shape[1]), np.arange(ni, N)])
    cols = np.concatenate([disc.stencils.ravel(), np.arange(ni, N)])
    vals = np.concatenate([disc.weights.ravel(), np.ones(nb)])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    b = np.concatenate([np.asarray(f(disc.interior), dtype=np.float64), np.asarray(g(disc.boundary), dtype=np.float64)])
    u = spla.spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(u)):
        raise SolverError("global system is singular")
    rel = np.linalg.norm(A @ u - b) / max(np.linalg.norm(b), 1e-300)
    if rel > rtol:
        # one refinement sweep before giving up
        u = u + spla.spsolve(A.tocsc(), b - A @ u)
        rel = np.linalg.norm(A @ u - b) / max(np.linalg.norm(b), 1e-300)
        if rel > rtol:
            raise SolverError(f"linear solve reached relative residual {rel:.3e} > {rtol:.1e}")
    return u


def error_norms(u_h, exact, probes=None) -> tuple[float, float]:
    """Relative discrete (e_1, e_inf); ``exact`` is an array of reference
    values or a callable evaluated at ``probes``."""
    u_h = np.asarray(u_h, dtype=np.float64)
    u = np.asarray(exact(probes) if callable(exact) else exact, dtype=np.float64)
    if u.shape != u_h.shape:
        raise ValueError(f"shape mismatch: {u_h.shape} vs {u.shape}")
    n1 = np.abs(u).sum()
    ninf = np.abs(u).max() if u.size else 0.0
    if n1 == 0.0 or ninf == 0.0:
        raise ValueError("exact solution is identically zero; relative norms undefined")
    diff = np.abs(u_h - u)
    return float(diff.sum() / n1), float(diff.max() / ninf)


def manufactured_solution():
    """(u, f) with u = sin(pi x/3) sin(pi y/3) and f = Lap u."""

    def u(p):
        p = np.atleast_2d(p)
        return np.sin(math.pi * p[:, 0] / 3.0) * np.sin(math.pi * p[:, 1] / 3.0)

    def f(p):
        return -2.0 / 9.0 * math.pi**2 * u(p)

    return u, f


@dataclass
class ManufacturedResult:
    n_nodes: int
    n_interior: int
    n_boundary: int
    e1: float
    e_inf: float
    max_exactness_residual: float
    boundary_max_error: float


def run_manufactured(
    target_np: int,
    stencil: int = DEFAULT_STENCIL,
    domain: Domain | None = None,
    spacing: SpacingFn | None = None,
    threads: int = 1,
    parallel: bool = False,
    rng_seed: int = 0,
    n_c: int = 12,
) -> ManufacturedResult:
    """Generate boundary and interior nodes for about ``target_np`` nodes and
    solve the manufactured Dirichlet problem on them."""
    domain = domain or clover2d()
    if domain.dim != 2:
        raise SolverError("the validation problem is 2-D only")
    base = spacing or Preset("clover2d")
    h = scale_spacing_for_target(domain, base, target_np, n_c=n_c)
    boundary = boundary_sample_2d(domain, h)
    seed = _interior_seed(domain)
    if parallel:
        cfg = FillConfig(n_c=n_c, threads=threads, rng_seed=rng_seed, target_np=target_np)
        ps = fill_parallel(domain, h, [seed], cfg, fixed=boundary)
    else:
        ps = fill_sequential(domain, h, [seed], n_c=n_c, rng_seed=rng_seed, max_points=8 * target_np, fixed=boundary)
    disc = discretize(ps.points, boundary, stencil)
    u, f = manufactured_solution()
    uh = solve_poisson_dirichlet(disc, f, u)
    e1, einf = error_norms(uh, u, disc.nodes)
    resid = exactness_residual(disc.nodes, disc.stencils, disc.weights)
    bmax = float(np.abs(uh[disc.n_interior :] - u(disc.boundary)).max())
    return ManufacturedResult(len(disc), disc.n_interior, len(boundary), e1, einf, float(resid.max()), bmax)


def _interior_seed(domain: Domain) -> np.ndarray:
    from .geometry import interior_point

    return interior_point(domain)


def convergence_order(n_nodes, errors, dim: int = 2) -> float:
    """Least-squares order p in err ~ h^p with h ~ N^(-1/dim)."""
    x = -np.log(np.asarray(n_nodes, dtype=np.float64)) / dim
    y = np.log(np.asarray(errors, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])
