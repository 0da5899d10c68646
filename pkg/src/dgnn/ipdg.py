"""Interior-penalty DG solver for Poisson problems on triangulations.

Independent reference solver: assembles the bilinear form

    A(u, v) = sum_E (grad u, grad v)_E
            - sum_e <{n.grad u}, [v]> + eps sum_e <{n.grad v}, [u]>
            + sum_e sigma0/h_e ([u], [v]) + sum_e_int sigma1 h_e ([n.grad u], [n.grad v])

with Dirichlet data entering the right-hand side, and solves the dense
system directly. eps = -1 gives the symmetric variant. Solutions evaluate
anywhere inside the mesh through per-element polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dgnn.basis import TestBasis, build_basis
from dgnn.mesh import Mesh2D, build_affine
from dgnn.quadrature import QuadRule, gauss_legendre_1d, triangle_rule

__all__ = ["IpdgConfig", "DgSolution", "assemble", "solve", "evaluate",
           "solve_poisson", "l2_error"]


@dataclass(frozen=True)
class IpdgConfig:
    degree: int = 1
    epsilon: int = -1  # -1 symmetric, 0 incomplete, +1 non-symmetric
    sigma0: float | None = None  # defaults to 10 k^2
    sigma1: float = 0.1

    def __post_init__(self):
        if self.epsilon not in (-1, 0, 1):
            raise ValueError("epsilon must be -1, 0, or +1")
        if self.sigma1 < 0:
            raise ValueError("gradient-jump penalty must be nonnegative")
        s0 = self.penalty0
        if self.epsilon == -1 and s0 < 10 * self.degree**2:
            raise ValueError(
                f"sigma0={s0} too small for coercivity at k={self.degree}; "
                f"need at least {10 * self.degree**2}")
        if s0 <= 0:
            raise ValueError("sigma0 must be positive")

    @property
    def penalty0(self) -> float:
        return 10.0 * self.degree**2 if self.sigma0 is None else self.sigma0


@dataclass
class DgSolution:
    coefficients: np.ndarray  # (N * M,)
    mesh: Mesh2D
    basis: TestBasis

    @property
    def n_basis(self) -> int:
        return self.basis.n_basis

    def element_coefficients(self, i: int) -> np.ndarray:
        m = self.n_basis
        return self.coefficients[i * m:(i + 1) * m]


def _default_rule(k: int) -> QuadRule:
    # 2k suffices for the stiffness term; the +2 over-integrates the load,
    # which matters for non-polynomial sources
    for n in (3, 6, 12, 16, 25):
        rule = triangle_rule(n)
        if rule.exact_degree >= 2 * k + 2:
            return rule
    return triangle_rule(25)


def assemble(mesh: Mesh2D, basis: TestBasis, config: IpdgConfig,
             f, g, volume_rule: QuadRule | None = None,
             n_edge: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Global matrix and load vector; A is (N*M) square, symmetric for eps=-1."""
    if not mesh.edges:
        raise ValueError("mesh edges not classified")
    k = basis.degree
    rule = _default_rule(k) if volume_rule is None else volume_rule
    if rule.exact_degree < 2 * k:
        raise ValueError(
            f"volume rule degree {rule.exact_degree} insufficient for 2k={2 * k}")
    n_edge = (k + 2) if n_edge is None else n_edge
    edge_gl = gauss_legendre_1d(n_edge)

    n = mesh.n_elements
    m = basis.n_basis
    ndof = n * m
    A = np.zeros((ndof, ndof))
    F = np.zeros(ndof)

    vol_vals, vol_grads_ref = basis.evaluate(rule.points)
    maps = [build_affine(mesh.triangle_vertices(i)) for i in range(n)]
    for i in range(n):
        amap = maps[i]
        if abs(amap.det) < 1e-14:
            raise ValueError(f"singular element {i}")
        vw = abs(amap.det) * rule.weights
        gphys = np.einsum("de,mpe->mpd", amap.inv_transpose, vol_grads_ref)
        K = np.einsum("p,mpd,npd->mn", vw, gphys, gphys)
        sl = slice(i * m, (i + 1) * m)
        A[sl, sl] += K
        fx = f(amap.apply(rule.points))
        F[sl] += np.einsum("p,mp->m", vw * fx, vol_vals)

    s0 = config.penalty0
    eps = float(config.epsilon)
    for edge in mesh.edges:
        va, vb = mesh.vertices[list(edge.vertices)]
        pts = va[None, :] + edge_gl.points[:, None] * (vb - va)[None, :]
        ew = edge_gl.weights * edge.length
        nvec = edge.normal
        sides = [edge.left_element]
        jumps = [1.0]
        if edge.right_element is not None:
            sides.append(edge.right_element)
            jumps.append(-1.0)
        vals, dn = [], []
        for el in sides:
            ref = maps[el].pull_back(pts)
            v, gr = basis.evaluate(ref)
            gphys = np.einsum("de,mpe->mpd", maps[el].inv_transpose, gr)
            vals.append(v)
            dn.append(np.einsum("mpd,d->mp", gphys, nvec))
        interior = edge.right_element is not None
        avg = 0.5 if interior else 1.0
        for su, el_u in enumerate(sides):
            for sv, el_v in enumerate(sides):
                slu = slice(el_u * m, (el_u + 1) * m)
                slv = slice(el_v * m, (el_v + 1) * m)
                # -<{n.grad u}, [v]> + eps <{n.grad v}, [u]> + s0/h [u][v]
                block = (-avg * jumps[sv] * np.einsum("p,up,vp->vu", ew, dn[su], vals[sv])
                         + eps * avg * jumps[su] * np.einsum("p,up,vp->vu", ew,
                                                             vals[su], dn[sv])
                         + (s0 / edge.length) * jumps[su] * jumps[sv]
                         * np.einsum("p,up,vp->vu", ew, vals[su], vals[sv]))
                if interior and config.sigma1 > 0:
                    block += (config.sigma1 * edge.length * jumps[su] * jumps[sv]
                              * np.einsum("p,up,vp->vu", ew, dn[su], dn[sv]))
                A[slv, slu] += block
        if not interior:
            gx = g(pts)
            slv = slice(sides[0] * m, (sides[0] + 1) * m)
            F[slv] += eps * np.einsum("p,vp->v", ew * gx, dn[0])
            F[slv] += (s0 / edge.length) * np.einsum("p,vp->v", ew * gx, vals[0])
    return A, F


def solve(A: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Dense LU solve with a residual guard; reports conditioning on failure."""
    try:
        U = np.linalg.solve(A, F)
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            f"singular system (cond ~ {np.linalg.cond(A):.2e})") from err
    scale = max(np.linalg.norm(F), 1e-300)
    residual = np.linalg.norm(A @ U - F) / scale
    if residual > 1e-10:
        raise np.linalg.LinAlgError(
            f"ill-conditioned solve: relative residual {residual:.2e}, "
            f"cond ~ {np.linalg.cond(A):.2e}")
    return U


def solve_poisson(mesh: Mesh2D, config: IpdgConfig, f, g) -> DgSolution:
    basis = build_basis(2, config.degree, _default_rule(config.degree))
    A, F = assemble(mesh, basis, config, f, g)
    return DgSolution(solve(A, F), mesh, basis)


def _barycentric(mesh: Mesh2D, tri_idx: int, points: np.ndarray) -> np.ndarray:
    v = mesh.triangle_vertices(tri_idx)
    T = np.column_stack([v[1] - v[0], v[2] - v[0]])
    lam12 = np.linalg.solve(T, (points - v[0]).T).T
    lam0 = 1.0 - lam12.sum(axis=1)
    return np.column_stack([lam0, lam12])


def locate_points(mesh: Mesh2D, points: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Containing-element index per point; -1 where outside every element."""
    points = np.atleast_2d(points)
    owner = np.full(len(points), -1, dtype=int)
    for i in range(mesh.n_elements):
        undecided = owner < 0
        if not np.any(undecided):
            break
        lam = _barycentric(mesh, i, points[undecided])
        inside = np.all(lam >= -tol, axis=1)
        idx = np.flatnonzero(undecided)[inside]
        owner[idx] = i
    return owner


def evaluate(solution: DgSolution, points: np.ndarray) -> np.ndarray:
    """Per-point value from the containing element's polynomial."""
    points = np.atleast_2d(points)
    owner = locate_points(solution.mesh, points)
    if np.any(owner < 0):
        missing = points[owner < 0][:3]
        raise ValueError(f"points outside the mesh, e.g. {missing.tolist()}")
    out = np.empty(len(points))
    m = solution.n_basis
    maps = {}
    for i in np.unique(owner):
        sel = owner == i
        if i not in maps:
            maps[i] = build_affine(solution.mesh.triangle_vertices(i))
        ref = maps[i].pull_back(points[sel])
        vals, _ = solution.basis.evaluate(ref)
        out[sel] = vals.T @ solution.element_coefficients(i)
    return out


def l2_error(solution: DgSolution, exact, rule: QuadRule | None = None) -> float:
    """Quadrature L2 distance between the DG field and a reference callable."""
    rule = triangle_rule(25) if rule is None else rule
    total = 0.0
    vals_ref, _ = solution.basis.evaluate(rule.points)
    for i in range(solution.mesh.n_elements):
        amap = build_affine(solution.mesh.triangle_vertices(i))
        phys = amap.apply(rule.points)
        uh = vals_ref.T @ solution.element_coefficients(i)
        diff = uh - exact(phys)
        total += abs(amap.det) * np.sum(rule.weights * diff * diff)
    return float(np.sqrt(total))
