"""Precomputed assembly data for the weak-form objective.

One cache per (mesh, test degree, quadrature sizes, problem) holds every
array the loss needs: per-element physical quadrature points and weights,
test value/gradient tables pushed to physical coordinates, paired edge
traces with shared physical points, and the time collocation grid.

Element point blocks are laid out as [volume points | edge points], edges in
local order with their points stored in the CANONICAL orientation of each
edge (low vertex index first). Both elements sharing an edge therefore hold
bit-identical physical points at matching slots, which is what makes jump
terms exact zeros for continuous fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from dgnn.basis import TestBasis, build_basis
from dgnn.mesh import DIRICHLET, INTERIOR, PERIODIC, Mesh1D, Mesh2D, build_affine
from dgnn.quadrature import gauss_legendre_1d, triangle_rule

__all__ = ["PdeCoefficients", "EdgeBlock", "AssemblyCache", "build_cache"]


@dataclass(frozen=True)
class PdeCoefficients:
    """Coefficients of u_t + div F(u) = div(D grad u) + f with Dirichlet data g."""

    diffusion: float = 1.0
    convection: str = "none"  # none | linear | burgers
    convection_velocity: tuple[float, ...] = (1.0,)
    source: Callable | None = None
    dirichlet: Callable | None = None
    initial: Callable | None = None
    time_horizon: float = 0.0

    @property
    def time_dependent(self) -> bool:
        return self.time_horizon > 0.0

    def flux(self, u: np.ndarray, ds: int) -> np.ndarray:
        """Convective flux F(u), shape u.shape + (ds,)."""
        out = np.zeros(u.shape + (ds,))
        if self.convection == "none":
            return out
        if self.convection == "linear":
            for d in range(ds):
                out[..., d] = self.convection_velocity[d] * u
            return out
        if self.convection == "burgers":
            if ds != 1:
                raise ValueError("burgers flux is one-dimensional")
            out[..., 0] = 0.5 * u * u
            return out
        raise ValueError(f"unknown convection kind {self.convection!r}")

    def flux_derivative(self, u: np.ndarray, ds: int) -> np.ndarray:
        """dF/du, shape u.shape + (ds,)."""
        out = np.zeros(u.shape + (ds,))
        if self.convection == "none":
            return out
        if self.convection == "linear":
            for d in range(ds):
                out[..., d] = self.convection_velocity[d]
            return out
        if self.convection == "burgers":
            out[..., 0] = u
            return out
        raise ValueError(f"unknown convection kind {self.convection!r}")


@dataclass
class EdgeBlock:
    """Index/trace data for one class of edges, vectorized over edges."""

    elem: np.ndarray  # (n_sides, E) element index per side
    pt_idx: np.ndarray  # (n_sides, E, J) slot indices into the element block
    normal: np.ndarray  # (E, ds), outward from side 0
    ew: np.ndarray  # (E, J) physical weights, rows sum to edge length
    test_vals: np.ndarray  # (n_sides, E, M, J) test values seen from each side
    g_vals: np.ndarray | None = None  # (E, J) Dirichlet data, boundary blocks only

    @property
    def n_edges(self) -> int:
        return self.elem.shape[1]


@dataclass
class AssemblyCache:
    mesh: object
    ds: int  # spatial dimension
    basis: TestBasis
    points: np.ndarray  # (N, P, ds) physical block points
    n_volume: int
    vw: np.ndarray  # (N, Q) volume weights; rows sum to |E|
    vol_vals: np.ndarray  # (M, Q) reference test values at volume points
    vol_grads: np.ndarray  # (N, M, Q, ds) physical test gradients
    interior: EdgeBlock | None
    dirichlet: EdgeBlock | None
    periodic: EdgeBlock | None
    time_nodes: np.ndarray | None = None  # (T,) or None for stationary
    time_weights: np.ndarray | None = None  # trapezoid weights over [0, T]
    f_vals: np.ndarray = field(default=None)  # (N, Q, T)
    u0_vals: np.ndarray | None = None  # (N, Q), time-dependent problems
    d_vol: np.ndarray = field(default=None)  # (N, Q) diffusion at volume points

    @property
    def n_elements(self) -> int:
        return self.points.shape[0]

    @property
    def n_block(self) -> int:
        return self.points.shape[1]

    @property
    def n_time(self) -> int:
        return 1 if self.time_nodes is None else len(self.time_nodes)

    def net_points(self) -> np.ndarray:
        """Points as consumed by the trial networks: (N, P*T, din)."""
        if self.time_nodes is None:
            return self.points
        n, p, ds = self.points.shape
        t = self.time_nodes
        xt = np.empty((n, p, len(t), ds + 1))
        xt[..., :ds] = self.points[:, :, None, :]
        xt[..., ds] = t[None, None, :]
        return xt.reshape(n, p * len(t), ds + 1)

    def split_time(self, flat: np.ndarray) -> np.ndarray:
        """(N, P*T, ...) -> (N, P, T, ...) matching net_points layout."""
        n, p = self.points.shape[:2]
        return flat.reshape((n, p, self.n_time) + flat.shape[2:])

    def edge_blocks(self):
        for block in (self.interior, self.periodic, self.dirichlet):
            if block is not None and block.n_edges:
                yield block


def _eval_source(coeffs: PdeCoefficients, x: np.ndarray,
                 t_nodes: np.ndarray | None) -> np.ndarray:
    n, q, ds = x.shape
    T = 1 if t_nodes is None else len(t_nodes)
    out = np.zeros((n, q, T))
    if coeffs.source is None:
        return out
    xs = x[..., 0] if ds == 1 else x
    if t_nodes is None:
        out[..., 0] = coeffs.source(xs)
    else:
        for j, t in enumerate(t_nodes):
            out[..., j] = coeffs.source(xs, t)
    return out


def _eval_scalar_field(value, x: np.ndarray) -> np.ndarray:
    if callable(value):
        xs = x[..., 0] if x.shape[-1] == 1 else x
        return np.asarray(value(xs), dtype=float)
    return np.full(x.shape[:-1], float(value))


def _time_grid(coeffs: PdeCoefficients, n_time: int):
    if not coeffs.time_dependent:
        return None, np.array([1.0])
    if n_time < 2:
        raise ValueError("time-dependent problems need at least 2 time nodes")
    t = np.linspace(0.0, coeffs.time_horizon, n_time)
    w = np.full(n_time, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return t, w


def _build_cache_1d(mesh: Mesh1D, k: int, n_volume: int, coeffs: PdeCoefficients,
                    n_time: int) -> AssemblyCache:
    rule = gauss_legendre_1d(n_volume)
    basis = build_basis(1, k, rule)
    n = mesh.n_elements
    q = rule.n
    p = q + 2  # volume points plus the two endpoint traces

    nodes = mesh.nodes
    h = np.diff(nodes)
    pts = np.empty((n, p, 1))
    pts[:, :q, 0] = nodes[:-1, None] + rule.points[None, :] * h[:, None]
    pts[:, q, 0] = nodes[:-1]  # left endpoint slot
    pts[:, q + 1, 0] = nodes[1:]  # right endpoint slot
    vw = rule.weights[None, :] * h[:, None]

    vol_grads = basis.gradients[None, :, :, :] / h[:, None, None, None]

    v_left, _ = basis.evaluate(np.array([[0.0]]))
    v_right, _ = basis.evaluate(np.array([[1.0]]))
    # test values at the endpoint slots, shaped (M, J=1)
    v_end = {0: v_left, 1: v_right}

    def side_table(slot_kind):
        return v_end[slot_kind][:, :]

    interior_rows = []
    periodic_rows = []
    dirichlet_rows = []
    for x_left, x_right, el, er, kind in mesh.interfaces():
        if kind == INTERIOR:
            interior_rows.append((el, q + 1, er, q))
        elif kind == PERIODIC:
            periodic_rows.append((el, q + 1, er, q))
        else:
            slot = q if x_left == nodes[0] else q + 1
            normal = -1.0 if slot == q else 1.0
            dirichlet_rows.append((el, slot, normal))

    def pair_block(rows):
        if not rows:
            return None
        e = len(rows)
        elem = np.array([[r[0] for r in rows], [r[2] for r in rows]])
        pt_idx = np.array([[[r[1]] for r in rows], [[r[3]] for r in rows]])
        normal = np.ones((e, 1))
        ew = np.ones((e, 1))
        tv = np.empty((2, e, basis.n_basis, 1))
        for idx, r in enumerate(rows):
            tv[0, idx] = side_table(1 if r[1] == q + 1 else 0)
            tv[1, idx] = side_table(1 if r[3] == q + 1 else 0)
        return EdgeBlock(elem, pt_idx, normal, ew, tv)

    interior = pair_block(interior_rows)
    periodic = pair_block(periodic_rows)

    dirichlet = None
    if dirichlet_rows:
        e = len(dirichlet_rows)
        elem = np.array([[r[0] for r in dirichlet_rows]])
        pt_idx = np.array([[[r[1]] for r in dirichlet_rows]])
        normal = np.array([[r[2]] for r in dirichlet_rows])
        ew = np.ones((e, 1))
        tv = np.empty((1, e, basis.n_basis, 1))
        for idx, r in enumerate(dirichlet_rows):
            tv[0, idx] = side_table(1 if r[1] == q + 1 else 0)
        gv = np.zeros((e, 1))
        if coeffs.dirichlet is not None:
            for idx, r in enumerate(dirichlet_rows):
                gv[idx, 0] = coeffs.dirichlet(pts[r[0], r[1], 0])
        dirichlet = EdgeBlock(elem, pt_idx, normal, ew, tv, gv)

    t_nodes, t_weights = _time_grid(coeffs, n_time)
    xvol = pts[:, :q, :]
    cache = AssemblyCache(
        mesh=mesh, ds=1, basis=basis, points=pts, n_volume=q, vw=vw,
        vol_vals=basis.values, vol_grads=vol_grads,
        interior=interior, dirichlet=dirichlet, periodic=periodic,
        time_nodes=t_nodes, time_weights=t_weights,
        f_vals=_eval_source(coeffs, xvol, t_nodes),
        u0_vals=(None if coeffs.initial is None
                 else np.asarray(coeffs.initial(xvol[..., 0]), dtype=float)),
        d_vol=_eval_scalar_field(coeffs.diffusion, xvol),
    )
    return cache


_REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _ref_edge_points(local_edge: int, flipped: bool, s: np.ndarray) -> np.ndarray:
    sigma = 1.0 - s if flipped else s
    a = _REF_VERTS[local_edge]
    b = _REF_VERTS[(local_edge + 1) % 3]
    return a[None, :] + sigma[:, None] * (b - a)[None, :]


def _build_cache_2d(mesh: Mesh2D, k: int, n_volume: int, n_edge: int,
                    coeffs: PdeCoefficients, n_time: int) -> AssemblyCache:
    if not mesh.edges:
        raise ValueError("mesh edges not classified")
    rule = triangle_rule(n_volume)
    basis = build_basis(2, k, rule)
    edge_gl = gauss_legendre_1d(n_edge)
    s, ws = edge_gl.points, edge_gl.weights
    n = mesh.n_elements
    q = rule.n
    J = edge_gl.n
    p = q + 3 * J

    # test values at edge points for each (local edge, flipped) combination
    edge_tables = {}
    for le in range(3):
        for flip in (False, True):
            vals, _ = basis.evaluate(_ref_edge_points(le, flip, s))
            edge_tables[(le, flip)] = vals  # (M, J)

    pts = np.empty((n, p, 2))
    vw = np.empty((n, q))
    vol_grads = np.empty((n, basis.n_basis, q, 2))
    local_info = {}  # (elem, canonical pair) -> (local edge, flipped)
    for i, tri in enumerate(mesh.triangles):
        amap = build_affine(mesh.vertices[tri])
        pts[i, :q] = amap.apply(rule.points)
        vw[i] = abs(amap.det) * rule.weights
        vol_grads[i] = np.einsum("de,mpe->mpd", amap.inv_transpose, basis.gradients)
        for le in range(3):
            g0, g1 = int(tri[le]), int(tri[(le + 1) % 3])
            a, b = (g0, g1) if g0 < g1 else (g1, g0)
            flipped = g0 > g1
            local_info[(i, (a, b))] = (le, flipped)
            va, vb = mesh.vertices[a], mesh.vertices[b]
            # canonical-order points: both adjacent elements compute the
            # identical floats here, so paired traces coincide exactly
            pts[i, q + le * J:q + (le + 1) * J] = va[None, :] + s[:, None] * (vb - va)

    def block_for(kind):
        rows = [e for e in mesh.edges if e.kind == kind]
        if not rows:
            return None
        e_count = len(rows)
        n_sides = 2 if kind == INTERIOR else 1
        elem = np.empty((n_sides, e_count), dtype=int)
        pt_idx = np.empty((n_sides, e_count, J), dtype=int)
        tv = np.empty((n_sides, e_count, basis.n_basis, J))
        normal = np.empty((e_count, 2))
        ew = np.empty((e_count, J))
        gv = np.zeros((e_count, J)) if kind == DIRICHLET else None
        for r, edge in enumerate(rows):
            normal[r] = edge.normal
            ew[r] = ws * edge.length
            sides = [edge.left_element] + (
                [edge.right_element] if n_sides == 2 else [])
            for sidx, el in enumerate(sides):
                le, flip = local_info[(el, edge.vertices)]
                elem[sidx, r] = el
                pt_idx[sidx, r] = q + le * J + np.arange(J)
                tv[sidx, r] = edge_tables[(le, flip)]
            if gv is not None and coeffs.dirichlet is not None:
                epts = pts[elem[0, r], pt_idx[0, r]]
                gv[r] = coeffs.dirichlet(epts)
        return EdgeBlock(elem, pt_idx, normal, ew, tv, gv)

    t_nodes, t_weights = _time_grid(coeffs, n_time)
    xvol = pts[:, :q, :]
    return AssemblyCache(
        mesh=mesh, ds=2, basis=basis, points=pts, n_volume=q, vw=vw,
        vol_vals=basis.values, vol_grads=vol_grads,
        interior=block_for(INTERIOR), dirichlet=block_for(DIRICHLET),
        periodic=None,
        time_nodes=t_nodes, time_weights=t_weights,
        f_vals=_eval_source(coeffs, xvol, t_nodes),
        u0_vals=(None if coeffs.initial is None
                 else np.asarray(coeffs.initial(xvol), dtype=float)),
        d_vol=_eval_scalar_field(coeffs.diffusion, xvol),
    )


def build_cache(mesh, k: int, n_volume: int, coeffs: PdeCoefficients,
                n_edge: int = 0, n_time: int = 1) -> AssemblyCache:
    """Assemble all loss-side tables for a mesh/basis/rule combination."""
    if isinstance(mesh, Mesh1D):
        return _build_cache_1d(mesh, k, n_volume, coeffs, n_time)
    if isinstance(mesh, Mesh2D):
        if n_edge < 1:
            raise ValueError("2D caches need an edge rule size")
        return _build_cache_2d(mesh, k, n_volume, n_edge, coeffs, n_time)
    raise TypeError(f"unsupported mesh type {type(mesh)!r}")
