"""Weak-form training objective with numerical-flux edge coupling.

Per element and time node, the residual against each test function is

    |E| sum_q w_q [u_t p + D grad(u).grad(p) - grad(p).F(u) - f p]
  - |dE| sum_j w_j qhat p

where qhat is the single-valued replacement of (D grad(u) - F(u)).n on each
edge: the average of the two side fluxes minus the value jump. Boundary data
enters through a mirrored ghost state (u_out = 2g - u_in, grad copied) so
the hatted average of u equals g and the residual vanishes at the exact
solution. The total objective adds jump penalties over all edges and the
initial-condition mismatch, with configurable weights and top-K selection of
element losses for the backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dgnn.assembly import AssemblyCache, EdgeBlock, PdeCoefficients
from dgnn.network import PiecewiseNet, forward, input_gradient, parameter_gradient

__all__ = [
    "LossBreakdown",
    "flux_trace",
    "dirichlet_ghost",
    "weak_residuals",
    "element_residual",
    "penalty_loss",
    "initial_loss",
    "total_loss",
    "loss_cotangents",
    "evaluate_field",
    "net_field",
    "loss_and_gradient",
]


@dataclass(frozen=True)
class LossBreakdown:
    """All loss parts; total recombines exactly from the stored pieces."""

    element_losses: np.ndarray  # (N,)
    penalty: float
    initial: float
    sigma: tuple[float, float, float]
    selected: np.ndarray  # indices of the top-K element losses
    periodic_penalty: float = 0.0  # portion of the penalty from periodic pairings

    @property
    def equation(self) -> float:
        return float(np.sum(self.element_losses[self.selected]))

    @property
    def total(self) -> float:
        s0, s1, s2 = self.sigma
        return s0 * self.equation + s1 * self.initial + s2 * self.penalty

    @property
    def argmax_element(self) -> int:
        return int(np.argmax(self.element_losses))

    @property
    def max_element_loss(self) -> float:
        return float(np.max(self.element_losses))


def flux_trace(q_left, q_right, u_left, u_right, jump_coefficient: float = 1.0):
    """Hatted normal flux on an interior edge: {q} - eta [u].

    q_* are the side values of the quantity under the hat (already dotted
    with the edge normal, oriented outward from the left side); [u] is the
    left-minus-right value jump. Continuous traces return the shared flux.
    """
    return 0.5 * (np.asarray(q_left) + np.asarray(q_right)) \
        - jump_coefficient * (np.asarray(u_left) - np.asarray(u_right))


def dirichlet_ghost(u_in, grad_in, g):
    """Ghost trace for a boundary edge: value mirrored through the data.

    With u_out = 2g - u_in the trace average {u} equals g, matching the
    boundary convention of the scheme; the gradient is copied across.
    """
    u_in = np.asarray(u_in)
    return 2.0 * np.asarray(g) - u_in, np.array(grad_in, copy=True)


def _side_traces(block: EdgeBlock, u, g, side: int):
    """(values, spatial gradients) on one side of every edge in the block."""
    el = block.elem[side]
    idx = block.pt_idx[side]
    return u[el[:, None], idx], g[el[:, None], idx]


def _normal_flux(block: EdgeBlock, u_side, g_side, coeffs: PdeCoefficients,
                 d_edge, ds: int):
    """(D grad u - F(u)) . n per edge point/time, n outward from side 0."""
    F = coeffs.flux(u_side, ds)  # (E, J, T, ds)
    n = block.normal[:, None, None, :]  # (E, 1, 1, ds)
    return np.sum((d_edge[:, :, None, None] * g_side - F) * n, axis=-1)


def _edge_diffusion(block: EdgeBlock, cache: AssemblyCache, coeffs: PdeCoefficients):
    if callable(coeffs.diffusion):
        pts = cache.points[block.elem[0][:, None], block.pt_idx[0]]
        xs = pts[..., 0] if cache.ds == 1 else pts
        return np.asarray(coeffs.diffusion(xs), dtype=float)
    return np.full(block.ew.shape, float(coeffs.diffusion))


def _edge_hat(block: EdgeBlock, kind: str, u, g, cache: AssemblyCache,
              coeffs: PdeCoefficients, eta: float):
    """Hatted flux qhat (E, J, T) for one edge block."""
    ds = cache.ds
    d_edge = _edge_diffusion(block, cache, coeffs)
    uL, gL = _side_traces(block, u, g, 0)
    qL = _normal_flux(block, uL, gL[..., :ds], coeffs, d_edge, ds)
    if kind == "dirichlet":
        g_data = block.g_vals[:, :, None]
        u_ghost, g_ghost = dirichlet_ghost(uL, gL[..., :ds], g_data)
        qR = _normal_flux(block, u_ghost, g_ghost, coeffs, d_edge, ds)
        return flux_trace(qL, qR, uL, u_ghost, eta)
    uR, gR = _side_traces(block, u, g, 1)
    qR = _normal_flux(block, uR, gR[..., :ds], coeffs, d_edge, ds)
    return flux_trace(qL, qR, uL, uR, eta)


def _as_field(field, cache: AssemblyCache):
    """Accept a PiecewiseNet or an (u, g) array pair sampled on the cache."""
    if isinstance(field, PiecewiseNet):
        u, g, _ = net_field(field, cache)
        return u, g
    u, g = field
    return u, g


def weak_residuals(u, g, cache: AssemblyCache, coeffs: PdeCoefficients,
                   eta: float = 1.0) -> np.ndarray:
    """Residual tensor (N, M, T): every test function, element, time node.

    u: (N, P, T) field values on the cache blocks; g: (N, P, T, din) input
    gradients, spatial components first, time derivative last when present.
    """
    q = cache.n_volume
    ds = cache.ds
    u_vol = u[:, :q]
    gx_vol = g[:, :q, :, :ds]
    # volume integrand per (element, test, quad, time)
    diff = np.einsum("nqtd,nmqd->nmqt",
                     cache.d_vol[:, :, None, None] * gx_vol, cache.vol_grads)
    conv = np.einsum("nqtd,nmqd->nmqt", coeffs.flux(u_vol, ds), cache.vol_grads)
    rest = cache.f_vals[:, None, :, :] * cache.vol_vals[None, :, :, None]
    integrand = diff - conv - rest
    if coeffs.time_dependent:
        ut = g[:, :q, :, ds]
        integrand = integrand + ut[:, None] * cache.vol_vals[None, :, :, None]
    R = np.einsum("nmqt,nq->nmt", integrand, cache.vw)

    for block, kind in ((cache.interior, "interior"), (cache.periodic, "interior"),
                        (cache.dirichlet, "dirichlet")):
        if block is None or block.n_edges == 0:
            continue
        qhat = _edge_hat(block, kind, u, g, cache, coeffs, eta)
        wq = block.ew[:, :, None] * qhat  # (E, J, T)
        contrib0 = np.einsum("ejt,emj->emt", wq, block.test_vals[0])
        np.subtract.at(R, block.elem[0], contrib0)
        if block.elem.shape[0] == 2:
            contrib1 = np.einsum("ejt,emj->emt", wq, block.test_vals[1])
            np.add.at(R, block.elem[1], contrib1)
    return R


def element_residual(field, cache: AssemblyCache, coeffs: PdeCoefficients,
                     element: int, time_index: int = 0,
                     eta: float = 1.0) -> np.ndarray:
    """Residual vector of one element at one time node.

    field: a PiecewiseNet, or an (u, g) pair sampled on the cache blocks.
    """
    u, g = _as_field(field, cache)
    R = weak_residuals(u, g, cache, coeffs, eta)
    return R[element, :, time_index]


def penalty_loss(field, cache: AssemblyCache, coeffs: PdeCoefficients
                 ) -> tuple[float, float]:
    """(total penalty, periodic part): value/gradient jumps, plain point sums.

    Interior and periodic pairings penalize both the value jump and the full
    spatial-gradient jump; Dirichlet edges penalize the value mismatch with g.
    """
    u, g = _as_field(field, cache)
    ds = cache.ds
    total = 0.0
    periodic_part = 0.0
    for block, kind in ((cache.interior, "interior"), (cache.periodic, "periodic")):
        if block is None or block.n_edges == 0:
            continue
        uL, gL = _side_traces(block, u, g, 0)
        uR, gR = _side_traces(block, u, g, 1)
        part = float(np.sum((uL - uR) ** 2)
                     + np.sum((gL[..., :ds] - gR[..., :ds]) ** 2))
        total += part
        if kind == "periodic":
            periodic_part += part
    if cache.dirichlet is not None and cache.dirichlet.n_edges:
        block = cache.dirichlet
        uL, _ = _side_traces(block, u, g, 0)
        total += float(np.sum((uL - block.g_vals[:, :, None]) ** 2))
    return total, periodic_part


def initial_loss(field, cache: AssemblyCache, coeffs: PdeCoefficients) -> float:
    """Sum of squared initial-condition mismatches over per-element samples."""
    if not coeffs.time_dependent:
        raise ValueError("initial loss is defined for time-dependent problems only")
    if cache.u0_vals is None:
        raise ValueError("cache was built without initial data")
    u, _ = _as_field(field, cache)
    u0_pred = u[:, :cache.n_volume, 0]
    return float(np.sum((u0_pred - cache.u0_vals) ** 2))


def total_loss(field, cache: AssemblyCache, coeffs: PdeCoefficients,
               sigma=(1.0, 1.0, 1.0), top_k: int | None = None,
               eta: float = 1.0) -> LossBreakdown:
    """Weighted objective with top-K selection over element losses.

    field: a PiecewiseNet, or an (u, g) pair sampled on the cache blocks.
    """
    u, g = _as_field(field, cache)
    n = cache.n_elements
    if top_k is None:
        top_k = n
    if not 1 <= top_k <= n:
        raise ValueError(f"top_k {top_k} outside [1, {n}]")
    R = weak_residuals(u, g, cache, coeffs, eta)
    elem = np.einsum("nmt,t->n", R * R, cache.time_weights)
    pen, pen_periodic = penalty_loss((u, g), cache, coeffs)
    ic = initial_loss((u, g), cache, coeffs) if coeffs.time_dependent else 0.0
    if top_k == n:
        selected = np.arange(n)
    else:
        selected = np.sort(np.argpartition(elem, -top_k)[-top_k:])
    return LossBreakdown(elem, pen, ic, tuple(float(s) for s in sigma),
                         selected, pen_periodic)


def loss_cotangents(u, g, cache: AssemblyCache, coeffs: PdeCoefficients,
                    breakdown: LossBreakdown, eta: float = 1.0
                    ) -> tuple[np.ndarray, np.ndarray]:
    """d(total)/du and d(total)/dg at every block point and time node.

    Equation terms flow only through the selected elements; penalty and
    initial terms always flow.
    """
    n, p, T = u.shape
    ds = cache.ds
    din = g.shape[-1]
    s0, s1, s2 = breakdown.sigma
    ubar = np.zeros((n, p, T))
    gbar = np.zeros((n, p, T, din))

    # equation part
    R = weak_residuals(u, g, cache, coeffs, eta)
    sel = np.zeros(n)
    sel[breakdown.selected] = 1.0
    Rbar = 2.0 * s0 * sel[:, None, None] * R * cache.time_weights[None, None, :]

    q = cache.n_volume
    u_vol = u[:, :q]
    # volume: d(residual)/d(gx) = vw * D * grad(p); /d(u) = -vw * grad(p).F'(u)
    gbar[:, :q, :, :ds] += np.einsum(
        "nmt,nq,nmqd->nqtd", Rbar, cache.vw * cache.d_vol, cache.vol_grads)
    Fp = coeffs.flux_derivative(u_vol, ds)
    ubar[:, :q] += -np.einsum("nmt,nq,nmqd,nqtd->nqt",
                              Rbar, cache.vw, cache.vol_grads, Fp)
    if coeffs.time_dependent:
        gbar[:, :q, :, ds] += np.einsum("nmt,nq,mq->nqt", Rbar, cache.vw,
                                        cache.vol_vals)

    for block, kind in ((cache.interior, "interior"), (cache.periodic, "interior"),
                        (cache.dirichlet, "dirichlet")):
        if block is None or block.n_edges == 0:
            continue
        d_edge = _edge_diffusion(block, cache, coeffs)
        # qhat-bar: -Rbar(left).v(left) + Rbar(right).v(right), times weights
        qhatbar = -np.einsum("emt,emj->ejt", Rbar[block.elem[0]], block.test_vals[0])
        if block.elem.shape[0] == 2:
            qhatbar += np.einsum("emt,emj->ejt", Rbar[block.elem[1]],
                                 block.test_vals[1])
        qhatbar *= block.ew[:, :, None]
        nvec = block.normal  # (E, ds)
        uL, gL = _side_traces(block, u, g, 0)
        if kind == "interior":
            uR, _ = _side_traces(block, u, g, 1)
            for side, u_side in ((0, uL), (1, uR)):
                sgn = 1.0 if side == 0 else -1.0
                Fp_side = coeffs.flux_derivative(u_side, ds)
                du = qhatbar * (-0.5 * np.einsum("ejtd,ed->ejt", Fp_side, nvec)
                                - sgn * eta)
                dg = 0.5 * qhatbar[..., None] * (d_edge[:, :, None, None]
                                                 * nvec[:, None, None, :])
                el, idx = block.elem[side], block.pt_idx[side]
                np.add.at(ubar, (el[:, None], idx), du)
                np.add.at(gbar[..., :ds], (el[:, None], idx), dg)
        else:
            g_data = block.g_vals[:, :, None]
            u_ghost = 2.0 * g_data - uL
            FpL = coeffs.flux_derivative(uL, ds)
            FpG = coeffs.flux_derivative(u_ghost, ds)
            # qhat = 0.5*(q_in + q_ghost) - eta*(uL - u_ghost); u_ghost = 2g - uL
            du = qhatbar * (
                -0.5 * np.einsum("ejtd,ed->ejt", FpL, nvec)
                + 0.5 * np.einsum("ejtd,ed->ejt", FpG, nvec)
                - 2.0 * eta)
            dg = qhatbar[..., None] * (d_edge[:, :, None, None]
                                       * nvec[:, None, None, :])
            el, idx = block.elem[0], block.pt_idx[0]
            np.add.at(ubar, (el[:, None], idx), du)
            np.add.at(gbar[..., :ds], (el[:, None], idx), dg)

    # penalty part
    for block in (cache.interior, cache.periodic):
        if block is None or block.n_edges == 0:
            continue
        uL, gL = _side_traces(block, u, g, 0)
        uR, gR = _side_traces(block, u, g, 1)
        du = 2.0 * s2 * (uL - uR)
        dgx = 2.0 * s2 * (gL[..., :ds] - gR[..., :ds])
        elL, idxL = block.elem[0], block.pt_idx[0]
        elR, idxR = block.elem[1], block.pt_idx[1]
        np.add.at(ubar, (elL[:, None], idxL), du)
        np.add.at(ubar, (elR[:, None], idxR), -du)
        np.add.at(gbar[..., :ds], (elL[:, None], idxL), dgx)
        np.add.at(gbar[..., :ds], (elR[:, None], idxR), -dgx)
    if cache.dirichlet is not None and cache.dirichlet.n_edges:
        block = cache.dirichlet
        uL, _ = _side_traces(block, u, g, 0)
        du = 2.0 * s2 * (uL - block.g_vals[:, :, None])
        np.add.at(ubar, (block.elem[0][:, None], block.pt_idx[0]), du)

    # initial part
    if coeffs.time_dependent and cache.u0_vals is not None:
        ubar[:, :q, 0] += 2.0 * s1 * (u[:, :q, 0] - cache.u0_vals)
    return ubar, gbar


def evaluate_field(value_fn, grad_fn, cache: AssemblyCache,
                   coeffs: PdeCoefficients) -> tuple[np.ndarray, np.ndarray]:
    """Sample an analytic field on the cache blocks.

    Stationary: value_fn(x), grad_fn(x) -> (..., ds). Time-dependent:
    value_fn(x, t), grad_fn(x, t) -> (..., ds+1) with u_t last.
    """
    n, p, ds = cache.points.shape
    T = cache.n_time
    din = ds + (1 if coeffs.time_dependent else 0)
    u = np.empty((n, p, T))
    g = np.empty((n, p, T, din))
    xs = cache.points[..., 0] if ds == 1 else cache.points
    if coeffs.time_dependent:
        for j, t in enumerate(cache.time_nodes):
            u[:, :, j] = value_fn(xs, t)
            g[:, :, j, :] = grad_fn(xs, t)
    else:
        u[:, :, 0] = value_fn(xs)
        gg = np.asarray(grad_fn(xs))
        if ds == 1 and gg.shape == (n, p):
            gg = gg[..., None]
        g[:, :, 0, :] = gg
    return u, g


def net_field(net: PiecewiseNet, cache: AssemblyCache):
    """Forward the trial networks on the cache points: (u, g, tape)."""
    vals, tape = forward(net, cache.net_points())
    grads = input_gradient(net, tape)
    u = cache.split_time(vals)
    g = cache.split_time(grads)
    return u, g, tape


def loss_and_gradient(net: PiecewiseNet, cache: AssemblyCache,
                      coeffs: PdeCoefficients, sigma=(1.0, 1.0, 1.0),
                      top_k: int | None = None, eta: float = 1.0,
                      ) -> tuple[LossBreakdown, np.ndarray]:
    """Objective value and flat parameter gradient for the current weights."""
    u, g, tape = net_field(net, cache)
    breakdown = total_loss((u, g), cache, coeffs, sigma, top_k, eta)
    ubar, gbar = loss_cotangents(u, g, cache, coeffs, breakdown, eta)
    n, p = cache.points.shape[:2]
    T = cache.n_time
    grads = parameter_gradient(net, tape,
                               ubar.reshape(n, p * T),
                               gbar.reshape(n, p * T, gbar.shape[-1]))
    return breakdown, net.flatten_like(grads)
