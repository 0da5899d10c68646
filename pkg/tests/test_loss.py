import numpy as np
import pytest

from dgnn.assembly import PdeCoefficients, build_cache
from dgnn.loss import (
    dirichlet_ghost,
    element_residual,
    evaluate_field,
    flux_trace,
    initial_loss,
    loss_and_gradient,
    net_field,
    penalty_loss,
    total_loss,
    weak_residuals,
)
from dgnn.mesh import partition_interval, regular_pentagon, triangulate_polygon
from dgnn.network import NetArch, forward, init_net, input_gradient

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def poisson1d_fields(omega):
    u = lambda x: x * np.cos(omega * x)
    du = lambda x: np.cos(omega * x) - omega * x * np.sin(omega * x)
    f = lambda x: 2 * omega * np.sin(omega * x) + omega**2 * x * np.cos(omega * x)
    return u, du, f


def poisson2d_fields():
    u = lambda x: np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])

    def du(x):
        g = np.empty(x.shape)
        g[..., 0] = np.pi * np.cos(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])
        g[..., 1] = np.pi * np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1])
        return g

    f = lambda x: 2 * np.pi**2 * u(x)
    return u, du, f


def burgers_coeffs(n_time=5, horizon=1.5):
    return PdeCoefficients(
        diffusion=0.0, convection="burgers",
        initial=lambda x: np.sin(x) + 0.5, time_horizon=horizon), n_time


class TestFluxTrace:
    def test_continuous_trace(self):
        q = 1.7
        assert flux_trace(q, q, 0.4, 0.4) == pytest.approx(q, abs=1e-15)

    def test_paper_values(self):
        # u_l = 1, u_r = 0, flux values equal to u itself
        assert flux_trace(1.0, 0.0, 1.0, 0.0) == pytest.approx(-0.5)

    def test_antisymmetry_under_side_swap(self):
        rng = np.random.default_rng(0)
        ql, qr, ul, ur = rng.normal(size=4)
        left_view = flux_trace(ql, qr, ul, ur)
        right_view = flux_trace(-qr, -ql, ur, ul)
        assert right_view == pytest.approx(-left_view, rel=1e-14)

    def test_dirichlet_ghost_average_is_data(self):
        for g in (0.0, 0.7):
            for u_in in (0.0, 0.3, -1.2):
                u_out, grad_out = dirichlet_ghost(u_in, np.array([1.0, 2.0]), g)
                assert 0.5 * (u_in + u_out) == pytest.approx(g, abs=1e-15)
                assert np.array_equal(grad_out, [1.0, 2.0])

    def test_dirichlet_zero_data_zero_trace(self):
        # boundary-consistent trace with g = 0: jump and average both vanish
        u_out, _ = dirichlet_ghost(0.0, np.zeros(2), 0.0)
        assert u_out == 0.0

    def test_jump_coefficient_configurable(self):
        assert flux_trace(1.0, 1.0, 2.0, 0.0, jump_coefficient=0.25) == \
            pytest.approx(1.0 - 0.5)


class TestElementResidual1D:
    def test_exact_solution_machine_precision(self):
        u, du, f = poisson1d_fields(15 * np.pi)
        coeffs = PdeCoefficients(diffusion=1.0, source=f, dirichlet=u)
        cache = build_cache(partition_interval(0, 1.5, 25), 5, 20, coeffs)
        uu, gg = evaluate_field(u, du, cache, coeffs)
        R = weak_residuals(uu, gg, cache, coeffs)
        assert np.max(np.abs(R)) <= 1e-10

    def test_zero_field_leaves_source_term(self):
        f = lambda x: np.ones_like(x) * 3.0
        coeffs = PdeCoefficients(diffusion=1.0, source=f,
                                 dirichlet=lambda x: np.zeros_like(x))
        mesh = partition_interval(0, 1, 4)
        cache = build_cache(mesh, 2, 6, coeffs)
        n, p = cache.points.shape[:2]
        uu = np.zeros((n, p, 1))
        gg = np.zeros((n, p, 1, 1))
        R = weak_residuals(uu, gg, cache, coeffs)
        # residual reduces to -integral(f p) per element and test function
        for i in range(n):
            for m in range(cache.basis.n_basis):
                expected = -np.sum(cache.vw[i] * cache.f_vals[i, :, 0]
                                   * cache.vol_vals[m])
                assert R[i, m, 0] == pytest.approx(expected, rel=1e-13)

    def test_burgers_constant_state_divergence_identity(self):
        coeffs, n_time = burgers_coeffs()
        mesh = partition_interval(0, 2 * np.pi, 6, periodic=True)
        cache = build_cache(mesh, 3, 10, coeffs, n_time=n_time)
        c = 0.8
        n, p = cache.points.shape[:2]
        uu = np.full((n, p, n_time), c)
        gg = np.zeros((n, p, n_time, 2))
        R = weak_residuals(uu, gg, cache, coeffs)
        assert np.max(np.abs(R)) < 1e-12

    def test_element_residual_slice(self):
        u, du, f = poisson1d_fields(3 * np.pi)
        coeffs = PdeCoefficients(diffusion=1.0, source=f, dirichlet=u)
        cache = build_cache(partition_interval(0, 1.5, 5), 3, 8, coeffs)
        uu, gg = evaluate_field(u, du, cache, coeffs)
        R = weak_residuals(uu, gg, cache, coeffs)
        r2 = element_residual((uu, gg), cache, coeffs, element=2)
        assert np.array_equal(r2, R[2, :, 0])
        assert len(r2) == cache.basis.n_basis


class TestResidual2D:
    def test_exact_solution_small_loss(self):
        u, du, f = poisson2d_fields()
        coeffs = PdeCoefficients(diffusion=1.0, source=f,
                                 dirichlet=lambda x: np.zeros(x.shape[:-1]))
        mesh = triangulate_polygon(UNIT_SQUARE, 0.02)
        for n_e in (15, 20):
            cache = build_cache(mesh, 3, n_e, coeffs, n_edge=20)
            uu, gg = evaluate_field(u, du, cache, coeffs)
            bd = total_loss((uu, gg), cache, coeffs)
            assert bd.total <= 1e-10

    def test_flux_conservation_interior_cancellation(self):
        # with f = 0 the constant test function only sees edge fluxes, so the
        # sum over elements must equal minus the total boundary flux
        coeffs = PdeCoefficients(diffusion=1.0, source=None,
                                 dirichlet=lambda x: np.zeros(x.shape[:-1]))
        mesh = triangulate_polygon(UNIT_SQUARE, 10.0)
        cache = build_cache(mesh, 2, 6, coeffs, n_edge=4)
        rng = np.random.default_rng(1)
        n, p = cache.points.shape[:2]
        uu = rng.normal(size=(n, p, 1))
        gg = rng.normal(size=(n, p, 1, 2))
        R = weak_residuals(uu, gg, cache, coeffs)
        from dgnn.loss import _edge_hat
        block = cache.dirichlet
        qhat = _edge_hat(block, "dirichlet", uu, gg, cache, coeffs, 1.0)
        boundary_total = float(np.sum(block.ew[:, :, None] * qhat
                                      * block.test_vals[0][:, 0:1, :].transpose(0, 2, 1)))
        assert np.sum(R[:, 0, 0]) == pytest.approx(-boundary_total, rel=1e-12)

    def test_interior_flux_antisymmetric_contributions(self):
        coeffs = PdeCoefficients(diffusion=1.0)
        mesh = triangulate_polygon(UNIT_SQUARE, 10.0)
        cache = build_cache(mesh, 0, 3, coeffs, n_edge=5)
        rng = np.random.default_rng(2)
        n, p = cache.points.shape[:2]
        uu = rng.normal(size=(n, p, 1))
        gg = rng.normal(size=(n, p, 1, 2))
        from dgnn.loss import _edge_hat
        block = cache.interior
        qhat = _edge_hat(block, "interior", uu, gg, cache, coeffs, 1.0)
        wq = block.ew[:, :, None] * qhat
        left = -np.einsum("ejt,emj->emt", wq, block.test_vals[0])
        right = np.einsum("ejt,emj->emt", wq, block.test_vals[1])
        # constant test function sees identical values from both sides
        assert np.allclose(left[:, 0], -right[:, 0], atol=1e-12)


class TestPenaltyLoss:
    def test_continuous_field_zero(self):
        u, du, _ = poisson2d_fields()
        coeffs = PdeCoefficients(diffusion=1.0, dirichlet=u)
        mesh = triangulate_polygon(UNIT_SQUARE, 0.05)
        cache = build_cache(mesh, 2, 6, coeffs, n_edge=8)
        uu, gg = evaluate_field(u, du, cache, coeffs)
        pen, _ = penalty_loss((uu, gg), cache, coeffs)
        assert pen <= 1e-20

    def test_constant_offset_counts_points(self):
        coeffs = PdeCoefficients(diffusion=1.0,
                                 dirichlet=lambda x: np.zeros(x.shape[:-1]))
        mesh = triangulate_polygon(UNIT_SQUARE, 10.0)
        n_edge = 7
        cache = build_cache(mesh, 1, 3, coeffs, n_edge=n_edge)
        n, p = cache.points.shape[:2]
        uu = np.zeros((n, p, 1))
        gg = np.zeros((n, p, 1, 2))
        c = 0.3
        block = cache.interior
        el, idx = block.elem[0][0], block.pt_idx[0][0]
        uu[el, idx, 0] += c
        pen, _ = penalty_loss((uu, gg), cache, coeffs)
        assert pen == pytest.approx(n_edge * c * c, rel=1e-13)

    def test_periodic_pairing_contributes(self):
        coeffs, n_time = burgers_coeffs()
        mesh = partition_interval(0, 2 * np.pi, 5, periodic=True)
        cache = build_cache(mesh, 2, 6, coeffs, n_time=n_time)
        # linear-in-x field: continuous inside, jump 2*pi at the pairing
        uu = cache.points[:, :, 0:1] * np.ones((1, 1, n_time))
        gg = np.zeros(uu.shape + (2,))
        gg[..., 0] = 1.0
        pen, periodic_part = penalty_loss((uu, gg), cache, coeffs)
        expected = n_time * (2 * np.pi) ** 2
        assert periodic_part == pytest.approx(expected, rel=1e-12)
        assert pen == pytest.approx(expected, rel=1e-12)


class TestInitialLoss:
    def test_matching_initial_field_zero(self):
        coeffs, n_time = burgers_coeffs()
        mesh = partition_interval(0, 2 * np.pi, 4, periodic=True)
        cache = build_cache(mesh, 2, 8, coeffs, n_time=n_time)
        uu = np.zeros((4, cache.n_block, n_time))
        uu[:, :, 0] = np.sin(cache.points[:, :, 0]) + 0.5
        gg = np.zeros(uu.shape + (2,))
        assert initial_loss((uu, gg), cache, coeffs) == pytest.approx(0.0, abs=1e-28)

    def test_constant_zero_field_counts(self):
        coeffs = PdeCoefficients(diffusion=0.0, convection="burgers",
                                 initial=lambda x: np.full_like(x, 0.5),
                                 time_horizon=1.0)
        mesh = partition_interval(0, 1, 1, periodic=True)
        cache = build_cache(mesh, 1, 10, coeffs, n_time=3)
        uu = np.zeros((1, cache.n_block, 3))
        gg = np.zeros(uu.shape + (2,))
        assert initial_loss((uu, gg), cache, coeffs) == pytest.approx(10 * 0.25)

    def test_stationary_rejects(self):
        coeffs = PdeCoefficients(diffusion=1.0)
        cache = build_cache(partition_interval(0, 1, 2), 1, 4, coeffs)
        with pytest.raises(ValueError):
            initial_loss((np.zeros((2, 6, 1)), np.zeros((2, 6, 1, 1))), cache, coeffs)


class TestTotalLoss:
    def test_topk_full_equals_plain_sum(self):
        u, du, f = poisson1d_fields(3 * np.pi)
        coeffs = PdeCoefficients(diffusion=1.0, source=f, dirichlet=u)
        cache = build_cache(partition_interval(0, 1.5, 5), 3, 10, coeffs)
        net = init_net(5, NetArch(1, 2, 8), seed=0)
        full = total_loss(net, cache, coeffs, top_k=5)
        default = total_loss(net, cache, coeffs)
        assert full.total == pytest.approx(default.total, rel=1e-14)
        assert full.equation == pytest.approx(np.sum(full.element_losses), rel=1e-14)

    def test_topk_monotonicity(self):
        u, du, f = poisson1d_fields(3 * np.pi)
        coeffs = PdeCoefficients(diffusion=1.0, source=f, dirichlet=u)
        cache = build_cache(partition_interval(0, 1.5, 8), 3, 10, coeffs)
        net = init_net(8, NetArch(1, 2, 8), seed=3)
        bd = total_loss(net, cache, coeffs, top_k=3)
        selected = set(bd.selected.tolist())
        rest = [bd.element_losses[i] for i in range(8) if i not in selected]
        assert min(bd.element_losses[list(selected)]) >= max(rest)

    def test_decomposition_recombines(self):
        coeffs, n_time = burgers_coeffs()
        mesh = partition_interval(0, 2 * np.pi, 4, periodic=True)
        cache = build_cache(mesh, 2, 6, coeffs, n_time=n_time)
        net = init_net(4, NetArch(2, 2, 6), seed=5)
        sigma = (2.0, 0.5, 3.0)
        bd = total_loss(net, cache, coeffs, sigma=sigma, top_k=2)
        manual = (sigma[0] * np.sum(bd.element_losses[bd.selected])
                  + sigma[1] * bd.initial + sigma[2] * bd.penalty)
        assert bd.total == pytest.approx(manual, rel=1e-14)
        assert bd.element_losses.min() >= 0
        assert bd.penalty >= 0 and bd.initial >= 0

    def test_k_out_of_range(self):
        coeffs = PdeCoefficients(diffusion=1.0)
        cache = build_cache(partition_interval(0, 1, 3), 1, 4, coeffs)
        net = init_net(3, NetArch(1, 1, 4), seed=0)
        with pytest.raises(ValueError):
            total_loss(net, cache, coeffs, top_k=4)

    def test_exact_solution_total(self):
        u, du, f = poisson1d_fields(15 * np.pi)
        coeffs = PdeCoefficients(diffusion=1.0, source=f, dirichlet=u)
        cache = build_cache(partition_interval(0, 1.5, 25), 5, 20, coeffs)
        uu, gg = evaluate_field(u, du, cache, coeffs)
        assert total_loss((uu, gg), cache, coeffs).total <= 1e-10


def finite_difference_check(net, cache, coeffs, sigma=(1, 1, 1), top_k=None,
                            rel_tol=1e-5, step=1e-5):
    bd, grad = loss_and_gradient(net, cache, coeffs, sigma=sigma, top_k=top_k)
    flat0 = net.get_flat()

    def loss_of(vec):
        net.set_flat(vec)
        # freeze the selection that the analytic gradient used
        b = total_loss(net, cache, coeffs, sigma=sigma, top_k=top_k)
        if top_k is not None and top_k < cache.n_elements:
            s0, s1, s2 = sigma
            return (s0 * float(np.sum(b.element_losses[bd.selected]))
                    + s1 * b.initial + s2 * b.penalty)
        return b.total

    worst = 0.0
    for idx in range(len(flat0)):
        e = np.zeros_like(flat0)
        e[idx] = step
        fd = (loss_of(flat0 + e) - loss_of(flat0 - e)) / (2 * step)
        denom = max(abs(fd), abs(grad[idx]), 1e-8)
        worst = max(worst, abs(grad[idx] - fd) / denom)
        assert abs(grad[idx] - fd) / denom < rel_tol, f"param {idx}"
    net.set_flat(flat0)
    return worst


class TestFullPipelineGradient:
    def test_1d_poisson_small_instance(self):
        u, du, f = poisson1d_fields(3 * np.pi)
        coeffs = PdeCoefficients(diffusion=1.0, source=f, dirichlet=u)
        cache = build_cache(partition_interval(0, 1.5, 3), 1, 5, coeffs)
        net = init_net(3, NetArch(1, 2, 4), seed=7)
        finite_difference_check(net, cache, coeffs)

    def test_burgers_spacetime(self):
        coeffs, n_time = burgers_coeffs(n_time=4, horizon=1.0)
        mesh = partition_interval(0, 2 * np.pi, 3, periodic=True)
        cache = build_cache(mesh, 2, 4, coeffs, n_time=n_time)
        net = init_net(3, NetArch(2, 2, 4), seed=11)
        finite_difference_check(net, cache, coeffs)

    def test_2d_poisson(self):
        u, du, f = poisson2d_fields()
        coeffs = PdeCoefficients(diffusion=1.0, source=f,
                                 dirichlet=lambda x: np.zeros(x.shape[:-1]))
        mesh = triangulate_polygon(UNIT_SQUARE, 10.0)
        cache = build_cache(mesh, 2, 6, coeffs, n_edge=3)
        net = init_net(2, NetArch(2, 1, 5), seed=13)
        finite_difference_check(net, cache, coeffs)

    def test_topk_selection_gradient(self):
        # unselected elements contribute no equation gradient
        u, du, f = poisson1d_fields(3 * np.pi)
        coeffs = PdeCoefficients(diffusion=1.0, source=f, dirichlet=u)
        cache = build_cache(partition_interval(0, 1.5, 4), 2, 5, coeffs)
        net = init_net(4, NetArch(1, 1, 4), seed=17)
        finite_difference_check(net, cache, coeffs, top_k=2)

    def test_weighted_losses(self):
        coeffs, n_time = burgers_coeffs(n_time=3, horizon=0.5)
        mesh = partition_interval(0, 2 * np.pi, 2, periodic=True)
        cache = build_cache(mesh, 1, 4, coeffs, n_time=n_time)
        net = init_net(2, NetArch(2, 1, 4), seed=19)
        finite_difference_check(net, cache, coeffs, sigma=(2.0, 0.3, 1.5))
