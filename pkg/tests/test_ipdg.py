import numpy as np
import pytest

from dgnn.basis import build_basis
from dgnn.ipdg import (
    DgSolution,
    IpdgConfig,
    assemble,
    evaluate,
    l2_error,
    locate_points,
    solve,
    solve_poisson,
)
from dgnn.mesh import regular_pentagon, structured_rectangle, triangulate_polygon
from dgnn.quadrature import triangle_rule

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def manufactured():
    u = lambda x: np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])
    f = lambda x: 2 * np.pi**2 * u(x)
    return u, f


class TestConfig:
    def test_defaults(self):
        cfg = IpdgConfig(degree=2)
        assert cfg.penalty0 == 40.0
        assert cfg.epsilon == -1

    def test_coercivity_guard(self):
        with pytest.raises(ValueError):
            IpdgConfig(degree=2, sigma0=1.0)

    def test_nonsymmetric_allows_small_sigma(self):
        cfg = IpdgConfig(degree=2, epsilon=1, sigma0=1.0)
        assert cfg.penalty0 == 1.0

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            IpdgConfig(epsilon=2)


class TestAssemble:
    def test_dimensions_two_triangle_square(self):
        mesh = triangulate_polygon(UNIT_SQUARE, 10.0)
        cfg = IpdgConfig(degree=1)
        basis = build_basis(2, 1, triangle_rule(6))
        A, F = assemble(mesh, basis, cfg,
                        f=lambda x: np.zeros(len(x)), g=lambda x: np.zeros(len(x)))
        assert A.shape == (6, 6)
        assert F.shape == (6,)

    def test_symmetric_for_eps_minus_one(self):
        mesh = triangulate_polygon(UNIT_SQUARE, 0.1)
        u, f = manufactured()
        for k in (1, 2):
            cfg = IpdgConfig(degree=k, epsilon=-1)
            basis = build_basis(2, k, triangle_rule(12))
            A, _ = assemble(mesh, basis, cfg, f=f, g=lambda x: np.zeros(len(x)))
            asym = np.abs(A - A.T).max()
            assert asym <= 1e-10 * np.abs(A).max()

    def test_constant_solution_in_kernel(self):
        # u = const with matching boundary data and f = 0 solves the system
        mesh = triangulate_polygon(UNIT_SQUARE, 0.2)
        c = 2.5
        cfg = IpdgConfig(degree=1)
        basis = build_basis(2, 1, triangle_rule(6))
        A, F = assemble(mesh, basis, cfg,
                        f=lambda x: np.zeros(len(x)),
                        g=lambda x: np.full(len(x), c))
        # coefficient vector for u = c: constant basis member is monomial (0,0)
        U = np.zeros(A.shape[0])
        U[0::basis.n_basis] = c
        assert np.linalg.norm(A @ U - F) <= 1e-10 * max(np.linalg.norm(F), 1)

    def test_insufficient_quadrature_rejected(self):
        mesh = triangulate_polygon(UNIT_SQUARE, 10.0)
        basis = build_basis(2, 3, triangle_rule(3))
        with pytest.raises(ValueError):
            assemble(mesh, basis, IpdgConfig(degree=3), f=lambda x: np.zeros(len(x)),
                     g=lambda x: np.zeros(len(x)), volume_rule=triangle_rule(3))


class TestSolve:
    def test_identity_system(self):
        F = np.array([1.0, -2.0, 3.0])
        assert np.allclose(solve(np.eye(3), F), F)

    def test_constant_solution_recovered(self):
        mesh = triangulate_polygon(UNIT_SQUARE, 0.2)
        c = 1.25
        sol = solve_poisson(mesh, IpdgConfig(degree=1),
                            f=lambda x: np.zeros(len(x)),
                            g=lambda x: np.full(len(x), c))
        pts = np.array([[0.3, 0.4], [0.7, 0.2], [0.5, 0.9]])
        assert np.allclose(evaluate(sol, pts), c, atol=1e-10)

    def test_singular_reported(self):
        with pytest.raises(np.linalg.LinAlgError):
            solve(np.zeros((2, 2)), np.ones(2))

    def test_residual_bound_holds(self):
        mesh = structured_rectangle(4, 4)
        u, f = manufactured()
        basis = build_basis(2, 1, triangle_rule(6))
        A, F = assemble(mesh, basis, IpdgConfig(degree=1), f=f,
                        g=lambda x: np.zeros(len(x)))
        U = solve(A, F)
        assert np.linalg.norm(A @ U - F) / np.linalg.norm(F) <= 1e-10


class TestConvergence:
    def test_l2_ratio_under_refinement(self):
        # quick one-step check in the asymptotic range; the acceptance suite
        # runs the full three-refinement ladder from nx=4
        u, f = manufactured()
        errors = []
        for nx in (8, 16):
            mesh = structured_rectangle(nx, nx)
            sol = solve_poisson(mesh, IpdgConfig(degree=1), f=f,
                                g=lambda x: np.zeros(len(x)))
            errors.append(l2_error(sol, u))
        assert errors[0] / errors[1] >= 3.0, errors

    def test_max_error_on_refined_mesh(self):
        u, f = manufactured()
        mesh = structured_rectangle(16, 16)
        sol = solve_poisson(mesh, IpdgConfig(degree=2), f=f,
                            g=lambda x: np.zeros(len(x)))
        xs = np.linspace(0.02, 0.98, 25)
        grid = np.array([[x, y] for x in xs for y in xs])
        err = np.abs(evaluate(sol, grid) - u(grid))
        assert err.max() < 1e-2


class TestEvaluate:
    def test_matches_coefficient_tables(self):
        mesh = triangulate_polygon(UNIT_SQUARE, 10.0)
        basis = build_basis(2, 2, triangle_rule(6))
        rng = np.random.default_rng(0)
        U = rng.normal(size=2 * basis.n_basis)
        sol = DgSolution(U, mesh, basis)
        from dgnn.mesh import build_affine
        for i in range(2):
            amap = build_affine(mesh.triangle_vertices(i))
            ref_pts = triangle_rule(6).points
            phys = amap.apply(ref_pts)
            vals, _ = basis.evaluate(ref_pts)
            expected = vals.T @ sol.element_coefficients(i)
            assert np.allclose(evaluate(sol, phys), expected, atol=1e-12)

    def test_outside_point_raises(self):
        mesh = triangulate_polygon(UNIT_SQUARE, 10.0)
        basis = build_basis(2, 1, triangle_rule(3))
        sol = DgSolution(np.zeros(6), mesh, basis)
        with pytest.raises(ValueError):
            evaluate(sol, np.array([[2.0, 2.0]]))

    def test_locate_points(self):
        mesh = structured_rectangle(2, 2)
        inside = np.array([[0.1, 0.1], [0.9, 0.9]])
        outside = np.array([[1.5, 0.5]])
        assert np.all(locate_points(mesh, inside) >= 0)
        assert np.all(locate_points(mesh, outside) == -1)


class TestPentagonOracle:
    # measured behavior of the reference solve under s_min halving (L2 of the
    # field difference over the pentagon): k=2 contracts by ~2.6x per halving
    # and sits at 2.5e-3 for the 0.0125 -> 0.00625 pair; k=3 reaches 5.5e-4
    # there. The oracle for training comparisons runs at k=2 on s_min/4.
    def test_reference_field_stable_under_refinement(self):
        pent = regular_pentagon()
        f = lambda x: np.full(len(x), 10.0)
        g = lambda x: np.zeros(len(x))
        levels = (0.025, 0.0125, 0.00625)
        sols = {s: solve_poisson(triangulate_polygon(pent, s),
                                 IpdgConfig(degree=2), f=f, g=g)
                for s in levels}
        xs = np.linspace(-0.95, 0.95, 80)
        ys = np.linspace(-0.85, 1.0, 80)
        grid = np.array([[x, y] for x in xs for y in ys])
        inside = np.all([locate_points(sols[s].mesh, grid) >= 0 for s in levels],
                        axis=0)
        pts = grid[inside]
        vals = {s: evaluate(sols[s], pts) for s in levels}
        area = 2.377641
        d1 = np.sqrt(np.mean((vals[0.025] - vals[0.0125]) ** 2) * area)
        d2 = np.sqrt(np.mean((vals[0.0125] - vals[0.00625]) ** 2) * area)
        assert d2 <= 4e-3
        assert d1 / d2 >= 2.0  # halving contracts the field change
        # f = 10 pushes the solution positive inside the domain
        assert vals[0.00625].max() > 0

    def test_high_order_field_change_small(self):
        pent = regular_pentagon()
        f = lambda x: np.full(len(x), 10.0)
        g = lambda x: np.zeros(len(x))
        sols = {s: solve_poisson(triangulate_polygon(pent, s),
                                 IpdgConfig(degree=3), f=f, g=g)
                for s in (0.0125, 0.00625)}
        xs = np.linspace(-0.9, 0.9, 60)
        ys = np.linspace(-0.8, 0.95, 60)
        grid = np.array([[x, y] for x in xs for y in ys])
        inside = np.all([locate_points(sols[s].mesh, grid) >= 0 for s in sols],
                        axis=0)
        pts = grid[inside]
        d = evaluate(sols[0.0125], pts) - evaluate(sols[0.00625], pts)
        assert np.sqrt(np.mean(d ** 2) * 2.377641) <= 1e-3
