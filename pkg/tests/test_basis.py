import numpy as np
import pytest

from dgnn.basis import MAX_DEGREE, build_basis, push_forward_gradients
from dgnn.mesh import build_affine
from dgnn.quadrature import gauss_legendre_1d, triangle_rule


class TestBuildBasis:
    def test_2d_degree3_count(self):
        basis = build_basis(2, 3, triangle_rule(6))
        assert basis.n_basis == 10

    def test_1d_degree5(self):
        basis = build_basis(1, 5, gauss_legendre_1d(4))
        assert basis.n_basis == 6
        x = basis.values  # rows are 1, x, ..., x^5 at the rule points
        pts = gauss_legendre_1d(4).points
        for i in range(6):
            assert np.allclose(x[i], pts**i, atol=1e-14)

    def test_counts_formula(self):
        for k in range(MAX_DEGREE + 1):
            b1 = build_basis(1, k, gauss_legendre_1d(3))
            b2 = build_basis(2, k, triangle_rule(3))
            assert b1.n_basis == k + 1
            assert b2.n_basis == (k + 1) * (k + 2) // 2

    def test_constant_gradient_zero(self):
        basis = build_basis(2, 4, triangle_rule(12))
        assert np.all(basis.gradients[0] == 0.0)

    def test_tables_match_direct_evaluation(self):
        rule = triangle_rule(15)
        basis = build_basis(2, 6, rule)
        x, y = rule.points[:, 0], rule.points[:, 1]
        for m, (a, b) in enumerate(basis.exponents):
            assert np.allclose(basis.values[m], x**a * y**b, atol=1e-14)

    def test_degree_cap(self):
        with pytest.raises(ValueError):
            build_basis(1, MAX_DEGREE + 1, gauss_legendre_1d(3))
        with pytest.raises(ValueError):
            build_basis(2, -1, triangle_rule(3))

    def test_reevaluation_reproduces_tables(self):
        rule = triangle_rule(12)
        basis = build_basis(2, 5, rule)
        values, grads = basis.evaluate(rule.points)
        assert np.array_equal(values, basis.values)
        assert np.array_equal(grads, basis.gradients)


class TestPushForward:
    def test_identity_map(self):
        basis = build_basis(2, 3, triangle_rule(6))
        amap = build_affine(np.array([[0, 0], [1, 0], [0, 1]], dtype=float))
        phys = push_forward_gradients(basis, amap)
        assert np.allclose(phys, basis.gradients, atol=1e-14)

    def test_1d_half_interval(self):
        basis = build_basis(1, 2, gauss_legendre_1d(3))
        amap = build_affine([0.0, 0.5])
        phys = push_forward_gradients(basis, amap)
        # vhat = xhat has physical slope 1 / 0.5 = 2 everywhere
        assert np.allclose(phys[1, :, 0], 2.0, atol=1e-14)

    def test_random_triangle_finite_difference(self):
        rng = np.random.default_rng(5)
        rule = triangle_rule(6)
        basis = build_basis(2, 3, rule)
        verts = np.array([[0.1, -0.2], [1.3, 0.4], [0.2, 1.1]])
        amap = build_affine(verts)
        phys_grad = push_forward_gradients(basis, amap)
        h = 1e-6
        # v(x) = vhat(F^{-1}(x)); compare against central differences in x
        for m in rng.choice(basis.n_basis, 4, replace=False):
            a, b = basis.exponents[m]
            for q in rng.choice(rule.n, 3, replace=False):
                phys = amap.apply(rule.points[q][None, :])[0]
                for d in range(2):
                    step = np.zeros(2)
                    step[d] = h
                    rp = amap.pull_back((phys + step)[None, :])[0]
                    rm = amap.pull_back((phys - step)[None, :])[0]
                    vp = rp[0]**a * rp[1]**b
                    vm = rm[0]**a * rm[1]**b
                    fd = (vp - vm) / (2 * h)
                    assert phys_grad[m, q, d] == pytest.approx(fd, abs=2e-6)

    def test_all_members_random_maps(self):
        rng = np.random.default_rng(9)
        rule = triangle_rule(3)
        basis = build_basis(2, 4, rule)
        h = 1e-6
        for _ in range(3):
            verts = rng.uniform(-1, 1, (3, 2))
            area2 = abs(np.linalg.det(np.column_stack([verts[1] - verts[0],
                                                       verts[2] - verts[0]])))
            if area2 < 0.3:
                continue
            amap = build_affine(verts)
            phys_grad = push_forward_gradients(basis, amap)
            scale = max(1.0, np.abs(phys_grad).max())
            for m in range(basis.n_basis):
                a, b = basis.exponents[m]
                for q in range(rule.n):
                    phys = amap.apply(rule.points[q][None, :])[0]
                    for d in range(2):
                        step = np.zeros(2)
                        step[d] = h
                        rp = amap.pull_back((phys + step)[None, :])[0]
                        rm = amap.pull_back((phys - step)[None, :])[0]
                        fd = (rp[0]**a * rp[1]**b - rm[0]**a * rm[1]**b) / (2 * h)
                        err = abs(phys_grad[m, q, d] - fd) / scale
                        assert err < 1e-6

    def test_dimension_mismatch(self):
        basis = build_basis(1, 2, gauss_legendre_1d(2))
        amap = build_affine(np.array([[0, 0], [1, 0], [0, 1]], dtype=float))
        with pytest.raises(ValueError):
            push_forward_gradients(basis, amap)
