import math

import numpy as np
import pytest

from dgnn.quadrature import QuadRule, edge_rule, gauss_legendre_1d, triangle_rule

TRIANGLE_SIZES = [1, 3, 6, 12, 15, 16, 19, 25]


def interval_moment(i):
    # integral of x^i over [0, 1]
    return 1.0 / (i + 1)


def triangle_moment(i, j):
    # integral of x^i y^j over the reference triangle = i! j! / (i + j + 2)!
    return math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)


def quad_1d(rule, i):
    return float(np.sum(rule.weights * rule.points**i))


def quad_tri(rule, i, j):
    x, y = rule.points[:, 0], rule.points[:, 1]
    return float(np.sum(rule.weights * x**i * y**j))


class TestGaussLegendre1D:
    def test_two_point_closed_form(self):
        rule = gauss_legendre_1d(2)
        expected = np.array([(1 - 1 / np.sqrt(3)) / 2, (1 + 1 / np.sqrt(3)) / 2])
        assert np.allclose(rule.points, expected, atol=1e-15)
        assert np.allclose(rule.weights, [0.5, 0.5], atol=1e-15)

    def test_two_point_integrates_cubic(self):
        rule = gauss_legendre_1d(2)
        assert quad_1d(rule, 3) == pytest.approx(0.25, abs=1e-15)

    def test_twenty_point_count_and_degree(self):
        rule = gauss_legendre_1d(20)
        assert rule.n == 20
        assert rule.exact_degree == 39

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 20, 33, 64])
    def test_exactness(self, n):
        rule = gauss_legendre_1d(n)
        assert rule.exact_degree == 2 * n - 1
        for i in range(rule.exact_degree + 1):
            exact = interval_moment(i)
            assert quad_1d(rule, i) == pytest.approx(exact, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 5, 20, 40])
    def test_nodes_symmetric_about_midpoint(self, n):
        rule = gauss_legendre_1d(n)
        assert np.allclose(rule.points + rule.points[::-1], 1.0, atol=1e-14)

    def test_weights_sum_to_measure(self):
        for n in (1, 4, 17, 64):
            assert gauss_legendre_1d(n).weights.sum() == pytest.approx(1.0, abs=1e-14)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            gauss_legendre_1d(0)
        with pytest.raises(ValueError):
            gauss_legendre_1d(65)

    def test_matches_numpy_leggauss(self):
        # independent cross-check of the Newton solver
        for n in (3, 10, 31):
            rule = gauss_legendre_1d(n)
            x, w = np.polynomial.legendre.leggauss(n)
            assert np.allclose(rule.points, (x + 1) / 2, atol=1e-14)
            assert np.allclose(rule.weights, w / 2, atol=1e-14)


class TestTriangleRule:
    def test_centroid_rule(self):
        rule = triangle_rule(1)
        assert np.allclose(rule.points, [[1 / 3, 1 / 3]])
        assert rule.weights[0] == pytest.approx(0.5, abs=1e-15)
        assert rule.exact_degree == 1

    @pytest.mark.parametrize("n", TRIANGLE_SIZES)
    def test_reference_moments(self, n):
        rule = triangle_rule(n)
        assert quad_tri(rule, 0, 0) == pytest.approx(0.5, rel=1e-13)
        assert quad_tri(rule, 1, 0) == pytest.approx(1 / 6, rel=1e-12)

    @pytest.mark.parametrize("n", TRIANGLE_SIZES)
    def test_declared_exactness(self, n):
        rule = triangle_rule(n)
        for i in range(rule.exact_degree + 1):
            for j in range(rule.exact_degree + 1 - i):
                exact = triangle_moment(i, j)
                assert quad_tri(rule, i, j) == pytest.approx(exact, rel=1e-12), (
                    f"rule {n} failed on x^{i} y^{j}")

    def test_fifteen_point_degree_at_least_seven(self):
        assert triangle_rule(15).exact_degree >= 7

    @pytest.mark.parametrize("n", [4, 9, 36, 49])
    def test_square_count_fallback(self, n):
        rule = triangle_rule(n)
        m = int(round(np.sqrt(n)))
        assert rule.n == n
        assert rule.exact_degree == 2 * m - 1
        for i in range(rule.exact_degree + 1):
            for j in range(rule.exact_degree + 1 - i):
                assert quad_tri(rule, i, j) == pytest.approx(
                    triangle_moment(i, j), rel=1e-12)

    def test_twenty_point_fallback(self):
        rule = triangle_rule(20)
        assert rule.n == 20
        assert rule.exact_degree == 7
        for i in range(8):
            for j in range(8 - i):
                assert quad_tri(rule, i, j) == pytest.approx(
                    triangle_moment(i, j), rel=1e-12)

    def test_points_inside_and_weights_positive(self):
        for n in TRIANGLE_SIZES + [20, 36]:
            rule = triangle_rule(n)
            x, y = rule.points[:, 0], rule.points[:, 1]
            assert np.all(x > -1e-14) and np.all(y > -1e-14)
            assert np.all(x + y < 1 + 1e-14)
            assert np.all(rule.weights > 0)

    def test_unsupported_count(self):
        with pytest.raises(ValueError):
            triangle_rule(7)


class TestEdgeRule:
    def test_midpoint_on_length_two(self):
        rule = edge_rule(1, np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert np.allclose(rule.points, [[1.0, 0.0]])
        assert rule.weights[0] == pytest.approx(2.0, abs=1e-15)

    def test_linear_exact_any_n(self):
        a, b = np.array([0.5, -1.0]), np.array([2.0, 1.5])
        length = np.linalg.norm(b - a)
        for n in (1, 2, 5, 15):
            rule = edge_rule(n, np.array([a, b]))
            # integrate f(x, y) = 3x - 2y + 1 along the segment
            vals = 3 * rule.points[:, 0] - 2 * rule.points[:, 1] + 1
            t = np.linspace(0, 1, 100001)
            pts = a[None, :] + t[:, None] * (b - a)[None, :]
            exact = np.trapezoid(3 * pts[:, 0] - 2 * pts[:, 1] + 1, t) * length
            assert np.sum(rule.weights * vals) == pytest.approx(exact, rel=1e-9)

    def test_weights_sum_to_length(self):
        seg = np.array([[1.0, 2.0], [4.0, 6.0]])
        for n in (1, 3, 15, 20):
            rule = edge_rule(n, seg)
            assert rule.weights.sum() == pytest.approx(5.0, rel=1e-14)

    def test_points_on_segment(self):
        seg = np.array([[0.0, 1.0], [2.0, 0.0]])
        rule = edge_rule(7, seg)
        d = seg[1] - seg[0]
        rel = rule.points - seg[0]
        cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
        assert np.max(np.abs(cross)) < 1e-13

    def test_degenerate_edge_rejected(self):
        with pytest.raises(ValueError):
            edge_rule(3, np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_affine_covariance():
    # pulling a rule to a physical triangle reproduces |det B| * reference integral
    rng = np.random.default_rng(42)
    rule = triangle_rule(12)
    for _ in range(20):
        verts = rng.uniform(-2, 2, (3, 2))
        B = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
        det = np.linalg.det(B)
        if abs(det) < 0.1:
            continue
        coeffs = rng.uniform(-1, 1, (4, 4))

        def poly(x, y):
            return sum(coeffs[i, j] * x**i * y**j
                       for i in range(4) for j in range(4 - i))

        phys = rule.points @ B.T + verts[0]
        lhs = abs(det) * np.sum(rule.weights * poly(phys[:, 0], phys[:, 1]))
        # direct integration over the physical triangle with a finer rule
        fine = triangle_rule(25)
        phys_fine = fine.points @ B.T + verts[0]
        rhs = abs(det) * np.sum(fine.weights * poly(phys_fine[:, 0], phys_fine[:, 1]))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_weight_positivity_enforced():
    with pytest.raises(ValueError):
        QuadRule(np.array([0.5]), np.array([-1.0]), 1, "interval")
