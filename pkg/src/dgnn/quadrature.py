"""Gauss-Legendre quadrature on the reference interval, reference triangle, and edges.

Reference domains: the interval [0, 1] (measure 1) and the triangle with
vertices (0,0), (1,0), (0,1) (measure 1/2). Every rule carries the largest
polynomial degree it integrates exactly so callers can check sufficiency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadRule", "gauss_legendre_1d", "triangle_rule", "edge_rule"]


@dataclass(frozen=True)
class QuadRule:
    """Quadrature points and positive weights with declared exactness degree."""

    points: np.ndarray  # (n,) for intervals, (n, 2) for triangles/edges
    weights: np.ndarray  # (n,), all > 0
    exact_degree: int
    domain_kind: str  # "interval" | "triangle" | "edge"

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def n(self) -> int:
        return len(self.weights)


def _legendre_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights of n-point Gauss-Legendre on [-1, 1] by Newton iteration.

    Works for any n; no table lookup. Converges to 1e-15 in a handful of
    iterations from the Chebyshev-based initial guess.
    """
    k = np.arange(n)
    x = np.cos(np.pi * (4 * k + 3) / (4 * n + 2))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for m in range(2, n + 1):
            p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
        # p1 = P_n, p0 = P_{n-1};  P_n' = n (x P_n - P_{n-1}) / (x^2 - 1)
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # recompute derivative at converged nodes for the weights
    p0 = np.ones_like(x)
    p1 = x.copy()
    for m in range(2, n + 1):
        p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


def gauss_legendre_1d(n: int) -> QuadRule:
    """n-point Gauss-Legendre rule on [0, 1]; exact through degree 2n-1."""
    if not 1 <= n <= 64:
        raise ValueError(f"point count {n} outside supported range [1, 64]")
    if n == 1:
        return QuadRule(np.array([0.5]), np.array([1.0]), 1, "interval")
    x, w = _legendre_nodes(n)
    return QuadRule((x + 1.0) / 2.0, w / 2.0, 2 * n - 1, "interval")


def _orbit3(a: float) -> list[tuple[float, float]]:
    # barycentric (1-2a, a, a) and permutations, mapped to (x, y) = (l2, l3)
    return [(a, a), (1.0 - 2.0 * a, a), (a, 1.0 - 2.0 * a)]


def _orbit6(b: float, c: float) -> list[tuple[float, float]]:
    d = 1.0 - b - c
    return [(c, d), (d, c), (b, d), (d, b), (b, c), (c, b)]


def _symmetric_tables() -> dict[int, tuple[np.ndarray, np.ndarray, int]]:
    tables: dict[int, tuple[np.ndarray, np.ndarray, int]] = {}

    def freeze(n, degree, pts, ws):
        pts = np.array(pts, dtype=float)
        ws = np.array(ws, dtype=float)
        ws *= 0.5 / ws.sum()  # pin the measure exactly
        tables[n] = (pts, ws, degree)

    freeze(1, 1, [(1 / 3, 1 / 3)], [0.5])

    freeze(3, 2, _orbit3(1 / 6), [1 / 6] * 3)

    a1, a2 = 0.445948490915965, 0.091576213509771
    w1, w2 = 0.223381589678011, 0.109951743655322
    freeze(6, 4, _orbit3(a1) + _orbit3(a2), [w1] * 3 + [w2] * 3)

    a1, a2 = 0.063089014491502, 0.249286745170910
    b, c = 0.310352451033785, 0.053145049844816
    w1, w2, w6 = 0.050844906370207, 0.116786275726379, 0.082851075618374
    freeze(12, 6, _orbit3(a1) + _orbit3(a2) + _orbit6(b, c),
           [w1] * 3 + [w2] * 3 + [w6] * 6)

    a1 = 0.06435710887007530
    a2 = 0.24012803394743522
    a3 = 0.44895320127748589
    b, c = 0.04392920611060564, 0.64801077302494534
    w1 = 0.02600054631711773
    w2 = 0.06236435230778659
    w3 = 0.01086323089448585
    w6 = 0.03371926857363825
    freeze(15, 7, _orbit3(a1) + _orbit3(a2) + _orbit3(a3) + _orbit6(b, c),
           [w1] * 3 + [w2] * 3 + [w3] * 3 + [w6] * 6)

    a1, a2, a3 = 0.459292588292723, 0.170569307751760, 0.050547228317031
    b, c = 0.263112829634638, 0.728492392955404
    w0 = 0.144315607677787
    w1, w2, w3 = 0.095091634267285, 0.103217370534718, 0.032458497623198
    w6 = 0.027230314174435
    freeze(16, 8, [(1 / 3, 1 / 3)] + _orbit3(a1) + _orbit3(a2) + _orbit3(a3)
           + _orbit6(b, c),
           [w0] + [w1] * 3 + [w2] * 3 + [w3] * 3 + [w6] * 6)

    a1, a2, a3, a4 = (0.489682519198738, 0.437089591492937,
                      0.188203535619033, 0.044729513394453)
    b, c = 0.036838412054736, 0.741198598784498
    w0 = 0.097135796282799
    w1, w2, w3, w4 = (0.031334700227139, 0.077827541004774,
                      0.079647738927210, 0.025577675658698)
    w6 = 0.043283539377289
    freeze(19, 9, [(1 / 3, 1 / 3)] + _orbit3(a1) + _orbit3(a2)
           + _orbit3(a3) + _orbit3(a4) + _orbit6(b, c),
           [w0] + [w1] * 3 + [w2] * 3 + [w3] * 3 + [w4] * 3 + [w6] * 6)

    a1, a2 = 0.485577633383657, 0.109481575485037
    b1, c1 = 0.141707219414880, 0.550352941820999
    b2, c2 = 0.025003534762686, 0.728323904597411
    b3, c3 = 0.009540815400299, 0.923655933587500
    w1, w2 = 0.090817990382754, 0.036725957756467
    w3, w4, w5, w6 = (0.045321059435528, 0.072757916845420,
                      0.028327242531057, 0.009421666963733)
    freeze(25, 10, [(1 / 3, 1 / 3)] + _orbit3(a1) + _orbit3(a2)
           + _orbit6(b1, c1) + _orbit6(b2, c2) + _orbit6(b3, c3),
           [w1] + [w2] * 3 + [w3] * 3 + [w4] * 6 + [w5] * 6 + [w6] * 6)

    return tables


_TRIANGLE_TABLES = _symmetric_tables()


def _conical_product(nx: int, ny: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Collapsed tensor rule: Gauss-Jacobi(1,0) radially x Gauss-Legendre.

    Exact through degree min(2*nx - 1, 2*ny - 1) on the reference triangle.
    """
    from scipy.special import roots_jacobi

    xj, wj = roots_jacobi(nx, 1.0, 0.0)  # weight (1 - x) on [-1, 1]
    xi = (xj + 1.0) / 2.0
    wi = wj / 4.0  # maps weight measure to (1 - xi) on [0, 1]
    gl = gauss_legendre_1d(ny)
    eta, we = gl.points, gl.weights
    pts = np.empty((nx * ny, 2))
    ws = np.empty(nx * ny)
    k = 0
    for i in range(nx):
        for j in range(ny):
            pts[k] = (xi[i], eta[j] * (1.0 - xi[i]))
            ws[k] = wi[i] * we[j]
            k += 1
    return pts, ws, min(2 * nx - 1, 2 * ny - 1)


def triangle_rule(n_points: int) -> QuadRule:
    """Quadrature on the reference triangle with n_points nodes.

    Symmetric tables cover {1, 3, 6, 12, 15, 16, 19, 25}; other counts of the
    form m*m or m*(m+1) fall back to a collapsed tensor-product rule.
    """
    if n_points in _TRIANGLE_TABLES:
        pts, ws, deg = _TRIANGLE_TABLES[n_points]
        return QuadRule(pts, ws, deg, "triangle")
    m = int(round(np.sqrt(n_points)))
    if m * m == n_points:
        pts, ws, deg = _conical_product(m, m)
        return QuadRule(pts, ws, deg, "triangle")
    # n = m*(m+1): put the larger count radially where the Jacobi weight lives
    m = int((np.sqrt(4 * n_points + 1) - 1) / 2)
    if m * (m + 1) == n_points:
        pts, ws, deg = _conical_product(m + 1, m)
        return QuadRule(pts, ws, deg, "triangle")
    raise ValueError(
        f"unsupported triangle rule size {n_points}; use one of "
        f"{sorted(_TRIANGLE_TABLES)} or a count of the form m*m or m*(m+1)")


def edge_rule(n: int, endpoints: np.ndarray) -> QuadRule:
    """Gauss-Legendre rule along a physical segment; weights sum to its length."""
    if n < 1:
        raise ValueError("edge rule needs at least one point")
    a = np.asarray(endpoints[0], dtype=float)
    b = np.asarray(endpoints[1], dtype=float)
    h = float(np.linalg.norm(b - a))
    if h == 0.0:
        raise ValueError("degenerate edge: coincident endpoints")
    base = gauss_legendre_1d(n)
    pts = a[None, :] + base.points[:, None] * (b - a)[None, :]
    return QuadRule(pts, base.weights * h, base.exact_degree, "edge")
