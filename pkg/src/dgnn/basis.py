"""Monomial test spaces on reference elements.

1D: {xhat^i : i <= k} on [0, 1]. 2D: {xhat^j yhat^(i-j) : 0 <= j <= i <= k}
on the reference triangle, the constant included. Values and gradients are
tabulated once at the quadrature points; physical gradients come from the
inverse-transpose of the element map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dgnn.mesh import AffineMap
from dgnn.quadrature import QuadRule

__all__ = ["TestBasis", "build_basis", "push_forward_gradients", "MAX_DEGREE"]

# monomial conditioning degrades past degree 10, and higher test degrees stop
# paying for themselves; keep the cap explicit
MAX_DEGREE = 10


@dataclass(frozen=True)
class TestBasis:
    dim: int
    degree: int
    exponents: np.ndarray  # (n_basis,) for 1D, (n_basis, 2) for 2D
    values: np.ndarray  # (n_basis, n_points)
    gradients: np.ndarray  # (n_basis, n_points, dim)

    @property
    def n_basis(self) -> int:
        return len(self.exponents)

    def evaluate(self, ref_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Tabulate values/gradients at arbitrary reference points."""
        return _tabulate(self.dim, self.exponents, ref_points)


def _exponents(dim: int, k: int) -> np.ndarray:
    if dim == 1:
        return np.arange(k + 1)
    return np.array([(j, i - j) for i in range(k + 1) for j in range(i + 1)])


def _tabulate(dim: int, exponents: np.ndarray, pts: np.ndarray):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[1] != dim:
        pts = pts.reshape(-1, dim)
    n_pts = pts.shape[0]
    n_basis = len(exponents)
    values = np.empty((n_basis, n_pts))
    grads = np.empty((n_basis, n_pts, dim))
    if dim == 1:
        x = pts[:, 0]
        for m, i in enumerate(exponents):
            values[m] = x**i
            grads[m, :, 0] = i * x ** (i - 1) if i > 0 else 0.0
    else:
        x, y = pts[:, 0], pts[:, 1]
        for m, (a, b) in enumerate(exponents):
            values[m] = x**a * y**b
            grads[m, :, 0] = a * x ** (a - 1) * y**b if a > 0 else 0.0
            grads[m, :, 1] = b * x**a * y ** (b - 1) if b > 0 else 0.0
    return values, grads


def build_basis(dim: int, k: int, rule: QuadRule) -> TestBasis:
    """Monomial basis of degree <= k tabulated at the rule's points."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if not 0 <= k <= MAX_DEGREE:
        raise ValueError(f"test degree {k} outside [0, {MAX_DEGREE}]")
    exps = _exponents(dim, k)
    values, grads = _tabulate(dim, exps, rule.points)
    return TestBasis(dim, k, exps, values, grads)


def push_forward_gradients(basis: TestBasis, amap: AffineMap) -> np.ndarray:
    """Physical gradients: grad_x v = B^{-T} grad_xhat vhat at every table point."""
    if amap.matrix.shape[0] != basis.dim:
        raise ValueError("affine map dimension does not match basis")
    return np.einsum("de,mpe->mpd", amap.inv_transpose, basis.gradients)
