"""Problem definitions with reference solutions and error metrics.

Three families: manufactured 1D Poisson on (0, 3/2), the pentagon Poisson
with the interior-penalty DG solver as reference, and inviscid Burgers with
the characteristic-based exact solution (shock at x = pi + t/2 after the
breaking time t = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from dgnn.assembly import PdeCoefficients
from dgnn.ipdg import IpdgConfig, evaluate as ipdg_evaluate, locate_points, solve_poisson
from dgnn.mesh import (
    Mesh1D,
    Mesh2D,
    partition_interval,
    polygon_area,
    regular_pentagon,
    triangulate_polygon,
)

__all__ = [
    "ProblemSpec",
    "poisson1d",
    "poisson2d_pentagon",
    "poisson2d_square",
    "burgers",
    "burgers_reference",
    "evaluate_metrics",
    "SHOCK_BAND_HALF_WIDTH",
]

SHOCK_BAND_HALF_WIDTH = 0.05


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dimension: int
    coefficients: PdeCoefficients
    interval: tuple[float, float] | None = None
    polygon: np.ndarray | None = None
    periodic: bool = False
    reference: Callable | None = None  # u(x) or u(x, t)
    reference_gradient: Callable | None = None  # where a closed form exists
    defaults: dict = field(default_factory=dict)  # experiment-level settings

    @property
    def time_dependent(self) -> bool:
        return self.coefficients.time_dependent

    def build_mesh(self, n_elements: int | None = None,
                   s_min: float | None = None):
        if self.dimension == 1:
            if n_elements is None:
                raise ValueError(f"{self.name}: 1D problems need n_elements")
            a, b = self.interval
            return partition_interval(a, b, n_elements, periodic=self.periodic)
        if s_min is None:
            raise ValueError(f"{self.name}: 2D problems need s_min")
        return triangulate_polygon(self.polygon, s_min)

    def evaluation_grid(self):
        """Documented metrics grid: (points, extra) per dimension/kind.

        1D stationary: 1000 uniform points. 2D: 200x200 bounding-box grid
        masked to the polygon. Space-time: 256x64 grid plus a shock-band
        mask (True where the point is OUTSIDE the band).
        """
        if self.dimension == 2:
            lo = self.polygon.min(axis=0)
            hi = self.polygon.max(axis=0)
            xs = np.linspace(lo[0], hi[0], 200)
            ys = np.linspace(lo[1], hi[1], 200)
            grid = np.array([[x, y] for x in xs for y in ys])
            return grid, None
        a, b = self.interval
        if not self.time_dependent:
            return np.linspace(a, b, 1000), None
        xs = np.linspace(a, b, 256)
        ts = np.linspace(0.0, self.coefficients.time_horizon, 64)
        xx, tt = np.meshgrid(xs, ts, indexing="ij")
        outside_band = np.abs(xx - shock_position(tt)) >= SHOCK_BAND_HALF_WIDTH
        return np.stack([xx, tt], axis=-1), outside_band


def poisson1d(omega: float) -> ProblemSpec:
    """-u'' = f on (0, 3/2) manufactured from u(x) = x cos(omega x)."""
    if omega <= 0:
        raise ValueError("frequency must be positive")

    def u(x):
        return x * np.cos(omega * x)

    def du(x):
        return np.cos(omega * x) - omega * x * np.sin(omega * x)

    def f(x):
        return 2 * omega * np.sin(omega * x) + omega**2 * x * np.cos(omega * x)

    coeffs = PdeCoefficients(diffusion=1.0, source=f, dirichlet=u)
    return ProblemSpec(
        name=f"poisson1d_w{omega / np.pi:g}pi", dimension=1,
        coefficients=coeffs, interval=(0.0, 1.5),
        reference=u, reference_gradient=du,
        defaults={"n_elements": 5, "n_volume": 20, "degree": 5,
                  "hidden_layers": 2, "width": 40},
    )


def poisson2d_pentagon(s_min: float, oracle_degree: int = 2,
                       oracle_refine: int = 4) -> ProblemSpec:
    """-Lap u = 10 on the unit-circumradius pentagon, u = 0 on the boundary.

    The reference field is the interior-penalty DG solve on a mesh refined
    beyond the training resolution (s_min / oracle_refine).
    """
    if s_min <= 0:
        raise ValueError("s_min must be positive")
    pent = regular_pentagon()
    f = lambda x: np.full(x.shape[:-1], 10.0)
    g = lambda x: np.zeros(x.shape[:-1])
    oracle_mesh = triangulate_polygon(pent, s_min / oracle_refine)
    oracle = solve_poisson(oracle_mesh, IpdgConfig(degree=oracle_degree),
                           f=lambda x: np.full(len(x), 10.0),
                           g=lambda x: np.zeros(len(x)))

    def reference(x):
        pts = np.atleast_2d(x).reshape(-1, 2)
        out = ipdg_evaluate(oracle, pts)
        return out.reshape(np.shape(x)[:-1])

    coeffs = PdeCoefficients(diffusion=1.0, source=f, dirichlet=g)
    return ProblemSpec(
        name=f"pentagon_s{s_min:g}", dimension=2, coefficients=coeffs,
        polygon=pent, reference=reference,
        defaults={"s_min": s_min, "n_volume": 15, "n_edge": 20, "degree": 3,
                  "hidden_layers": 2, "width": 50},
    )


def poisson2d_square() -> ProblemSpec:
    """Manufactured Poisson on the unit square: u = sin(pi x) sin(pi y)."""
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

    def u(x):
        return np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])

    def du(x):
        g = np.empty(np.shape(x))
        g[..., 0] = np.pi * np.cos(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])
        g[..., 1] = np.pi * np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1])
        return g

    f = lambda x: 2 * np.pi**2 * u(x)
    coeffs = PdeCoefficients(diffusion=1.0, source=f,
                             dirichlet=lambda x: np.zeros(x.shape[:-1]))
    return ProblemSpec(
        name="poisson2d_square", dimension=2, coefficients=coeffs,
        polygon=square, reference=u, reference_gradient=du,
        defaults={"s_min": 0.02, "n_volume": 15, "n_edge": 20, "degree": 3,
                  "hidden_layers": 2, "width": 50},
    )


def shock_position(t):
    """Shock path after breaking: x = pi + t/2 (speed (u_l + u_r)/2 = 1/2)."""
    return np.pi + 0.5 * np.asarray(t)


def burgers_initial(x):
    return np.sin(x) + 0.5


_NEWTON_TOL = 1e-12
_NEWTON_MAX_ITER = 100


def _implicit_residual(w, x, t):
    return w - np.sin(x - w * t - 0.5 * t)


def _newton_branch(x, t, seed):
    """Vectorized Newton on w = sin(x - w t - t/2) from a fixed seed."""
    w = np.full(np.shape(x), float(seed))
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    for _ in range(_NEWTON_MAX_ITER):
        arg = x - w * t - 0.5 * t
        r = w - np.sin(arg)
        dr = 1.0 + t * np.cos(arg)
        bad = np.abs(dr) < 1e-14
        dr = np.where(bad, 1.0, dr)
        step = np.where(bad, 0.0, r / dr)
        w = w - step
        if np.max(np.abs(r)) < _NEWTON_TOL:
            break
    return w


def _bisect_fallback(x, t):
    lo = np.full(np.shape(x), -1.0)
    hi = np.ones(np.shape(x))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rm = _implicit_residual(mid, x, t)
        neg = rm < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def burgers_reference(x, t):
    """Entropy solution of u_t + u u_x = 0, u0 = sin(x) + 1/2, via Newton.

    Roots of the implicit equation are seeded at +/-0.8 on either side of
    the shock; where a branch converges to the wrong characteristic family
    (origin on the wrong side of pi), the other branch is used. Remaining
    failures fall back to bisection on [-1, 1].
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    x_b, t_b = np.broadcast_arrays(x, t)
    left_of_shock = x_b < shock_position(t_b)
    seed_primary = np.where(left_of_shock, 0.8, -0.8)

    w = np.empty(x_b.shape)
    for seed in (0.8, -0.8):
        sel = seed_primary == seed
        if np.any(sel):
            w[sel] = _newton_branch(x_b[sel], t_b[sel], seed)

    # physical branch check: characteristic origin x0 = x - (w + 1/2) t must
    # lie on the same side of pi as the point lies of the shock
    def wrong_side(w_arr):
        origin = x_b - (w_arr + 0.5) * t_b
        return ((origin > np.pi) & left_of_shock) | ((origin < np.pi) & ~left_of_shock)

    bad = wrong_side(w) | (np.abs(_implicit_residual(w, x_b, t_b)) > _NEWTON_TOL)
    if np.any(bad):
        for seed in (0.8, -0.8):
            retry = bad & (seed_primary != seed)
            if np.any(retry):
                w2 = _newton_branch(x_b[retry], t_b[retry], seed)
                w[retry] = w2
        bad = wrong_side(w) | (np.abs(_implicit_residual(w, x_b, t_b)) > _NEWTON_TOL)
    if np.any(bad):
        w_bis = _bisect_fallback(x_b[bad], t_b[bad])
        w[bad] = w_bis
        still = np.abs(_implicit_residual(w, x_b, t_b)) > 1e-10
        if np.any(still):
            i = tuple(np.argwhere(still)[0])
            raise FloatingPointError(
                f"implicit-solution solve failed at x={x_b[i]:.6f}, t={t_b[i]:.6f}")
    return w + 0.5


def burgers(n_time: int = 30) -> ProblemSpec:
    """Inviscid Burgers on (0, 2 pi) x [0, 1.5] with periodic boundaries."""
    coeffs = PdeCoefficients(
        diffusion=0.0, convection="burgers", source=None,
        initial=burgers_initial, time_horizon=1.5)
    return ProblemSpec(
        name="burgers", dimension=1, coefficients=coeffs,
        interval=(0.0, 2 * np.pi), periodic=True,
        reference=burgers_reference,
        defaults={"n_elements": 11, "n_volume": 20, "degree": 3,
                  "n_time": n_time, "hidden_layers": 2, "width": 50},
    )


def evaluate_metrics(predicted, reference, grid, mask=None) -> dict:
    """MSE (mean squared difference) and MAE (maximum absolute difference).

    predicted/reference: callables on the grid or precomputed arrays. mask
    selects the points that enter the metrics (True = keep).
    """
    grid = np.asarray(grid)
    if grid.size == 0:
        raise ValueError("empty evaluation grid")
    p = predicted(grid) if callable(predicted) else np.asarray(predicted)
    r = reference(grid) if callable(reference) else np.asarray(reference)
    diff = (p - r).ravel()
    if mask is not None:
        diff = diff[np.asarray(mask).ravel()]
        if diff.size == 0:
            raise ValueError("mask removed every grid point")
    return {"mse": float(np.mean(diff**2)), "mae": float(np.max(np.abs(diff)))}


def polygon_mask(polygon: np.ndarray, points: np.ndarray) -> np.ndarray:
    from dgnn.mesh import _point_in_polygon

    return _point_in_polygon(points, polygon)
