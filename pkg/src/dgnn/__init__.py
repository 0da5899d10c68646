"""Piecewise neural-network PDE solver with weak-form element residuals.

Trial functions are independent shallow networks, one per mesh element,
coupled only through numerical fluxes and jump penalties; test functions are
per-element monomials. A classical interior-penalty DG solver provides
reference fields for problems without closed-form solutions.
"""

from dgnn.quadrature import QuadRule, edge_rule, gauss_legendre_1d, triangle_rule

__all__ = [
    "QuadRule",
    "gauss_legendre_1d",
    "triangle_rule",
    "edge_rule",
]
