"""Adam and L-BFGS over flat parameter vectors.

L-BFGS uses the two-loop recursion with history filtering (pairs kept only
when s.y is safely positive) and a strong-Wolfe line search with cubic
interpolation; a failed search falls back to a halving gradient step so
training never stalls on a bad direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamState", "LbfgsState", "adam_step", "lbfgs_step"]


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    rejected_steps: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update; non-finite gradients are rejected."""
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    if state.m.shape != params.shape or grads.shape != params.shape:
        raise ValueError("parameter/gradient/state shapes disagree")
    if not np.all(np.isfinite(grads)):
        state.rejected_steps += 1
        return params
    state.step_count += 1
    t = state.step_count
    state.m = state.beta1 * state.m + (1 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = state.m / (1 - state.beta1**t)
    v_hat = state.v / (1 - state.beta2**t)
    return params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class LbfgsState:
    history: int = 20
    c1: float = 1e-4
    c2: float = 0.9
    max_evals: int = 25
    curvature_floor: float = 1e-12
    s_list: list = field(default_factory=list)
    y_list: list = field(default_factory=list)
    rho_list: list = field(default_factory=list)
    fallback_count: int = 0
    last_f: float | None = None
    last_g: np.ndarray | None = None


def _two_loop(state: LbfgsState, grad: np.ndarray) -> np.ndarray:
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(state.s_list), reversed(state.y_list),
                         reversed(state.rho_list)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if state.s_list:
        s, y = state.s_list[-1], state.y_list[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(zip(state.s_list, state.y_list, state.rho_list),
                              reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def _cubic_min(a, fa, dfa, b, fb, dfb):
    """Minimizer of the cubic through (a, fa, dfa), (b, fb, dfb); None if bad."""
    d1 = dfa + dfb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - dfa * dfb
    if disc < 0:
        return None
    d2 = np.sqrt(disc) * np.sign(b - a)
    denom = dfb - dfa + 2 * d2
    if denom == 0:
        return None
    x = b - (b - a) * (dfb + d2 - d1) / denom
    return x if np.isfinite(x) else None


def _zoom(phi, a_lo, a_hi, f_lo, g_lo, f_hi, g_hi, f0, g0, state, evals):
    for _ in range(state.max_evals):
        if evals[0] >= state.max_evals:
            return None
        a = _cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
        width = abs(a_hi - a_lo)
        lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
        if a is None or not (lo + 0.1 * width <= a <= hi - 0.1 * width):
            a = 0.5 * (a_lo + a_hi)
        fa, ga = phi(a)
        evals[0] += 1
        if not np.isfinite(fa) or fa > f0 + state.c1 * a * g0 or fa >= f_lo:
            a_hi, f_hi, g_hi = a, fa, ga
        else:
            if abs(ga) <= -state.c2 * g0:
                return a, fa
            if ga * (a_hi - a_lo) >= 0:
                a_hi, f_hi, g_hi = a_lo, f_lo, g_lo
            a_lo, f_lo, g_lo = a, fa, ga
        if abs(a_hi - a_lo) < 1e-16:
            return a_lo, f_lo
    return None


def _wolfe_search(phi, f0, g0, state):
    """Strong Wolfe line search (bracket + zoom). Returns (alpha, f) or None."""
    evals = [0]
    a_prev, f_prev, g_prev = 0.0, f0, g0
    a = 1.0
    for _ in range(state.max_evals):
        if evals[0] >= state.max_evals:
            return None
        fa, ga = phi(a)
        evals[0] += 1
        if not np.isfinite(fa):
            # step overshot into bad territory; bracket towards the origin
            result = _zoom(phi, a_prev, a, f_prev, g_prev, fa, ga, f0, g0,
                           state, evals)
            return result
        if fa > f0 + state.c1 * a * g0 or (evals[0] > 1 and fa >= f_prev):
            return _zoom(phi, a_prev, a, f_prev, g_prev, fa, ga, f0, g0,
                         state, evals)
        if abs(ga) <= -state.c2 * g0:
            return a, fa
        if ga >= 0:
            return _zoom(phi, a, a_prev, fa, ga, f_prev, g_prev, f0, g0,
                         state, evals)
        a_prev, f_prev, g_prev = a, fa, ga
        a *= 2.0
    return None


def lbfgs_step(loss_and_grad, params: np.ndarray, state: LbfgsState
               ) -> tuple[np.ndarray, float, np.ndarray]:
    """One L-BFGS iteration: direction, Wolfe search, curvature update.

    loss_and_grad(params) -> (f, grad) must be deterministic within the step.
    Returns (new params, loss at new params, gradient at new params).
    """
    if state.last_f is None:
        f0, g0vec = loss_and_grad(params)
    else:
        f0, g0vec = state.last_f, state.last_g
    if not np.isfinite(f0) or not np.all(np.isfinite(g0vec)):
        raise FloatingPointError("non-finite loss or gradient entering L-BFGS step")

    direction = _two_loop(state, g0vec)
    slope = float(np.dot(direction, g0vec))
    if slope >= 0:  # not a descent direction; drop history and steep-descend
        state.s_list.clear()
        state.y_list.clear()
        state.rho_list.clear()
        direction = -g0vec
        slope = float(np.dot(direction, g0vec))

    cache = {}

    def phi(alpha):
        if alpha not in cache:
            f, g = loss_and_grad(params + alpha * direction)
            cache[alpha] = (f, float(np.dot(g, direction)), g)
        f, df, _ = cache[alpha]
        return f, df

    result = _wolfe_search(phi, f0, slope, state)
    if result is not None:
        alpha = result[0]
        if alpha <= 0.0:
            result = None  # search collapsed onto the origin: no progress
        elif alpha not in cache:
            phi(alpha)
    if result is None:
        # fallback: halving steps along the negative gradient
        state.fallback_count += 1
        direction = -g0vec
        alpha = 1.0 / max(1.0, float(np.linalg.norm(g0vec)))
        for _ in range(30):
            f_try, g_try = loss_and_grad(params + alpha * direction)
            if np.isfinite(f_try) and f_try < f0:
                new_params = params + alpha * direction
                state.last_f, state.last_g = f_try, g_try
                state.s_list.clear()
                state.y_list.clear()
                state.rho_list.clear()
                return new_params, f_try, g_try
            alpha *= 0.5
        state.last_f, state.last_g = f0, g0vec
        return params, f0, g0vec  # no progress possible; caller decides

    alpha, f_new = result
    g_new = cache[alpha][2]
    step = alpha * direction
    yk = g_new - g0vec
    sty = float(np.dot(step, yk))
    if sty > state.curvature_floor:
        state.s_list.append(step)
        state.y_list.append(yk)
        state.rho_list.append(1.0 / sty)
        if len(state.s_list) > state.history:
            state.s_list.pop(0)
            state.y_list.pop(0)
            state.rho_list.pop(0)
    new_params = params + step
    state.last_f, state.last_g = f_new, g_new
    return new_params, f_new, g_new
