"""Training runs, ablation sweeps, and checkpoint evaluation.

One run builds mesh, assembly cache, and trial networks from a RunConfig,
trains with the Adam warm-up followed by L-BFGS, and leaves four artifacts
in the output directory: telemetry.csv (one row per iteration), field.csv
(best net sampled on the documented evaluation grid), checkpoint_best.ckpt /
checkpoint_final.ckpt, and summary.json.
"""

from __future__ import annotations

import csv
import itertools
import json
import time
from pathlib import Path

import numpy as np

from dgnn.assembly import build_cache
from dgnn.config import ConfigError, RunConfig
from dgnn.ipdg import locate_points
from dgnn.loss import loss_cotangents, net_field, total_loss
from dgnn.mesh import Mesh1D
from dgnn.network import (
    NetArch,
    PiecewiseNet,
    forward,
    init_net,
    load_checkpoint,
    parameter_gradient,
    save_checkpoint,
)
from dgnn.optim import AdamState, LbfgsState, adam_step, lbfgs_step
from dgnn.problems import (
    burgers,
    evaluate_metrics,
    poisson1d,
    poisson2d_pentagon,
    poisson2d_square,
    polygon_mask,
)

__all__ = ["NumericalAbort", "build_run", "run_training", "run_ablation",
           "evaluate_checkpoint", "evaluate_net", "TELEMETRY_COLUMNS"]

TELEMETRY_COLUMNS = ["iter", "wall_time_s", "total", "L_eq", "L_penalty",
                     "L_ic", "max_elem_loss", "argmax_elem", "mse"]


class NumericalAbort(RuntimeError):
    """Loss or gradient became non-finite; diagnostics in the message."""


def make_problem(config: RunConfig):
    if config.problem == "poisson1d":
        return poisson1d(config.omega)
    if config.problem == "pentagon":
        return poisson2d_pentagon(config.s_min)
    if config.problem == "burgers":
        return burgers(config.n_time)
    if config.problem == "poisson2d_square":
        return poisson2d_square()
    raise ConfigError(f"unknown problem {config.problem!r}")


def _element_frames(mesh, time_horizon: float):
    """Per-element input centers and half-width scales for initialization."""
    if isinstance(mesh, Mesh1D):
        centers = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])[:, None]
        scales = 0.5 * np.diff(mesh.nodes)[:, None]
    else:
        verts = mesh.vertices[mesh.triangles]
        lo, hi = verts.min(axis=1), verts.max(axis=1)
        centers = 0.5 * (lo + hi)
        scales = np.maximum(0.5 * (hi - lo), 1e-12)
    if time_horizon > 0:
        n = len(centers)
        centers = np.column_stack([centers, np.full(n, 0.5 * time_horizon)])
        scales = np.column_stack([scales, np.full(n, 0.5 * time_horizon)])
    return centers, scales


def build_run(config: RunConfig):
    """(problem, mesh, cache, net) ready for training."""
    problem = make_problem(config)
    if problem.dimension == 1:
        mesh = problem.build_mesh(n_elements=config.n_elements)
    else:
        mesh = problem.build_mesh(s_min=config.s_min)
    coeffs = problem.coefficients
    n_time = config.n_time if coeffs.time_dependent else 1
    cache = build_cache(mesh, config.degree, config.n_volume, coeffs,
                        n_edge=config.n_edge, n_time=n_time)
    din = problem.dimension + (1 if coeffs.time_dependent else 0)
    arch = NetArch(din, config.hidden_layers, config.width)
    centers, scales = _element_frames(mesh, coeffs.time_horizon)
    net = init_net(cache.n_elements, arch, config.seed,
                   input_center=centers, input_scale=scales)
    return problem, mesh, cache, net


def _reference_on_cache(problem, cache):
    """Reference values at the volume points (telemetry MSE), or None."""
    if problem.reference is None:
        return None
    q = cache.n_volume
    xs = cache.points[:, :q, 0] if cache.ds == 1 else cache.points[:, :q, :]
    if problem.time_dependent:
        out = np.empty((cache.n_elements, q, cache.n_time))
        for j, t in enumerate(cache.time_nodes):
            out[:, :, j] = problem.reference(xs, np.full(xs.shape, t))
        return out
    return problem.reference(xs)[:, :, None]


def _fmt(x) -> str:
    return format(float(x), ".17g")


class _Clock:
    def __init__(self, kind: str):
        self.kind = kind
        self.start = time.perf_counter()

    def read(self) -> float:
        if self.kind == "none":
            return 0.0
        return time.perf_counter() - self.start


def run_training(config: RunConfig, callback=None) -> dict:
    """Full training run; returns the summary dict (also written to disk)."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem, mesh, cache, net = build_run(config)
    coeffs = problem.coefficients
    n = cache.n_elements
    top_k = config.top_k if config.top_k else n
    if top_k > n:
        raise ConfigError(f"top_k {top_k} exceeds element count {n}")
    ref_cache = _reference_on_cache(problem, cache)
    q = cache.n_volume

    def eval_state(selection=None):
        # overflow here just means the run is diverging; the caller aborts
        # on the resulting non-finite values
        with np.errstate(over="ignore", invalid="ignore"):
            u, g, tape = net_field(net, cache)
            bd = total_loss((u, g), cache, coeffs, config.sigma, top_k,
                            config.flux_jump)
            if selection is not None:
                bd = bd.__class__(bd.element_losses, bd.penalty, bd.initial,
                                  bd.sigma, selection, bd.periodic_penalty)
            ubar, gbar = loss_cotangents(u, g, cache, coeffs, bd,
                                         config.flux_jump)
            p, T = cache.points.shape[1], cache.n_time
            grads = parameter_gradient(net, tape, ubar.reshape(n, p * T),
                                       gbar.reshape(n, p * T, gbar.shape[-1]))
            mse = np.nan
            if ref_cache is not None:
                mse = float(np.mean((u[:, :q] - ref_cache) ** 2))
        return bd, net.flatten_like(grads), mse

    clock = _Clock(config.clock)
    adam_iters = int(round(config.adam_fraction * config.max_iters))
    adam_state = AdamState(learning_rate=config.learning_rate)
    lbfgs_state = LbfgsState()
    params = net.get_flat()
    best_mse = np.inf
    best_iter = 0
    best_params = params.copy()
    aborted = None

    tele_path = out / "telemetry.csv"
    with open(tele_path, "w", newline="") as tele:
        writer = csv.writer(tele)
        writer.writerow(TELEMETRY_COLUMNS)

        def log_row(i, bd, mse):
            writer.writerow([i, _fmt(clock.read()), _fmt(bd.total),
                             _fmt(bd.equation), _fmt(bd.penalty),
                             _fmt(bd.initial), _fmt(bd.max_element_loss),
                             bd.argmax_element, _fmt(mse)])
            tele.flush()

        for it in range(config.max_iters + 1):
            bd, grad, mse = eval_state()
            if not np.isfinite(bd.total) or not np.all(np.isfinite(grad)):
                aborted = (it, bd.argmax_element)
                log_row(it, bd, mse)
                break
            if it % config.log_every == 0 or it == config.max_iters:
                log_row(it, bd, mse)
            if callback is not None:
                callback(it, bd, mse, params)
            if mse < best_mse:
                best_mse, best_iter = mse, it
                best_params = params.copy()
            if it == config.max_iters:
                break
            if it < adam_iters:
                params = adam_step(params, grad, adam_state)
                net.set_flat(params)
            else:
                frozen = bd.selected

                def frozen_loss(vec):
                    net.set_flat(vec)
                    b, gr, _ = eval_state(selection=frozen)
                    return b.total, gr

                lbfgs_state.last_f, lbfgs_state.last_g = bd.total, grad
                params, f_new, _ = lbfgs_step(frozen_loss, params, lbfgs_state)
                net.set_flat(params)
                if not np.isfinite(f_new):
                    aborted = (it, bd.argmax_element)
                    break

    if aborted is not None:
        raise NumericalAbort(
            f"non-finite loss at iteration {aborted[0]} "
            f"(largest residual in element {aborted[1]}); "
            f"telemetry kept at {tele_path}")

    # artifacts from the best and final states
    save_checkpoint(net, out / "checkpoint_final.ckpt", seed=config.seed,
                    iteration=config.max_iters,
                    extra={"config": config.to_dict()})
    net.set_flat(best_params)
    save_checkpoint(net, out / "checkpoint_best.ckpt", seed=config.seed,
                    iteration=best_iter, extra={"config": config.to_dict()})
    grid_metrics = write_field_csv(out / "field.csv", problem, mesh, net)

    summary = {
        "problem": problem.name,
        "config": config.to_dict(),
        "iterations": config.max_iters,
        "wall_time_s": clock.read(),
        "best_mse": best_mse,
        "best_iteration": best_iter,
        "final_mse": grid_metrics.get("mse"),
        "final_mae": grid_metrics.get("mae"),
        "n_elements": n,
        "n_parameters": net.n_parameters(),
    }
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    return summary


def evaluate_net(net: PiecewiseNet, mesh, points: np.ndarray,
                 times: np.ndarray | None = None) -> np.ndarray:
    """Sample the piecewise field at arbitrary physical points.

    1D: points (n,), optional matching times (n,). 2D: points (n, 2).
    Each point is evaluated by the network of its containing element.
    """
    if isinstance(mesh, Mesh1D):
        x = np.asarray(points, dtype=float).ravel()
        owner = np.clip(np.searchsorted(mesh.nodes, x, side="right") - 1,
                        0, mesh.n_elements - 1)
        if times is not None:
            inputs = np.column_stack([x, np.asarray(times, dtype=float).ravel()])
        else:
            inputs = x[:, None]
    else:
        inputs = np.asarray(points, dtype=float).reshape(-1, 2)
        owner = locate_points(mesh, inputs)
        if np.any(owner < 0):
            raise ValueError("points outside the mesh")
    out = np.empty(len(inputs))
    for i in np.unique(owner):
        sel = owner == i
        sub = PiecewiseNet(1, net.arch, [w[i:i + 1] for w in net.weights],
                           [b[i:i + 1] for b in net.biases])
        vals, _ = forward(sub, inputs[sel][None, :, :])
        out[sel] = vals[0]
    return out


def write_field_csv(path, problem, mesh, net) -> dict:
    """Prediction on the documented grid with reference and error columns.

    Returns the grid metrics ({} when the problem has no reference).
    """
    grid, mask = problem.evaluation_grid()
    if problem.dimension == 2:
        inside = polygon_mask(problem.polygon, grid)
        # keep strictly interior points so element lookup cannot fall off
        # the mesh boundary through rounding
        shrunk = problem.polygon.mean(axis=0) + 0.999 * (
            grid - problem.polygon.mean(axis=0))
        inside &= locate_points(mesh, shrunk) >= 0
        pts = grid[inside]
        pred = evaluate_net(net, mesh, pts)
        ref = problem.reference(pts) if problem.reference else None
        cols = {"x": pts[:, 0], "y": pts[:, 1], "u_pred": pred}
        sel_mask = None
    elif problem.time_dependent:
        flat = grid.reshape(-1, 2)
        pred = evaluate_net(net, mesh, flat[:, 0], flat[:, 1])
        ref = problem.reference(flat[:, 0], flat[:, 1])
        cols = {"x": flat[:, 0], "t": flat[:, 1], "u_pred": pred}
        sel_mask = None if mask is None else mask.ravel()
    else:
        pred = evaluate_net(net, mesh, grid)
        ref = problem.reference(grid) if problem.reference else None
        cols = {"x": grid, "u_pred": pred}
        sel_mask = None
    metrics = {}
    if ref is not None:
        cols["u_ref"] = ref
        cols["abs_err"] = np.abs(pred - ref)
        metrics = evaluate_metrics(pred, ref, np.arange(len(pred)),
                                   mask=sel_mask)
        if sel_mask is not None:
            band = evaluate_metrics(pred, ref, np.arange(len(pred)),
                                    mask=~sel_mask)
            metrics["shock_band_mse"] = band["mse"]
            metrics["shock_band_mae"] = band["mae"]
    names = list(cols)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names)
        for row in zip(*(cols[c] for c in names)):
            w.writerow([_fmt(v) for v in row])
    return metrics


def run_ablation(base: RunConfig, sweep: dict[str, list], out_path) -> list[dict]:
    """Grid sweep; one row per combination, failures recorded per row."""
    if not sweep:
        combos = [()]
        keys = []
    else:
        keys = sorted(sweep)
        combos = list(itertools.product(*(sweep[k] for k in keys)))
    rows = []
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    from dataclasses import replace

    for idx, combo in enumerate(combos):
        updates = dict(zip(keys, combo))
        cfg = replace(base, **updates,
                      output_dir=str(Path(base.output_dir) / f"row_{idx:03d}"))
        row = dict(updates)
        t0 = time.perf_counter()
        try:
            summary = run_training(cfg)
            row.update(status="ok", mse=summary["final_mse"],
                       mae=summary["final_mae"],
                       wall_time_s=time.perf_counter() - t0,
                       elements=summary["n_elements"])
        except Exception as err:  # keep sweeping; the row records the failure
            row.update(status=f"error: {err.__class__.__name__}", mse="",
                       mae="", wall_time_s=time.perf_counter() - t0,
                       elements="")
        rows.append(row)
    names = keys + ["elements", "mse", "mae", "wall_time_s", "status"]
    with open(out_path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=names)
        w.writeheader()
        w.writerows(rows)
    return rows


def evaluate_checkpoint(checkpoint_path, output_dir) -> dict:
    """Sample a stored net on its problem's grid; metrics vs the reference."""
    net, header = load_checkpoint(checkpoint_path)
    if "config" not in header:
        raise ValueError("checkpoint carries no run configuration")
    config = RunConfig(**header["config"])
    problem, mesh, cache, fresh = build_run(config)
    expected = [tuple(w.shape) for w in fresh.weights]
    got = [tuple(w.shape) for w in net.weights]
    if expected != got:
        raise ValueError(
            f"architecture mismatch: checkpoint {got} vs problem {expected}")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = write_field_csv(out / "field.csv", problem, mesh, net)
    metrics["iteration"] = header.get("iteration", 0)
    with open(out / "metrics.json", "w") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
    return metrics
