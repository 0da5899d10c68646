"""Command-line interface.

Subcommands: mesh (generate/export), oracle (interior-penalty DG reference
field), reference (problem reference field), train, ablate, eval. Exit
codes: 0 success, 2 configuration error, 3 numerical abort, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from dgnn.config import ConfigError, load_config
from dgnn.ipdg import IpdgConfig, evaluate as ipdg_evaluate, solve_poisson
from dgnn.mesh import regular_pentagon, triangulate_polygon, write_mesh
from dgnn.problems import polygon_mask
from dgnn.train import NumericalAbort, evaluate_checkpoint, make_problem, run_ablation, run_training

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_POLYGONS = {
    "pentagon": regular_pentagon,
    "square": lambda: np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
}


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path, names, columns):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def cmd_mesh(args) -> int:
    if args.polygon not in _POLYGONS:
        raise ConfigError(f"unknown polygon {args.polygon!r}; "
                          f"choose from {sorted(_POLYGONS)}")
    mesh = triangulate_polygon(_POLYGONS[args.polygon](), args.s_min)
    write_mesh(mesh, args.out)
    areas = mesh.areas()
    summary = {
        "elements": mesh.n_elements,
        "vertices": len(mesh.vertices),
        "min_area": float(areas.min()),
        "max_area": float(areas.max()),
        "interior_edges": len(mesh.interior_edges()),
        "boundary_edges": len(mesh.boundary_edges()),
    }
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.summary:
        with open(args.summary, "w") as f:
            f.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    poly = _POLYGONS[args.polygon]()
    mesh = triangulate_polygon(poly, args.s_min / args.refine)
    sol = solve_poisson(mesh, IpdgConfig(degree=args.degree),
                        f=lambda x: np.full(len(x), args.source),
                        g=lambda x: np.zeros(len(x)))
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    xs = np.linspace(lo[0], hi[0], args.grid)
    ys = np.linspace(lo[1], hi[1], args.grid)
    grid = np.array([[x, y] for x in xs for y in ys])
    center = poly.mean(axis=0)
    inside = polygon_mask(poly, center + 0.999 * (grid - center))
    pts = grid[inside]
    vals = ipdg_evaluate(sol, center + 0.999 * (pts - center))
    _write_csv(args.out, ["x", "y", "u"], [pts[:, 0], pts[:, 1], vals])
    print(f"oracle field written to {args.out} "
          f"({len(pts)} points, {mesh.n_elements} elements, k={args.degree})")
    return EXIT_OK


def cmd_reference(args) -> int:
    config = load_config(args.config, args.set or [])
    problem = make_problem(config)
    grid, _ = problem.evaluation_grid()
    if problem.dimension == 2:
        inside = polygon_mask(problem.polygon, grid)
        pts = grid[inside]
        vals = problem.reference(pts)
        _write_csv(args.out, ["x", "y", "u"], [pts[:, 0], pts[:, 1], vals])
    elif problem.time_dependent:
        flat = grid.reshape(-1, 2)
        vals = problem.reference(flat[:, 0], flat[:, 1])
        _write_csv(args.out, ["x", "t", "u"], [flat[:, 0], flat[:, 1], vals])
    else:
        vals = problem.reference(grid)
        _write_csv(args.out, ["x", "u"], [grid, vals])
    print(f"reference field for {problem.name} written to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config, args.set or [])
    summary = run_training(config)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_ablate(args) -> int:
    config = load_config(args.config, args.set or [])
    sweep = {}
    for item in args.sweep or []:
        if "=" not in item:
            raise ConfigError(f"sweep {item!r} is not key=v1,v2,...")
        key, raw = item.split("=", 1)
        values = []
        for tok in raw.split(","):
            try:
                values.append(int(tok) if tok.strip().isdigit() else float(tok))
            except ValueError as err:
                raise ConfigError(f"bad sweep value {tok!r}") from err
        sweep[key.strip()] = values
    rows = run_ablation(config, sweep, args.out)
    print(f"{len(rows)} rows written to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    metrics = evaluate_checkpoint(args.checkpoint, args.out)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dgnn",
        description="piecewise neural-network PDE solver with weak-form training")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="triangulate a domain and export it")
    p.add_argument("--polygon", default="pentagon", help="pentagon | square")
    p.add_argument("--s-min", type=float, default=0.05, dest="s_min")
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="also write the JSON summary here")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("oracle", help="classical DG reference field to CSV")
    p.add_argument("--polygon", default="pentagon")
    p.add_argument("--s-min", type=float, default=0.05, dest="s_min")
    p.add_argument("--refine", type=int, default=4,
                   help="oracle mesh refinement factor beyond s-min")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--source", type=float, default=10.0)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("reference", help="problem reference field to CSV")
    p.add_argument("--config", help="run config JSON (problem selection)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("train", help="run one training configuration")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="grid sweep over config values")
    p.add_argument("--config", help="base config JSON")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--sweep", action="append", metavar="KEY=V1,V2,...")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("eval", help="evaluate a checkpoint on its grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_CONFIG if err.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, IOError) as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
