"""Command-line entry point: run, ensemble, verify, pressure-check,
gronwall.

Exit codes: 0 success, 1 validation failure, 2 runtime error.  Every error
path emits a single machine-parsable line `error: ...` on standard error.
Outputs are fully determined by (argv, config, seed): no timestamps, fixed
float formatting.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import subprocess
import sys

import numpy as np

from .config import ConfigError, parse_config
from .diagnostics import records_to_csv
from .grid import GridSpec, make_grid
from .operators import PhysParams
from .pressure import SolverError
from .snapshot import write_snapshot
from .stepping import run_trajectory


def _git_hash():
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"],
                             capture_output=True, text=True, timeout=10,
                             cwd=os.path.dirname(os.path.abspath(__file__)))
        if out.returncode == 0:
            return out.stdout.strip()
    except Exception:
        pass
    return "unknown"


def _write_run_outputs(out_dir, config_text, config, result):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.toml"), "w") as fh:
        fh.write(config_text)
    with open(os.path.join(out_dir, "diagnostics.csv"), "w") as fh:
        fh.write(records_to_csv(result.records))
    manifest = {
        "seed": config.seed,
        "mode": config.mode,
        "steps": config.steps,
        "git_hash": _git_hash(),
        "stopped_early": result.stopped_early,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_one(config, config_text, out_dir):
    grid = make_grid(config.grid)
    snap_dir = os.path.join(out_dir, "snapshots")
    sink = None
    if config.snapshot_cadence:
        os.makedirs(snap_dir, exist_ok=True)

        def sink(step, state):
            path = os.path.join(snap_dir, f"step_{step:08d}.hsnap")
            write_snapshot(path, grid, {"u": state.u, "v": state.v,
                                        "T": state.T, "S": state.S})

    result = run_trajectory(config, snapshot_sink=sink)
    _write_run_outputs(out_dir, config_text, config, result)
    return result


def cmd_run(args):
    config = parse_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.mode is not None:
        config.mode = args.mode
        config.validate()
    with open(args.config) as fh:
        text = fh.read()
    _run_one(config, text, args.out)
    return 0


def cmd_ensemble(args):
    if args.runs < 1:
        raise ConfigError("invalid-value: --runs must be >= 1")
    config = parse_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.mode is not None:
        config.mode = args.mode
        config.validate()
    with open(args.config) as fh:
        text = fh.read()
    base = config.seed
    seeds = list(range(base, base + args.runs))
    workers = max(1, int(os.environ.get("HSTO_THREADS", "1")))

    def one(seed):
        cfg = dataclasses.replace(config, seed=seed)
        return _run_one(cfg, text, os.path.join(args.out, f"run_{seed:06d}"))

    if workers > 1 and args.runs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_ensemble_worker,
                          [(args.config, args.mode, seed, args.out)
                           for seed in seeds]))
    else:
        for seed in seeds:
            one(seed)
    return 0


def _ensemble_worker(job):
    config_path, mode, seed, out = job
    config = parse_config(config_path)
    config.seed = seed
    if mode is not None:
        config.mode = mode
        config.validate()
    with open(config_path) as fh:
        text = fh.read()
    _run_one(config, text, os.path.join(out, f"run_{seed:06d}"))


def _verify_grid(n):
    return GridSpec(1.0, 1.0, 1.0, n, n, max(4, n // 2))


def cmd_verify(args):
    """Inequality battery at one resolution; writes one CSV per check."""
    from . import analysis
    from .synthetic import random_state, random_velocity
    grid = make_grid(_verify_grid(args.grid))
    params = PhysParams(mu_v=0.05, nu_v=0.05, mu_t=0.05, nu_t=0.05,
                        mu_s=0.05, nu_s=0.05)
    rng = np.random.default_rng(args.seed or 0)
    os.makedirs(args.out, exist_ok=True)

    pairs = [random_velocity(grid, rng) for _ in range(args.samples)]
    emb = analysis.verify_aniso_embedding(pairs, 12, params, grid)
    with open(os.path.join(args.out, f"embedding_n{grid.n1}.csv"), "w") as fh:
        fh.write(emb.csv())

    triples = [tuple(random_state(grid, rng) for _ in range(3))
               for _ in range(args.samples)]
    bb = analysis.verify_B_bound(triples, params, grid)
    with open(os.path.join(args.out, f"transport_n{grid.n1}.csv"), "w") as fh:
        fh.write(bb.csv())

    rows = ["case_id,lhs,rhs,ok"]
    ok_all = True
    for i in range(args.samples):
        u, v = random_velocity(grid, rng)
        lhs, rhs = analysis.verify_dissipation(u, v, params, grid)
        ok = lhs <= rhs * (1 + 1e-12)
        ok_all &= ok
        rows.append(f"{i},{lhs:.17g},{rhs:.17g},{int(ok)}")
    with open(os.path.join(args.out, f"dissipation_n{grid.n1}.csv"),
              "w") as fh:
        fh.write("\n".join(rows) + "\n")

    print(f"embedding max ratio {emb.max_ratio:.6g} "
          f"(skipped {emb.skipped}); transport max ratio "
          f"{bb.max_ratio:.6g}; dissipation ok={ok_all}")
    return 0 if ok_all else 2


def cmd_pressure_check(args):
    from .pressure import stokes_pressure_check, stokes_report_csv
    from .synthetic import surface_mode
    n = args.grid
    grid = make_grid(GridSpec(1.0, 1.0, 1.0, n, n, 4))
    rng = np.random.default_rng(args.seed or 0)
    family = []
    for _ in range(args.samples):
        coeffs = [(int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                   float(rng.normal()), float(rng.uniform(0.5, 3.0)))
                  for _ in range(3)]

        def f_of_t(t, coeffs=coeffs):
            fx = grid.zeros_surface()
            fy = grid.zeros_surface()
            for i1, i2, a, om in coeffs:
                sh = surface_mode(grid, i1, i2)
                fx += a * np.cos(om * t) * sh
                fy -= a * np.sin(om * t) * sh
            return fx, fy

        family.append(f_of_t)
    cases = stokes_pressure_check(family, nu=0.1, r=4.0 / 3.0, horizon=1.0,
                                  grid=grid)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, f"stokes_n{n}.csv"), "w") as fh:
        fh.write(stokes_report_csv(cases))
    print(f"max ratio {max(c.ratio for c in cases):.6g} over "
          f"{len(cases)} cases at N={n}")
    return 0


def cmd_gronwall(args):
    from .analysis import generate_gronwall_instance, gronwall_bound
    rng = np.random.default_rng(args.seed or 0)
    failures = 0
    worst = 0.0
    for _ in range(args.samples):
        inp = generate_gronwall_instance(rng)
        res = gronwall_bound(inp)
        sup_x = float(inp.X.max())
        worst = max(worst, sup_x / res.bound if res.bound > 0 else 0.0)
        if sup_x > res.bound:
            failures += 1
    print(f"{args.samples - failures}/{args.samples} bounds hold; "
          f"worst sup X / bound = {worst:.6g}")
    return 0 if failures == 0 else 2


def build_parser():
    p = argparse.ArgumentParser(prog="hsto")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=False):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        if config:
            sp.add_argument("--config", required=True)
            sp.add_argument("--mode",
                            choices=["direct", "split", "both"],
                            default=None)

    sp = sub.add_parser("run", help="integrate one trajectory")
    common(sp, config=True)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("ensemble", help="fan out seeds")
    common(sp, config=True)
    sp.add_argument("--runs", type=int, required=True)
    sp.set_defaults(fn=cmd_ensemble)

    sp = sub.add_parser("verify", help="inequality battery")
    common(sp)
    sp.add_argument("--grid", type=int, default=16)
    sp.add_argument("--samples", type=int, default=100)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("pressure-check", help="Stokes pressure estimate")
    common(sp)
    sp.add_argument("--grid", type=int, default=16)
    sp.add_argument("--samples", type=int, default=20)
    sp.set_defaults(fn=cmd_pressure_check)

    sp = sub.add_parser("gronwall", help="constructive Gronwall suite")
    common(sp)
    sp.add_argument("--samples", type=int, default=1000)
    sp.set_defaults(fn=cmd_gronwall)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (SolverError, FloatingPointError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
