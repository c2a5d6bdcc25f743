"""Configuration-driven command line front door.

    mfgraph <command> --config problem.json [--out DIR] [--threads K]
                      [--quiet] [--plot]

Commands: validate, flow, wasserstein, mfg, twopoint, master, run (take the
command from the config file). Outputs land in the output directory as
<stem>.csv, <stem>.summary.json, and on failure <stem>.error.json; --plot
additionally renders <stem>.png next to the data files. Exit codes: 0 ok,
2 configuration error, 3 solver non-convergence (outputs still written with
converged = false), 4 numerical-domain error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import flows as flows_mod
from . import master as master_mod
from . import mfg as mfg_mod
from . import twopoint as tp_mod
from .activation import PSI_QUADRATIC
from .config import COMMANDS, parse_config
from .errors import MFGraphError, NonConvergence, SchemaError
from .graph import spectral_gap

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_NUMERIC = 4


def _fmt(x):
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


class _Paths:
    def __init__(self, cfg, out_override):
        out_dir = Path(out_override or cfg.output.get("dir", "."))
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = cfg.output.get("stem", "run")
        self.csv = out_dir / f"{stem}.csv"
        self.summary = out_dir / f"{stem}.summary.json"
        self.error = out_dir / f"{stem}.error.json"
        self.figure = out_dir / f"{stem}.png"
        self.failures = out_dir / f"{stem}.failures.json"


def _run_validate(cfg, paths, opts):
    g = cfg.build_graph()
    db = g.q * g.pi[:, None] - g.q.T * g.pi[None, :]
    np.fill_diagonal(db, 0.0)
    summary = {
        "states": g.n,
        "pi": g.pi,
        "edges": [[int(i), int(j)] for i, j in g.edges],
        "omega": g.edge_w,
        "detailed_balance_residual": float(np.max(np.abs(db))),
        "spectral_gap": spectral_gap(g),
    }
    _write_json(paths.summary, summary)
    if not opts.quiet:
        print("pi =", np.array2string(g.pi, precision=12))
        for (i, j), w in zip(g.edges, g.edge_w):
            print(f"omega[{i},{j}] = {_fmt(w)}")
    return EXIT_OK


def _run_flow(cfg, paths, opts):
    g = cfg.build_graph()
    act = cfg.build_activation()
    t0, t1 = cfg.problem["horizon"]
    p0 = np.array(cfg.problem["initial_density"], dtype=float)
    if act.psi_star is not None and act.psi_star is not PSI_QUADRATIC:
        traj = flows_mod.integrate_generalized(
            g, act, act.phi, act.psi_star, p0, t1 - t0, cfg.dt
        )
    else:
        traj = flows_mod.integrate_onsager(g, act, act.phi, p0, t1 - t0, cfg.dt)
    header = ["t"] + [f"p_{i + 1}" for i in range(g.n)] + ["dissipation"]
    rows = [
        [t0 + t, *traj.densities[k], traj.dissipation[k]] for k, t in enumerate(traj.times)
    ]
    _write_csv(paths.csv, header, rows)
    _write_json(
        paths.summary,
        {
            "converged": True,
            "final_density": traj.densities[-1],
            "final_dissipation": float(traj.dissipation[-1]),
            "mass_error": float(abs(traj.densities[-1].sum() - 1.0)),
            "steps": len(traj.times) - 1,
        },
    )
    if opts.plot:
        from . import plotting

        plotting.save_density_trajectory(
            paths.figure, t0 + traj.times, traj.densities, traj.dissipation
        )
    return EXIT_OK


def _reduced_problem(cfg):
    return tp_mod.reduce(cfg.build_problem())


def _run_wasserstein(cfg, paths, opts):
    tp = _reduced_problem(cfg)
    alpha = float(cfg.problem["lagrangian"]["alpha"])
    p0 = float(cfg.twopoint["p0"])
    p1 = float(cfg.twopoint["p1"])
    w = tp_mod.wasserstein_alpha(tp, p0, p1, alpha)
    _write_json(
        paths.summary,
        {"converged": True, "W_alpha": w, "alpha": alpha, "p0": p0, "p1": p1},
    )
    if not opts.quiet:
        print(f"W_{alpha:g}({p0:g}, {p1:g}) = {_fmt(w)}")
    return EXIT_OK


def _traj_csv(paths, t_offset, traj):
    header = ["s", "x", "y", "hamiltonian"]
    rows = [
        [t_offset + traj.times[k], traj.x[k], traj.y[k], traj.hamiltonian[k]]
        for k in range(len(traj.times))
    ]
    _write_csv(paths.csv, header, rows)


def _run_twopoint(cfg, paths, opts):
    tp = _reduced_problem(cfg)
    mode = cfg.twopoint["mode"]
    t0, t1 = cfg.problem["horizon"]
    if mode == "wasserstein":
        return _run_wasserstein(cfg, paths, opts)
    if mode == "planning":
        p0 = float(cfg.twopoint["p0"])
        p1 = float(cfg.twopoint["p1"])
        sol = tp_mod.solve_planning(tp, p0, p1, t1 - t0, tol=cfg.tol)
        summary = {
            "converged": True,
            "H0": sol.h0,
            "iterations": sol.iterations,
            "terminal_x": float(sol.trajectory.x[-1]),
        }
        traj = sol.trajectory
    else:
        p0 = float(cfg.twopoint["p0"])
        sol = tp_mod.solve_potential_game(tp, p0, t1 - t0, tol=cfg.tol)
        summary = {
            "converged": True,
            "x_T": sol.x_terminal,
            "H0": sol.h0,
            "iterations": sol.iterations,
            "residuals": list(sol.residuals),
            "note": sol.note,
        }
        traj = sol.trajectory
    _traj_csv(paths, t0, traj)
    _write_json(paths.summary, summary)
    if opts.plot:
        from . import plotting

        plotting.save_reduced_trajectory(paths.figure, traj, title=mode)
    return EXIT_OK


def _run_mfg(cfg, paths, opts):
    prob = cfg.build_problem()
    method = cfg.method
    if method == "auto":
        method = "convex" if prob.is_potential else "fixedpoint"
    try:
        if method == "convex":
            sol = mfg_mod.solve_potential_convex(prob, cfg.n_t, tol=cfg.tol)
        else:
            sol = mfg_mod.solve_mfg_fixedpoint(
                prob, cfg.n_t, damping=cfg.damping, tol=cfg.tol
            )
        code = EXIT_OK
    except NonConvergence as exc:
        if exc.solution is None:
            raise
        sol = exc.solution
        code = EXIT_NONCONVERGENCE
    _write_mfg_outputs(prob, sol, paths, opts)
    return code


def _write_mfg_outputs(prob, sol, paths, opts):
    n = prob.graph.n
    header = (
        ["t"]
        + [f"p_{i + 1}" for i in range(n)]
        + [f"phi_{i + 1}" for i in range(n)]
        + ["hamiltonian"]
    )
    trace = sol.hamiltonian_trace
    rows = []
    for k, t in enumerate(sol.times):
        ham = trace[k] if trace is not None else float("nan")
        rows.append([t, *sol.p[k], *sol.phi[k], ham])
    _write_csv(paths.csv, header, rows)
    r_p, r_phi = mfg_mod.euler_lagrange_residual(prob, sol)
    _write_json(
        paths.summary,
        {
            "converged": bool(sol.diagnostics.get("converged", True)),
            "method": sol.diagnostics.get("method"),
            "iterations": sol.diagnostics.get("iterations"),
            "solver_residual": sol.diagnostics.get("residual"),
            "value": sol.value,
            "continuity_residual": r_p,
            "adjoint_residual": r_phi,
        },
    )
    if opts.plot:
        from . import plotting

        plotting.save_mfg_solution(paths.figure, sol.times, sol.p, sol.phi, trace)


def _run_master(cfg, paths, opts):
    tp = _reduced_problem(cfg)
    t0, t1 = cfg.problem["horizon"]
    grid = cfg.grid
    x_grid = np.linspace(grid["margin"], 1.0 - grid["margin"], grid["n_x"])
    t_grid = np.linspace(t0, t1, grid["n_t"])
    fld = master_mod.reduced_master_grid(
        tp, x_grid, t_grid, tol=cfg.tol, threads=opts.threads
    )
    rows = []
    for it, t in enumerate(fld.t_grid):
        for ix, x in enumerate(fld.x_grid):
            rows.append([t, x, fld.w[it, ix]])
    _write_csv(paths.csv, ["t", "x", "w"], rows)
    _write_json(
        paths.failures,
        {f"{it},{ix}": msg for (it, ix), msg in sorted(fld.failures.items())},
    )
    _write_json(
        paths.summary,
        {
            "converged": len(fld.failures) == 0,
            "n_nodes": int(fld.w.size),
            "n_failures": len(fld.failures),
            "pde_residual": master_mod.master_pde_residual(tp, fld),
        },
    )
    if opts.plot:
        from . import plotting

        plotting.save_master_field(paths.figure, fld)
    return EXIT_OK


_RUNNERS = {
    "validate": _run_validate,
    "flow": _run_flow,
    "wasserstein": _run_wasserstein,
    "twopoint": _run_twopoint,
    "mfg": _run_mfg,
    "master": _run_master,
}


def run(cfg, opts):
    """Dispatch a validated config; returns the process exit code."""
    return _RUNNERS[cfg.command](cfg, _Paths(cfg, opts.out), opts)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mfgraph",
        description="Finite-state mean field games on reversible-chain graphs.",
    )
    sub = parser.add_subparsers(dest="cli_command", required=True)
    for name in COMMANDS + ("run",):
        p = sub.add_parser(name, help=f"{name} (command from config when 'run')")
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for grid fills")
        p.add_argument("--quiet", action="store_true", help="suppress stdout chatter")
        p.add_argument("--plot", action="store_true", help="render figures next to the data files")
    opts = parser.parse_args(argv)

    try:
        text = Path(opts.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        raw = json.loads(text)
        if opts.cli_command != "run" and isinstance(raw, dict):
            raw["command"] = opts.cli_command
        cfg = parse_config(json.dumps(raw))
    except SchemaError as exc:
        for ptr, msg in exc.problems:
            print(f"config error at {ptr or '/'}: {msg}", file=sys.stderr)
        return EXIT_CONFIG

    paths = _Paths(cfg, opts.out)
    try:
        return run(cfg, opts)
    except NonConvergence as exc:
        _write_json(
            paths.error,
            {
                "error": type(exc).__name__,
                "message": str(exc),
                "residual": exc.residual,
                "iterations": exc.iterations,
            },
        )
        if not opts.quiet:
            print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except MFGraphError as exc:
        _write_json(paths.error, {"error": type(exc).__name__, "message": str(exc)})
        if not opts.quiet:
            print(f"numerical-domain error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
