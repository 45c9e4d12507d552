"""Command line entry point: ``dnfeq {equilibrium,simulate,sweep,verify} CONFIG``.

Exit codes: 0 success, 1 configuration or model error, 2 solver
non-convergence (or a failed ``verify`` check), 3 trajectory blow-up.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, checks, output
from .config import SWEEPABLE, load
from .errors import ConfigError, DnfError, NonConvergence, NonFiniteState
from .simulate import simulate
from .solver import estimate_contraction, solve_fixed_point, solve_pi_equilibrium, verify_equilibrium

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_BLOWUP = 0, 1, 2, 3


class _Run:
    def __init__(self, args):
        self.args = args
        self.quiet = args.quiet
        self.out = Path(args.out)

    def say(self, *msg):
        if not self.quiet:
            print(*msg)

    def outdir(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out


def _equilibrium(run, cfg, model, opts):
    """Solve and write equilibrium files; returns (z*, y1* or None, converged, files)."""
    out = run.outdir()
    if model.controller.integral:
        try:
            pi = solve_pi_equilibrium(model, opts)
        except NonConvergence as e:
            pi = e.result
        rows = (list(model.domain.nodes[a]) + [pi.z1_star[a], pi.z2_star[a], pi.y1_star[a]]
                for a in range(model.size))
        eq = output.write_rows(out / "equilibrium.csv",
                               output.coordinate_columns(model.domain) + ["z1", "z2", "y1"], rows)
        summary = [
            ("mode", "prop_int"), ("converged", pi.converged), ("iterations", pi.iterations),
            ("residual_z2", pi.residual_z2), ("stationarity_residual", pi.stationarity),
            ("z1_equals_z_ref", bool(np.array_equal(pi.z1_star, model.z_ref))),
        ]
        sm = output.write_summary(out / "summary.csv", summary)
        run.say(f"PI equilibrium: converged={pi.converged} stationarity={pi.stationarity:.3e}")
        return np.stack([pi.z1_star, pi.z2_star]), pi.y1_star, pi.converged, [eq, sm]

    res = solve_fixed_point(model, opts)
    rep = verify_equilibrium(res.z_star, model)
    lip = estimate_contraction(model, opts, center=res.x_star)
    eq = output.write_equilibrium(out / "equilibrium.csv", model.domain, res.x_star, res.z_star)
    lg = output.write_log(out / "iterations.csv", res.log)
    summary = [
        ("mode", model.controller.mode),
        ("converged", res.converged),
        ("iterations", res.iterations),
        ("residual_Tcal", res.residual_Tcal),
        ("residual_T", res.residual_T),
        ("residual_T_max_abs", rep.max_abs),
        ("pair_norm_x", model.domain.pair_norm(res.x_star)),
        ("pair_norm_z", model.domain.pair_norm(res.z_star)),
        ("a_priori_bound", res.a_priori_bound),
        ("within_bound", res.within_bound),
        ("contraction_estimate", lip),
        ("contraction_note", "empirical, non-certifying" + (
            "; below 1 so a unique fixed point is plausible" if lip < 1 else "")),
        ("existence_not_guaranteed", model.existence_not_guaranteed),
        ("warnings", "; ".join(res.warnings)),
    ]
    sm = output.write_summary(out / "summary.csv", summary)
    run.say(f"equilibrium: converged={res.converged} iterations={res.iterations} "
            f"residual_T={res.residual_T:.3e} within_bound={res.within_bound}")
    for w in res.warnings:
        run.say(f"warning: {w}")
    return res.z_star, None, res.converged, [eq, lg, sm]


def cmd_equilibrium(args) -> int:
    run = _Run(args)
    cfg = load(args.config)
    model = cfg.build_model()
    opts = cfg.solver_options(args.seed)
    _, _, ok, files = _equilibrium(run, cfg, model, opts)
    output.write_manifest(run.out, "equilibrium", cfg, opts.seed, __version__, files)
    return EXIT_OK if ok else EXIT_NONCONVERGENCE


def cmd_simulate(args) -> int:
    run = _Run(args)
    cfg = load(args.config)
    model = cfg.build_model()
    opts = cfg.solver_options(args.seed)
    sim = cfg.simulation()
    files, status = [], EXIT_OK
    reference, y0 = None, None
    if args.from_equilibrium:
        start, y0, ok, files = _equilibrium(run, cfg, model, opts)
        reference = start.copy()
        if not ok:
            status = EXIT_NONCONVERGENCE
    elif args.prehistory:
        start = output.read_pair(args.prehistory)
        if start.shape != (2, model.size):
            raise ConfigError(f"{args.prehistory}: expected {model.size} rows, got {start.shape[1]}")
    else:
        from .config import field_values

        start = np.stack([field_values(model.domain, sim["prehistory_1"]),
                          field_values(model.domain, sim["prehistory_2"])])
    if args.perturb:
        rng = np.random.default_rng(opts.seed)
        d = rng.standard_normal(start.shape)
        start = start + args.perturb * d / model.domain.pair_norm(d)
    out = run.outdir()
    try:
        result = simulate(model, start, t_end=sim["t_end"], dt=sim["dt"], method=sim["method"],
                          stride=sim["stride"], reference=reference, y0=y0)
    except NonFiniteState as e:
        result = e.result
        status = EXIT_BLOWUP
        run.say(f"blow-up: {e}")
    files.append(output.write_trajectory(out / "trajectory.csv", result))
    output.write_manifest(out, "simulate", cfg, opts.seed, __version__, files)
    if reference is not None and result.distance.size:
        run.say(f"max distance to equilibrium: {np.nanmax(result.distance):.3e}")
    run.say(f"simulated to t={result.times[-1]:g} ({len(result.times)} samples)")
    return status


def cmd_sweep(args) -> int:
    run = _Run(args)
    if args.param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {args.param!r}; choose from {list(SWEEPABLE)}")
    cfg = load(args.config)
    rows, all_ok = [], True
    for text in args.values.split(","):
        c = cfg.with_value(args.param, text.strip())
        model = c.build_model()
        res = solve_fixed_point(model, c.solver_options(args.seed))
        all_ok &= res.converged
        rows.append((c.get(args.param), res.converged, res.residual_T,
                     model.domain.pair_norm(res.z_star), res.iterations))
        run.say(f"{args.param}={text.strip()}: converged={res.converged} "
                f"residual_T={res.residual_T:.3e}")
    out = run.outdir()
    sw = output.write_rows(out / "sweep.csv",
                           ["value", "converged", "residual_T", "pair_norm_z", "iterations"], rows)
    seed = cfg.solver_options(args.seed).seed
    output.write_manifest(out, f"sweep {args.param}", cfg, seed, __version__, [sw])
    return EXIT_OK if all_ok else EXIT_NONCONVERGENCE


def cmd_verify(args) -> int:
    run = _Run(args)
    cfg = load(args.config)
    model = cfg.build_model()
    opts = cfg.solver_options(args.seed)
    results = checks.run_all(model, opts, opts.seed)
    width = max(len(c.name) for c in results)
    for c in results:
        run.say(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}")
    if args.out_given:
        out = run.outdir()
        vf = output.write_rows(out / "verify.csv", ["check", "passed", "detail"],
                               [(c.name, c.passed, c.detail) for c in results])
        output.write_manifest(out, "verify", cfg, opts.seed, __version__, [vf])
    return EXIT_OK if all(c.passed for c in results) else EXIT_NONCONVERGENCE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="scenario file")
    common.add_argument("--out", default=None, help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, default=None, help="override solver.seed")
    common.add_argument("--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="dnfeq", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dnfeq {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("equilibrium", parents=[common], help="solve for a closed-loop equilibrium")
    e.set_defaults(func=cmd_equilibrium)

    s = sub.add_parser("simulate", parents=[common], help="integrate the delayed closed loop")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--from-equilibrium", action="store_true",
                     help="solve first and start from the equilibrium")
    src.add_argument("--prehistory", metavar="FILE",
                     help="CSV with z1, z2 columns used as constant prehistory")
    s.add_argument("--perturb", type=float, default=0.0, metavar="EPS",
                   help="add a seeded random perturbation of L2 norm EPS")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", parents=[common], help="solve over a list of parameter values")
    w.add_argument("--param", required=True, help=f"one of {', '.join(SWEEPABLE)}")
    w.add_argument("--values", required=True, help="comma-separated values")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", parents=[common], help="run the invariant checks")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.out_given = args.out is not None
    if args.out is None:
        args.out = "out"
    try:
        return args.func(args)
    except DnfError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
