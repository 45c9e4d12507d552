"""Acceptance criteria, each at its stated tolerance.

A session fixture runs criteria 1-11 once, writing every artefact to its
own directory; the tests then assert on the recorded outcomes. Criterion 12
repeats the whole run into a second directory and byte-compares the files.
One PASS/FAIL line per criterion is printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from dnfeq import (
    SolverOptions, apply_T, build_domain, distance_delay, estimate_contraction, linear,
    logistic, make_model, proportional, scenarios, simulate, solve_fixed_point,
    solve_linear_case, solve_pi_equilibrium,
)
from dnfeq import output
from dnfeq.cli import main
from dnfeq.errors import ReferenceUnreachable
from dnfeq.model import zero_delay
from dnfeq.solver import linear_operator
from oracles import homogeneous_equilibrium, range_flags, relax_closed_form, weighted_operator_norm

TIME_LIMIT = 60.0


class Outcome:
    def __init__(self):
        self.checks = []
        self.seconds = 0.0

    def check(self, ok, what):
        self.checks.append((bool(ok), what))

    @property
    def passed(self):
        return bool(self.checks) and all(ok for ok, _ in self.checks) and self.seconds < TIME_LIMIT

    def summary(self):
        bad = [w for ok, w in self.checks if not ok]
        tail = "; ".join(bad) if bad else self.checks[-1][1]
        return f"{tail} [{self.seconds:.1f}s]"


def _equilibrium_rows(dom, res):
    return ([*dom.nodes[a], res.x_star[0, a], res.x_star[1, a], res.z_star[0, a], res.z_star[1, a]]
            for a in range(dom.size))


def _write_result(path, dom, res):
    output.write_rows(path, output.coordinate_columns(dom) + ["x1", "x2", "z1", "z2"],
                      _equilibrium_rows(dom, res))


def criterion_1(out, solves):
    o = Outcome()
    cfg = scenarios.load("decoupled")
    m = cfg.build_model()
    res = solve_fixed_point(m, cfg.solver_options())
    solves.append((m, res, cfg.solver_options().tol_res))
    _write_result(out / "equilibrium.csv", m.domain, res)
    o.check(res.converged, "converged")
    o.check(res.iterations <= 2, f"iterations {res.iterations} <= 2")
    o.check(np.all(np.abs(res.z_star - 0.5) <= 1e-15), "z* == (0.5, 0.5)")
    o.check(res.residual_T <= 1e-10, f"residual_T {res.residual_T:.1e} <= 1e-10")
    return o


HOMOGENEOUS_C = [[0.8, -0.6], [0.7, -0.4]]


def criterion_2(out, solves):
    o = Outcome()
    dom = build_domain((0, 1), 101)
    S = logistic(1.0, 4.0, 0.5)
    rows = []
    for k in (0.0, 1.0, 10.0):
        m = make_model(dom, (S, S), tau=(1.0, 2.0), I_star=(0.1, -0.2), alpha=0.8, z_ref=0.4,
                       kernels={f"{i + 1}{j + 1}": HOMOGENEOUS_C[i][j]
                                for i in range(2) for j in range(2)},
                       controller=proportional(k))
        res = solve_fixed_point(m)
        solves.append((m, res, 1e-10))
        z1, z2, roots = homogeneous_equilibrium(S, S, HOMOGENEOUS_C, (0.1, -0.2), 0.8, 0.4, k)
        spread = float(np.ptp(res.z_star, axis=1).max())
        gap = float(max(np.abs(res.z_star[0] - z1).max(), np.abs(res.z_star[1] - z2).max()))
        rows.append((k, res.z_star[0, 0], res.z_star[1, 0], z1, z2, spread, gap))
        o.check(res.converged, f"k={k:g} converged")
        o.check(roots == 1, f"k={k:g} oracle root unique")
        o.check(spread <= 1e-9, f"k={k:g} spread {spread:.1e} <= 1e-9")
        o.check(gap <= 1e-8, f"k={k:g} oracle gap {gap:.1e} <= 1e-8")
    output.write_rows(out / "homogeneous.csv",
                      ["k", "z1_solver", "z2_solver", "z1_oracle", "z2_oracle", "spread", "gap"], rows)
    o.check(True, f"max oracle gap {max(r[-1] for r in rows):.1e}")
    return o


def criterion_3(out, solves):
    from dnfeq import apply_H, invert_H

    o = Outcome()
    m0 = scenarios.load("reference").build_model()
    rng = np.random.default_rng(2024)
    rows = []
    for k in (0.0, 0.5, 5.0, 50.0):
        m = m0.replace(controller=proportional(k))
        worst = 0.0
        for _ in range(100):
            v = 10 * rng.standard_normal((2, m.size))
            worst = max(worst, float(np.max(np.abs(apply_H(invert_H(v, m), m) - v))))
        rows.append((k, worst))
        o.check(worst <= 1e-9, f"k={k:g} max error {worst:.1e} <= 1e-9")
    output.write_rows(out / "round_trip.csv", ["k", "max_abs_error"], rows)
    return o


def criterion_4(out, solves):
    o = Outcome()
    rows = []
    for i, (m, res, tol) in enumerate(solves):
        if not res.converged:
            continue
        gap = m.domain.pair_norm(apply_T(res.z_star, m) - res.z_star)
        rows.append((i, gap, 10 * tol))
        o.check(gap <= 10 * tol, f"solve {i}: {gap:.1e} <= {10 * tol:.0e}")
    output.write_rows(out / "t_residuals.csv", ["solve", "residual_T", "limit"], rows)
    o.check(len(rows) > 0, f"{len(rows)} converged solves, worst {max(r[1] for r in rows):.1e}")
    return o


def criterion_5(out, solves):
    o = Outcome()
    cfg = scenarios.load("reference")
    rows = []
    for k in ("0", "1e-2", "1", "1e2", "1e4"):
        c = cfg.with_value("control.k", k)
        m = c.build_model()
        res = solve_fixed_point(m, c.solver_options())
        solves.append((m, res, c.solver_options().tol_res))
        rows.append((float(k), res.converged, res.within_bound, res.iterations, res.residual_T,
                     m.domain.pair_norm(res.x_star), res.a_priori_bound))
        o.check(res.converged and res.within_bound, f"k={k} converged={res.converged} "
                f"within_bound={res.within_bound}")
    output.write_rows(out / "gains.csv", ["k", "converged", "within_bound", "iterations",
                                          "residual_T", "pair_norm_x", "bound"], rows)
    o.check(True, "all gains converge inside the bound")
    return o


def criterion_6(out, solves):
    o = Outcome()
    cfg = scenarios.load("reference")
    m = cfg.build_model()
    opts = cfg.solver_options()
    z = zero_delay(m.domain)
    d = distance_delay(m.domain, 1.0, 2.0)
    a = solve_fixed_point(m.replace(delays=(z, z)), opts)
    b = solve_fixed_point(m.replace(delays=(d, d)), opts)
    solves.extend([(m, a, opts.tol_res), (m, b, opts.tol_res)])
    _write_result(out / "zero_delay.csv", m.domain, a)
    _write_result(out / "distance_delay.csv", m.domain, b)
    same = (np.array_equal(a.x_star, b.x_star) and np.array_equal(a.z_star, b.z_star)
            and a.log == b.log and a.iterations == b.iterations
            and a.residual_T == b.residual_T and a.residual_Tcal == b.residual_Tcal
            and a.a_priori_bound == b.a_priori_bound and a.warnings == b.warnings)
    o.check(same, "results bit-identical")
    o.check((out / "zero_delay.csv").read_bytes() == (out / "distance_delay.csv").read_bytes(),
            "written files byte-identical")
    return o


def criterion_7(out, solves):
    o = Outcome()
    code = main(["simulate", str(scenarios.path("reference")), "--from-equilibrium",
                 "--perturb", "0", "--out", str(out), "--quiet"])
    header, rows = output.read_rows(out / "trajectory.csv")
    col = header.index("distance_to_reference")
    dist = max(float(r[col]) for r in rows)
    t_end = float(rows[-1][0])
    o.check(code == 0, f"exit code {code}")
    o.check(t_end == 10.0, f"reached t={t_end:g}")
    o.check(dist <= 1e-5, f"max distance to z* {dist:.1e} <= 1e-5")
    return o


def criterion_8(out, solves):
    o = Outcome()
    m = scenarios.load("decoupled").build_model()
    x = m.domain.coords
    z0 = np.stack([np.cos(3 * x), 1.0 - 2.0 * x])
    t_end = 1.0
    exact = relax_closed_form(0.5, z0, t_end)
    rows = []
    for method, need in (("euler", 0.9), ("heun", 1.8)):
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            sim = simulate(m, z0, t_end=t_end, dt=dt, method=method, stride=10**6)
            errs.append(float(np.max(np.abs(sim.z[-1] - exact))))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        rows += [(method, dt, e) for dt, e in zip((4e-3, 2e-3, 1e-3), errs)]
        o.check(orders.min() >= need, f"{method} order {orders.min():.3f} >= {need}")
    output.write_rows(out / "errors.csv", ["method", "dt", "max_abs_error"], rows)
    return o


def criterion_9(out, solves):
    o = Outcome()
    cfg = scenarios.load("pi_reference")
    m = cfg.build_model()
    pi = solve_pi_equilibrium(m, cfg.solver_options())
    output.write_rows(out / "pi_equilibrium.csv", ["r0", "z1", "z2", "y1"],
                      ([m.domain.coords[a], pi.z1_star[a], pi.z2_star[a], pi.y1_star[a]]
                       for a in range(m.size)))
    o.check(np.array_equal(pi.z1_star, m.z_ref), "z1* bit-equal to z_ref")
    o.check(pi.stationarity <= 1e-8, f"stationarity {pi.stationarity:.1e} <= 1e-8")
    bad = cfg.with_value("control.z_ref", "affine(c0=0.5, c1=0.8)").build_model()
    try:
        solve_pi_equilibrium(bad, cfg.solver_options())
        o.check(False, "out-of-range z_ref not rejected")
    except ReferenceUnreachable as e:
        named = len(e.nodes) > 0 and str(e.nodes[0]) in str(e)
        (out / "unreachable.txt").write_text(str(e) + "\n")
        o.check(named, f"ReferenceUnreachable names {len(e.nodes)} node(s)")
    return o


def _rank_one_model(n=101):
    dom = build_domain((0, 1), n)
    phi = np.cos(np.pi * dom.coords) + 0.5
    phi /= np.sqrt(np.sum(dom.weights * phi**2))
    index = {float(r): a for a, r in enumerate(dom.coords)}
    look = np.vectorize(lambda r: phi[index[float(r)]])
    S = linear(1.0)
    m = make_model(dom, (S, S), kernels={"11": lambda r, s: look(r) * look(s)},
                   controller=proportional(0.0))
    return m, phi


def criterion_10(out, solves):
    o = Outcome()
    m, phi = _rank_one_model()
    q = m.domain.weights
    A, _ = linear_operator(m)
    g = np.sin(3 * m.domain.coords)
    g = g - phi * np.sum(q * phi * g)
    rows = []
    for label, f1 in (("in_range", g), ("off_range", g + phi)):
        rep = solve_linear_case(m.replace(I_star=np.stack([f1, np.zeros(m.size)])))
        oracle = range_flags(A, rep.rhs)
        rows.append((label, rep.rank, rep.solvable, rep.unique, oracle[0], oracle[1],
                     rep.relative_residual))
        o.check((rep.solvable, rep.unique) == oracle,
                f"{label}: flags {(rep.solvable, rep.unique)} vs oracle {oracle}")
        if label == "in_range":
            o.check(rep.relative_residual <= 1e-8,
                    f"relative residual {rep.relative_residual:.1e} <= 1e-8")
    output.write_rows(out / "linear.csv", ["case", "rank", "solvable", "unique", "oracle_solvable",
                                           "oracle_unique", "relative_residual"], rows)
    o.check(rows[0][1] == 2 * m.size - 1, f"rank {rows[0][1]} = 2N - 1")
    return o


def criterion_11(out, solves):
    o = Outcome()
    dom = build_domain((0, 1), 101)
    S = linear(0.9, 0.05)
    m = make_model(dom, (S, S), I_star=(0.2, 0.1), alpha=1.0, z_ref=0.1,
                   kernels={"11": lambda r, s: 0.5 * np.cos(r - s), "12": -0.3,
                            "21": lambda r, s: 0.4 * r * s, "22": 0.2},
                   controller=proportional(0.5))
    n = m.size
    A, _ = linear_operator(m)
    Wm = np.eye(2 * n) - A
    Wm[:n, :n] += np.diag(m.gain_field * 0.9)
    D = np.concatenate([1.0 / (1.0 + m.gain_field * 0.9), np.ones(n)])
    oracle = weighted_operator_norm(D[:, None] * Wm, dom.weights)
    est = estimate_contraction(m, SolverOptions(seed=0))
    rel = abs(est - oracle) / oracle
    output.write_rows(out / "contraction.csv", ["estimate", "oracle", "relative_gap"],
                      [(est, oracle, rel)])
    o.check(rel <= 0.1, f"estimate {est:.4f} vs oracle {oracle:.4f}, gap {100 * rel:.2f}% <= 10%")
    return o


CRITERIA = {
    1: ("decoupled exactness", criterion_1),
    2: ("scalar-oracle agreement", criterion_2),
    3: ("H-inverse round trip", criterion_3),
    5: ("gain robustness", criterion_5),
    6: ("delay independence of equilibria", criterion_6),
    4: ("T/Tcal equivalence", criterion_4),
    7: ("dynamic consistency", criterion_7),
    8: ("integrator orders", criterion_8),
    9: ("PI construction", criterion_9),
    10: ("linear case", criterion_10),
    11: ("contraction estimate sanity", criterion_11),
}


def run_all(root):
    """Run criteria 1-11 (4 after the solves it audits) with outputs under ``root``."""
    solves, outcomes = [], {}
    for number, (_, fn) in CRITERIA.items():
        out = root / f"criterion_{number:02d}"
        out.mkdir(parents=True)
        t0 = time.perf_counter()
        outcomes[number] = fn(out, solves)
        outcomes[number].seconds = time.perf_counter() - t0
    return outcomes


def _record(request, number, name, passed, detail):
    lines = request.config.__dict__.setdefault("acceptance_lines", {})
    lines[number] = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"


@pytest.fixture(scope="session")
def acceptance(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance_a")
    return root, run_all(root)


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, acceptance, request):
    name = CRITERIA[number][0]
    outcome = acceptance[1][number]
    _record(request, number, name, outcome.passed, outcome.summary())
    failed = [w for ok, w in outcome.checks if not ok]
    assert not failed, failed
    assert outcome.seconds < TIME_LIMIT, f"took {outcome.seconds:.1f}s"


def test_criterion_12_determinism(acceptance, tmp_path_factory, request):
    root_a = acceptance[0]
    root_b = tmp_path_factory.mktemp("acceptance_b")
    t0 = time.perf_counter()
    run_all(root_b)
    seconds = time.perf_counter() - t0
    files_a = sorted(p.relative_to(root_a) for p in root_a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(root_b) for p in root_b.rglob("*") if p.is_file())
    differing = [str(p) for p in files_a if (root_a / p).read_bytes() != (root_b / p).read_bytes()]
    ok = files_a == files_b and not differing and len(files_a) > 0
    _record(request, 12, "determinism",
            ok, f"{len(files_a)} files byte-identical across two runs [{seconds:.1f}s]"
            if ok else f"differing: {differing or 'file sets differ'}")
    assert files_a == files_b
    assert not differing, differing
