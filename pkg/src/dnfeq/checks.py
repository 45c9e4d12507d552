"""Invariant checks run end to end on a loaded model (``dnfeq verify``)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .grid import seqsum
from .model import Controller, NeuralFieldModel
from .simulate import simulate
from .solver import SolverOptions, solve_fixed_point


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def quadrature(model: NeuralFieldModel) -> Check:
    dom = model.domain
    w = dom.weights
    vol_err = abs(seqsum(w) - dom.volume) / dom.volume
    ok = vol_err <= 1e-12 and bool(np.all(w > 0))
    # trapezoid integrates affine functions exactly, midpoint at least constants
    r0 = dom.nodes[:, 0]
    a, b = dom.lower[0], dom.upper[0]
    exact = dom.volume * (0.5 * (a + b))
    aff_err = abs(dom.inner(np.ones(dom.size), r0) - exact) / max(abs(exact), dom.volume)
    ok &= aff_err <= 1e-12
    return Check("quadrature", bool(ok), f"weight-sum error {vol_err:.1e}, affine error {aff_err:.1e}")


def kernel_order(model: NeuralFieldModel, seed: int = 0) -> Check:
    K = model.kernels[0][0]
    v = np.random.default_rng(seed).standard_normal(model.size)
    loop = np.empty(model.size)
    q = model.domain.weights
    for a in range(model.size):
        acc = 0.0
        for b in range(model.size):
            acc += K.samples[a, b] * q[b] * v[b]
        loop[a] = acc
    same = bool(np.array_equal(K.apply(v), loop))
    return Check("kernel-summation-order", same, "bit-identical to double loop" if same else "differs")


def h_round_trip(model: NeuralFieldModel, seed: int = 0, samples: int = 20) -> Check:
    k = model.controller.gain
    gains = sorted({0.0, k, 10 * k})
    rng = np.random.default_rng(seed)
    worst = 0.0
    for g in gains:
        m = model.replace(controller=Controller("proportional", k=g))
        for _ in range(samples):
            v = 5 * rng.standard_normal((2, model.size))
            x = ops.invert_H(v, m, 1e-12)
            worst = max(worst, float(np.max(np.abs(ops.apply_H(x, m) - v))))
    note = " (identity path taken)" if k == 0 else ""
    return Check("H-round-trip", worst <= 1e-9, f"gains {gains}, max error {worst:.1e}{note}")


def sigma_monotone(model: NeuralFieldModel, seed: int = 0, samples: int = 50) -> Check:
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(samples):
        x, y = 5 * rng.standard_normal((2, 2, model.size))
        s = ops.apply_sigma(x, model) - ops.apply_sigma(y, model)
        d = x - y
        worst = min(worst, model.domain.inner(s[0], d[0]) + model.domain.inner(s[1], d[1]))
    return Check("sigma-monotone", worst >= 0, f"min <sigma(x)-sigma(y), x-y> = {worst:.3e}")


def rho_bounded(model: NeuralFieldModel, seed: int = 0, samples: int = 20) -> Check:
    if not model.bounded:
        return Check("rho-bounded", True, "n/a: unbounded activation")
    rng = np.random.default_rng(seed)
    M = max(S.bound for S in model.activations)
    worst = 0.0
    for _ in range(samples):
        x = 10.0 ** rng.uniform(0, 8) * rng.standard_normal((2, model.size))
        worst = max(worst, float(np.max(np.abs(ops.apply_rho(x, model)))))
    return Check("rho-bounded", worst <= M, f"max |rho(x)| = {worst:.3e} <= {M:g}")


def t_tcal_equivalence(model: NeuralFieldModel, opts: SolverOptions | None = None,
                       seed: int = 0, samples: int = 10) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = 3 * rng.standard_normal((2, model.size))
        a = ops.T_argument(ops.apply_rho(x, model), model)
        t = ops.apply_Tcal(x, model)
        worst = max(worst, float(np.max(np.abs(a - t))) / (1.0 + float(np.max(np.abs(t)))))
    ok = worst <= 1e-12
    detail = f"max relative gap {worst:.1e}"
    opts = opts or SolverOptions()
    res = solve_fixed_point(model, opts)
    if res.converged:
        gap = model.domain.pair_norm(ops.apply_T(res.z_star, model) - res.z_star)
        ok &= gap <= 10 * opts.tol_res
        detail += f"; |T(rho(x*)) - rho(x*)| = {gap:.1e}"
    else:
        detail += "; solver did not converge, fixed-point leg skipped"
    return Check("T-Tcal-equivalence", bool(ok), detail)


def undelayed_euler(model: NeuralFieldModel, z0, dt: float, steps: int):
    """Plain forward Euler without any history machinery (zero delays only)."""
    z = np.array(z0, float)
    out = [z.copy()]
    S1, S2 = model.activations
    c = model.controller
    for _ in range(steps):
        Wz = ops.apply_W(z, model)
        u = -c.gain * (z[0] - model.z_ref)
        dz = np.empty_like(z)
        dz[0] = (-z[0] + S1(model.I_star[0] + model.alpha * u + Wz[0])) / model.tau[0]
        dz[1] = (-z[1] + S2(model.I_star[1] + Wz[1])) / model.tau[1]
        z = z + dt * dz
        out.append(z.copy())
    return np.array(out)


def zero_delay_simulation(model: NeuralFieldModel, seed: int = 0) -> Check:
    if model.controller.integral:
        model = model.replace(controller=Controller("proportional", k=model.controller.k_P))
    m = model.replace(delays=(np.zeros((model.size,) * 2),) * 2)
    z0 = np.random.default_rng(seed).uniform(-1, 1, (2, model.size))
    dt, steps = 1e-2, 50
    sim = simulate(m, z0, t_end=steps * dt, dt=dt, method="euler", stride=1)
    ref = undelayed_euler(m, z0, dt, steps)
    gap = float(np.max(np.abs(sim.z - ref)))
    return Check("zero-delay-simulation", gap <= 1e-12, f"max gap {gap:.1e} over {steps} steps")


def run_all(model: NeuralFieldModel, opts: SolverOptions | None = None, seed: int = 0) -> list:
    return [
        quadrature(model),
        kernel_order(model, seed),
        h_round_trip(model, seed),
        sigma_monotone(model, seed),
        rho_bounded(model, seed),
        t_tcal_equivalence(model, opts, seed),
        zero_delay_simulation(model, seed),
    ]
