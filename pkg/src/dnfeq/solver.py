"""Closed-loop equilibria.

Equilibria are fixed points of ``pi(x) = H^{-1}(W(rho(x)) + f)``; the
activities are ``z* = rho(x*)``. Existence holds for bounded activations
but gives no algorithm, so the solver runs damped Picard iteration on
``pi`` with optional Anderson mixing and reports non-convergence instead of
raising by default.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .errors import DivisionDegenerate, ModelError, NonConvergence, ReferenceUnreachable
from .model import NeuralFieldModel


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 10000
    tol_res: float = 1e-10
    damping: float = 0.5
    anderson_depth: int = 5
    inner_tol: float | None = None
    multistart: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (self.tol_res > 0):
            raise ValueError("tol_res must be > 0")
        if not (0 < self.damping <= 1):
            raise ValueError("damping must lie in (0, 1]")
        if self.anderson_depth < 0 or self.max_iterations < 0 or self.multistart < 1:
            raise ValueError("anderson_depth, max_iterations >= 0 and multistart >= 1 required")
        if self.inner_tol is not None and not self.inner_tol > 0:
            raise ValueError("inner_tol must be > 0")

    @property
    def inner(self) -> float:
        return self.tol_res / 100 if self.inner_tol is None else self.inner_tol


@dataclass
class EquilibriumResult:
    x_star: np.ndarray
    z_star: np.ndarray
    residual_Tcal: float
    residual_T: float
    iterations: int
    converged: bool
    a_priori_bound: float
    within_bound: bool
    contraction_estimate: float | None = None
    log: list = field(default_factory=list)  # (iteration, residual_Tcal, step_norm)
    warnings: list = field(default_factory=list)
    start: int = 0


@dataclass
class ResidualReport:
    norm: float  # pair_norm(T(z) - z)
    max_abs: float


@dataclass
class PIEquilibriumResult:
    z1_star: np.ndarray
    z2_star: np.ndarray
    y1_star: np.ndarray
    preimage: np.ndarray  # S1^{-1}(z_ref)
    residual_z2: float  # L2 residual of the population-2 fixed point
    stationarity: float  # max nodewise residual of the full closed loop
    iterations: int
    converged: bool


def _anderson_loop(evaluate, x0, opts: SolverOptions, sqrt_w):
    """Damped Picard / Anderson iteration.

    ``evaluate(x) -> (px, res)`` returns the map value and the convergence
    residual at ``x``. Returns ``(x, res, iterations, converged, log)`` for
    the best iterate seen.
    """
    theta, m = opts.damping, opts.anderson_depth
    xs, rs = deque(maxlen=m + 1), deque(maxlen=m + 1)
    x = np.array(x0, float)
    best = (x, math.inf, 0)
    log = []
    step = 0.0
    for it in range(opts.max_iterations + 1):
        px, res = evaluate(x)
        log.append((it, res, step))
        if res < best[1]:
            best = (x, res, it)
        if res <= opts.tol_res:
            return x, res, it, True, log
        if it == opts.max_iterations or not np.isfinite(res):
            break
        r = px - x
        xs.append(x.ravel())
        rs.append(r.ravel())
        x_new = x + theta * r
        if m > 0 and len(xs) > 1:
            dX = np.diff(np.array(xs), axis=0).T
            dR = np.diff(np.array(rs), axis=0).T
            gamma = np.linalg.lstsq(dR * sqrt_w[:, None], r.ravel() * sqrt_w, rcond=None)[0]
            cand = x_new - ((dX + theta * dR) @ gamma).reshape(x.shape)
            if np.all(np.isfinite(cand)):
                x_new = cand
        if res > 1e3 * best[1]:
            # mixing went astray: restart plain damping from the best iterate
            xs.clear()
            rs.clear()
            x_new = best[0]
        step = float(np.sqrt(np.sum(sqrt_w**2 * (x_new - x).ravel() ** 2)))
        x = x_new
    return best[0], best[1], best[2], False, log


def _pair_weights(model):
    return np.sqrt(np.concatenate([model.domain.weights, model.domain.weights]))


def _solve_from(model, opts, x0):
    f = ops.forcing_f(model)
    tol = opts.inner
    dom = model.domain

    def evaluate(x):
        Wr = ops.apply_W(ops.apply_rho(x, model), model)
        tcal = f + Wr - ops.apply_sigma(x, model)
        res = dom.pair_norm(tcal - x)
        if not np.isfinite(res):
            return x, math.inf
        return ops.invert_H(Wr + f, model, tol), res

    return _anderson_loop(evaluate, x0, opts, _pair_weights(model))


def solve_fixed_point(model: NeuralFieldModel, opts: SolverOptions | None = None,
                      x0=None, strict: bool = False) -> EquilibriumResult:
    """Find ``x*`` with ``Tcal(x*) = x*`` and return it with ``z* = rho(x*)``.

    The first start is ``x0`` (default: the forcing term ``f``); extra
    multistart points are seeded perturbations of it. The best run is
    returned. With ``strict=True`` a failed solve raises
    :class:`NonConvergence` carrying the result.
    """
    opts = opts or SolverOptions()
    warnings = []
    if model.existence_not_guaranteed:
        warnings.append("existence_not_guaranteed: unbounded activation")
    base = ops.forcing_f(model) if x0 is None else np.array(x0, float)
    starts = [base]
    rng = np.random.default_rng(opts.seed)
    scale = 1.0 + float(np.max(np.abs(base)))
    for _ in range(opts.multistart - 1):
        starts.append(base + scale * rng.standard_normal(base.shape))

    best = None
    for i, s in enumerate(starts):
        x, res, its, ok, log = _solve_from(model, opts, s)
        cand = (ok, -res, i, x, res, its, log)
        if best is None or (ok and not best[0]) or (ok == best[0] and res < best[4]):
            best = cand
        if ok and opts.multistart == 1:
            break
    ok, _, start, x, res, its, log = best

    z = ops.apply_rho(x, model)
    res_T = model.domain.pair_norm(ops.apply_T(z, model) - z)
    R = ops.a_priori_bound(model)
    within = bool(model.domain.pair_norm(x) <= R * (1 + 1e-6))
    if ok and not within:
        warnings.append("fixed point exceeds the a-priori bound")
    if not ok:
        warnings.append(f"no convergence after {opts.max_iterations} iterations (residual {res:.3e})")
    result = EquilibriumResult(
        x_star=x, z_star=z, residual_Tcal=float(res), residual_T=float(res_T),
        iterations=its, converged=ok, a_priori_bound=R, within_bound=within,
        log=log, warnings=warnings, start=start,
    )
    if strict and not ok:
        raise NonConvergence(warnings[-1], result)
    return result


def verify_equilibrium(z, model: NeuralFieldModel) -> ResidualReport:
    z = np.asarray(z, float)
    d = ops.apply_T(z, model) - z
    return ResidualReport(norm=model.domain.pair_norm(d), max_abs=float(np.max(np.abs(d))))


def estimate_contraction(model: NeuralFieldModel, opts: SolverOptions | None = None,
                         samples: int = 8, center=None, power_steps: int = 20) -> float:
    """Largest observed ratio ``|pi(x) - pi(y)| / |x - y|`` over seeded pairs.

    Each pair starts from a random direction and is refined by a few
    finite-difference power steps, which steers it toward the most expanding
    direction. A value below 1 suggests (does not prove) a contraction.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    opts = opts or SolverOptions()
    tol = opts.inner
    dom = model.domain
    c = ops.forcing_f(model) if center is None else np.asarray(center, float)
    size = max(1.0, dom.pair_norm(c))
    rng = np.random.default_rng(opts.seed)
    pi = lambda x: ops.apply_pi(x, model, tol)
    best = 0.0
    for _ in range(samples):
        x = c + 0.1 * size * _unit(dom, rng.standard_normal(c.shape))
        d = _unit(dom, rng.standard_normal(c.shape))
        delta = 1e-3 * size
        px = pi(x)
        for _ in range(power_steps + 1):
            diff = pi(x + delta * d) - px
            ratio = dom.pair_norm(diff) / delta
            best = max(best, ratio)
            if ratio == 0.0:
                break
            d = _unit(dom, diff)
    return float(best)


def _unit(dom, v):
    return v / dom.pair_norm(v)


def solve_pi_equilibrium(model: NeuralFieldModel, opts: SolverOptions | None = None) -> PIEquilibriumResult:
    """Equilibrium under proportional-integral feedback.

    At rest the integrator forces ``z1* = z_ref``. Population 2 then solves
    its own fixed point with ``z1`` frozen, and the integrator state ``y1*``
    is whatever makes ``S1`` of the population-1 input equal ``z_ref``.
    """
    c = model.controller
    if not c.integral or not c.k_I > 0:
        raise ModelError("solve_pi_equilibrium needs a prop_int controller with k_I > 0")
    opts = opts or SolverOptions()
    dom = model.domain
    S1, S2 = model.activations
    (K11, K12), (K21, K22) = model.kernels
    z_ref = model.z_ref

    bad = np.flatnonzero(~S1.reaches(z_ref))
    if bad.size:
        raise ReferenceUnreachable(
            f"z_ref leaves the range of S1 at {bad.size} node(s), first {bad[:10].tolist()}", bad
        )

    b = model.I_star[1] + K21.apply(z_ref)

    def evaluate(x2):
        p = b + K22.apply(S2(x2))
        res = dom.norm(p - x2)
        return p, (res if np.isfinite(res) else math.inf)

    x2, res2, its, ok, _ = _anderson_loop(evaluate, b, opts, np.sqrt(dom.weights))
    z2 = S2(x2)

    pre = S1.preimage(z_ref)
    num = model.I_star[0] + K11.apply(z_ref) + K12.apply(z2) - pre
    den = c.k_I * model.alpha
    zero = den == 0
    scale = 1.0 + np.abs(model.I_star[0]) + np.abs(pre)
    degenerate = zero & (np.abs(num) > 1e-12 * scale)
    if np.any(degenerate):
        nodes = np.flatnonzero(degenerate)
        raise DivisionDegenerate(
            f"k_I * alpha vanishes where the integrator must act, nodes {nodes[:10].tolist()}", nodes
        )
    y1 = np.where(zero, 0.0, num / np.where(zero, 1.0, den))
    z1 = z_ref.copy()
    stat = closed_loop_residual(model, np.stack([z1, z2]), y1)
    result = PIEquilibriumResult(
        z1_star=z1, z2_star=z2, y1_star=y1, preimage=pre, residual_z2=float(res2),
        stationarity=stat, iterations=its, converged=ok,
    )
    if not ok:
        raise NonConvergence(f"population-2 sub-solve stalled at residual {res2:.3e}", result)
    return result


def closed_loop_residual(model: NeuralFieldModel, z, y1=None) -> float:
    """Max nodewise defect of the stationarity equations of the closed loop.

    Covers ``-z_i + S_i(input_i) = 0`` for both populations and, under PI
    feedback, ``z1 - z_ref = 0``.
    """
    z = np.asarray(z, float)
    c = model.controller
    u = -c.gain * (z[0] - model.z_ref)
    if c.integral:
        u = u - c.k_I * np.asarray(y1, float)
    Wz = ops.apply_W(z, model)
    S1, S2 = model.activations
    r1 = S1(model.I_star[0] + model.alpha * u + Wz[0]) - z[0]
    r2 = S2(model.I_star[1] + Wz[1]) - z[1]
    parts = [np.abs(r1), np.abs(r2)]
    if c.integral:
        parts.append(np.abs(z[0] - model.z_ref))
    return float(max(p.max() for p in parts))


@dataclass
class LinearReport:
    matrix: np.ndarray
    rhs: np.ndarray
    singular_values: np.ndarray
    rank: int
    solvable: bool
    unique: bool
    x: np.ndarray  # (2, N) solution or least-squares solution
    z: np.ndarray
    residual: float  # L2 norm of A x - rhs
    relative_residual: float


def linear_operator(model: NeuralFieldModel):
    """Dense matrix and right-hand side of ``x + sigma(x) - W(rho(x)) = f``.

    Offsets of the affine activations move to the right-hand side.
    """
    S1, S2 = model.activations
    if not (S1.is_linear and S2.is_linear):
        raise ModelError("linear case needs both activations of kind 'linear'")
    n = model.size
    m = (S1.params["slope"], S2.params["slope"])
    off = (S1.params["offset"], S2.params["offset"])
    g = model.gain_field
    A = np.eye(2 * n)
    A[:n, :n] += np.diag(g * m[0])
    for i in range(2):
        for j in range(2):
            A[i * n:(i + 1) * n, j * n:(j + 1) * n] -= model.kernels[i][j].matrix * m[j]
    consts = np.stack([np.full(n, off[0]), np.full(n, off[1])])
    rhs = ops.forcing_f(model) + ops.apply_W(consts, model)
    rhs[0] -= g * off[0]
    return A, rhs.ravel()


def solve_linear_case(model: NeuralFieldModel, rtol: float | None = None,
                      solvable_tol: float = 1e-8) -> LinearReport:
    """Solve the equilibrium equation when it is linear.

    Uses an SVD: the numerical rank decides uniqueness, and the truncated
    pseudo-inverse solution decides solvability through its residual.
    """
    A, b = linear_operator(model)
    n = model.size
    U, s, Vt = np.linalg.svd(A)
    if rtol is None:
        rtol = A.shape[0] * np.finfo(float).eps
    rank = int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0
    coef = (U[:, :rank].T @ b) / s[:rank]
    x = Vt[:rank].T @ coef
    dom = model.domain
    res = dom.pair_norm((A @ x - b).reshape(2, n))
    bnorm = dom.pair_norm(b.reshape(2, n))
    rel = res / bnorm if bnorm > 0 else res
    xp = x.reshape(2, n)
    return LinearReport(
        matrix=A, rhs=b, singular_values=s, rank=rank,
        solvable=bool(rel <= solvable_tol), unique=rank == 2 * n,
        x=xp, z=ops.apply_rho(xp, model), residual=res, relative_residual=rel,
    )
