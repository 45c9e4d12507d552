"""Stationarity maps of the closed loop.

With ``g = k * alpha`` (proportional gain times input profile) and pairs
stored as ``(2, N)`` arrays:

* ``rho(x)   = (S1(x1), S2(x2))``
* ``sigma(x) = (g S1(x1), 0)``
* ``W(p)_i   = sum_j int w_ij(r, r') p_j(r') dr'``
* ``f        = (I1 + g z_ref, I2)``
* ``H(x)     = x + sigma(x)``
* ``Tcal(x)  = W(rho(x)) - sigma(x) + f``      (fixed points: x* with z* = rho(x*))
* ``pi(x)    = H^{-1}(W(rho(x)) + f)``         (same fixed points as Tcal)
* ``T(z)     = rho(T_argument(z))``               (the same condition on activities)

``H`` acts nodewise and is strictly increasing in the first component, so
its inverse reduces to one monotone scalar equation per node.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainMismatch
from .model import NeuralFieldModel
from .roots import expand_bracket, newton_bisect


def _pair(x, model: NeuralFieldModel) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (2, model.size):
        raise DomainMismatch(f"expected a (2, {model.size}) pair, got {x.shape}")
    return x


def apply_rho(x, model: NeuralFieldModel) -> np.ndarray:
    x = _pair(x, model)
    S1, S2 = model.activations
    return np.stack([S1(x[0]), S2(x[1])])


def apply_sigma(x, model: NeuralFieldModel) -> np.ndarray:
    x = _pair(x, model)
    out = np.zeros_like(x)
    out[0] = model.gain_field * model.activations[0](x[0])
    return out


def apply_W(p, model: NeuralFieldModel) -> np.ndarray:
    p = _pair(p, model)
    (K11, K12), (K21, K22) = model.kernels
    return np.stack([
        K11.apply(p[0]) + K12.apply(p[1]),
        K21.apply(p[0]) + K22.apply(p[1]),
    ])


def forcing_f(model: NeuralFieldModel) -> np.ndarray:
    f = model.I_star.copy()
    f[0] = model.I_star[0] + model.gain_field * model.z_ref
    return f


def apply_H(x, model: NeuralFieldModel) -> np.ndarray:
    x = _pair(x, model)
    return x + apply_sigma(x, model)


def invert_H(v, model: NeuralFieldModel, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Solve ``x + sigma(x) = v`` with ``max|x + sigma(x) - v| <= tol``.

    The second component is returned unchanged. For the first, each node
    solves ``s + g S1(s) = v1`` by safeguarded Newton/bisection; the
    bracket is ``v1 -+ g M1`` for bounded ``S1`` and grows geometrically
    otherwise.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    v = _pair(v, model)
    S1 = model.activations[0]
    g = model.gain_field
    x = v.copy()
    m = g > 0
    if not np.any(m):
        return x
    gm, vm = g[m], v[0, m]
    phi = lambda s: s + gm * S1(s) - vm
    dphi = lambda s: 1.0 + gm * S1.derivative(s)
    if S1.is_bounded:
        # pad by a few ulps: at a flat S1 the exact endpoints are roots and rounding can miss them
        gM = gm * S1.bound
        pad = 8 * np.spacing(np.maximum(np.abs(vm), gM)) + np.finfo(float).tiny
        lo, hi = vm - gM - pad, vm + gM + pad
    else:
        lo, hi = expand_bracket(phi, vm, width=1.0)
    x[0, m] = newton_bisect(phi, dphi, lo, hi, x0=vm - gm * S1(vm), tol=tol, max_iter=max_iter)
    return x


def T_argument(z, model: NeuralFieldModel) -> np.ndarray:
    """Synaptic input inside ``T``: ``T(z) = rho(T_argument(z))``.

    For a fixed point ``z`` of ``T`` this is the matching fixed point of
    ``Tcal``.
    """
    z = _pair(z, model)
    Wz = apply_W(z, model)
    arg = np.empty_like(z)
    arg[0] = model.I_star[0] - model.gain_field * (z[0] - model.z_ref) + Wz[0]
    arg[1] = model.I_star[1] + Wz[1]
    return arg


def apply_T(z, model: NeuralFieldModel) -> np.ndarray:
    return apply_rho(T_argument(z, model), model)


def apply_Tcal(x, model: NeuralFieldModel) -> np.ndarray:
    return forcing_f(model) + apply_W(apply_rho(x, model), model) - apply_sigma(x, model)


def apply_pi(x, model: NeuralFieldModel, tol: float = 1e-12) -> np.ndarray:
    return invert_H(apply_W(apply_rho(x, model), model) + forcing_f(model), model, tol)


def rho_lipschitz(model: NeuralFieldModel) -> float:
    return max(S.lipschitz for S in model.activations)


def a_priori_bound(model: NeuralFieldModel) -> float:
    """Norm bound on every point of the form ``pi(x)``, hence on every fixed point.

    ``|f| + |W|_HS sqrt(2|Omega|) max(M1, M2) + max|k alpha| M1 sqrt(|Omega|)``;
    infinite when an activation is unbounded.
    """
    if not model.bounded:
        return math.inf
    M1, M2 = (S.bound for S in model.activations)
    vol = model.domain.volume
    f_norm = model.domain.pair_norm(forcing_f(model))
    g_max = float(np.max(np.abs(model.gain_field)))
    return f_norm + model.hs_norm * math.sqrt(2 * vol) * max(M1, M2) + g_max * M1 * math.sqrt(vol)
