"""The two-population delayed neural field in closed loop.

``NeuralFieldModel`` gathers everything the stationarity maps and the
simulator need: time constants, constant inputs, Nyström kernel matrices,
delay matrices, activations and the feedback law acting on population 1
through the input profile ``alpha``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .activations import Activation
from .errors import ModelError
from .grid import KernelMatrix, SpatialDomain, assemble_kernel, distance

MODES = ("open_loop", "proportional", "prop_int")


@dataclass(frozen=True)
class Controller:
    """Feedback on population 1.

    ``proportional``: ``u = -k (z1 - z_ref)``;
    ``prop_int``: ``u = -k_P (z1 - z_ref) - k_I y1`` with ``y1' = z1 - z_ref``.
    """

    mode: str = "open_loop"
    k: float = 0.0
    k_P: float = 0.0
    k_I: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ModelError(f"unknown controller mode {self.mode!r}; choose from {MODES}")
        for name in ("k", "k_P", "k_I"):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v >= 0):
                raise ModelError(f"gain {name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)

    @property
    def gain(self) -> float:
        """Proportional gain entering the static maps (0 in open loop)."""
        return {"open_loop": 0.0, "proportional": self.k, "prop_int": self.k_P}[self.mode]

    @property
    def integral(self) -> bool:
        return self.mode == "prop_int"


def open_loop() -> Controller:
    return Controller("open_loop")


def proportional(k: float) -> Controller:
    return Controller("proportional", k=k)


def prop_int(k_P: float, k_I: float) -> Controller:
    return Controller("prop_int", k_P=k_P, k_I=k_I)


# kernel families -----------------------------------------------------------

def _sqdist(r, rp):
    diff = np.asarray(r, float) - np.asarray(rp, float)
    if diff.ndim == 3:
        return np.add.accumulate(diff * diff, axis=-1)[..., -1]
    return diff * diff


def zero_kernel():
    return lambda r, rp: np.zeros_like(_sqdist(r, rp))


def constant_kernel(c: float):
    return lambda r, rp: np.full_like(_sqdist(r, rp), float(c))


def gaussian_kernel(amplitude: float, width: float):
    """``amplitude * exp(-|r - r'|^2 / (2 width^2))``."""
    if width <= 0:
        raise ModelError(f"gaussian width must be > 0, got {width}")
    return lambda r, rp: amplitude * np.exp(-_sqdist(r, rp) / (2.0 * width * width))


def mexican_hat_kernel(a1: float, w1: float, a2: float, w2: float):
    g1, g2 = gaussian_kernel(a1, w1), gaussian_kernel(a2, w2)
    return lambda r, rp: g1(r, rp) - g2(r, rp)


# delay families ------------------------------------------------------------

def zero_delay(domain: SpatialDomain) -> np.ndarray:
    return np.zeros((domain.size, domain.size))


def constant_delay(domain: SpatialDomain, c: float) -> np.ndarray:
    return np.full((domain.size, domain.size), float(c))


def distance_delay(domain: SpatialDomain, v: float, d_bar: float) -> np.ndarray:
    """Finite propagation speed: ``min(|r - r'| / v, d_bar)``."""
    if v <= 0:
        raise ModelError(f"propagation speed must be > 0, got {v}")
    return np.minimum(distance(domain) / float(v), float(d_bar))


@dataclass(frozen=True, eq=False)
class NeuralFieldModel:
    domain: SpatialDomain
    tau: np.ndarray  # (2, N)
    I_star: np.ndarray  # (2, N)
    alpha: np.ndarray  # (N,)
    z_ref: np.ndarray  # (N,)
    kernels: tuple  # ((w11, w12), (w21, w22)) as KernelMatrix
    delays: tuple  # (d1, d2), each (N, N): d_j(r_a, r_b)
    activations: tuple  # (S1, S2)
    controller: Controller = Controller()

    def __post_init__(self):
        n = self.domain.size
        conv = lambda a, shape: np.array(np.broadcast_to(np.asarray(a, float), shape))
        object.__setattr__(self, "tau", conv(self.tau, (2, n)))
        object.__setattr__(self, "I_star", conv(self.I_star, (2, n)))
        object.__setattr__(self, "alpha", conv(self.alpha, (n,)))
        object.__setattr__(self, "z_ref", conv(self.z_ref, (n,)))
        object.__setattr__(self, "delays", tuple(conv(d, (n, n)) for d in self.delays))
        object.__setattr__(self, "kernels", tuple(tuple(row) for row in self.kernels))
        object.__setattr__(self, "activations", tuple(self.activations))
        for name in ("tau", "I_star", "alpha", "z_ref"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ModelError(f"{name} has non-finite values")
        if np.any(self.tau <= 0):
            raise ModelError("tau must be > 0 everywhere")
        if np.any(self.alpha < 0):
            raise ModelError("alpha must be >= 0 everywhere")
        if len(self.delays) != 2 or any(np.any(~np.isfinite(d) | (d < 0)) for d in self.delays):
            raise ModelError("need two delay matrices with finite entries >= 0")
        if len(self.kernels) != 2 or any(len(row) != 2 for row in self.kernels):
            raise ModelError("kernels must be a 2x2 nested sequence")
        for row in self.kernels:
            for K in row:
                if not isinstance(K, KernelMatrix) or not K.domain.same_as(self.domain):
                    raise ModelError("every kernel must be a KernelMatrix on the model domain")
        if len(self.activations) != 2 or not all(isinstance(S, Activation) for S in self.activations):
            raise ModelError("need two Activation instances")
        if not isinstance(self.controller, Controller):
            raise ModelError("controller must be a Controller")

    @property
    def size(self) -> int:
        return self.domain.size

    @property
    def d_bar(self) -> float:
        return float(max(d.max() for d in self.delays))

    @property
    def gain_field(self) -> np.ndarray:
        """``k * alpha`` with the proportional gain of the controller."""
        return self.controller.gain * self.alpha

    @property
    def bounded(self) -> bool:
        return all(S.is_bounded for S in self.activations)

    @property
    def existence_not_guaranteed(self) -> bool:
        return not self.bounded

    @property
    def hs_norm(self) -> float:
        """Hilbert-Schmidt norm of the 2x2 block operator."""
        return float(np.sqrt(sum(K.hs_norm ** 2 for row in self.kernels for K in row)))

    def replace(self, **changes) -> "NeuralFieldModel":
        return dataclasses.replace(self, **changes)


def _field(domain: SpatialDomain, value) -> np.ndarray:
    if callable(value):
        return domain.sample(value)
    return np.array(np.broadcast_to(np.asarray(value, float), (domain.size,)))


def _kernel(domain, value) -> KernelMatrix:
    if isinstance(value, KernelMatrix):
        return value
    if value is None or (np.isscalar(value) and value == 0):
        return assemble_kernel(domain, zero_kernel())
    if np.isscalar(value):
        return assemble_kernel(domain, constant_kernel(value))
    return assemble_kernel(domain, value)


def make_model(
    domain: SpatialDomain,
    activations: Sequence[Activation],
    *,
    tau=1.0,
    I_star=0.0,
    alpha=1.0,
    z_ref=0.0,
    kernels=None,
    delays=None,
    controller: Controller | None = None,
) -> NeuralFieldModel:
    """Convenience constructor accepting scalars, arrays or callables.

    ``tau`` and ``I_star`` may be a single value (shared) or a pair.
    ``kernels`` is a 2x2 nested sequence of scalars, callables ``w(r, r')``
    or assembled matrices, or a dict keyed ``"11"``, ``"12"``, ... ;
    missing entries are zero. ``delays`` is a pair of ``(N, N)`` arrays or
    scalars.
    """
    def pair(v):
        if isinstance(v, (tuple, list)) and len(v) == 2:
            return np.stack([_field(domain, v[0]), _field(domain, v[1])])
        f = _field(domain, v)
        return np.stack([f, f])

    if kernels is None:
        kernels = {}
    if isinstance(kernels, dict):
        kernels = [[kernels.get(f"{i}{j}") for j in (1, 2)] for i in (1, 2)]
    K = tuple(tuple(_kernel(domain, kernels[i][j]) for j in range(2)) for i in range(2))
    if delays is None:
        delays = (0.0, 0.0)
    D = tuple(np.array(np.broadcast_to(np.asarray(d, float), (domain.size,) * 2)) for d in delays)
    return NeuralFieldModel(
        domain=domain,
        tau=pair(tau),
        I_star=pair(I_star),
        alpha=_field(domain, alpha),
        z_ref=_field(domain, z_ref),
        kernels=K,
        delays=D,
        activations=tuple(activations),
        controller=controller or open_loop(),
    )
