"""Fixed-step integration of the delayed closed loop.

States live on the time grid ``t_m = m * dt``. Past states sit in a ring
buffer; the delayed value ``z_j(r_b, t_m - d_j(r_a, r_b))`` is a linear
interpolation between the two bracketing grid states, so delays are never
rounded to the step. Before ``t = 0`` the state equals the constant
prehistory.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import HistoryUnderflow, NonFiniteState
from .grid import rowsum
from .model import Controller, NeuralFieldModel

BLOWUP = 1e12


class HistoryBuffer:
    """Ring of past states on the step grid, pre-filled with the prehistory.

    Every state is stored twice, at slots ``s`` and ``s + capacity``, so a
    window reaching back up to ``capacity - 1`` steps is always contiguous
    in index space and lookups need no modulo.
    """

    def __init__(self, prehistory, dt: float, d_bar: float):
        self.prehistory = np.array(prehistory, float)
        self.dt = float(dt)
        self.capacity = int(math.ceil(d_bar / dt - 1e-9)) + 2 if d_bar > 0 else 2
        shape = (2 * self.capacity,) + self.prehistory.shape
        self.ring = np.broadcast_to(self.prehistory, shape).copy()
        self.latest = -1

    def base(self, position: int) -> int:
        """Upper-half slot of ``position``; slots ``base - k`` hold ``position - k``."""
        return position % self.capacity + self.capacity

    def write(self, position: int, state) -> None:
        """Store ``state`` at grid position ``position`` without committing it."""
        s = position % self.capacity
        self.ring[s] = state
        self.ring[s + self.capacity] = state

    def commit(self, position: int, state) -> None:
        if position != self.latest + 1:
            raise ValueError(f"commit out of order: {position} after {self.latest}")
        self.write(position, state)
        self.latest = position

    def oldest(self, position: int) -> int:
        """Oldest grid position still readable while ``position`` is being evaluated."""
        return position - self.capacity + 1

    def at(self, t: float, current_position: int | None = None) -> np.ndarray:
        """State at time ``t`` by linear interpolation (scalar lookup)."""
        top = self.latest if current_position is None else current_position
        p = t / self.dt
        if p < 0 or (p == 0 and top < 0):
            return self.prehistory.copy()
        if p > top + 1e-9:
            raise HistoryUnderflow(f"time {t} lies beyond the recorded history")
        i0 = math.floor(p + 1e-9)
        frac = max(p - i0, 0.0)
        if i0 < self.oldest(top):
            raise HistoryUnderflow(f"time {t} fell out of the history buffer")
        lo = self.prehistory if i0 < 0 else self.ring[i0 % self.capacity]
        if frac == 0:
            return lo.copy()
        hi = self.ring[(i0 + 1) % self.capacity]
        return (1 - frac) * lo + frac * hi


class _DelayTable:
    """Precomputed interpolation offsets for the delays out of population ``j``."""

    def __init__(self, d: np.ndarray, dt: float, j: int):
        lag = d / dt
        near = np.abs(lag - np.round(lag)) < 1e-9
        lag = np.where(near, np.round(lag), lag)
        whole = np.floor(lag).astype(np.int64)
        self.frac = lag - whole
        self.keep = 1.0 - self.frac
        self.zero = not np.any(d)
        self.max_back = int((whole + (self.frac > 0)).max())
        n = d.shape[1]
        # flat index into ring.ravel() relative to the base slot, minus the lag
        self.stride = 2 * n
        self.offset = -whole * self.stride + j * n + np.arange(n)[None, :]


class DelayedRHS:
    """Right-hand side of the closed loop on a fixed step ``dt``."""

    def __init__(self, model: NeuralFieldModel, dt: float, controller: Controller | None = None,
                 u_ext=None):
        self.model = model
        self.dt = float(dt)
        self.controller = controller or model.controller
        self.u_ext = u_ext
        self.tables = [_DelayTable(d, self.dt, j) for j, d in enumerate(model.delays)]

    def check(self, history: HistoryBuffer) -> None:
        need = max(t.max_back for t in self.tables) + 2
        if history.capacity < need:
            raise HistoryUnderflow(
                f"history holds {history.capacity} states but delays reach back {need - 2} steps"
            )

    def _delayed(self, j: int, position: int, current, history: HistoryBuffer):
        tab = self.tables[j]
        if tab.zero:
            return current[j][None, :]
        flat = history.ring.reshape(-1)
        i0 = tab.offset + history.base(position) * tab.stride
        return tab.keep * flat.take(i0) + tab.frac * flat.take(i0 - tab.stride)

    def __call__(self, position: int, current, history: HistoryBuffer, y1=None):
        """Time derivatives ``(dz, dy1)`` at grid position ``position``.

        ``current`` is written into the history slot for ``position`` so the
        most recent interpolation interval can see it.
        """
        m = self.model
        history.write(position, current)
        Z1 = self._delayed(0, position, current, history)
        Z2 = self._delayed(1, position, current, history)
        (K11, K12), (K21, K22) = m.kernels
        W1 = rowsum(K11.matrix * Z1) + rowsum(K12.matrix * Z2)
        W2 = rowsum(K21.matrix * Z1) + rowsum(K22.matrix * Z2)
        c = self.controller
        err = current[0] - m.z_ref
        u = -c.gain * err
        if c.integral:
            u = u - c.k_I * y1
        if self.u_ext is not None:
            u = u + np.asarray(self.u_ext(position * self.dt), float)
        S1, S2 = m.activations
        dz = np.empty_like(current)
        dz[0] = (-current[0] + S1(m.I_star[0] + m.alpha * u + W1)) / m.tau[0]
        dz[1] = (-current[1] + S2(m.I_star[1] + W2)) / m.tau[1]
        dy = err if c.integral else None
        return dz, dy


def rhs(t: float, current, history: HistoryBuffer, model: NeuralFieldModel, u_ext=None,
        y1=None, controller: Controller | None = None) -> np.ndarray:
    """Time derivative of ``z`` at a grid time ``t`` (a multiple of ``history.dt``)."""
    p = t / history.dt
    position = int(round(p))
    if abs(p - position) > 1e-9 * max(1.0, abs(p)):
        raise ValueError("t must lie on the history time grid")
    f = DelayedRHS(model, history.dt, controller, u_ext)
    f.check(history)
    if position > history.latest + 1:
        raise HistoryUnderflow(f"no history between step {history.latest} and {position}")
    return f(position, np.asarray(current, float), history, y1)[0]


@dataclass
class SimulationResult:
    times: np.ndarray
    z: np.ndarray  # (samples, 2, N)
    y: np.ndarray | None  # (samples, N) under PI feedback
    distance: np.ndarray  # pair_norm(z - reference), NaN without a reference
    tracking: np.ndarray  # L2 norm of z1 - z_ref
    completed: bool = True
    warnings: list = field(default_factory=list)


def simulate(model: NeuralFieldModel, prehistory=None, t_end: float = 10.0, dt: float = 1e-3,
             method: str = "euler", stride: int = 1, reference=None,
             controller: Controller | None = None, u_ext=None, y0=None) -> SimulationResult:
    """Integrate the closed loop from a constant prehistory.

    ``method`` is ``"euler"`` or ``"heun"``; samples are kept every
    ``stride`` steps plus the final step. ``u_ext(t)`` adds an external
    input to the control signal. Raises :class:`NonFiniteState` (with the
    partial result attached) once any value exceeds 1e12 in magnitude.
    """
    if method not in ("euler", "heun"):
        raise ValueError(f"unknown method {method!r}")
    if not dt > 0 or not t_end >= dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = model.size
    dom = model.domain
    ctrl = controller or model.controller
    phi = np.zeros((2, n)) if prehistory is None else np.array(
        np.broadcast_to(np.asarray(prehistory, float), (2, n)))
    notes = []
    if 0 < model.d_bar < dt:
        msg = f"dt={dt} exceeds the largest delay {model.d_bar}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    steps = int(round(t_end / dt))
    hist = HistoryBuffer(phi, dt, model.d_bar)
    f = DelayedRHS(model, dt, ctrl, u_ext)
    f.check(hist)
    ref = None if reference is None else np.asarray(reference, float)
    pi_mode = ctrl.integral
    y = (np.zeros(n) if y0 is None else np.array(np.broadcast_to(y0, (n,)), float)) if pi_mode else None

    times, zs, ys, dist, track = [], [], [], [], []

    def record(m, z, y):
        times.append(m * dt)
        zs.append(z.copy())
        if pi_mode:
            ys.append(y.copy())
        dist.append(dom.pair_norm(z - ref) if ref is not None else math.nan)
        track.append(dom.norm(z[0] - model.z_ref))

    def result(done):
        return SimulationResult(
            times=np.array(times), z=np.array(zs), y=np.array(ys) if pi_mode else None,
            distance=np.array(dist), tracking=np.array(track), completed=done, warnings=notes,
        )

    z = phi.copy()
    hist.commit(0, z)
    record(0, z, y)
    for m in range(steps):
        k1, l1 = f(m, z, hist, y)
        if method == "euler":
            z_new = z + dt * k1
            y_new = y + dt * l1 if pi_mode else None
        else:
            zp = z + dt * k1
            yp = y + dt * l1 if pi_mode else None
            k2, l2 = f(m + 1, zp, hist, yp)
            z_new = z + 0.5 * dt * (k1 + k2)
            y_new = y + 0.5 * dt * (l1 + l2) if pi_mode else None
        z, y = z_new, y_new
        hist.commit(m + 1, z)
        bad = not np.all(np.abs(z) <= BLOWUP) or (pi_mode and not np.all(np.abs(y) <= BLOWUP))
        if bad or (m + 1) % stride == 0 or m + 1 == steps:
            record(m + 1, z, y)
        if bad:
            raise NonFiniteState(f"state exceeded {BLOWUP:g} at t={(m + 1) * dt:g}", result(False))
    return result(True)


@dataclass
class ConvergenceReport:
    times: np.ndarray
    distance: np.ndarray
    initial: float
    terminal: float
    bounded_after_burn_in: bool
    converged: bool
    label: str = "empirical, non-certifying"


def probe_convergence(model: NeuralFieldModel, z_star, scale: float = 1e-2, t_end: float = 20.0,
                      dt: float = 1e-2, seed: int = 0, method: str = "euler", stride: int = 10,
                      y_star=None, burn_in: float | None = None,
                      ratio: float = 1e-3) -> ConvergenceReport:
    """Perturb ``z_star`` by a seeded random pair of norm ``scale`` and watch the distance.

    ``converged`` means the terminal distance fell below ``ratio`` times the
    initial one (or stayed at round-off when ``scale`` is 0). This is an
    observation about one trajectory, not a stability certificate.
    """
    dom = model.domain
    z_star = np.asarray(z_star, float)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(z_star.shape)
    start = z_star + (scale * d / dom.pair_norm(d) if scale else 0.0)
    sim = simulate(model, start, t_end=t_end, dt=dt, method=method, stride=stride,
                   reference=z_star, y0=y_star)
    dist = sim.distance
    initial, terminal = float(dist[0]), float(dist[-1])
    burn = 0.1 * t_end if burn_in is None else burn_in
    later = dist[sim.times >= burn]
    bounded = bool(later.size == 0 or later.max() <= initial * (1 + 1e-9) + 1e-12)
    converged = terminal <= ratio * initial if initial > 0 else terminal <= 1e-9
    return ConvergenceReport(times=sim.times, distance=dist, initial=initial, terminal=terminal,
                             bounded_after_burn_in=bounded, converged=bool(converged))
