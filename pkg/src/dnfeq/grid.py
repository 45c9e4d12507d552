"""Box domains, composite quadrature and Nyström kernel matrices.

Fields are plain ``float64`` arrays with one value per node; a *pair* is a
``(2, N)`` array holding population 1 in row 0 and population 2 in row 1.
Nodes are ordered row-major over the axes, axis 0 slowest.

Every reduction in this package goes through :func:`seqsum` / :func:`rowsum`,
which accumulate strictly left to right.  ``np.sum`` and BLAS both reorder
additions, so results would otherwise depend on array alignment and library
build.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainMismatch, InvalidExtent, NonFiniteKernel, TooFewNodes

RULES = ("midpoint", "trapezoid")


def seqsum(values: np.ndarray) -> float:
    """Left-to-right sum of a 1-D array."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    return float(np.add.accumulate(values)[-1])


def rowsum(values: np.ndarray) -> np.ndarray:
    """Left-to-right sum along the last axis."""
    return np.add.accumulate(values, axis=-1)[..., -1]


def _axis_rule(a: float, b: float, n: int, rule: str):
    h = (b - a) / n if rule == "midpoint" else (b - a) / (n - 1)
    if rule == "midpoint":
        x = a + (np.arange(n) + 0.5) * h
        w = np.full(n, h)
    else:
        x = np.linspace(a, b, n)
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
    return x, w


@dataclass(frozen=True, eq=False)
class SpatialDomain:
    """Tensor-product grid on an axis-aligned box in 1 or 2 dimensions."""

    lower: tuple
    upper: tuple
    shape: tuple
    rule: str
    nodes: np.ndarray  # (N, q)
    weights: np.ndarray  # (N,)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    @property
    def coords(self) -> np.ndarray:
        """Node coordinates; shape ``(N,)`` in 1-D, ``(N, 2)`` in 2-D."""
        return self.nodes[:, 0] if self.dim == 1 else self.nodes

    def same_as(self, other: "SpatialDomain") -> bool:
        return (
            self is other
            or (
                self.shape == other.shape
                and self.rule == other.rule
                and self.lower == other.lower
                and self.upper == other.upper
            )
        )

    def check(self, *arrays: np.ndarray) -> None:
        for a in arrays:
            if np.shape(a)[-1:] != (self.size,):
                raise DomainMismatch(
                    f"array of shape {np.shape(a)} does not live on a grid of {self.size} nodes"
                )

    def sample(self, fn: Callable) -> np.ndarray:
        """Evaluate ``fn(coords)`` into a field."""
        vals = np.broadcast_to(np.asarray(fn(self.coords), dtype=float), (self.size,))
        return np.array(vals)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        self.check(f, g)
        return seqsum(self.weights * np.asarray(f, float) * np.asarray(g, float))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def pair_norm(self, p: np.ndarray) -> float:
        p = np.asarray(p, float)
        if p.shape != (2, self.size):
            raise DomainMismatch(f"expected a (2, {self.size}) pair, got {p.shape}")
        return float(np.sqrt(self.inner(p[0], p[0]) + self.inner(p[1], p[1])))

    def __repr__(self) -> str:
        return (
            f"SpatialDomain(lower={self.lower}, upper={self.upper}, "
            f"shape={self.shape}, rule={self.rule!r})"
        )


def build_domain(
    extent: Sequence, nodes: Sequence[int] | int, rule: str = "trapezoid"
) -> SpatialDomain:
    """Build a uniform grid on a box.

    ``extent`` is ``(a, b)`` in 1-D or ``((a0, b0), (a1, b1))`` in 2-D;
    ``nodes`` the per-axis node counts.
    """
    ext = np.asarray(extent, dtype=float)
    if ext.ndim == 1:
        ext = ext[None, :]
    if ext.ndim != 2 or ext.shape[1] != 2 or ext.shape[0] not in (1, 2):
        raise InvalidExtent(f"extent must be (a, b) or ((a0, b0), (a1, b1)); got {extent!r}")
    counts = (int(nodes),) * ext.shape[0] if np.isscalar(nodes) else tuple(int(n) for n in nodes)
    if len(counts) != ext.shape[0]:
        raise InvalidExtent(f"{len(counts)} node counts given for a {ext.shape[0]}-D box")
    if rule not in RULES:
        raise ValueError(f"unknown quadrature rule {rule!r}; choose from {RULES}")
    for d, (a, b) in enumerate(ext):
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise InvalidExtent(f"axis {d}: need a < b, got [{a}, {b}]")
        if counts[d] < 2:
            raise TooFewNodes(f"axis {d}: need at least 2 nodes, got {counts[d]}")

    axes = [_axis_rule(a, b, n, rule) for (a, b), n in zip(ext, counts)]
    if len(axes) == 1:
        pts = axes[0][0][:, None]
        w = axes[0][1].copy()
    else:
        X0, X1 = np.meshgrid(axes[0][0], axes[1][0], indexing="ij")
        W0, W1 = np.meshgrid(axes[0][1], axes[1][1], indexing="ij")
        pts = np.column_stack([X0.ravel(), X1.ravel()])
        w = (W0 * W1).ravel()
    return SpatialDomain(
        lower=tuple(float(a) for a in ext[:, 0]),
        upper=tuple(float(b) for b in ext[:, 1]),
        shape=counts,
        rule=rule,
        nodes=pts,
        weights=w,
    )


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Nyström matrix ``M[a, b] = w(r_a, r_b) * q_b`` of an integral operator."""

    domain: SpatialDomain
    samples: np.ndarray  # w(r_a, r_b)
    matrix: np.ndarray
    hs_norm: float

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Approximate ``∫ w(r_a, r') v(r') dr'`` at every node."""
        self.domain.check(v)
        return rowsum(self.matrix * np.asarray(v, float))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.samples)


def assemble_kernel(domain: SpatialDomain, kernel_fn: Callable) -> KernelMatrix:
    """Sample ``kernel_fn`` on all node pairs and weight the columns.

    ``kernel_fn(r, rp)`` is called once with broadcastable coordinates:
    shapes ``(N, 1)`` and ``(1, N)`` in 1-D, ``(N, 1, 2)`` and ``(1, N, 2)``
    in 2-D. It must return an array broadcastable to ``(N, N)``.
    """
    if domain.dim == 1:
        r, rp = domain.coords[:, None], domain.coords[None, :]
    else:
        r, rp = domain.nodes[:, None, :], domain.nodes[None, :, :]
    K = np.array(np.broadcast_to(np.asarray(kernel_fn(r, rp), float), (domain.size,) * 2))
    if not np.all(np.isfinite(K)):
        bad = np.argwhere(~np.isfinite(K))[0]
        raise NonFiniteKernel(f"kernel is not finite at node pair {tuple(int(i) for i in bad)}")
    q = domain.weights
    hs = float(np.sqrt(seqsum((q[:, None] * q[None, :] * K * K).ravel())))
    return KernelMatrix(domain=domain, samples=K, matrix=K * q[None, :], hs_norm=hs)


def distance(domain: SpatialDomain) -> np.ndarray:
    """Euclidean distance ``|r_a - r_b|`` between all node pairs."""
    diff = domain.nodes[:, None, :] - domain.nodes[None, :, :]
    return np.sqrt(np.add.accumulate(diff * diff, axis=-1)[..., -1])
