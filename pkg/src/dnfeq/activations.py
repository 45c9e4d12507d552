"""Activation functions with explicit monotonicity and boundedness metadata."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ModelError
from .roots import bisect_threshold, expand_bracket

KINDS = ("logistic", "clamp", "linear", "relu")


@dataclass(frozen=True)
class Activation:
    """A continuous non-decreasing map ``S: R -> R``.

    Families (``params`` keys in brackets):

    * ``logistic`` [L, beta, theta]: ``L / (1 + exp(-beta (s - theta)))``
    * ``clamp`` [slope, lo, hi]: ``clip(slope * s, lo, hi)``
    * ``linear`` [slope, offset]: ``slope * s + offset``
    * ``relu``: ``max(0, s)``
    """

    kind: str
    params: dict = field(default_factory=dict)
    is_nondecreasing: bool = field(default=True, init=False)

    def __post_init__(self):
        p = dict(self.params)
        if self.kind == "logistic":
            p = {"L": 1.0, "beta": 1.0, "theta": 0.0, **p}
            if not (p["L"] > 0 and p["beta"] > 0):
                raise ModelError(f"logistic needs L > 0 and beta > 0, got {p}")
        elif self.kind == "clamp":
            p = {"slope": 1.0, "lo": 0.0, "hi": 1.0, **p}
            if p["slope"] < 0:
                raise ModelError(f"clamp slope must be >= 0, got {p['slope']}")
            if p["hi"] < p["lo"]:
                raise ModelError(f"clamp needs lo <= hi, got [{p['lo']}, {p['hi']}]")
        elif self.kind == "linear":
            p = {"slope": 1.0, "offset": 0.0, **p}
            if p["slope"] < 0:
                raise ModelError(f"linear slope must be >= 0, got {p['slope']}")
        elif self.kind == "relu":
            if p:
                raise ModelError(f"relu takes no parameters, got {sorted(p)}")
        else:
            raise ModelError(f"unknown activation kind {self.kind!r}; choose from {KINDS}")
        allowed = {"logistic": {"L", "beta", "theta"}, "clamp": {"slope", "lo", "hi"},
                   "linear": {"slope", "offset"}, "relu": set()}[self.kind]
        extra = set(p) - allowed
        if extra:
            raise ModelError(f"{self.kind} does not take {sorted(extra)}")
        p = {k: float(v) for k, v in p.items()}
        if not all(math.isfinite(v) for v in p.values()):
            raise ModelError(f"non-finite activation parameter in {p}")
        object.__setattr__(self, "params", p)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind == "logistic":
            return p["L"] * expit(p["beta"] * (s - p["theta"]))
        if self.kind == "clamp":
            return np.clip(p["slope"] * s, p["lo"], p["hi"])
        if self.kind == "linear":
            return p["slope"] * s + p["offset"]
        return np.maximum(s, 0.0)

    def derivative(self, s):
        """Derivative, taking the right limit at kinks."""
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind == "logistic":
            e = expit(p["beta"] * (s - p["theta"]))
            return p["L"] * p["beta"] * e * (1.0 - e)
        if self.kind == "clamp":
            inside = (p["slope"] * s >= p["lo"]) & (p["slope"] * s < p["hi"])
            return np.where(inside, p["slope"], 0.0)
        if self.kind == "linear":
            return np.full_like(s, p["slope"])
        return (s >= 0).astype(float)

    @property
    def is_bounded(self) -> bool:
        if self.kind in ("logistic", "clamp"):
            return True
        if self.kind == "linear":
            return self.params["slope"] == 0.0
        return False

    @property
    def bound(self) -> float:
        """``M`` with ``|S(s)| <= M`` for all ``s``; ``inf`` when unbounded."""
        p = self.params
        if self.kind == "logistic":
            return p["L"]
        if self.kind == "clamp":
            return max(abs(p["lo"]), abs(p["hi"]))
        if self.kind == "linear" and p["slope"] == 0.0:
            return abs(p["offset"])
        return math.inf

    @property
    def lipschitz(self) -> float:
        p = self.params
        if self.kind == "logistic":
            return p["L"] * p["beta"] / 4.0
        if self.kind in ("clamp", "linear"):
            return p["slope"]
        return 1.0

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def range(self):
        """``(low, high, low_attained, high_attained)`` of the image of S."""
        p = self.params
        if self.kind == "logistic":
            return 0.0, p["L"], False, False
        if self.kind == "clamp":
            if p["slope"] == 0.0:
                c = min(max(0.0, p["lo"]), p["hi"])
                return c, c, True, True
            return p["lo"], p["hi"], True, True
        if self.kind == "linear":
            if p["slope"] == 0.0:
                return p["offset"], p["offset"], True, True
            return -math.inf, math.inf, False, False
        return 0.0, math.inf, True, False

    def reaches(self, level) -> np.ndarray:
        """Elementwise: does ``level`` lie in the image of S?"""
        level = np.asarray(level, float)
        lo, hi, lo_in, hi_in = self.range()
        above = level >= lo if lo_in else level > lo
        below = level <= hi if hi_in else level < hi
        return above & below & np.isfinite(level)

    def preimage(self, level) -> np.ndarray:
        """A point ``c`` with ``S(c) = level``, found by bisection on S.

        Where ``S`` is flat at ``level`` the midpoint of the preimage interval
        is returned; a half-infinite preimage resolves to its finite end, and
        a constant activation to 0. Levels outside the image give NaN.
        """
        level = np.atleast_1d(np.asarray(level, float))
        out = np.full(level.shape, np.nan)
        ok = self.reaches(level)
        if not np.any(ok):
            return out
        y = level[ok]
        lo_, hi_, _, _ = self.range()
        if lo_ == hi_:
            out[ok] = 0.0
            return out
        # a = inf{s : S(s) >= y},  b = sup{s : S(s) <= y}
        left = self._edge(y, strict=False, unbounded=np.array([self._flat_below(v) for v in y]))
        right = self._edge(y, strict=True, unbounded=np.array([self._flat_above(v) for v in y]))
        both = np.isfinite(left) & np.isfinite(right)
        with np.errstate(invalid="ignore"):
            mid = left + 0.5 * (right - left)
        out[ok] = np.where(both, mid, np.where(np.isfinite(left), left, right))
        return out

    def _edge(self, y, strict, unbounded):
        # strict=False: first s with S(s) >= y; strict=True: last s with S(s) <= y
        res = np.full(y.shape, -np.inf if not strict else np.inf)
        m = ~unbounded
        if np.any(m):
            ym = y[m]
            if strict:
                pred = lambda s: self(s) > ym
            else:
                pred = lambda s: self(s) >= ym
            sign = lambda s: np.where(pred(s), 1.0, -1.0)
            lo, hi = expand_bracket(sign, np.zeros_like(ym))
            below, above = bisect_threshold(pred, lo, hi)
            res[m] = below if strict else above
        return res

    def _flat_below(self, level) -> bool:
        lo, _, lo_in, _ = self.range()
        return lo_in and level == lo

    def _flat_above(self, level) -> bool:
        _, hi, _, hi_in = self.range()
        return hi_in and level == hi

    def describe(self) -> str:
        if not self.params:
            return self.kind
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.kind}({args})"


def logistic(L=1.0, beta=1.0, theta=0.0) -> Activation:
    return Activation("logistic", {"L": L, "beta": beta, "theta": theta})


def clamp(lo=0.0, hi=1.0, slope=1.0) -> Activation:
    return Activation("clamp", {"slope": slope, "lo": lo, "hi": hi})


def linear(slope=1.0, offset=0.0) -> Activation:
    return Activation("linear", {"slope": slope, "offset": offset})


def relu() -> Activation:
    return Activation("relu")
