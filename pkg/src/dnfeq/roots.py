"""Vectorized root finding for non-decreasing scalar maps.

All routines act elementwise on arrays so a whole field is solved at once;
each node still follows its own bracket and iteration path.
"""

from __future__ import annotations

import numpy as np

from .errors import BracketFailure, ToleranceNotMet

MAX_EXPANSIONS = 1100  # 2**1100 overflows float64, so this covers every finite bracket


def expand_bracket(phi, center, width=1.0):
    """Grow ``[center - h, center + h]`` geometrically until ``phi`` changes sign.

    ``phi`` must be non-decreasing. Raises :class:`BracketFailure` for nodes
    where no sign change is found before the bracket overflows.
    """
    center = np.asarray(center, float)
    h = np.full_like(center, float(width))
    lo, hi = center - h, center + h
    todo = (phi(lo) > 0) | (phi(hi) < 0)
    n = 0
    while np.any(todo):
        n += 1
        if n > MAX_EXPANSIONS:
            raise BracketFailure(f"no sign change found at {int(todo.sum())} node(s)")
        with np.errstate(over="ignore"):
            h = np.where(todo, 2.0 * h, h)
            lo, hi = center - h, center + h
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise BracketFailure(f"bracket overflowed at {int(todo.sum())} node(s)")
        todo = (phi(lo) > 0) | (phi(hi) < 0)
    return lo, hi


def newton_bisect(phi, dphi, lo, hi, x0=None, tol=1e-12, max_iter=200):
    """Solve ``phi(x) = 0`` elementwise inside ``[lo, hi]``.

    Newton steps that leave the current bracket (or meet a zero slope) are
    replaced by a bisection step, so every node converges. Convergence is
    judged on ``|phi(x)| <= tol``.
    """
    lo = np.array(lo, float)
    hi = np.array(hi, float)
    flo, fhi = phi(lo), phi(hi)
    if np.any(flo > 0) or np.any(fhi < 0):
        bad = np.flatnonzero((flo > 0) | (fhi < 0))
        raise BracketFailure(
            f"map does not change sign over the bracket at nodes {bad[:10].tolist()}; "
            "is the activation non-decreasing?"
        )
    x = 0.5 * (lo + hi) if x0 is None else np.clip(np.asarray(x0, float), lo, hi)
    fx = phi(x)
    exhausted = np.zeros(x.shape, bool)
    slow = np.zeros(x.shape, bool)
    for _ in range(max_iter):
        active = (np.abs(fx) > tol) & ~exhausted
        if not np.any(active):
            break
        lo = np.where(active & (fx < 0), x, lo)
        hi = np.where(active & (fx > 0), x, hi)
        d = dphi(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / d
        mid = lo + 0.5 * (hi - lo)
        newton_ok = np.isfinite(xn) & (d > 0) & (xn > lo) & (xn < hi) & ~slow
        xn = np.where(newton_ok, xn, mid)
        # bracket down to adjacent floats: settle on the better endpoint
        collapsed = active & ~((mid > lo) & (mid < hi))
        if np.any(collapsed):
            best = np.where(np.abs(phi(lo)) <= np.abs(phi(hi)), lo, hi)
            xn = np.where(collapsed, best, xn)
            exhausted |= collapsed
        x = np.where(active, xn, x)
        fprev, fx = fx, phi(x)
        slow = np.abs(fx) > 0.5 * np.abs(fprev)
    res = np.abs(fx)
    if np.any(res > tol):
        raise ToleranceNotMet(
            f"residual {res.max():.3e} above tolerance {tol:.1e} at "
            f"{int((res > tol).sum())} node(s)"
        )
    return x


def bisect_threshold(pred, lo, hi, max_iter=2000):
    """Locate the switch point of a monotone predicate elementwise.

    ``pred`` is False at ``lo`` and True at ``hi``; returns the final
    ``(lo, hi)`` pair, adjacent floats (or equal) on either side of the switch.
    """
    lo = np.array(lo, float)
    hi = np.array(hi, float)
    for _ in range(max_iter):
        mid = lo + 0.5 * (hi - lo)
        open_ = (mid > lo) & (mid < hi)
        if not np.any(open_):
            break
        p = pred(mid)
        hi = np.where(open_ & p, mid, hi)
        lo = np.where(open_ & ~p, mid, lo)
    return lo, hi
