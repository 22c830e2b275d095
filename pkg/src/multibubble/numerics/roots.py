"""Bracketing bisection on a boolean predicate."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Bracket:
    lo: float
    hi: float
    history: list = field(default_factory=list)  # (midpoint, predicate value) per iteration

    @property
    def width(self):
        return self.hi - self.lo


def bisect_predicate(pred, lo: float, hi: float, tol: float = 1e-12, maxiter: int = 200) -> Bracket:
    """Shrink [lo, hi] around the switch of ``pred`` from False (at lo) to True (at hi)."""
    p_lo, p_hi = pred(lo), pred(hi)
    if p_lo == p_hi:
        raise ValueError(f"predicate does not change sign on [{lo}, {hi}]")
    flip = bool(p_lo)
    br = Bracket(lo, hi)
    for _ in range(maxiter):
        if br.hi - br.lo <= tol:
            break
        mid = 0.5 * (br.lo + br.hi)
        val = bool(pred(mid))
        br.history.append((mid, val))
        if val != flip:
            br.hi = mid
        else:
            br.lo = mid
    return br
