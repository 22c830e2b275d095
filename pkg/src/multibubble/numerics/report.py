from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class CheckReport:
    """Outcome of one numerical verification.

    ``mode`` selects the comparison: ``"abs"`` (|measured - expected| <= tolerance),
    ``"rel"`` (<= tolerance * |expected|) or ``"lower"`` (measured >= expected - tolerance,
    for one-sided bounds such as coercivity constants).
    """

    name: str
    measured: float
    expected: float
    tolerance: float
    mode: str = "abs"
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("abs", "rel", "lower"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self.measured = float(self.measured)
        self.expected = float(self.expected)
        self.tolerance = float(self.tolerance)

    @property
    def passed(self) -> bool:
        m, e, tol = self.measured, self.expected, self.tolerance
        if not math.isfinite(m):
            return False
        if self.mode == "abs":
            return abs(m - e) <= tol
        if self.mode == "rel":
            return abs(m - e) <= tol * abs(e)
        return m >= e - tol

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": self.measured,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "mode": self.mode,
            "pass": self.passed,
            **({"details": self.details} if self.details else {}),
        }

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.name}: measured={self.measured:.10g} "
                f"expected={self.expected:.10g} tol={self.tolerance:.3g} ({self.mode})")
