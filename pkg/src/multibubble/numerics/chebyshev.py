"""Chebyshev collocation on [0, inf) through the map r = L s / (1 - s).

Functions that decay algebraically in r are smooth in s on [0, 1], so a single
Chebyshev expansion in s covers the whole half-line, infinity included.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C


@dataclass(frozen=True)
class CompactChebyshev:
    degree: int
    scale: float = 4.0

    @property
    def x(self):
        """Chebyshev-Lobatto points on [-1, 1], ordered from r = 0 to r = inf."""
        return -np.cos(np.pi * np.arange(self.degree + 1) / self.degree)

    @property
    def s(self):
        return 0.5 * (1.0 + self.x)

    def r_of_s(self, s):
        s = np.asarray(s, float)
        with np.errstate(divide="ignore"):
            return np.where(s < 1, self.scale * s / np.maximum(1.0 - s, 1e-300), np.inf)

    def s_of_r(self, r):
        r = np.asarray(r, float)
        return np.where(np.isinf(r), 1.0, r / (self.scale + np.where(np.isinf(r), 0.0, r)))

    def basis(self, s, deriv: int = 0):
        """Matrix B with B @ coeffs = d^k/dr^k of the expansion at s (k = deriv <= 2)."""
        s = np.asarray(s, float)
        x = 2.0 * s - 1.0
        n = self.degree + 1
        eye = np.eye(n)
        T = C.chebvander(x, self.degree)
        if deriv == 0:
            return T
        L = self.scale
        Ts = 2.0 * np.column_stack([C.chebval(x, C.chebder(eye[k])) for k in range(n)])
        dsdr = (1.0 - s) ** 2 / L
        if deriv == 1:
            return dsdr[:, None] * Ts
        Tss = 4.0 * np.column_stack([C.chebval(x, C.chebder(eye[k], 2)) for k in range(n)])
        return ((1.0 - s) ** 4 / L**2)[:, None] * Tss - (2.0 * (1.0 - s) ** 3 / L**2)[:, None] * Ts

    def evaluate(self, coeffs, r, deriv: int = 0):
        return self.basis(self.s_of_r(r), deriv) @ coeffs
