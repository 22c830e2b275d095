"""Radial grids on [0, inf) and 5D radial quadrature.

Two grid families share the :class:`RadialGrid` container:

* :func:`gauss_grid` -- composite Gauss-Legendre panels in s on [0, 1), mapped
  by r = L s / (1 - s).  Accurate to rounding for the algebraically decaying
  profiles used here.
* :func:`graded_grid` -- vertex-centred finite-volume grid, uniform in s on
  [0, s_max] with the same map.  Weights are exact control volumes of r^4 dr;
  ``faces`` holds the control-volume boundaries.  Used by the spectral module.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SPHERE_AREA_S4 = 8.0 * np.pi**2 / 3.0
SPHERE_AREA_S3 = 2.0 * np.pi**2


@dataclass(frozen=True)
class RadialGrid:
    nodes: np.ndarray
    weights: np.ndarray  # integrate against r^4 dr (no sphere-area factor)
    r_max: float
    mapping: str
    scale: float = 1.0
    faces: np.ndarray | None = None  # graded grids only: len(nodes) + 1 boundaries

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ValueError("grid weights must be positive")

    def __len__(self):
        return len(self.nodes)


@dataclass
class RadialFunction:
    grid: RadialGrid
    values: np.ndarray
    tail_exponent: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("radial function has non-finite samples")

    def __call__(self, r):
        return np.interp(r, self.grid.nodes, self.values)

    def with_tail(self, min_points: int = 20) -> "RadialFunction":
        self.tail_exponent = fit_tail_exponent(self.grid.nodes, self.values, min_points)
        return self


def fit_tail_exponent(r, values, min_points: int = 20) -> float:
    """Least-squares slope of log|v| against log r over the last decade of nodes.

    Returns the exponent p in v ~ r^p (negative for decaying tails).
    """
    r = np.asarray(r, float)
    v = np.abs(np.asarray(values, float))
    mask = r >= r[-1] / 10.0
    if mask.sum() < min_points:
        mask = np.zeros_like(mask)
        mask[-min_points:] = True
    mask &= v > 0
    slope, _ = np.polyfit(np.log(r[mask]), np.log(v[mask]), 1)
    return float(slope)


def _r_of_s(s, L):
    return L * s / (1.0 - s)


def _s_of_r(r, L):
    return r / (L + r)


@lru_cache(maxsize=16)
def _gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def gauss_grid(panels: int = 48, order: int = 20, scale: float = 4.0,
               breakpoints=(), r_max: float = np.inf) -> RadialGrid:
    """Composite Gauss grid on [0, r_max) in the compactified variable s.

    ``breakpoints`` (radii) are added as panel edges so that integrands with
    kinks (e.g. indicator functions) are integrated panel-wise exactly.
    """
    s_end = 1.0 if not np.isfinite(r_max) else _s_of_r(r_max, scale)
    edges = np.linspace(0.0, s_end, panels + 1)
    extra = [_s_of_r(b, scale) for b in breakpoints if 0 < b < r_max]
    edges = np.unique(np.concatenate([edges, extra]))
    x, w = _gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    s = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    ws = 0.5 * (b - a) * w[None, :]
    s, ws = s.ravel(), ws.ravel()
    r = _r_of_s(s, scale)
    drds = scale / (1.0 - s) ** 2
    return RadialGrid(nodes=r, weights=ws * drds * r**4, r_max=float(r_max),
                      mapping=f"algebraic r=L*s/(1-s), L={scale}", scale=scale)


def graded_grid(n: int, scale: float = 4.0, r_max: float | None = None) -> RadialGrid:
    """Vertex-centred grid with ``n`` intervals, node 0 at r = 0.

    With ``r_max=None`` the outer radius grows with resolution, s_max = 1 - 1/(n+1),
    i.e. r_max = L n; refining therefore also pushes the truncation outward.
    """
    if n < 2:
        raise ValueError("need at least two intervals")
    s_max = 1.0 - 1.0 / (n + 1) if r_max is None else _s_of_r(r_max, scale)
    s = np.linspace(0.0, s_max, n + 1)
    r = _r_of_s(s, scale)
    s_faces = np.concatenate([[0.0], 0.5 * (s[1:] + s[:-1]), [s_max]])
    faces = _r_of_s(s_faces, scale)
    vol = (faces[1:] ** 5 - faces[:-1] ** 5) / 5.0
    return RadialGrid(nodes=r, weights=vol, r_max=float(r[-1]),
                      mapping=f"graded r=L*s/(1-s), L={scale}", scale=scale, faces=faces)


def quad_radial(f, grid: RadialGrid) -> float:
    """Integral over R^5 of the radial function ``f`` (callable or node samples)."""
    vals = f(grid.nodes) if callable(f) else np.asarray(f, float)
    vals = np.asarray(vals, dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise FloatingPointError(f"non-finite integrand at r={grid.nodes[i]:.6g}")
    return float(SPHERE_AREA_S4 * np.dot(vals, grid.weights))


_DEFAULT = None


def default_grid() -> RadialGrid:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = gauss_grid()
    return _DEFAULT
