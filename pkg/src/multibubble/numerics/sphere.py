"""Projected-gradient minimisation on the sphere sector S_+^{K-1}.

The sector is the set of nonnegative unit vectors of R^K.  Each descent uses
Barzilai-Borwein trial steps along the tangential gradient, Armijo backtracking
and the metric projection x -> max(x, 0) / |max(x, 0)| as retraction.  Steps
are capped so that no component drops below a tenth of its value: objectives
whose gradient vanishes on the boundary (such as sums of theta_j^(3/2)
theta_k^(3/2)) would otherwise trap iterates on a face.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class BoundaryMinimizerError(RuntimeError):
    """Every start converged to a point with a vanishing component."""


def project_sector(x) -> np.ndarray:
    x = np.maximum(np.asarray(x, float), 0.0)
    n = np.linalg.norm(x)
    if n == 0:
        raise ValueError("cannot project the origin onto the sphere sector")
    return x / n


def tangent_gradient(theta, grad):
    return grad - np.dot(theta, grad) * theta


@dataclass
class SectorMinimum:
    theta: np.ndarray
    value: float
    stationarity: float
    iterations: int
    starts: list = field(default_factory=list)  # (theta, value, stationarity) per start


def _descend(fun, grad, theta, tol, maxiter):
    f = fun(theta)
    g = grad(theta)
    step = 1.0
    prev = None
    it = 0
    stat = np.inf
    for it in range(1, maxiter + 1):
        gt = tangent_gradient(theta, g)
        stat = np.linalg.norm(theta - project_sector(theta - gt))
        if stat <= tol:
            break
        if prev is not None:
            dth, dg = theta - prev[0], gt - prev[1]
            denom = np.dot(dth, dg)
            if denom > 0:
                step = np.dot(dth, dth) / denom
        step = float(np.clip(step, 1e-12, 1e6))
        shrinking = gt > 0
        if np.any(shrinking):
            step = min(step, 0.9 * float(np.min(theta[shrinking] / gt[shrinking])))
        slack = 16 * np.finfo(float).eps * abs(f)
        while True:
            cand = project_sector(theta - step * gt)
            fc = fun(cand)
            if fc <= f - 1e-4 * np.dot(gt, theta - cand) + slack:
                break
            step *= 0.5
            if step < 1e-16:
                return theta, f, stat, it  # no decrease above rounding level
        prev = (theta, gt)
        theta, f = cand, fc
        g = grad(theta)
    return theta, f, stat, it


def minimize_on_sphere_sector(objective, gradient, K: int, multistart: int = 16,
                              seed: int = 12345, tol: float = 1e-10, maxiter: int = 20000,
                              boundary_tol: float = 1e-8) -> SectorMinimum:
    """Best of ``multistart`` projected-gradient descents from random interior points.

    Ties in the objective (within 1e-13 relative) are broken by the
    lexicographically smallest minimiser, so symmetric problems give a
    reproducible answer.
    """
    if K == 1:
        th = np.ones(1)
        return SectorMinimum(th, float(objective(th)), 0.0, 0, [(th, float(objective(th)), 0.0)])
    rng = np.random.default_rng(seed)
    starts = []
    for _ in range(multistart):
        th0 = project_sector(np.abs(rng.standard_normal(K)) + 1e-3)
        th, val, stat, it = _descend(objective, gradient, th0, tol, maxiter)
        starts.append((th, float(val), float(stat), it))
    interior = [s for s in starts if np.min(s[0]) > boundary_tol]
    if not interior:
        raise BoundaryMinimizerError("all descents converged to the sector boundary")
    best_val = min(s[1] for s in interior)
    ties = [s for s in interior if s[1] <= best_val + 1e-13 * max(1.0, abs(best_val))]
    ties.sort(key=lambda s: tuple(np.round(s[0], 9)))
    th, val, stat, it = ties[0]
    return SectorMinimum(th, val, stat, it, [(s[0], s[1], s[2]) for s in starts])
