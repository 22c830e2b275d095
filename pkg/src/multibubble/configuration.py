"""Blow-up constants c_k from the sites z_k.

c = r theta where theta minimises V on the sphere sector, n = -theta . grad V(theta)
and r = 6 / n.  Then B(c) = -6 c, so lambda_k = c_k t^-2, b_k = 2 c_k t^-3 solves
the reduced system exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .interaction import DB, B, PointConfig, V, grad_V, hess_V, KAPPA
from .numerics.report import CheckReport
from .numerics.sphere import BoundaryMinimizerError, minimize_on_sphere_sector


class SignError(RuntimeError):
    """-theta . grad V(theta) is not positive at the minimiser."""


class SaddleError(RuntimeError):
    """Negative tangential curvature: the critical point is not a local minimum."""


@dataclass
class BlowupConstants:
    theta: np.ndarray
    n: float
    r: float
    c: np.ndarray
    residual: float
    V_min: float
    basin: dict = field(default_factory=dict, repr=False)  # multistart statistics

    def to_dict(self) -> dict:
        return {
            "theta": [float(x) for x in self.theta],
            "n": float(self.n),
            "r": float(self.r),
            "c": [float(x) for x in self.c],
            "residual": float(self.residual),
            "V_min": float(self.V_min),
        }


def fixed_point_residual(config: PointConfig, c) -> float:
    c = np.asarray(c, float)
    return float(np.max(np.abs(B(config, c) + 6.0 * c)) / np.linalg.norm(c))


def _newton_polish(config, c, iters: int = 8):
    eye = np.eye(config.K)
    for _ in range(iters):
        F = B(config, c) + 6.0 * c
        step = np.linalg.solve(DB(config, c) + 6.0 * eye, F)
        c_new = c - step
        if np.any(c_new <= 0):
            break
        c = c_new
        if np.max(np.abs(step)) <= 1e-16 * np.max(c):
            break
    return c


def compute_constants(config: PointConfig, multistart: int = 16, seed: int = 12345,
                      polish: bool = True) -> BlowupConstants:
    """Minimise V over the sector and build c = (6/n) theta.

    The projected-gradient minimiser is refined by Newton's method on
    B(c) + 6c = 0, which converges quadratically from the descent output.
    """
    K = config.K
    if K < 2:
        raise ValueError("blow-up constants need at least two sites")
    res = minimize_on_sphere_sector(lambda th: V(config, th), lambda th: grad_V(config, th),
                                    K, multistart=multistart, seed=seed)
    theta = res.theta
    if np.any(theta <= 0) or np.any(theta >= 1):
        raise BoundaryMinimizerError(f"minimiser {theta} is not interior")
    n = float(-theta @ grad_V(config, theta))
    if not n > 0:
        raise SignError(f"n = {n:.6g} is not positive")
    c = (6.0 / n) * theta
    if polish:
        c = _newton_polish(config, c)
        r = float(np.linalg.norm(c))
        theta = c / r
        n = 6.0 / r
    values = np.array([s[1] for s in res.starts])
    basin = {
        "start_values": values.tolist(),
        "fraction_at_best": float(np.mean(values <= res.value + 1e-10 * abs(res.value))),
        "stationarity": res.stationarity,
    }
    return BlowupConstants(theta=theta, n=n, r=6.0 / n, c=c,
                           residual=float(np.max(np.abs(B(config, c) + 6.0 * c))),
                           V_min=V(config, theta), basin=basin)


def certify_fixed_point(config: PointConfig, c, tol: float = 1e-10) -> CheckReport:
    """max_k |B_k(c) + 6 c_k| / |c| against ``tol``."""
    return CheckReport("fixed point B(c) = -6c", fixed_point_residual(config, c), 0.0, tol)


def tangent_hessian(config: PointConfig, theta) -> np.ndarray:
    """Riemannian Hessian of V on the unit sphere at theta, in an orthonormal basis of theta^perp."""
    theta = np.asarray(theta, float)
    K = theta.size
    # columns 1.. of a QR factor with theta first span the tangent space
    Q, _ = np.linalg.qr(np.column_stack([theta, np.eye(K)[:, : K - 1]]))
    T = Q[:, 1:K]
    Hr = hess_V(config, theta) - (theta @ grad_V(config, theta)) * np.eye(K)
    return T.T @ Hr @ T


def second_order_check(config: PointConfig, theta, tol: float = 1e-8) -> CheckReport:
    theta = np.asarray(theta, float)
    if theta.size == 1:
        return CheckReport("tangential curvature of V", 0.0, 0.0, tol, mode="lower",
                           details={"eigenvalues": []})
    ev = np.linalg.eigvalsh(tangent_hessian(config, theta))
    rep = CheckReport("tangential curvature of V", float(ev[0]), 0.0, tol, mode="lower",
                      details={"eigenvalues": ev.tolist()})
    return rep


def require_local_minimum(config: PointConfig, theta, tol: float = 1e-8) -> CheckReport:
    rep = second_order_check(config, theta, tol)
    if not rep.passed:
        raise SaddleError(f"smallest tangential eigenvalue {rep.measured:.3g} < -{tol:g}")
    return rep


def boundary_repulsion(config: PointConfig, theta) -> np.ndarray:
    """Slope v'(0) along the curve that switches on component k from the boundary.

    For each k, theta with its k-th entry removed (and renormalised) is moved
    into the sector along theta(a) = ((1 - a^(4/3))^(1/2) theta_j, a^(2/3) at k);
    v(a) = V(theta(a)) has v'(0) = -(2/3) kappa sum_{j != k} theta_j^(3/2) |z_j - z_k|^-3.
    All entries are negative when every other theta_j is positive.
    """
    theta = np.asarray(theta, float)
    G = config.inverse_cubes()
    out = np.empty(config.K)
    for k in range(config.K):
        th = theta.copy()
        th[k] = 0.0
        th /= np.linalg.norm(th)
        out[k] = -(2.0 / 3.0) * KAPPA * float(G[k] @ th**1.5)
    return out


def boundary_curve_value(config: PointConfig, theta, k: int, a: float) -> float:
    """v(a) = V(theta(a)) for the boundary curve of :func:`boundary_repulsion`."""
    th = np.asarray(theta, float).copy()
    th[k] = 0.0
    th /= np.linalg.norm(th)
    th = np.sqrt(1.0 - a ** (4.0 / 3.0)) * th
    th[k] = a ** (2.0 / 3.0)
    return V(config, th)
