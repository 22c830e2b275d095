"""Ground state of the 5D energy-critical wave equation and related closed forms.

W(r) = (1 + r^2/15)^(-3/2) solves  W'' + (4/r) W' + W^(7/3) = 0  on (0, inf).
All evaluators below are vectorised over numpy arrays and take the radius
r = |x| >= 0.
"""
from __future__ import annotations

import numpy as np

from .numerics.report import CheckReport

DIM = 5
SOBOLEV_CONST = DIM * (DIM - 2)  # 15
TAIL_CONST = SOBOLEV_CONST ** 1.5  # W(r) ~ 15^{3/2} r^{-3}


def _radius(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    return r


def _q(r):
    return 1.0 + _radius(r) ** 2 / SOBOLEV_CONST


def eval_W(r):
    return _q(r) ** -1.5


def eval_gradW_radial(r):
    """Radial derivative W'(r) = -(r/5)(1 + r^2/15)^(-5/2)."""
    r = _radius(r)
    return -(r / 5.0) * _q(r) ** -2.5


def eval_W_rr(r):
    """Second radial derivative of W."""
    r = _radius(r)
    q = r**2 / SOBOLEV_CONST
    return (0.8 * q - 0.2) * (1.0 + q) ** -3.5


def eval_LambdaW(r):
    """(3/2 + x.grad) W = (3/2)(1 - r^2/15)(1 + r^2/15)^(-5/2)."""
    r = _radius(r)
    q = r**2 / SOBOLEV_CONST
    return 1.5 * (1.0 - q) * (1.0 + q) ** -2.5


def eval_LambdaW_r(r):
    """Radial derivative of Lambda W."""
    r = _radius(r)
    q = r**2 / SOBOLEV_CONST
    # d/dr = (2r/15) d/dq
    return (2.0 * r / SOBOLEV_CONST) * 1.5 * (1.0 + q) ** -3.5 * (1.5 * q - 3.5)


def eval_ULambdaLambdaW(r):
    """(5/2 + x.grad) Lambda W = (3/2)(1 + q)^(-7/2)(5/2 - 7q + q^2/2), q = r^2/15."""
    r = _radius(r)
    q = r**2 / SOBOLEV_CONST
    return 1.5 * (1.0 + q) ** -3.5 * (2.5 - 7.0 * q + 0.5 * q**2)


def eval_DeltaLambdaW(r):
    # L(Lambda W) = 0  =>  Delta Lambda W = -(7/3) W^{4/3} Lambda W
    return -(7.0 / 3.0) * eval_W(r) ** (4.0 / 3.0) * eval_LambdaW(r)


def potential(r):
    """f'(W) = (7/3) W^{4/3} = (7/3)(1 + r^2/15)^(-2)."""
    return (7.0 / 3.0) * _q(r) ** -2.0


def rescale_H1(fn, lam: float):
    """H^1-critical rescaling v -> lam^{-3/2} v(./lam) of a radial evaluator."""
    if lam <= 0:
        raise ValueError("scale must be positive")
    return lambda r: lam**-1.5 * fn(np.asarray(r, dtype=float) / lam)


def rescale_L2(fn, lam: float):
    """L^2-critical rescaling v -> lam^{-5/2} v(./lam)."""
    if lam <= 0:
        raise ValueError("scale must be positive")
    return lambda r: lam**-2.5 * fn(np.asarray(r, dtype=float) / lam)


def nonlinearity(u):
    """Return (f, F, f', f'') at u for f(u) = |u|^{4/3} u.

    f''(0) is set to 0 (the limit of |u|^{1/3}).
    """
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    f = a ** (4.0 / 3.0) * u
    F = 0.3 * a ** (10.0 / 3.0)
    fp = (7.0 / 3.0) * a ** (4.0 / 3.0)
    fpp = (28.0 / 9.0) * np.cbrt(u)
    if f.ndim == 0:
        return float(f), float(F), float(fp), float(fpp)
    return f, F, fp, fpp


def f(u):
    u = np.asarray(u, dtype=float)
    return np.abs(u) ** (4.0 / 3.0) * u


def F(u):
    return 0.3 * np.abs(np.asarray(u, dtype=float)) ** (10.0 / 3.0)


def fprime(u):
    return (7.0 / 3.0) * np.abs(np.asarray(u, dtype=float)) ** (4.0 / 3.0)


def ground_state_residual(r):
    """Pointwise W'' + (4/r) W' + W^{7/3}; r must be positive."""
    r = _radius(r)
    if np.any(r == 0):
        raise ValueError("residual is evaluated at r > 0")
    return eval_W_rr(r) + 4.0 / r * eval_gradW_radial(r) + eval_W(r) ** (7.0 / 3.0)


def verify_ground_state(grid, tol: float = 1e-10) -> CheckReport:
    nodes = grid.nodes if hasattr(grid, "nodes") else np.atleast_1d(np.asarray(grid, float))
    nodes = nodes[nodes > 0]
    res = float(np.max(np.abs(ground_state_residual(nodes))))
    return CheckReport("ground_state_residual", res, 0.0, tol)


def taylor1_remainder(u, v):
    return np.abs(f(u + v) - f(u) - f(v) - fprime(u) * v)


def taylor1_bound(u, v):
    return np.abs(u) ** (2.0 / 3.0) * np.abs(v) ** (5.0 / 3.0)


def taylor2_remainder(u, vs):
    """vs has shape (..., J)."""
    vs = np.asarray(vs, dtype=float)
    s = vs.sum(axis=-1)
    return np.abs(f(u + s) - f(u) - f(vs).sum(axis=-1) - fprime(u) * s)


def taylor2_bound(u, vs):
    vs = np.asarray(vs, dtype=float)
    a = np.abs(vs)
    first = np.abs(u) ** (2.0 / 3.0) * (a ** (5.0 / 3.0)).sum(axis=-1)
    # sum over ordered pairs j != l of |v_j| |v_l|^{4/3}
    cross = a.sum(axis=-1) * (a ** (4.0 / 3.0)).sum(axis=-1) - (a ** (7.0 / 3.0)).sum(axis=-1)
    return first + cross


def _ratio(rem, bound):
    rem = np.asarray(rem)
    bound = np.asarray(bound)
    out = np.zeros_like(rem)
    nz = bound > 0
    out[nz] = rem[nz] / bound[nz]
    # zero bound forces zero remainder (checked to rounding)
    out[~nz] = np.where(rem[~nz] > 1e-12, np.inf, 0.0)
    return out


def taylor_remainder_check(samples: int = 10_000, seed: int = 20240501, J: int = 3,
                           span: float = 10.0, tol: float = 10.0) -> CheckReport:
    """Max of remainder/bound over random draws in [-span, span] for both Taylor inequalities."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-span, span, samples)
    v = rng.uniform(-span, span, samples)
    vs = rng.uniform(-span, span, (samples, J))
    r1 = _ratio(taylor1_remainder(u, v), taylor1_bound(u, v))
    r2 = _ratio(taylor2_remainder(u, vs), taylor2_bound(u, vs))
    worst = float(max(r1.max(), r2.max()))
    return CheckReport("taylor_remainder_ratio", worst, 0.0, tol)
