"""Adaptive Dormand-Prince 5(4) integrator with dense output and terminal events.

Backward integration (t1 < t0) uses the same scheme with negative steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4
# continuous extension (Shampine 1986), y(t0 + s h) = y0 + h * K^T (P @ [s, s^2, s^3, s^4])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY, MIN_FACTOR, MAX_FACTOR = 0.9, 0.2, 5.0


class IntegrationDivergence(RuntimeError):
    """Step size underflow or non-finite field; carries the last valid state."""

    def __init__(self, message, t, y):
        super().__init__(f"{message} at t={t:.17g}")
        self.t = t
        self.y = np.array(y, copy=True)


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), n)
    status: str = "reached t1"
    event_index: int | None = None
    n_steps: int = 0
    n_rejected: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def t_final(self):
        return float(self.t[-1])

    @property
    def y_final(self):
        return self.y[-1]


def _dense(y0, h, K, s):
    q = K.T @ P  # (n, 4)
    return y0 + h * (q @ np.array([s, s**2, s**3, s**4]))


def _step(fun, t, y, f0, h):
    K = np.empty((7, y.size))
    K[0] = f0
    for i in range(1, 7):
        yi = y + h * (np.asarray(A[i]) @ K[:i])
        K[i] = fun(t + C[i] * h, yi)
    y_new = y + h * (B5 @ K)
    err = h * (E @ K)
    return y_new, err, K


def integrate_ode(fun, t0: float, t1: float, y0, rtol: float = 1e-10, atol=1e-14,
                  t_eval=None, events=(), first_step: float | None = None,
                  max_steps: int = 1_000_000) -> Trajectory:
    """Integrate y' = fun(t, y) from t0 to t1.

    Parameters
    ----------
    t_eval : array, optional
        Output times (monotone in the direction of integration).  Default: every
        accepted step.
    events : sequence of callables g(t, y)
        Terminal events; integration stops at the first time some g changes from
        <= 0 to > 0.  The crossing is located on the dense interpolant.
    """
    y = np.array(y0, dtype=float)
    atol = np.broadcast_to(np.asarray(atol, float), y.shape)
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    ts, ys = [t0], [y.copy()]
    if t_eval is not None:
        t_eval = np.asarray(t_eval, float)
        ts, ys = [], []
        ev_i = 0
        while ev_i < len(t_eval) and t_eval[ev_i] == t0:
            ts.append(t0)
            ys.append(y.copy())
            ev_i += 1
    t = float(t0)
    f0 = np.asarray(fun(t, y), float)
    if not np.all(np.isfinite(f0)):
        raise IntegrationDivergence("non-finite field", t, y)
    if span == 0:
        return Trajectory(np.array([t0]), y[None, :])
    g_prev = [g(t, y) for g in events]

    if first_step is None:
        scale = atol + rtol * np.abs(y)
        with np.errstate(over="ignore"):
            d0 = np.sqrt(np.mean((y / scale) ** 2))
            d1 = np.sqrt(np.mean((f0 / scale) ** 2))
        h = 1e-6 * span if d0 < 1e-5 or d1 < 1e-5 or not np.isfinite(d1) else 0.01 * d0 / d1
        h = min(max(h, 1e-10 * span), span)  # error control rejects a poor guess
    else:
        h = min(abs(first_step), span)

    n_steps = n_rej = 0
    status, event_index = "reached t1", None
    while direction * (t1 - t) > 0:
        if n_steps >= max_steps:
            raise IntegrationDivergence("maximum step count exceeded", t, y)
        h = min(h, abs(t1 - t))
        if h < 10 * np.finfo(float).eps * max(abs(t), 1.0):
            raise IntegrationDivergence("step size underflow", t, y)
        hs = direction * h
        y_new, err, K = _step(fun, t, y, f0, hs)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = np.sqrt(np.mean((err / scale) ** 2))
        if not np.isfinite(err_norm):
            h *= MIN_FACTOR
            n_rej += 1
            continue
        if err_norm > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
            n_rej += 1
            continue
        t_new = t + hs
        f_new = np.asarray(fun(t_new, y_new), float)
        n_steps += 1

        # terminal events
        hit = None
        for i, g in enumerate(events):
            gv = g(t_new, y_new)
            if g_prev[i] <= 0 < gv:
                phi = lambda s, g=g: g(t + s * hs, _dense(y, hs, K, s))
                s_root = brentq(phi, 0.0, 1.0, xtol=1e-14) if phi(0.0) <= 0 else 0.0
                if hit is None or s_root < hit[1]:
                    hit = (i, s_root)
            g_prev[i] = gv
        t_stop = t_new if hit is None else t + hit[1] * hs

        if t_eval is None:
            ts.append(t_stop)
            ys.append(y_new if hit is None else _dense(y, hs, K, hit[1]))
        else:
            while ev_i < len(t_eval) and direction * (t_eval[ev_i] - t_stop) <= 0:
                s = (t_eval[ev_i] - t) / hs
                ts.append(t_eval[ev_i])
                ys.append(_dense(y, hs, K, s))
                ev_i += 1
            if hit is not None:
                ts.append(t_stop)
                ys.append(_dense(y, hs, K, hit[1]))
        if hit is not None:
            status, event_index = "event", hit[0]
            break

        t, y, f0 = t_new, y_new, f_new
        factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
        h *= factor

    return Trajectory(np.array(ts), np.array(ys), status=status, event_index=event_index,
                      n_steps=n_steps, n_rejected=n_rej,
                      metadata={"rtol": rtol, "direction": "forward" if direction > 0 else "backward"})
