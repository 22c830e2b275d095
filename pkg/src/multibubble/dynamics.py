"""Reduced modulation flow for K bubbles with scalar instability channels.

State layout (forward time t):

    lambda_k' = -b_k,   b_k' = B_k(lambda),
    (a_k^+)' = +nu / lambda_k a_k^+ + eps_k^+(t),
    (a_k^-)' = -nu / lambda_k a_k^- + eps_k^-(t),

with |eps| <= C_f t^-4.  The exact solution lambda = c t^-2, b = 2 c t^-3,
a = 0 is the blow-up regime.  Runs usually go backward from a large T towards
a smaller T0, where the a^- channels grow and have to be tuned by shooting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .configuration import BlowupConstants
from .interaction import DB, KAPPA, PointConfig, V
from .numerics.ode import integrate_ode
from .numerics.report import CheckReport
from .numerics.roots import bisect_predicate

FORCING_MODELS = ("none", "worst-case", "random-bounded", "constant")
MONITORS = ("lambda-boot", "b-boot", "ap-boot", "brouwer-boot")


class BlowDownError(RuntimeError):
    """Some lambda_k reached zero; ``state`` is the offending (t, packed vector)."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


class ShootingFailure(RuntimeError):
    """The shooting predicate takes the same value at both ends of the bracket."""


@lru_cache(maxsize=1)
def default_nu() -> float:
    """nu from the ground-state eigenvalue problem (cached; a few seconds on first call)."""
    from .spectral import nu_by_shooting

    return nu_by_shooting()


def _nu(nu):
    return default_nu() if nu is None else float(nu)


# ---------------------------------------------------------------- state types

@dataclass(frozen=True)
class ReducedState:
    t: float
    lam: np.ndarray
    b: np.ndarray
    a_plus: np.ndarray
    a_minus: np.ndarray

    def __post_init__(self):
        for name in ("lam", "b", "a_plus", "a_minus"):
            object.__setattr__(self, name, np.array(getattr(self, name), float).reshape(-1))
        K = self.lam.size
        if any(getattr(self, n).size != K for n in ("b", "a_plus", "a_minus")):
            raise ValueError("state components must all have K entries")
        if not self.t > 0:
            raise ValueError(f"time must be positive, got {self.t}")
        if np.any(self.lam <= 0):
            raise ValueError(f"scales must be positive, got {self.lam}")

    @property
    def K(self) -> int:
        return self.lam.size

    def pack(self) -> np.ndarray:
        return np.concatenate([self.lam, self.b, self.a_plus, self.a_minus])

    @classmethod
    def unpack(cls, t, y, K: int | None = None) -> "ReducedState":
        y = np.asarray(y, float)
        K = y.size // 4 if K is None else K
        return cls(float(t), y[:K], y[K:2 * K], y[2 * K:3 * K], y[3 * K:4 * K])

    def permuted(self, perm) -> "ReducedState":
        perm = np.asarray(perm)
        return ReducedState(self.t, self.lam[perm], self.b[perm], self.a_plus[perm],
                            self.a_minus[perm])


def regime_state(constants: BlowupConstants, t: float) -> ReducedState:
    c = np.asarray(constants.c, float)
    z = np.zeros_like(c)
    return ReducedState(t, c * t**-2.0, 2.0 * c * t**-3.0, z, z)


@dataclass(frozen=True)
class PolarDecomposition:
    r: float
    theta: np.ndarray
    rho: float
    b_perp: np.ndarray


def decompose(state: ReducedState) -> PolarDecomposition:
    """lambda = r theta and b = rho theta + b_perp with b_perp orthogonal to theta."""
    r = float(np.linalg.norm(state.lam))
    theta = state.lam / r
    rho = float(theta @ state.b)
    return PolarDecomposition(r, theta, rho, state.b - rho * theta)


def lyapunov_F(config: PointConfig, dec: PolarDecomposition) -> float:
    return 0.5 * dec.r**-3 * float(dec.b_perp @ dec.b_perp) + V(config, dec.theta)


def lyapunov_G(constants: BlowupConstants, dec: PolarDecomposition) -> float:
    cn = float(np.linalg.norm(constants.c))
    return 0.5 * dec.rho**2 - 2.0 / cn * dec.r**3


@dataclass(frozen=True)
class ShootingVariables:
    a0: float  # t^(12/5) (r - |c| t^-2)
    ak: np.ndarray  # t^4 a_k^-

    @classmethod
    def from_state(cls, state: ReducedState, constants: BlowupConstants) -> "ShootingVariables":
        t = state.t
        cn = float(np.linalg.norm(constants.c))
        r = float(np.linalg.norm(state.lam))
        return cls(t**2.4 * (r - cn * t**-2.0), t**4 * state.a_minus)

    @property
    def norm_sq(self) -> float:
        return self.a0**2 + float(self.ak @ self.ak)


# ---------------------------------------------------------------- vector field

def _random_forcing(K: int, seed: int, terms: int = 4):
    """Smooth seeded forcing shapes u(t) with |u| <= 1, two per site (a^+ and a^-)."""
    rng = np.random.default_rng(seed)
    w = rng.random((2, K, terms))
    w /= w.sum(axis=-1, keepdims=True)
    omega = rng.uniform(0.5, 4.0, (2, K, terms))
    phase = rng.uniform(0.0, 2 * np.pi, (2, K, terms))

    def u(t):
        return np.sum(w * np.sin(omega * np.log(t) + phase), axis=-1)

    return u


@dataclass(frozen=True)
class Forcing:
    """Channel remainders eps^+ and eps^- bounded by ``amplitude`` * t^-4.

    ``worst-case`` pushes |a| outward along the direction of integration;
    ``constant`` is the fixed-sign bound +amplitude * t^-4 on every channel.
    """

    model: str = "none"
    amplitude: float = 1.0
    seed: int = 0
    direction: float = -1.0

    def __post_init__(self):
        if self.model not in FORCING_MODELS:
            raise ValueError(f"unknown forcing model {self.model!r}; choose from {FORCING_MODELS}")

    def __call__(self, t, a_plus, a_minus):
        if self.model == "none":
            return 0.0, 0.0
        bound = self.amplitude * t**-4.0
        if self.model == "worst-case":
            return (self.direction * bound * np.sign(a_plus),
                    self.direction * bound * np.sign(a_minus))
        if self.model == "constant":
            return np.full_like(a_plus, bound), np.full_like(a_minus, bound)
        u = _random_forcing(a_plus.size, self.seed)(t)
        return bound * u[0], bound * u[1]


def vector_field(config: PointConfig, state: ReducedState, forcing: Forcing | str = "none",
                 nu: float | None = None) -> np.ndarray:
    """Packed time derivative of ``state`` (layout of :meth:`ReducedState.pack`)."""
    if isinstance(forcing, str):
        forcing = Forcing(forcing)
    nu = _nu(nu)
    return _field(config, forcing, nu, state.K)(state.t, state.pack())


def _field(config, forcing, nu, K):
    G = config.inverse_cubes()  # B(lam) = -kappa lam^(1/2) (G lam^(3/2)), inlined for speed

    def f(t, y):
        lam, b = y[:K], y[K:2 * K]
        ap, am = y[2 * K:3 * K], y[3 * K:]
        if np.any(lam <= 0):
            raise BlowDownError(f"scale reached zero at t={t:.17g}", (t, y.copy()))
        ep, em = forcing(t, ap, am)
        rate = nu / lam
        root = np.sqrt(lam)
        Bl = -KAPPA * root * (G @ (lam * root))
        return np.concatenate([-b, Bl, rate * ap + ep, -rate * am + em])

    return f


# ---------------------------------------------------------------- data and runs

def prepare_data(constants: BlowupConstants, T: float, alpha) -> ReducedState:
    """Well-prepared data at time T from alpha = (alpha_0, alpha_1..K) in the closed unit ball."""
    c = np.asarray(constants.c, float)
    alpha = np.asarray(alpha, float)
    if alpha.size != c.size + 1:
        raise ValueError(f"alpha needs {c.size + 1} entries, got {alpha.size}")
    if np.linalg.norm(alpha) > 1.0 + 1e-14:
        raise ValueError(f"|alpha| = {np.linalg.norm(alpha):.17g} exceeds 1")
    cn = float(np.linalg.norm(c))
    r = cn * T**-2.0 + T**-2.4 * alpha[0]
    return ReducedState(T, r * c / cn, 2.0 * r**1.5 * c / cn**1.5, np.zeros_like(c),
                        T**-4.0 * alpha[1:])


def monitor_values(state: ReducedState, constants: BlowupConstants) -> dict:
    """Left side divided by right side of each bootstrap inequality (violated when > 1)."""
    t = state.t
    c = np.asarray(constants.c, float)
    sv = ShootingVariables.from_state(state, constants)
    return {
        "lambda-boot": float(np.linalg.norm(state.lam - c * t**-2.0)) * t ** (7 / 3),
        "b-boot": float(np.linalg.norm(state.b - 2.0 * c * t**-3.0)) * t ** (10 / 3),
        "ap-boot": float(state.a_plus @ state.a_plus) * t**8,
        "brouwer-boot": sv.norm_sq,
    }


@dataclass
class ReducedTrajectory:
    t: np.ndarray
    y: np.ndarray
    K: int
    exit_reason: str
    metadata: dict = field(default_factory=dict)
    monitors: dict = field(default_factory=dict)  # name -> array over samples

    @property
    def states(self) -> list:
        return [ReducedState.unpack(t, y, self.K) for t, y in zip(self.t, self.y)]

    @property
    def final(self) -> ReducedState:
        return ReducedState.unpack(self.t[-1], self.y[-1], self.K)

    def component(self, name: str) -> np.ndarray:
        K = self.K
        idx = {"lam": 0, "b": 1, "a_plus": 2, "a_minus": 3}[name]
        return self.y[:, idx * K:(idx + 1) * K]


def simulate(config: PointConfig, constants: BlowupConstants, data: ReducedState, T0: float,
             forcing: str = "none", amplitude: float = 1.0, seed: int = 0,
             nu: float | None = None, rtol: float = 1e-12, atol: float = 1e-40,
             samples: int | None = None, monitor: bool = True,
             slack: float = 1e-9) -> ReducedTrajectory:
    """Integrate from ``data.t`` to ``T0`` and evaluate the bootstrap monitors.

    With ``monitor`` on, the run stops at the first time one of the ratios in
    :func:`monitor_values` exceeds 1 + ``slack``; the exit reason names it, or is
    ``"reached T0"``.  ``samples`` gives log-spaced output times; by default every
    accepted step is kept.  Sample times are hit as step endpoints, not by
    interpolation, so sampled states keep the accuracy set by ``rtol``.
    """
    K = data.K
    T = data.t
    direction = -1.0 if T0 < T else 1.0
    nu = _nu(nu)
    frc = Forcing(forcing, amplitude, seed, direction)
    fun = _field(config, frc, nu, K)
    events = []
    if monitor:
        for name in MONITORS:
            events.append(lambda t, y, name=name: monitor_values(
                ReducedState.unpack(t, y, K), constants)[name] - (1.0 + slack))
    stops = [T, T0] if samples is None else np.geomspace(T, T0, max(samples, 2))
    start = [g(T, data.pack()) for g in events]
    ts, ys = [T], [data.pack()]
    reason, steps, rejected = "reached T0", 0, 0
    if any(v > 0 for v in start):
        # data already outside the bootstrap region: exit at T
        reason = MONITORS[next(i for i, v in enumerate(start) if v > 0)]
        stops = []
    h = None
    for a, b in zip(stops[:-1], stops[1:]):
        # sample times are step endpoints, so samples carry the full order of the scheme
        b = T0 if b == stops[-1] else float(b)
        seg = integrate_ode(fun, ts[-1], b, ys[-1], rtol=rtol, atol=atol, events=events,
                            first_step=h)
        steps, rejected = steps + seg.n_steps, rejected + seg.n_rejected
        if len(seg.t) > 2:
            h = abs(seg.t[-2] - seg.t[-3]) if len(seg.t) > 3 else abs(seg.t[-1] - seg.t[-2])
        if samples is None:
            ts.extend(seg.t[1:])
            ys.extend(seg.y[1:])
        else:
            ts.append(seg.t[-1])
            ys.append(seg.y[-1])
        if seg.status == "event":
            reason = MONITORS[seg.event_index]
            break
    traj_t, traj_y = np.array(ts), np.array(ys)
    table = {name: [] for name in MONITORS}
    for t, y in zip(traj_t, traj_y):
        for name, v in monitor_values(ReducedState.unpack(t, y, K), constants).items():
            table[name].append(v)
    meta = {"rtol": rtol, "atol": atol, "direction": "backward" if direction < 0 else "forward",
            "forcing": forcing, "amplitude": amplitude, "seed": seed, "nu": nu,
            "steps": steps, "rejected": rejected}
    return ReducedTrajectory(traj_t, traj_y, K, reason, meta,
                             {k: np.array(v) for k, v in table.items()})


def trajectory_table(traj: ReducedTrajectory, config: PointConfig,
                     constants: BlowupConstants) -> tuple[list, np.ndarray]:
    """Header and rows (t, lambda, b, a+, a-, r, rho, F, G, a~0, a~k) for CSV output."""
    K = traj.K
    head = (["t"] + [f"lambda_{k + 1}" for k in range(K)] + [f"b_{k + 1}" for k in range(K)]
            + [f"a_plus_{k + 1}" for k in range(K)] + [f"a_minus_{k + 1}" for k in range(K)]
            + ["r", "rho", "F", "G", "a_tilde_0"] + [f"a_tilde_{k + 1}" for k in range(K)])
    rows = []
    for s in traj.states:
        dec = decompose(s)
        sv = ShootingVariables.from_state(s, constants)
        rows.append(np.concatenate([[s.t], s.pack(),
                                    [dec.r, dec.rho, lyapunov_F(config, dec),
                                     lyapunov_G(constants, dec), sv.a0], sv.ak]))
    return head, np.array(rows)


# ---------------------------------------------------------------- diagnostics

def regime_deviation(traj: ReducedTrajectory, constants: BlowupConstants) -> dict:
    """Weighted distances of a trajectory from the exact regime, maximised over samples."""
    c = np.asarray(constants.c, float)
    t = traj.t[:, None]
    lam, b = traj.component("lam"), traj.component("b")
    cn = float(np.linalg.norm(c))
    G = np.array([lyapunov_G(constants, decompose(s)) for s in traj.states])
    return {
        "lambda_weighted": float(np.max(np.abs(lam - c * t**-2.0) * t ** (7 / 3))),
        "b_weighted": float(np.max(np.abs(b - 2.0 * c * t**-3.0) * t ** (10 / 3))),
        "lambda_relative": float(np.max(np.abs(lam - c * t**-2.0) / (c * t**-2.0))),
        "G_scaled": float(np.max(np.abs(G) / (cn**2 * traj.t**-6.0))),
    }


def first_order_law_check(traj: ReducedTrajectory, constants: BlowupConstants,
                          bound: float = 10.0) -> CheckReport:
    """max_t t^(31/9) |r' + 2 |c|^(-1/2) r^(3/2)|, using r' = -rho."""
    cn = float(np.linalg.norm(constants.c))
    vals = []
    for s in traj.states:
        dec = decompose(s)
        vals.append(s.t ** (31 / 9) * abs(-dec.rho + 2.0 * cn**-0.5 * dec.r**1.5))
    vals = np.array(vals)
    return CheckReport("first-order law for r", float(np.max(vals)), 0.0, bound,
                       details={"argmax_t": float(traj.t[int(np.argmax(vals))])})


# ---------------------------------------------------------------- shooting

@dataclass
class ShootingResult:
    k: int
    tuned: float
    widths: list  # bracket width after each bisection step
    transversality: list  # (exit time, sum_k a~_k' a~_k) for every exited trial
    window: tuple | None = None  # data range whose run stays in the ball down to T0
    trials: int = 0

    @property
    def window_width(self) -> float:
        return float("nan") if self.window is None else self.window[1] - self.window[0]


def _shoot_run(config, constants, T, T0, k, value, frc, nu, rtol):
    K = constants.c.size
    data = prepare_data(constants, T, np.zeros(K + 1))
    am = np.zeros(K)
    am[k] = value
    data = ReducedState(T, data.lam, data.b, data.a_plus, am)
    fun = _field(config, frc, nu, K)

    def ball(t, y):
        return ShootingVariables.from_state(ReducedState.unpack(t, y, K), constants).norm_sq - 1.0

    if ball(T, data.pack()) > 0:
        t_end, y_end, exited = T, data.pack(), True
    else:
        traj = integrate_ode(fun, T, T0, data.pack(), rtol=rtol, atol=1e-30, events=[ball])
        t_end, y_end = traj.t_final, traj.y_final
        exited = traj.status == "event"
    am_end = y_end[3 * K:]
    trans = None
    if exited:
        dy = fun(t_end, y_end)
        a_t = t_end**4 * am_end
        da_t = 4 * t_end**3 * am_end + t_end**4 * dy[3 * K:]
        trans = float(da_t @ a_t)
    return exited, float(am_end[k]), t_end, trans


def shoot_channels(config: PointConfig, constants: BlowupConstants, T: float, T0: float,
                   k: int = 0, forcing: str = "none", amplitude: float = 1.0, seed: int = 0,
                   nu: float | None = None, rel_tol: float = 2.0**-50, rtol: float = 1e-9,
                   window: bool = True, window_tol: float = 1e-3) -> ShootingResult:
    """Tune a_k^-(T) in [-T^-4, T^-4] so the backward run keeps |a~| <= 1 down to T0.

    Each trial integrates the full reduced system from regime data with only
    channel k switched on; the predicate is the sign of a_k^- at the end of the
    run (exit time or T0).  With ``window`` the edges of the set of successful
    data are located by bisection in the log of their distance to the tuned value.
    """
    if not T > T0:
        raise ValueError("shooting runs backward: need T > T0")
    nu = _nu(nu)
    frc = Forcing(forcing, amplitude, seed, -1.0)
    trans = []
    runs = {"n": 0}

    def run(value):
        runs["n"] += 1
        exited, a_end, t_end, tr = _shoot_run(config, constants, T, T0, k, value, frc, nu, rtol)
        if exited:
            trans.append((t_end, tr))
        return exited, a_end

    half = T**-4.0
    try:
        br = bisect_predicate(lambda v: run(v)[1] > 0, -half, half, tol=rel_tol * 2 * half,
                              maxiter=400)
    except ValueError as exc:
        raise ShootingFailure(f"channel {k}: no sign change of a_k^- on the data bracket") from exc
    widths = [2 * half / 2.0 ** (i + 1) for i in range(len(br.history))]
    tuned = 0.5 * (br.lo + br.hi)
    res = ShootingResult(k, tuned, widths, trans)
    if window:
        ok = lambda v: not run(v)[0]
        if ok(tuned):
            edges = []
            for sign, end in ((-1.0, -half), (1.0, half)):
                span = abs(end - tuned)
                lo, hi = np.log(span) - 60.0, np.log(span)
                # success at tuned + sign e^lo, failure at the bracket end
                if not ok(tuned + sign * np.exp(lo)):
                    edges.append(tuned)
                    continue
                if ok(end):
                    edges.append(end)
                    continue
                e = bisect_predicate(lambda x: not ok(tuned + sign * np.exp(x)), lo, hi,
                                     tol=window_tol)
                edges.append(tuned + sign * np.exp(0.5 * (e.lo + e.hi)))
            res.window = (edges[0], edges[1])
    res.trials = runs["n"]
    return res


def channel_growth_fit(config: PointConfig, constants: BlowupConstants, T0: float, T_values,
                       k: int = 0, nu: float | None = None, tol: float = 0.1, **kw) -> CheckReport:
    """Slope of log(success window) against T^3 - T0^3, compared with -nu / (3 c_k)."""
    nu = _nu(nu)
    x, yv, trans = [], [], []
    for T in T_values:
        res = shoot_channels(config, constants, T, T0, k, nu=nu, **kw)
        x.append(T**3 - T0**3)
        yv.append(np.log(res.window_width))
        trans.extend(s for _, s in res.transversality)
    slope = float(np.polyfit(x, yv, 1)[0])
    expected = -nu / (3.0 * float(constants.c[k]))
    return CheckReport(f"channel {k} growth rate", slope, expected, tol, mode="rel",
                       details={"T3_minus_T03": x, "log_window": yv, "transversality": trans})


# ---------------------------------------------------------------- linearization

@dataclass
class LinearizationResult:
    absolute: np.ndarray  # sigma with delta lambda ~ t^sigma, sorted by real part
    relative: np.ndarray  # sigma + 2, growth relative to the regime c t^-2
    radial: tuple  # (unstable, stable) relative exponents along c
    tangent: np.ndarray  # relative exponents of the remaining modes
    monodromy: np.ndarray = field(repr=False, default=None)
    note: str = "exponents derived from the variational equation; not stated in closed form"


def linearize_about_regime(config: PointConfig, constants: BlowupConstants, T0: float = 10.0,
                           T: float = 100.0, rtol: float = 1e-11) -> LinearizationResult:
    """Power-law exponents of the flow linearised about lambda = c t^-2.

    The variational system dl' = -db, db' = DB(c t^-2) dl is integrated from T0
    to T in the variables (dl, t db), whose entries stay of order one.  In
    s = log t that system is autonomous, so its transfer matrix M equals
    exp(A log(T / T0)) and the eigenvalues of M are (T / T0)^sigma.
    """
    c = np.asarray(constants.c, float)
    K = c.size
    n = 2 * K

    def fun(t, y):
        Phi = y.reshape(n, n)
        J = np.zeros((n, n))
        J[:K, K:] = -np.eye(K)
        J[K:, :K] = t**2 * DB(config, c * t**-2.0)
        J[K:, K:] = np.eye(K)
        return (J @ Phi).ravel() / t

    traj = integrate_ode(fun, T0, T, np.eye(n).ravel(), rtol=rtol, atol=1e-14)
    M = traj.y_final.reshape(n, n)
    ev, vec = np.linalg.eig(M)
    sigma = np.log(ev.astype(complex)) / np.log(T / T0)
    order = np.argsort(sigma.real)
    sigma, vec = sigma[order], vec[:, order]
    theta = c / np.linalg.norm(c)
    align = np.array([abs(theta @ vec[:K, j]) / max(np.linalg.norm(vec[:K, j]), 1e-300)
                      for j in range(n)])
    radial_idx = np.argsort(-align)[:2]
    radial = sorted((float(sigma[j].real + 2.0) for j in radial_idx), reverse=True)
    rest = np.array([sigma[j] + 2.0 for j in range(n) if j not in radial_idx])
    rel = sigma + 2.0
    return LinearizationResult(sigma, rel, tuple(radial), rest, M)


def radial_indicial_roots() -> tuple[float, float]:
    """Relative exponents from r'' = n r^2 about r = |c| t^-2: sigma^2 - sigma - 12 = 0, shifted by 2."""
    roots = np.roots([1.0, -1.0, -12.0])
    return tuple(float(x) + 2.0 for x in sorted(roots.real, reverse=True))
