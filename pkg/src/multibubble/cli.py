"""Command-line entry point: ``multibubble <command> --config run.json --out DIR``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for input or
usage errors.  Floats in JSON and CSV output carry 17 significant digits and
every file is written to a temporary name first, then renamed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields

EXIT_OK, EXIT_CHECK, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    """Malformed configuration or missing prerequisite data (exit code 2)."""


@dataclass
class RunConfig:
    points: list = field(default_factory=list)
    T: float = 100.0
    T0: float = 10.0
    alpha: list | None = None
    forcing: str = "none"
    amplitude: float = 1.0
    rtol: float = 1e-12
    samples: int = 200
    shoot_T: float = 3.0
    shoot_T0: float = 2.0
    channels: list | None = None
    grid_n: int = 4000
    grid_scale: float = 4.0
    corrector_degree: int = 160
    interaction_times: list = field(default_factory=lambda: [10.0, 20.0, 40.0, 80.0])
    interaction_method: str = "bipolar"
    multistart: int = 16
    seed: int = 12345
    nu: float | None = None

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"configuration is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise InputError(f"unknown configuration keys: {', '.join(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def validate(self):
        for name in ("T", "T0", "shoot_T", "shoot_T0", "rtol", "amplitude", "grid_scale"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise InputError(f"{name} must be a positive number")
        for name in ("samples", "grid_n", "corrector_degree", "multistart", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise InputError(f"{name} must be a nonnegative integer")
        if not isinstance(self.points, list) or any(
                not _numbers(p) or len(p) != 5 for p in self.points):
            raise InputError("points must be a list of 5-vectors")
        if self.alpha is not None:
            if not _numbers(self.alpha) or len(self.alpha) != len(self.points) + 1:
                raise InputError(f"alpha needs {len(self.points) + 1} numbers "
                                 "(alpha_0 and one per site)")
        if not _numbers(self.interaction_times) or not self.interaction_times:
            raise InputError("interaction_times must be a nonempty list of numbers")
        if self.channels is not None and (not isinstance(self.channels, list) or any(
                not isinstance(k, int) or isinstance(k, bool) for k in self.channels)):
            raise InputError("channels must be a list of site indices")
        if self.nu is not None and not (_numbers([self.nu]) and self.nu > 0):
            raise InputError("nu must be a positive number")
        from .dynamics import FORCING_MODELS

        if self.forcing not in FORCING_MODELS:
            raise InputError(f"forcing must be one of {', '.join(FORCING_MODELS)}")
        if self.interaction_method not in ("bipolar", "montecarlo"):
            raise InputError("interaction_method must be 'bipolar' or 'montecarlo'")


def _numbers(seq) -> bool:
    return isinstance(seq, list) and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in seq)


# ---------------------------------------------------------------- output

def _clean(obj):
    """Convert numpy scalars/arrays and tuples into plain JSON-ready objects."""
    if hasattr(obj, "tolist"):
        obj = obj.tolist()
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def to_json(obj, indent: int = 2, level: int = 0) -> str:
    """JSON text with every float printed to 17 significant digits (NaN/inf as null)."""
    obj = _clean(obj) if level == 0 else obj
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {to_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if not obj:
        return "[]"
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
        return "[" + ", ".join(to_json(v, indent, level + 1) for v in obj) + "]"
    return "[\n" + ",\n".join(inner + to_json(v, indent, level + 1) for v in obj) + "\n" + pad + "]"


def write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(float(v)) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


class Run:
    """Output directory plus the running list of checks for one command."""

    def __init__(self, out: str):
        self.out = out
        self.reports = []

    def path(self, name):
        return os.path.join(self.out, name)

    def json(self, name, obj):
        write_atomic(self.path(name), to_json(obj) + "\n")

    def csv(self, name, header, rows):
        write_atomic(self.path(name), csv_text(header, rows))

    def check(self, rep):
        self.reports.append(rep)
        print(rep.line())
        return rep

    @property
    def code(self):
        return EXIT_OK if all(r.passed for r in self.reports) else EXIT_CHECK


# ---------------------------------------------------------------- commands

def _point_config(cfg: RunConfig, min_sites: int = 2):
    from .interaction import PointConfig

    if len(cfg.points) < min_sites:
        raise InputError(f"need at least {min_sites} points, got {len(cfg.points)}")
    try:
        return PointConfig(cfg.points)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _constants(cfg: RunConfig):
    from .configuration import compute_constants

    config = _point_config(cfg)
    return config, compute_constants(config, multistart=cfg.multistart, seed=cfg.seed)


def _resolve_nu(cfg: RunConfig, run: Run, needed: bool):
    """nu from --nu-override / config, else from spectrum.json in the output directory."""
    if cfg.nu is not None:
        return float(cfg.nu)
    spec_file = run.path("spectrum.json")
    if os.path.exists(spec_file):
        with open(spec_file) as fh:
            return float(json.load(fh)["nu"])
    if needed:
        raise InputError("the channel equations need nu: run the 'spectrum' command with the same "
                         "--out directory first, or pass --nu-override")
    return 0.0  # channels are identically zero, so nu never enters


def cmd_configure(cfg: RunConfig, run: Run):
    from .configuration import certify_fixed_point, second_order_check

    config, bc = _constants(cfg)
    run.json("constants.json", bc.to_dict())
    run.check(certify_fixed_point(config, bc.c))
    run.check(second_order_check(config, bc.theta))
    return run.code


def cmd_verify(cfg: RunConfig, run: Run):
    import numpy as np

    from . import interaction as ia
    from .numerics.quadrature import default_grid, quad_radial
    from .numerics.report import CheckReport
    from .profiles import eval_LambdaW, verify_ground_state
    from .spectral import solvability_defects

    grid = default_grid()
    lw2 = quad_radial(eval_LambdaW(grid.nodes) ** 2, grid)
    run.check(ia.kappa_quadrature_check())
    run.check(ia.kappa_consistency_check())
    run.check(verify_ground_state(grid))
    defects = solvability_defects()
    for name, val in defects.items():
        run.check(CheckReport(f"solvability of the {name} corrector against Lambda W",
                              val / lw2, 0.0, 1e-8))
    rng = np.random.default_rng(cfg.seed)
    K = 4
    config = ia.PointConfig.random(K, seed=cfg.seed)
    theta = np.abs(rng.standard_normal(K))
    theta /= np.linalg.norm(theta)
    r = float(rng.uniform(0.1, 2.0))
    Bv = ia.B(config, r * theta)
    run.check(CheckReport("B(r theta) = r^2 grad V(theta) at a seeded point",
                          float(np.linalg.norm(Bv - r**2 * ia.grad_V(config, theta))
                                / np.linalg.norm(Bv)), 0.0, 1e-12))
    run.json("verify.json", [rep.to_dict() for rep in run.reports])
    return run.code


def cmd_simulate(cfg: RunConfig, run: Run):
    import numpy as np

    from . import dynamics as dyn
    from .numerics.ode import IntegrationDivergence

    config, bc = _constants(cfg)
    alpha = np.zeros(config.K + 1) if cfg.alpha is None else np.asarray(cfg.alpha, float)
    needed = cfg.forcing != "none" or bool(np.any(alpha[1:] != 0))
    nu = _resolve_nu(cfg, run, needed)
    try:
        data = dyn.prepare_data(bc, cfg.T, alpha)
        frc = dyn.Forcing(cfg.forcing, cfg.amplitude, cfg.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    try:
        traj = dyn.simulate(config, bc, data, cfg.T0, forcing=frc.model, amplitude=cfg.amplitude,
                            seed=cfg.seed, nu=nu, rtol=cfg.rtol, samples=cfg.samples)
    except (IntegrationDivergence, dyn.BlowDownError) as exc:
        print(f"integration stopped: {exc}", file=sys.stderr)
        return EXIT_CHECK
    head, rows = dyn.trajectory_table(traj, config, bc)
    run.csv("trajectory.csv", head, rows)
    law = run.check(dyn.first_order_law_check(traj, bc))
    summary = {"exit_reason": traj.exit_reason, "t_final": float(traj.t[-1]),
               "metadata": traj.metadata, "regime_deviation": dyn.regime_deviation(traj, bc),
               "first_order_law": law.to_dict(),
               "monitor_max": {k: float(np.max(v)) for k, v in traj.monitors.items()}}
    run.json("simulate.json", summary)
    print(f"exit reason: {traj.exit_reason} at t = {traj.t[-1]:.17g}")
    return run.code


def cmd_shoot(cfg: RunConfig, run: Run):
    from . import dynamics as dyn
    from .numerics.report import CheckReport

    config, bc = _constants(cfg)
    nu = _resolve_nu(cfg, run, True)
    channels = range(config.K) if cfg.channels is None else cfg.channels
    results = []
    for k in channels:
        if not 0 <= int(k) < config.K:
            raise InputError(f"channel {k} is out of range for {config.K} sites")
        try:
            res = dyn.shoot_channels(config, bc, cfg.shoot_T, cfg.shoot_T0, int(k),
                                     forcing=cfg.forcing, amplitude=cfg.amplitude, seed=cfg.seed,
                                     nu=nu)
        except dyn.ShootingFailure as exc:
            print(f"shooting failed: {exc}", file=sys.stderr)
            return EXIT_CHECK
        worst = max((s for _, s in res.transversality), default=-math.inf)
        # every exit must have sum_k a~_k' a~_k < 0, i.e. -max > 0
        run.check(CheckReport(f"channel {k} transversality at bracket exits", -worst, 0.0, 0.0,
                              mode="lower", details={"exits": len(res.transversality)}))
        results.append({"k": int(k), "tuned": res.tuned, "window": res.window,
                        "window_width": res.window_width, "bracket_widths": res.widths,
                        "transversality": res.transversality, "trials": res.trials})
    run.json("shoot.json", {"nu": nu, "T": cfg.shoot_T, "T0": cfg.shoot_T0,
                            "forcing": cfg.forcing, "channels": results})
    return run.code


def cmd_spectrum(cfg: RunConfig, run: Run):
    from .numerics.report import CheckReport
    from .spectral import (build_sector, coercivity_constant, ground_eigenpair, kernel_residuals,
                           nu_by_shooting, sign_changes, spectral_grid)

    grid = spectral_grid(cfg.grid_n, cfg.grid_scale)
    op0, op1 = build_sector(0, grid), build_sector(1, grid)
    sd = ground_eigenpair(op0)
    nu_ode = nu_by_shooting()
    res = kernel_residuals(cfg.grid_n, cfg.grid_scale)
    y = sd.Y.values
    run.check(CheckReport("nu: grid against radial shooting", sd.nu, nu_ode, 1e-4))
    run.check(CheckReport("sign changes of Y above 1e-12 max|Y|",
                          sign_changes(y, 1e-12 * float(abs(y).max())), 0, 0))
    c0 = run.check(coercivity_constant(op0, sd))
    c1 = run.check(coercivity_constant(op1, sd))
    doc = {**sd.to_dict(), "nu_shooting": nu_ode, "kernel_residuals": res,
           "coercivity": {"ell0": c0.to_dict(), "ell1": c1.to_dict()},
           "grid": {"n": cfg.grid_n, "scale": cfg.grid_scale}}
    run.json("spectrum.json", doc)
    run.csv("Y.csv", ["r", "value"], zip(grid.nodes, y))
    return run.code


def cmd_correctors(cfg: RunConfig, run: Run):
    from .numerics.report import CheckReport
    from .spectral import solve_correctors

    cp = solve_correctors(degree=cfg.corrector_degree)
    for name in ("Q", "S"):
        run.check(CheckReport(f"residual of the {name} equation",
                              getattr(cp, f"residual_{name}"), 0.0, 1e-6))
        run.check(CheckReport(f"tail exponent of {name}", getattr(cp, f"tail_{name}"), -1.0, 0.1))
        prof = getattr(cp, name)
        run.csv(f"{name}.csv", ["r", "value"], zip(prof.grid.nodes, prof.values))
    run.json("correctors.json", cp.to_dict())
    return run.code


def cmd_interactions(cfg: RunConfig, run: Run):
    import numpy as np

    from .interaction import SCALING_KINDS, SCALING_TARGETS, scaling_sweep
    from .numerics.report import CheckReport

    config, bc = _constants(cfg)
    rows, doc = [], []
    for j in range(config.K):
        for k in range(j + 1, config.K):
            for kind in SCALING_KINDS:
                sw = scaling_sweep(kind, bc.c[j], bc.c[k], config.dist[j, k],
                                   cfg.interaction_times, method=cfg.interaction_method,
                                   seed=cfg.seed)
                for t, v, nv in zip(sw.times, sw.values, sw.log_normalised):
                    rows.append([kind, j, k, t, v, nv, sw.exponent])
                if kind == "five-thirds":
                    growth = float(np.max(sw.log_normalised) / np.min(sw.log_normalised))
                    run.check(CheckReport(f"{kind} ({j},{k}) spread of t^10/log t scaled values",
                                          growth, 1.0, 0.5))
                else:
                    run.check(CheckReport(f"{kind} ({j},{k}) decay exponent", sw.exponent,
                                          SCALING_TARGETS[kind], 0.2, mode="lower"))
                doc.append({"kind": kind, "pair": [j, k], "exponent": sw.exponent,
                            "values": sw.values})
    run.csv("interactions.csv", ["kind", "j", "k", "t", "value", "log_normalised",
                                 "fitted_exponent"],
            [[r[0], str(r[1]), str(r[2]), *r[3:]] for r in rows])
    run.json("interactions.json", doc)
    return run.code


COMMANDS = {
    "configure": cmd_configure,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "shoot": cmd_shoot,
    "spectrum": cmd_spectrum,
    "correctors": cmd_correctors,
    "interactions": cmd_interactions,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multibubble", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", metavar="PATH", help="RunConfig JSON document")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--threads", type=int, help="BLAS/OpenMP thread count")
    p.add_argument("--nu-override", type=float, metavar="X",
                   help="use this nu instead of spectral data")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on usage errors
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_INPUT
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        if args.config:
            try:
                with open(args.config) as fh:
                    cfg = RunConfig.from_json(fh.read())
            except OSError as exc:
                raise InputError(f"cannot read configuration: {exc}") from exc
        else:
            cfg = RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.nu_override is not None:
            if not args.nu_override > 0:
                raise InputError("--nu-override must be positive")
            cfg.nu = args.nu_override
        return COMMANDS[args.command](cfg, Run(args.out))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # a failed computation is a failed check, never a traceback
        from .numerics.sphere import BoundaryMinimizerError

        kind = "boundary minimiser" if isinstance(exc, BoundaryMinimizerError) else type(exc).__name__
        print(f"failed: {kind}: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
