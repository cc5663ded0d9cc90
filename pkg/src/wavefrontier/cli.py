"""Command-line entry point: roots, kernel, bounds, verify, solve, simulate, all.

Every command reads one JSON configuration, writes JSON reports (sorted keys,
resolved config and version embedded) and CSV arrays with a one-line header
into the output directory. Exit codes: 0 ok, 2 certification failure,
3 iteration budget exhausted, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import subprocess
import sys
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import CONSTRUCTIONS, build_bounds, make_bound_spec, ordering_defect, profile_pair, verify_quasi
from .charroots import continue_root, quadratic_roots
from .core import TARGETS, ModelParams, WavefrontierError, validate
from .iteration import MaxIterExceeded, solve
from .pdesim import auto_dx, cfl_dt, front_speed, init_from_profile, run, stable_dt, transport_error, SimConfig
from .waveops import WaveOperators, analytic_lipschitz, f_ordering_suite, h_ordering_suite, lipschitz_ratios, pqm_check

EXIT_OK = 0
EXIT_CERT = 2
EXIT_BUDGET = 3
EXIT_USAGE = 64
SPEC_VERSION = 1
COMMANDS = ("roots", "kernel", "bounds", "verify", "solve", "simulate", "all")

# acceptance thresholds used by the simulate certificate
SPEED_REL_TOL = 0.05
R2_MIN = 0.999
TRANSPORT_TOL = 5e-2
RESIDUAL_CAP = 1e-4
MARGIN_TOL = 1e-10


class UsageError(Exception):
    pass


class StageFailed(Exception):
    def __init__(self, stage: str, exc: BaseException, code: int = EXIT_CERT):
        super().__init__(f"stage '{stage}' failed: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.exc = exc
        self.code = code

    def as_dict(self) -> dict:
        return {
            "stage": self.stage,
            "error": type(self.exc).__name__,
            "message": str(self.exc),
            "witness": getattr(self.exc, "witness", None),
        }


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class Numerics:
    L: float = 40.0
    h: float = 0.02
    mu: float | None = None
    tol_gap: float = 1e-8
    tol_residual: float = 1e-5
    max_iter: int = 2000
    lambda2_override: float | None = None
    T_override: float | None = None
    target_switch: str = "literal-paper"
    construction: str = "slow-root"
    n_samples: int = 1000
    n_lipschitz: int = 500


@dataclass(frozen=True)
class SimSettings:
    T: float = 5.0
    dx: float | None = None
    dt: float | None = None
    snapshot_every: float = 1.0
    record_every: float = 0.05
    margin: float = 20.0


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    numerics: Numerics = field(default_factory=Numerics)
    sim: SimSettings = field(default_factory=SimSettings)
    seed: int = 0
    output_dir: str = "wavefrontier_out"

    def resolved(self) -> dict:
        """Everything that affects results (output_dir and threads excluded)."""
        return {
            "spec_version": SPEC_VERSION,
            "model": asdict(self.model),
            "numerics": asdict(self.numerics),
            "sim": asdict(self.sim),
            "seed": self.seed,
        }


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise UsageError(f"'{name}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"unknown field(s) in '{name}': {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as e:
        raise UsageError(f"bad '{name}' section: {e}") from None


def _check_numbers(obj, name):
    for f in fields(obj):
        v = getattr(obj, f.name)
        if f.type in ("float", "int", "float | None") and v is not None and not isinstance(v, (int, float)):
            raise UsageError(f"{name}.{f.name} must be a number, got {v!r}")


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise UsageError("configuration must be a JSON object")
    if data.get("spec_version") != SPEC_VERSION:
        raise UsageError(f"spec_version must be {SPEC_VERSION}")
    unknown = sorted(set(data) - {"spec_version", "model", "numerics", "sim", "seed", "output_dir"})
    if unknown:
        raise UsageError(f"unknown top-level field(s): {', '.join(unknown)}")
    model = data.get("model")
    if not isinstance(model, dict) or "c" not in model:
        raise UsageError("model.c (wave speed) is required")
    model = dict(model)
    c = model["c"]
    if not isinstance(c, (int, float)) or isinstance(c, bool):
        raise UsageError(f"model.c must be a number, got {c!r}")
    for k in ("tau1", "tau2", "tau3", "tau4"):
        # default moving-frame delays r_i = 0.01
        model.setdefault(k, 0.01 / c if c else 0.0)
    model = _section(ModelParams, model, "model")
    numerics = _section(Numerics, data.get("numerics"), "numerics")
    sim = _section(SimSettings, data.get("sim"), "sim")
    for obj, name in ((model, "model"), (numerics, "numerics"), (sim, "sim")):
        _check_numbers(obj, name)
    if numerics.target_switch not in TARGETS:
        raise UsageError(f"numerics.target_switch must be one of {TARGETS}")
    if numerics.construction not in CONSTRUCTIONS:
        raise UsageError(f"numerics.construction must be one of {CONSTRUCTIONS}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise UsageError("seed must be an integer")
    return RunConfig(model, numerics, sim, seed, str(data.get("output_dir", "wavefrontier_out")))


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read config: {e}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"config is not valid JSON: {e}") from None
    return parse_config(data)


def default_config_dict() -> dict:
    cfg = RunConfig(ModelParams())
    d = cfg.resolved()
    d["output_dir"] = cfg.output_dir
    return d


# --------------------------------------------------------------------------
# output helpers

@lru_cache(maxsize=None)
def version_string() -> str:
    """git-describe style version: v<release>[-g<commit>]."""
    base = f"v{__version__}"
    try:
        out = subprocess.run(["git", "rev-parse", "--short=12", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return base
    sha = out.stdout.strip()
    return f"{base}-g{sha}" if out.returncode == 0 and sha else base


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class Writer:
    def __init__(self, out: Path, cfg: RunConfig, command: str):
        self.out = out
        self.cfg = cfg
        self.command = command
        out.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, payload: dict) -> Path:
        doc = dict(payload)
        doc["config"] = self.cfg.resolved()
        doc["version"] = version_string()
        doc["command"] = self.command
        path = self.out / name
        path.write_text(json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n")
        return path

    def csv(self, name: str, columns: dict) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        data = np.column_stack([np.asarray(v, dtype=float) for v in columns.values()])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(columns), comments="")
        return path


# --------------------------------------------------------------------------
# pipeline stages

def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except MaxIterExceeded as e:
        raise StageFailed(name, e, EXIT_BUDGET) from e
    except WavefrontierError as e:
        raise StageFailed(name, e) from e


def _setup(cfg: RunConfig):
    n = cfg.numerics
    try:
        wave = validate(cfg.model, target=n.target_switch, L=n.L, h=n.h, mu=n.mu)
    except ValueError as e:
        raise UsageError(str(e)) from None
    except WavefrontierError as e:
        raise StageFailed("validate", e) from e
    return cfg.model, wave


def _roots_report(model, wave) -> dict:
    lam0 = quadratic_roots(model.c, model.alpha1)
    mu0 = quadratic_roots(model.c, model.alpha2)
    out = {"lambda0": lam0[1], "mu0": mu0[1], "lambda0_slow": lam0[0], "mu0_slow": mu0[0]}
    out["lambda1"] = continue_root(model.c, model.alpha1, wave.r1, branch="fast").as_dict()
    out["mu1"] = continue_root(model.c, model.alpha2, wave.r3, branch="fast").as_dict()
    out["lambda1_slow"] = continue_root(model.c, model.alpha1, wave.r1, branch="slow").as_dict()
    out["mu1_slow"] = continue_root(model.c, model.alpha2, wave.r3, branch="slow").as_dict()
    return out


def _bounds_stage(cfg: RunConfig, model, wave):
    n = cfg.numerics
    if n.construction == "cubic-bridge" and n.T_override is not None:
        spec = _stage("roots", make_bound_spec, model, wave, "cubic-bridge", n.lambda2_override).with_T(n.T_override)
    else:
        spec = _stage("bounds", build_bounds, model, wave, n.construction, n.lambda2_override)
    report = verify_quasi(spec, model, wave, tol=MARGIN_TOL)
    order = ordering_defect(spec, wave)
    return spec, report, order


def _solve_stage(cfg: RunConfig, w: Writer):
    model, wave = _setup(cfg)
    ops = WaveOperators(model, wave)
    _stage("kernel", lambda: (ops.kernel1, ops.kernel2))
    spec, report, order = _bounds_stage(cfg, model, wave)
    diag = {"bounds": spec.as_dict(), "verify_quasi": report, "bound_ordering": order,
            "betas": [wave.beta1, wave.beta2], "mu": wave.mu, "box": list(wave.box),
            "equilibrium": list(wave.equilibrium)}
    if not report["ok"]:
        bad = [k for k in report["asserted"] if not report["inequalities"][k]["passed"]][0]
        from .bounds import InequalityViolated
        e = InequalityViolated(f"{bad} inequality fails", {"inequality": bad, **report["inequalities"][bad]})
        raise StageFailed("verify_quasi", e)
    pair = profile_pair(spec, wave.L, wave.h, wave.box)
    n = cfg.numerics
    try:
        result = _stage("iterate", solve, pair, ops, n.tol_gap, n.tol_residual, n.max_iter)
        code = EXIT_OK
    except StageFailed as sf:
        if not isinstance(sf.exc, MaxIterExceeded) or sf.exc.result is None:
            raise
        result = sf.exc.result
        code = EXIT_BUDGET
    diag.update(result.diagnostics())
    ok = bool(result.converged and result.certificates["residual_sup"] <= RESIDUAL_CAP)
    diag["ok"] = ok
    if code == EXIT_OK and not ok:
        code = EXIT_CERT
    t = result.phi.t
    w.csv("profile.csv", {"t": t, "phi": result.phi.values, "psi": result.psi.values})
    p = result.pair
    w.csv("bracket.csv", {"t": t, "lower_phi": p.lower_phi.values, "lower_psi": p.lower_psi.values,
                          "upper_phi": p.upper_phi.values, "upper_psi": p.upper_psi.values})
    w.json("diagnostics.json", diag)
    return model, wave, result, code


def _sim_config(cfg: RunConfig, model, profile) -> SimConfig:
    s = cfg.sim
    phi, psi = profile
    X = float(math.ceil(model.c * s.T + s.margin))
    if s.dx is None:
        dx, dt = auto_dx(model)
    else:
        dx = float(s.dx)
        dt = cfl_dt(dx, model)
    if s.dt is not None:
        dt = float(s.dt)
    bc = (phi.left_limit, phi.right_limit, psi.left_limit, psi.right_limit)
    return SimConfig(X, dx, dt, float(s.T), model, bc, s.record_every)


def _simulate_stage(cfg: RunConfig, w: Writer, model, result) -> tuple[dict, int]:
    profile = (result.phi, result.psi)
    sc = _stage("simulate", _sim_config, cfg, model, profile)
    s = cfg.sim
    n_snap = int(math.floor(s.T / s.snapshot_every + 1e-9)) if s.snapshot_every > 0 else 0
    snap_times = [k * s.snapshot_every for k in range(n_snap + 1)]
    state = _stage("simulate", init_from_profile, profile, sc)
    res = _stage("simulate", run, state, sc, snapshot_times=snap_times)
    x = sc.x
    index = []
    for i, (ts, u, v) in enumerate(res.snapshots):
        name = f"snapshots/snapshot_{i:03d}.csv"
        w.csv(name, {"x": x, "u": u, "v": v})
        index.append({"file": name, "t": ts})
    w.csv("front.csv", {"t": res.times, "x_front_u": res.front_u, "x_front_v": res.front_v})
    speed, r2 = _stage("front", front_speed, res.times, res.front_u, X=sc.X)
    err = transport_error(res, profile, sc)
    c = model.c
    summary = {
        "speed": speed,
        "r2": r2,
        "transport_error": err,
        "speed_rel_error": abs(speed - c) / c,
        "min_value": res.state.min_value,
        "dx": sc.dx,
        "dt": sc.dt,
        "X": sc.X,
        "T": sc.t_end,
        "snapshots": index,
        "thresholds": {"speed_rel": SPEED_REL_TOL, "r2": R2_MIN, "transport": TRANSPORT_TOL},
    }
    ok = summary["speed_rel_error"] <= SPEED_REL_TOL and r2 >= R2_MIN and err <= TRANSPORT_TOL
    summary["ok"] = bool(ok)
    w.json("simulate.json", summary)
    return summary, EXIT_OK if ok else EXIT_CERT


# --------------------------------------------------------------------------
# commands

def cmd_roots(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    w = Writer(out, cfg, "roots")
    try:
        model, wave = _setup(cfg)
        report = _stage("roots", _roots_report, model, wave)
        report["ok"] = True
        w.json("roots.json", report)
        return EXIT_OK
    except StageFailed as sf:
        w.json("roots.json", {"ok": False, "failure": sf.as_dict()})
        raise


def cmd_kernel(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    w = Writer(out, cfg, "kernel")
    try:
        model, wave = _setup(cfg)
        ops = WaveOperators(model, wave)
        kernels = {"kernel1": _stage("kernel", lambda: ops.kernel1), "kernel2": _stage("kernel", lambda: ops.kernel2)}
        payload = {}
        for name, k in kernels.items():
            w.csv(f"{name}.csv", {"t": k.samples.t, "G": k.samples.values})
            payload[name] = k.as_dict()
        payload["ok"] = True
        w.json("kernel.json", payload)
        return EXIT_OK
    except StageFailed as sf:
        w.json("kernel.json", {"ok": False, "failure": sf.as_dict()})
        raise


def cmd_bounds(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    w = Writer(out, cfg, "bounds")
    try:
        model, wave = _setup(cfg)
        spec, report, order = _bounds_stage(cfg, model, wave)
    except StageFailed as sf:
        w.json("bounds.json", {"ok": False, "failure": sf.as_dict()})
        raise
    pair = profile_pair(spec, wave.L, wave.h, wave.box)
    w.csv("bounds.csv", {"t": pair.lower_phi.t, "lower_phi": pair.lower_phi.values, "lower_psi": pair.lower_psi.values,
                         "upper_phi": pair.upper_phi.values, "upper_psi": pair.upper_psi.values})
    ok = bool(report["ok"] and max(order.values()) <= 1e-8)
    w.json("bounds.json", {"ok": ok, "bounds": spec.as_dict(), "verify_quasi": report, "ordering": order})
    return EXIT_OK if ok else EXIT_CERT


LITERAL_KEYS = ("H1", "H2", "H3", "H4", "H5", "F1", "F2", "F3", "F4")


def cmd_verify(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    w = Writer(out, cfg, "verify")
    try:
        model, wave = _setup(cfg)
        ops = WaveOperators(model, wave)
        _stage("kernel", lambda: (ops.kernel1, ops.kernel2))
    except StageFailed as sf:
        w.json("verify.json", {"ok": False, "failure": sf.as_dict()})
        raise
    n, seed = cfg.numerics, cfg.seed
    pqm = pqm_check(ops.spec, wave.beta1, wave.beta2, wave.box, n.n_samples, seed, raise_on_fail=False,
                    tol=MARGIN_TOL, threads=threads)
    hs = h_ordering_suite(ops, n.n_samples, seed, threads)
    fs = f_ordering_suite(ops, n.n_samples, seed, threads)
    lip = lipschitz_ratios(ops, n.n_lipschitz, seed, threads)
    margins = {**hs["margins"], **fs["margins"]}
    passed = {k: bool(v >= -MARGIN_TOL) for k, v in margins.items()}
    literal_ok = all(passed[k] for k in LITERAL_KEYS)
    competitive_ok = all(v for k, v in passed.items() if k not in ("H4", "H5", "F1", "F4"))
    ok = bool(pqm["ok"] and literal_ok and lip["h_ratio"] <= lip["h_bound"])
    w.json("verify.json", {
        "ok": ok,
        "pqm": pqm,
        "ordering_margins": margins,
        "ordering_passed": passed,
        "literal_ok": literal_ok,
        "competitive_ok": competitive_ok,
        "lipschitz": lip,
        "analytic_lipschitz": list(analytic_lipschitz(ops.spec, wave.box)),
        "tol": MARGIN_TOL,
    })
    return EXIT_OK if ok else EXIT_CERT


def cmd_solve(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    w = Writer(out, cfg, "solve")
    try:
        _, _, _, code = _solve_stage(cfg, w)
    except StageFailed as sf:
        w.json("diagnostics.json", {"ok": False, "failure": sf.as_dict()})
        raise
    return code


def cmd_simulate(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    w = Writer(out, cfg, "simulate")
    try:
        model, _, result, code = _solve_stage(cfg, w)
        if code != EXIT_OK:
            return code
        _, code = _simulate_stage(cfg, w, model, result)
    except StageFailed as sf:
        w.json("simulate.json", {"ok": False, "failure": sf.as_dict()})
        raise
    return code


def cmd_all(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    w = Writer(out, cfg, "all")
    summary = {"ok": False}
    try:
        model, _, result, code = _solve_stage(cfg, w)
        summary["residual"] = result.certificates["residual_sup"]
        summary["solve_ok"] = code == EXIT_OK
        summary["candidate"] = result.candidate
        if code == EXIT_OK:
            sim, code = _simulate_stage(cfg, w, model, result)
            summary.update(speed=sim["speed"], r2=sim["r2"], transport_error=sim["transport_error"],
                           simulate_ok=sim["ok"])
    except StageFailed as sf:
        summary["failure"] = sf.as_dict()
        w.json("summary.json", summary)
        raise
    summary["ok"] = code == EXIT_OK
    w.json("summary.json", summary)
    return code


COMMAND_FUNCS = {"roots": cmd_roots, "kernel": cmd_kernel, "bounds": cmd_bounds, "verify": cmd_verify,
                 "solve": cmd_solve, "simulate": cmd_simulate, "all": cmd_all}


# --------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _threads(value) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise UsageError(f"thread count must be an integer, got {value!r}") from None
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wavefrontier", description="Traveling waves of delayed-diffusion competition systems.")
    p.add_argument("--version", action="version", version=f"wavefrontier {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON configuration file (spec_version 1)")
    p.add_argument("--out", help="output directory (overrides output_dir in the config)")
    p.add_argument("--threads", help="worker threads for sampling suites (env WAVEFRONTIER_THREADS)")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        threads = _threads(args.threads if args.threads is not None else os.environ.get("WAVEFRONTIER_THREADS", 1))
        cfg = load_config(args.config)
        out = Path(args.out if args.out else cfg.output_dir)
        return COMMAND_FUNCS[args.command](cfg, out, threads)
    except UsageError as e:
        print(f"wavefrontier: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StageFailed as sf:
        print(f"wavefrontier: {sf}", file=sys.stderr)
        return sf.code


if __name__ == "__main__":
    sys.exit(main())
