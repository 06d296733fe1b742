"""Command-line front end: one experiment per invocation, CSV plus JSON sidecars.

Parameters come from (lowest to highest precedence) built-in defaults, a
named preset, a flat ``key = value`` config file and ``--param key=value``
flags. Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigError, HPViolation, NoSolution, NonFiniteAmplitude, NonPositiveFI,
                     QuadratureNotConverged, ThetaNearSingular, TruncationTooSmall)
from .export import sidecar, write_csv, write_json, write_qfi_report, write_wigner

log = logging.getLogger("measkerr")

KINDS = ("qfi-sweep", "kappa-sweep", "stateprep", "wigner", "ensemble-check", "baselines",
         "design-curves")
STOCHASTIC = ("stateprep", "ensemble-check")
LOG_ENV = "MEASKERR_LOG_LEVEL"


def _floats(s: str) -> list[float]:
    return [float(x) for x in str(s).replace(";", ",").split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in str(s).replace(";", ",").split(",") if x.strip()]


def _window(s: str):
    s = str(s).strip().lower()
    if s in ("auto", ""):
        return None
    lo, hi = _floats(s)
    if not lo < hi:
        raise ValueError("window must be lo,hi with lo < hi")
    return (lo, hi)


def _optional_float(s):
    s = str(s).strip().lower()
    return None if s in ("", "none", "auto") else float(s)


def _optional_int(s):
    s = str(s).strip().lower()
    return None if s in ("", "none", "auto") else int(s)


SCHEMA = {
    "r": float, "g": _floats, "theta0": _floats, "correction": str, "n_trunc": _optional_int,
    "n_bar": _floats, "n_bar_min": float, "n_bar_max": float, "per_decade": int,
    "window": _window, "seed": _optional_int, "n_runs": int, "alpha": float,
    "state": str, "kappa": float, "r_prime": float, "theta_prime": float,
    "j": _floats, "sigma_meas": _optional_float, "m": _optional_float, "theta": float,
    "q_range": _floats, "p_range": _floats, "resolution": int,
    "r_values": _floats, "theta_min": float, "theta_max": float, "n_theta": int,
    "threads": int,
}

DEFAULTS = {
    "qfi-sweep": {"r": "6", "g": "1.0", "theta0": "0.1", "correction": "linear",
                  "n_trunc": "120", "n_bar_min": "1", "n_bar_max": "40", "per_decade": "12",
                  "window": "auto"},
    "kappa-sweep": {"r": "6", "g": "1.0", "kappa": "0.5", "r_prime": "8",
                    "theta_prime": str(math.pi / 4), "correction": "linear", "n_trunc": "120",
                    "n_bar_min": "1", "n_bar_max": "40", "per_decade": "12"},
    "stateprep": {"state": "cat", "alpha": "2", "r": "3", "g": "1.0", "n_runs": "50",
                  "n_trunc": "auto"},
    "wigner": {"state": "cat", "alpha": "2", "r": "3", "g": "1.0", "q_range": "-6,6",
               "p_range": "-6,6", "resolution": "201", "n_trunc": "auto"},
    "ensemble-check": {"j": "100,200,400", "sigma_meas": "auto", "g": "1.0", "theta": "0.3",
                       "alpha": "1", "m": "auto"},
    "baselines": {"n_bar": "1,2,4,10"},
    "design-curves": {"r_values": "1,2,3,4", "g": "1.0", "theta_min": "0.001",
                      "theta_max": str(math.pi / 2), "n_theta": "400"},
}

PRESETS = {
    "paper-fig2": {"kind": "qfi-sweep", "r": "4", "g": "0.3,0.8,1.4",
                   "theta0": "0.01,0.1,1.0", "correction": "linear", "n_trunc": "260",
                   "window": "-900,900", "n_bar_min": "1", "n_bar_max": "150"},
    "desk-fig2": {"kind": "qfi-sweep", "r": "4", "g": "0.3,0.8,1.4",
                  "theta0": "0.01,0.1,1.0", "correction": "linear", "n_trunc": "80",
                  "window": "auto", "n_bar_min": "1", "n_bar_max": "30", "per_decade": "8"},
}


def read_config_file(path) -> dict:
    """Flat key = value file; '#' comments; an optional ``kind`` key."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return dict(cp["experiment"])


def _split_param(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"--param expects key=value, got {item!r}")
    k, v = item.split("=", 1)
    return k.strip(), v.strip()


def resolve_config(kind: str, preset: str | None = None, file_values: dict | None = None,
                   overrides: dict | None = None) -> dict:
    """Merge defaults, preset, config file and overrides, then parse and validate."""
    raw = dict(DEFAULTS[kind])
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        p = dict(PRESETS[preset])
        if p.pop("kind") != kind:
            raise ConfigError(f"preset {preset!r} is for {PRESETS[preset]['kind']}, not {kind}")
        raw.update(p)
    for src in (file_values or {}, overrides or {}):
        for k, v in src.items():
            if k == "kind":
                if v != kind:
                    raise ConfigError(f"config kind {v!r} does not match subcommand {kind!r}")
                continue
            if k not in SCHEMA:
                raise ConfigError(f"unknown parameter {k!r}")
            raw[k] = v
    cfg = {"kind": kind}
    for k, v in raw.items():
        try:
            cfg[k] = SCHEMA[k](v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k}: {v!r} ({exc})") from exc
    validate(cfg)
    return cfg


def _check_range(cfg, key, lo, hi, lo_open=False, hi_open=False):
    vals = cfg.get(key)
    if vals is None:
        return
    for x in (vals if isinstance(vals, list) else [vals]):
        bad = (x < lo or x > hi or (lo_open and x == lo) or (hi_open and x == hi)
               or not math.isfinite(x))
        if bad:
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            what = "singular" if key.startswith("theta") and x in (0.0, math.pi) else "out of range"
            raise ConfigError(f"{key}={x!r} is {what}; allowed {lb}{lo}, {hi}{rb}")


def validate(cfg: dict) -> None:
    kind = cfg["kind"]
    _check_range(cfg, "r", 0.0, 12.0)
    _check_range(cfg, "r_prime", 0.0, 12.0)
    _check_range(cfg, "g", 0.0, 5.0, lo_open=True)
    for key in ("theta0", "theta", "theta_prime", "theta_min", "theta_max"):
        _check_range(cfg, key, 0.0, math.pi, lo_open=True, hi_open=True)
    if kind == "qfi-sweep" and cfg["correction"] == "linear":
        for t in cfg["theta0"]:
            if t < 1e-6:
                raise ConfigError(f"theta0={t!r} is too close to the cot singularity at 0")
    if "correction" in cfg and cfg["correction"] not in ("none", "linear"):
        raise ConfigError(f"correction must be none or linear, got {cfg['correction']!r}")
    if kind in STOCHASTIC and cfg.get("seed") is None:
        raise ConfigError(f"{kind} is stochastic; a seed is required (--seed)")
    if kind in ("stateprep", "wigner") and cfg["state"] not in ("cat", "compass", "coherent"):
        raise ConfigError(f"state must be cat, compass or coherent, got {cfg['state']!r}")
    if kind == "stateprep" and cfg["state"] == "coherent":
        raise ConfigError("stateprep needs state = cat or compass")
    if kind == "stateprep" and cfg["n_runs"] < 2:
        raise ConfigError("n_runs must be at least 2")
    if cfg.get("n_trunc") is not None and cfg["n_trunc"] < 2:
        raise ConfigError("n_trunc must be at least 2")
    if "n_bar_min" in cfg and not 0 < cfg["n_bar_min"] < cfg["n_bar_max"]:
        raise ConfigError("need 0 < n_bar_min < n_bar_max")
    if kind == "baselines" and any(x < 0 for x in cfg["n_bar"]):
        raise ConfigError("n_bar must be non-negative")
    if kind == "ensemble-check":
        for j in cfg["j"]:
            if abs(2 * j - round(2 * j)) > 1e-12 or j < 0.5:
                raise ConfigError(f"j={j!r} is not a positive half-integer")
    if kind == "design-curves" and cfg["theta_min"] >= cfg["theta_max"]:
        raise ConfigError("theta_min must be below theta_max")


def _grid(cfg) -> np.ndarray:
    from .metrology import log_grid
    if "n_bar" in cfg:
        return np.asarray(cfg["n_bar"], dtype=float)
    return log_grid(cfg["n_bar_min"], cfg["n_bar_max"], cfg.get("per_decade", 12))


def _tag(x: float) -> str:
    return format(x, "g").replace("-", "m").replace(".", "p")


def run_qfi_sweep(cfg, out: Path, threads: int) -> list[Path]:
    from .metrology import qfi_sweep
    from .protocol import NO_CORRECTION, linear_correction
    grid = _grid(cfg)
    paths = []
    for g in cfg["g"]:
        for t0 in cfg["theta0"]:
            t_start = time.perf_counter()
            corr = linear_correction(t0) if cfg["correction"] == "linear" else NO_CORRECTION
            rep = qfi_sweep(grid, cfg["r"], t0, g, corr, cfg["n_trunc"], threads, cfg["window"])
            path = write_qfi_report(out / f"qfi_g{_tag(g)}_theta0_{_tag(t0)}.csv", rep)
            sidecar(path, cfg, time.perf_counter() - t_start, {"report": rep.metadata})
            log.info("wrote %s", path)
            paths.append(path)
    return paths


def run_kappa_sweep(cfg, out: Path, threads: int) -> list[Path]:
    from .bootstrap import BootstrapParams, kappa_sweep
    t_start = time.perf_counter()
    params = BootstrapParams(cfg["kappa"], cfg["r_prime"], cfg["r"], cfg["g"][0],
                             cfg["theta_prime"])
    rep = kappa_sweep(_grid(cfg), params, cfg["correction"], cfg["n_trunc"], threads)
    path = write_qfi_report(out / "kappa_sweep.csv", rep)
    sidecar(path, cfg, time.perf_counter() - t_start, {"report": rep.metadata})
    return [path]


def run_stateprep(cfg, out: Path, threads: int) -> list[Path]:
    from .stateprep import average_fidelity
    t_start = time.perf_counter()
    rep = average_fidelity(cfg["alpha"], cfg["r"], cfg["g"][0], cfg["state"], cfg["n_runs"],
                           cfg["seed"], cfg["n_trunc"])
    path = write_csv(out / "stateprep_runs.csv", ("run", "m", "F_m"),
                     ((i, m, f) for i, (m, f) in enumerate(rep.runs)))
    sidecar(path, cfg, time.perf_counter() - t_start, {"summary": {
        k: v for k, v in rep.to_dict().items() if k != "runs"}})
    write_json(out / "stateprep_report.json", rep.to_dict())
    return [path]


def _wigner_state(cfg):
    from .fock import coherent_state
    from .stateprep import default_truncation, prepare_once
    alpha = cfg["alpha"]
    n_trunc = cfg["n_trunc"] or default_truncation(alpha)
    if cfg["state"] == "coherent":
        return coherent_state(alpha, n_trunc), {}
    if cfg.get("seed") is None:
        raise ConfigError("a prepared cat/compass Wigner plot needs a seed (--seed)")
    state, m, f = prepare_once(alpha, cfg["r"], cfg["g"][0], cfg["state"], cfg["seed"], n_trunc)
    return state, {"m": m, "F_m": f}


def run_wigner(cfg, out: Path, threads: int) -> list[Path]:
    from .fock import wigner_grid
    t_start = time.perf_counter()
    state, extra = _wigner_state(cfg)
    q, p, W = wigner_grid(state, tuple(cfg["q_range"]), tuple(cfg["p_range"]), cfg["resolution"])
    path, _ = write_wigner(out / "wigner.csv", q, p, W, {"config": cfg, **extra})
    sidecar(path, cfg, time.perf_counter() - t_start, extra)
    return [path]


def run_ensemble_check(cfg, out: Path, threads: int) -> list[Path]:
    from .ensemble import atomic_protocol_check
    t_start = time.perf_counter()
    rows, details = [], []
    for j in cfg["j"]:
        res = atomic_protocol_check(j, cfg["sigma_meas"], cfg["g"][0], cfg["theta"],
                                    cfg["alpha"], cfg["m"], cfg["seed"])
        rows.append((res.j, res.fidelity))
        details.append({"j": res.j, "sigma_meas": res.sigma_meas, "m": res.m})
    path = write_csv(out / "ensemble_convergence.csv", ("j", "fidelity"), rows)
    sidecar(path, cfg, time.perf_counter() - t_start, {"runs": details})
    return [path]


def run_baselines(cfg, out: Path, threads: int) -> list[Path]:
    from .metrology import baselines
    t_start = time.perf_counter()
    rows = [(n, *baselines(n)) for n in cfg["n_bar"]]
    path = write_csv(out / "baselines.csv", ("n_bar", "sql", "heisenberg", "kerr"), rows)
    sidecar(path, cfg, time.perf_counter() - t_start)
    return [path]


def run_design_curves(cfg, out: Path, threads: int) -> list[Path]:
    from .gaussian_map import design_curves
    t_start = time.perf_counter()
    theta = np.linspace(cfg["theta_min"], cfg["theta_max"], cfg["n_theta"])
    rows = design_curves(cfg["r_values"], theta, cfg["g"][0])
    path = write_csv(out / "design_curves.csv", ("r", "theta", "gamma", "zeta"), rows)
    sidecar(path, cfg, time.perf_counter() - t_start)
    return [path]


RUNNERS = {
    "qfi-sweep": run_qfi_sweep, "kappa-sweep": run_kappa_sweep, "stateprep": run_stateprep,
    "wigner": run_wigner, "ensemble-check": run_ensemble_check, "baselines": run_baselines,
    "design-curves": run_design_curves,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="measkerr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", type=Path, help="flat key = value parameter file")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, help="RNG seed (required for stochastic runs)")
        sp.add_argument("--threads", type=int, default=1, help="worker cap for sweeps")
        sp.add_argument("--preset", help=f"named parameter set: {', '.join(sorted(PRESETS))}")
        sp.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter; repeatable")
    return ap


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        level=getattr(logging, level, logging.WARNING))


def run(kind: str, cfg: dict, out: Path, threads: int = 1) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[kind](cfg, out, threads)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        file_values = read_config_file(args.config) if args.config else {}
        overrides = dict(_split_param(p) for p in args.param)
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        cfg = resolve_config(args.kind, args.preset, file_values, overrides)
        paths = run(args.kind, cfg, args.out, args.threads)
    except (ConfigError, ThetaNearSingular, NoSolution, TruncationTooSmall) as exc:
        print(f"measkerr: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (QuadratureNotConverged, NonFiniteAmplitude, NonPositiveFI, HPViolation) as exc:
        print(f"measkerr: numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"measkerr: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
