"""Command-line front end: ``rtgrowth <command> --config <path> [--out DIR] [--threads N]``.

Exit codes: 0 success, 2 configuration or validation error, 3 solver error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NotUnstable, ParameterError, RTGrowthError
from .growth import solve_growth_rate
from .model import RTParameters, validate_parameters
from .presets import PRESETS, preset
from .spectrum import ModeLattice
from .thresholds import critical_coefficient, discriminant, with_coefficient

COMMANDS = ("growth", "threshold", "sweep", "mode-shape", "dis")

# config name -> RTParameters field
PARAM_FIELDS = {
    "rho_plus": "rho_plus",
    "rho_minus": "rho_minus",
    "mu_plus": "mu_plus",
    "mu_minus": "mu_minus",
    "kappa_plus": "kappa_plus",
    "kappa_minus": "kappa_minus",
    "vartheta": "vartheta",
    "g": "g",
    "lambda": "lam",
    "m_bar": "M_bar",
    "l": "l",
    "tau": "tau",
    "l1": "L1",
    "l2": "L2",
}
TOP_LEVEL = {"command", "preset", "parameters", "lattice", "degree", "tol", "sweep",
             "critical", "output_dir", "threads", "samples"} | set(PARAM_FIELDS)
SWEEP_COEFFICIENTS = ("vartheta", "M3", "kappa_scale", "lambda", "g", "mu_plus", "mu_minus")


class ConfigError(Exception):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass
class RunConfig:
    command: str
    parameters: RTParameters
    lattice: ModeLattice
    degree: int
    tol: float
    sweep: dict | None
    critical: dict | None
    output_dir: str
    threads: int
    samples: int
    raw: bytes


def _number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field {name!r} must be a number, got {value!r}", name)
    return float(value)


def _int(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"field {name!r} must be an integer >= {minimum}, got {value!r}", name)
    return value


def _parameters(cfg):
    fields = {}
    if "preset" in cfg:
        try:
            fields.update(preset(cfg["preset"]))
        except KeyError:
            raise ConfigError(f"unknown preset {cfg['preset']!r}; choose from {sorted(PRESETS)}", "preset")
    block = cfg.get("parameters", {})
    if not isinstance(block, dict):
        raise ConfigError("field 'parameters' must be an object", "parameters")
    flat = {k: v for k, v in cfg.items() if k in PARAM_FIELDS}
    for k in set(flat) & set(block):
        raise ConfigError(f"parameter {k!r} given both at top level and in 'parameters'", k)
    for k in block:
        if k not in PARAM_FIELDS:
            raise ConfigError(f"unknown parameter {k!r}", k)
    fields.update(block)
    fields.update(flat)
    missing = [k for k in PARAM_FIELDS if k not in fields]
    if missing:
        raise ConfigError(f"missing parameter {missing[0]!r}", missing[0])
    kwargs = {}
    for k, v in fields.items():
        if k == "m_bar":
            if not isinstance(v, list) or len(v) != 3:
                raise ConfigError("field 'm_bar' must be a list of three numbers", "m_bar")
            kwargs["M_bar"] = tuple(_number(c, "m_bar") for c in v)
        else:
            kwargs[PARAM_FIELDS[k]] = _number(v, k)
    return RTParameters(**kwargs)


def load_config(path, command, out=None, threads=None) -> RunConfig:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", "config")
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}", "config")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", "config")
    for k in cfg:
        if k not in TOP_LEVEL:
            raise ConfigError(f"unknown config field {k!r}", k)
    if "command" in cfg and cfg["command"] != command:
        raise ConfigError(f"config command {cfg['command']!r} does not match {command!r}", "command")

    p = _parameters(cfg)
    validate_parameters(p)

    lat = cfg.get("lattice", {})
    if not isinstance(lat, dict):
        raise ConfigError("field 'lattice' must be an object", "lattice")
    for k in lat:
        if k not in ("k_max", "adaptive"):
            raise ConfigError(f"unknown lattice field {k!r}", f"lattice.{k}")
    k_max = _int(lat.get("k_max", 16), "lattice.k_max", 1)
    adaptive = lat.get("adaptive", False)
    if not isinstance(adaptive, bool):
        raise ConfigError("field 'lattice.adaptive' must be true or false", "lattice.adaptive")
    degree = _int(cfg.get("degree", 32), "degree", 8)
    tol = _number(cfg.get("tol", 1e-8), "tol")
    if not tol > 0:
        raise ConfigError("field 'tol' must be positive", "tol")
    n_threads = _int(cfg.get("threads", 0), "threads", 0) if threads is None else threads
    samples = _int(cfg.get("samples", 201), "samples", 2)

    sweep = cfg.get("sweep")
    if command == "sweep" and sweep is None:
        raise ConfigError("command 'sweep' requires a 'sweep' block", "sweep")
    if command != "sweep" and sweep is not None:
        raise ConfigError(f"'sweep' block is only allowed with the sweep command, not {command!r}", "sweep")
    if sweep is not None:
        sweep = _sweep_block(sweep, p)
    critical = cfg.get("critical")
    if critical is not None:
        critical = _critical_block(critical)

    return RunConfig(
        command=command,
        parameters=p,
        lattice=ModeLattice(k_max=k_max, adaptive=adaptive),
        degree=degree,
        tol=tol,
        sweep=sweep,
        critical=critical,
        output_dir=str(out if out is not None else cfg.get("output_dir", ".")),
        threads=n_threads,
        samples=samples,
        raw=raw,
    )


def _sweep_block(sweep, p):
    if not isinstance(sweep, dict):
        raise ConfigError("field 'sweep' must be an object", "sweep")
    for k in ("coefficient", "from", "to", "steps"):
        if k not in sweep:
            raise ConfigError(f"missing sweep field {k!r}", f"sweep.{k}")
    extra = set(sweep) - {"coefficient", "from", "to", "steps"}
    if extra:
        k = sorted(extra)[0]
        raise ConfigError(f"unknown sweep field {k!r}", f"sweep.{k}")
    name = sweep["coefficient"]
    if name not in SWEEP_COEFFICIENTS:
        raise ConfigError(f"sweep coefficient must be one of {SWEEP_COEFFICIENTS}, got {name!r}", "sweep.coefficient")
    out = {
        "coefficient": name,
        "from": _number(sweep["from"], "sweep.from"),
        "to": _number(sweep["to"], "sweep.to"),
        "steps": _int(sweep["steps"], "sweep.steps", 1),
    }
    for v in (out["from"], out["to"]):
        try:
            validate_parameters(_set_coefficient(p, name, v))
        except ParameterError as exc:
            raise ConfigError(f"sweep endpoint {v} is invalid: {exc}", "sweep")
    return out


def _critical_block(block):
    if not isinstance(block, dict):
        raise ConfigError("field 'critical' must be an object", "critical")
    name = block.get("coefficient")
    if name not in ("vartheta", "M3", "kappa_scale"):
        raise ConfigError("critical.coefficient must be vartheta, M3 or kappa_scale", "critical.coefficient")
    return {
        "coefficient": name,
        "from": _number(block.get("from"), "critical.from"),
        "to": _number(block.get("to"), "critical.to"),
        "tol": _number(block.get("tol", 1e-3), "critical.tol"),
    }


def _set_coefficient(p, name, value):
    if name in ("vartheta", "M3", "kappa_scale"):
        return with_coefficient(p, name, value)
    return p.replace(**{PARAM_FIELDS.get(name, name): value})


# ---- serialization ----------------------------------------------------------

def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def parameters_dict(p: RTParameters):
    d = {}
    for k, f in PARAM_FIELDS.items():
        v = getattr(p, f)
        d[k] = list(v) if k == "m_bar" else v
    return d


def growth_record(r):
    rec = {"verdict": r.verdict, "varsigma": r.varsigma, "iterations": [list(t) for t in r.iterations],
           "lattice_k_max": r.lattice.k_max if r.lattice else None}
    if r.verdict == "Unstable":
        w = r.critical_wavevector
        rec.update(
            Lambda=r.Lambda,
            critical_wavevector=[w.k1, w.k2],
            xi=[w.xi1, w.xi2],
            frak_J=list(r.frak_J),
            alpha_at_Lambda=r.alpha_at_Lambda,
            fixed_point_residual=r.fixed_point_residual,
            pressure_consistency=r.pressure_consistency,
            residual_report=r.residual_report,
        )
    else:
        rec["Lambda"] = None
    return rec


def threshold_record(rep):
    return {
        "dis": None if rep.infinite else rep.dis_value,
        "dis_infinite": rep.infinite,
        "verdict": rep.verdict,
        "vartheta_T": rep.vartheta_T,
        "m_S": rep.m_S,
        "poincare_const": rep.poincare_const,
        "a_const": rep.a_const,
        "argmax_wavevector": None if rep.argmax_wavevector is None else list(rep.argmax_wavevector.indices),
        "infinite_modes": [list(m) for m in rep.infinite_modes],
        "sup_may_be_limit": rep.sup_may_be_limit,
        "extrapolated": rep.extrapolated,
        "vertical_bound": rep.vertical_bound,
        "per_mode_curve": [[k, v] for k, v in rep.per_mode_curve.items()],
    }


def _provenance(cfg: RunConfig, lattice_used=None):
    return {
        "config_sha256": hashlib.sha256(cfg.raw).hexdigest(),
        "engine_version": __version__,
        "degree": cfg.degree,
        "lattice": {"k_max": cfg.lattice.k_max, "adaptive": cfg.lattice.adaptive,
                    "k_max_used": lattice_used},
        "horizontal_measure": 4.0 * math.pi**2 * cfg.parameters.L1 * cfg.parameters.L2,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def write_results(cfg: RunConfig, result, lattice_used=None):
    doc = {
        "command": cfg.command,
        "parameters": parameters_dict(cfg.parameters),
        "settings": {"degree": cfg.degree, "tol": cfg.tol},
        "result": result,
        "provenance": _provenance(cfg, lattice_used),
    }
    path = Path(cfg.output_dir) / "results.json"
    path.write_text(json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


def _fmt(x):
    return "" if x is None else repr(float(x))


# ---- commands -----------------------------------------------------------------

def _growth(cfg, p=None):
    p = p or cfg.parameters
    try:
        return solve_growth_rate(p, cfg.lattice, cfg.degree, cfg.tol, threads=cfg.threads)
    except NotUnstable:
        from .growth import _stable_result

        return _stable_result(p, float("nan"), cfg.lattice, cfg.degree, [])


def run_growth(cfg):
    r = _growth(cfg)
    write_results(cfg, growth_record(r), r.lattice.k_max if r.lattice else None)
    if r.verdict == "Unstable":
        w = r.critical_wavevector
        return f"growth: Unstable, Lambda = {r.Lambda:.10g} at k = ({w.k1}, {w.k2})"
    return "growth: Stable"


def run_dis(cfg):
    rep = discriminant(cfg.parameters, cfg.lattice, cfg.degree)
    write_results(cfg, threshold_record(rep), cfg.lattice.k_max)
    dis = "inf" if rep.infinite else f"{rep.dis_value:.10g}"
    return f"dis: Dis = {dis}, {rep.verdict}"


def run_threshold(cfg):
    rep = discriminant(cfg.parameters, cfg.lattice, cfg.degree)
    rec = threshold_record(rep)
    msg = f"threshold: {rep.verdict}"
    if cfg.critical is not None:
        c = cfg.critical
        val = critical_coefficient(cfg.parameters, c["coefficient"], (c["from"], c["to"]),
                                   cfg.lattice, cfg.degree, c["tol"])
        rec["critical"] = {"coefficient": c["coefficient"], "value": val, "bracket": [c["from"], c["to"]],
                           "tol": c["tol"]}
        msg += f", critical {c['coefficient']} = {val:.6g}"
    write_results(cfg, rec, cfg.lattice.k_max)
    return msg


def run_sweep(cfg):
    s = cfg.sweep
    values = np.linspace(s["from"], s["to"], s["steps"])
    rows, records = [], []
    for v in values:
        v = float(v)
        p = _set_coefficient(cfg.parameters, s["coefficient"], v)
        validate_parameters(p)
        r = _growth(cfg, p)
        rep = discriminant(p, cfg.lattice, cfg.degree)
        dis = None if rep.infinite else rep.dis_value
        rows.append([repr(v), r.verdict, _fmt(r.Lambda), "inf" if rep.infinite else _fmt(dis)])
        records.append({"value": v, "verdict": r.verdict, "Lambda": r.Lambda, "dis": dis,
                        "dis_infinite": rep.infinite, "dis_verdict": rep.verdict})
    with open(Path(cfg.output_dir) / "sweep.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([s["coefficient"], "verdict", "Lambda", "Dis"])
        wr.writerows(rows)
    write_results(cfg, {"coefficient": s["coefficient"], "points": records}, cfg.lattice.k_max)
    n_unstable = sum(r["verdict"] == "Unstable" for r in records)
    return f"sweep: {len(records)} points over {s['coefficient']}, {n_unstable} unstable"


def run_mode_shape(cfg):
    r = _growth(cfg)
    write_results(cfg, growth_record(r), r.lattice.k_max if r.lattice else None)
    if r.verdict != "Unstable":
        return "mode-shape: Stable, no unstable mode to write"
    p = cfg.parameters
    y = np.linspace(-p.l, p.tau, cfg.samples)
    w = r.eigenprofile.evaluate(y)
    beta = r.pressure_profile.at(y)
    with open(Path(cfg.output_dir) / "mode.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["y3", "re_phi", "im_phi", "re_psi", "im_psi", "re_theta", "im_theta", "re_beta", "im_beta"])
        for i, yy in enumerate(y):
            vals = [w[0, i], w[1, i], w[2, i], beta[i]]
            wr.writerow([repr(float(yy))] + [repr(float(f(v))) for v in vals for f in (np.real, np.imag)])
    k = r.critical_wavevector
    return f"mode-shape: Lambda = {r.Lambda:.10g} at k = ({k.k1}, {k.k2}), {cfg.samples} samples"


RUNNERS = {
    "growth": run_growth,
    "threshold": run_threshold,
    "sweep": run_sweep,
    "mode-shape": run_mode_shape,
    "dis": run_dis,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="rtgrowth", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    ap.add_argument("--threads", type=int, default=None, help="worker threads, 0 = auto")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 0:
            raise ConfigError("--threads must be >= 0", "threads")
        cfg = load_config(args.config, args.command, args.out, args.threads)
        os.makedirs(cfg.output_dir, exist_ok=True)
        summary = RUNNERS[args.command](cfg)
    except ConfigError as exc:
        print(f"rtgrowth: config error in {exc.field}: {exc}", file=sys.stderr)
        return 2
    except ParameterError as exc:
        print(f"rtgrowth: invalid parameter {exc.field}: {exc}", file=sys.stderr)
        return 2
    except RTGrowthError as exc:
        print(f"rtgrowth: solver error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    print(summary)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
