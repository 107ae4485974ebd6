"""Batch front door: subcommands over the library with deterministic
file output.

Layout of every artifact: JSON results carry {version, config, result};
CSV sweeps start with comment lines holding the same metadata, then a
header row.  All floats are written with full repr precision so a fixed
config reproduces outputs byte for byte.

Exit codes: 1 for validation problems (arguments, files, ranges), 2 when
a numerical gate refuses (no spectral gap, divergent tail, eigenvalue
mismatch); diagnostics go to standard error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .map_core import ConvergenceError, DomainError, MapParams
from .induced import build_induced
from . import pressure as _pressure
from .holes import classify_swallowing, hole_from_json
from . import spectra as _spectra
from . import survivor as _survivor
from . import claims as _claims

KNOB_DEFAULTS = {
    "N_max": 800,
    "M": 512,
    "L_max": 300,
    "depth": 20,
    "n_levels": _pressure.DEFAULT_LEVELS,
    "budget": _pressure.DEFAULT_BUDGET,
}

NEEDS_HOLE = ("regime", "escape", "density", "classify", "survivor", "sweep")


class UsageError(Exception):
    """Bad arguments or files; distinct from numerical-gate refusals."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; reserve 2 for numerical gates
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: invalid input: {message}", file=sys.stderr)
        raise SystemExit(1)


@dataclass
class RunConfig:
    command: str
    gamma: float = 0.5
    t: tuple = ()
    hole: object = None            # raw hole spec (dict) or None
    N_max: int = KNOB_DEFAULTS["N_max"]
    M: int = KNOB_DEFAULTS["M"]
    L_max: int = KNOB_DEFAULTS["L_max"]
    depth: int = KNOB_DEFAULTS["depth"]
    n_levels: int = KNOB_DEFAULTS["n_levels"]
    budget: int = KNOB_DEFAULTS["budget"]
    seed: int = 0
    jobs: int = 1
    out: str | None = None

    def as_dict(self):
        d = asdict(self)
        d["t"] = list(self.t)
        d.pop("out")               # self-referential; keeps reruns comparable
        return d


def _pyify(obj):
    if isinstance(obj, dict):
        return {str(k): _pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pyify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_pyify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _emit_json(cfg: RunConfig, result: dict):
    payload = {
        "version": __version__,
        "config": _pyify(cfg.as_dict()),
        "result": _pyify(result),
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    _write(cfg.out, text)


def _emit_csv(cfg: RunConfig, header, rows, extra_meta=None):
    lines = [f"# openmaps {__version__}"]
    lines.append("# config: " + json.dumps(_pyify(cfg.as_dict()),
                                           sort_keys=True))
    for k, v in (extra_meta or {}).items():
        lines.append(f"# {k}: {_fmt(v)}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    _write(cfg.out, "\n".join(lines) + "\n")


def _write(out, text):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _load_hole(params, spec):
    if spec is None:
        return None
    try:
        if isinstance(spec, str) and spec.lstrip().startswith(("{", "[")):
            spec = json.loads(spec)
        return hole_from_json(params, spec)
    except (DomainError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        raise UsageError(f"bad hole spec: {exc}") from exc


# -- subcommands --------------------------------------------------------------


def cmd_pressure(cfg: RunConfig):
    params = MapParams(cfg.gamma)
    hole = _load_hole(params, cfg.hole)
    isys = build_induced(params, hole=hole, n_max=cfg.N_max)
    out = {"t": {}}
    for t in cfg.t:
        entry = {"closed": _pressure.closed_pressure(
            isys, t, n_levels=cfg.n_levels, budget=cfg.budget)}
        if isys.has_hole:
            ph = _pressure.punctured_pressure(
                isys, t, n_levels=cfg.n_levels, budget=cfg.budget)
            entry.update(punctured=ph.value, transient=ph.transient,
                         boundary=ph.boundary,
                         open_pressure_at_zero=ph.open_pressure)
        out["t"][f"{t:g}"] = entry
    out["warnings"] = list(isys.warnings)
    _emit_json(cfg, out)


def cmd_regime(cfg: RunConfig):
    params = MapParams(cfg.gamma)
    hole = _load_hole(params, cfg.hole)
    isys = build_induced(params, hole=hole, n_max=cfg.N_max)
    out = {}
    for t in cfg.t:
        out[f"{t:g}"] = _pressure.regime(
            isys, t, n_levels=cfg.n_levels, budget=cfg.budget).as_dict()
    _emit_json(cfg, out)


def cmd_escape(cfg: RunConfig):
    params = MapParams(cfg.gamma)
    hole = _load_hole(params, cfg.hole)
    t = cfg.t[0]
    em = _spectra.escape_mass(params, hole, t, cfg.depth,
                              max_depth=cfg.depth + 12)
    rows = [{"n": int(n), "mass": m, "lower": lo, "upper": hi}
            for n, m, lo, hi in zip(em.n, em.mass, em.lower, em.upper)]
    meta = {"t": t, "p_t": em.p_t, "slope": em.slope,
            "slope_window": em.slope_window, "depth": em.depth}
    _emit_csv(cfg, ["n", "mass", "lower", "upper"], rows, meta)


def cmd_density(cfg: RunConfig):
    params = MapParams(cfg.gamma)
    hole = _load_hole(params, cfg.hole)
    t = cfg.t[0]
    isys = build_induced(params, hole=hole, n_max=cfg.N_max)
    ph = _pressure.punctured_pressure(isys, t, n_levels=cfg.n_levels,
                                      budget=cfg.budget)
    if ph.value > 0.0 and t < 1.0:
        res = _spectra.accim_on_I(params, hole, t, L_max=cfg.L_max,
                                  M=cfg.M, n_max=cfg.N_max, p_h=ph.value)
        dens = res.density
        meta = {"scheme": "spectral-gap", "t": t, "p_t": res.p_t,
                "p_hole": res.p_hole, "lambda": res.lambda_full,
                "eigen_gate": res.eigenvalue_gate,
                "gap_estimate": res.gap_estimate,
                "tail_bound": dens.tail_bound}
    else:
        res = _spectra.averaged_accim(params, hole, t, n=200)
        dens = res.density
        meta = {"scheme": "averaged", "t": t, "residual": res.residual,
                "lambda": res.lambda_t, "n": res.n}
    rows = [{"x": x, "density": v}
            for x, v in zip(dens.edges, dens.node_values)]
    _emit_csv(cfg, ["x", "density"], rows, meta)


def _family_members(params, spec):
    try:
        data = spec
        if isinstance(data, str):
            if data.lstrip().startswith(("{", "[")):
                data = json.loads(data)
            else:
                with open(data) as fh:
                    data = json.load(fh)
        if isinstance(data, list):
            return [hole_from_json(params, h) for h in data]
        fam = hole_from_json(params, data)
    except (DomainError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        raise UsageError(f"bad hole family spec: {exc}") from exc
    if hasattr(fam, "widths"):
        return [iv for iv in fam.intervals]
    return [fam]


def cmd_survivor(cfg: RunConfig):
    params = MapParams(cfg.gamma)
    members = _family_members(params, cfg.hole)
    t = cfg.t[0]
    rows = _survivor.stability_sweep(
        params, members, t, M=cfg.M, n_max=cfg.N_max,
        n_levels=cfg.n_levels, budget=cfg.budget, jobs=cfg.jobs)
    _emit_csv(cfg, list(rows[0].keys()), rows)


def cmd_classify(cfg: RunConfig):
    params = MapParams(cfg.gamma)
    hole = _load_hole(params, cfg.hole)
    rep = classify_swallowing(params, hole)
    _emit_json(cfg, asdict(rep))


def cmd_claims(cfg: RunConfig):
    _emit_json(cfg, {"claims": [asdict(r) for r in _claims.run_all()]})


def cmd_sweep(cfg: RunConfig):
    params = MapParams(cfg.gamma)
    members = _family_members(params, cfg.hole)

    def one_t(t):
        return _survivor.stability_sweep(
            params, members, t, M=cfg.M, n_max=cfg.N_max,
            n_levels=cfg.n_levels, budget=cfg.budget)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(one_t, cfg.t))
    else:
        chunks = [one_t(t) for t in cfg.t]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r["t"], -r["epsilon"]))
    _emit_csv(cfg, list(rows[0].keys()), rows)


COMMANDS = {
    "pressure": cmd_pressure,
    "regime": cmd_regime,
    "escape": cmd_escape,
    "density": cmd_density,
    "survivor": cmd_survivor,
    "classify": cmd_classify,
    "claims": cmd_claims,
    "sweep": cmd_sweep,
}


def _build_parser():
    p = _Parser(
        prog="openmaps",
        description="thermodynamics of an interval map family with holes")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with the same keys")
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--t", type=float, action="append",
                        help="parameter value (repeatable)")
        sp.add_argument("--t-grid", help="comma-separated t values")
        if name in ("survivor", "sweep"):
            sp.add_argument("--holes", dest="hole",
                            help="hole family: JSON file, inline JSON, or "
                                 "a list of hole specs")
            sp.add_argument("--eps-grid",
                            help="interval-family widths around --z")
            sp.add_argument("--z", type=float,
                            help="interval-family center")
        else:
            sp.add_argument("--hole", help="hole spec: JSON file or inline")
        sp.add_argument("--depth", type=int)
        sp.add_argument("--N-max", dest="N_max", type=int)
        sp.add_argument("--M", type=int)
        sp.add_argument("--L-max", dest="L_max", type=int)
        sp.add_argument("--levels", dest="n_levels", type=int)
        sp.add_argument("--budget", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--out", help="output file (default stdout)")
    return p


def _merge_config(args) -> RunConfig:
    merged = {"command": args.command}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise UsageError("--config must hold a JSON object")
        merged.update(file_cfg)
    for key in ("gamma", "hole", "depth", "N_max", "M", "L_max",
                "n_levels", "budget", "seed", "jobs", "out"):
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    ts = []
    if merged.get("t"):
        raw = merged["t"]
        ts = [float(x) for x in (raw if isinstance(raw, list) else [raw])]
    if getattr(args, "t", None):
        ts = [float(x) for x in args.t]
    if getattr(args, "t_grid", None):
        ts = [float(x) for x in args.t_grid.split(",")]
    merged["t"] = tuple(ts) if ts else (0.5,)
    if getattr(args, "eps_grid", None) is not None:
        if getattr(args, "z", None) is None:
            raise UsageError("--eps-grid needs --z")
        merged["hole"] = {
            "type": "interval", "z": args.z,
            "epsilons": [float(x) for x in args.eps_grid.split(",")]}
    allowed = set(RunConfig.__dataclass_fields__)
    unknown = set(merged) - allowed
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**merged)
    if not 0.0 < cfg.gamma <= 1.0:
        raise UsageError("gamma must lie in (0, 1]")
    for t in cfg.t:
        if not 0.0 <= t <= 1.0:
            raise UsageError("every t must lie in [0, 1]")
    for name, lo in (("N_max", 16), ("M", 64), ("L_max", 8), ("depth", 1),
                     ("n_levels", 3), ("budget", 1000), ("jobs", 1)):
        if getattr(cfg, name) < lo:
            raise UsageError(f"{name} must be at least {lo}")
    if cfg.command in NEEDS_HOLE and cfg.hole is None:
        raise UsageError(f"{cfg.command} needs a hole specification")
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
    except (UsageError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"openmaps: invalid input: {exc}", file=sys.stderr)
        return 1
    try:
        COMMANDS[cfg.command](cfg)
    except (UsageError, OSError, json.JSONDecodeError) as exc:
        print(f"openmaps: invalid input: {exc}", file=sys.stderr)
        return 1
    except (DomainError, ConvergenceError) as exc:
        print(f"openmaps: numerical gate: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
