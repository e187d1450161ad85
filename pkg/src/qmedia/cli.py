"""Command-line interface.

Subcommands: dispersion, simulate, validate, scan, match-analog.  Settings
come from an optional YAML file (``--config``) and are overridden by flags.
Output goes to ``--out``, else ``$QMEDIA_OUTPUT_DIR``, else ``./qmedia_out``.
"""
from __future__ import annotations

import argparse
import ast
import copy
import dataclasses
import math
import operator
import os
import re
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .dispersion import critical_wavenumber, match_analog, sample_curve, summary
from .errors import QMediaError
from .experiments import PerturbationSpec, seed, validate_dispersion
from .grid import Grid, GridState
from .kernels import InteractionKernel, load_fourier_table, save_fourier_table
from .madelung import save_snapshot
from .media import MediumPreset, PhysicalParams, build_medium, unit_defaults
from .provenance import provenance_line, read_csv, write_csv, write_json
from .solver import SolverConfig, run, write_reports
from .errors import BlowUpError

ENV_OUTPUT = "QMEDIA_OUTPUT_DIR"

MEDIUM_FLAGS = ["m", "hbar", "n0", "cs2", "omega_j", "G", "omega_p", "e", "eps0", "sigma_R",
                "sigma_L", "I0", "c", "g", "a_s", "d", "a", "b", "lam", "alpha", "beta",
                "gamma_nmc"]


class ConfigError(QMediaError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg,
        ast.UAdd: operator.pos}


def parse_number(value, names=None, path="value"):
    """Parse a float or a small expression such as ``16piG`` or ``1/(4*pi)``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    text = str(value).strip()
    try:
        return float(text)
    except ValueError:
        pass
    names = {"pi": math.pi, **(names or {})}
    # implicit products: "16piG" -> "16*pi*G"
    expr = re.sub(r"(?<=[\d.)])\s*(?=[A-Za-z(])", "*", text)
    expr = re.sub(r"\bpi(?=[A-Za-z(])", "pi*", expr)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in names:
            return float(names[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError

    try:
        return ev(ast.parse(expr, mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise ConfigError(path, f"cannot parse number {value!r}") from None


def load_config(path):
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as err:
        raise ConfigError(str(path), str(err)) from None
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a mapping")
    return data


def merge_flags(config, args):
    """Overlay command-line flags (those that were given) onto the config."""
    cfg = copy.deepcopy(config)
    med = cfg.setdefault("medium", {})
    if args.preset:
        med["preset"] = args.preset
    if args.units:
        cfg["units"] = args.units
    for name in MEDIUM_FLAGS:
        val = getattr(args, name, None)
        if val is not None:
            med[name] = val
    if getattr(args, "kernel_table", None):
        med["kernel_table"] = args.kernel_table
    for section, keys in _SECTION_FLAGS.get(args.command, {}).items():
        sec = cfg.setdefault(section, {})
        for key in keys:
            val = getattr(args, key, None)
            if val is not None:
                sec[key] = val
    if args.out:
        cfg.setdefault("output", {})["dir"] = args.out
    return cfg


_SECTION_FLAGS = {
    "dispersion": {"dispersion": ["k_min", "k_max", "n_k", "k_hi"]},
    "scan": {"dispersion": ["k_hi"], "scan": ["param", "values"]},
    "simulate": {"solver": ["N", "L", "dt", "t_end", "snapshot_every", "dealias", "safety"],
                 "init": ["kind", "eps", "mode", "amplitude", "seed"]},
    "validate": {"solver": ["N", "L", "dt", "dealias", "safety"],
                 "experiment": ["k", "eps", "tol", "workers"]},
    "match-analog": {"match": ["target", "assume_cs2"]},
}


def medium_from_config(cfg):
    units = cfg.get("units", "natural")
    med = dict(cfg.get("medium") or {})
    preset = med.pop("preset", "free")
    table = med.pop("kernel_table", None)
    mode = med.pop("external_potential_mode", None)
    consts = unit_defaults(units) if units in ("natural", "SI") else {}
    names = {"G": float(med.get("G", consts.get("G", 1.0)))}
    if "G" in med:
        names["G"] = parse_number(med["G"], path="medium.G")
    params = {}
    for key, val in med.items():
        key = key.replace("-", "_")
        params[key] = parse_number(val, names, f"medium.{key}")
    if "d" in params:
        params["d"] = int(params["d"])
    if preset.replace("-", "_") in ("nmc", "nmc_gravity"):
        params.pop("G", None)
    try:
        medium = build_medium(MediumPreset(preset, params, units))
    except QMediaError as err:
        raise ConfigError("medium", str(err)) from None
    if table is not None:
        kernel = InteractionKernel.from_table(load_fourier_table(table), label=Path(table).name)
        medium = dataclasses.replace(medium, kernel=kernel,
                                     external_potential_mode=mode or "jeans_swindle")
    elif mode is not None:
        medium = dataclasses.replace(medium, external_potential_mode=mode)
    return medium


def _section(cfg, name):
    sec = cfg.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be a mapping")
    return sec


def _num(sec, key, section, default=None, cast=float):
    if key not in sec or sec[key] is None:
        if default is None:
            raise ConfigError(f"{section}.{key}", "required")
        return default
    try:
        return cast(parse_number(sec[key], path=f"{section}.{key}"))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{section}.{key}", str(err)) from None


def _list(sec, key, section, default=None):
    val = sec.get(key, default)
    if val is None:
        raise ConfigError(f"{section}.{key}", "required")
    if isinstance(val, str):
        val = [v for v in re.split(r"[,\s]+", val) if v]
    if not isinstance(val, (list, tuple)):
        val = [val]
    return [parse_number(v, path=f"{section}.{key}") for v in val]


def grid_from_config(cfg):
    sec = _section(cfg, "solver")
    N = [int(v) for v in _list(sec, "N", "solver", [512])]
    L = _list(sec, "L", "solver", [20 * math.pi])
    if len(L) == 1 and len(N) > 1:
        L = L * len(N)
    try:
        return Grid(tuple(N), tuple(L))
    except QMediaError as err:
        raise ConfigError("solver.N", str(err)) from None


def solver_config(cfg, medium, grid):
    sec = _section(cfg, "solver")
    safety = _num(sec, "safety", "solver", 0.5)
    probe = SolverConfig(dt=1.0, t_end=0.0, grid=grid, safety=safety)
    default_dt = min(probe.dt_bound(medium.params), 1e-2) if medium.params.hbar > 0 else 1e-2
    dealias = sec.get("dealias")
    try:
        return SolverConfig(
            dt=_num(sec, "dt", "solver", default_dt),
            t_end=_num(sec, "t_end", "solver", 1.0),
            grid=grid,
            dealias=None if dealias is None else bool(dealias),
            snapshot_every=_num(sec, "snapshot_every", "solver", 0, int),
            safety=safety,
        )
    except QMediaError as err:
        raise ConfigError("solver", str(err)) from None


def output_dir(cfg):
    out = _section(cfg, "output").get("dir") or os.environ.get(ENV_OUTPUT) or "qmedia_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _formats(cfg):
    fmts = _section(cfg, "output").get("formats", ["csv", "json"])
    if isinstance(fmts, str):
        fmts = [fmts]
    bad = set(fmts) - {"csv", "json"}
    if bad:
        raise ConfigError("output.formats", f"unknown format(s) {sorted(bad)}")
    return set(fmts)


def _prov(cfg):
    # where results are written is not part of what was computed
    physics = {k: v for k, v in cfg.items() if k != "output"}
    return provenance_line(physics, cfg.get("units", "natural"))


def cmd_dispersion(cfg):
    medium = medium_from_config(cfg)
    sec = _section(cfg, "dispersion")
    crit_kw = {}
    if "k_hi" in sec:
        crit_kw["k_hi"] = _num(sec, "k_hi", "dispersion")
    crit = critical_wavenumber(medium, **crit_kw)
    from .dispersion import characteristic_wavenumber

    kc = characteristic_wavenumber(medium)
    # tabulated kernels are only defined on their sample range
    lo, hi = medium.kernel.k_range
    k_min = _num(sec, "k_min", "dispersion", max(1e-2 * kc, lo))
    k_max = _num(sec, "k_max", "dispersion", min(1e2 * kc, hi))
    n_k = _num(sec, "n_k", "dispersion", 200, int)
    if not 0 < k_min < k_max or n_k < 2:
        raise ConfigError("dispersion", "need 0 < k_min < k_max and n_k >= 2")
    curve = sample_curve(medium, np.geomspace(k_min, k_max, n_k))
    out, fmts, prov = output_dir(cfg), _formats(cfg), _prov(cfg)
    if "csv" in fmts:
        curve.to_csv(out / "dispersion.csv", prov)
    info = summary(medium, curve, crit)
    if "json" in fmts:
        write_json(out / "dispersion.json", info, prov)
    return 0, info


def _initial_state(cfg, medium, grid):
    sec = _section(cfg, "init")
    kind = sec.get("kind", "seeded")
    n0 = medium.params.n0
    base = GridState.uniform(grid, n0)
    if kind == "uniform":
        return base, {"kind": kind}
    if kind == "seeded":
        mode = [int(v) for v in _list(sec, "mode", "init", [1])]
        eps = _num(sec, "eps", "init", 1e-4)
        try:
            return seed(base, PerturbationSpec(tuple(mode), eps), medium.params), {
                "kind": kind, "mode": mode, "eps": eps}
        except QMediaError as err:
            raise ConfigError("init", str(err)) from None
    if kind == "plane_wave":
        mode = [int(v) for v in _list(sec, "mode", "init", [1])]
        mode += [0] * (grid.dims - len(mode))
        phase = sum(j * grid.fundamental(i) * x for i, (j, x) in enumerate(zip(mode, grid.coords)))
        return GridState(np.sqrt(n0) * np.exp(1j * phase) * np.ones(grid.shape), grid), {
            "kind": kind, "mode": mode}
    if kind == "noise":
        rng_seed = _num(sec, "seed", "init", 0, int)
        amp = _num(sec, "amplitude", "init", 1e-6)
        rng = np.random.default_rng(rng_seed)
        noise = amp * (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
        return GridState(np.sqrt(n0) * (1 + noise), grid), {"kind": kind, "seed": rng_seed,
                                                            "amplitude": amp}
    raise ConfigError("init.kind", f"unknown initial state {kind!r}")


def cmd_simulate(cfg):
    medium = medium_from_config(cfg)
    grid = grid_from_config(cfg)
    scfg = solver_config(cfg, medium, grid)
    state, init_info = _initial_state(cfg, medium, grid)
    out, prov = output_dir(cfg), _prov(cfg)
    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)
    count = [0]
    last = [state]

    def on_snapshot(s, rep):
        save_snapshot(snapdir / f"snap_{count[0]:05d}.bin", s, prov)
        count[0] += 1
        last[0] = s

    status, error = "ok", None
    try:
        final, reports = run(state, medium, scfg, on_snapshot=on_snapshot)
    except BlowUpError as err:
        status, error = "blow-up", str(err)
        final, reports = err.last_state or last[0], []
    except QMediaError as err:
        raise ConfigError("solver", str(err)) from None
    save_snapshot(out / "final.bin", final, prov)
    if reports:
        write_reports(out / "reports.csv", reports, prov)
    info = {"status": status, "error": error, "t_final": final.t, "steps": scfg.n_steps,
            "snapshots": count[0], "init": init_info, "seed": init_info.get("seed")}
    if reports:
        info["norm_drift"] = abs(reports[-1].norm - reports[0].norm) / reports[0].norm
    write_json(out / "simulate.json", info, prov)
    return (0 if status == "ok" else 1), info


def cmd_validate(cfg):
    medium = medium_from_config(cfg)
    grid = grid_from_config(cfg)
    scfg = solver_config(cfg, medium, grid)
    sec = _section(cfg, "experiment")
    ks = _list(sec, "k", "experiment")
    eps = _num(sec, "eps", "experiment", 1e-4)
    tol = _num(sec, "tol", "experiment", 1e-2)
    workers = _num(sec, "workers", "experiment", 1, int)
    for k in ks:
        try:
            grid.mode_index(k)
        except QMediaError as err:
            raise ConfigError("experiment.k", str(err)) from None
    table = validate_dispersion(medium, ks, scfg, eps=eps, tol=tol, workers=workers)
    out, fmts, prov = output_dir(cfg), _formats(cfg), _prov(cfg)
    if "csv" in fmts:
        table.to_csv(out / "validation.csv", prov)
    verdict = table.verdict()
    if "json" in fmts:
        write_json(out / "validation.json", verdict, prov)
    return (0 if table.passed else 1), verdict


def cmd_scan(cfg):
    sec = _section(cfg, "scan")
    param = sec.get("param")
    if not param:
        raise ConfigError("scan.param", "required")
    param = param.replace("-", "_")
    values = _list(sec, "values", "scan")
    dsec = _section(cfg, "dispersion")
    rows, results = [], []
    for v in values:
        sub = copy.deepcopy(cfg)
        sub.setdefault("medium", {})[param] = v
        medium = medium_from_config(sub)
        kw = {"k_hi": _num(dsec, "k_hi", "dispersion")} if "k_hi" in dsec else {}
        crit = critical_wavenumber(medium, **kw)
        k_star = math.nan if crit.k_star is None else crit.k_star
        rows.append((float(v), float(k_star)))
        results.append({param: v, "k_star": crit.k_star, "residual": crit.residual})
    out, fmts, prov = output_dir(cfg), _formats(cfg), _prov(cfg)
    if "csv" in fmts:
        write_csv(out / "scan.csv", [param, "k_star"], rows, prov)
    info = {"param": param, "results": results}
    if "json" in fmts:
        write_json(out / "scan.json", info, prov)
    return 0, info


def cmd_match_analog(cfg):
    sec = _section(cfg, "match")
    target = sec.get("target")
    if not target:
        raise ConfigError("match.target", "required")
    try:
        columns, rows = read_csv(target)
        ki, wi = columns.index("k"), columns.index("omega_sq")
        k = np.array([float(r[ki]) for r in rows])
        w2 = np.array([float(r[wi]) for r in rows])
    except (OSError, ValueError, IndexError) as err:
        raise ConfigError("match.target", f"cannot read (k, omega_sq) columns: {err}") from None
    medium = medium_from_config(cfg)
    cs2 = sec.get("assume_cs2")
    cs2 = None if cs2 is None else parse_number(cs2, path="match.assume_cs2")
    samples, cs2_used = match_analog(k, w2, medium.params, cs2=cs2)
    out, prov = output_dir(cfg), _prov(cfg)
    save_fourier_table(out / "kernel_table.txt", samples, prov)
    info = {"cs2": cs2_used, "cs2_fitted": cs2 is None, "n_points": len(samples)}
    write_json(out / "match_analog.json", info, prov)
    return 0, info


COMMANDS = {"dispersion": cmd_dispersion, "simulate": cmd_simulate, "validate": cmd_validate,
            "scan": cmd_scan, "match-analog": cmd_match_analog}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--out", help=f"output directory (default ${ENV_OUTPUT} or ./qmedia_out)")
    common.add_argument("--preset", help="medium preset, e.g. self-gravity, quantum-plasma, nmc")
    common.add_argument("--units", choices=["natural", "SI"])
    common.add_argument("--kernel-table", dest="kernel_table", help="two-column k Vk kernel file")
    for name in MEDIUM_FLAGS:
        flag = "--" + name.replace("_", "-")
        common.add_argument(flag, dest=name, default=None)

    ap = argparse.ArgumentParser(prog="qmedia", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qmedia {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dispersion", parents=[common], help="sample ω²(k) and find k*")
    p.add_argument("--k-min", dest="k_min")
    p.add_argument("--k-max", dest="k_max")
    p.add_argument("--n-k", dest="n_k")
    p.add_argument("--k-hi", dest="k_hi", help="scan bound for k*")

    def solver_flags(p, with_time=True):
        p.add_argument("--N", dest="N", help="grid points per axis, comma separated")
        p.add_argument("--L", dest="L", help="box lengths, comma separated")
        p.add_argument("--dt")
        if with_time:
            p.add_argument("--t-end", dest="t_end")
            p.add_argument("--snapshot-every", dest="snapshot_every")
        p.add_argument("--dealias", action=argparse.BooleanOptionalAction, default=None)
        p.add_argument("--safety")

    p = sub.add_parser("simulate", parents=[common], help="run the solver and write snapshots")
    solver_flags(p)
    p.add_argument("--init", dest="kind", choices=["uniform", "seeded", "plane_wave", "noise"])
    p.add_argument("--eps")
    p.add_argument("--mode")
    p.add_argument("--amplitude")
    p.add_argument("--seed")

    p = sub.add_parser("validate", parents=[common], help="measure modes and compare with theory")
    solver_flags(p, with_time=False)
    p.add_argument("--k", help="wavenumbers, comma separated")
    p.add_argument("--eps")
    p.add_argument("--tol")
    p.add_argument("--workers")

    p = sub.add_parser("scan", parents=[common], help="critical wavenumber over a parameter sweep")
    p.add_argument("--param")
    p.add_argument("--values", help="comma separated values")
    p.add_argument("--k-hi", dest="k_hi")

    p = sub.add_parser("match-analog", parents=[common], help="kernel reproducing a target ω²(k)")
    p.add_argument("--target", help="CSV with k and omega_sq columns")
    p.add_argument("--assume-cs2", dest="assume_cs2")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_flags(load_config(args.config), args)
        code, _ = COMMANDS[args.command](cfg)
    except QMediaError as err:
        print(f"qmedia {args.command}: error: {err}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
