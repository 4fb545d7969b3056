"""Command-line driver: factor | solve | verify | bench.

Jobs are described by a single YAML document (nested key/value
sections); command-line flags override individual entries, so a config
file is optional for the built-in problems.  Exit codes are a stable
contract: 0 success, 2 verification failure, 3 divergence / singular
parameter / aliasing guard, 4 configuration error.
"""

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np
import yaml

from . import catalog, oracles
from .catalog import ProgramConstructionError, SingularParameterError
from .engine import (
    AliasingError,
    Grid,
    StateField,
    execute,
    gaussian,
    l2_error,
    l2_norm,
    load_field,
    save_field,
)
from .program import SplittingProgram
from .solver import DivergenceError, schrodinger_coefficients, schrodinger_program, verify_program
from .symplectic import QuadraticSymbol

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_DIVERGE = 3
EXIT_CONFIG = 4


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = {
    "problem": None,
    "params": {},
    "t_final": None,
    "n_steps": 1,
    "grid": {"sizes": None, "bounds": None},
    "initial": {"type": "gaussian", "center": None, "width": None, "path": None, "preset": None},
    "outputs": {"directory": ".", "diagnostics": None, "field_dump_every": 0,
                "program": None, "report": None},
    "tolerances": {"verify": 1e-10, "solver": 1e-12},
    "threads": 1,
    "fuse": True,
}

PROBLEMS = ("harmonic", "rotation2d", "dilatation", "shear_factor", "rotation_nd",
            "schrodinger", "fokker_planck", "kfp", "custom_symbol")


def _deep_update(base, extra):
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], val)
        else:
            base[key] = val
    return base


def load_config(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as err:
            raise ConfigError(f"cannot read config: {err}")
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a mapping")
        _deep_update(cfg, doc)
    # flag overrides
    if getattr(args, "problem", None):
        cfg["problem"] = args.problem
    for key in ("t", "theta", "lam", "n"):
        val = getattr(args, key, None)
        if val is not None:
            cfg["params"][key] = val
    if getattr(args, "t_final", None) is not None:
        cfg["t_final"] = args.t_final
    if getattr(args, "n_steps", None) is not None:
        cfg["n_steps"] = args.n_steps
    if getattr(args, "grid_size", None):
        cfg["grid"]["sizes"] = args.grid_size
    if getattr(args, "grid_bounds", None):
        bounds = args.grid_bounds
        if len(bounds) % 2:
            raise ConfigError("--grid-bounds needs pairs a b per dimension")
        cfg["grid"]["bounds"] = [bounds[i:i + 2] for i in range(0, len(bounds), 2)]
    if getattr(args, "out", None):
        cfg["outputs"]["directory"] = args.out
    if getattr(args, "tol", None) is not None:
        cfg["tolerances"]["verify"] = args.tol
    if getattr(args, "threads", None) is not None:
        cfg["threads"] = args.threads
    if getattr(args, "no_fuse", False):
        cfg["fuse"] = False
    if cfg["problem"] not in PROBLEMS:
        raise ConfigError(f"problem must be one of {PROBLEMS}, got {cfg['problem']!r}")
    return cfg


def _param(cfg, key, default=None, required=False):
    val = cfg["params"].get(key, default)
    if required and val is None:
        raise ConfigError(f"problem {cfg['problem']!r} needs parameter {key!r}")
    return val


def build_program(cfg, t=None) -> SplittingProgram:
    """Build the splitting program for one step of size ``t``."""
    problem = cfg["problem"]
    tol = float(cfg["tolerances"]["solver"])
    if problem == "harmonic":
        t = float(_param(cfg, "t", required=True) if t is None else t)
        return catalog.harmonic_oscillator(t, int(_param(cfg, "n", 1)))
    if problem == "rotation2d":
        theta = float(_param(cfg, "theta", required=True) if t is None else t)
        return catalog.rotation2d(theta)
    if problem == "dilatation":
        lam = float(_param(cfg, "lam", required=True)) if t is None else math.exp(t)
        return catalog.dilatation(lam)
    if problem == "shear_factor":
        g = _param(cfg, "matrix", required=True)
        return catalog.shear_factorize(np.array(g, dtype=float))
    if problem == "rotation_nd":
        m = np.array(_param(cfg, "matrix", required=True), dtype=float)
        t = float(_param(cfg, "t", required=True) if t is None else t)
        return catalog.rotation_nd(m, t, tol=tol)
    if problem == "schrodinger":
        v = np.array(_param(cfg, "V", required=True), dtype=float)
        b = np.array(_param(cfg, "B", required=True), dtype=float)
        t = float(_param(cfg, "t", required=True) if t is None else t)
        coeffs = schrodinger_coefficients(v, b, t, tol=tol)
        return schrodinger_program(coeffs, v=v, b=b)
    if problem == "fokker_planck":
        t = float(_param(cfg, "t", required=True) if t is None else t)
        return catalog.fokker_planck(t)
    if problem == "kfp":
        t = float(_param(cfg, "t", required=True) if t is None else t)
        return catalog.kramers_fokker_planck(t)
    if problem == "custom_symbol":
        rec = _param(cfg, "symbol", required=True)
        sym = QuadraticSymbol.from_record(rec)
        t = float(_param(cfg, "t", 1.0) if t is None else t)
        return catalog.factor_symbol(sym, t)
    raise ConfigError(f"unhandled problem {problem!r}")


def build_grid(cfg) -> Grid:
    sizes = cfg["grid"]["sizes"]
    bounds = cfg["grid"]["bounds"]
    if sizes is None or bounds is None:
        raise ConfigError("solve/bench need grid.sizes and grid.bounds")
    try:
        return Grid(tuple(int(s) for s in sizes),
                    tuple((float(a), float(b)) for a, b in bounds))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad grid spec: {err}")


def build_initial(cfg, grid: Grid) -> StateField:
    init = cfg["initial"]
    kind = init.get("type", "gaussian")
    if kind == "gaussian":
        return gaussian(grid, init.get("center"), init.get("width"))
    if kind == "file":
        path = init.get("path")
        if not path:
            raise ConfigError("initial type 'file' needs a path")
        field = load_field(path)
        if field.grid != grid:
            raise ConfigError("initial field grid does not match the job grid")
        return field
    if kind == "preset":
        name = init.get("preset") or init.get("name")
        if name == "ground_state":
            return oracles.harmonic_ground_state(grid)
        if name == "maxwellian":
            return oracles.maxwellian(grid)
        raise ConfigError(f"unknown initial preset {name!r}")
    raise ConfigError(f"unknown initial type {kind!r}")


def _outdir(cfg) -> str:
    out = cfg["outputs"]["directory"] or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_report(path, report):
    with open(path, "w") as fh:
        json.dump(report.to_record(), fh, indent=1)


def _write_iteration_log(path, log):
    with open(path, "w") as fh:
        for rec in log:
            fh.write(json.dumps(rec) + "\n")


# ----------------------------------------------------------------- verbs

def cmd_factor(args) -> int:
    cfg = load_config(args)
    out = _outdir(cfg)
    prog = build_program(cfg)
    tol = float(cfg["tolerances"]["verify"])
    report = verify_program(prog, tol=tol)
    prog_path = cfg["outputs"]["program"] or os.path.join(out, "program.json")
    report_path = cfg["outputs"]["report"] or os.path.join(out, "report.json")
    prog.save(prog_path)
    _write_report(report_path, report)
    if prog.iteration_log:
        _write_iteration_log(os.path.join(out, "iterations.jsonl"), prog.iteration_log)
    print(f"{prog.provenance}: {prog.step_count()} steps, flow residual "
          f"{report.residual:.3e} (tol {tol:.1e}) -> {prog_path}")
    if not report.ok:
        print("verification FAILED", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg_tol = args.tol if args.tol is not None else 1e-10
    prog = SplittingProgram.load(args.program)
    report = verify_program(prog, tol=cfg_tol)
    print(json.dumps(report.to_record(), indent=1))
    return EXIT_OK if report.ok else EXIT_VERIFY


def _solve_once(cfg, prog, grid, field):
    """Time-step the program, writing diagnostics and dumps."""
    out = _outdir(cfg)
    n_steps = int(cfg["n_steps"])
    diag_path = cfg["outputs"]["diagnostics"] or os.path.join(out, "diagnostics.csv")
    dump_every = int(cfg["outputs"]["field_dump_every"] or 0)
    workers = int(cfg["threads"])
    fuse = bool(cfg["fuse"])

    rows = []
    for step_no in range(n_steps):
        def collect(i, step, fld, stats, _step_no=step_no):
            rows.append([_step_no, i, step.kind,
                         f"{l2_norm(fld):.17g}", stats.fft_1d_calls, ""])

        field, stats = execute(field, prog, fuse=fuse, workers=workers, collect=collect)
        if rows:
            rows[-1][-1] = f"{stats.boundary_mass:.17g}"
        if dump_every and (step_no + 1) % dump_every == 0:
            save_field(field, os.path.join(out, f"field_{step_no + 1:06d}.bin"))
    with open(diag_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_step", "step_index", "kind", "norm_after",
                         "fft_calls", "boundary_mass"])
        writer.writerows(rows)
    save_field(field, os.path.join(out, "field_final.bin"))
    return field, diag_path


def cmd_solve(args) -> int:
    cfg = load_config(args)
    grid = build_grid(cfg)
    field = build_initial(cfg, grid)
    t_final = cfg["t_final"]
    n_steps = int(cfg["n_steps"])
    if args.program:
        prog = SplittingProgram.load(args.program)
    else:
        if t_final is None:
            raise ConfigError("solve needs t_final (or an explicit --program)")
        tau = float(t_final) / max(n_steps, 1)
        for _ in range(4):  # automatic sub-step refinement on request
            try:
                prog = build_program(cfg, t=tau)
                break
            except (SingularParameterError, DivergenceError) as err:
                hint = getattr(err, "suggested", None) or getattr(err, "suggested_t", None)
                if not hint:
                    raise
                n_steps = int(math.ceil(float(t_final) / abs(hint)))
                tau = float(t_final) / n_steps
                print(f"subdividing: n_steps -> {n_steps} ({err})", file=sys.stderr)
        else:
            raise DivergenceError("could not find a convergent sub-step")
        cfg["n_steps"] = n_steps
    if n_steps == 0:
        out = _outdir(cfg)
        save_field(field, os.path.join(out, "field_final.bin"))
        print(f"0 steps: field copied, norm {l2_norm(field):.12e}")
        return EXIT_OK
    field, diag_path = _solve_once(cfg, prog, grid, field)
    print(f"{cfg['n_steps']} steps of {prog.provenance}: final norm "
          f"{l2_norm(field):.12e}, diagnostics -> {diag_path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args)
    if cfg["problem"] != "harmonic":
        raise ConfigError("bench supports the harmonic problem")
    grid = build_grid(cfg)
    t_final = float(cfg["t_final"] if cfg["t_final"] is not None else 1.0)
    taus = [float(x) for x in (args.taus or "0.2,0.1,0.05").split(",")]
    n = grid.ndim
    u0 = oracles.harmonic_ground_state(grid)
    norm0 = l2_norm(u0)
    out = _outdir(cfg)
    path = os.path.join(out, "bench.csv")
    rows = []
    for tau in taus:
        steps = max(1, round(t_final / tau))
        tau_eff = t_final / steps
        for method, builder in (("exact", catalog.harmonic_oscillator),
                                ("strang", oracles.strang_harmonic)):
            prog = builder(tau_eff, n)
            field = u0
            t0 = time.perf_counter()
            calls = 0
            for _ in range(steps):
                field, stats = execute(field, prog, fuse=bool(cfg["fuse"]),
                                       workers=int(cfg["threads"]))
                calls += stats.fft_1d_calls
            wall = time.perf_counter() - t0
            expected = StateField(grid, u0.values * math.exp(-n * t_final))
            err = l2_error(field, expected)
            rows.append([method, f"{tau_eff:.17g}", steps, calls, f"{err:.17g}",
                         f"{wall:.6f}"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "t", "steps", "fft_calls", "error_vs_oracle",
                         "wall_time"])
        writer.writerows(rows)
    print(f"bench -> {path}")
    for row in rows:
        print("  " + ",".join(str(x) for x in row))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exactsplit",
        description="Exact splitting factorizations: build, verify, run, benchmark.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="YAML job document")
        p.add_argument("--problem", choices=PROBLEMS)
        p.add_argument("--t", type=float, help="time step / parameter t")
        p.add_argument("--theta", type=float, help="rotation angle")
        p.add_argument("--lam", type=float, help="dilatation factor")
        p.add_argument("--n", type=int, help="space dimension")
        p.add_argument("--t-final", type=float, dest="t_final")
        p.add_argument("--n-steps", type=int, dest="n_steps")
        p.add_argument("--grid-size", type=int, nargs="+", dest="grid_size")
        p.add_argument("--grid-bounds", type=float, nargs="+", dest="grid_bounds")
        p.add_argument("--out", help="output directory")
        p.add_argument("--tol", type=float, help="verification tolerance")
        p.add_argument("--threads", type=int, help="FFT worker threads")
        p.add_argument("--no-fuse", action="store_true", dest="no_fuse")

    p_factor = sub.add_parser("factor", help="build + verify a program")
    common(p_factor)
    p_factor.set_defaults(func=cmd_factor)

    p_solve = sub.add_parser("solve", help="time-step a field with a program")
    common(p_solve)
    p_solve.add_argument("--program", help="use a previously factored program file")
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="re-verify a program file")
    p_verify.add_argument("--program", required=True)
    p_verify.add_argument("--tol", type=float)
    p_verify.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("bench", help="exact vs Strang comparison table")
    common(p_bench)
    p_bench.add_argument("--taus", help="comma-separated step sizes")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularParameterError, DivergenceError, AliasingError) as err:
        hint = getattr(err, "suggested", None) or getattr(err, "suggested_t", None)
        extra = f" (suggested sub-step: {hint})" if hint else ""
        print(f"error: {err}{extra}", file=sys.stderr)
        return EXIT_DIVERGE
    except ProgramConstructionError as err:
        print(f"verification error: {err}", file=sys.stderr)
        return EXIT_VERIFY
    except (ValueError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
