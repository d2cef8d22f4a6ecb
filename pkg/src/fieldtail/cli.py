"""Command-line front end.

Subcommands: approx (analytic tail table), simulate (Monte Carlo table),
compare (joined report), verify (invariant suite). Configuration is a JSON
file; unknown keys are rejected. Machine outputs (--csv, --json) are
byte-deterministic for a fixed seed: no timestamps, wall-clock goes to stderr.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 numerical error.
"""
import argparse
import csv
import hashlib
import json
import os
import sys

from . import __version__
from .approximation import RegionSpec, tail_approx_multi
from .errors import ConfigError, DegeneracyError, QuadratureError
from .families import FamilySpec
from .functionals import RAW, STANDARDIZED, FieldContext
from .geometry import Grid
from .simulate import SimConfig, dump_sup_values, estimate_pvalues
from .verification import run_all_checks

_DEFAULTS = {
    "p0": 0.1,
    "iterations": 5000,
    "seed": 0,
    "quad_tol": 1e-4,
    "mode": "both",
    "family": "bernoulli",
    "convention": STANDARDIZED,
    "coarse_grid": None,
    "max_steps": 50,
    "step_tol": 1e-8,
    "sup_dump": None,
    "threads": None,
    "output": None,
}
_ALLOWED_KEYS = {"m", "D", "thresholds"} | set(_DEFAULTS)


def load_config(path):
    """Parse and validate the JSON config; returns (config dict, sha256 hex)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        data = json.loads(raw)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(data) - _ALLOWED_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("m", "D", "thresholds"):
        if key not in data:
            raise ConfigError(f"config key {key!r} is required")

    cfg = dict(_DEFAULTS)
    cfg.update(data)
    if not isinstance(cfg["m"], int) or cfg["m"] < 0:
        raise ConfigError("m must be a nonnegative integer")
    if not isinstance(cfg["D"], (int, float)) or cfg["D"] <= 0:
        raise ConfigError("D must be a positive number")
    if not isinstance(cfg["thresholds"], list) or not cfg["thresholds"]:
        raise ConfigError("thresholds must be a non-empty list")
    if any(not isinstance(x, (int, float)) or x <= 0 for x in cfg["thresholds"]):
        raise ConfigError("thresholds must be positive numbers")
    if not 0.0 < cfg["p0"] < 1.0:
        raise ConfigError("p0 must lie in (0,1)")
    if cfg["mode"] not in ("full", "gaussian", "both"):
        raise ConfigError("mode must be full, gaussian or both")
    if cfg["family"] not in ("bernoulli", "gaussian"):
        raise ConfigError("family must be bernoulli or gaussian")
    if cfg["convention"] not in (STANDARDIZED, RAW):
        raise ConfigError(f"convention must be {STANDARDIZED} or {RAW}")
    if not isinstance(cfg["iterations"], int) or cfg["iterations"] < 1:
        raise ConfigError("iterations must be a positive integer")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    if not cfg["quad_tol"] > 0:
        raise ConfigError("quad_tol must be positive")
    return cfg, hashlib.sha256(raw).hexdigest()


def _build_context(cfg):
    family = (
        FamilySpec.gaussian() if cfg["family"] == "gaussian"
        else FamilySpec.bernoulli(cfg["p0"])
    )
    convention = cfg["convention"] if family.kind == "bernoulli" else STANDARDIZED
    return FieldContext(Grid(cfg["m"]), family, float(cfg["D"]), tilt_convention=convention)


def cmd_approx(cfg):
    ctx = _build_context(cfg)
    results = tail_approx_multi(
        ctx, RegionSpec.unit_square(), cfg["thresholds"], quad_tol=cfg["quad_tol"]
    )
    rows = []
    for res in results:
        row = {"x": res.x}
        if cfg["mode"] in ("full", "both"):
            row["p_full"] = res.p_full
        if cfg["mode"] in ("gaussian", "both"):
            row["p_gauss"] = res.p_gauss
        row.update(
            interior=res.interior,
            boundary=res.boundary,
            quad_error=res.diagnostics["interior_error"],
            evaluations=res.diagnostics["evaluations"],
        )
        rows.append(row)
    return rows


def _sim_config(cfg, seed):
    try:
        return SimConfig(
            m=cfg["m"], D=float(cfg["D"]), p0=cfg["p0"],
            thresholds=tuple(cfg["thresholds"]), iterations=cfg["iterations"],
            seed=seed, coarse_grid=cfg["coarse_grid"], max_steps=cfg["max_steps"],
            step_tol=cfg["step_tol"], convention=cfg["convention"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(cfg, seed, threads):
    if cfg["family"] != "bernoulli":
        raise ConfigError("simulation samples the Bernoulli null only")
    sim = _sim_config(cfg, seed)
    result = estimate_pvalues(sim, workers=threads)
    print(f"simulated {result.iterations} fields in {result.wall_time:.1f}s "
          f"({threads} worker{'s' if threads != 1 else ''})", file=sys.stderr)
    if cfg["sup_dump"]:
        dump_sup_values(cfg["sup_dump"], result.sups)
    rows = []
    for j, x in enumerate(result.thresholds):
        rows.append({
            "x": x,
            "p_hat": float(result.p_hat[j]),
            "se": float(result.se[j]),
            "count": int(result.counts[j]),
            "count_coarse": int(result.counts_coarse[j]),
            "iterations": result.iterations,
        })
    return rows


def cmd_compare(cfg, seed, threads):
    approx_rows = {row["x"]: row for row in cmd_approx(cfg)}
    sim_rows = cmd_simulate(cfg, seed, threads)
    rows = []
    for srow in sim_rows:
        arow = approx_rows[srow["x"]]
        band = 3.0 * srow["se"]
        p_full = arow.get("p_full")
        row = {
            "x": srow["x"],
            "p_hat": srow["p_hat"],
            "se": srow["se"],
        }
        if p_full is not None:
            row["p_full"] = p_full
            row["agree"] = "yes" if abs(srow["p_hat"] - p_full) <= band else "no"
        if "p_gauss" in arow:
            row["p_gauss"] = arow["p_gauss"]
        rows.append(row)
    return rows


def cmd_verify(flip=False):
    checks = run_all_checks(_flip_lambda_sign=flip)
    width = max(len(c.name) for c in checks)
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        print(f"{c.name:<{width}}  {status}  {c.detail}")
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 0 if not failed else 1


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(rows, path):
    cols = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)  # csv default \r\n line endings
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in cols])


def read_csv(path):
    """Inverse of write_csv: returns the rows with numeric fields restored."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        rows = []
        for rec in reader:
            row = {}
            for key, val in zip(cols, rec):
                try:
                    num = float(val)
                    row[key] = int(num) if num.is_integer() and "." not in val and "e" not in val else num
                except ValueError:
                    row[key] = val
            rows.append(row)
    return rows


def write_json(rows, path, meta):
    payload = {"meta": meta, "rows": rows}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def print_table(rows):
    if not rows:
        print("(no rows)")
        return
    cols = list(rows[0].keys())
    table = [[c for c in cols]]
    for row in rows:
        table.append([f"{v:.6g}" if isinstance(v, float) else str(v) for v in (row[c] for c in cols)])
    widths = [max(len(line[i]) for line in table) for i in range(len(cols))]
    for line in table:
        print("  ".join(cell.rjust(w) for cell, w in zip(line, widths)))


def _resolve_threads(args, cfg):
    if args.threads is not None:
        return args.threads
    if cfg.get("threads"):
        return int(cfg["threads"])
    env = os.environ.get("FIELDTAIL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FIELDTAIL_THREADS must be an integer, got {env!r}")
    return 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fieldtail",
        description="Tail probabilities of score-field maxima: analytic approximation and Monte Carlo.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("approx", "simulate", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--csv", help="write rows as CSV")
        p.add_argument("--json", help="write rows plus provenance as JSON")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="simulation workers (results identical for any count)")
        p.add_argument("--mode", choices=("full", "gaussian", "both"), help="override the config mode")
    sub.add_parser("verify")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify()
    try:
        cfg, sha = load_config(args.config)
        if args.mode:
            cfg["mode"] = args.mode
        seed = args.seed if args.seed is not None else cfg["seed"]
        threads = _resolve_threads(args, cfg)

        if args.command == "approx":
            rows = cmd_approx(cfg)
        elif args.command == "simulate":
            rows = cmd_simulate(cfg, seed, threads)
        else:
            rows = cmd_compare(cfg, seed, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DegeneracyError, QuadratureError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3

    print_table(rows)
    meta = {"version": __version__, "seed": seed, "config_sha256": sha, "command": args.command}
    csv_path, json_path = args.csv, args.json
    output = cfg.get("output")
    if output and not (csv_path or json_path):
        if output.endswith(".json"):
            json_path = output
        else:
            csv_path = output
    if csv_path:
        write_csv(rows, csv_path)
    if json_path:
        write_json(rows, json_path, meta)
    return 0


if __name__ == "__main__":
    sys.exit(main())
