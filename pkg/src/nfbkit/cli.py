"""Command-line front end.

Subcommands
-----------
``param-check``
    Evaluate the feasibility certificate for explicit ``(zeta, epsilon,
    lambda, alpha)`` and optionally validate a named inertia schedule
    against it.  Exit status 2 when infeasible.
``sweep``
    Tabulate certificates over a ``(zeta, epsilon)`` grid as CSV.
``qp-bench``
    Constrained least-squares benchmark grid; writes a per-run CSV and
    an aggregate JSON.
``image-restore``
    Blur + noise restoration run; writes PGM images, the iterate trace
    CSV and a JSON summary.
``equiv-test``
    Compare two method routes on shared random data and check their
    trajectories agree to a tolerance.

Configuration files are TOML; ``--set table.key=value`` overrides
individual entries (values are parsed as TOML scalars, falling back to
bare strings).  Output files carry ``# key=value`` metadata headers
with the tool version and a hash of the effective configuration.

Exit codes: 0 success, 2 infeasible parameters, 3 a run failed
(diverged or missed its tolerance where one is enforced), 4 bad input.
"""

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np
import tomli

from . import __version__
from .certificates import FeasibilityError, make_certificate
from .experiments import (QpConfig, RestoreConfig, run_equivalence,
                          run_qp_bench, run_restore)
from .linalg import write_pgm
from .methods import KERNELS
from .schedules import parse_schedule, validate_schedule

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_FAILED = 3
EXIT_BAD_INPUT = 4

QP_DEFAULTS = {
    "instance": {"n": 200, "m": 100, "p": 20, "noise_rel": 0.5},
    "run": {"seeds": [1, 2, 3, 4, 5],
            "schedules": ["const:0", "opt:0.99", "dec2"],
            "lam": 1.0, "t": 0.5, "kappa1": 0.5,
            "rel_tol": 1e-6, "max_iters": 100000},
}

RESTORE_DEFAULTS = {
    "instance": {"n": 64, "kernel": "avg3", "noise_std": 1e-3,
                 "mu1": 1e-2, "mu2": 1e-3, "delta": 1e-2,
                 "haar_level": 3, "seed": 0},
    "run": {"t": 0.999, "kappa1": 0.17, "kappa2": 0.99, "lam": 1.0,
            "rel_tol": 1e-6, "max_iters": 50000},
}


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def load_config(path):
    with open(path, "rb") as f:
        return tomli.load(f)


def parse_set(expr):
    """``table.key=value`` -> (dotted key, TOML-parsed value)."""
    key, sep, raw = expr.partition("=")
    if not sep or not key.strip():
        raise ValueError(f"--set wants key=value, got {expr!r}")
    try:
        val = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        val = raw
    return key.strip(), val


def apply_sets(cfg, exprs):
    for expr in exprs or ():
        key, val = parse_set(expr)
        parts = key.split(".")
        node = cfg
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"{key!r} descends through a scalar")
        node[parts[-1]] = val
    return cfg


def deep_merge(base, override):
    # copy nested tables too: callers mutate the result via apply_sets,
    # and the base is often a module-level defaults dict
    out = {key: deep_merge(val, {}) if isinstance(val, dict) else val
           for key, val in base.items()}
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def check_keys(cfg, schema, where="config"):
    """Reject tables/keys that the schema does not know about."""
    for key, val in cfg.items():
        if key not in schema:
            raise ValueError(
                f"unknown {where} entry {key!r}; "
                f"valid: {sorted(schema)}")
        if isinstance(schema[key], dict):
            if not isinstance(val, dict):
                raise ValueError(f"{where}.{key} must be a table")
            check_keys(val, schema[key], f"{where}.{key}")


def config_hash(cfg):
    blob = json.dumps(_jsonable(cfg), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def base_metadata(cfg, **extra):
    md = {"tool": f"nfbkit/{__version__}",
          "config_sha256": config_hash(cfg)}
    md.update(extra)
    return md


def write_csv(path, rows, fieldnames, metadata=None):
    with open(path, "w", newline="") as f:
        for key, val in (metadata or {}).items():
            f.write(f"# {key}={val}\n")
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_json(path, payload):
    with open(path, "w") as f:
        json.dump(_jsonable(payload), f, indent=2)
        f.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _resolve_nu(mode, zeta):
    return 0.0 if mode == "0" else 2.0 * zeta


def cmd_param_check(args):
    cert = make_certificate(args.zeta, args.epsilon, args.lam, args.alpha,
                            nu=_resolve_nu(args.nu, args.zeta))
    payload = cert.to_dict()
    rc = EXIT_OK if cert.feasible else EXIT_INFEASIBLE
    if args.schedule:
        spec = parse_schedule(args.schedule, lam=args.lam)
        report = validate_schedule(spec, cert, horizon=args.horizon)
        payload["schedule"] = {
            "name": args.schedule,
            "feasible": report.feasible,
            "first_violation": report.first_violation,
            "validated_from": report.validated_from,
            "delta_tail_min": report.delta_tail_min,
            "horizon": report.horizon,
        }
        if not report.feasible:
            rc = EXIT_INFEASIBLE
    if args.json:
        print(json.dumps(_jsonable(payload), indent=2))
    else:
        for key, val in payload.items():
            if isinstance(val, dict):
                for k2, v2 in val.items():
                    print(f"{key}.{k2} = {v2}")
            else:
                print(f"{key} = {val}")
    return rc


def cmd_sweep(args):
    zmin, zmax, zcount = args.zeta
    emin, emax, ecount = args.epsilon
    if zcount < 1 or ecount < 1:
        raise ValueError("grid counts must be >= 1")
    rows = []
    for zeta in np.linspace(zmin, zmax, int(zcount)):
        for eps in np.linspace(emin, emax, int(ecount)):
            row = {"zeta": f"{zeta:.12g}", "epsilon": f"{eps:.12g}",
                   "nu": "", "psi": "", "lambda_max": "",
                   "alpha_sup": "", "rho": "", "feasible": "false"}
            try:
                cert = make_certificate(zeta, eps, args.lam, args.alpha,
                                        nu=_resolve_nu(args.nu, zeta))
            except (FeasibilityError, ValueError):
                rows.append(row)
                continue
            row.update({
                "nu": f"{cert.nu:.12g}", "psi": f"{cert.psi:.12g}",
                "lambda_max": f"{cert.lambda_max:.12g}",
                "alpha_sup": f"{cert.alpha_sup:.12g}",
                "rho": f"{cert.rho:.12g}",
                "feasible": "true" if cert.feasible else "false",
            })
            rows.append(row)
    fields = ["zeta", "epsilon", "nu", "psi", "lambda_max", "alpha_sup",
              "rho", "feasible"]
    meta = base_metadata({"zeta": list(args.zeta),
                          "epsilon": list(args.epsilon),
                          "lam": args.lam, "alpha": args.alpha,
                          "nu": args.nu},
                         lam=args.lam, alpha=args.alpha)
    if args.out == "-":
        for key, val in meta.items():
            sys.stdout.write(f"# {key}={val}\n")
        writer = csv.DictWriter(sys.stdout, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    else:
        write_csv(args.out, rows, fields, meta)
        print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


def cmd_qp_bench(args):
    cfg = deep_merge(QP_DEFAULTS,
                     load_config(args.config) if args.config else {})
    apply_sets(cfg, args.set)
    check_keys(cfg, QP_DEFAULTS)
    run = cfg["run"]
    qp_cfg = QpConfig(**cfg["instance"])
    rows, agg = run_qp_bench(qp_cfg, schedules=run["schedules"],
                             seeds=run["seeds"], lam=run["lam"],
                             t=run["t"], kappa1=run["kappa1"],
                             rel_tol=run["rel_tol"],
                             max_iters=int(run["max_iters"]))
    os.makedirs(args.out, exist_ok=True)
    meta = base_metadata(cfg, seeds=",".join(str(s) for s in run["seeds"]))
    fields = ["method", "schedule", "seed", "lambda", "t", "kappa1",
              "status", "iterations", "rel_err", "kkt_residual",
              "objective", "time_s"]
    csv_rows = [{k: (f"{v:.12g}" if isinstance(v, float) else v)
                 for k, v in row.items()} for row in rows]
    csv_path = os.path.join(args.out, "qp_bench.csv")
    write_csv(csv_path, csv_rows, fields, meta)
    write_json(os.path.join(args.out, "qp_bench.json"),
               {"metadata": meta, "config": cfg, "aggregate": agg})
    for label, stats in agg.items():
        print(f"{label:12s} converged {stats['converged']}/{stats['runs']}"
              f"  mean iterations {stats['mean_iterations_converged']:.0f}"
              f"  mean time {stats['mean_time_s_converged']:.2f}s")
    print(f"wrote {csv_path}")
    if any(r["status"] == "diverged" for r in rows):
        return EXIT_FAILED
    return EXIT_OK


def cmd_image_restore(args):
    cfg = deep_merge(RESTORE_DEFAULTS,
                     load_config(args.config) if args.config else {})
    apply_sets(cfg, args.set)
    check_keys(cfg, {"instance": RESTORE_DEFAULTS["instance"],
                     "run": dict(RESTORE_DEFAULTS["run"], alpha=None)})
    run = dict(cfg["run"])
    run["max_iters"] = int(run["max_iters"])
    rc_cfg = RestoreConfig(**cfg["instance"])
    result = run_restore(rc_cfg, **run)
    os.makedirs(args.out, exist_ok=True)
    inst, trace = result["instance"], result["trace"]
    meta = base_metadata(cfg, seed=rc_cfg.seed)
    binary = not args.ascii_pgm
    write_pgm(os.path.join(args.out, "true.pgm"), inst.x_true, binary=binary)
    write_pgm(os.path.join(args.out, "observed.pgm"),
              np.clip(inst.observed, 0.0, 1.0), binary=binary)
    write_pgm(os.path.join(args.out, "restored.pgm"), result["restored"],
              binary=binary)
    trace.to_csv(os.path.join(args.out, "trace.csv"), metadata=meta)
    summary = {
        "metadata": meta,
        "config": cfg,
        "init": result["init"].to_dict(),
        "run": trace.summary(),
        "psnr_observed_db": result["psnr_observed"],
        "psnr_restored_db": result["psnr_restored"],
        "psnr_gain_db": result["psnr_restored"] - result["psnr_observed"],
        "objective_observed": result["objective_observed"],
        "objective_restored": result["objective_restored"],
        "time_s": result["time_s"],
    }
    write_json(os.path.join(args.out, "summary.json"), summary)
    print(f"status={trace.status} iterations={trace.iterations} "
          f"rel_err={trace.final_rel_err:.3e}")
    print(f"psnr observed={result['psnr_observed']:.2f} dB "
          f"restored={result['psnr_restored']:.2f} dB "
          f"gain={summary['psnr_gain_db']:.2f} dB")
    print(f"wrote {args.out}/restored.pgm")
    if trace.status == "diverged":
        return EXIT_FAILED
    return EXIT_OK


def cmd_equiv_test(args):
    out = run_equivalence(pair=tuple(args.pair),
                          primal_dim=int(args.dims[0]),
                          dual_dim=int(args.dims[1]),
                          seeds=range(args.seeds), iters=args.iters)
    for seed, dev in enumerate(out["deviations"]):
        print(f"seed={seed} deviation={dev:.3e}")
    ok = out["max_deviation"] <= args.tol
    print(f"pair={out['pair'][0]},{out['pair'][1]} blocks={out['blocks']} "
          f"max_deviation={out['max_deviation']:.3e} tol={args.tol:.1e} "
          f"{'OK' if ok else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse with the documented bad-input exit status."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_BAD_INPUT)


def build_parser():
    parser = _Parser(prog="nfbkit",
                     description="warped-resolvent splitting toolkit")
    parser.add_argument("--version", action="version",
                        version=f"nfbkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("param-check",
                       help="evaluate a feasibility certificate")
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--nu", choices=["0", "2zeta"], default="0")
    p.add_argument("--schedule", default=None,
                   help="also validate this inertia schedule")
    p.add_argument("--horizon", type=int, default=100000)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_param_check)

    p = sub.add_parser("sweep", help="tabulate certificates over a grid")
    p.add_argument("--zeta", nargs=3, type=float, required=True,
                   metavar=("MIN", "MAX", "COUNT"))
    p.add_argument("--epsilon", nargs=3, type=float, required=True,
                   metavar=("MIN", "MAX", "COUNT"))
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--nu", choices=["0", "2zeta"], default="0")
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("qp-bench",
                       help="constrained least-squares benchmark")
    p.add_argument("--config", default=None, help="TOML config file")
    p.add_argument("--set", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config entry")
    p.add_argument("--out", default="qp-bench-out")
    p.set_defaults(func=cmd_qp_bench)

    p = sub.add_parser("image-restore", help="deblurring benchmark")
    p.add_argument("--config", default=None, help="TOML config file")
    p.add_argument("--set", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config entry")
    p.add_argument("--out", default="restore-out")
    p.add_argument("--ascii-pgm", action="store_true",
                   help="write plain-text (P2) images")
    p.set_defaults(func=cmd_image_restore)

    p = sub.add_parser("equiv-test",
                       help="compare two method routes on shared data")
    p.add_argument("--pair", nargs=2, default=["fpdhf", "fpdhf-oracle"],
                   choices=sorted(KERNELS), metavar=("A", "B"))
    p.add_argument("--dims", nargs=2, type=int, default=[20, 8],
                   metavar=("PRIMAL", "DUAL"))
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_equiv_test)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, TypeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
