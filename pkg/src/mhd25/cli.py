"""Command-line entry point: simulate, oracle, decay-fit, spectrum, verify."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .config import ConfigError, load_config
from .diagnostics import fit_decay_exponent
from .experiment import format_value, read_csv, run_experiment
from .grid_spectral import l2_norm
from .linear_oracle import spectrum_table
from .littlewood_paley import CutoffPair

EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_ACCEPTANCE = 0, 2, 3, 4


def _err(msg: str) -> None:
    print(f"mhd25: {msg}", file=sys.stderr)


def _print_summary(rep) -> None:
    print(f"mode={rep.cfg.run_mode} records={len(rep.records)} t_final={rep.records[-1].t:.6g} "
          f"X0={rep.records[0].X_t:.6e} X_final={rep.records[-1].X_t:.6e} wall={rep.wall_time:.1f}s")
    for k, f in rep.fits.items():
        if isinstance(f, str):
            print(f"fit {k}: unavailable ({f})")
        else:
            print(f"fit {k}: exponent {f.exponent:.4f} (predicted {f.predicted:.3f}), "
                  f"r2 {f.r_squared:.4f}, n={f.n_samples}")
    if rep.out_dir is not None:
        print(f"artifacts written to {rep.out_dir}")


def cmd_simulate(args, mode=None) -> int:
    cfg = load_config(args.config)
    if args.output:
        cfg = cfg.with_(output_path=args.output)
    if mode:
        cfg = cfg.with_(run_mode=mode)
    rep = run_experiment(cfg, progress=_progress if args.verbose else None)
    _print_summary(rep)
    if not rep.ok:
        _err(f"validity gate tripped (last valid t={rep.t_last_valid}): {rep.error}")
        return EXIT_GATE
    return EXIT_OK


def _progress(rec) -> None:
    print(f"t={rec.t:.5g} l2_phi={rec.l2_phi:.4e} l2_u={rec.l2_u:.4e} X={rec.X_t:.4e}",
          file=sys.stderr)


def cmd_oracle(args) -> int:
    """Linear-oracle run; with --compare also the nonlinear run and their
    final-state distance."""
    code = cmd_simulate(args, mode="linear_oracle")
    if code or not args.compare:
        return code
    cfg = load_config(args.config)
    lin = run_experiment(cfg.with_(run_mode="linear_oracle"), write=False, keep_records=False)
    nl = run_experiment(cfg.with_(run_mode="nonlinear"), write=False, keep_records=False)
    if not nl.ok:
        _err(f"nonlinear run tripped the validity gate: {nl.error}")
        return EXIT_GATE
    for k in ("a", "u", "b"):
        x, y = getattr(nl.final_state, k), getattr(lin.final_state, k)
        ref = l2_norm(y)
        dist = l2_norm(x - y) / ref if ref > 0 else l2_norm(x - y)
        print(f"relative L2 distance nonlinear vs oracle [{k}] = {dist:.3e}")
    return EXIT_OK


def cmd_decay_fit(args) -> int:
    data = read_csv(args.csv)
    if args.quantity == "l2_phi_u":
        values = data["l2_phi"] + data["l2_u"]
    elif args.quantity in data:
        values = data[args.quantity]
    else:
        raise ConfigError(f"unknown quantity {args.quantity!r}; columns: {', '.join(data)}")
    try:
        t0, t1 = (float(x) for x in args.window.split(":"))
    except ValueError as err:
        raise ConfigError(f"window must look like t0:t1, got {args.window!r}") from err
    fit = fit_decay_exponent(data["t"], values, (t0, t1), args.quantity,
                             min_samples=args.min_samples)
    print(json.dumps({"quantity": fit.quantity, "window": list(fit.window),
                      "exponent": fit.exponent, "r_squared": fit.r_squared,
                      "n_samples": fit.n_samples}))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = load_config(args.config)
    g = cfg.grid()
    xi = np.geomspace(args.xi_min or g.dk, args.xi_max or g.kmax_dealiased, args.count)
    rows = spectrum_table(xi, cfg.physical_params())
    print("xi,re_fast,im_fast,re_slow,im_slow,heat_rate")
    for r in rows:
        print(",".join(format_value(v) for v in r))
    return EXIT_OK


def cmd_verify(args) -> int:
    keys = acceptance.FULL if args.full else acceptance.QUICK
    if args.only:
        keys = tuple(k.strip() for k in args.only.split(","))
        unknown = [k for k in keys if k not in acceptance.CHECKS]
        if unknown:
            raise ConfigError(f"unknown criteria {unknown}")
    results = []
    for k in keys:
        if k == "A5" and args.corrupt_cutoff:
            res = acceptance.check_A5(CutoffPair(distortion=args.corrupt_cutoff))
        else:
            res = acceptance.CHECKS[k]()
        print(res.line(), flush=True)
        results.append(res)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed")
    if args.report:
        payload = {"level": "full" if args.full else "quick",
                   "results": [{"key": r.key, "title": r.title, "passed": r.passed,
                                "detail": r.detail, "seconds": r.seconds,
                                "metrics": r.metrics} for r in results]}
        Path(args.report).write_text(json.dumps(payload, indent=2, default=float) + "\n",
                                     encoding="utf-8")
    return EXIT_ACCEPTANCE if n_fail else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mhd25", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a configured experiment")
    s.add_argument("config")
    s.add_argument("-o", "--output", help="override output.path")
    s.add_argument("-v", "--verbose", action="store_true", help="print records to stderr")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("oracle", help="exact linear evolution of the configured data")
    s.add_argument("config")
    s.add_argument("-o", "--output", help="override output.path")
    s.add_argument("-v", "--verbose", action="store_true")
    s.add_argument("--compare", action="store_true", help="also run nonlinear and report distances")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("decay-fit", help="fit a power law to a records CSV column")
    s.add_argument("csv")
    s.add_argument("--quantity", required=True, help="CSV column or l2_phi_u")
    s.add_argument("--window", required=True, help="t0:t1")
    s.add_argument("--min-samples", type=int, default=20)
    s.set_defaults(func=cmd_decay_fit)

    s = sub.add_parser("spectrum", help="linearized eigenvalue sweep")
    s.add_argument("config")
    s.add_argument("--xi-min", type=float)
    s.add_argument("--xi-max", type=float)
    s.add_argument("--count", type=int, default=25)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("verify", help="run the acceptance criteria")
    s.add_argument("--full", action="store_true", help="include the long runs (A2, A3, A6, A7)")
    s.add_argument("--only", help="comma-separated subset, e.g. A1,A5")
    s.add_argument("--corrupt-cutoff", type=float, default=0.0, metavar="EPS",
                   help="fault injection: distort the dyadic profile by relative EPS")
    s.add_argument("--report", help="write a JSON report to this path")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        _err(f"config error: {err}")
        return EXIT_CONFIG
    except OSError as err:
        _err(str(err))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
