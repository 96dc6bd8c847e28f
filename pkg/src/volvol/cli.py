"""Command-line front end: ``volvol <subcommand> --config run.yaml``.

Subcommands and their CSV columns:

* ``price``     eps, price, stderr, n_paths, seed, n_steps
* ``expand``    eps, order, mode, price, stderr, base_price
* ``coeffs``    quantity, quadrature, mc, mc_stderr, zscore
* ``skew``      maturity, skew, fitted_exponent, prefactor, note
* ``converge``  order, eps, oracle, oracle_stderr, expansion, error, stderr, used, slope, status
* ``validate``  suite, check, passed, value, tolerance

Exit codes: 0 success (an inconclusive convergence study included), 1 a
validation check failed, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings

import numpy as np

from .coefficients import second_order_coeff_table, first_order_coeff_table
from .config import ConfigError, RunConfig, load_config
from .errors import ConfigurationError, DomainError, FactorizationError, UnsupportedOrderError
from .estimators import SkewTermStructure
from .expansion import convergence_study, expand_price
from .full_model import mc_price_sweep
from .kernels import PowerKernel
from .mc_engine import PathGrid, estimate_coefficients
from .rng import default_threads
from .validation import run_validation

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_MATURITIES = (0.1, 0.2, 0.5, 1.0, 2.0)
DEFAULT_EPS_GRID = (0.05, 0.1, 0.2, 0.3, 0.4)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(header, rows, out) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# ------------------------------------------------------------- subcommands
def _cmd_price(cfg: RunConfig, args):
    eps = args.eps if args.eps is not None else cfg.run.get("eps", [0.0])
    est = mc_price_sweep(cfg.model, eps, cfg.payoff, cfg.grid, cfg.mc.n_paths, cfg.mc.seed,
                         x0=cfg.run.get("log_spot", 0.0), antithetic=cfg.mc.antithetic,
                         control_variate="auto", chunk_size=cfg.mc.chunk_size,
                         threads=args.threads)
    rows = [(e, r.mean, r.stderr, r.n_paths, r.seed, cfg.grid.n_steps) for e, r in zip(eps, est)]
    return ["eps", "price", "stderr", "n_paths", "seed", "n_steps"], rows, EXIT_OK


def _cmd_expand(cfg: RunConfig, args):
    eps = args.eps if args.eps is not None else cfg.run.get("eps", [0.0])
    p = cfg.run.get("order", 2)
    mode = cfg.run.get("mode", "quadrature")
    res = expand_price(cfg.model, cfg.payoff, cfg.maturity, eps, p, mode=mode,
                       n_paths=cfg.mc.n_paths, seed=cfg.mc.seed, n_steps=cfg.grid.n_steps,
                       x0=cfg.run.get("log_spot", 0.0), antithetic=cfg.mc.antithetic,
                       threads=args.threads)
    rows = [(e, p, mode, res.prices[float(e)][0], res.prices[float(e)][1], res.base_price)
            for e in eps]
    return ["eps", "order", "mode", "price", "stderr", "base_price"], rows, EXIT_OK


def _cmd_coeffs(cfg: RunConfig, args):
    T = cfg.maturity
    t1 = first_order_coeff_table(cfg.model, T)
    t2 = second_order_coeff_table(cfg.model, T)
    quad = {"c_xu": t1.c_xu, "c_uu": t2.c_uu, "c_mu": t2.c_mu}
    weights = {(1, l): w for l, w in t1.f_weights.items()}
    weights.update({(2, l): w for l, w in t2.f_weights.items()})
    rows = [(name, val, "", "", "") for name, val in quad.items()]
    if cfg.run.get("check_mc", True):
        mc = estimate_coefficients(cfg.model, cfg.grid, 2, cfg.mc.n_paths, cfg.mc.seed,
                                   cfg.mc.antithetic, cfg.mc.chunk_size, args.threads)
        for (i, l), w in sorted(weights.items()):
            e = mc.combine({lab: 1.0 for lab in mc.labels if lab[0] == i and lab[2] == l})
            rows.append((f"f_weight_{i}_{l}", w, e.mean, e.stderr, e.zscore(w)))
    else:
        rows += [(f"f_weight_{i}_{l}", w, "", "", "") for (i, l), w in sorted(weights.items())]
    return ["quantity", "quadrature", "mc", "mc_stderr", "zscore"], rows, EXIT_OK


def _cmd_skew(cfg: RunConfig, args):
    T = cfg.run.get("maturities", list(DEFAULT_MATURITIES))
    est = SkewTermStructure(cfg.model, method=cfg.run.get("method", "quadrature")).fit(T)
    note = ""
    if isinstance(cfg.model.kernel, PowerKernel):
        # psi ~ T^(-gamma) and H = 1/2 - gamma
        note = f"H≈{0.5 + est.exponent_:.2g}"
    rows = [(t, s, est.exponent_, est.prefactor_, note) for t, s in zip(T, est.skew_)]
    return ["maturity", "skew", "fitted_exponent", "prefactor", "note"], rows, EXIT_OK


def _cmd_converge(cfg: RunConfig, args):
    eps = args.eps if args.eps is not None else cfg.run.get("eps", list(DEFAULT_EPS_GRID))
    orders = cfg.run.get("orders", [cfg.run.get("order", 1)])
    mode = cfg.run.get("mode", "quadrature")
    x0 = cfg.run.get("log_spot", 0.0)
    oracle = mc_price_sweep(cfg.model, eps, cfg.payoff, cfg.grid, cfg.mc.n_paths, cfg.mc.seed,
                            x0=x0, antithetic=cfg.mc.antithetic, control_variate="auto",
                            richardson=cfg.grid.n_steps % 2 == 0,
                            chunk_size=cfg.mc.chunk_size, threads=args.threads)
    expansion = expand_price(cfg.model, cfg.payoff, cfg.maturity, eps, max(orders), mode=mode,
                             n_paths=cfg.mc.n_paths, seed=cfg.mc.seed,
                             n_steps=cfg.grid.n_steps, x0=x0, threads=args.threads)
    rows = []
    for p in orders:
        st = convergence_study(cfg.model, cfg.payoff, cfg.maturity, eps, p, x0=x0,
                               expansion=expansion, oracle=oracle)
        for r in st.rows:
            rows.append((p, r["eps"], r["oracle"], r["oracle_stderr"], r["expansion"],
                         r["error"], r["stderr"], r["used"], st.slope, st.status))
    header = ["order", "eps", "oracle", "oracle_stderr", "expansion", "error", "stderr",
              "used", "slope", "status"]
    return header, rows, EXIT_OK


def _cmd_validate(cfg: RunConfig | None, args):
    n = args.paths or (cfg.mc.n_paths if cfg else 2 ** 15)
    seed = args.seed if args.seed is not None else (cfg.mc.seed if cfg else 0)
    suites = cfg.run.get("suites") if cfg else None
    checks = run_validation(suites, n_paths=n, seed=seed, threads=args.threads)
    rows = [(c.suite, c.name, bool(c.passed), float(c.value), float(c.tolerance)) for c in checks]
    failed = sum(not c.passed for c in checks)
    print(f"validate: {len(checks) - failed}/{len(checks)} checks passed", file=sys.stderr)
    return (["suite", "check", "passed", "value", "tolerance"], rows,
            EXIT_FAILED if failed else EXIT_OK)


COMMANDS = {"price": _cmd_price, "expand": _cmd_expand, "coeffs": _cmd_coeffs,
            "skew": _cmd_skew, "converge": _cmd_converge, "validate": _cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volvol",
        description="Vol-of-vol expansion pricing with Monte Carlo and quadrature cross-checks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
    common.add_argument("--threads", type=int, metavar="N",
                        help="worker threads (default: $VOLVOL_THREADS or all cores)")
    common.add_argument("--seed", type=int, metavar="S", help="override mc.seed")
    common.add_argument("--paths", type=int, metavar="N", help="override mc.n_paths")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {"price": "full-model Monte Carlo price", "expand": "expansion price",
             "coeffs": "quadrature coefficients with a Monte Carlo cross-check",
             "skew": "ATM skew term structure and power-law fit",
             "converge": "expansion error against the Monte Carlo oracle over eps",
             "validate": "run the invariant suite"}
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name in ("price", "expand", "converge"):
            p.add_argument("--eps", type=float, nargs="+", help="vol-of-vol value(s)")
    return parser


def _apply_overrides(cfg: RunConfig, args):
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be non-negative")
        cfg.mc.seed = args.seed
    if args.paths is not None:
        if args.paths < 2:
            raise ConfigError("--paths", "must be at least 2")
        if cfg.mc.antithetic and args.paths % 2:
            raise ConfigError("--paths", "must be even with antithetic sampling")
        cfg.mc.n_paths = args.paths


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads", "must be a positive integer")
        if args.threads is None:
            args.threads = default_threads()
        eps = getattr(args, "eps", None)
        if eps is not None and any(abs(e) > 1.0 for e in eps):
            raise ConfigError("--eps", "vol-of-vol must satisfy |eps| <= 1")
        cfg = None
        if args.config is not None:
            cfg = load_config(args.config)
            _apply_overrides(cfg, args)
        elif args.command != "validate":
            raise ConfigError("--config", f"required for '{args.command}'")
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            header, rows, code = COMMANDS[args.command](cfg, args)
        write_csv(header, rows, args.out)
        return code
    except (ConfigurationError, UnsupportedOrderError) as exc:
        print(f"volvol: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, FactorizationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"volvol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main(argv=None):
    sys.exit(run(argv))
