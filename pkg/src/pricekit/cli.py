"""Command-line front end.

Every command writes a JSON report embedding a run manifest (input digests,
seed, config echo, version, timings). Exit codes: 0 ok, 2 bad input,
3 numerical failure. Reports are byte-reproducible for fixed seeds apart
from the manifest's timing fields.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (Bounds, DEFAULT_BATES_BOUNDS, DEFAULT_HESTON_BOUNDS,
                          OptimizerConfig, PricerChoice, calibrate_bates_sequential,
                          calibrate_heston)
from .errors import (IntegrationDiverged, NoFiniteObjective, NonFiniteGrid,
                     NonFiniteResult, PricekitError)
from .fourier_pricing import IntegrationConfig, carr_madan_price, \
    european_call_fourier, european_put_fourier
from .market_data import MarketContext, OptionKind, load_option_chain
from .models import BatesParams, HestonParams, JumpParams, cf_handle
from .montecarlo import FeeSchedule, McEstimate, PathConfig, asian_price, \
    convergence_scan, mc_report
from .rates_cir import CirParams, calibrate_cir, discount_stats, load_rate_curve, \
    simulate_cir_euler

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _manifest(command: str, inputs: dict, seed, config: dict, elapsed: float) -> dict:
    return {
        "command": command,
        "inputs": {str(p): _sha256(p) for p in inputs.values() if p is not None},
        "seed": seed,
        "config": config,
        "version": __version__,
        "timings": {"wall_seconds": elapsed},
    }


def _emit(report: dict, out_path) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _heston_dict(p: HestonParams) -> dict:
    return {"kappa": p.kappa, "theta": p.theta, "sigma": p.sigma,
            "rho": p.rho, "v0": p.v0, "feller_margin": p.feller_margin()}


def _params_from_json(path):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    heston = HestonParams(kappa=data["kappa"], theta=data["theta"], sigma=data["sigma"],
                          rho=data["rho"], v0=data["v0"])
    if any(k in data for k in ("lambda", "mu_j", "sigma_j")):
        jumps = JumpParams(intensity=data.get("lambda", 0.0),
                           mean_log_jump=data.get("mu_j", 0.0),
                           vol_log_jump=data.get("sigma_j", 0.0))
        return BatesParams(heston, jumps)
    return heston


def _cir_params_from_json(path) -> CirParams:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return CirParams(kappa=data["kappa"], theta=data["theta"],
                     sigma=data["sigma"], r0=data["r0"])


def _opt_config(args) -> OptimizerConfig:
    return OptimizerConfig(de_generations=args.de_generations, de_seed=args.seed,
                           de_stagnation=args.de_stagnation)


def _cmd_calibrate_equity(args, bates: bool) -> int:
    started = time.perf_counter()
    ctx = MarketContext(spot=args.spot, risk_free_rate=args.rate,
                        trading_days_per_year=args.days_per_year)
    quotes = load_option_chain(args.chain, ctx)
    if args.maturity_days:
        quotes = quotes.filter_maturity(args.maturity_days)
    cfg = _opt_config(args)
    choice = PricerChoice(args.method)
    calibrate = calibrate_bates_sequential if bates else calibrate_heston

    result = calibrate(quotes, choice, cfg)
    if bates:
        params = {**_heston_dict(result.params.heston),
                  "lambda": result.params.jumps.intensity,
                  "mu_j": result.params.jumps.mean_log_jump,
                  "sigma_j": result.params.jumps.vol_log_jump}
    else:
        params = _heston_dict(result.params)
    report = {
        "params": params,
        "mse": result.mse,
        "mae": result.mae,
        "n_quotes": result.n_quotes,
        "objective_evals": result.objective_evals,
        "residuals": result.residuals,
        "stage_log": result.stage_log,
        "method": choice.value,
    }

    if args.compare:
        other_choice = PricerChoice.CARR_MADAN_FFT if choice is PricerChoice.LEWIS_INTEGRAL \
            else PricerChoice.LEWIS_INTEGRAL
        other = calibrate(quotes, other_choice, cfg)
        a = result.params.as_array() if not bates else result.params.as_array()
        b = other.params.as_array()
        names = ["kappa", "theta", "sigma", "rho", "v0"] + \
            (["lambda", "mu_j", "sigma_j"] if bates else [])
        report["comparison"] = {
            "other_method": other_choice.value,
            "other_mse": other.mse,
            "per_parameter": [
                {"name": n, "this": float(x), "other": float(y),
                 "rel_diff": float(abs(x - y) / max(abs(x), abs(y), 1e-12))}
                for n, x, y in zip(names, a, b)
            ],
        }

    report["manifest"] = _manifest(
        "calibrate-bates" if bates else "calibrate-heston",
        {"chain": args.chain}, args.seed,
        {"spot": args.spot, "rate": args.rate, "method": args.method,
         "days_per_year": args.days_per_year,
         "maturity_days": args.maturity_days,
         "de_generations": args.de_generations},
        time.perf_counter() - started)
    _emit(report, args.out)
    return EXIT_OK


def _cmd_calibrate_cir(args) -> int:
    started = time.perf_counter()
    curve = load_rate_curve(args.curve, compounding=args.compounding)
    cfg = OptimizerConfig(de_generations=args.de_generations, de_seed=args.seed,
                          de_stagnation=args.de_stagnation)
    result = calibrate_cir(curve, cfg, theta_cap=args.theta_cap)
    p = result.params
    report = {
        "params": {"kappa": p.kappa, "theta": p.theta, "sigma": p.sigma, "r0": p.r0,
                   "feller_margin": p.feller_margin(),
                   "feller_satisfied": p.feller_satisfied(),
                   "half_life_years": p.half_life()},
        "mse": result.mse,
        "mae": result.mae,
        "fit": result.stage_log[0],
        "n_points": result.n_quotes,
        "residuals": result.residuals,
        "manifest": _manifest("calibrate-cir", {"curve": args.curve}, args.seed,
                              {"theta_cap": args.theta_cap,
                               "compounding": args.compounding,
                               "de_generations": args.de_generations},
                              time.perf_counter() - started),
    }
    _emit(report, args.out)
    return EXIT_OK


def _cmd_price_european(args) -> int:
    started = time.perf_counter()
    params = _params_from_json(args.params)
    ctx = MarketContext(spot=args.spot, risk_free_rate=args.rate,
                        trading_days_per_year=args.days_per_year)
    t = args.maturity_days / args.days_per_year
    strike = args.strike if args.strike is not None else args.moneyness * args.spot
    cf = cf_handle(params, ctx)
    cfg = IntegrationConfig(umax=args.umax)
    kind = OptionKind.CALL if args.kind == "call" else OptionKind.PUT
    if args.method == "fft":
        if kind is OptionKind.PUT:
            call = carr_madan_price(cf, ctx.spot, strike, ctx.risk_free_rate, t)
            price = call - ctx.spot + strike * np.exp(-ctx.risk_free_rate * t)
        else:
            price = carr_madan_price(cf, ctx.spot, strike, ctx.risk_free_rate, t)
    elif kind is OptionKind.CALL:
        price = european_call_fourier(cf, ctx.spot, strike, ctx.risk_free_rate, t, cfg)
    else:
        price = european_put_fourier(cf, ctx.spot, strike, ctx.risk_free_rate, t, cfg)
    report = {
        "kind": args.kind,
        "strike": strike,
        "maturity_days": args.maturity_days,
        "price": float(price),
        "method": args.method,
        "manifest": _manifest("price-european", {"params": args.params}, args.seed,
                              {"spot": args.spot, "rate": args.rate, "umax": args.umax,
                               "method": args.method},
                              time.perf_counter() - started),
    }
    _emit(report, args.out)
    return EXIT_OK


def _payoff_histogram(kind: OptionKind, params, ctx, strike, t, cfg, n_bins=50) -> dict:
    from .montecarlo import _asian_payoffs, simulate_equity_paths
    paths = simulate_equity_paths(params, ctx, t, cfg)
    payoffs = _asian_payoffs(kind, paths, strike)
    counts, edges = np.histogram(payoffs, bins=n_bins)
    return {"bin_edges": [float(e) for e in edges],
            "counts": [int(c) for c in counts]}


def _cmd_price_asian(args) -> int:
    started = time.perf_counter()
    params = _params_from_json(args.params)
    ctx = MarketContext(spot=args.spot, risk_free_rate=args.rate,
                        trading_days_per_year=args.days_per_year)
    t = args.maturity_days / args.days_per_year
    strike = args.strike if args.strike is not None else args.moneyness * args.spot
    kind = OptionKind.CALL if args.kind == "call" else OptionKind.PUT
    steps = args.steps if args.steps is not None else args.maturity_days
    cfg = PathConfig(n_paths=args.paths, n_steps=steps, seed=args.seed)
    fees = FeeSchedule(fee_fraction=args.fee)
    estimate, client = asian_price(kind, params, ctx, strike, t, cfg, fees)
    report = {
        "kind": args.kind,
        "strike": strike,
        "maturity_days": args.maturity_days,
        "n_steps": steps,
        **mc_report(estimate, fees),
        "payoff_histogram": _payoff_histogram(kind, params, ctx, strike, t, cfg),
    }
    if args.scan:
        counts = sorted(set(min(c, args.paths) for c in (25_000, 50_000, 100_000, 175_000))
                        | {args.paths})
        scan = convergence_scan(kind, params, ctx, strike, t, counts, cfg)
        report["convergence_scan"] = [
            {"n_paths": n, "fair_price": e.fair_price, "std_error": e.std_error,
             "ci_low": e.ci_low, "ci_high": e.ci_high}
            for n, e in scan
        ]
    report["manifest"] = _manifest(
        "price-asian", {"params": args.params}, args.seed,
        {"spot": args.spot, "rate": args.rate, "paths": args.paths, "steps": steps,
         "fee": args.fee, "scan": bool(args.scan)},
        time.perf_counter() - started)
    _emit(report, args.out)
    return EXIT_OK


def _cmd_simulate_rates(args) -> int:
    started = time.perf_counter()
    params = _cir_params_from_json(args.params)
    horizon = args.horizon_days / 250.0
    cfg = PathConfig(n_paths=args.paths, n_steps=args.horizon_days, seed=args.seed)
    paths = simulate_cir_euler(params, horizon, cfg)
    flat_rate = args.flat_rate if args.flat_rate is not None else params.r0
    stats = discount_stats(paths, horizon, flat_rate)
    if args.terminal_csv:
        terminal = np.maximum(paths[:, -1], 0.0)
        with Path(args.terminal_csv).open("w", encoding="utf-8") as fh:
            fh.write("terminal_rate\n")
            fh.writelines(f"{r!r}\n" for r in terminal)
    report = {
        "params": {"kappa": params.kappa, "theta": params.theta,
                   "sigma": params.sigma, "r0": params.r0,
                   "half_life_years": params.half_life(),
                   "feller_satisfied": params.feller_satisfied()},
        "horizon_years": horizon,
        "terminal_rate": {"mean": stats.mean, "median": stats.median,
                          "p05": stats.p05, "p95": stats.p95},
        "discounting": {"mean_df": stats.mean_df, "flat_df": stats.flat_df,
                        "relative_gap": stats.df_gap},
        "manifest": _manifest("simulate-rates", {"params": args.params}, args.seed,
                              {"paths": args.paths, "horizon_days": args.horizon_days,
                               "flat_rate": flat_rate},
                              time.perf_counter() - started),
    }
    _emit(report, args.out)
    return EXIT_OK


def _write_csv(path, header, rows) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def _cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for source in args.inputs:
        data = json.loads(Path(source).read_text(encoding="utf-8"))
        if "residuals" in data and data["residuals"] and "strike" in data["residuals"][0]:
            _write_csv(out_dir / "market_vs_model.csv",
                       ["strike", "maturity_days", "market", "model", "error"],
                       [(r["strike"], r["maturity_days"], r["market"], r["model"], r["error"])
                        for r in data["residuals"]])
            written.append("market_vs_model.csv")
        if "residuals" in data and data["residuals"] and "tenor" in data["residuals"][0]:
            _write_csv(out_dir / "curve_fit.csv",
                       ["tenor", "market_df", "model_df", "rate_error_bp"],
                       [(r["tenor"], r["market_df"], r["model_df"], r["rate_error_bp"])
                        for r in data["residuals"]])
            written.append("curve_fit.csv")
        if "convergence_scan" in data:
            _write_csv(out_dir / "convergence.csv",
                       ["n_paths", "fair_price", "std_error", "ci_low", "ci_high"],
                       [(r["n_paths"], r["fair_price"], r["std_error"], r["ci_low"], r["ci_high"])
                        for r in data["convergence_scan"]])
            written.append("convergence.csv")
        if "payoff_histogram" in data:
            hist = data["payoff_histogram"]
            _write_csv(out_dir / "payoff_histogram.csv",
                       ["bin_low", "bin_high", "count"],
                       [(lo, hi, c) for lo, hi, c in
                        zip(hist["bin_edges"][:-1], hist["bin_edges"][1:], hist["counts"])])
            written.append("payoff_histogram.csv")
        if "fee_amount" in data:
            _write_csv(out_dir / "fee_decomposition.csv",
                       ["fair_price", "fee_amount", "client_price", "fee_share_of_client"],
                       [(data["fair_price"], data["fee_amount"], data["client_price"],
                         data["fee_share_of_client"])])
            written.append("fee_decomposition.csv")
        if "terminal_rate" in data:
            _write_csv(out_dir / "rate_distribution.csv",
                       ["mean", "median", "p05", "p95", "mean_df", "flat_df", "relative_gap"],
                       [(data["terminal_rate"]["mean"], data["terminal_rate"]["median"],
                         data["terminal_rate"]["p05"], data["terminal_rate"]["p95"],
                         data["discounting"]["mean_df"], data["discounting"]["flat_df"],
                         data["discounting"]["relative_gap"])])
            written.append("rate_distribution.csv")
    if not written:
        print("no reportable blocks found in the given inputs", file=sys.stderr)
        return EXIT_INPUT
    print("\n".join(written))
    return EXIT_OK


def _cmd_verify(args) -> int:
    data = json.loads(Path(args.report).read_text(encoding="utf-8"))
    manifest = data.get("manifest")
    if manifest is None:
        print("report carries no manifest", file=sys.stderr)
        return EXIT_INPUT
    ok = True
    for path, digest in manifest.get("inputs", {}).items():
        if not Path(path).exists():
            print(f"MISSING {path}")
            ok = False
        elif _sha256(path) != digest:
            print(f"MISMATCH {path}")
            ok = False
        else:
            print(f"OK {path}")
    return EXIT_OK if ok else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pricekit",
                                     description="Option pricing and rate-model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1,
                       help="accepted for interface compatibility; results never depend on it")
        p.add_argument("--out", default=None, help="output JSON path (default: stdout)")

    def market(p):
        p.add_argument("--spot", type=float, required=True)
        p.add_argument("--rate", type=float, required=True)
        p.add_argument("--days-per-year", type=int, default=250)

    def optimizer(p):
        p.add_argument("--de-generations", type=int, default=300)
        p.add_argument("--de-stagnation", type=int, default=50)

    for name in ("calibrate-heston", "calibrate-bates"):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} calibration on an option chain")
        p.add_argument("--chain", required=True)
        market(p)
        p.add_argument("--method", choices=["lewis", "fft"], default="lewis")
        p.add_argument("--maturity-days", type=int, nargs="*", default=None,
                       help="restrict calibration to these maturities")
        p.add_argument("--compare", action="store_true",
                       help="also calibrate with the other method and report differences")
        optimizer(p)
        common(p)

    p = sub.add_parser("calibrate-cir", help="fit CIR to a rate curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--theta-cap", type=float, default=0.05)
    p.add_argument("--compounding", choices=["cont", "simple"], default="cont")
    optimizer(p)
    common(p)

    p = sub.add_parser("price-european", help="Fourier price of a European option")
    p.add_argument("--params", required=True, help="model parameters JSON")
    p.add_argument("--kind", choices=["call", "put"], required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--strike", type=float)
    group.add_argument("--moneyness", type=float)
    p.add_argument("--maturity-days", type=int, required=True)
    p.add_argument("--method", choices=["lewis", "fft"], default="lewis")
    p.add_argument("--umax", type=float, default=200.0)
    market(p)
    common(p)

    p = sub.add_parser("price-asian", help="Monte Carlo price of an arithmetic Asian option")
    p.add_argument("--params", required=True)
    p.add_argument("--kind", choices=["call", "put"], required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--strike", type=float)
    group.add_argument("--moneyness", type=float)
    p.add_argument("--maturity-days", type=int, required=True)
    p.add_argument("--paths", type=int, default=175_000)
    p.add_argument("--steps", type=int, default=None,
                   help="default: one step per trading day of maturity")
    p.add_argument("--fee", type=float, default=0.04)
    p.add_argument("--scan", action="store_true", help="emit a convergence table")
    market(p)
    common(p)

    p = sub.add_parser("simulate-rates", help="CIR short-rate scenario simulation")
    p.add_argument("--params", required=True, help="CIR parameters JSON")
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--horizon-days", type=int, default=250)
    p.add_argument("--flat-rate", type=float, default=None,
                   help="benchmark flat rate (default: r0)")
    p.add_argument("--terminal-csv", default=None,
                   help="optionally write per-path terminal rates")
    common(p)

    p = sub.add_parser("report", help="emit plot-ready CSV tables from prior run JSONs")
    p.add_argument("inputs", nargs="+", help="JSON reports from other commands")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("verify", help="recompute input digests recorded in a report")
    p.add_argument("--report", required=True)

    return parser


_DISPATCH = {
    "calibrate-heston": lambda a: _cmd_calibrate_equity(a, bates=False),
    "calibrate-bates": lambda a: _cmd_calibrate_equity(a, bates=True),
    "calibrate-cir": _cmd_calibrate_cir,
    "price-european": _cmd_price_european,
    "price-asian": _cmd_price_asian,
    "simulate-rates": _cmd_simulate_rates,
    "report": _cmd_report,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (NoFiniteObjective, NonFiniteResult, IntegrationDiverged, NonFiniteGrid,
            ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError, ValueError, KeyError, PricekitError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
