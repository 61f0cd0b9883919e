"""Command-line surface tying the library together.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import TailRule
from .decompose import DecompositionConfig, decompose_with_se
from .dgp import DgpSpec, identification_ratio, simulate
from .estimator import BandwidthRule
from .exceptions import DataError, EstimationError
from .io_csv import CsvSchema, default_schema, load_csv, save_dataset_csv
from .montecarlo import (
    DEFAULT_ALPHAS,
    DEFAULT_RHOS,
    EstimatorConfig,
    TablePlan,
    rate_check,
    run_table,
)
from .numerics import QuadratureGrid, epanechnikov, kernel_l2, kernel_moment
from .nuisance import fit_nuisance

__all__ = ["cli_main", "main", "build_parser"]

_ESTIMATORS = ("snn", "ols", "heckman", "h90", "as98")


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _parse_bandwidth(text: str) -> BandwidthRule:
    if text == "plugin":
        return BandwidthRule.plug_in()
    if text.startswith("plugin:"):
        return BandwidthRule.plug_in(float(text.split(":", 1)[1]))
    if text.startswith("fixed:"):
        return BandwidthRule.fixed(float(text.split(":", 1)[1]))
    raise _UsageError(f"bad --bandwidth {text!r}; use fixed:H or plugin[:SCALE]")


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="snnselect", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json", "markdown"), default="csv")

    sp = sub.add_parser("simulate", help="draw one simulated sample to CSV")
    sp.add_argument("--dgp", choices=("dgp1", "dgp2"), default="dgp1")
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--rho", type=float, default=0.0)
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.add_argument("--theta0", type=float, default=1.0)
    add_common(sp)

    sp = sub.add_parser("mc-table", help="Monte Carlo grid over (rho, alpha)")
    sp.add_argument("--dgp", choices=("dgp1", "dgp2"), default="dgp1")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--rho", type=_float_list, default=list(DEFAULT_RHOS), metavar="R1,R2,...")
    sp.add_argument("--alpha", type=_float_list, default=list(DEFAULT_ALPHAS), metavar="A1,A2,...")
    sp.add_argument("--estimator", action="append", choices=_ESTIMATORS, default=None,
                    help="repeatable; default snn")
    sp.add_argument("--bandwidth", type=str, action="append", default=None,
                    help="for snn panels; repeatable; fixed:H or plugin[:SCALE]")
    sp.add_argument("--kernel-order", type=int, choices=(2, 4), default=2)
    sp.add_argument("--tail-quantile", type=float, default=0.95)
    sp.add_argument("--tau-quantile", type=float, default=0.5)
    sp.add_argument("--workers", type=int, default=1)
    add_common(sp)

    sp = sub.add_parser("rate-check", help="log-log RMSE slope under the rate-optimal schedule")
    sp.add_argument("--dgp", choices=("dgp1", "dgp2"), default="dgp1")
    sp.add_argument("--ns", type=_int_list, default=[200, 400, 800, 1600], metavar="N1,N2,...")
    sp.add_argument("--rho", type=float, default=0.5)
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.add_argument("--reps", type=int, default=400)
    sp.add_argument("--c", type=float, default=0.5, help="bandwidth constant c*n^(-1/(2p+1))")
    sp.add_argument("--estimator", choices=_ESTIMATORS, default="snn")
    sp.add_argument("--kernel-order", type=int, choices=(2, 4), default=2)
    sp.add_argument("--workers", type=int, default=1)
    add_common(sp)

    sp = sub.add_parser("estimate", help="intercept estimate on a CSV dataset")
    sp.add_argument("data", type=Path)
    sp.add_argument("--outcome-col", required=True)
    sp.add_argument("--selection-col", required=True)
    sp.add_argument("--x-cols", required=True, help="comma-separated")
    sp.add_argument("--z-cols", required=True, help="comma-separated")
    sp.add_argument("--estimator", choices=_ESTIMATORS, default="snn")
    sp.add_argument("--bandwidth", type=str, default="plugin")
    sp.add_argument("--kernel-order", type=int, choices=(2, 4), default=2)
    sp.add_argument("--tail-quantile", type=float, default=0.95)
    sp.add_argument("--tau-quantile", type=float, default=0.5)
    sp.add_argument("--nuisance", choices=("klein-spady", "probit"), default="klein-spady")
    add_common(sp)

    sp = sub.add_parser("decompose", help="two-group decomposition with bootstrap SEs")
    sp.add_argument("data", type=Path)
    sp.add_argument("--outcome-col", required=True)
    sp.add_argument("--selection-col", required=True)
    sp.add_argument("--x-cols", required=True)
    sp.add_argument("--z-cols", required=True)
    sp.add_argument("--group-col", required=True)
    sp.add_argument("--estimator", choices=_ESTIMATORS, default="snn")
    sp.add_argument("--bandwidth", type=str, default="plugin")
    sp.add_argument("--kernel-order", type=int, choices=(2, 4), default=2)
    sp.add_argument("--tail-quantile", type=float, default=0.95)
    sp.add_argument("--tau-quantile", type=float, default=0.5)
    sp.add_argument("--nuisance", choices=("klein-spady", "probit"), default="klein-spady")
    sp.add_argument("--weighting", choices=("group0", "group1"), default="group0")
    sp.add_argument("--bootstrap", type=int, default=200, metavar="B")
    add_common(sp)

    sp = sub.add_parser("kernel-check", help="kernel moment diagnostics")
    sp.add_argument("--kernel-order", type=int, choices=(2, 4), default=2)
    sp.add_argument("--nodes", type=int, default=401)
    add_common(sp)

    sp = sub.add_parser("ident-check", help="identification-ratio profile over q")
    sp.add_argument("--dgp", choices=("dgp1", "dgp2"), default="dgp1")
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.add_argument("--q-min", type=float, default=0.01)
    sp.add_argument("--q-max", type=float, default=0.999)
    sp.add_argument("--points", type=int, default=50)
    add_common(sp)

    return p


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _schema_from_args(args, group: bool = False) -> CsvSchema:
    return CsvSchema(
        outcome_column=args.outcome_col,
        selection_column=args.selection_col,
        x_columns=tuple(args.x_cols.split(",")),
        z_columns=tuple(args.z_cols.split(",")),
        group_column=args.group_col if group else None,
    )


def _cmd_simulate(args) -> int:
    spec = DgpSpec(args.dgp, args.n, rho=args.rho, alpha=args.alpha,
                   theta0=args.theta0, seed=args.seed)
    draw = simulate(spec)
    if args.out is None:
        raise _UsageError("simulate requires --out")
    save_dataset_csv(args.out, draw.dataset, default_schema(spec.k, spec.l))
    return 0


def _estimator_configs(args) -> list[EstimatorConfig]:
    methods = args.estimator or ["snn"]
    tail = TailRule(args.tail_quantile, args.tau_quantile)
    configs = []
    for method in methods:
        if method == "snn":
            bws = args.bandwidth or ["plugin"]
            for bw in bws:
                configs.append(EstimatorConfig(
                    method="snn",
                    kernel_order=args.kernel_order,
                    bandwidth=_parse_bandwidth(bw),
                    tail=tail,
                ))
        else:
            configs.append(EstimatorConfig(method=method, tail=tail))
    return configs


def _cmd_mc_table(args) -> int:
    plan = TablePlan(
        family=args.dgp,
        n=args.n,
        estimators=_estimator_configs(args),
        rhos=tuple(args.rho),
        alphas=tuple(args.alpha),
        reps=args.reps,
    )
    report = run_table(plan, base_seed=args.seed, workers=args.workers)
    if args.format == "json":
        _emit(report.to_json(), args.out)
    elif args.format == "markdown":
        _emit(report.to_markdown(), args.out)
    else:
        _emit(report.to_csv(), args.out)
    return 0


def _cmd_rate_check(args) -> int:
    config = EstimatorConfig(method=args.estimator, kernel_order=args.kernel_order)
    spec = DgpSpec(args.dgp, max(args.ns), rho=args.rho, alpha=args.alpha)
    result = rate_check(args.ns, spec, config, c=args.c, reps=args.reps,
                        base_seed=args.seed, workers=args.workers)
    payload = {
        "slope": result.slope,
        "ns": list(result.ns),
        "rmse": list(result.rmse),
    }
    if args.format == "json":
        _emit(json.dumps(payload, indent=2), args.out)
    else:
        lines = ["n,rmse"] + [f"{n},{r:.6g}" for n, r in zip(result.ns, result.rmse)]
        lines.append(f"# slope of log RMSE on log n: {result.slope:.4f}")
        _emit("\n".join(lines), args.out)
    return 0


def _cmd_estimate(args) -> int:
    schema = _schema_from_args(args)
    data = load_csv(args.data, schema)
    nuis = fit_nuisance(data, gamma_method=args.nuisance.replace("-", "_"))
    beta, gamma = nuis.beta, nuis.gamma
    config = EstimatorConfig(
        method=args.estimator,
        kernel_order=args.kernel_order,
        bandwidth=_parse_bandwidth(args.bandwidth),
        tail=TailRule(args.tail_quantile, args.tau_quantile),
    )
    from .baselines import as98_intercept, h90_intercept, heckman_two_step, ols_selected
    from .estimator import snn_intercept

    if args.estimator == "snn":
        est = snn_intercept(data, beta, gamma, epanechnikov(args.kernel_order), config.bandwidth)
        payload = {
            "theta": est.theta, "std_error": est.std_error,
            "bandwidth": est.bandwidth, "effective_n": est.effective_n, "method": est.method,
        }
    elif args.estimator == "ols":
        fit = ols_selected(data)
        payload = {"theta": fit.theta, "std_error": float(fit.std_errors[0]), "method": "ols"}
    elif args.estimator == "heckman":
        fit = heckman_two_step(data)
        payload = {"theta": fit.theta, "lambda_coef": fit.lambda_coef, "method": "heckman"}
    else:
        fn = h90_intercept if args.estimator == "h90" else as98_intercept
        est = fn(data, beta, gamma, config.tail)
        payload = {
            "theta": est.theta, "std_error": est.std_error,
            "effective_n": est.effective_n, "method": est.method,
        }
    if args.format == "json":
        _emit(json.dumps(payload, indent=2), args.out)
    else:
        _emit("\n".join(f"{k},{v}" for k, v in payload.items()), args.out)
    return 0


def _cmd_decompose(args) -> int:
    schema = _schema_from_args(args, group=True)
    data0, data1 = load_csv(args.data, schema)
    config = DecompositionConfig(
        intercept_method=args.estimator,
        kernel_order=args.kernel_order,
        bandwidth=_parse_bandwidth(args.bandwidth),
        tail=TailRule(args.tail_quantile, args.tau_quantile),
        weighting=args.weighting,
        nuisance=args.nuisance.replace("-", "_"),
    )
    report = decompose_with_se(data0, data1, config, n_boot=args.bootstrap, seed=args.seed)
    if args.format == "json":
        payload = dict(report.quantities())
        payload["bootstrap_se"] = dict(report.bootstrap_se or {})
        payload["n_boot"] = report.n_boot
        payload["boot_failed"] = report.boot_failed
        _emit(json.dumps(payload, indent=2), args.out)
    else:
        _emit(report.to_text(), args.out)
    return 0


def _cmd_kernel_check(args) -> int:
    kern = epanechnikov(args.kernel_order)
    grid = QuadratureGrid.simpson(args.nodes)
    moments = {f"moment_{j}": kernel_moment(kern, j, grid) for j in range(2 * kern.order + 1)}
    payload = {"family": kern.family, "order": kern.order, "l2": kernel_l2(kern, grid), **moments}
    if args.format == "json":
        _emit(json.dumps(payload, indent=2), args.out)
    else:
        lines = [
            f"{k},{v:.12g}" if isinstance(v, float) else f"{k},{v}"
            for k, v in payload.items()
        ]
        _emit("\n".join(lines), args.out)
    return 0


def _cmd_ident_check(args) -> int:
    qs = np.linspace(args.q_min, args.q_max, args.points)
    vals = [identification_ratio(args.dgp, args.alpha, float(q)) for q in qs]
    if args.format == "json":
        _emit(json.dumps({"q": qs.tolist(), "ratio": vals}, indent=2), args.out)
    else:
        lines = ["q,ratio"] + [f"{q:.6g},{v:.6g}" for q, v in zip(qs, vals)]
        _emit("\n".join(lines), args.out)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "mc-table": _cmd_mc_table,
    "rate-check": _cmd_rate_check,
    "estimate": _cmd_estimate,
    "decompose": _cmd_decompose,
    "kernel-check": _cmd_kernel_check,
    "ident-check": _cmd_ident_check,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1
    except (EstimationError,) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
