"""Deterministic, parallelizable Monte Carlo harness.

Replication seeds are derived by hashing (base seed, cell label, replication
index), so reports are bitwise identical regardless of how replications are
scheduled across workers.  The cell label deliberately excludes the
estimator: every estimator in a table panel sees the same draws, which makes
cross-estimator comparisons common-random-number comparisons.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .baselines import TailRule, as98_intercept, h90_intercept, heckman_two_step, ols_selected
from .dgp import DgpSpec, LatentDraw, simulate
from .estimator import BandwidthRule, snn_intercept, undersmoothing_bandwidth
from .exceptions import EstimationError
from .numerics import epanechnikov
from .nuisance import klein_spady_gamma, robinson_beta

__all__ = [
    "EstimatorConfig",
    "CellStats",
    "MonteCarloReport",
    "RateCheckResult",
    "derive_seed",
    "make_estimator",
    "run_cell",
    "run_table",
    "rate_check",
    "DEFAULT_RHOS",
    "DEFAULT_ALPHAS",
]

DEFAULT_RHOS = (0.0, 0.25, 0.50, 0.75, 0.95)
DEFAULT_ALPHAS = (2.00, 1.50, 1.25, 1.00)

_METHODS = ("snn", "ols", "heckman", "h90", "as98")


@dataclass(frozen=True)
class EstimatorConfig:
    """How to turn a simulated draw into one intercept estimate.

    ``use_true_nuisance`` pins beta and gamma to their generating values (the
    simulation design of record); switching it off runs the semiparametric
    nuisance chain first.  OLS and the two-step estimate their own nuisance
    parameters either way.
    """

    method: str = "snn"
    kernel_order: int = 2
    bandwidth: BandwidthRule = field(default_factory=BandwidthRule.plug_in)
    tail: TailRule = field(default_factory=TailRule)
    use_true_nuisance: bool = True

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValueError(f"unknown estimator {self.method!r}; valid: {_METHODS}")

    @property
    def label(self) -> str:
        if self.method == "snn":
            bw = (
                f"h={self.bandwidth.value:g}"
                if self.bandwidth.kind == "fixed"
                else f"plugin x{self.bandwidth.value:g}"
            )
            return f"snn ({bw})"
        if self.method in ("h90", "as98"):
            return f"{self.method} (b_n at {self.tail.quantile:g} quantile)"
        return self.method


@dataclass(frozen=True)
class CellStats:
    sq_bias: float
    sd: float
    rmse_scaled: float  # sqrt(n) * RMSE
    reps_ok: int
    reps_failed: int


@dataclass(frozen=True)
class MonteCarloReport:
    family: str
    n: int
    reps: int
    base_seed: int
    rhos: tuple
    alphas: tuple
    panels: Mapping[str, Mapping[tuple, CellStats]]  # label -> (rho, alpha) -> stats

    def to_json(self) -> str:
        payload = {
            "family": self.family,
            "n": self.n,
            "reps": self.reps,
            "base_seed": self.base_seed,
            "rhos": list(self.rhos),
            "alphas": list(self.alphas),
            "panels": {
                label: [
                    {
                        "rho": rho,
                        "alpha": alpha,
                        "sq_bias": st.sq_bias,
                        "sd": st.sd,
                        "rmse_scaled": st.rmse_scaled,
                        "reps_ok": st.reps_ok,
                        "reps_failed": st.reps_failed,
                    }
                    for (rho, alpha), st in cells.items()
                ]
                for label, cells in self.panels.items()
            },
        }
        return json.dumps(payload, indent=2)

    def to_csv(self) -> str:
        """One row per rho, per-alpha column triplets, one block per panel."""
        lines = [f"# family={self.family} n={self.n} reps={self.reps} seed={self.base_seed}"]
        header = ["rho"]
        for a in self.alphas:
            header += [f"sq_bias(a={a:g})", f"sd(a={a:g})", f"rmse_scaled(a={a:g})"]
        for label, cells in self.panels.items():
            lines.append(f"# panel: {label}")
            lines.append(",".join(header))
            for rho in self.rhos:
                row = [f"{rho:g}"]
                for a in self.alphas:
                    st = cells[(rho, a)]
                    if st.reps_ok == 0:
                        row += ["failed"] * 3
                    else:
                        row += [f"{st.sq_bias:.4f}", f"{st.sd:.4f}", f"{st.rmse_scaled:.4f}"]
                lines.append(",".join(row))
            fails = sum(st.reps_failed for st in cells.values())
            if fails:
                lines.append(f"# panel failures: {fails} replication(s) across cells")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        lines = [f"**{self.family}, n={self.n}, {self.reps} replications** (seed {self.base_seed})", ""]
        for label, cells in self.panels.items():
            lines.append(f"*{label}*")
            head = "| rho | " + " | ".join(
                f"a={a:g} sq bias | a={a:g} sd | a={a:g} rmse" for a in self.alphas
            ) + " |"
            lines.append(head)
            lines.append("|" + "---|" * (1 + 3 * len(self.alphas)))
            for rho in self.rhos:
                cellsrow = []
                for a in self.alphas:
                    st = cells[(rho, a)]
                    if st.reps_ok == 0:
                        cellsrow += ["failed"] * 3
                    else:
                        cellsrow += [f"{st.sq_bias:.4f}", f"{st.sd:.4f}", f"{st.rmse_scaled:.4f}"]
                lines.append("| " + f"{rho:g} | " + " | ".join(cellsrow) + " |")
            lines.append("")
        return "\n".join(lines)


def derive_seed(base_seed: int, label: str, rep: int) -> int:
    """64-bit replication seed from a SHA-256 mix; never sequential reuse."""
    digest = hashlib.sha256(f"{base_seed}|{label}|{rep}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _cell_label(spec: DgpSpec) -> str:
    return f"{spec.family}:n={spec.n}:rho={spec.rho:.6g}:alpha={spec.alpha:.6g}"


def make_estimator(config: EstimatorConfig) -> Callable[[LatentDraw], float]:
    """Bind an EstimatorConfig into a draw -> estimate callable."""

    def run(draw: LatentDraw) -> float:
        data = draw.dataset
        if config.use_true_nuisance:
            beta, gamma = draw.beta0, draw.gamma0
        else:
            gamma = klein_spady_gamma(data)
            beta = robinson_beta(data, gamma)
        if config.method == "snn":
            kern = epanechnikov(config.kernel_order)
            return snn_intercept(data, beta, gamma, kern, config.bandwidth).theta
        if config.method == "ols":
            return ols_selected(data).theta
        if config.method == "heckman":
            return heckman_two_step(data).theta
        if config.method == "h90":
            return h90_intercept(data, beta, gamma, config.tail).theta
        return as98_intercept(data, beta, gamma, config.tail).theta

    return run


def _replicate(spec: DgpSpec, estimator, label: str, base_seed: int, rep: int):
    draw = simulate(spec.with_seed(derive_seed(base_seed, label, rep)))
    try:
        return rep, float(estimator(draw)), True
    except EstimationError:
        return rep, math.nan, False


def _run_batch(args):
    spec, config, label, base_seed, reps_slice = args
    estimator = make_estimator(config) if isinstance(config, EstimatorConfig) else config
    return [_replicate(spec, estimator, label, base_seed, r) for r in reps_slice]


def _collect(results, theta0: float, n: int, reps: int) -> CellStats:
    results = sorted(results, key=lambda t: t[0])
    vals = np.array([v for _, v, ok in results if ok], dtype=float)
    failed = sum(1 for _, _, ok in results if not ok)
    if vals.size == 0:
        return CellStats(math.nan, math.nan, math.nan, 0, failed)
    mean = float(vals.mean())
    sq_bias = (mean - theta0) ** 2
    sd = float(np.sqrt(np.mean((vals - mean) ** 2)))
    rmse_scaled = math.sqrt(n) * math.sqrt(sq_bias + sd * sd)
    return CellStats(sq_bias, sd, rmse_scaled, int(vals.size), failed)


def run_cell(
    spec: DgpSpec,
    estimator: EstimatorConfig | Callable[[LatentDraw], float],
    reps: int,
    base_seed: int,
    workers: int = 1,
    executor: ProcessPoolExecutor | None = None,
) -> CellStats:
    """Monte Carlo statistics of one estimator on one (rho, alpha) cell.

    Failures (EstimationError) are counted, not propagated; the aggregation
    order is fixed by replication index, so results do not depend on worker
    scheduling.
    """
    if reps < 2:
        raise ValueError("need at least 2 replications")
    label = _cell_label(spec)
    if executor is None and workers > 1 and isinstance(estimator, EstimatorConfig):
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return run_cell(spec, estimator, reps, base_seed, workers, pool)
    if executor is not None and isinstance(estimator, EstimatorConfig):
        chunks = np.array_split(np.arange(reps), max(workers, 1) * 4)
        tasks = [(spec, estimator, label, base_seed, list(c)) for c in chunks if len(c)]
        results = [item for batch in executor.map(_run_batch, tasks) for item in batch]
    else:
        fn = make_estimator(estimator) if isinstance(estimator, EstimatorConfig) else estimator
        results = [_replicate(spec, fn, label, base_seed, r) for r in range(reps)]
    return _collect(results, spec.theta0, spec.n, reps)


@dataclass(frozen=True)
class TablePlan:
    family: str
    n: int
    estimators: Sequence[EstimatorConfig]
    rhos: Sequence[float] = DEFAULT_RHOS
    alphas: Sequence[float] = DEFAULT_ALPHAS
    reps: int = 1000

    def __post_init__(self) -> None:
        if not self.estimators or not self.rhos or not self.alphas:
            raise ValueError("table plan must be nonempty")


def run_table(plan: TablePlan, base_seed: int, workers: int = 1) -> MonteCarloReport:
    """Compute every cell of the plan; deterministic for fixed base_seed."""
    panels: dict = {}
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for config in plan.estimators:
            cells = {}
            for rho in plan.rhos:
                for alpha in plan.alphas:
                    spec = DgpSpec(plan.family, plan.n, rho=rho, alpha=alpha)
                    cells[(rho, alpha)] = run_cell(
                        spec, config, plan.reps, base_seed, workers, pool
                    )
            panels[config.label] = cells
    finally:
        if pool is not None:
            pool.shutdown()
    return MonteCarloReport(
        family=plan.family,
        n=plan.n,
        reps=plan.reps,
        base_seed=base_seed,
        rhos=tuple(plan.rhos),
        alphas=tuple(plan.alphas),
        panels=panels,
    )


@dataclass(frozen=True)
class RateCheckResult:
    slope: float
    ns: tuple
    rmse: tuple
    cells: tuple  # CellStats per n


def rate_check(
    ns: Sequence[int],
    spec_template: DgpSpec,
    estimator: EstimatorConfig | Callable[[LatentDraw], float],
    c: float = 0.5,
    reps: int = 400,
    base_seed: int = 0,
    workers: int = 1,
) -> RateCheckResult:
    """Least-squares slope of log RMSE on log n under the rate-optimal
    bandwidth schedule h_n = c * n^(-1/(2p+1)).

    For the locally linear estimator the bandwidth is re-derived at each n;
    callables are used as-is (they encode their own tuning).
    """
    ns = sorted(int(n) for n in ns)
    if len(ns) < 3:
        raise ValueError("need at least 3 sample sizes")
    rmses = []
    cells = []
    for n in ns:
        spec = replace(spec_template, n=n)
        est = estimator
        if isinstance(estimator, EstimatorConfig) and estimator.method == "snn":
            h = undersmoothing_bandwidth(n, estimator.kernel_order, c)
            est = replace(estimator, bandwidth=BandwidthRule.fixed(h))
        stats = run_cell(spec, est, reps, base_seed, workers)
        if stats.reps_ok == 0:
            raise EstimationError(f"rate check cell n={n} failed entirely")
        rmse = math.sqrt(stats.sq_bias + stats.sd**2)
        rmses.append(rmse)
        cells.append(stats)
    logn = np.log(np.asarray(ns, dtype=float))
    logr = np.log(np.asarray(rmses, dtype=float))
    A = np.column_stack([np.ones(len(ns)), logn])
    coef, *_ = np.linalg.lstsq(A, logr, rcond=None)
    return RateCheckResult(slope=float(coef[1]), ns=tuple(ns), rmse=tuple(rmses), cells=tuple(cells))
