"""Two-group outcome-gap decomposition with bootstrap standard errors.

The observed gap in mean outcomes between two groups (over selected
observations) splits into a wage-structure part A, an endowment part B, and
a selection residual C = gap - A - B.  A + B is the selection-corrected gap;
the difference in intercepts is the discrimination measure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .baselines import TailRule, as98_intercept, h90_intercept, heckman_two_step, ols_selected
from .data import Dataset
from .estimator import BandwidthRule, snn_intercept
from .exceptions import EstimationError
from .montecarlo import derive_seed
from .numerics import epanechnikov
from .nuisance import klein_spady_gamma, probit_gamma, robinson_beta

__all__ = [
    "DecompositionConfig",
    "DecompositionReport",
    "BootstrapSummary",
    "decompose",
    "bootstrap_se",
    "decompose_with_se",
]

@dataclass(frozen=True)
class DecompositionConfig:
    """Pipeline settings for one decomposition run.

    One nuisance fit per group is shared by all semiparametric intercept
    methods; OLS and the two-step carry their own slope estimates.  The
    ``intercept_fn`` hook (data, beta, gamma) -> theta substitutes a custom
    intercept estimator, mainly for testing.
    """

    intercept_method: str = "snn"
    kernel_order: int = 2
    bandwidth: BandwidthRule = field(default_factory=BandwidthRule.plug_in)
    tail: TailRule = field(default_factory=TailRule)
    weighting: str = "group0"
    nuisance: str = "klein_spady"
    ks_bandwidth: float | None = None
    robinson_bandwidth: float | None = None
    intercept_fn: Callable[[Dataset, np.ndarray, np.ndarray], float] | None = None

    def __post_init__(self) -> None:
        if self.weighting not in ("group0", "group1"):
            raise ValueError("weighting must be 'group0' or 'group1'")
        if self.nuisance not in ("klein_spady", "probit", "none"):
            raise ValueError("nuisance must be 'klein_spady', 'probit' or 'none'")
        if self.intercept_method not in ("snn", "ols", "heckman", "h90", "as98"):
            raise ValueError(f"unknown intercept method {self.intercept_method!r}")


@dataclass(frozen=True)
class DecompositionReport:
    gap_overall: float
    component_A: float
    component_B: float
    component_C: float
    gap_selection_corrected: float
    theta_by_group: tuple
    intercept_difference: float
    beta_by_group: tuple
    weighting: str
    bootstrap_se: Mapping[str, float] | None = None
    n_boot: int = 0
    boot_failed: int = 0

    def quantities(self) -> dict:
        return {
            "gap_overall": self.gap_overall,
            "component_A": self.component_A,
            "component_B": self.component_B,
            "component_C": self.component_C,
            "gap_selection_corrected": self.gap_selection_corrected,
            "theta_group0": self.theta_by_group[0],
            "theta_group1": self.theta_by_group[1],
            "intercept_difference": self.intercept_difference,
        }

    def to_text(self) -> str:
        se = self.bootstrap_se or {}

        def fmt(name: str, value: float) -> str:
            line = f"{name:<28s} {value:10.4f}"
            if name_to_key[name] in se:
                line += f"   ({se[name_to_key[name]]:.4f})"
            return line

        name_to_key = {
            "Gap (overall)": "gap_overall",
            "Wage structure (A)": "component_A",
            "Endowments (B)": "component_B",
            "Selection (C, residual)": "component_C",
            "Gap (selection-corrected)": "gap_selection_corrected",
            "Intercept, group 0": "theta_group0",
            "Intercept, group 1": "theta_group1",
            "Difference in intercepts": "intercept_difference",
        }
        rows = [fmt(n, v) for n, v in zip(
            name_to_key,
            [
                self.gap_overall,
                self.component_A,
                self.component_B,
                self.component_C,
                self.gap_selection_corrected,
                self.theta_by_group[0],
                self.theta_by_group[1],
                self.intercept_difference,
            ],
        )]
        head = f"Decomposition ({self.weighting} weighting)"
        if self.n_boot:
            head += f"; bootstrap SEs in parentheses, B={self.n_boot}, failed={self.boot_failed}"
        return "\n".join([head, "-" * len(head), *rows])


def _fit_group(data: Dataset, config: DecompositionConfig, tag: str):
    try:
        if config.nuisance == "none":
            # degenerate pipeline for diagnostics: no slope adjustment
            gamma = np.zeros(data.l)
            gamma[0] = 1.0
            beta = np.zeros(data.k)
        elif config.nuisance == "probit":
            gamma = probit_gamma(data)
            beta = robinson_beta(data, gamma, config.robinson_bandwidth)
        else:
            gamma = klein_spady_gamma(data, config.ks_bandwidth)
            beta = robinson_beta(data, gamma, config.robinson_bandwidth)
        if config.intercept_fn is not None:
            theta = float(config.intercept_fn(data, beta, gamma))
        elif config.intercept_method == "snn":
            theta = snn_intercept(
                data, beta, gamma, epanechnikov(config.kernel_order), config.bandwidth
            ).theta
        elif config.intercept_method == "h90":
            theta = h90_intercept(data, beta, gamma, config.tail).theta
        elif config.intercept_method == "as98":
            theta = as98_intercept(data, beta, gamma, config.tail).theta
        elif config.intercept_method == "ols":
            fit = ols_selected(data)
            theta, beta = fit.theta, fit.beta
        else:
            fit = heckman_two_step(data)
            theta, beta = fit.theta, fit.beta
    except EstimationError as exc:
        raise EstimationError(f"{tag}: {exc}") from exc
    sel = data.selected()
    if not np.any(sel):
        raise EstimationError(f"{tag}: insufficient selected observations")
    ybar = float(data.y[sel].mean())
    xbar = data.X[sel].mean(axis=0)
    return theta, np.asarray(beta, dtype=float), ybar, xbar


def decompose(data0: Dataset, data1: Dataset, config: DecompositionConfig | None = None) -> DecompositionReport:
    """Full two-group decomposition with the configured pipeline."""
    config = config or DecompositionConfig()
    th0, b0, ybar0, xbar0 = _fit_group(data0, config, "group0")
    th1, b1, ybar1, xbar1 = _fit_group(data1, config, "group1")
    gap = ybar1 - ybar0
    if config.weighting == "group0":
        A = (th1 - th0) + float(xbar0 @ (b1 - b0))
        B = float((xbar1 - xbar0) @ b1)
    else:
        A = (th1 - th0) + float(xbar1 @ (b1 - b0))
        B = float((xbar1 - xbar0) @ b0)
    C = gap - A - B
    return DecompositionReport(
        gap_overall=gap,
        component_A=A,
        component_B=B,
        component_C=C,
        gap_selection_corrected=A + B,
        theta_by_group=(th0, th1),
        intercept_difference=th1 - th0,
        beta_by_group=(b0, b1),
        weighting=config.weighting,
    )


@dataclass(frozen=True)
class BootstrapSummary:
    ses: Mapping[str, float]
    n_ok: int
    n_failed: int


def _resample(data: Dataset, seed: int) -> Dataset:
    g = np.random.Generator(np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    rows = g.integers(0, data.n, size=data.n)
    return data.take(rows)


def bootstrap_se(
    data0: Dataset,
    data1: Dataset,
    config: DecompositionConfig | None = None,
    n_boot: int = 200,
    seed: int = 0,
    statistic: Callable[[Dataset, Dataset], Mapping[str, float]] | None = None,
) -> BootstrapSummary:
    """Row-resampling bootstrap, independent within each group.

    SEs are sample standard deviations of each reported quantity over the
    successful replications; failed replications are counted and excluded.
    ``statistic`` substitutes a custom (data0, data1) -> {name: value} map
    for the default decomposition quantities.
    """
    if n_boot < 2:
        raise EstimationError("bootstrap failed")
    config = config or DecompositionConfig()
    stat = statistic or (lambda a, b: decompose(a, b, config).quantities())
    draws: dict[str, list] = {}
    failed = 0
    for b in range(n_boot):
        r0 = _resample(data0, derive_seed(seed, "bootstrap:group0", b))
        r1 = _resample(data1, derive_seed(seed, "bootstrap:group1", b))
        try:
            values = stat(r0, r1)
        except EstimationError:
            failed += 1
            continue
        for key, value in values.items():
            draws.setdefault(key, []).append(float(value))
    n_ok = n_boot - failed
    if n_ok < 2:
        raise EstimationError("bootstrap failed")
    ses = {k: float(np.std(np.asarray(v), ddof=1)) for k, v in draws.items()}
    return BootstrapSummary(ses=ses, n_ok=n_ok, n_failed=failed)


def decompose_with_se(
    data0: Dataset,
    data1: Dataset,
    config: DecompositionConfig | None = None,
    n_boot: int = 200,
    seed: int = 0,
) -> DecompositionReport:
    """Point decomposition plus bootstrap SEs in one report."""
    report = decompose(data0, data1, config)
    summary = bootstrap_se(data0, data1, config, n_boot, seed)
    return DecompositionReport(
        **{**report.__dict__, "bootstrap_se": summary.ses, "n_boot": n_boot, "boot_failed": summary.n_failed}
    )
