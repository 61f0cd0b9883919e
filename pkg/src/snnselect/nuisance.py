"""Nuisance-parameter estimation for empirical data.

Selection coefficients come from a probit fit (parametric) or a
semiparametric binary-choice quasi-likelihood; outcome slopes come from the
double-residual (partially linear) regression.  All smoothing is
leave-one-out with Epanechnikov weights, computed in O(n log n) via prefix
sums over the sorted index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .baselines import probit_mle
from .data import Dataset
from .exceptions import EstimationError
from .ranks import index_values

__all__ = [
    "NuisanceEstimates",
    "fit_nuisance",
    "probit_gamma",
    "klein_spady_gamma",
    "klein_spady_objective",
    "robinson_beta",
    "silverman_bandwidth",
]

_PROB_CLIP = 1e-4
_KS_MAXITER = 2000
_KS_TOL = 1e-8


@dataclass(frozen=True)
class NuisanceEstimates:
    beta: np.ndarray
    gamma: np.ndarray  # first component exactly 1
    beta_method: str
    gamma_method: str

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma[0] != 1.0:
            raise ValueError("gamma must be normalized with first component 1")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(gamma))):
            raise ValueError("nuisance estimates must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)


def fit_nuisance(
    data: Dataset,
    gamma_method: str = "klein_spady",
    ks_bandwidth: float | None = None,
    robinson_bandwidth: float | None = None,
) -> NuisanceEstimates:
    """Selection coefficients then outcome slopes, bundled with provenance."""
    if gamma_method == "probit":
        gamma = probit_gamma(data)
    elif gamma_method == "klein_spady":
        gamma = klein_spady_gamma(data, ks_bandwidth)
    else:
        raise ValueError(f"unknown gamma method {gamma_method!r}")
    beta = robinson_beta(data, gamma, robinson_bandwidth)
    return NuisanceEstimates(
        beta=beta, gamma=gamma, beta_method="robinson", gamma_method=gamma_method
    )


def silverman_bandwidth(index: np.ndarray, c: float = 1.06) -> float:
    """Rule-of-thumb pilot c * scale * n^(-1/5), robust scale via the IQR."""
    index = np.asarray(index, dtype=float)
    n = index.shape[0]
    iqr = float(np.quantile(index, 0.75) - np.quantile(index, 0.25))
    scale = min(float(index.std()), iqr / 1.349) if iqr > 0 else float(index.std())
    if scale <= 0.0:
        raise EstimationError("degenerate index")
    return c * scale * n ** (-0.2)


def _loo_epanechnikov(index: np.ndarray, values: np.ndarray, h: float):
    """Leave-one-out Nadaraya-Watson smooth of each column of ``values``.

    Returns (estimates, valid) where ``valid`` flags rows whose window holds
    at least one other observation with positive weight.  Expanding the
    kernel polynomial lets window sums come from prefix sums of x^0, x^1,
    x^2 times the smoothed columns.
    """
    x = np.asarray(index, dtype=float)
    V = np.atleast_2d(np.asarray(values, dtype=float))
    if V.shape[0] != x.shape[0]:
        V = V.T
    n = x.shape[0]
    x = x - np.median(x)  # limits cancellation in the x^2 prefix sums

    order = np.argsort(x, kind="stable")
    xs = x[order]
    Vs = V[order]
    lo = np.searchsorted(xs, xs - h, side="left")
    hi = np.searchsorted(xs, xs + h, side="right")

    def window_sum(col: np.ndarray) -> np.ndarray:
        c0 = np.concatenate([[0.0], np.cumsum(col)])
        c1 = np.concatenate([[0.0], np.cumsum(col * xs)])
        c2 = np.concatenate([[0.0], np.cumsum(col * xs * xs)])
        s0 = c0[hi] - c0[lo]
        s1 = c1[hi] - c1[lo]
        s2 = c2[hi] - c2[lo]
        return 0.75 * ((1.0 - xs * xs / (h * h)) * s0 + (2.0 * xs / (h * h)) * s1 - s2 / (h * h))

    den = window_sum(np.ones(n)) - 0.75  # drop the self term K(0)
    num = np.empty((n, V.shape[1]))
    for j in range(V.shape[1]):
        num[:, j] = window_sum(Vs[:, j]) - 0.75 * Vs[:, j]

    valid_s = den > 1e-10
    est_s = np.zeros_like(num)
    est_s[valid_s] = num[valid_s] / den[valid_s, None]

    est = np.empty_like(est_s)
    valid = np.empty(n, dtype=bool)
    est[order] = est_s
    valid[order] = valid_s
    return est, valid


def probit_gamma(data: Dataset) -> np.ndarray:
    """Probit MLE rescaled so the first component is exactly one."""
    g = probit_mle(data.d, data.Z)
    if abs(g[0]) <= 1e-8:
        raise EstimationError("normalization impossible")
    return g / g[0]


def klein_spady_objective(
    data: Dataset, gamma: np.ndarray, bandwidth: float
) -> float:
    """Leave-one-out quasi-log-likelihood of the single-index binary choice."""
    idx = index_values(data.Z, gamma)
    p_hat, valid = _loo_epanechnikov(idx, data.d[:, None], bandwidth)
    p = p_hat[:, 0]
    fallback = float(np.clip(data.d.mean(), _PROB_CLIP, 1.0 - _PROB_CLIP))
    p = np.where(valid, p, fallback)
    p = np.clip(p, _PROB_CLIP, 1.0 - _PROB_CLIP)
    return float(data.d @ np.log(p) + (1.0 - data.d) @ np.log(1.0 - p))


def klein_spady_gamma(data: Dataset, pilot_bandwidth: float | None = None) -> np.ndarray:
    """Maximizer of the leave-one-out quasi-likelihood over {gamma: gamma_1 = 1}.

    Derivative-free simplex search started at the normalized probit estimate.
    """
    if data.d.min() == data.d.max():
        raise EstimationError("degenerate outcome")
    if data.n < 100:
        raise EstimationError("insufficient sample")
    start = probit_gamma(data)
    if pilot_bandwidth is None:
        pilot_bandwidth = silverman_bandwidth(index_values(data.Z, start))
    if data.l == 1:
        return start

    def negloglik(free: np.ndarray) -> float:
        gamma = np.concatenate([[1.0], free])
        return -klein_spady_objective(data, gamma, pilot_bandwidth)

    res = optimize.minimize(
        negloglik,
        start[1:],
        method="Nelder-Mead",
        options={
            "maxiter": _KS_MAXITER,
            "maxfev": _KS_MAXITER,
            "fatol": _KS_TOL,
            "xatol": _KS_TOL,
        },
    )
    if not res.success:
        raise EstimationError("no convergence")
    best = np.concatenate([[1.0], res.x])
    # the simplex can stall on plateaus; never return worse than the start
    if -res.fun < klein_spady_objective(data, start, pilot_bandwidth) - 1e-12:
        return start
    return best


def robinson_beta(
    data: Dataset, gamma: np.ndarray, bandwidth: float | None = None
) -> np.ndarray:
    """Double-residual slope estimate over the selected subsample.

    Leave-one-out kernel regressions of y and of each X column on the
    selection index are removed, and the residuals are regressed on each
    other without an intercept (it is absorbed by the smoothing).
    """
    sel = data.selected()
    m = int(sel.sum())
    if m < data.k + 10:
        raise EstimationError("insufficient selected observations")
    idx = index_values(data.Z, gamma)[sel]
    if bandwidth is None:
        bandwidth = silverman_bandwidth(idx)
    cols = np.column_stack([data.y[sel], data.X[sel]])
    smooth, valid = _loo_epanechnikov(idx, cols, bandwidth)
    if int(valid.sum()) < data.k + 2:
        raise EstimationError("singular design")
    ry = data.y[sel][valid] - smooth[valid, 0]
    rX = data.X[sel][valid] - smooth[valid, 1:]
    coef, _, rank, _ = np.linalg.lstsq(rX, ry, rcond=None)
    if rank < data.k:
        raise EstimationError("singular design")
    return coef
