"""Simulation data generators and the tail identification diagnostic.

Sampling uses a counter-based generator (Philox) feeding explicit inverse
and Box-Muller transforms, so draws are reproducible bit-for-bit across
platforms and worker processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .exceptions import EstimationError
from .numerics import normal_quantile

__all__ = [
    "DgpSpec",
    "LatentDraw",
    "simulate",
    "true_intercept",
    "true_gamma",
    "true_beta",
    "identification_ratio",
]

_FAMILIES = ("dgp1", "dgp2")


@dataclass(frozen=True)
class DgpSpec:
    """Configuration of one simulated sampling design.

    dgp1: jointly normal covariates and selection error, the selection
    coefficient scaled so Var(index) = alpha.  dgp2: Cauchy covariates with
    a Pareto(alpha) selection error; the index is the last covariate.
    """

    family: str
    n: int
    rho: float = 0.0
    alpha: float = 2.0
    l: int = 7
    k: int = 4
    theta0: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown DGP family: {self.family!r}")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if not 0 < self.k < self.l:
            raise ValueError("need 0 < k < l")

    def with_seed(self, seed: int) -> "DgpSpec":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class LatentDraw:
    """A simulated sample together with its latent components."""

    dataset: Dataset
    u: np.ndarray
    v: np.ndarray
    index: np.ndarray
    gamma0: np.ndarray
    beta0: np.ndarray
    theta0: float


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))


def _standard_normal(g: np.random.Generator, n: int) -> np.ndarray:
    """Box-Muller transform of uniform pairs."""
    m = (n + 1) // 2
    u1 = 1.0 - g.random(m)  # (0, 1], keeps the log finite
    u2 = g.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:n]


def _standard_cauchy(g: np.random.Generator, n: int) -> np.ndarray:
    return np.tan(np.pi * (g.random(n) - 0.5))


def _pareto(g: np.random.Generator, n: int, alpha: float) -> np.ndarray:
    return (1.0 - g.random(n)) ** (-1.0 / alpha)


def true_gamma(spec: DgpSpec) -> np.ndarray:
    if spec.family == "dgp1":
        return np.full(spec.l, math.sqrt(spec.alpha / spec.l))
    g = np.zeros(spec.l)
    g[-1] = 1.0
    return g


def true_beta(spec: DgpSpec) -> np.ndarray:
    return np.ones(spec.k)


def true_intercept(spec: DgpSpec) -> float:
    return spec.theta0


def simulate(spec: DgpSpec) -> LatentDraw:
    """Draw one sample; a deterministic function of the spec (incl. seed).

    Draw order is fixed: covariates (n*l), selection error (n), then the
    independent outcome noise (n).  The outcome error is rho*V + E with
    E ~ N(0, 1 - rho^2); under dgp2 the Pareto V is used as drawn, so rho is
    the exact correlation only when Var(V) exists (alpha > 2).
    """
    g = _generator(spec.seed)
    n, l, k = spec.n, spec.l, spec.k
    if spec.family == "dgp1":
        Z = _standard_normal(g, n * l).reshape(n, l)
        v = _standard_normal(g, n)
    else:
        Z = _standard_cauchy(g, n * l).reshape(n, l)
        v = _pareto(g, n, spec.alpha)
    e = math.sqrt(max(1.0 - spec.rho**2, 0.0)) * _standard_normal(g, n)
    u = spec.rho * v + e

    gamma0 = true_gamma(spec)
    beta0 = true_beta(spec)
    index = Z @ gamma0
    d = (index >= v).astype(float)
    X = Z[:, :k]
    y = d * (spec.theta0 + X @ beta0 + u)
    return LatentDraw(
        dataset=Dataset(d=d, y=y, X=X, Z=Z),
        u=u,
        v=v,
        index=index,
        gamma0=gamma0,
        beta0=beta0,
        theta0=spec.theta0,
    )


def identification_ratio(family: str, alpha: float, q) -> float | np.ndarray:
    """Density of F0(V) at q: g_V(F0^-1(q)) / f0(F0^-1(q)).

    F0 is the index distribution (normal with variance alpha under dgp1,
    standard Cauchy under dgp2) and g_V the selection-error density.
    Finiteness of the ratio as q -> 1 is the identification diagnostic:
    it diverges for alpha < 1 under both families.
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown DGP family: {family!r}")
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    scalar = np.ndim(q) == 0
    q_arr = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any(q_arr < 1e-9) or np.any(q_arr > 1.0 - 1e-9):
        raise EstimationError("out of numeric range")
    with np.errstate(over="raise"):
        try:
            if family == "dgp1":
                s = math.sqrt(alpha)
                x = s * normal_quantile(q_arr)
                # phi(x)/phi(x/s) written as one exponential to dodge underflow
                out = s * np.exp(-0.5 * x * x * (1.0 - 1.0 / alpha))
            else:
                x = np.tan(np.pi * (q_arr - 0.5))
                out = np.zeros_like(x)
                m = x >= 1.0
                out[m] = alpha * x[m] ** (-alpha - 1.0) * np.pi * (1.0 + x[m] * x[m])
        except FloatingPointError:
            raise EstimationError("out of numeric range") from None
    if not np.all(np.isfinite(out)):
        raise EstimationError("out of numeric range")
    if scalar:
        return float(out[0])
    return out
