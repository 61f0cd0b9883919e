"""Observation container shared by every estimator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Dataset"]


@dataclass(frozen=True)
class Dataset:
    """One sample of the selection model.

    d : (n,) binary selection indicators
    y : (n,) observed outcomes (0 where d = 0 in simulated data; observed
        values are kept as-is for real data and masked through d)
    X : (n, k) outcome covariates
    Z : (n, l) selection covariates
    """

    d: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        d = np.asarray(self.d, dtype=float)
        y = np.asarray(self.y, dtype=float)
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        if X.shape[0] != d.shape[0]:
            X = X.T
        if Z.shape[0] != d.shape[0]:
            Z = Z.T
        n = d.shape[0]
        if n < 2:
            raise ValueError("dataset needs at least 2 observations")
        if y.shape != (n,) or X.shape[0] != n or Z.shape[0] != n:
            raise ValueError("inconsistent dataset dimensions")
        if not np.all((d == 0.0) | (d == 1.0)):
            raise ValueError("selection indicator must be 0/1")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def l(self) -> int:
        return self.Z.shape[1]

    @property
    def n_selected(self) -> int:
        return int(self.d.sum())

    def selected(self) -> np.ndarray:
        return self.d > 0.5

    def take(self, rows: np.ndarray) -> "Dataset":
        """Row subset / resample (used by the bootstrap)."""
        return Dataset(self.d[rows], self.y[rows], self.X[rows], self.Z[rows])
