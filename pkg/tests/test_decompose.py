import math

import numpy as np
import pytest

from snnselect.data import Dataset
from snnselect.decompose import (
    DecompositionConfig,
    bootstrap_se,
    decompose,
    decompose_with_se,
)
from snnselect.exceptions import EstimationError


def make_data(d, y, X, Z):
    return Dataset(d=np.asarray(d, float), y=np.asarray(y, float),
                   X=np.asarray(X, float), Z=np.asarray(Z, float))


def group_sample(n, theta, seed, rho=0.0, beta=(1.0, -0.5), gamma=(1.0, 0.8, 0.4),
                 x_shift=0.0):
    """Selection-model sample with normal covariates; selection exogenous at rho=0."""
    rng = np.random.default_rng(seed)
    ell = len(gamma)
    k = len(beta)
    Z = rng.normal(size=(n, ell))
    Z[:, 1:k+1] += x_shift
    v = rng.normal(size=n)
    d = (Z @ np.asarray(gamma) >= v).astype(float)
    X = Z[:, 1:k+1]
    u = rho * v + math.sqrt(1 - rho**2) * rng.normal(size=n)
    y = d * (theta + X @ np.asarray(beta) + u)
    return make_data(d, y, X, Z)


FAST = DecompositionConfig(nuisance="probit")


class TestDecompose:
    def test_identical_groups_all_zero(self):
        data = group_sample(800, 1.0, seed=60)
        rep = decompose(data, data, FAST)
        assert rep.gap_overall == 0.0
        assert rep.component_A == pytest.approx(0.0, abs=1e-12)
        assert rep.component_B == pytest.approx(0.0, abs=1e-12)
        assert rep.component_C == pytest.approx(0.0, abs=1e-12)
        assert rep.intercept_difference == 0.0

    def test_accounting_identity(self):
        d0 = group_sample(700, 1.0, seed=61)
        d1 = group_sample(650, 1.4, seed=62, x_shift=0.3)
        for weighting in ("group0", "group1"):
            cfg = DecompositionConfig(nuisance="probit", weighting=weighting)
            rep = decompose(d0, d1, cfg)
            assert rep.gap_overall == pytest.approx(
                rep.component_A + rep.component_B + rep.component_C, abs=1e-12
            )
            assert rep.gap_selection_corrected == pytest.approx(
                rep.component_A + rep.component_B, abs=1e-12
            )

    def test_group_swap_symmetry(self):
        d0 = group_sample(700, 1.0, seed=63)
        d1 = group_sample(750, 1.5, seed=64, x_shift=0.2)
        a = decompose(d0, d1, DecompositionConfig(nuisance="probit", weighting="group0"))
        b = decompose(d1, d0, DecompositionConfig(nuisance="probit", weighting="group1"))
        assert b.gap_overall == pytest.approx(-a.gap_overall, abs=1e-12)
        assert b.intercept_difference == pytest.approx(-a.intercept_difference, abs=1e-12)
        assert b.component_A == pytest.approx(-a.component_A, abs=1e-10)
        assert b.component_B == pytest.approx(-a.component_B, abs=1e-10)

    def test_recovers_planted_intercept_gap(self):
        # exogenous selection; moderate n with the parametric nuisance chain
        d0 = group_sample(2500, 1.0, seed=65)
        d1 = group_sample(2500, 1.5, seed=66)
        rep = decompose(d0, d1, FAST)
        assert rep.intercept_difference == pytest.approx(0.5, abs=0.15)

    def test_component_b_shared_beta_matches_ols_route(self):
        # with the intercept estimator swapped through the hook, B is
        # identical because it depends only on the shared slopes
        from snnselect.baselines import ols_selected

        d0 = group_sample(4000, 1.0, seed=67)
        d1 = group_sample(4000, 1.3, seed=68, x_shift=0.1)
        snn_cfg = DecompositionConfig(nuisance="probit")
        ols_cfg = DecompositionConfig(
            nuisance="probit",
            intercept_fn=lambda data, beta, gamma: ols_selected(data).theta,
        )
        a = decompose(d0, d1, snn_cfg)
        b = decompose(d0, d1, ols_cfg)
        assert b.component_B == a.component_B  # bitwise: same betas, same endowments
        assert abs(a.component_A - b.component_A) <= 0.2

    def test_error_carries_group_tag(self):
        good = group_sample(600, 1.0, seed=69)
        bad = make_data(np.zeros(600), np.zeros(600), good.X, good.Z)
        with pytest.raises(EstimationError, match="group1"):
            decompose(good, bad, FAST)


class TestBootstrap:
    def test_degenerate_statistic_gives_zero_ses(self):
        d0 = group_sample(300, 1.0, seed=70)
        d1 = group_sample(300, 1.2, seed=71)
        summary = bootstrap_se(d0, d1, n_boot=25, seed=5,
                               statistic=lambda a, b: {"theta": 3.0})
        assert summary.ses["theta"] == 0.0
        assert summary.n_ok == 25

    def test_mean_difference_matches_analytic_se(self):
        rng = np.random.default_rng(72)
        n = 500
        mk = lambda mu, seed: group_sample(n, mu, seed=seed)
        d0, d1 = mk(1.0, 73), mk(1.5, 74)

        def mean_diff(a, b):
            return {"diff": b.y[b.selected()].mean() - a.y[a.selected()].mean()}

        summary = bootstrap_se(d0, d1, n_boot=200, seed=6, statistic=mean_diff)
        s0 = d0.y[d0.selected()]
        s1 = d1.y[d1.selected()]
        analytic = math.sqrt(s0.var(ddof=1) / len(s0) + s1.var(ddof=1) / len(s1))
        assert abs(summary.ses["diff"] - analytic) <= 0.25 * analytic

    def test_single_replication_rejected(self):
        d0 = group_sample(200, 1.0, seed=75)
        with pytest.raises(EstimationError, match="bootstrap failed"):
            bootstrap_se(d0, d0, n_boot=1, seed=7)

    def test_all_failures_is_bootstrap_failed(self):
        d0 = group_sample(200, 1.0, seed=76)

        def broken(a, b):
            raise EstimationError("x")

        with pytest.raises(EstimationError, match="bootstrap failed"):
            bootstrap_se(d0, d0, n_boot=5, seed=8, statistic=broken)

    def test_identity_holds_in_every_replication(self):
        d0 = group_sample(500, 1.0, seed=77)
        d1 = group_sample(500, 1.2, seed=78)

        def identity_check(a, b):
            rep = decompose(a, b, FAST)
            assert rep.gap_overall == pytest.approx(
                rep.component_A + rep.component_B + rep.component_C, abs=1e-12
            )
            return rep.quantities()

        summary = bootstrap_se(d0, d1, n_boot=12, seed=9, statistic=identity_check)
        assert summary.n_ok == 12

    def test_decompose_with_se_attaches_ses(self):
        d0 = group_sample(500, 1.0, seed=79)
        d1 = group_sample(500, 1.3, seed=80)
        rep = decompose_with_se(d0, d1, FAST, n_boot=15, seed=10)
        assert rep.n_boot == 15
        assert set(rep.bootstrap_se) == set(rep.quantities())
        assert all(v >= 0 for v in rep.bootstrap_se.values())
        text = rep.to_text()
        assert "Difference in intercepts" in text


class TestConfigValidation:
    def test_bad_weighting(self):
        with pytest.raises(ValueError):
            DecompositionConfig(weighting="both")

    def test_bad_nuisance(self):
        with pytest.raises(ValueError):
            DecompositionConfig(nuisance="oracle")

    def test_bad_method(self):
        with pytest.raises(ValueError):
            DecompositionConfig(intercept_method="magic")
