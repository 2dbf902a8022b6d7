"""Particle-count tuning: variance/correlation estimation and the search.

The budget rules are checked structurally (deterministic evaluators tune to
N = 1, doubling stops at the cap, the recommendation meets its own budget)
and statistically (variance shrinks with N, correlation rises with rho).
"""

import numpy as np
import pytest

from sdemem import (
    estimate_loglik_correlation,
    estimate_loglik_variance,
    tune_particles,
)
from sdemem.aux_random import substream
from sdemem.errors import ConfigError, TuningFailureError, UndefinedStatisticError
from sdemem.models import get_model
from sdemem.models.base import Dataset, ParameterState, UnitData
from sdemem.models.simulate import simulate_dataset
from sdemem.tuning import variance_target

OU_ETA = (np.array([-0.7, 2.3, -0.9]), np.array([4.0, 10.0, 4.0]))


def ou_case(n_units=1, n_obs=20, sigma=0.3, seed=7, dt=0.1):
    info = get_model("ou")
    data, truth = simulate_dataset(
        info.spec,
        eta=OU_ETA,
        xi=(sigma,),
        n_units=n_units,
        n_obs=n_obs,
        dt=dt,
        t0=dt,
        rng=substream(seed, 0, 0, 7),
    )
    return info.spec, data, truth


class TestVarianceEstimate:
    def test_deterministic_evaluator_has_zero_variance(self):
        model, data, truth = ou_case()
        est = estimate_loglik_variance(
            data, model, truth, n_particles=1, n_replicates=20, kind="kalman"
        )
        # replicates are bitwise equal; the variance only carries the
        # round-off of np.mean, so "zero" means below 1e-20
        assert est.variance < 1e-20
        assert not est.degenerate

    def test_variance_shrinks_with_more_particles(self):
        model, data, truth = ou_case(n_obs=25)
        lo = estimate_loglik_variance(
            data, model, truth, n_particles=10, n_replicates=200, seed=3
        )
        hi = estimate_loglik_variance(
            data, model, truth, n_particles=100, n_replicates=200, seed=3
        )
        assert hi.variance < lo.variance

    def test_degenerate_replicate_reports_infinite_variance(self):
        info = get_model("tumor")
        model = info.spec
        times = 1.0 + np.arange(2.0)
        unit = UnitData(0, times, np.array([5.0, 5.1]))
        data = Dataset(units=[unit])
        phi = np.log(np.array([[0.3, 0.1, 50.0, 0.05]]))
        state = ParameterState(
            phi=phi, kappa=np.array([]), xi=np.array([0.1]),
            mu=phi[0], tau=np.ones(4),
        )
        est = estimate_loglik_variance(
            data, model, state, n_particles=8, n_replicates=10,
            kind="bootstrap", transition="em", n_substeps=1,
        )
        assert est.degenerate
        assert est.variance == np.inf

    def test_needs_two_replicates(self):
        model, data, truth = ou_case()
        with pytest.raises(ConfigError):
            estimate_loglik_variance(data, model, truth, 10, n_replicates=1)

    def test_seed_determinism(self):
        model, data, truth = ou_case()
        a = estimate_loglik_variance(data, model, truth, 10, 30, seed=11)
        b = estimate_loglik_variance(data, model, truth, 10, 30, seed=11)
        assert (a.mean, a.variance) == (b.mean, b.variance)


class TestCorrelationEstimate:
    def test_full_correlation_short_circuits(self):
        model, data, truth = ou_case()
        est = estimate_loglik_correlation(data, model, truth, 10, rho=1.0)
        assert est.correlation == 1.0

    def test_independent_streams_uncorrelated(self):
        model, data, truth = ou_case(n_obs=12)
        est = estimate_loglik_correlation(
            data, model, truth, n_particles=8, rho=0.0, n_replicates=500, seed=5
        )
        assert abs(est.correlation) < 0.1

    def test_high_rho_transfers_to_estimates(self):
        model, data, truth = ou_case(n_obs=12)
        hi = estimate_loglik_correlation(
            data, model, truth, n_particles=8, rho=0.999, n_replicates=100, seed=5
        )
        lo = estimate_loglik_correlation(
            data, model, truth, n_particles=8, rho=0.0, n_replicates=100, seed=5
        )
        assert hi.correlation > 0.9
        assert hi.correlation > lo.correlation + 0.5

    def test_deterministic_evaluator_rejected(self):
        model, data, truth = ou_case()
        with pytest.raises(UndefinedStatisticError):
            estimate_loglik_correlation(data, model, truth, 1, 0.5, kind="kalman")

    def test_zero_variance_rejected(self):
        # A single-observation unit under point init has a stream-free
        # likelihood, so the pair variance is exactly zero.
        model, _, truth = ou_case()
        unit = UnitData(0, np.array([0.1]), np.array([1.2]))
        data = Dataset(units=[unit])
        with pytest.raises(UndefinedStatisticError):
            estimate_loglik_correlation(
                data, model, truth, n_particles=4, rho=0.5, n_replicates=20
            )

    def test_needs_three_pairs(self):
        model, data, truth = ou_case()
        with pytest.raises(ConfigError):
            estimate_loglik_correlation(data, model, truth, 8, 0.5, n_replicates=2)


class TestVarianceTarget:
    def test_independent_budget_is_two(self):
        assert variance_target(0.0) == 2.0
        assert variance_target(0.0, rho_l=0.9) == 2.0

    def test_correlated_budget_formula(self):
        # 2.16^2 / (1 - 0.75^2) = 4.6656 / 0.4375
        assert variance_target(0.99, rho_l=0.75) == pytest.approx(
            10.66422857142857, rel=1e-12
        )
        assert variance_target(0.5, rho_l=0.0) == pytest.approx(2.16**2)

    def test_budget_grows_with_estimate_correlation(self):
        budgets = [variance_target(0.9, rho_l=r) for r in (0.0, 0.5, 0.75, 0.9)]
        assert all(b2 > b1 for b1, b2 in zip(budgets, budgets[1:]))

    def test_correlated_budget_requires_rho_l(self):
        with pytest.raises(ConfigError):
            variance_target(0.5)

    def test_rho_l_bounds(self):
        for r in (-1.0, 1.0, 1.5):
            with pytest.raises(UndefinedStatisticError):
                variance_target(0.5, rho_l=r)


class TestTuneParticles:
    def test_deterministic_evaluator_tunes_to_one(self):
        model, data, truth = ou_case(n_units=2, n_obs=10)
        report = tune_particles(
            data, model, truth, rho=0.0, pilot=10, n_replicates=10, kind="kalman"
        )
        assert report.n_particles == 1
        assert report.variance < 1e-20
        assert all(r.n_particles == 1 for r in report.units)

    def test_independent_rule_target_is_two(self):
        model, data, truth = ou_case(n_obs=15)
        report = tune_particles(
            data, model, truth, rho=0.0, pilot=4, n_replicates=25, seed=2
        )
        assert report.target == 2.0
        assert all(row["target"] == 2.0 for row in report.trajectory)

    def test_recommendation_meets_budget(self):
        model, data, truth = ou_case(n_obs=25, sigma=0.1)
        report = tune_particles(
            data, model, truth, rho=0.0, pilot=4, n_replicates=25, seed=2
        )
        chosen = [
            row
            for row in report.trajectory
            if row["n_particles"] == report.n_particles and row["meets_target"]
        ]
        assert chosen, "recommended count never met the budget in the search"
        assert report.variance <= report.target

    def test_doubling_then_refinement_trajectory(self):
        model, data, truth = ou_case(n_obs=25, sigma=0.1)
        report = tune_particles(
            data, model, truth, rho=0.0, pilot=4, n_replicates=25, seed=2
        )
        counts = [row["n_particles"] for row in report.trajectory]
        flags = [row["meets_target"] for row in report.trajectory]
        # the failing prefix is the doubling phase
        prefix = counts[: flags.index(True)]
        for a, b in zip(prefix, prefix[1:]):
            assert b == 2 * a
        # refinement never revisits a larger count than the doubling peak
        peak = max(counts)
        assert counts.index(peak) <= len(prefix)

    def test_correlated_rule_needs_fewer_particles(self):
        model, data, truth = ou_case(n_obs=30, sigma=0.05)
        pmmh = tune_particles(
            data, model, truth, rho=0.0, pilot=4, n_replicates=25, seed=2
        )
        cpmmh = tune_particles(
            data, model, truth, rho=0.99, pilot=4, n_replicates=25, seed=2
        )
        assert cpmmh.n_particles < pmmh.n_particles
        assert cpmmh.rho_l is not None

    def test_particle_cap_raises(self):
        model, data, truth = ou_case(n_obs=30, sigma=0.02)
        with pytest.raises(TuningFailureError) as err:
            tune_particles(
                data, model, truth, rho=0.0, pilot=2, n_replicates=15, seed=2,
                max_particles=8,
            )
        assert err.value.detail["trajectory"]

    def test_overall_takes_worst_unit(self):
        model, data, truth = ou_case(n_units=3, n_obs=20, sigma=0.15)
        report = tune_particles(
            data, model, truth, rho=0.0, pilot=2, n_replicates=20, seed=4
        )
        per_unit = [r.n_particles for r in report.units]
        assert report.n_particles == max(per_unit)
        assert [r.unit_id for r in report.units] == [u.unit_id for u in data.units]

    def test_rejects_bad_pilot(self):
        model, data, truth = ou_case()
        with pytest.raises(ConfigError):
            tune_particles(data, model, truth, pilot=0)
