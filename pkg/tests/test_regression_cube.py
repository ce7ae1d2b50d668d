"""Tests for per-domain OLS summaries and regression-cube aggregation."""

import numpy as np
import pytest

from exceptions import ConfigInvalid, DimensionMismatch, RankDeficient, UnknownId
from regression_cube import (
    DomainData,
    DomainSummary,
    aggregate_cube,
    gram_trace,
    ols_fit,
    residual_variance,
    solve_gram,
    stack_domains,
    summarize_domains,
)


class TestDomainData:
    """Validation of raw domain data."""

    def test_row_count_mismatch(self):
        """y must have one entry per row of X."""
        with pytest.raises(DimensionMismatch):
            DomainData(id=0, X=np.ones((3, 2)), y=np.ones(4))

    def test_non_finite_rejected(self):
        X = np.ones((3, 2))
        X[1, 1] = np.nan
        with pytest.raises(ConfigInvalid):
            DomainData(id=0, X=X, y=np.ones(3))

    def test_arrays_are_read_only(self):
        data = DomainData(id=1, X=np.eye(2), y=np.ones(2))
        with pytest.raises(ValueError):
            data.X[0, 0] = 5.0
        assert data.n == 2 and data.p == 2


class TestOlsFit:
    """Local estimator collection."""

    def test_matches_least_squares(self, rng):
        """Coefficients agree with numpy least squares, variance divides by n."""
        X = rng.standard_normal((50, 4))
        y = X @ np.array([1.0, 0.0, -1.0, 2.0]) + rng.standard_normal(50)
        summary = ols_fit(DomainData(id=3, X=X, y=y))

        expected = np.linalg.lstsq(X, y, rcond=None)[0]
        np.testing.assert_allclose(summary.beta_hat, expected, rtol=1e-10)
        np.testing.assert_allclose(summary.G, X.T @ X, rtol=1e-12)
        residuals = y - X @ expected
        assert summary.sigma2_hat == pytest.approx(residuals @ residuals / 50, rel=1e-10)
        assert summary.id == 3 and summary.n == 50

    def test_fewer_rows_than_columns(self, rng):
        with pytest.raises(RankDeficient):
            ols_fit(DomainData(id=0, X=rng.standard_normal((2, 4)), y=np.ones(2)))

    def test_collinear_columns(self, rng):
        """A duplicated covariate fails the reciprocal-condition gate."""
        x = rng.standard_normal(20)
        X = np.column_stack([x, x, rng.standard_normal(20)])
        with pytest.raises(RankDeficient):
            ols_fit(DomainData(id=0, X=X, y=rng.standard_normal(20)))

    def test_residual_variance_dimension(self):
        data = DomainData(id=0, X=np.eye(3), y=np.ones(3))
        with pytest.raises(DimensionMismatch):
            residual_variance(data, np.ones(2))

    def test_summary_validation(self):
        with pytest.raises(ConfigInvalid):
            DomainSummary(id=0, n=3, G=np.array([[1.0, 0.5], [0.0, 1.0]]), beta_hat=np.zeros(2), sigma2_hat=1.0)
        with pytest.raises(ConfigInvalid):
            DomainSummary(id=0, n=3, G=np.eye(2), beta_hat=np.zeros(2), sigma2_hat=-1.0)
        with pytest.raises(DimensionMismatch):
            DomainSummary(id=0, n=3, G=np.eye(2), beta_hat=np.zeros(3), sigma2_hat=1.0)

    def test_indefinite_gram_rejected(self):
        with pytest.raises(ConfigInvalid):
            DomainSummary(id=0, n=3, G=np.diag([1.0, -1.0]), beta_hat=np.zeros(2), sigma2_hat=1.0)
        with pytest.raises(ConfigInvalid):
            DomainSummary(id=0, n=3, G=np.array([[1.0, np.inf], [np.inf, 1.0]]), beta_hat=np.zeros(2), sigma2_hat=1.0)

    def test_singular_gram_accepted(self):
        summary = DomainSummary(id=0, n=3, G=np.diag([1.0, 0.0]), beta_hat=np.zeros(2), sigma2_hat=1.0)
        assert summary.G[1, 1] == 0.0

    def test_summarize_requires_common_dimension(self, rng):
        domains = [
            DomainData(id=0, X=rng.standard_normal((10, 2)), y=rng.standard_normal(10)),
            DomainData(id=1, X=rng.standard_normal((10, 3)), y=rng.standard_normal(10)),
        ]
        with pytest.raises(DimensionMismatch):
            summarize_domains(domains)


class TestAggregateCube:
    """Pooled OLS rebuilt from summaries."""

    def test_equals_stacked_ols_on_random_partitions(self, rng):
        """Summaries-only pooling reproduces OLS on the row-stacked data."""
        for _ in range(200):
            p = int(rng.choice([2, 5, 10]))
            k = int(rng.integers(2, 6))
            sizes = rng.integers(p + 2, p + 30, size=k)
            beta = rng.normal(0.0, 2.0, size=p)
            domains = []
            for j, n in enumerate(sizes):
                X = rng.standard_normal((n, p))
                domains.append(DomainData(id=j, X=X, y=X @ beta + rng.standard_normal(n)))
            summaries = summarize_domains(domains)
            members = list(rng.permutation(k))

            _, beta_cube = aggregate_cube(summaries, members)
            X, y = stack_domains({d.id: d for d in domains}, members)
            beta_stack = np.linalg.lstsq(X, y, rcond=None)[0]
            assert np.linalg.norm(beta_cube - beta_stack) <= 1e-8 * np.linalg.norm(beta_stack)

    def test_single_member_returns_its_summary(self, transfer_problem):
        summary = transfer_problem['summaries'][2]
        G, beta = aggregate_cube(transfer_problem['summaries'], [2])
        assert np.array_equal(G, summary.G)
        assert np.array_equal(beta, summary.beta_hat)

    def test_missing_member(self, transfer_problem):
        with pytest.raises(UnknownId):
            aggregate_cube(transfer_problem['summaries'], [0, 9])

    def test_empty_members(self, transfer_problem):
        with pytest.raises(ConfigInvalid):
            aggregate_cube(transfer_problem['summaries'], [])

    def test_singular_pool_reports_index(self):
        """A singular pooled Gram matrix names the offending candidate."""
        singular = [
            DomainSummary(id=j, n=5, G=np.diag([1.0, 0.0]), beta_hat=np.zeros(2), sigma2_hat=1.0)
            for j in range(2)
        ]
        with pytest.raises(RankDeficient) as info:
            aggregate_cube(singular, [0, 1], index=7)
        assert info.value.index == 7


class TestGramSolves:
    """Factor solves shared by every module."""

    def test_trace_of_own_gram_is_dimension(self, rng):
        X = rng.standard_normal((30, 4))
        G = X.T @ X
        assert gram_trace(G, G) == pytest.approx(4.0, rel=1e-12)

    def test_solve_matches_inverse(self, rng):
        X = rng.standard_normal((30, 3))
        G = X.T @ X
        rhs = rng.standard_normal(3)
        np.testing.assert_allclose(solve_gram(G, rhs), np.linalg.solve(G, rhs), rtol=1e-10)

    def test_stack_missing_domain(self, transfer_problem):
        with pytest.raises(UnknownId):
            stack_domains(transfer_problem['by_id'], [0, 11])


@pytest.mark.monte_carlo
class TestOlsUnbiased:
    """OLS coefficients average out to the truth over seeded replications."""

    def test_mean_within_four_standard_errors(self):
        beta = np.array([1.0, -2.0, 0.5])
        X = np.random.default_rng(5).standard_normal((40, 3))
        estimates = []
        for seed in range(1000):
            y = X @ beta + np.random.default_rng(10_000 + seed).standard_normal(40)
            estimates.append(ols_fit(DomainData(id=0, X=X, y=y)).beta_hat)
        estimates = np.array(estimates)
        standard_error = estimates.std(axis=0, ddof=1) / np.sqrt(len(estimates))
        assert np.all(np.abs(estimates.mean(axis=0) - beta) <= 4.0 * standard_error)
