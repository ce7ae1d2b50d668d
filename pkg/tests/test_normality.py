"""Tests for the PSD square root and the standardized error statistic."""

import numpy as np
import pytest

from candidate_domains import candidates_from_summaries
from exceptions import ConfigInvalid, NotPSD, SingularDenominator
from model_averaging import FitResult, SimplexWeights, fit_trans_mai
from normality import normality_statistic, psd_sqrt
from regression_cube import DomainData, summarize_domains


def fit_on_candidate(candidates, m, beta):
    """FitResult that selects candidate m with the given coefficients."""
    weights = np.zeros(len(candidates))
    weights[m] = 1.0
    return FitResult(weights=SimplexWeights(weights), beta=np.asarray(beta, float), m_s_hat=m,
                     objective=0.0, support=tuple(range(len(candidates))))


class TestPsdSqrt:
    """Symmetric square root by eigendecomposition."""

    def test_identity(self):
        np.testing.assert_allclose(psd_sqrt(np.eye(3)), np.eye(3), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)

    def test_reconstructs_random_psd(self, rng):
        for _ in range(20):
            L = rng.standard_normal((5, 3))
            S = L @ L.T
            R = psd_sqrt(S)
            np.testing.assert_allclose(R, R.T, atol=1e-12)
            assert np.linalg.norm(R @ R - S) <= 1e-8 * np.linalg.norm(S)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPSD):
            psd_sqrt(np.diag([1.0, -0.5]))


class TestNormalityStatistic:
    """T = sqrt(N) psi' Sigma^{1/2} (beta_hat - beta0) / sqrt(variance sum)."""

    def test_zero_error_gives_zero(self, transfer_problem):
        candidates = transfer_problem['candidates']
        fit = fit_trans_mai(transfer_problem['by_id'][0], candidates)
        psi = np.ones(3) / np.sqrt(3)
        sigma2 = {j: 1.0 for j in range(5)}
        report = normality_statistic(fit, candidates, transfer_problem['by_id'], psi, sigma2, fit.beta)
        assert report.statistic == 0.0
        assert report.denominator > 0
        assert report.m_s_hat == fit.m_s_hat

    def test_single_domain_reduces_to_z_score(self, rng):
        """Orthogonal design scaled by sqrt(n): T = sqrt(n)(beta_hat_1 - beta_1)/sigma."""
        n, p, sigma = 50, 3, 0.7
        Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        X = np.sqrt(n) * Q
        beta = np.array([1.0, 2.0, -1.0])
        target = DomainData(id=0, X=X, y=X @ beta + sigma * rng.standard_normal(n))
        summaries = summarize_domains([target])
        candidates = candidates_from_summaries(summaries)
        fit = fit_trans_mai(target, candidates)

        psi = np.array([1.0, 0.0, 0.0])
        report = normality_statistic(fit, candidates, {0: target}, psi, {0: sigma ** 2}, beta)
        expected = np.sqrt(n) * (fit.beta[0] - beta[0]) / sigma
        assert report.statistic == pytest.approx(expected, rel=1e-8)

    def test_scale_equivariance(self, transfer_problem):
        """Scaling every variance by c^2 scales the denominator by c."""
        candidates = transfer_problem['candidates']
        fit = fit_on_candidate(candidates, 2, transfer_problem['beta0'] + 0.1)
        psi = np.array([0.6, 0.8, 0.0])
        base = {j: 1.0 + 0.1 * j for j in range(5)}
        scaled = {j: 4.0 * s for j, s in base.items()}
        a = normality_statistic(fit, candidates, transfer_problem['by_id'], psi, base, transfer_problem['beta0'])
        b = normality_statistic(fit, candidates, transfer_problem['by_id'], psi, scaled, transfer_problem['beta0'])
        assert b.denominator == pytest.approx(2.0 * a.denominator, rel=1e-12)
        assert b.statistic == pytest.approx(a.statistic / 2.0, rel=1e-12)

    def test_sign_symmetry(self, transfer_problem):
        candidates = transfer_problem['candidates']
        beta0 = transfer_problem['beta0']
        error = np.array([0.05, -0.02, 0.03])
        psi = np.ones(3) / np.sqrt(3)
        sigma2 = {j: 1.0 for j in range(5)}
        up = normality_statistic(fit_on_candidate(candidates, 2, beta0 + error), candidates,
                                 transfer_problem['by_id'], psi, sigma2, beta0)
        down = normality_statistic(fit_on_candidate(candidates, 2, beta0 - error), candidates,
                                   transfer_problem['by_id'], psi, sigma2, beta0)
        assert up.statistic == pytest.approx(-down.statistic, rel=1e-12)

    def test_summaries_suffice(self, transfer_problem):
        """Member Gram matrices may come from summaries instead of raw rows."""
        candidates = transfer_problem['candidates']
        fit = fit_on_candidate(candidates, 3, transfer_problem['beta0'] + 0.05)
        psi = np.ones(3) / np.sqrt(3)
        sigma2 = {j: 1.0 for j in range(5)}
        by_summary = {s.id: s for s in transfer_problem['summaries']}
        raw = normality_statistic(fit, candidates, transfer_problem['by_id'], psi, sigma2, transfer_problem['beta0'])
        summ = normality_statistic(fit, candidates, by_summary, psi, sigma2, transfer_problem['beta0'], plug_in=True)
        assert summ.statistic == pytest.approx(raw.statistic, rel=1e-10)
        assert summ.plug_in and not raw.plug_in

    def test_psi_must_be_unit(self, transfer_problem):
        candidates = transfer_problem['candidates']
        fit = fit_on_candidate(candidates, 0, transfer_problem['beta0'])
        with pytest.raises(ConfigInvalid):
            normality_statistic(fit, candidates, transfer_problem['by_id'], np.ones(3),
                                {j: 1.0 for j in range(5)}, transfer_problem['beta0'])

    def test_zero_variance_is_singular(self, transfer_problem):
        candidates = transfer_problem['candidates']
        fit = fit_on_candidate(candidates, 1, transfer_problem['beta0'])
        with pytest.raises(SingularDenominator):
            normality_statistic(fit, candidates, transfer_problem['by_id'], np.array([1.0, 0.0, 0.0]),
                                {j: 0.0 for j in range(5)}, transfer_problem['beta0'])
