"""
Asymptotic Normality Statistic
==============================

Standardized projection of the Trans-MAI estimation error onto a unit
direction psi:

    T = sqrt(N) psi' Sigma^{1/2} (beta_hat - beta0)
        / sqrt( sum_k psi' G_k G^{-1} psi sigma2_k )

with G and N the Gram matrix and sample count of the selected sufficient
candidate, Sigma = G / N and k running over its member domains.
"""

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np
from scipy import linalg

from exceptions import ConfigInvalid, DimensionMismatch, NotPSD, SingularDenominator, UnknownId
from model_averaging import FitResult
from regression_cube import CandidateDomain, DomainData, DomainSummary, solve_gram
from settings import TOLERANCES

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormalityReport:
    """
    One evaluation of the normality statistic.

    Attributes:
        statistic: T
        psi: Unit projection direction
        m_s_hat: Candidate whose Gram matrix standardizes the error
        numerator: sqrt(N) psi' Sigma^{1/2} (beta_hat - beta0)
        denominator: Square root of the variance sum
        plug_in: True when the variances were estimates, not true values
    """

    statistic: float
    psi: np.ndarray
    m_s_hat: int
    numerator: float
    denominator: float
    plug_in: bool = False


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    """
    Symmetric square root of a PSD matrix by eigendecomposition, with
    eigenvalues clamped at zero.

    Raises:
        NotPSD: asymmetric input or eigenvalue below -1e-10 * largest
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {S.shape}")
    scale = max(np.abs(S).max(initial=0.0), 1.0)
    if np.abs(S - S.T).max(initial=0.0) > TOLERANCES['qp_symmetry'] * scale:
        raise NotPSD("matrix is not symmetric")
    eigenvalues, vectors = linalg.eigh(0.5 * (S + S.T))
    if eigenvalues[0] < -TOLERANCES['psd_floor_rel'] * max(eigenvalues[-1], 0.0):
        raise NotPSD(f"matrix has eigenvalue {eigenvalues[0]:.3e}")
    root = (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.T
    return 0.5 * (root + root.T)


def _domain_gram(entry: Union[DomainData, DomainSummary]) -> np.ndarray:
    if isinstance(entry, DomainSummary):
        return np.asarray(entry.G)
    G = entry.X.T @ entry.X
    return 0.5 * (G + G.T)


def normality_statistic(fit: FitResult,
                        candidates: Sequence[CandidateDomain],
                        per_source_data: Mapping[int, Union[DomainData, DomainSummary]],
                        psi: np.ndarray,
                        sigma2_by_source: Mapping[int, float],
                        beta0: np.ndarray,
                        plug_in: bool = False) -> NormalityReport:
    """
    Standardize the error of a Trans-MAI fit along psi.

    Args:
        fit: Trans-MAI result (beta and m_s_hat are used)
        candidates: Nested candidates the fit was computed on
        per_source_data: Raw data or summaries by domain id
        psi: Unit vector of length p
        sigma2_by_source: Noise variance per member domain
        beta0: True target coefficients
        plug_in: Mark the variances as estimates

    Returns:
        NormalityReport

    Raises:
        SingularDenominator: variance sum at or below TOLERANCES['denominator_min']
    """
    psi = np.asarray(psi, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    if psi.shape != fit.beta.shape or beta0.shape != fit.beta.shape:
        raise DimensionMismatch(
            f"psi {psi.shape} and beta0 {beta0.shape} must match beta {fit.beta.shape}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ConfigInvalid(f"psi must have unit norm, got {np.linalg.norm(psi)!r}")

    lookup = {candidate.m: candidate for candidate in candidates}
    if fit.m_s_hat not in lookup:
        raise UnknownId(f"no candidate with index {fit.m_s_hat}")
    selected = lookup[fit.m_s_hat]

    root = psd_sqrt(selected.G_agg / selected.N)
    numerator = math.sqrt(selected.N) * float(psi @ root @ (fit.beta - beta0))

    G_inv_psi = solve_gram(selected.G_agg, psi, index=selected.m)
    variance = 0.0
    for k in selected.members:
        if k not in per_source_data or k not in sigma2_by_source:
            raise UnknownId(f"no Gram matrix or variance for member domain {k}")
        variance += float(psi @ _domain_gram(per_source_data[k]) @ G_inv_psi) * sigma2_by_source[k]
    if variance <= 0.0:
        raise SingularDenominator(f"variance sum is {variance:.3e}")
    denominator = math.sqrt(variance)
    if denominator <= TOLERANCES['denominator_min']:
        raise SingularDenominator(f"denominator is {denominator:.3e}")

    logger.debug("normality statistic %.4f at candidate %d", numerator / denominator, selected.m)
    return NormalityReport(
        statistic=numerator / denominator,
        psi=psi,
        m_s_hat=selected.m,
        numerator=numerator,
        denominator=denominator,
        plug_in=plug_in,
    )
