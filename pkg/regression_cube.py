"""
Regression Cube Estimation
==========================

Per-domain ordinary least squares reduced to summary statistics, and the
regression-cube aggregation that rebuilds pooled OLS over any set of domains
from those summaries alone. A source only ever transmits its Gram matrix,
coefficients and residual variance; the pooled fit is

    beta[I] = (sum_j G_j)^{-1} sum_j G_j beta_j ,   j in I

which equals OLS on the row-stacked raw data.

Usage:
    from regression_cube import DomainData, ols_fit, aggregate_cube
    summaries = summarize_domains(domains)
    G_agg, beta_agg = aggregate_cube(summaries, (0, 2, 3))
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from exceptions import ConfigInvalid, DimensionMismatch, RankDeficient, UnknownId
from settings import TOLERANCES


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class DomainData:
    """
    Raw covariates and responses of one study.

    Attributes:
        id: Domain index, 0 for the target
        X: Covariate matrix, n x p
        y: Response vector, length n
    """

    id: int
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise DimensionMismatch(f"domain {self.id}: X must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DimensionMismatch(
                f"domain {self.id}: y has shape {y.shape}, X has {X.shape[0]} rows")
        if X.shape[0] < 1:
            raise DimensionMismatch(f"domain {self.id}: no rows")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ConfigInvalid(f"domain {self.id}: non-finite values")
        object.__setattr__(self, 'X', _frozen(X))
        object.__setattr__(self, 'y', _frozen(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class DomainSummary:
    """
    Privacy-safe summary a domain shares with the target.

    Attributes:
        id: Domain index
        n: Sample count
        G: Gram matrix X'X, p x p
        beta_hat: OLS coefficients
        sigma2_hat: Residual variance ||y - X beta_hat||^2 / n
    """

    id: int
    n: int
    G: np.ndarray
    beta_hat: np.ndarray
    sigma2_hat: float

    def __post_init__(self) -> None:
        G = np.asarray(self.G, dtype=float)
        beta = np.asarray(self.beta_hat, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or beta.shape != (G.shape[0],):
            raise DimensionMismatch(
                f"domain {self.id}: G {G.shape} does not match beta {beta.shape}")
        if not np.isfinite(G).all():
            raise ConfigInvalid(f"domain {self.id}: non-finite Gram matrix")
        scale = max(np.abs(G).max(), 1.0)
        if np.abs(G - G.T).max() > TOLERANCES['symmetry_rel'] * scale:
            raise ConfigInvalid(f"domain {self.id}: Gram matrix is not symmetric")
        eigenvalues = linalg.eigvalsh(0.5 * (G + G.T))
        if eigenvalues[0] < -TOLERANCES['psd_floor_rel'] * max(eigenvalues[-1], 0.0):
            raise ConfigInvalid(
                f"domain {self.id}: Gram matrix has negative eigenvalue {eigenvalues[0]:.3e}")
        if not np.isfinite(beta).all():
            raise ConfigInvalid(f"domain {self.id}: non-finite coefficients")
        if self.sigma2_hat < 0:
            raise ConfigInvalid(f"domain {self.id}: negative residual variance")
        object.__setattr__(self, 'G', _frozen(G))
        object.__setattr__(self, 'beta_hat', _frozen(beta))
        object.__setattr__(self, 'sigma2_hat', float(self.sigma2_hat))

    @property
    def p(self) -> int:
        return self.G.shape[0]


@dataclass(frozen=True)
class CandidateDomain:
    """
    Nested pooled domain built from the target and the closest sources.

    Attributes:
        m: Candidate index 0..M
        members: Ordered domain ids pooled into this candidate (target first)
        N: Total sample count
        G_agg: Aggregated Gram matrix
        beta_agg: Pooled OLS coefficients
    """

    m: int
    members: Tuple[int, ...]
    N: int
    G_agg: np.ndarray
    beta_agg: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, 'members', tuple(int(j) for j in self.members))
        object.__setattr__(self, 'G_agg', _frozen(self.G_agg))
        object.__setattr__(self, 'beta_agg', _frozen(self.beta_agg))


# =============================================================================
# LINEAR ALGEBRA
# =============================================================================

def reciprocal_condition(G: np.ndarray) -> float:
    """Ratio of smallest to largest eigenvalue of a symmetric PSD matrix."""
    eigenvalues = linalg.eigvalsh(G)
    largest = eigenvalues[-1]
    if largest <= 0:
        return 0.0
    return float(max(eigenvalues[0], 0.0) / largest)


def solve_gram(G: np.ndarray, rhs: np.ndarray, index: Optional[int] = None) -> np.ndarray:
    """
    Solve G x = rhs through a Cholesky factor of the Gram matrix.

    Args:
        G: Symmetric positive definite p x p matrix
        rhs: Vector or p x k matrix
        index: Candidate index reported if the gate fails

    Returns:
        Solution with the shape of rhs

    Raises:
        RankDeficient: reciprocal condition below TOLERANCES['rcond_min']
    """
    rcond = reciprocal_condition(G)
    if rcond < TOLERANCES['rcond_min']:
        raise RankDeficient(rcond, index=index)
    try:
        factor = linalg.cho_factor(G, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise RankDeficient(rcond, index=index)
    return linalg.cho_solve(factor, rhs, check_finite=False)


def gram_trace(G_left: np.ndarray, G_agg: np.ndarray, index: Optional[int] = None) -> float:
    """tr(G_agg^{-1} G_left), from the diagonal of a factor solve."""
    return float(np.trace(solve_gram(G_agg, G_left, index=index)))


# =============================================================================
# OPERATIONS
# =============================================================================

def residual_variance(data: DomainData, beta: np.ndarray) -> float:
    """
    Mean squared residual n^{-1} ||y - X beta||^2.

    Args:
        data: Domain with raw rows
        beta: Coefficient vector of length p

    Returns:
        Nonnegative residual variance
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.p,):
        raise DimensionMismatch(f"beta has shape {beta.shape}, expected ({data.p},)")
    residuals = data.y - data.X @ beta
    return float(residuals @ residuals / data.n)


def ols_fit(data: DomainData) -> DomainSummary:
    """
    Fit OLS on one domain and reduce it to its shareable summary.

    Args:
        data: Domain with raw rows

    Returns:
        DomainSummary with Gram matrix, coefficients and residual variance

    Raises:
        RankDeficient: fewer rows than columns or collinear covariates
    """
    X, y = data.X, data.y
    G = X.T @ X
    G = 0.5 * (G + G.T)
    beta_hat = solve_gram(G, X.T @ y)
    sigma2_hat = residual_variance(data, beta_hat)
    return DomainSummary(id=data.id, n=data.n, G=G, beta_hat=beta_hat, sigma2_hat=sigma2_hat)


def summarize_domains(domains: Iterable[DomainData]) -> List[DomainSummary]:
    """Local estimator collection: every domain computes its own summary."""
    summaries = [ols_fit(domain) for domain in domains]
    p_values = {summary.p for summary in summaries}
    if len(p_values) > 1:
        raise DimensionMismatch(f"domains disagree on covariate count: {sorted(p_values)}")
    return summaries


def _by_id(summaries: Iterable[DomainSummary]) -> Dict[int, DomainSummary]:
    return {summary.id: summary for summary in summaries}


def aggregate_cube(summaries: Sequence[DomainSummary],
                   members: Sequence[int],
                   index: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rebuild pooled OLS over a member set from summaries alone.

    Args:
        summaries: Summaries of all available domains
        members: Domain ids to pool
        index: Candidate index reported if the pooled Gram is singular

    Returns:
        Tuple (G_agg, beta_agg)

    Raises:
        UnknownId: a member has no summary
        RankDeficient: pooled Gram matrix is singular
    """
    if len(members) == 0:
        raise ConfigInvalid("cannot aggregate an empty member set")
    lookup = _by_id(summaries)
    missing = [j for j in members if j not in lookup]
    if missing:
        raise UnknownId(f"no summary for domain ids {missing}")

    if len(members) == 1:
        only = lookup[members[0]]
        return np.array(only.G), np.array(only.beta_hat)

    G_agg = np.zeros_like(lookup[members[0]].G)
    moment = np.zeros_like(lookup[members[0]].beta_hat)
    for j in members:
        G_agg += lookup[j].G
        moment += lookup[j].G @ lookup[j].beta_hat
    beta_agg = solve_gram(G_agg, moment, index=index)
    return G_agg, beta_agg


def stack_domains(domains: Mapping[int, DomainData],
                  members: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Row-stack the raw (X, y) of a member set in member order."""
    missing = [j for j in members if j not in domains]
    if missing:
        raise UnknownId(f"no raw data for domain ids {missing}")
    X = np.vstack([domains[j].X for j in members])
    y = np.concatenate([domains[j].y for j in members])
    return X, y
