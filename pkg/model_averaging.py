"""
Sufficiency-Principled Model Averaging
======================================

Weight selection over nested candidate domains. Each criterion is assembled
as an explicit convex quadratic program over the probability simplex,

    f(w) = w'Aw + b'w + c ,   w >= 0 , sum(w) = 1 ,

and solved by accelerated projected gradient with an active-set polish.

Criteria:
    - Trans-MAI: target-only loss of the averaged predictor, weighted
      candidate losses (v) and the sufficiency penalty (phi * sigma2 * trace).
    - Trans-MACs: combinations of the candidates ranked after the sufficient
      domain m_s, judged on the raw rows pooled in m_s.
    - Trans-MAC: as Trans-MACs with m_s itself admitted to the combination.

Usage:
    from model_averaging import CriterionConfig, fit_trans_mai, fit_trans_mac
    mai = fit_trans_mai(target, candidates, CriterionConfig(v=0.5))
    mac = fit_trans_mac(domains, candidates, m_s=mai.m_s_hat)
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from exceptions import (
    ConfigInvalid,
    DimensionMismatch,
    MissingTarget,
    NotConverged,
    NotPSD,
    PrivacyViolation,
    UnknownId,
)
from regression_cube import CandidateDomain, DomainData, gram_trace, ols_fit, residual_variance, stack_domains
from settings import SOLVER, TOLERANCES, default_phi

logger = logging.getLogger(__name__)

# =============================================================================
# TYPES
# =============================================================================

@dataclass(frozen=True)
class SimplexWeights:
    """Nonnegative weights summing to one."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).copy()
        if values.ndim != 1 or values.size == 0:
            raise DimensionMismatch(f"weights must be a nonempty vector, got shape {values.shape}")
        if values.min() < -TOLERANCES['negative_clamp']:
            raise ConfigInvalid(f"negative weight {values.min():.3e}")
        values[values < 0] = 0.0
        total = values.sum()
        if abs(total - 1.0) > TOLERANCES['simplex_sum']:
            raise ConfigInvalid(f"weights sum to {total!r}, not 1")
        values /= total
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def from_raw(cls, raw: np.ndarray) -> 'SimplexWeights':
        """Clamp tiny negatives from floating point and renormalize."""
        raw = np.asarray(raw, dtype=float).copy()
        raw[(raw < 0) & (raw > -TOLERANCES['negative_clamp'])] = 0.0
        return cls(raw / raw.sum())


@dataclass(frozen=True)
class CriterionConfig:
    """
    Tuning of the Trans-MAI criterion.

    Attributes:
        v: Mix between the averaged-predictor loss (v=0) and the weighted
           candidate losses (v=1)
        phi: Sufficiency penalty multiplier; None resolves to log(n0)
    """

    v: float = 0.5
    phi: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.v <= 1.0:
            raise ConfigInvalid(f"v must lie in [0, 1], got {self.v}")
        if self.phi is not None and not self.phi > 0:
            raise ConfigInvalid(f"phi must be positive, got {self.phi}")

    def resolve_phi(self, n0: int) -> float:
        phi = self.phi if self.phi is not None else default_phi(n0)
        if not phi > 0:
            raise ConfigInvalid(f"phi resolves to {phi} for n0={n0}; set phi explicitly")
        return float(phi)


@dataclass(frozen=True)
class SimplexQP:
    """
    Canonical quadratic program w'Aw + b'w + c over the simplex.

    Attributes:
        A: Symmetric PSD k x k matrix
        b: Linear term, length k
        c: Constant offset
        support: Candidate index carried by each coordinate
    """

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0
    support: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        k = b.size
        if A.shape != (k, k) or b.ndim != 1:
            raise DimensionMismatch(f"A {A.shape} does not match b {b.shape}")
        scale = max(np.abs(A).max(initial=0.0), 1.0)
        if np.abs(A - A.T).max(initial=0.0) > TOLERANCES['qp_symmetry'] * scale:
            raise NotPSD("quadratic term is not symmetric")
        A = 0.5 * (A + A.T)
        eigenvalues = linalg.eigvalsh(A)
        if eigenvalues[0] < -TOLERANCES['qp_psd_floor_rel'] * max(eigenvalues[-1], 0.0):
            raise NotPSD(f"quadratic term has eigenvalue {eigenvalues[0]:.3e}")
        support = tuple(int(m) for m in self.support) if self.support else tuple(range(k))
        if len(support) != k:
            raise DimensionMismatch(f"support has {len(support)} entries for {k} weights")
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'c', float(self.c))
        object.__setattr__(self, 'support', support)

    @property
    def size(self) -> int:
        return self.b.size

    def evaluate(self, w: np.ndarray) -> float:
        w = np.asarray(w, dtype=float)
        return float(w @ self.A @ w + self.b @ w + self.c)

    def gradient(self, w: np.ndarray) -> np.ndarray:
        return 2.0 * (self.A @ w) + self.b

    def frank_wolfe_gap(self, w: np.ndarray) -> float:
        """max over vertices of <grad f(w), w - e_m>; bounds f(w) - min f."""
        grad = self.gradient(w)
        return float(grad @ w - grad.min())


@dataclass(frozen=True)
class FitResult:
    """
    Output of one weight-selection criterion.

    Attributes:
        weights: Selected weights over `support`
        beta: Weighted average of candidate coefficients
        m_s_hat: Candidate index with the largest weight (lowest on ties)
        objective: Criterion value at the optimum
        support: Candidate indices the weights refer to
        method: Criterion name
    """

    weights: SimplexWeights
    beta: np.ndarray
    m_s_hat: int
    objective: float
    support: Tuple[int, ...] = ()
    method: str = ''

    def full_weights(self, k: int) -> np.ndarray:
        """Weights scattered onto candidates 0..k-1, zero off the support."""
        out = np.zeros(k)
        out[list(self.support)] = self.weights.values
        return out


# =============================================================================
# SIMPLEX PROJECTION AND SOLVER
# =============================================================================

def project_onto_simplex(v: np.ndarray) -> np.ndarray:
    """
    Euclidean projection onto {w >= 0, sum(w) = 1} by sorting.

    Args:
        v: Point to project

    Returns:
        The closest point of the probability simplex
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    active = u - cumulative / ind > 0
    rho = ind[active][-1]
    theta = cumulative[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _converged(qp: SimplexQP, w: np.ndarray, objective: float) -> bool:
    return qp.frank_wolfe_gap(w) <= SOLVER['gap_tolerance'] * (1.0 + abs(objective))


def _polish(qp: SimplexQP, w: np.ndarray) -> np.ndarray:
    """
    Active-set refinement: solve the equality-constrained problem on the
    current support, dropping coordinates that turn negative.
    """
    support = np.flatnonzero(w > SOLVER['support_threshold'])
    current = qp.evaluate(w)
    for _ in range(SOLVER['polish_rounds']):
        if support.size == 0:
            break
        s = support.size
        kkt = np.zeros((s + 1, s + 1))
        kkt[:s, :s] = 2.0 * qp.A[np.ix_(support, support)]
        kkt[:s, s] = 1.0
        kkt[s, :s] = 1.0
        rhs = np.concatenate((-qp.b[support], [1.0]))
        solution = linalg.lstsq(kkt, rhs, check_finite=False)[0][:s]
        if solution.min() >= -TOLERANCES['negative_clamp']:
            candidate = np.zeros_like(w)
            candidate[support] = np.maximum(solution, 0.0)
            total = candidate.sum()
            if total <= 0:
                break
            candidate /= total
            value = qp.evaluate(candidate)
            if value <= current + 1e-14 * (1.0 + abs(current)):
                return candidate
            break
        support = np.delete(support, int(np.argmin(solution)))
    return w


def solve_simplex_qp(qp: SimplexQP, max_iterations: Optional[int] = None) -> SimplexWeights:
    """
    Minimize a convex quadratic over the probability simplex.

    Accelerated projected gradient with function-value restart, stopped on
    the Frank-Wolfe duality gap, with an active-set polish every few hundred
    iterations and at the end.

    Args:
        qp: Problem in canonical form
        max_iterations: Iteration cap (defaults to SOLVER['max_iterations'])

    Returns:
        Optimal SimplexWeights

    Raises:
        NotConverged: cap reached with the gap above tolerance
    """
    k = qp.size
    if k == 1:
        return SimplexWeights(np.ones(1))
    cap = SOLVER['max_iterations'] if max_iterations is None else max_iterations

    lipschitz = 2.0 * float(linalg.eigvalsh(qp.A)[-1])
    if lipschitz <= 0.0:
        # purely linear objective: the best vertex, lowest index on ties
        vertex = np.zeros(k)
        vertex[int(np.argmin(qp.b))] = 1.0
        return SimplexWeights(vertex)
    step = 1.0 / lipschitz

    w = np.full(k, 1.0 / k)
    f_w = qp.evaluate(w)
    y = w.copy()
    t = 1.0
    fresh_restart = True

    iteration = 0
    for iteration in range(1, cap + 1):
        w_next = project_onto_simplex(y - step * qp.gradient(y))
        f_next = qp.evaluate(w_next)
        if f_next > f_w and not fresh_restart:
            y, t, fresh_restart = w.copy(), 1.0, True
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = w_next + ((t - 1.0) / t_next) * (w_next - w)
        w, f_w, t = w_next, f_next, t_next
        fresh_restart = False

        if _converged(qp, w, f_w):
            break
        if iteration % 200 == 0:
            polished = _polish(qp, w)
            if _converged(qp, polished, qp.evaluate(polished)):
                w = polished
                break
    else:
        polished = _polish(qp, w)
        if not _converged(qp, polished, qp.evaluate(polished)):
            raise NotConverged(best=w, gap=qp.frank_wolfe_gap(w), iterations=cap)
        w = polished

    polished = _polish(qp, w)
    polished_value = qp.evaluate(polished)
    if polished_value <= qp.evaluate(w) and _converged(qp, polished, polished_value):
        w = polished
    logger.debug("simplex QP k=%d solved in %d iterations, gap %.2e",
                 k, iteration, qp.frank_wolfe_gap(w))
    return SimplexWeights.from_raw(w)


# =============================================================================
# CRITERIA
# =============================================================================

def _prediction_matrix(X: np.ndarray, candidates: Sequence[CandidateDomain]) -> np.ndarray:
    betas = np.column_stack([candidate.beta_agg for candidate in candidates])
    if betas.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"candidates have {betas.shape[0]} coefficients, X has {X.shape[1]} columns")
    return X @ betas


def _gram(X: np.ndarray) -> np.ndarray:
    G = X.T @ X
    return 0.5 * (G + G.T)


def trans_mai_qp(target: DomainData,
                 candidates: Sequence[CandidateDomain],
                 sigma2_target: float,
                 cfg: CriterionConfig) -> SimplexQP:
    """
    Assemble the Trans-MAI criterion

        (1-v)||y0 - H w||^2 + v sum_m w_m ||y0 - H e_m||^2
            + phi sigma2_0 sum_m w_m tr(G[m]^{-1} G0)

    with H the target predictions of every candidate.

    Args:
        target: Target domain (id 0) with raw rows
        candidates: Nested candidates 0..M
        sigma2_target: Target residual variance estimate
        cfg: v and phi

    Returns:
        SimplexQP over all candidates
    """
    if not candidates:
        raise ConfigInvalid("Trans-MAI needs at least one candidate")
    if target.id != 0:
        raise MissingTarget(f"Trans-MAI is evaluated on the target, got domain {target.id}")
    v = cfg.v
    phi = cfg.resolve_phi(target.n)

    H = _prediction_matrix(target.X, candidates)
    y = target.y
    G0 = _gram(target.X)
    losses = ((y[:, None] - H) ** 2).sum(axis=0)
    traces = np.array([gram_trace(G0, c.G_agg, index=c.m) for c in candidates])

    A = (1.0 - v) * (H.T @ H)
    b = -2.0 * (1.0 - v) * (H.T @ y) + v * losses + phi * sigma2_target * traces
    c = (1.0 - v) * float(y @ y)
    return SimplexQP(A=A, b=b, c=c, support=tuple(cand.m for cand in candidates))


def _candidate_lookup(candidates: Sequence[CandidateDomain]) -> dict:
    return {candidate.m: candidate for candidate in candidates}


def _combination_qp(candidates: Sequence[CandidateDomain],
                    m_s: int,
                    support: Sequence[int],
                    sigma2_by_source: Mapping[int, float],
                    domains: Mapping[int, Optional[DomainData]],
                    method: str) -> SimplexQP:
    lookup = _candidate_lookup(candidates)
    unknown = [m for m in list(support) + [m_s] if m not in lookup]
    if unknown:
        raise UnknownId(f"{method}: no candidate with index {unknown}")

    members = lookup[m_s].members
    for j in members:
        if domains.get(j) is None:
            raise PrivacyViolation(j, method)
    missing_sigma = [j for j in members if j not in sigma2_by_source]
    if missing_sigma:
        raise UnknownId(f"{method}: no residual variance for domains {missing_sigma}")

    X_s, y_s = stack_domains(domains, members)
    chosen = [lookup[m] for m in support]
    H = _prediction_matrix(X_s, chosen)

    member_grams = [(_gram(domains[j].X), sigma2_by_source[j]) for j in members]
    penalty = np.array([
        2.0 * sum(sigma2 * gram_trace(G_j, cand.G_agg, index=cand.m) for G_j, sigma2 in member_grams)
        for cand in chosen
    ])

    A = H.T @ H
    b = -2.0 * (H.T @ y_s) + penalty
    return SimplexQP(A=A, b=b, c=float(y_s @ y_s), support=tuple(support))


def trans_macs_qp(candidates: Sequence[CandidateDomain],
                  m_s: int,
                  donor_set: Iterable[int],
                  sigma2_by_source: Mapping[int, float],
                  domains: Mapping[int, Optional[DomainData]]) -> SimplexQP:
    """
    Assemble the Trans-MACs criterion over the donor candidates, evaluated
    on the raw rows pooled in candidate m_s.

    Raises:
        PrivacyViolation: a member of candidate m_s only shared summaries
    """
    donors = sorted(set(int(m) for m in donor_set))
    if not donors:
        raise ConfigInvalid("Trans-MACs needs a nonempty donor set")
    if m_s in donors:
        raise ConfigInvalid(f"donor set must exclude the sufficient domain {m_s}")
    return _combination_qp(candidates, m_s, donors, sigma2_by_source, domains, 'trans-macs')


def trans_mac_qp(candidates: Sequence[CandidateDomain],
                 m_s: int,
                 donor_set: Iterable[int],
                 sigma2_by_source: Mapping[int, float],
                 domains: Mapping[int, Optional[DomainData]]) -> SimplexQP:
    """Trans-MAC criterion: Trans-MACs with m_s admitted to the combination."""
    donors = set(int(m) for m in donor_set)
    if m_s in donors:
        raise ConfigInvalid(f"donor set must exclude the sufficient domain {m_s}")
    support = sorted(donors | {int(m_s)})
    return _combination_qp(candidates, m_s, support, sigma2_by_source, domains, 'trans-mac')


# =============================================================================
# FITS
# =============================================================================

def donor_set_after(candidates: Sequence[CandidateDomain], m_s: int) -> Tuple[int, ...]:
    """Candidates ranked strictly after m_s in the nested order."""
    return tuple(candidate.m for candidate in candidates if candidate.m > m_s)


def _fit_from_qp(qp: SimplexQP, candidates: Sequence[CandidateDomain], method: str) -> FitResult:
    weights = solve_simplex_qp(qp)
    lookup = _candidate_lookup(candidates)
    betas = np.column_stack([lookup[m].beta_agg for m in qp.support])
    beta = betas @ weights.values
    m_s_hat = qp.support[int(np.argmax(weights.values))]
    return FitResult(
        weights=weights,
        beta=beta,
        m_s_hat=int(m_s_hat),
        objective=qp.evaluate(weights.values),
        support=qp.support,
        method=method,
    )


def fit_trans_mai(target: DomainData,
                  candidates: Sequence[CandidateDomain],
                  cfg: Optional[CriterionConfig] = None,
                  sigma2_target: Optional[float] = None) -> FitResult:
    """
    Trans-MAI: weights over all candidates from target data and summaries.

    Args:
        target: Target domain with raw rows
        candidates: Nested candidates 0..M
        cfg: Criterion tuning (defaults v=0.5, phi=log n0)
        sigma2_target: Target residual variance; defaults to the target-only
            OLS residual variance

    Returns:
        FitResult; m_s_hat is the selected sufficient domain
    """
    cfg = cfg or CriterionConfig()
    if sigma2_target is None:
        target_only = next(c for c in candidates if c.m == 0)
        sigma2_target = residual_variance(target, target_only.beta_agg)
    qp = trans_mai_qp(target, candidates, sigma2_target, cfg)
    return _fit_from_qp(qp, candidates, 'trans-mai')


def _combination_inputs(domains: Mapping[int, Optional[DomainData]],
                        candidates: Sequence[CandidateDomain],
                        m_s: Optional[int],
                        cfg: Optional[CriterionConfig],
                        sigma2_by_source: Optional[Mapping[int, float]]):
    if m_s is None:
        target = domains.get(0)
        if target is None:
            raise MissingTarget("selecting m_s needs the target's raw rows")
        m_s = fit_trans_mai(target, candidates, cfg).m_s_hat
    if sigma2_by_source is None:
        lookup = _candidate_lookup(candidates)
        if m_s not in lookup:
            raise UnknownId(f"no candidate with index {m_s}")
        sigma2_by_source = {}
        for j in lookup[m_s].members:
            if domains.get(j) is not None:
                sigma2_by_source[j] = ols_fit(domains[j]).sigma2_hat
    return int(m_s), sigma2_by_source


def fit_trans_macs(domains: Mapping[int, Optional[DomainData]],
                   candidates: Sequence[CandidateDomain],
                   m_s: Optional[int] = None,
                   cfg: Optional[CriterionConfig] = None,
                   sigma2_by_source: Optional[Mapping[int, float]] = None) -> FitResult:
    """
    Trans-MACs: combine the candidates ranked after m_s.

    Args:
        domains: Raw data by domain id; None marks a summary-only domain
        candidates: Nested candidates 0..M
        m_s: Sufficient domain; defaults to the Trans-MAI selection under cfg
        cfg: Criterion tuning used only when selecting m_s
        sigma2_by_source: Residual variances; default from raw rows of m_s

    Returns:
        FitResult over the donor candidates (or m_s alone when no donor exists)
    """
    m_s, sigma2 = _combination_inputs(domains, candidates, m_s, cfg, sigma2_by_source)
    donors = donor_set_after(candidates, m_s)
    if not donors:
        logger.debug("trans-macs: no candidate after m_s=%d, keeping m_s alone", m_s)
        qp = trans_mac_qp(candidates, m_s, (), sigma2, domains)
    else:
        qp = trans_macs_qp(candidates, m_s, donors, sigma2, domains)
    return _fit_from_qp(qp, candidates, 'trans-macs')


def fit_trans_mac(domains: Mapping[int, Optional[DomainData]],
                  candidates: Sequence[CandidateDomain],
                  m_s: Optional[int] = None,
                  cfg: Optional[CriterionConfig] = None,
                  sigma2_by_source: Optional[Mapping[int, float]] = None) -> FitResult:
    """Trans-MAC: combine m_s with the candidates ranked after it."""
    m_s, sigma2 = _combination_inputs(domains, candidates, m_s, cfg, sigma2_by_source)
    qp = trans_mac_qp(candidates, m_s, donor_set_after(candidates, m_s), sigma2, domains)
    return _fit_from_qp(qp, candidates, 'trans-mac')
