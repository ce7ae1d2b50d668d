"""
Simulation Lab
==============

Data-generating processes for the simulation experiments, the baseline
estimators, the replication engine and the two dedicated studies (weight
convergence and normality of the standardized estimation error).

Experiments:
    - Exp1: homogeneous design, informative sources share the target
      coefficients up to a contrast of size h, the rest are unrelated
    - Exp2: homogeneous design where the target coefficients are an exact
      combination of the pooled non-informative candidates
    - Exp3: Exp2 with Toeplitz-band source covariances and source noise
      schedules
    - Exp4: Exp3 with an AR(0.5) target covariance
    - Exp5: sample-size study on the Exp1 design (or any base experiment)
    - WeightConv / Normality: dedicated studies on a base experiment

Every random draw comes from a counter-based stream keyed by
(seed, replicate, domain, purpose), so results do not depend on the order
in which threads finish.

Usage:
    from simulation_lab import expand_config_grid, run_replications
    for cfg in expand_config_grid({'experiment': 'Exp1', 'B': 100}):
        run = run_replications(cfg)
        print(run.summary)
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import linalg, optimize, stats

from candidate_domains import candidates_from_summaries, informative_mask
from exceptions import ConfigInvalid, PrivacyViolation, RankDeficient, TransMAError
from model_averaging import CriterionConfig, FitResult, fit_trans_mac, fit_trans_macs, fit_trans_mai
from normality import normality_statistic, psd_sqrt
from regression_cube import DomainData, aggregate_cube, ols_fit, solve_gram, stack_domains, summarize_domains
from settings import (
    EXPERIMENT_DEFAULTS,
    METHODS,
    NORMALITY,
    SIMULATION_GRIDS,
    WEIGHT_CONVERGENCE,
    experiment_defaults,
)

logger = logging.getLogger(__name__)

# =============================================================================
# CONSTANTS
# =============================================================================

EXPERIMENTS = tuple(EXPERIMENT_DEFAULTS)

# Fields that may hold a list in a JSON config; expanded in this order.
GRID_FIELDS = ('h', 'A_size', 'n0', 'n_m', 'p', 'M')

PURPOSES = {
    'covariates': 0,
    'noise': 1,
    'coefficients': 2,
    'contrast': 3,
    'test': 4,
    'split': 5,
}

DELTA_MODES = ('sparse', 'dense')
SIGMA_SCHEDULES = ('constant', 'linear', 'geometric')

# Experiments whose target coefficients come from the combination fixed point.
FIXED_POINT_DESIGNS = ('Exp2', 'Exp3', 'Exp4')

# Coefficient distributions (mean, standard deviation).
TARGET_COEFFICIENTS = (2.0, 2.0)
UNRELATED_COEFFICIENTS = {'Exp1': (-1.0, 2.0), 'fixed_point': (2.0, 4.0)}


def domain_rng(seed: int, replicate: int, domain: int, purpose: str) -> np.random.Generator:
    """
    Independent random stream for one (replicate, domain, purpose).

    Args:
        seed: Experiment seed (any nonnegative integer)
        replicate: Replication index
        domain: Domain id
        purpose: One of PURPOSES

    Returns:
        numpy Generator over a Philox bit generator
    """
    if purpose not in PURPOSES:
        raise ConfigInvalid(f"unknown random stream purpose {purpose!r}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(domain), PURPOSES[purpose]))
    return np.random.Generator(np.random.Philox(sequence))


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation point; every field mirrors a JSON config key."""

    experiment: str = 'Exp1'
    M: int = 10
    p: int = 20
    n0: int = 100
    n_m: int = 200
    A_size: int = 4
    h: float = 0.0
    delta_mode: str = 'dense'
    v_delta: int = 3
    sigma_target: float = 1.0
    sigma_sources: float = 1.0
    sigma_schedule: str = 'constant'
    cov_mode: str = 'identity'
    target_cov_mode: str = 'identity'
    B: int = 100
    seed: int = 20240601
    v: float = 0.5
    phi: Optional[float] = None
    n_test: int = 10_000
    base_experiment: Optional[str] = None

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.base_experiment is not None and self.base_experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"unknown base experiment {self.base_experiment!r}")
        for name in ('M', 'p', 'n0', 'n_m', 'B', 'n_test', 'v_delta'):
            value = getattr(self, name)
            if isinstance(value, (list, tuple)):
                raise ConfigInvalid(f"{name} holds a list; expand the grid first")
            if int(value) != value or value < 1:
                raise ConfigInvalid(f"{name} must be a positive integer, got {value!r}")
        if isinstance(self.h, (list, tuple)) or isinstance(self.A_size, (list, tuple)):
            raise ConfigInvalid("h and A_size must be scalars; expand the grid first")
        if not self.h >= 0:
            raise ConfigInvalid(f"h must be nonnegative, got {self.h}")
        if int(self.A_size) != self.A_size or not 0 <= self.A_size <= self.M:
            raise ConfigInvalid(f"A_size must lie in 0..M={self.M}, got {self.A_size}")
        if self.delta_mode not in DELTA_MODES:
            raise ConfigInvalid(f"delta_mode must be one of {DELTA_MODES}")
        if self.delta_mode == 'sparse' and self.v_delta > self.p:
            raise ConfigInvalid(f"v_delta={self.v_delta} exceeds p={self.p}")
        if self.sigma_schedule not in SIGMA_SCHEDULES:
            raise ConfigInvalid(f"sigma_schedule must be one of {SIGMA_SCHEDULES}")
        if self.cov_mode not in ('identity', 'toeplitz_band') or self.target_cov_mode not in ('identity', 'ar'):
            raise ConfigInvalid(
                f"cov_mode must be identity|toeplitz_band and target_cov_mode identity|ar, "
                f"got {self.cov_mode!r}/{self.target_cov_mode!r}")
        if not (self.sigma_target > 0 and self.sigma_sources > 0):
            raise ConfigInvalid("noise scales must be positive")
        if self.seed < 0:
            raise ConfigInvalid(f"seed must be nonnegative, got {self.seed}")
        # validates v and phi
        CriterionConfig(v=self.v, phi=self.phi)

    @property
    def design(self) -> str:
        """Experiment whose data-generating process is used."""
        if self.experiment in ('Exp5', 'WeightConv', 'Normality'):
            return self.base_experiment or EXPERIMENT_DEFAULTS[self.experiment]['base_experiment']
        return self.experiment

    @property
    def criterion(self) -> CriterionConfig:
        return CriterionConfig(v=self.v, phi=self.phi)

    @classmethod
    def from_dict(cls, raw: Mapping) -> 'ExperimentConfig':
        """
        Build a config from experiment defaults overridden by `raw`.

        Raises:
            ConfigInvalid: unknown key or invalid value
        """
        _check_keys(raw)
        experiment = raw.get('experiment', 'Exp1')
        merged = experiment_defaults(experiment, raw.get('base_experiment'))
        merged.update(raw)
        return cls(**merged)


def _check_keys(raw: Mapping) -> None:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {unknown}")


def expand_config_grid(raw: Mapping, default_grid: bool = True) -> List[ExperimentConfig]:
    """
    Expand list-valued grid fields into one config per point.

    Args:
        raw: Flat config mapping; grid fields may hold lists
        default_grid: Fill unset grid fields from SIMULATION_GRIDS

    Returns:
        Configs in product order over GRID_FIELDS
    """
    _check_keys(raw)
    experiment = raw.get('experiment', 'Exp1')
    if experiment not in EXPERIMENTS:
        raise ConfigInvalid(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    merged = dict(raw)
    if default_grid:
        for name, values in SIMULATION_GRIDS.get(experiment, {}).items():
            merged.setdefault(name, values)

    axes = []
    for name in GRID_FIELDS:
        value = merged.get(name)
        if isinstance(value, (list, tuple)):
            if len(value) == 0:
                raise ConfigInvalid(f"grid field {name} is empty")
            axes.append([(name, item) for item in value])
    configs = []
    for point in itertools.product(*axes):
        values = dict(merged)
        values.update(point)
        configs.append(ExperimentConfig.from_dict(values))
    return configs


# =============================================================================
# DATA GENERATION
# =============================================================================

def gen_covariance(cov_mode: str, m: int, p: int) -> np.ndarray:
    """
    Covariate covariance of one domain.

    Args:
        cov_mode: 'identity', 'toeplitz_band' or 'ar'
        m: Domain id (sets the band width of 'toeplitz_band')
        p: Dimension

    Returns:
        Symmetric p x p matrix
    """
    if cov_mode == 'identity':
        return np.eye(p)
    if cov_mode == 'toeplitz_band':
        first_row = np.zeros(p)
        first_row[0] = 1.0
        # band of 2m-1 entries, truncated at the last column
        band = min(2 * m - 1, p - 1)
        if band > 0:
            first_row[1:1 + band] = 1.0 / (m + 1)
        return linalg.toeplitz(first_row)
    if cov_mode == 'ar':
        lags = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
        return 0.5 ** lags
    raise ConfigInvalid(f"unknown covariance mode {cov_mode!r}")


def noise_scales(cfg: ExperimentConfig) -> np.ndarray:
    """Noise standard deviation per domain id 0..M."""
    ids = np.arange(1, cfg.M + 1, dtype=float)
    if cfg.sigma_schedule == 'linear':
        sources = 0.2 * ids
    elif cfg.sigma_schedule == 'geometric':
        sources = 1.2 ** (ids - 3)
    else:
        sources = np.full(cfg.M, cfg.sigma_sources)
    return np.concatenate(([cfg.sigma_target], sources))


@dataclass(frozen=True)
class GeneratedExperiment:
    """
    One replication's data and ground truth.

    Attributes:
        domains: Target (id 0) and sources 1..M
        beta0: True target coefficients
        betas: True coefficients per domain id, (M+1) x p
        sigmas: True noise standard deviation per domain id
        informative_ids: Source ids generated close to the target
    """

    domains: List[DomainData]
    beta0: np.ndarray
    betas: np.ndarray
    sigmas: np.ndarray
    informative_ids: Tuple[int, ...] = ()

    @property
    def by_id(self) -> Dict[int, DomainData]:
        return {domain.id: domain for domain in self.domains}


def _draw_covariates(cfg: ExperimentConfig, replicate: int, domain: int, n: int, cov: np.ndarray,
                     purpose: str = 'covariates') -> np.ndarray:
    rng = domain_rng(cfg.seed, replicate, domain, purpose)
    Z = rng.standard_normal((n, cfg.p))
    if np.array_equal(cov, np.eye(cfg.p)):
        return Z
    return Z @ psd_sqrt(cov)


def _draw_contrast(cfg: ExperimentConfig, replicate: int, domain: int) -> np.ndarray:
    rng = domain_rng(cfg.seed, replicate, domain, 'contrast')
    delta = np.zeros(cfg.p)
    if cfg.delta_mode == 'sparse':
        coordinates = rng.choice(cfg.p, size=cfg.v_delta, replace=False)
        delta[coordinates] = rng.normal(0.0, cfg.h, size=cfg.v_delta)
        return delta
    direction = rng.standard_normal(cfg.p)
    if cfg.h == 0:
        return delta
    return cfg.h * direction / np.linalg.norm(direction)


def _target_coefficients(cfg: ExperimentConfig, replicate: int) -> np.ndarray:
    rng = domain_rng(cfg.seed, replicate, 0, 'coefficients')
    mean, sd = TARGET_COEFFICIENTS
    return rng.normal(mean, sd, size=cfg.p)


def _prefix_grams(grams: Sequence[np.ndarray]) -> List[np.ndarray]:
    return list(itertools.accumulate(grams))


def exp2_target_beta(grams: Sequence[np.ndarray], betas: np.ndarray, A_size: int) -> np.ndarray:
    """
    Target coefficients that the pooled non-informative candidates average
    to exactly, with uniform combination weights.

    Candidates are the true prefixes {0..m} in id order.

    Args:
        grams: Gram matrix per domain id 0..M
        betas: Coefficients per id; rows A_size+1..M are used
        A_size: Number of informative sources

    Returns:
        beta0 of length p
    """
    M = len(grams) - 1
    if A_size >= M:
        raise ConfigInvalid("the combination design needs at least one non-informative source")
    p = grams[0].shape[0]
    prefix = _prefix_grams(grams)
    rho = 1.0 / (M - A_size)
    left = np.eye(p)
    right = np.zeros(p)
    moment = np.zeros(p)
    for m in range(A_size + 1, M + 1):
        moment = moment + grams[m] @ betas[m]
        left -= rho * solve_gram(prefix[m], prefix[A_size], index=m)
        right += rho * solve_gram(prefix[m], moment, index=m)
    try:
        return linalg.solve(left, right)
    except linalg.LinAlgError:
        raise RankDeficient(0.0)


def exp2_fixed_point_residual(domains: Sequence[DomainData],
                              beta0: np.ndarray,
                              betas: np.ndarray,
                              A_size: int) -> float:
    """
    Relative residual of beta0 = sum_m rho_m G[m]^{-1}(G[A] beta0 + sum_j G_j beta_j).

    Returns:
        ||beta0 - combination|| / ||beta0||
    """
    ordered = sorted(domains, key=lambda domain: domain.id)
    grams = [domain.X.T @ domain.X for domain in ordered]
    M = len(grams) - 1
    prefix = _prefix_grams(grams)
    rho = 1.0 / (M - A_size)
    combination = np.zeros_like(beta0)
    moment = np.zeros_like(beta0)
    for m in range(A_size + 1, M + 1):
        moment = moment + grams[m] @ betas[m]
        combination += rho * solve_gram(prefix[m], prefix[A_size] @ beta0 + moment, index=m)
    return float(np.linalg.norm(beta0 - combination) / max(np.linalg.norm(beta0), 1e-300))


def gen_experiment(cfg: ExperimentConfig, replicate: int) -> GeneratedExperiment:
    """
    Generate one replication deterministically from (cfg.seed, replicate).

    Sources 1..A_size are informative; the remaining sources are unrelated
    (Exp1 design) or combine to the target (fixed-point designs).

    Args:
        cfg: Experiment configuration
        replicate: Replication index

    Returns:
        GeneratedExperiment
    """
    design = cfg.design
    sizes = [cfg.n0] + [cfg.n_m] * cfg.M
    covariances = [gen_covariance(cfg.target_cov_mode, 0, cfg.p)]
    covariances += [gen_covariance(cfg.cov_mode, m, cfg.p) for m in range(1, cfg.M + 1)]
    designs = [_draw_covariates(cfg, replicate, m, sizes[m], covariances[m]) for m in range(cfg.M + 1)]

    family = 'fixed_point' if design in FIXED_POINT_DESIGNS else 'Exp1'
    betas = np.zeros((cfg.M + 1, cfg.p))
    unrelated_mean, unrelated_sd = UNRELATED_COEFFICIENTS[family]
    for m in range(cfg.A_size + 1, cfg.M + 1):
        rng = domain_rng(cfg.seed, replicate, m, 'coefficients')
        betas[m] = rng.normal(unrelated_mean, unrelated_sd, size=cfg.p)

    if family == 'fixed_point' and cfg.A_size < cfg.M:
        grams = [X.T @ X for X in designs]
        beta0 = exp2_target_beta(grams, betas, cfg.A_size)
    else:
        beta0 = _target_coefficients(cfg, replicate)
    betas[0] = beta0
    for m in range(1, cfg.A_size + 1):
        betas[m] = beta0 + _draw_contrast(cfg, replicate, m)

    sigmas = noise_scales(cfg)
    domains = []
    for m, X in enumerate(designs):
        noise = domain_rng(cfg.seed, replicate, m, 'noise').standard_normal(sizes[m])
        domains.append(DomainData(id=m, X=X, y=X @ betas[m] + sigmas[m] * noise))
    return GeneratedExperiment(
        domains=domains,
        beta0=beta0,
        betas=betas,
        sigmas=sigmas,
        informative_ids=tuple(range(1, cfg.A_size + 1)),
    )


def target_second_moment(cfg: ExperimentConfig, replicate: int) -> np.ndarray:
    """Empirical second moment of n_test fresh target covariate draws."""
    cov = gen_covariance(cfg.target_cov_mode, 0, cfg.p)
    X_test = _draw_covariates(cfg, replicate, 0, cfg.n_test, cov, purpose='test')
    return X_test.T @ X_test / cfg.n_test


# =============================================================================
# BASELINES AND METRICS
# =============================================================================

def baseline_ols_tar(domains: Sequence[DomainData]) -> np.ndarray:
    """OLS on the target domain alone."""
    target = next((domain for domain in domains if domain.id == 0), None)
    if target is None:
        raise ConfigInvalid("OLS-Tar needs the target domain (id 0)")
    return np.array(ols_fit(target).beta_hat)


def baseline_ols_pool(domains: Sequence[DomainData]) -> np.ndarray:
    """OLS on every domain stacked together."""
    mapping = {domain.id: domain for domain in domains}
    X, y = stack_domains(mapping, sorted(mapping))
    G = X.T @ X
    return solve_gram(0.5 * (G + G.T), X.T @ y)


@dataclass
class MethodMetrics:
    """Errors of one method in one replication; NaN metrics mark a failure."""

    method: str
    mse: float = math.nan
    mspe: float = math.nan
    weights: Optional[np.ndarray] = None
    m_s_hat: Optional[int] = None
    error: Optional[str] = None
    privacy_violation: bool = False


@dataclass
class ReplicationMetrics:
    """All method metrics of one replication, or the reason it failed."""

    replicate: int
    per_method: Dict[str, MethodMetrics] = field(default_factory=dict)
    failure: Optional[str] = None


def _score(method: str, beta: np.ndarray, beta0: np.ndarray, second_moment: np.ndarray,
           fit: Optional[FitResult] = None, k: int = 0) -> MethodMetrics:
    error = beta - beta0
    metrics = MethodMetrics(
        method=method,
        mse=float(error @ error),
        mspe=float(max(error @ second_moment @ error, 0.0)),
    )
    if fit is not None:
        metrics.weights = fit.full_weights(k)
        metrics.m_s_hat = fit.m_s_hat
    return metrics


def run_single_replication(cfg: ExperimentConfig, replicate: int,
                           methods: Sequence[str] = tuple(METHODS),
                           summaries_only: bool = False) -> ReplicationMetrics:
    """
    Generate one replication and score every requested method on it.

    Generation or candidate failures fail the whole replication; estimator
    failures are recorded per method. With `summaries_only` the sources'
    raw rows are withheld from the estimators.
    """
    record = ReplicationMetrics(replicate=replicate)
    try:
        generated = gen_experiment(cfg, replicate)
        summaries = summarize_domains(generated.domains)
        candidates = candidates_from_summaries(summaries)
    except TransMAError as exc:
        logger.warning("replicate %d failed: %s", replicate, exc)
        record.failure = str(exc)
        return record

    second_moment = target_second_moment(cfg, replicate)
    domains = generated.by_id
    if summaries_only:
        domains = {j: (data if j == 0 else None) for j, data in domains.items()}
    sigma2 = {summary.id: summary.sigma2_hat for summary in summaries}
    k = len(candidates)

    mai: Optional[FitResult] = None
    mai_error: Optional[str] = None
    if any(method.startswith('trans-') for method in methods):
        try:
            mai = fit_trans_mai(domains[0], candidates, cfg.criterion, sigma2_target=sigma2[0])
        except TransMAError as exc:
            mai_error = str(exc)

    for method in methods:
        try:
            if method == 'ols-tar':
                record.per_method[method] = _score(method, summaries[0].beta_hat, generated.beta0, second_moment)
            elif method == 'ols-pool':
                _, beta_pool = aggregate_cube(summaries, [s.id for s in summaries])
                record.per_method[method] = _score(method, beta_pool, generated.beta0, second_moment)
            elif mai is None:
                record.per_method[method] = MethodMetrics(method=method, error=mai_error)
            elif method == 'trans-mai':
                record.per_method[method] = _score(method, mai.beta, generated.beta0, second_moment, mai, k)
            elif method in ('trans-macs', 'trans-mac'):
                fitter = fit_trans_macs if method == 'trans-macs' else fit_trans_mac
                fit = fitter(domains, candidates, m_s=mai.m_s_hat, sigma2_by_source=sigma2)
                record.per_method[method] = _score(method, fit.beta, generated.beta0, second_moment, fit, k)
            else:
                raise ConfigInvalid(f"unknown method {method!r}")
        except PrivacyViolation as exc:
            record.per_method[method] = MethodMetrics(method=method, error=str(exc), privacy_violation=True)
        except TransMAError as exc:
            logger.debug("replicate %d, %s failed: %s", replicate, method, exc)
            record.per_method[method] = MethodMetrics(method=method, error=str(exc))
    return record


@dataclass
class ReplicationRun:
    """Records of every replication plus their summary table."""

    config: ExperimentConfig
    records: List[ReplicationMetrics]
    summary: pd.DataFrame
    weights: pd.DataFrame

    @property
    def privacy_violations(self) -> int:
        return sum(metrics.privacy_violation
                   for record in self.records for metrics in record.per_method.values())


def config_point(cfg: ExperimentConfig) -> Dict:
    """Columns that identify a config point in result tables."""
    return {'experiment': cfg.experiment, 'h': cfg.h, 'A_size': cfg.A_size,
            'n0': cfg.n0, 'n_m': cfg.n_m, 'p': cfg.p, 'M': cfg.M}


def metrics_frame(records: Sequence[ReplicationMetrics], methods: Sequence[str]) -> pd.DataFrame:
    """Long table: one row per (replicate, method)."""
    rows = []
    for record in records:
        for method in methods:
            metrics = record.per_method.get(method, MethodMetrics(method=method, error=record.failure))
            rows.append({
                'replicate': record.replicate,
                'method': method,
                'mse': metrics.mse,
                'mspe': metrics.mspe,
                'm_s_hat': metrics.m_s_hat,
                'error': metrics.error,
            })
    return pd.DataFrame(rows, columns=['replicate', 'method', 'mse', 'mspe', 'm_s_hat', 'error'])


def _band(values: pd.Series) -> Tuple[float, float, float]:
    values = values.dropna().to_numpy()
    if values.size == 0:
        return math.nan, math.nan, math.nan
    return float(values.mean()), float(np.percentile(values, 2.5)), float(np.percentile(values, 97.5))


def summarize_metrics(records: Sequence[ReplicationMetrics],
                      cfg: ExperimentConfig,
                      methods: Sequence[str]) -> pd.DataFrame:
    """
    Mean and 2.5/97.5 percentile band of MSE and MSPE per method.

    Returns:
        One row per method with completed and failed replication counts
    """
    frame = metrics_frame(records, methods)
    rows = []
    for method in methods:
        subset = frame[frame['method'] == method]
        mean_mse, mse_lo, mse_hi = _band(subset['mse'])
        mean_mspe, mspe_lo, mspe_hi = _band(subset['mspe'])
        completed = int(subset['mse'].notna().sum())
        row = config_point(cfg)
        row.update({
            'method': method,
            'mean_mse': mean_mse, 'mse_lo': mse_lo, 'mse_hi': mse_hi,
            'mean_mspe': mean_mspe, 'mspe_lo': mspe_lo, 'mspe_hi': mspe_hi,
            'completed': completed, 'failed': len(records) - completed,
        })
        rows.append(row)
    return pd.DataFrame(rows)


def weights_frame(records: Sequence[ReplicationMetrics], cfg: ExperimentConfig) -> pd.DataFrame:
    """Full candidate weights of the averaging methods, one row per replicate and method."""
    point = config_point(cfg)
    columns = list(point) + ['replicate', 'method'] + [f'w_{m}' for m in range(cfg.M + 1)] + ['m_s_hat']
    rows = []
    for record in records:
        for method, metrics in record.per_method.items():
            if metrics.weights is None:
                continue
            row = {**point, 'replicate': record.replicate, 'method': method}
            row.update({f'w_{m}': float(w) for m, w in enumerate(metrics.weights)})
            row['m_s_hat'] = metrics.m_s_hat
            rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def run_replications(cfg: ExperimentConfig,
                     methods: Sequence[str] = tuple(METHODS),
                     threads: int = 1,
                     summaries_only: bool = False) -> ReplicationRun:
    """
    Run cfg.B independent replications.

    Args:
        cfg: Experiment configuration
        methods: Methods to score
        threads: Worker threads
        summaries_only: Withhold the sources' raw rows from the estimators

    Returns:
        ReplicationRun with records in replicate order
    """
    methods = list(methods)
    if not methods:
        raise ConfigInvalid("no methods requested")
    unknown = [method for method in methods if method not in METHODS]
    if unknown:
        raise ConfigInvalid(f"unknown methods {unknown}; choose from {METHODS}")

    logger.info("running %s h=%g |A|=%d n0=%d, %d replications on %d threads",
                cfg.experiment, cfg.h, cfg.A_size, cfg.n0, cfg.B, threads)
    if threads == 1:
        records = [run_single_replication(cfg, r, methods, summaries_only) for r in range(cfg.B)]
    else:
        records = Parallel(n_jobs=threads, prefer="threads")(
            delayed(run_single_replication)(cfg, r, methods, summaries_only) for r in range(cfg.B)
        )
    records = sorted(records, key=lambda record: record.replicate)
    failed = sum(record.failure is not None for record in records)
    if failed:
        logger.warning("%d of %d replications failed and are excluded", failed, cfg.B)
    return ReplicationRun(
        config=cfg,
        records=records,
        summary=summarize_metrics(records, cfg, methods),
        weights=weights_frame(records, cfg),
    )


def scaled_mspe(table: pd.DataFrame, group_columns: Sequence[str] = ()) -> pd.DataFrame:
    """
    Subtract the best method's MSPE within each replicate.

    Args:
        table: Long table with 'replicate', 'method' and 'mspe' columns
        group_columns: Extra columns identifying independent groups (e.g. target)

    Returns:
        Copy of `table` with a 'scaled_mspe' column
    """
    keys = list(group_columns) + ['replicate']
    out = table.copy()
    out['scaled_mspe'] = out['mspe'] - out.groupby(keys)['mspe'].transform('min')
    return out


# =============================================================================
# WEIGHT CONVERGENCE STUDY
# =============================================================================

@dataclass
class WeightConvergence:
    """Mean non-informative weight per (v, n0) and the fitted power laws."""

    table: pd.DataFrame
    fit: pd.DataFrame


def fit_power_law(n: Sequence[float], values: Sequence[float],
                  refine_iterations: int = WEIGHT_CONVERGENCE['refine_iterations']) -> Dict[str, float]:
    """
    Fit values ~ c * n^(-a).

    Ordinary least squares on logs gives (c, a); a nonlinear least-squares
    pass on the original scale refines them. Nonpositive values are dropped.

    Returns:
        Dict with c_v, a_v (log fit) and c_v_refined, a_v_refined
    """
    n = np.asarray(n, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = np.isfinite(values) & (values > 0)
    result = {'c_v': math.nan, 'a_v': math.nan, 'c_v_refined': math.nan, 'a_v_refined': math.nan}
    if keep.sum() < 2:
        return result
    line = stats.linregress(np.log(n[keep]), np.log(values[keep]))
    c, a = math.exp(line.intercept), -line.slope
    result.update(c_v=c, a_v=a, c_v_refined=c, a_v_refined=a)
    try:
        (c_ref, a_ref), _ = optimize.curve_fit(
            lambda x, c_, a_: c_ * x ** (-a_), n[keep], values[keep],
            p0=(c, a), maxfev=refine_iterations * 10)
        result.update(c_v_refined=float(c_ref), a_v_refined=float(a_ref))
    except (RuntimeError, ValueError) as exc:
        logger.warning("power-law refinement failed, keeping the log fit: %s", exc)
    return result


def _noninformative_weight_sums(cfg: ExperimentConfig, replicate: int,
                                v_grid: Sequence[float]) -> List[float]:
    try:
        generated = gen_experiment(cfg, replicate)
        summaries = summarize_domains(generated.domains)
        candidates = candidates_from_summaries(summaries)
    except TransMAError as exc:
        logger.debug("weight study replicate %d failed: %s", replicate, exc)
        return [math.nan] * len(v_grid)
    outside = ~informative_mask(candidates, generated.informative_ids)
    target = generated.domains[0]
    sums = []
    for v in v_grid:
        try:
            fit = fit_trans_mai(target, candidates, CriterionConfig(v=v, phi=cfg.phi),
                                sigma2_target=summaries[0].sigma2_hat)
            sums.append(float(fit.full_weights(len(candidates))[outside].sum()))
        except TransMAError as exc:
            logger.debug("weight study replicate %d, v=%g failed: %s", replicate, v, exc)
            sums.append(math.nan)
    return sums


def weight_convergence_study(cfg: ExperimentConfig,
                             v_grid: Sequence[float] = tuple(WEIGHT_CONVERGENCE['v_grid']),
                             n0_grid: Sequence[int] = tuple(WEIGHT_CONVERGENCE['n0_grid']),
                             threads: int = 1) -> WeightConvergence:
    """
    Track how much Trans-MAI weight lands on non-informative candidates as
    the target grows (sources grow with it, n_m = n0).

    Args:
        cfg: Base configuration (design, M, p, A_size, B, seed, phi)
        v_grid: Criterion mixes to compare
        n0_grid: Target sizes

    Returns:
        WeightConvergence with columns (v, n0, mean_weight, completed) and
        one power-law fit per v
    """
    rows = []
    for n0 in n0_grid:
        point = replace(cfg, n0=int(n0), n_m=int(n0))
        logger.info("weight study n0=%d, %d replications", n0, point.B)
        if threads == 1:
            sums = [_noninformative_weight_sums(point, r, v_grid) for r in range(point.B)]
        else:
            sums = Parallel(n_jobs=threads, prefer="threads")(
                delayed(_noninformative_weight_sums)(point, r, v_grid) for r in range(point.B))
        sums = np.asarray(sums, dtype=float).reshape(point.B, len(v_grid))
        for j, v in enumerate(v_grid):
            column = sums[:, j]
            completed = int(np.isfinite(column).sum())
            mean = float(np.nanmean(column)) if completed else math.nan
            rows.append({'v': float(v), 'n0': int(n0), 'mean_weight': mean, 'completed': completed})
    table = pd.DataFrame(rows, columns=['v', 'n0', 'mean_weight', 'completed'])

    fits = []
    for v in v_grid:
        subset = table[table['v'] == float(v)]
        fitted = fit_power_law(subset['n0'], subset['mean_weight'])
        fits.append({'v': float(v), **fitted})
    return WeightConvergence(table=table, fit=pd.DataFrame(fits))


# =============================================================================
# NORMALITY STUDY
# =============================================================================

@dataclass
class NormalityStudy:
    """Statistic per replicate, its moments and histogram."""

    values: pd.DataFrame
    summary: Dict[str, float]
    histogram: pd.DataFrame


def _normality_replicate(cfg: ExperimentConfig, replicate: int, psi: np.ndarray) -> float:
    try:
        generated = gen_experiment(cfg, replicate)
        summaries = summarize_domains(generated.domains)
        candidates = candidates_from_summaries(summaries)
        fit = fit_trans_mai(generated.domains[0], candidates, cfg.criterion,
                            sigma2_target=summaries[0].sigma2_hat)
        true_variances = {m: float(s ** 2) for m, s in enumerate(generated.sigmas)}
        report = normality_statistic(fit, candidates, generated.by_id, psi, true_variances, generated.beta0)
        return report.statistic
    except TransMAError as exc:
        logger.debug("normality replicate %d failed: %s", replicate, exc)
        return math.nan


def histogram_frame(values: np.ndarray,
                    bins: int = NORMALITY['histogram_bins'],
                    value_range: Tuple[float, float] = NORMALITY['histogram_range']) -> pd.DataFrame:
    counts, edges = np.histogram(values[np.isfinite(values)], bins=bins, range=value_range)
    return pd.DataFrame({'bin_left': edges[:-1], 'bin_right': edges[1:], 'count': counts})


def normality_study(cfg: ExperimentConfig, threads: int = 1,
                    psi: Optional[np.ndarray] = None) -> NormalityStudy:
    """
    Replicate Trans-MAI fits and standardize each error along psi with the
    true noise variances. psi defaults to p^{-1/2} * 1.

    Returns:
        NormalityStudy with mean, std, completed and failed counts

    Raises:
        ConfigInvalid: psi is not a unit vector of length p
    """
    if psi is None:
        psi = np.full(cfg.p, 1.0 / math.sqrt(cfg.p))
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (cfg.p,) or abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ConfigInvalid(f"psi must be a unit vector of length p={cfg.p}")
    logger.info("normality study: %d replications", cfg.B)
    if threads == 1:
        statistics = [_normality_replicate(cfg, r, psi) for r in range(cfg.B)]
    else:
        statistics = Parallel(n_jobs=threads, prefer="threads")(
            delayed(_normality_replicate)(cfg, r, psi) for r in range(cfg.B))
    statistics = np.asarray(statistics, dtype=float)
    finite = statistics[np.isfinite(statistics)]
    summary = {
        'mean': float(finite.mean()) if finite.size else math.nan,
        'std': float(finite.std(ddof=1)) if finite.size > 1 else math.nan,
        'completed': int(finite.size),
        'failed': int(statistics.size - finite.size),
    }
    values = pd.DataFrame({'replicate': np.arange(cfg.B), 'T': statistics})
    return NormalityStudy(values=values, summary=summary, histogram=histogram_frame(statistics))
