"""
Transfer Model Averaging Settings
=================================

Central place for the numeric tolerances, solver parameters, experiment
defaults and output conventions shared by every module of the toolkit,
so that every estimator, study and CSV file uses the same gates and formats.

Usage:
    from settings import TOLERANCES, configure_logging
    configure_logging()
"""

import logging
import math
import os
from typing import Dict, List, Optional

# =============================================================================
# NUMERIC TOLERANCES
# =============================================================================

TOLERANCES = {
    'rcond_min': 1e-12,            # reciprocal condition below this -> RankDeficient
    'symmetry_rel': 1e-12,         # Gram symmetry, relative
    'psd_floor_rel': 1e-10,        # min eigenvalue >= -floor * max eigenvalue (PSD roots)
    'qp_psd_floor_rel': 1e-8,      # same floor for assembled quadratic programs
    'qp_symmetry': 1e-10,          # SimplexQP.A symmetry
    'simplex_sum': 1e-10,          # sum of weights == 1
    'negative_clamp': 1e-12,       # entries in (-clamp, 0) are set to 0
    'denominator_min': 1e-14,      # normality statistic denominator
}

# =============================================================================
# SIMPLEX QP SOLVER
# =============================================================================

SOLVER = {
    'max_iterations': 100_000,
    'gap_tolerance': 1e-10,        # stop when FW gap <= tol * (1 + |objective|)
    'support_threshold': 1e-12,    # weights above this are on the active support
    'polish_rounds': 10,           # active-set refinement passes
}

# =============================================================================
# EXPERIMENT DEFAULTS
# =============================================================================

# Shared by every experiment unless overridden below.
BASE_EXPERIMENT = {
    'M': 10,
    'p': 20,
    'n0': 100,
    'n_m': 200,
    'A_size': 4,
    'h': 0.0,
    'delta_mode': 'dense',
    'v_delta': 3,
    'sigma_target': 1.0,
    'sigma_sources': 1.0,
    'sigma_schedule': 'constant',
    'cov_mode': 'identity',
    'target_cov_mode': 'identity',
    'B': 100,
    'seed': 20240601,
    'v': 0.5,
    'phi': None,                   # None -> log(n0)
    'n_test': 10_000,
    'base_experiment': None,
}

EXPERIMENT_DEFAULTS: Dict[str, Dict] = {
    'Exp1': {},
    'Exp2': {'sigma_target': 0.5, 'sigma_sources': 0.5},
    'Exp3': {'cov_mode': 'toeplitz_band', 'sigma_schedule': 'constant'},
    'Exp4': {'cov_mode': 'toeplitz_band', 'target_cov_mode': 'ar', 'sigma_schedule': 'linear'},
    'Exp5': {'p': 50, 'n0': 150, 'n_m': 100, 'A_size': 4, 'h': 0.12, 'base_experiment': 'Exp1'},
    'WeightConv': {'p': 10, 'A_size': 3, 'h': 0.0, 'n0': 100, 'n_m': 100,
                   'sigma_target': 0.5, 'sigma_sources': 0.5, 'B': 200,
                   'base_experiment': 'Exp2'},
    'Normality': {'A_size': 2, 'h': 0.0, 'n0': 200, 'n_m': 200, 'B': 500,
                  'base_experiment': 'Exp1'},
}

# Default sweeps used by `simulate` when the config leaves a field unset.
SIMULATION_GRIDS: Dict[str, Dict[str, List]] = {
    'Exp1': {'h': [0.0, 0.04, 0.08, 0.12], 'A_size': list(range(9))},
    'Exp2': {'h': [0.0, 0.04, 0.08, 0.12], 'A_size': list(range(9))},
    'Exp3': {'h': [0.0, 0.04, 0.08, 0.12], 'A_size': list(range(9))},
    'Exp4': {'h': [0.0, 0.04, 0.08, 0.12], 'A_size': list(range(9))},
    'Exp5': {'p': [50, 80], 'n0': [150, 200, 250], 'n_m': [100, 150, 200]},
}

WEIGHT_CONVERGENCE = {
    'v_grid': [0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0],
    'n0_grid': [20, 40, 60, 80, 100],
    'refine_iterations': 100,
}

NORMALITY = {
    'histogram_bins': 40,
    'histogram_range': (-4.0, 4.0),
}

# =============================================================================
# METHODS AND OUTPUT
# =============================================================================

METHODS = ['ols-tar', 'ols-pool', 'trans-mai', 'trans-macs', 'trans-mac']

OUTPUT = {
    'float_format': '%.17g',       # 17 significant digits survive a round trip
    'line_terminator': '\n',
    'summary_file': 'summary.csv',
    'weights_file': 'weights.csv',
    'normality_file': 'normality.csv',
}

EXIT_CODES = {
    'ok': 0,
    'config': 2,
    'numerical': 3,
}

SPLIT = {
    'train_fraction': 0.7,
    'repeats': 500,
}

THREADS_ENV = 'TRANSMA_THREADS'

LOG_FORMAT = '%(asctime)s %(levelname)-7s %(name)s: %(message)s'

# =============================================================================
# HELPERS
# =============================================================================

def default_phi(n0: int) -> float:
    """BIC-type sufficiency multiplier, log(n0)."""
    return math.log(n0)


def experiment_defaults(experiment: str, base_experiment: Optional[str] = None) -> Dict:
    """
    Get the full default field set for one experiment.

    The design of `base_experiment` (or the experiment's own default base) is
    applied first, then the experiment's own overrides.

    Args:
        experiment: Experiment name ('Exp1' ... 'Exp5', 'WeightConv', 'Normality')
        base_experiment: Experiment whose data-generating design is reused

    Returns:
        Dictionary of ExperimentConfig field values
    """
    own = EXPERIMENT_DEFAULTS.get(experiment, {})
    base = base_experiment or own.get('base_experiment')
    merged = dict(BASE_EXPERIMENT)
    if base and base != experiment:
        merged.update({k: v for k, v in EXPERIMENT_DEFAULTS.get(base, {}).items()
                       if k != 'base_experiment'})
    merged.update(own)
    merged['base_experiment'] = base
    merged['experiment'] = experiment
    return merged


def get_thread_count(cli_value: Optional[int] = None) -> int:
    """Resolve worker threads: CLI flag, then TRANSMA_THREADS, then 1."""
    if cli_value is not None:
        return max(1, int(cli_value))
    env_value = os.environ.get(THREADS_ENV)
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            logging.getLogger(__name__).warning(
                "ignoring non-integer %s=%r", THREADS_ENV, env_value)
    return 1


def configure_logging(verbose: bool = False) -> None:
    """
    Apply the logging setup used by the command line and the driver script.
    Call this once before running anything.
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)
