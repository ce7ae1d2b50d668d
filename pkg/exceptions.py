"""
Error hierarchy for the transfer model averaging toolkit.

Every error carries the process exit code the command line reports for it:
2 for configuration and input problems, 3 for numerical failures.
"""

from typing import Optional

import numpy as np

from settings import EXIT_CODES


class TransMAError(Exception):
    """Base class for all toolkit errors."""

    exit_code = EXIT_CODES['config']


# =============================================================================
# CONFIGURATION AND INPUT
# =============================================================================

class ConfigurationError(TransMAError):
    """Invalid configuration, input file or call arguments."""

    exit_code = EXIT_CODES['config']


class ConfigInvalid(ConfigurationError):
    pass


class DimensionMismatch(ConfigurationError):
    pass


class UnknownId(ConfigurationError):
    pass


class MissingTarget(ConfigurationError):
    pass


class HeaderMismatch(ConfigurationError):
    pass


class PrivacyViolation(ConfigurationError):
    """Raw rows were required for a domain that only shared summaries."""

    def __init__(self, domain_id: int, method: str = ""):
        self.domain_id = domain_id
        self.method = method
        where = f" for {method}" if method else ""
        super().__init__(f"raw rows of domain {domain_id} are not available{where}")


class ParseError(ConfigurationError):
    """A CSV cell could not be parsed; line and column are 1-based."""

    def __init__(self, path: str, line: int, column: int, detail: str):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}:{column}: {detail}")


# =============================================================================
# NUMERICAL
# =============================================================================

class NumericalError(TransMAError):
    """A numerical gate failed."""

    exit_code = EXIT_CODES['numerical']


class RankDeficient(NumericalError):
    """Gram matrix failed the reciprocal-condition gate."""

    def __init__(self, rcond: float, index: Optional[int] = None):
        self.rcond = rcond
        self.index = index
        where = f" (candidate {index})" if index is not None else ""
        super().__init__(f"Gram matrix is numerically singular{where}: rcond={rcond:.3e}")


class NotPSD(NumericalError):
    pass


class SingularDenominator(NumericalError):
    pass


class NotConverged(NumericalError):
    """Simplex QP hit the iteration cap; carries the best iterate found."""

    def __init__(self, best: np.ndarray, gap: float, iterations: int):
        self.best = best
        self.gap = gap
        self.iterations = iterations
        super().__init__(
            f"simplex QP did not converge in {iterations} iterations (gap={gap:.3e})")
