"""Shared fixtures: small seeded multi-domain regression problems."""

from typing import Callable, List, Sequence

import numpy as np
import pytest

from candidate_domains import candidates_from_summaries
from regression_cube import DomainData, summarize_domains


def make_domains(rng: np.random.Generator,
                 betas: Sequence[np.ndarray],
                 sizes: Sequence[int],
                 sigma: float = 1.0) -> List[DomainData]:
    """One domain per coefficient vector, id = position, Gaussian design."""
    domains = []
    for j, (beta, n) in enumerate(zip(betas, sizes)):
        X = rng.standard_normal((n, len(beta)))
        y = X @ beta + sigma * rng.standard_normal(n)
        domains.append(DomainData(id=j, X=X, y=y))
    return domains


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def domain_factory(rng) -> Callable[..., List[DomainData]]:
    def factory(betas, sizes, sigma=1.0):
        return make_domains(rng, [np.asarray(b, dtype=float) for b in betas], sizes, sigma)
    return factory


@pytest.fixture
def transfer_problem(domain_factory):
    """
    Target plus four sources in p = 3: two sources share the target
    coefficients, two are far away.
    """
    beta0 = np.array([1.0, -2.0, 0.5])
    betas = [beta0, beta0, beta0 + 0.01, np.array([4.0, 3.0, -2.0]), np.array([-3.0, 0.0, 5.0])]
    domains = domain_factory(betas, [60, 120, 120, 120, 120])
    summaries = summarize_domains(domains)
    return {
        'beta0': beta0,
        'domains': domains,
        'by_id': {d.id: d for d in domains},
        'summaries': summaries,
        'candidates': candidates_from_summaries(summaries),
    }
