"""
Candidate Domain Construction
=============================

Ranks the sources by how far their OLS coefficients sit from the target's
and pools them one at a time into a nested sequence of candidate domains.
Candidate 0 is the target alone; candidate m adds the m-th closest source.
"""

import logging
from dataclasses import dataclass
from typing import Collection, List, Sequence

import numpy as np

from exceptions import ConfigInvalid, MissingTarget
from regression_cube import CandidateDomain, DomainSummary, aggregate_cube

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContrastTable:
    """
    Contrast norms ||beta_m - beta_0|| and the ascending order they induce.

    Attributes:
        ids: Domain id at each position (norms[i] belongs to ids[i])
        norms: Contrast norm per position; the target's is exactly 0
        rank: Positions sorted by ascending norm, ties by smaller id
    """

    ids: np.ndarray
    norms: np.ndarray
    rank: np.ndarray

    def __post_init__(self) -> None:
        for name in ('ids', 'norms', 'rank'):
            array = np.array(getattr(self, name), copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def ordered_ids(self) -> List[int]:
        """Domain ids in pooling order, target first."""
        return [int(self.ids[i]) for i in self.rank]


def contrast_norms(summaries: Sequence[DomainSummary]) -> ContrastTable:
    """
    Compute contrast norms against the target and their pooling order.

    Args:
        summaries: Summaries of target (id 0) and sources

    Returns:
        ContrastTable indexed like `summaries` sorted by id

    Raises:
        MissingTarget: no summary with id 0
    """
    ordered = sorted(summaries, key=lambda summary: summary.id)
    if not ordered or ordered[0].id != 0:
        raise MissingTarget("contrast norms need the target summary (id 0)")
    ids = np.array([summary.id for summary in ordered], dtype=int)
    if len(set(ids.tolist())) != len(ids):
        raise ConfigInvalid(f"duplicate domain ids: {ids.tolist()}")

    target_beta = ordered[0].beta_hat
    norms = np.array([np.linalg.norm(summary.beta_hat - target_beta) for summary in ordered])
    norms[0] = 0.0
    # lexsort uses the last key as primary
    rank = np.lexsort((ids, norms))
    # the target is placed first even if a source ties at exactly zero
    if rank[0] != 0:
        rank = np.concatenate(([0], rank[rank != 0]))
    return ContrastTable(ids=ids, norms=norms, rank=rank)


def build_candidates(summaries: Sequence[DomainSummary],
                     table: ContrastTable) -> List[CandidateDomain]:
    """
    Pool domains nestedly in contrast order.

    Args:
        summaries: Summaries of all domains
        table: Contrast ordering from contrast_norms

    Returns:
        Candidates 0..M, candidate m holding the first m+1 ranked ids

    Raises:
        RankDeficient: a pooled Gram is singular (index = offending candidate)
    """
    order = table.ordered_ids
    sizes = {summary.id: summary.n for summary in summaries}
    candidates = []
    for m in range(len(order)):
        members = tuple(order[:m + 1])
        G_agg, beta_agg = aggregate_cube(summaries, members, index=m)
        candidates.append(CandidateDomain(
            m=m,
            members=members,
            N=int(sum(sizes[j] for j in members)),
            G_agg=G_agg,
            beta_agg=beta_agg,
        ))
    logger.debug("built %d candidates, order %s", len(candidates), order)
    return candidates


def candidates_from_summaries(summaries: Sequence[DomainSummary]) -> List[CandidateDomain]:
    """Contrast ranking followed by nested pooling."""
    return build_candidates(summaries, contrast_norms(summaries))


def informative_mask(candidates: Sequence[CandidateDomain],
                     informative_ids: Collection[int]) -> np.ndarray:
    """Candidate m is informative iff every member is in `informative_ids`."""
    allowed = set(int(j) for j in informative_ids) | {0}
    return np.array([set(c.members) <= allowed for c in candidates], dtype=bool)
