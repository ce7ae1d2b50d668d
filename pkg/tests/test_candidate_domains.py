"""Tests for contrast ranking and nested candidate construction."""

from dataclasses import replace

import numpy as np
import pytest

from candidate_domains import build_candidates, candidates_from_summaries, contrast_norms, informative_mask
from exceptions import ConfigInvalid, MissingTarget
from regression_cube import DomainSummary, aggregate_cube


def summary(domain_id, beta, n=10):
    return DomainSummary(id=domain_id, n=n, G=np.eye(len(beta)) * n, beta_hat=np.asarray(beta, float), sigma2_hat=1.0)


class TestContrastNorms:
    """Ordering of sources by distance to the target."""

    def test_ascending_order_target_first(self):
        summaries = [summary(0, [0.0, 0.0]), summary(1, [3.0, 0.0]), summary(2, [1.0, 0.0]), summary(3, [0.0, 2.0])]
        table = contrast_norms(summaries)
        assert table.ordered_ids == [0, 2, 3, 1]
        np.testing.assert_allclose(table.norms, [0.0, 3.0, 1.0, 2.0])

    def test_ties_break_by_smaller_id(self):
        summaries = [summary(0, [0.0]), summary(2, [1.0]), summary(1, [-1.0])]
        assert contrast_norms(summaries).ordered_ids == [0, 1, 2]

    def test_source_identical_to_target_stays_behind_target(self):
        """A zero-norm source never displaces the target."""
        summaries = [summary(1, [1.0, 1.0]), summary(0, [1.0, 1.0])]
        assert contrast_norms(summaries).ordered_ids == [0, 1]

    def test_missing_target(self):
        with pytest.raises(MissingTarget):
            contrast_norms([summary(1, [1.0]), summary(2, [0.0])])

    def test_duplicate_ids(self):
        with pytest.raises(ConfigInvalid):
            contrast_norms([summary(0, [1.0]), summary(1, [0.0]), summary(1, [2.0])])


class TestBuildCandidates:
    """Nested pooling in contrast order."""

    def test_nested_members_and_sizes(self, transfer_problem):
        candidates = transfer_problem['candidates']
        assert [c.m for c in candidates] == list(range(5))
        assert candidates[0].members == (0,)
        for previous, current in zip(candidates, candidates[1:]):
            assert current.members[:-1] == previous.members
        assert [c.N for c in candidates] == [60, 180, 300, 420, 540]

    def test_close_sources_pooled_first(self, transfer_problem):
        """Sources generated with the target coefficients rank ahead of distant ones."""
        assert set(transfer_problem['candidates'][2].members) == {0, 1, 2}

    def test_candidates_match_direct_aggregation(self, transfer_problem):
        summaries = transfer_problem['summaries']
        for candidate in transfer_problem['candidates']:
            G, beta = aggregate_cube(summaries, candidate.members)
            np.testing.assert_allclose(candidate.G_agg, G, rtol=1e-12)
            np.testing.assert_allclose(candidate.beta_agg, beta, rtol=1e-10)

    def test_target_candidate_is_target_ols(self, transfer_problem):
        target = transfer_problem['summaries'][0]
        first = transfer_problem['candidates'][0]
        assert np.array_equal(first.beta_agg, target.beta_hat)

    def test_build_from_explicit_table(self, transfer_problem):
        summaries = transfer_problem['summaries']
        explicit = build_candidates(summaries, contrast_norms(summaries))
        assert [c.members for c in explicit] == [c.members for c in candidates_from_summaries(summaries)]

    def test_relabelled_sources_give_same_candidates(self, transfer_problem):
        """Renaming and reordering sources only renames the candidate members."""
        relabel = {0: 0, 1: 4, 2: 3, 3: 2, 4: 1}
        renamed = [replace(s, id=relabel[s.id]) for s in reversed(transfer_problem['summaries'])]
        for original, moved in zip(transfer_problem['candidates'], candidates_from_summaries(renamed)):
            assert moved.members == tuple(relabel[j] for j in original.members)
            assert moved.N == original.N
            np.testing.assert_allclose(moved.G_agg, original.G_agg, rtol=1e-12, atol=1e-9)
            np.testing.assert_allclose(moved.beta_agg, original.beta_agg, rtol=1e-10, atol=1e-12)


class TestInformativeMask:
    """Split of candidates by true informative ids."""

    def test_prefix_of_informative_sources(self, transfer_problem):
        mask = informative_mask(transfer_problem['candidates'], informative_ids=(1, 2))
        assert mask.tolist() == [True, True, True, False, False]

    def test_no_informative_sources(self, transfer_problem):
        mask = informative_mask(transfer_problem['candidates'], informative_ids=())
        assert mask.tolist() == [True, False, False, False, False]
