from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

import cuedspeech as cs
from cuedspeech import evaluation


def alignment_cost_oracle(ref, hyp):
    """Minimum edit cost by enumerating every monotone matching.

    An alignment is a monotone matching between reference and hypothesis
    positions; matched unequal symbols are substitutions, unmatched reference
    symbols deletions, unmatched hypothesis symbols insertions.
    """
    n, m = len(ref), len(hyp)
    best = n + m  # empty matching
    for k in range(1, min(n, m) + 1):
        for ri in combinations(range(n), k):
            for hi in combinations(range(m), k):
                cost = (n - k) + (m - k) + sum(ref[a] != hyp[b] for a, b in zip(ri, hi))
                if cost < best:
                    best = cost
    return best


symbols = st.lists(st.sampled_from("abc"), min_size=0, max_size=6)


class TestAlign:
    def test_identity(self):
        stats = cs.align(list("abcdefg"), list("abcdefg"))
        assert stats == evaluation.AlignmentStats(7, 0, 0, 0)

    def test_single_deletion(self):
        # checked against the exhaustive matching oracle: cost 1, one deletion
        stats = cs.align(["a", "b", "c"], ["a", "c"])
        assert alignment_cost_oracle(["a", "b", "c"], ["a", "c"]) == 1
        assert stats == evaluation.AlignmentStats(3, 1, 0, 0)

    def test_empty_reference(self):
        stats = cs.align([], ["a", "a"])
        assert stats == evaluation.AlignmentStats(0, 0, 0, 2)

    def test_empty_hypothesis(self):
        stats = cs.align(["a", "b"], [])
        assert stats == evaluation.AlignmentStats(2, 2, 0, 0)

    def test_substitution_preferred_on_ties(self):
        # "ab" vs "cb": substitution a->c, not deletion+insertion
        stats = cs.align(["a", "b"], ["c", "b"])
        assert stats == evaluation.AlignmentStats(2, 0, 1, 0)

    @given(ref=symbols, hyp=symbols)
    @settings(max_examples=300, deadline=None)
    def test_total_cost_matches_exhaustive_oracle(self, ref, hyp):
        stats = cs.align(ref, hyp)
        total = stats.deletions + stats.substitutions + stats.insertions
        assert total == alignment_cost_oracle(ref, hyp)

    @given(ref=symbols, hyp=symbols)
    @settings(max_examples=150, deadline=None)
    def test_swapping_arguments_swaps_d_and_i(self, ref, hyp):
        a = cs.align(ref, hyp)
        b = cs.align(hyp, ref)
        assert a.deletions == b.insertions
        assert a.insertions == b.deletions
        assert a.substitutions == b.substitutions
        assert a.matches == b.matches


class TestAccuracy:
    def test_formula(self):
        assert cs.accuracy(evaluation.AlignmentStats(100, 10, 15, 5)) == pytest.approx(0.70)

    def test_perfect(self):
        assert cs.accuracy(evaluation.AlignmentStats(9, 0, 0, 0)) == 1.0

    def test_negative_when_insertions_dominate(self):
        assert cs.accuracy(evaluation.AlignmentStats(10, 0, 0, 12)) == pytest.approx(-0.2)

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError, match="empty reference"):
            cs.accuracy(evaluation.AlignmentStats(0, 0, 0, 0))

    @given(ref=st.lists(st.sampled_from("abc"), min_size=1, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_self_alignment_scores_one(self, ref):
        assert cs.accuracy(cs.align(ref, ref)) == 1.0


class TestWilsonInterval:
    def test_half_at_n100(self):
        low, high = cs.wilson_interval(0.5, 100)
        assert low == pytest.approx(0.4038, abs=1e-4)
        assert high == pytest.approx(0.5962, abs=1e-4)

    def test_zero_rate_clips_at_zero(self):
        low, high = cs.wilson_interval(0.0, 10)
        assert low == 0.0
        assert high > 0.0

    def test_width_shrinks_with_n(self):
        widths = []
        for n in (10, 100, 1000, 10000):
            low, high = cs.wilson_interval(0.709, n)
            widths.append(high - low)
        assert all(a > b for a, b in zip(widths, widths[1:]))

    def test_matches_independent_closed_form(self):
        # independently coded arrangement of the score interval
        def reference(p, n, z):
            denom = 1.0 + z * z / n
            centre = p + z * z / (2 * n)
            adj = z * np.sqrt((p * (1 - p) + z * z / (4 * n)) / n)
            return (centre - adj) / denom, (centre + adj) / denom

        for p in (0.0, 0.25, 0.5, 0.709, 1.0):
            for n in (10, 100, 1000):
                lo, hi = cs.wilson_interval(p, n)
                rlo, rhi = reference(p, n, 1.96)
                assert lo == pytest.approx(max(0.0, rlo), abs=1e-12)
                assert hi == pytest.approx(min(1.0, rhi), abs=1e-12)

    def test_rejects_empty_sample(self):
        with pytest.raises(ValueError):
            cs.wilson_interval(0.5, 0)


class TestKfoldSplit:
    def test_ordered_contiguous_blocks(self):
        plan = cs.kfold_split(20, 10, shuffled=False)
        assert plan.fold_indices(0) == [0, 1]
        assert plan.fold_indices(9) == [18, 19]

    def test_fold_sizes_differ_by_at_most_one(self):
        plan = cs.kfold_split(476, 10, shuffled=False)
        sizes = [len(plan.fold_indices(f)) for f in range(10)]
        assert sorted(sizes) == [47] * 4 + [48] * 6

    def test_shuffled_deterministic(self):
        a = cs.kfold_split(50, 5, shuffled=True, seed=3)
        b = cs.kfold_split(50, 5, shuffled=True, seed=3)
        assert a == b
        c = cs.kfold_split(50, 5, shuffled=True, seed=4)
        assert a != c

    def test_ordered_ignores_seed(self):
        a = cs.kfold_split(50, 5, shuffled=False, seed=1)
        b = cs.kfold_split(50, 5, shuffled=False, seed=2)
        assert a == b
        assert a.seed is None

    @given(n=st.integers(4, 60), k=st.integers(2, 8), shuffled=st.booleans())
    @settings(max_examples=60, deadline=None)
    def test_assignments_partition_the_corpus(self, n, k, shuffled):
        if k > n:
            return
        plan = cs.kfold_split(n, k, shuffled=shuffled, seed=0)
        assert len(plan.assignments) == n
        sizes = [len(plan.fold_indices(f)) for f in range(k)]
        assert sum(sizes) == n
        assert max(sizes) - min(sizes) <= 1

    def test_more_folds_than_items_rejected(self):
        with pytest.raises(ValueError):
            cs.kfold_split(3, 4, shuffled=False)
        with pytest.raises(ValueError):
            cs.kfold_split(10, 1, shuffled=False)


class TestOverlapFraction:
    def test_distinct_texts_never_overlap(self):
        texts = [f"t{i}" for i in range(30)]
        for shuffled in (False, True):
            plan = cs.kfold_split(30, 5, shuffled=shuffled, seed=0)
            for fold in range(5):
                assert cs.overlap_fraction(plan, texts, fold) == 0.0

    def test_adjacent_duplicates_ordered_bounded_by_boundaries(self):
        # two copies of each text, copies adjacent: only sentences cut by a
        # fold boundary can leak, at most one per side
        texts = [f"t{i // 2}" for i in range(40)]
        plan = cs.kfold_split(40, 5, shuffled=False)
        for fold in range(5):
            frac = cs.overlap_fraction(plan, texts, fold)
            assert frac <= 2 / len(plan.fold_indices(fold))

    def test_shuffled_duplicates_match_expected_rate(self):
        # a duplicated utterance's twin lands in training with probability
        # (n - fold size) / (n - 1); averaging over folds and seeds should sit
        # near that expectation
        n, k = 60, 10
        texts = [f"t{i // 2}" for i in range(n)]
        fold_size = n // k
        expected = (n - fold_size) / (n - 1)
        fracs = []
        for seed in range(30):
            plan = cs.kfold_split(n, k, shuffled=True, seed=seed)
            fracs.extend(cs.overlap_fraction(plan, texts, f) for f in range(k))
        assert np.mean(fracs) == pytest.approx(expected, abs=0.03)

    def test_shuffled_exceeds_ordered_on_generated_corpus(self, v1):
        utts = cs.generate_synthetic(cs.SyntheticSpec(n_sentences=20, repeats=2, seed=6), v1)
        texts = [u.text for u in utts]
        ordered = cs.kfold_split(len(utts), 5, shuffled=False)
        shuffled = cs.kfold_split(len(utts), 5, shuffled=True, seed=1)
        for fold in range(5):
            assert cs.overlap_fraction(shuffled, texts, fold) > cs.overlap_fraction(
                ordered, texts, fold
            )

    def test_fold_out_of_range(self):
        plan = cs.kfold_split(10, 5, shuffled=False)
        with pytest.raises(ValueError):
            cs.overlap_fraction(plan, ["x"] * 10, 5)


class TestWordCorrectness:
    def test_identical(self):
        assert cs.word_correctness(["le", "chat"], ["le", "chat"]) == 1.0

    def test_one_deletion_one_substitution(self):
        ref = ["a", "b", "c", "d"]
        hyp = ["a", "x", "d"]
        assert cs.word_correctness(ref, hyp) == pytest.approx(0.5)

    def test_insertions_not_charged(self):
        # hypothesis [y, x] against reference [x]: the match is kept and the
        # leading insertion is free in the correctness measure
        assert cs.word_correctness(["x"], ["y", "x"]) == 1.0

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            cs.word_correctness([], ["a"])


class TestReports:
    def test_fold_summary_fields(self):
        stats = evaluation.AlignmentStats(100, 10, 15, 5)
        summary = evaluation.fold_summary(stats)
        assert summary["accuracy"] == pytest.approx(0.70)
        assert summary["wilson_low"] < 0.70 < summary["wilson_high"]
        assert summary["n_ref"] == 100

    def test_across_folds(self):
        folds = [evaluation.fold_summary(evaluation.AlignmentStats(50, d, 0, 0)) for d in (5, 10, 15)]
        agg = evaluation.across_folds(folds)
        assert agg["min_accuracy"] == pytest.approx(0.7)
        assert agg["max_accuracy"] == pytest.approx(0.9)
        assert agg["mean_accuracy"] == pytest.approx(0.8)
