"""Edit-distance scoring, Wilson intervals, and k-fold split protocol."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AlignmentStats:
    n_ref: int
    deletions: int
    substitutions: int
    insertions: int

    @property
    def matches(self) -> int:
        return self.n_ref - self.deletions - self.substitutions

    def __add__(self, other: "AlignmentStats") -> "AlignmentStats":
        return AlignmentStats(
            self.n_ref + other.n_ref,
            self.deletions + other.deletions,
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
        )


def align(reference, hypothesis) -> AlignmentStats:
    """Minimum-edit alignment with unit costs.

    Among minimum-cost alignments the backtrace prefers substitution over
    insertion over deletion; that changes the D/S/I split on ties, never the
    total.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    n, m = len(ref), len(hyp)
    cost = np.zeros((n + 1, m + 1), dtype=int)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            ins = cost[i, j - 1] + 1
            dele = cost[i - 1, j] + 1
            cost[i, j] = min(sub, ins, dele)
    d = s = ins_count = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i, j] == cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            if ref[i - 1] != hyp[j - 1]:
                s += 1
            i, j = i - 1, j - 1
        elif j > 0 and cost[i, j] == cost[i, j - 1] + 1:
            ins_count += 1
            j -= 1
        else:
            d += 1
            i -= 1
    return AlignmentStats(n_ref=n, deletions=d, substitutions=s, insertions=ins_count)


def accuracy(stats: AlignmentStats) -> float:
    """(N - D - S - I) / N; negative when insertions dominate."""
    if stats.n_ref < 1:
        raise ValueError("empty reference")
    return (stats.n_ref - stats.deletions - stats.substitutions - stats.insertions) / stats.n_ref


def wilson_interval(successes_rate: float, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, clipped to [0, 1]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = successes_rate
    z2n = z * z / n
    centre = (p + z2n / 2.0) / (1.0 + z2n)
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / (1.0 + z2n)
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass(frozen=True)
class SplitPlan:
    fold_count: int
    assignments: tuple[int, ...]   # per-utterance fold index
    shuffled: bool
    seed: int | None

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]

    def complement_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f != fold]


def kfold_split(n_utterances: int, k: int, shuffled: bool, seed: int = 0) -> SplitPlan:
    """Contiguous-block folds over file order, optionally after a seeded shuffle.

    Fold sizes differ by at most one; fold i then serves as the test set with
    the rest for training.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n_utterances:
        raise ValueError(f"cannot split {n_utterances} utterances into {k} folds")
    order = np.arange(n_utterances)
    if shuffled:
        order = np.random.default_rng(seed).permutation(n_utterances)
    base = n_utterances // k
    extra = n_utterances % k
    assignments = np.empty(n_utterances, dtype=int)
    pos = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        assignments[order[pos : pos + size]] = fold
        pos += size
    return SplitPlan(
        fold_count=k,
        assignments=tuple(int(a) for a in assignments),
        shuffled=shuffled,
        seed=seed if shuffled else None,
    )


def overlap_fraction(plan: SplitPlan, texts, fold: int) -> float:
    """Share of test-fold utterances whose text also occurs in the train folds."""
    if not 0 <= fold < plan.fold_count:
        raise ValueError(f"fold {fold} out of range for {plan.fold_count}-fold plan")
    texts = list(texts)
    test = plan.fold_indices(fold)
    train_texts = {texts[i] for i in plan.complement_indices(fold)}
    if not test:
        return 0.0
    return sum(1 for i in test if texts[i] in train_texts) / len(test)


def word_correctness(reference_words, hypothesis_words) -> float:
    """(N - D - S) / N at the word level; insertions are not charged."""
    ref = list(reference_words)
    if not ref:
        raise ValueError("empty reference")
    stats = align(ref, list(hypothesis_words))
    return (stats.n_ref - stats.deletions - stats.substitutions) / stats.n_ref


def fold_summary(stats: AlignmentStats, z: float = 1.96) -> dict:
    """One fold's report entry: counts, accuracy, and its Wilson interval."""
    acc = accuracy(stats)
    low, high = wilson_interval(min(1.0, max(0.0, acc)), stats.n_ref, z)
    return {
        "n_ref": stats.n_ref,
        "deletions": stats.deletions,
        "substitutions": stats.substitutions,
        "insertions": stats.insertions,
        "accuracy": acc,
        "wilson_low": low,
        "wilson_high": high,
    }


def across_folds(fold_summaries) -> dict:
    accs = [f["accuracy"] for f in fold_summaries]
    return {
        "folds": list(fold_summaries),
        "min_accuracy": min(accs),
        "mean_accuracy": sum(accs) / len(accs),
        "max_accuracy": max(accs),
    }
