"""CTC loss via the log-space forward-backward recursion, plus decoders.

The loss marginalises over every frame-level path that collapses (duplicate
removal, then blank deletion) to the target labels. The gradient is taken
with respect to pre-softmax logits, so the network can consume it directly.
A brute-force path enumerator doubles as an independent oracle for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import Posteriorgram

# Probabilities are floored here before logs so a zero entry cannot poison
# the recursion with -inf.
_LOG_FLOOR = -745.0
_NEG_INF = -np.inf


@dataclass(frozen=True)
class CtcResult:
    loss: float                  # negative log-likelihood
    grad_wrt_logits: np.ndarray  # (T, K + 1)


def _check_labels(labels, n_classes: int, blank: int):
    labels = list(labels)
    if not labels:
        raise ValueError("labels must be non-empty")
    for lab in labels:
        if lab == blank:
            raise ValueError("blank must not appear in reference labels")
        if not 0 <= lab < n_classes:
            raise ValueError(f"label {lab} out of range for {n_classes} classes")
    return labels


def min_frames(labels) -> int:
    """CTC feasibility bound: length plus one per adjacent repeated label."""
    labels = list(labels)
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def _log_probs(posteriors: Posteriorgram) -> np.ndarray:
    return np.log(np.maximum(posteriors.probs, math.exp(_LOG_FLOOR)))


def ctc_loss(posteriors: Posteriorgram, labels) -> CtcResult:
    """Negative log-likelihood of ``labels`` and its exact logit gradient."""
    blank = posteriors.blank
    labels = _check_labels(labels, posteriors.n_classes, blank)
    T = posteriors.n_frames
    if T < min_frames(labels):
        raise ValueError(
            f"no valid alignment: {T} frames cannot carry {len(labels)} labels "
            f"(minimum {min_frames(labels)})"
        )

    ext = [blank]
    for lab in labels:
        ext.extend((lab, blank))
    ext = np.array(ext)
    S = ext.size
    logp = _log_probs(posteriors)
    frame_ext = logp[:, ext]  # (T, S)

    # skip transition s-2 -> s allowed only onto a label differing from ext[s-2]
    can_skip = np.zeros(S, dtype=bool)
    can_skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    log_alpha = np.full((T, S), _NEG_INF)
    log_alpha[0, 0] = frame_ext[0, 0]
    if S > 1:
        log_alpha[0, 1] = frame_ext[0, 1]
    for t in range(1, T):
        prev = log_alpha[t - 1]
        stay = prev
        step = np.concatenate([[_NEG_INF], prev[:-1]])
        acc = np.logaddexp(stay, step)
        skip = np.concatenate([[_NEG_INF, _NEG_INF], prev[:-2]])
        acc = np.where(can_skip, np.logaddexp(acc, skip), acc)
        log_alpha[t] = acc + frame_ext[t]

    log_p = np.logaddexp(log_alpha[T - 1, S - 1], log_alpha[T - 1, S - 2] if S > 1 else _NEG_INF)

    can_skip_from = np.zeros(S, dtype=bool)
    can_skip_from[:-2] = can_skip[2:]
    log_beta = np.full((T, S), _NEG_INF)
    log_beta[T - 1, S - 1] = frame_ext[T - 1, S - 1]
    if S > 1:
        log_beta[T - 1, S - 2] = frame_ext[T - 1, S - 2]
    for t in range(T - 2, -1, -1):
        nxt = log_beta[t + 1]
        stay = nxt
        step = np.concatenate([nxt[1:], [_NEG_INF]])
        acc = np.logaddexp(stay, step)
        skip = np.concatenate([nxt[2:], [_NEG_INF, _NEG_INF]])
        acc = np.where(can_skip_from, np.logaddexp(acc, skip), acc)
        log_beta[t] = acc + frame_ext[t]

    # gamma[t, s]: total probability of paths through state s at frame t.
    log_gamma = log_alpha + log_beta - frame_ext

    # dL/dlogit[t, k] = y[t, k] - (1/P) * sum of gamma over states labelled k.
    K1 = posteriors.probs.shape[1]
    grad = posteriors.probs.copy()
    for k in range(K1):
        mask = ext == k
        if not mask.any():
            continue
        g = log_gamma[:, mask]
        m = g.max(axis=1)
        finite = np.isfinite(m)
        safe_m = np.where(finite, m, 0.0)
        summed = np.exp(g - safe_m[:, None]).sum(axis=1)
        tot = np.where(finite, safe_m + np.log(np.where(finite, summed, 1.0)), _NEG_INF)
        grad[:, k] -= np.exp(tot - log_p)
    return CtcResult(loss=float(-log_p), grad_wrt_logits=grad)


def greedy_decode(posteriors: Posteriorgram) -> list[int]:
    """Framewise argmax, collapse adjacent duplicates, drop blanks.

    Argmax ties resolve to the lowest class index.
    """
    path = np.argmax(posteriors.probs, axis=1)
    return _collapse(path, posteriors.blank)


def _collapse(path, blank: int) -> list[int]:
    out: list[int] = []
    prev = None
    for p in path:
        p = int(p)
        if p != prev:
            if p != blank:
                out.append(p)
            prev = p
    return out


def brute_force_likelihood(posteriors: Posteriorgram, labels) -> float:
    """Exact label-sequence probability by enumerating frame-level paths.

    Depth-first over the (K+1)^T paths, abandoning a branch as soon as its
    collapsed prefix stops matching the target; every surviving complete path
    contributes its own probability product. Small instances only.
    """
    T, width = posteriors.probs.shape
    if T > 8 or width - 1 > 5:
        raise ValueError("brute force enumeration is limited to T <= 8 and K <= 5")
    blank = posteriors.blank
    labels = _check_labels(labels, posteriors.n_classes, blank)
    probs = posteriors.probs
    n = len(labels)

    def extend(t: int, matched: int, prev: int, acc: float) -> float:
        if t == T:
            return acc if matched == n else 0.0
        total = 0.0
        for k in range(width):
            m = matched
            if k != blank and k != prev:
                if m == n or labels[m] != k:
                    continue
                m += 1
            if n - m > T - t - 1:  # not enough frames left for the missing labels
                continue
            total += extend(t + 1, m, k, acc * probs[t, k])
        return total

    return extend(0, 0, blank, 1.0)
