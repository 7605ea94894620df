"""Pronunciation lexicon, prefix tree, and lexicon-constrained decoding.

Tokens walk the prefix tree frame by frame under CTC semantics: a token may
emit blank and stay put, re-emit its last phoneme and stay put, or advance
along an arc -- except onto an arc labelled with its last emitted phoneme,
which requires an intervening blank (also across word boundaries). Reaching
a node that completes a word forks the token: one copy keeps extending the
longer entry, the other banks the word, pays the insertion penalty and
re-enters the root. Viterbi recombination keeps the best token per
(node, last-symbol) state and a global beam caps the frontier per frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .corpus import PhonemeAlphabet
from .network import Posteriorgram

Lexicon = dict[str, list[tuple[int, ...]]]

_LOG_FLOOR = -745.0


def load_lexicon(path, alphabet: PhonemeAlphabet) -> Lexicon:
    """Parse ``word<TAB>phoneme phoneme ...`` lines; ``#`` starts a comment."""
    entries: Lexicon = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise ValueError(f"lexicon line {lineno}: expected 'word<TAB>phonemes'")
        word, pron_part = line.split("\t", 1)
        word = word.strip()
        labels = pron_part.split()
        if not word or not labels:
            raise ValueError(f"lexicon line {lineno}: empty word or pronunciation")
        try:
            pron = tuple(alphabet.to_indices(labels))
        except ValueError as exc:
            raise ValueError(f"lexicon line {lineno}: {exc}") from None
        prons = entries.setdefault(word, [])
        if pron not in prons:
            prons.append(pron)
    if not entries:
        raise ValueError(f"{path}: empty lexicon")
    return entries


def save_lexicon(entries, path, alphabet: PhonemeAlphabet):
    with Path(path).open("w", encoding="utf-8") as fh:
        for word in sorted(entries):
            for pron in _pron_list(entries[word]):
                fh.write(word + "\t" + " ".join(alphabet.symbols[p] for p in pron) + "\n")


def _pron_list(value) -> list[tuple[int, ...]]:
    if isinstance(value, tuple) and all(isinstance(p, int) for p in value):
        return [value]
    return [tuple(p) for p in value]


@dataclass
class PrefixTree:
    children: list[dict[int, int]]   # node -> {phoneme: child node}
    words: list[list[str]]           # node -> words completed there (sorted)
    paths: list[tuple[int, ...]]     # node -> arc labels from the root
    n_words: int

    ROOT = 0


def build_prefix_tree(lexicon: Lexicon) -> PrefixTree:
    children: list[dict[int, int]] = [{}]
    words: list[list[str]] = [[]]
    paths: list[tuple[int, ...]] = [()]
    n_words = 0
    for word in sorted(lexicon):
        for pron in _pron_list(lexicon[word]):
            if not pron:
                raise ValueError(f"word {word!r} has an empty pronunciation")
            node = PrefixTree.ROOT
            for ph in pron:
                nxt = children[node].get(ph)
                if nxt is None:
                    nxt = len(children)
                    children[node][ph] = nxt
                    children.append({})
                    words.append([])
                    paths.append(paths[node] + (ph,))
                node = nxt
            if word not in words[node]:
                words[node].append(word)
                words[node].sort()
        n_words += 1
    if n_words == 0:
        raise ValueError("cannot build a prefix tree from an empty lexicon")
    return PrefixTree(children=children, words=words, paths=paths, n_words=n_words)


def _log_probs(posteriors: Posteriorgram) -> np.ndarray:
    return np.log(np.maximum(posteriors.probs, math.exp(_LOG_FLOOR)))


def token_passing_decode(
    posteriors: Posteriorgram,
    tree: PrefixTree,
    beam_width: int = 64,
    word_insertion_penalty: float = 0.0,
) -> tuple[list[str], list[int], float]:
    """Best word sequence under Viterbi token passing through the tree.

    Returns ``(words, phonemes, log_score)`` where the phonemes are the
    concatenated pronunciations actually traversed. At least one word must
    complete; otherwise raises ``ValueError``.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    if tree.n_words == 0 or not tree.children[PrefixTree.ROOT]:
        raise ValueError("empty prefix tree")
    T = posteriors.n_frames
    if T < 1:
        raise ValueError("cannot decode an empty posteriorgram")
    blank = posteriors.blank
    logp = _log_probs(posteriors)

    # state: (node, last emitted symbol, any word completed yet). The last
    # flag matters because only tokens with at least one banked word are
    # acceptable at the end; folding it into the state keeps Viterbi
    # recombination sound. History is a tuple of (word, pronunciation) pairs.
    states = {(PrefixTree.ROOT, blank, False): (0.0, ())}
    for t in range(T):
        row = logp[t]
        new: dict[tuple[int, int, bool], tuple[float, tuple]] = {}

        def push(key, score, hist):
            cur = new.get(key)
            if cur is None or score > cur[0] or (score == cur[0] and hist < cur[1]):
                new[key] = (score, hist)

        for (node, last, done), (score, hist) in states.items():
            push((node, blank, done), score + row[blank], hist)
            if last != blank:
                push((node, last, done), score + row[last], hist)
            for ph, child in tree.children[node].items():
                if ph != last:
                    push((child, ph, done), score + row[ph], hist)

        for (node, last, _done), (score, hist) in list(new.items()):
            if tree.words[node]:
                word = tree.words[node][0]
                push(
                    (PrefixTree.ROOT, last, True),
                    score + word_insertion_penalty,
                    hist + ((word, tree.paths[node]),),
                )

        if len(new) > beam_width:
            ranked = sorted(new.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))
            new = dict(ranked[:beam_width])
        states = new

    best = None
    for (node, _last, done), (score, hist) in states.items():
        if node != PrefixTree.ROOT or not done:
            continue
        words = tuple(w for w, _ in hist)
        if best is None or score > best[0] or (score == best[0] and words < best[1]):
            best = (score, words, hist)
    if best is None:
        raise ValueError("no feasible word sequence for this posteriorgram")
    score, words, hist = best
    phonemes = [p for _, pron in hist for p in pron]
    return list(words), phonemes, float(score)


def _viterbi_ctc_score(logp: np.ndarray, labels: list[int], blank: int) -> float:
    """Best single-alignment log-score of a label sequence (max over paths)."""
    ext = [blank]
    for lab in labels:
        ext.extend((lab, blank))
    ext = np.array(ext)
    S = ext.size
    can_skip = np.zeros(S, dtype=bool)
    can_skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    v = np.full(S, -np.inf)
    v[0] = logp[0, ext[0]]
    if S > 1:
        v[1] = logp[0, ext[1]]
    for t in range(1, logp.shape[0]):
        step = np.concatenate([[-np.inf], v[:-1]])
        skip = np.concatenate([[-np.inf, -np.inf], v[:-2]])
        best = np.maximum(v, step)
        best = np.where(can_skip, np.maximum(best, skip), best)
        v = best + logp[t, ext]
    return float(max(v[S - 1], v[S - 2] if S > 1 else -np.inf))


def exhaustive_decode(
    posteriors: Posteriorgram,
    lexicon: Lexicon,
    max_words: int,
    word_insertion_penalty: float = 0.0,
) -> tuple[list[str], float]:
    """Score every word sequence up to ``max_words``; small instances only.

    Each sequence scores as the Viterbi-best CTC alignment of its phoneme
    concatenation (best pronunciation combination) plus the insertion penalty
    per word. Ties break lexicographically on the word sequence.
    """
    T = posteriors.n_frames
    if len(lexicon) > 6 or T > 10 or max_words > 4:
        raise ValueError("exhaustive decoding is limited to 6 words, T <= 10, max_words <= 4")
    if max_words < 1:
        raise ValueError("max_words must be >= 1")
    blank = posteriors.blank
    logp = _log_probs(posteriors)
    vocab = sorted(lexicon)
    best: tuple[float, tuple[str, ...]] | None = None
    for length in range(1, max_words + 1):
        for combo in product(vocab, repeat=length):
            for prons in product(*(sorted(_pron_list(lexicon[w])) for w in combo)):
                labels = [p for pron in prons for p in pron]
                repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
                if T < len(labels) + repeats:
                    continue
                score = _viterbi_ctc_score(logp, labels, blank) + word_insertion_penalty * length
                if best is None or score > best[0] or (score == best[0] and combo < best[1]):
                    best = (score, combo)
    if best is None:
        raise ValueError("no feasible word sequence for this posteriorgram")
    return list(best[1]), float(best[0])
