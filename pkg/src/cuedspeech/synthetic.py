"""Synthetic cued-speech corpus generator.

Each phoneme is rendered as a hand configuration (one of 8 shape templates
placed at one of 5 position offsets) plus a per-phoneme lip template, with a
controllable hand lead: the hand reaches a phoneme's configuration a few
frames before the lips do, mimicking natural cueing asynchrony. Every
utterance opens and closes on a neutral rest pose so onsets are observable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import (
    FINGERTIP_LANDMARK,
    N_HAND_POINTS,
    N_LIP_POINTS,
    CuedFrame,
    PhonemeAlphabet,
    Utterance,
)

N_HAND_SHAPES = 8
N_HAND_POSITIONS = 5

# Low-dimensional mode basis for lip templates keeps the lip stream
# well-summarised by a small number of principal components.
_N_LIP_MODES = 10
_LIP_MODE_AMPLITUDE = 0.55

_REST_FRAMES_TAIL = 2


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for corpus generation; ranges are inclusive on both ends."""

    n_sentences: int
    repeats: int = 2
    phonemes_per_sentence: tuple[int, int] = (4, 10)
    frames_per_phoneme: tuple[int, int] = (4, 10)
    hand_lead_frames: tuple[int, int] = (0, 6)
    coordinate_noise_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_sentences < 1:
            raise ValueError("n_sentences must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        for name in ("phonemes_per_sentence", "frames_per_phoneme", "hand_lead_frames"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} range ({lo}, {hi}) is empty or negative")
        if self.phonemes_per_sentence[0] < 1:
            raise ValueError("phonemes_per_sentence must start at >= 1")
        if self.frames_per_phoneme[0] < 1:
            raise ValueError("frames_per_phoneme must start at >= 1")
        if self.coordinate_noise_std < 0:
            raise ValueError("coordinate_noise_std must be >= 0")


@dataclass(frozen=True)
class SyntheticGeometry:
    """Prototype landmark templates and the phoneme -> (shape, position) map."""

    lip_templates: np.ndarray       # (K, 42, 2)
    rest_lips: np.ndarray           # (42, 2)
    shape_templates: np.ndarray     # (8, 21, 2), centred near the origin
    rest_shape: np.ndarray          # (21, 2)
    position_offsets: np.ndarray    # (5, 2)
    rest_position: np.ndarray       # (2,)
    shape_of: tuple[int, ...]       # per-phoneme shape index
    pos_of: tuple[int, ...]         # per-phoneme position index

    def hand_config(self, phoneme: int) -> np.ndarray:
        return self.shape_templates[self.shape_of[phoneme]] + self.position_offsets[self.pos_of[phoneme]]

    def rest_hand(self) -> np.ndarray:
        return self.rest_shape + self.rest_position


def _hand_assignment(alphabet: PhonemeAlphabet) -> tuple[tuple[int, ...], tuple[int, ...]]:
    # Every phoneme gets a distinct (shape, position) pair so the cue stream
    # alone identifies the sequence. Consonants sweep shapes fastest from one
    # end of the 8x5 grid, vowels sweep positions fastest from the other; the
    # pairing itself carries no linguistic meaning.
    front = [(s, q) for q in range(N_HAND_POSITIONS) for s in range(N_HAND_SHAPES)]
    back = [(s, q) for s in range(N_HAND_SHAPES - 1, -1, -1) for q in range(N_HAND_POSITIONS - 1, -1, -1)]
    used: set[tuple[int, int]] = set()
    fi = bi = 0
    shape_of, pos_of = [], []
    for i in range(alphabet.size):
        if alphabet.vowel_flags[i]:
            while back[bi] in used:
                bi += 1
            pair = back[bi]
        else:
            while front[fi] in used:
                fi += 1
            pair = front[fi]
        used.add(pair)
        shape_of.append(pair[0])
        pos_of.append(pair[1])
    return tuple(shape_of), tuple(pos_of)


def geometry_for(alphabet: PhonemeAlphabet, seed: int) -> SyntheticGeometry:
    """Build the deterministic prototype set for an alphabet and seed."""
    if alphabet.size > N_HAND_SHAPES * N_HAND_POSITIONS:
        raise ValueError("alphabet too large for the 8x5 hand-configuration grid")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))

    # Lips: a base mouth plus K template offsets drawn in a fixed mode basis.
    base_lips = np.column_stack(
        [
            0.5 + 0.12 * np.cos(np.linspace(0, 2 * np.pi, N_LIP_POINTS, endpoint=False)),
            0.62 + 0.05 * np.sin(np.linspace(0, 2 * np.pi, N_LIP_POINTS, endpoint=False)),
        ]
    )
    modes = rng.normal(size=(_N_LIP_MODES, 2 * N_LIP_POINTS))
    modes /= np.linalg.norm(modes, axis=1, keepdims=True)
    coeffs = rng.uniform(-_LIP_MODE_AMPLITUDE, _LIP_MODE_AMPLITUDE, size=(alphabet.size, _N_LIP_MODES))
    lip_templates = base_lips[None, :, :] + (coeffs @ modes).reshape(alphabet.size, N_LIP_POINTS, 2)
    rest_lips = base_lips.copy()

    # Hand: a rough open-hand skeleton, randomised per shape.
    base_hand = np.column_stack(
        [
            0.06 * np.cos(np.linspace(0, 2 * np.pi, N_HAND_POINTS, endpoint=False)),
            0.06 * np.sin(np.linspace(0, 2 * np.pi, N_HAND_POINTS, endpoint=False)),
        ]
    )
    shape_templates = base_hand[None, :, :] + rng.uniform(
        -0.1, 0.1, size=(N_HAND_SHAPES, N_HAND_POINTS, 2)
    )
    rest_shape = base_hand.copy()

    position_offsets = np.array(
        [
            [0.25, 0.30],
            [0.70, 0.30],
            [0.47, 0.50],
            [0.30, 0.72],
            [0.68, 0.70],
        ]
    )
    rest_position = np.array([0.50, 0.92])

    shape_of, pos_of = _hand_assignment(alphabet)
    return SyntheticGeometry(
        lip_templates=lip_templates,
        rest_lips=rest_lips,
        shape_templates=shape_templates,
        rest_shape=rest_shape,
        position_offsets=position_offsets,
        rest_position=rest_position,
        shape_of=shape_of,
        pos_of=pos_of,
    )


def nearest_hand_config(geometry: SyntheticGeometry, hand: np.ndarray):
    """Classify a hand frame as ``(shape, position)`` or ``None`` for rest."""
    best, best_d = None, np.inf
    for s in range(N_HAND_SHAPES):
        for q in range(N_HAND_POSITIONS):
            d = float(np.sum((hand - (geometry.shape_templates[s] + geometry.position_offsets[q])) ** 2))
            if d < best_d:
                best, best_d = (s, q), d
    d_rest = float(np.sum((hand - geometry.rest_hand()) ** 2))
    return None if d_rest < best_d else best


def nearest_lip_template(geometry: SyntheticGeometry, lips: np.ndarray):
    """Return the nearest lip template index, or ``None`` for the rest pose."""
    d = np.sum((geometry.lip_templates - lips[None, :, :]) ** 2, axis=(1, 2))
    k = int(np.argmin(d))
    d_rest = float(np.sum((lips - geometry.rest_lips) ** 2))
    return None if d_rest < d[k] else k


def hand_classification_sequence(geometry: SyntheticGeometry, utterance: Utterance) -> list[int]:
    """Per-frame nearest-prototype phonemes (rest frames dropped, runs collapsed)."""
    pair_to_phoneme = {
        (s, q): i for i, (s, q) in enumerate(zip(geometry.shape_of, geometry.pos_of))
    }
    seq: list[int] = []
    for frame in utterance.frames:
        pair = nearest_hand_config(geometry, frame.hand)
        if pair is None:
            continue
        ph = pair_to_phoneme.get(pair)
        if ph is None:
            continue
        if not seq or seq[-1] != ph:
            seq.append(ph)
    return seq


def _draw_sentence(rng, alphabet: PhonemeAlphabet, spec: SyntheticSpec):
    lo, hi = spec.phonemes_per_sentence
    n = int(rng.integers(lo, hi + 1))
    phonemes: list[int] = []
    for _ in range(n):
        p = int(rng.integers(alphabet.size))
        while phonemes and p == phonemes[-1]:  # no immediate repeats: keeps cues unambiguous
            p = int(rng.integers(alphabet.size))
        phonemes.append(p)
    # Chunk into pseudo-words of 2-4 phonemes (a final singleton only for
    # one-phoneme sentences); the word label spells out its pronunciation.
    words: list[str] = []
    i = 0
    while i < n:
        rem = n - i
        if rem <= 4:
            size = rem
        elif rem == 5:
            size = int(rng.integers(2, 4))
        else:
            size = int(rng.integers(2, 5))
        chunk = phonemes[i : i + size]
        words.append("-".join(alphabet.symbols[p] for p in chunk))
        i += size
    return phonemes, words


def generate_synthetic(spec: SyntheticSpec, alphabet: PhonemeAlphabet) -> list[Utterance]:
    """Generate a deterministic corpus of ``n_sentences * repeats`` utterances.

    Repeats of a sentence share references and text but draw their own
    durations, hand leads and coordinate noise. Repeats are emitted adjacently,
    so an in-order split keeps a sentence's copies together.
    """
    geometry = geometry_for(alphabet, spec.seed)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(2,)))
    lead_hi = spec.hand_lead_frames[1]
    lead_in = lead_hi + 2

    utterances: list[Utterance] = []
    seen_texts: set[str] = set()
    for si in range(spec.n_sentences):
        for _ in range(1000):
            phonemes, words = _draw_sentence(rng, alphabet, spec)
            text = " ".join(words)
            if text not in seen_texts:
                break
        else:
            raise ValueError("could not draw a fresh sentence; enlarge phonemes_per_sentence")
        seen_texts.add(text)
        n = len(phonemes)

        for ri in range(spec.repeats):
            durations = rng.integers(spec.frames_per_phoneme[0], spec.frames_per_phoneme[1] + 1, size=n)
            leads = rng.integers(spec.hand_lead_frames[0], lead_hi + 1, size=n)
            lip_onsets = lead_in + np.concatenate([[0], np.cumsum(durations[:-1])])
            end_of_speech = int(lip_onsets[-1] + durations[-1])
            total = end_of_speech + _REST_FRAMES_TAIL

            hand_onsets = lip_onsets - leads
            for j in range(1, n):  # keep hand segments non-empty and ordered
                hand_onsets[j] = max(hand_onsets[j], hand_onsets[j - 1] + 1)

            lips_track = np.repeat(geometry.rest_lips[None, :, :], total, axis=0)
            hand_track = np.repeat(geometry.rest_hand()[None, :, :], total, axis=0)
            for j in range(n):
                l0, l1 = int(lip_onsets[j]), int(lip_onsets[j] + durations[j])
                lips_track[l0:l1] = geometry.lip_templates[phonemes[j]]
                h0 = int(hand_onsets[j])
                h1 = int(hand_onsets[j + 1]) if j + 1 < n else end_of_speech
                hand_track[h0:h1] = geometry.hand_config(phonemes[j])

            lips_track = lips_track + rng.normal(0.0, 1.0, size=lips_track.shape) * spec.coordinate_noise_std
            hand_track = hand_track + rng.normal(0.0, 1.0, size=hand_track.shape) * spec.coordinate_noise_std

            frames = tuple(
                CuedFrame(
                    lips=lips_track[t],
                    hand=hand_track[t],
                    fingertip=hand_track[t, FINGERTIP_LANDMARK].copy(),
                    frame_index=t,
                )
                for t in range(total)
            )
            utterances.append(
                Utterance(
                    id=f"s{si:04d}r{ri}",
                    frames=frames,
                    phonemes=tuple(phonemes),
                    words=tuple(words),
                    text=text,
                )
            )
    return utterances


def pseudo_lexicon(utterances, alphabet: PhonemeAlphabet) -> dict[str, tuple[int, ...]]:
    """Recover the word -> pronunciation map induced by the generator.

    Word labels spell their pronunciations, so this also cross-checks that
    each utterance's word chunks concatenate to its phoneme sequence.
    """
    entries: dict[str, tuple[int, ...]] = {}
    for utt in utterances:
        pos = 0
        for word in utt.words:
            labels = word.split("-")
            pron = tuple(utt.phonemes[pos : pos + len(labels)])
            if [alphabet.symbols[p] for p in pron] != labels:
                raise ValueError(f"utterance {utt.id!r}: word {word!r} does not match its phonemes")
            prev = entries.setdefault(word, pron)
            if prev != pron:
                raise ValueError(f"word {word!r} maps to conflicting pronunciations")
            pos += len(labels)
        if pos != len(utt.phonemes):
            raise ValueError(f"utterance {utt.id!r}: words do not cover the phoneme sequence")
    return entries
