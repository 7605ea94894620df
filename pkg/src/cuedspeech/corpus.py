"""Phoneme alphabets, utterance types, and landmark corpus file I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_LIP_POINTS = 42
N_HAND_POINTS = 21

# Default hand landmark used as the tracked fingertip (index-finger tip in the
# 21-point hand model). Corpus records may override it per utterance.
FINGERTIP_LANDMARK = 8

# French phoneme inventory, SAMPA-flavoured ASCII. 14 vowels + 20 consonants.
_VOWELS_V1 = ("i", "e", "E", "a", "O", "o", "u", "y", "2", "9", "@", "e~", "a~", "o~")
_CONSONANTS_V1 = (
    "p", "b", "t", "d", "k", "g",
    "f", "v", "s", "z", "S", "Z",
    "m", "n", "J",
    "l", "R",
    "w", "j", "H",
)
# Revision 2 adds the clusters "gn" and "ng" plus the semi-vowel "ui".
_EXTRAS_V2 = (("gn", False), ("ng", False), ("ui", True))

ALPHABET_VERSIONS = ("v1", "v2")


@dataclass(frozen=True)
class PhonemeAlphabet:
    """Ordered phoneme inventory; the CTC blank lives at index ``len(symbols)``."""

    symbols: tuple[str, ...]
    vowel_flags: tuple[bool, ...]
    version: str = "custom"

    def __post_init__(self):
        if len(self.symbols) != len(self.vowel_flags):
            raise ValueError("symbols and vowel_flags must have equal length")
        if not self.symbols:
            raise ValueError("alphabet must contain at least one symbol")
        if any(not s for s in self.symbols):
            raise ValueError("empty phoneme symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate phoneme symbols")

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def blank_index(self) -> int:
        return len(self.symbols)

    def index(self, label: str) -> int:
        try:
            return self.symbols.index(label)
        except ValueError:
            raise ValueError(f"unknown phoneme label {label!r}") from None

    def to_indices(self, labels) -> list[int]:
        return [self.index(lab) for lab in labels]

    def to_labels(self, indices) -> list[str]:
        out = []
        for i in indices:
            if not 0 <= i < self.size:
                raise ValueError(f"phoneme index {i} out of range for {self.size}-symbol alphabet")
            out.append(self.symbols[i])
        return out


def alphabet(version: str) -> PhonemeAlphabet:
    """Return the fixed phoneme alphabet for ``version`` ("v1" or "v2").

    v1 holds 34 classes (14 vowels, 20 consonants); v2 appends "gn", "ng"
    and "ui" for 37 classes.
    """
    version = version.lower()
    if version not in ALPHABET_VERSIONS:
        raise ValueError(f"unknown alphabet version {version!r}; expected one of {ALPHABET_VERSIONS}")
    symbols = list(_VOWELS_V1) + list(_CONSONANTS_V1)
    flags = [True] * len(_VOWELS_V1) + [False] * len(_CONSONANTS_V1)
    if version == "v2":
        for sym, is_vowel in _EXTRAS_V2:
            symbols.append(sym)
            flags.append(is_vowel)
    return PhonemeAlphabet(tuple(symbols), tuple(flags), version=version)


@dataclass(frozen=True)
class CuedFrame:
    """One video frame: lip and hand landmark sets plus the tracked fingertip."""

    lips: np.ndarray       # (42, 2)
    hand: np.ndarray       # (21, 2)
    fingertip: np.ndarray  # (2,)
    frame_index: int = 0

    def validate(self):
        if self.lips.shape != (N_LIP_POINTS, 2):
            raise ValueError(f"expected {N_LIP_POINTS} lip points, got shape {self.lips.shape}")
        if self.hand.shape != (N_HAND_POINTS, 2):
            raise ValueError(f"expected {N_HAND_POINTS} hand points, got shape {self.hand.shape}")
        if self.fingertip.shape != (2,):
            raise ValueError(f"fingertip must be a 2-vector, got shape {self.fingertip.shape}")
        for name, arr in (("lips", self.lips), ("hand", self.hand), ("fingertip", self.fingertip)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite coordinate in {name}")


@dataclass(frozen=True)
class Utterance:
    """A cued sentence: frames plus reference phoneme and word sequences."""

    id: str
    frames: tuple[CuedFrame, ...]
    phonemes: tuple[int, ...]
    words: tuple[str, ...]
    text: str

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def _parse_frame(obj, utt_id: str, t: int, fingertip_landmark: int) -> CuedFrame:
    try:
        lips = np.asarray(obj["lips"], dtype=float)
        hand = np.asarray(obj["hand"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"utterance {utt_id!r} frame {t}: malformed frame record ({exc})") from None
    if lips.shape != (2 * N_LIP_POINTS,):
        raise ValueError(
            f"utterance {utt_id!r} frame {t}: expected {2 * N_LIP_POINTS} lip numbers, got {lips.size}"
        )
    if hand.shape != (2 * N_HAND_POINTS,):
        raise ValueError(
            f"utterance {utt_id!r} frame {t}: expected {2 * N_HAND_POINTS} hand numbers, got {hand.size}"
        )
    lips = lips.reshape(N_LIP_POINTS, 2)
    hand = hand.reshape(N_HAND_POINTS, 2)
    if "fingertip" in obj:
        fingertip = np.asarray(obj["fingertip"], dtype=float)
        if fingertip.shape != (2,):
            raise ValueError(f"utterance {utt_id!r} frame {t}: fingertip must hold 2 numbers")
    else:
        if not 0 <= fingertip_landmark < N_HAND_POINTS:
            raise ValueError(
                f"utterance {utt_id!r}: fingertip_landmark {fingertip_landmark} out of range"
            )
        fingertip = hand[fingertip_landmark].copy()
    frame = CuedFrame(lips=lips, hand=hand, fingertip=fingertip, frame_index=t)
    try:
        frame.validate()
    except ValueError as exc:
        raise ValueError(f"utterance {utt_id!r} frame {t}: {exc}") from None
    return frame


def load_corpus(path, alphabet: PhonemeAlphabet) -> list[Utterance]:
    """Load a line-delimited landmark corpus; returns utterances in file order."""
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        return []
    header = json.loads(lines[0])
    if header.get("format") != "cs-corpus":
        raise ValueError(f"{path}: missing cs-corpus header line")
    declared = header.get("alphabet")
    if declared is not None and alphabet.version != "custom" and declared != alphabet.version:
        raise ValueError(f"{path}: corpus header declares alphabet {declared!r}, got {alphabet.version!r}")
    utterances = []
    for line in lines[1:]:
        rec = json.loads(line)
        utt_id = rec.get("id", "<missing id>")
        labels = rec.get("phonemes", [])
        try:
            phonemes = tuple(alphabet.to_indices(labels))
        except ValueError as exc:
            raise ValueError(f"utterance {utt_id!r}: {exc}") from None
        landmark = rec.get("fingertip_landmark", FINGERTIP_LANDMARK)
        frames = []
        for t, fobj in enumerate(rec.get("frames", [])):
            frames.append(_parse_frame(fobj, utt_id, t, landmark))
        utterances.append(
            Utterance(
                id=str(utt_id),
                frames=tuple(frames),
                phonemes=phonemes,
                words=tuple(rec.get("words", [])),
                text=str(rec.get("text", "")),
            )
        )
    return utterances


def save_corpus(path, utterances, alphabet: PhonemeAlphabet):
    """Write utterances as one JSON record per line, full float precision."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {"format": "cs-corpus", "version": 1, "alphabet": alphabet.version}
        fh.write(json.dumps(header) + "\n")
        for utt in utterances:
            rec = {
                "id": utt.id,
                "text": utt.text,
                "words": list(utt.words),
                "phonemes": alphabet.to_labels(utt.phonemes),
                "frames": [
                    {
                        "lips": f.lips.reshape(-1).tolist(),
                        "hand": f.hand.reshape(-1).tolist(),
                        "fingertip": f.fingertip.tolist(),
                    }
                    for f in utt.frames
                ],
            }
            fh.write(json.dumps(rec) + "\n")


def corpus_alphabet_version(path) -> str | None:
    """Peek at the alphabet version declared in a corpus file header."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if not first:
        return None
    header = json.loads(first)
    return header.get("alphabet")
