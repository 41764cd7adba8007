"""Emotion profiles of word sets against a uniform lexicon-sampling null."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import SampleTooLarge
from .ingestion import EMOTIONS, LexicalResources

Z_CRIT = 1.96
DEFAULT_N_NULL = 1000


@dataclass
class EmotionProfile:
    counts: dict[str, int]
    z: dict[str, float]
    significant: dict[str, bool]
    sample_size: int
    z_crit: float = Z_CRIT
    unmatched: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sample_size": self.sample_size,
            "z_crit": self.z_crit,
            "unmatched": list(self.unmatched),
            "emotions": {
                e: {"count": self.counts[e], "z": self.z[e], "significant": self.significant[e]}
                for e in EMOTIONS
            },
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "EmotionProfile":
        em = payload["emotions"]
        return cls(
            counts={e: int(em[e]["count"]) for e in EMOTIONS},
            z={e: float(em[e]["z"]) for e in EMOTIONS},
            significant={e: bool(em[e]["significant"]) for e in EMOTIONS},
            sample_size=int(payload["sample_size"]),
            z_crit=float(payload.get("z_crit", Z_CRIT)),
            unmatched=list(payload.get("unmatched", [])),
        )


def emotion_counts(words: Iterable[str], lex: LexicalResources) -> dict[str, int]:
    """Each distinct word adds 1 to every emotion its lemma is tagged with."""
    counts = dict.fromkeys(EMOTIONS, 0)
    for word in set(words):
        for emo in lex.emotion_lexicon.get(lex.lemma(word), ()):
            counts[emo] += 1
    return counts


def _lexicon_matrix(lex: LexicalResources) -> np.ndarray:
    vocab = sorted(lex.emotion_lexicon)
    mat = np.zeros((len(vocab), len(EMOTIONS)), dtype=np.int64)
    col = {e: i for i, e in enumerate(EMOTIONS)}
    for r, word in enumerate(vocab):
        for emo in lex.emotion_lexicon[word]:
            mat[r, col[emo]] = 1
    return mat


def null_emotion_counts(sample_size: int, lex: LexicalResources, n_null: int, seed) -> np.ndarray:
    """``(n_null, 8)`` emotion counts of uniform draws of ``sample_size``
    lexicon words without replacement."""
    mat = _lexicon_matrix(lex)
    if sample_size > len(mat):
        raise SampleTooLarge(f"sample of {sample_size} words exceeds lexicon of {len(mat)}")
    rng = np.random.default_rng(seed)
    out = np.empty((n_null, len(EMOTIONS)), dtype=np.int64)
    for i in range(n_null):
        idx = rng.choice(len(mat), size=sample_size, replace=False)
        out[i] = mat[idx].sum(axis=0)
    return out


def emotion_zscores(words: Iterable[str], lex: LexicalResources, n_null: int = DEFAULT_N_NULL,
                    seed=None, z_crit: float = Z_CRIT, exclude_unmatched: bool = False) -> EmotionProfile:
    """z_e = (observed_e - mean_null_e) / std_null_e, zero when the null has no spread.

    Words whose lemma is absent from the lexicon still count toward the
    sample size unless ``exclude_unmatched`` is set.
    """
    word_set = sorted(set(words))
    if not word_set:
        raise ValueError("emotion_zscores needs at least one word")
    unmatched = [w for w in word_set if lex.lemma(w) not in lex.emotion_lexicon]
    if exclude_unmatched:
        word_set = [w for w in word_set if w not in set(unmatched)]
    observed = emotion_counts(word_set, lex)
    size = len(word_set)
    if size == 0:
        zeros = dict.fromkeys(EMOTIONS, 0.0)
        return EmotionProfile(observed, zeros, dict.fromkeys(EMOTIONS, False), 0, z_crit, unmatched)
    null = null_emotion_counts(size, lex, n_null, seed)
    mean = null.mean(axis=0)
    std = null.std(axis=0)
    z = {}
    for i, emo in enumerate(EMOTIONS):
        z[emo] = 0.0 if std[i] == 0 else float((observed[emo] - mean[i]) / std[i])
    significant = {e: abs(z[e]) >= z_crit for e in EMOTIONS}
    return EmotionProfile(observed, z, significant, size, z_crit, unmatched)
