"""Frame concreteness against resampled random-word baselines."""

from __future__ import annotations

import contextlib
import logging
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence, TextIO

import numpy as np
from scipy.stats import norm

from .errors import EmptyAfterLookup, EmptyFrame, KTooLarge
from .ingestion import normalize_word
from .valence import NEUTRAL, ValenceLabel

log = logging.getLogger(__name__)

DEFAULT_N_SAMPLES = 300
DEFAULT_ALPHA = 0.1
LOW_COVERAGE = 0.5
TSV_COLUMNS = ("group", "keyword", "k", "mean_diff", "Z", "cohens_d", "mean_frame", "cliffs_delta")


def critical_z(alpha: float) -> float:
    """Two-tailed critical value, rounded to 4 places (alpha=0.1 -> 1.6449)."""
    return round(float(norm.ppf(1 - alpha / 2)), 4)


def lemma_valence_propagate(labels: Mapping[str, ValenceLabel | str], lemma_map: Mapping[str, str],
                            occurrences: Mapping[str, int] | None = None) -> dict[str, str]:
    """Majority label per lemma over its surface forms, each form weighted by
    its occurrence count (default 1). Ties for the majority give neutral."""
    votes: dict[str, Counter] = defaultdict(Counter)
    for word, lab in labels.items():
        label = lab if isinstance(lab, str) else lab.label
        lemma = lemma_map.get(word, word)
        votes[lemma][label] += (occurrences or {}).get(word, 1)
    out = {}
    for lemma, counter in votes.items():
        ranked = counter.most_common()
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            out[lemma] = NEUTRAL
        else:
            out[lemma] = ranked[0][0]
    return out


@dataclass
class FrameScores:
    scores: list[float]
    matched: list[str]
    unmatched: list[str]

    @property
    def coverage(self) -> float:
        total = len(self.matched) + len(self.unmatched)
        return len(self.matched) / total if total else 0.0


def frame_concreteness(frame, norms: Mapping[str, float], lemma_map: Mapping[str, str]) -> FrameScores:
    """Concreteness of the frame members (never the target), one score per
    distinct lemma. Multi-word members are looked up as a single key."""
    if not frame.members:
        raise EmptyFrame(frame.target)
    scores, matched, unmatched = [], [], []
    seen: set[str] = set()
    target_lemma = lemma_map.get(frame.target, frame.target)
    for member in sorted(frame.members):
        w = normalize_word(member)
        lemma = lemma_map.get(w, w)
        if lemma in seen or lemma == target_lemma:
            continue
        seen.add(lemma)
        if lemma in norms:
            scores.append(float(norms[lemma]))
            matched.append(member)
        else:
            unmatched.append(member)
    if not scores:
        raise EmptyAfterLookup(f"no member of frame {frame.target!r} found in the norms")
    return FrameScores(scores, matched, unmatched)


@dataclass
class NullDistribution:
    mean: float
    std: float
    sample_means: np.ndarray = field(repr=False)
    pooled_scores: np.ndarray = field(repr=False)


def null_distribution(k: int, norms: Mapping[str, float], n_samples: int = DEFAULT_N_SAMPLES,
                      seed=None) -> NullDistribution:
    """Means of ``n_samples`` lists of ``k`` norm words drawn uniformly without
    replacement. ``pooled_scores`` holds every drawn score (n_samples * k)."""
    values = np.array([norms[w] for w in sorted(norms)], dtype=float)
    if k < 1:
        raise ValueError("k must be positive")
    if k > len(values):
        raise KTooLarge(f"k={k} exceeds the {len(values)} normed words")
    rng = np.random.default_rng(seed)
    draws = np.empty((n_samples, k))
    for i in range(n_samples):
        draws[i] = values[rng.choice(len(values), size=k, replace=False)]
    means = draws.mean(axis=1)
    return NullDistribution(float(means.mean()), float(means.std()), means, draws.ravel())


def cohens_d(x: Sequence[float], y: Sequence[float]) -> float:
    """|mean(x) - mean(y)| over the pooled (ddof=1) standard deviation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = len(x), len(y)
    if nx + ny <= 2:
        return float("nan")
    ssx = ((x - x.mean()) ** 2).sum()
    ssy = ((y - y.mean()) ** 2).sum()
    pooled = math.sqrt((ssx + ssy) / (nx + ny - 2))
    if pooled == 0:
        return 0.0
    return abs(float(x.mean() - y.mean())) / pooled


def cliffs_delta(x: Sequence[float], y: Sequence[float]) -> float:
    """|P(X > Y) - P(X < Y)| over all pairs, via binary search in sorted y."""
    x = np.asarray(x, dtype=float)
    ys = np.sort(np.asarray(y, dtype=float))
    if len(x) == 0 or len(ys) == 0:
        return float("nan")
    less = np.searchsorted(ys, x, side="left")           # y < x
    greater = len(ys) - np.searchsorted(ys, x, side="right")  # y > x
    return abs(int(less.sum()) - int(greater.sum())) / (len(x) * len(ys))


@dataclass
class ConcretenessResult:
    group_tag: str
    keyword: str
    k: int
    mean_frame: float
    mean_null: float
    std_null: float
    z: float | None
    cohens_d: float
    cliffs_delta: float
    significant: bool
    coverage: float
    low_coverage: bool
    diagnostic: str = ""

    @property
    def mean_diff(self) -> float:
        return self.mean_frame - self.mean_null

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_diff"] = self.mean_diff
        return d


def concreteness_test(frame, norms: Mapping[str, float], lemma_map: Mapping[str, str],
                      n_samples: int = DEFAULT_N_SAMPLES, seed=None, alpha: float = DEFAULT_ALPHA,
                      group_tag: str = "") -> ConcretenessResult:
    """z-test of the frame's mean concreteness against a null of random lists
    of length k = frame degree. Effect sizes compare member scores with every
    score drawn for the null."""
    scored = frame_concreteness(frame, norms, lemma_map)
    k = frame.degree
    null = null_distribution(k, norms, n_samples, seed)
    x_bar = float(np.mean(scored.scores))
    diagnostic = ""
    if null.std == 0:
        z = None
        diagnostic = "ZeroNullVariance"
    else:
        z = (x_bar - null.mean) / null.std
    crit = critical_z(alpha)
    low = scored.coverage < LOW_COVERAGE
    if low:
        diagnostic = (diagnostic + "; " if diagnostic else "") + f"low coverage {scored.coverage:.2f}"
    return ConcretenessResult(
        group_tag=group_tag,
        keyword=frame.target,
        k=k,
        mean_frame=x_bar,
        mean_null=null.mean,
        std_null=null.std,
        z=z,
        cohens_d=cohens_d(scored.scores, null.pooled_scores),
        cliffs_delta=cliffs_delta(scored.scores, null.pooled_scores),
        significant=z is not None and abs(z) > crit,
        coverage=scored.coverage,
        low_coverage=low,
        diagnostic=diagnostic,
    )


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def write_concreteness_tsv(results: Sequence[ConcretenessResult], path: Path | str | TextIO) -> None:
    """Rows ordered by decreasing mean difference, ties by group then keyword.
    ``path`` may also be an open text stream."""
    rows = sorted(results, key=lambda r: (-r.mean_diff, r.group_tag, r.keyword))
    with (contextlib.nullcontext(path) if hasattr(path, "write") else open(path, "w", encoding="utf-8")) as fh:
        fh.write("\t".join(TSV_COLUMNS) + "\n")
        for r in rows:
            fh.write("\t".join([r.group_tag, r.keyword, str(r.k), _fmt(r.mean_diff), _fmt(r.z),
                                _fmt(r.cohens_d), _fmt(r.mean_frame), _fmt(r.cliffs_delta)]) + "\n")
