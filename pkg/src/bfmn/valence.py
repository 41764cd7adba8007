"""Word valence categorization with a pooled two-group Kruskal-Wallis test."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from scipy.stats import chi2

log = logging.getLogger(__name__)

POSITIVE, NEUTRAL, NEGATIVE = "positive", "neutral", "negative"
LABELS = (POSITIVE, NEUTRAL, NEGATIVE)
MIN_RATINGS = 3
DEFAULT_ALPHA = 0.1


@dataclass(frozen=True)
class ValenceSample:
    word: str
    ratings: tuple[int, ...]


@dataclass(frozen=True)
class ValenceLabel:
    word: str
    label: str
    p_value: float | None = None
    mean: float | None = None
    n: int = 0


def _kw_from_counts(counts_a: Mapping[float, int], counts_b: Mapping[float, int]) -> tuple[float, float]:
    """H and p for two groups given as value -> multiplicity.

    Midranks are assigned per distinct value of the pooled sample, so the cost
    is O(distinct values) rather than O(n log n) over raw observations.
    """
    n_a = sum(counts_a.values())
    n_b = sum(counts_b.values())
    n = n_a + n_b
    pooled = Counter(counts_a)
    pooled.update(counts_b)
    if len(pooled) <= 1:
        return 0.0, 1.0
    rank_sum_a = 0.0
    rank_sum_b = 0.0
    tie_term = 0
    below = 0
    for value in sorted(pooled):
        t = pooled[value]
        midrank = below + (t + 1) / 2.0
        rank_sum_a += counts_a.get(value, 0) * midrank
        rank_sum_b += counts_b.get(value, 0) * midrank
        tie_term += t**3 - t
        below += t
    h = 12.0 / (n * (n + 1)) * (rank_sum_a**2 / n_a + rank_sum_b**2 / n_b) - 3.0 * (n + 1)
    h /= 1.0 - tie_term / (n**3 - n)
    h = max(h, 0.0)  # cancellation can leave -1e-15
    return h, float(chi2.sf(h, 1))


def kruskal_wallis(group_a: Sequence[float], group_b: Sequence[float]) -> tuple[float, float]:
    """Two-group Kruskal-Wallis H (tie-corrected) and chi-square(1) p-value.

    All-identical pooled values give ``(0.0, 1.0)``.
    """
    if not group_a or not group_b:
        raise ValueError("both groups must be non-empty")
    if len(group_a) + len(group_b) < 3:
        raise ValueError("need at least 3 observations in total")
    return _kw_from_counts(Counter(group_a), Counter(group_b))


def _label_from_counts(word: str, counts: Counter, baseline: Counter, alpha: float) -> ValenceLabel:
    n = sum(counts.values())
    mean = sum(v * c for v, c in counts.items()) / n if n else None
    n_base = sum(baseline.values())
    if n < MIN_RATINGS or n_base == 0:
        return ValenceLabel(word, NEUTRAL, None, mean, n)
    _, p = _kw_from_counts(counts, baseline)
    label = NEUTRAL
    if p < alpha:
        base_mean = sum(v * c for v, c in baseline.items()) / n_base
        if mean < base_mean:
            label = NEGATIVE
        elif mean > base_mean:
            label = POSITIVE
    return ValenceLabel(word, label, p, mean, n)


def categorize_word(sample: ValenceSample, baseline: Sequence[float],
                    alpha: float = DEFAULT_ALPHA) -> ValenceLabel:
    """Label one word against ``baseline`` (all other ratings in the group)."""
    return _label_from_counts(sample.word, Counter(sample.ratings), Counter(baseline), alpha)


def collect_ratings(records: Iterable) -> dict[str, Counter]:
    ratings: dict[str, Counter] = {}
    for rec in records:
        for word, rating in rec.valences.items():
            ratings.setdefault(word, Counter())[rating] += 1
    return ratings


def categorize_group(records: Sequence, alpha: float = DEFAULT_ALPHA,
                     rating_source: Sequence | None = None) -> dict[str, ValenceLabel]:
    """Label every cue/response word of ``records``.

    Ratings come from ``records`` themselves (group-specific labels) unless
    ``rating_source`` is given, e.g. the whole dataset for a pooled-mode
    sensitivity check. Each word is tested against the pooled ratings of all
    other words, so the baseline is ``total - own``.
    """
    ratings = collect_ratings(rating_source if rating_source is not None else records)
    total: Counter = Counter()
    for c in ratings.values():
        total.update(c)
    vocabulary = sorted({w for rec in records for w in rec.words})
    labels = {}
    for word in vocabulary:
        own = ratings.get(word, Counter())
        baseline = total - own
        labels[word] = _label_from_counts(word, own, baseline, alpha)
    return labels


def write_valence_table(labels: Mapping[str, ValenceLabel], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("word\tlabel\tp\tmean\tn\n")
        for word in sorted(labels):
            lab = labels[word]
            p = "" if lab.p_value is None else repr(lab.p_value)
            mean = "" if lab.mean is None else repr(lab.mean)
            fh.write(f"{word}\t{lab.label}\t{p}\t{mean}\t{lab.n}\n")
