"""Semantic frames: first-neighbour subgraphs, valence auras and overlap."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import NodeNotFound
from .graph import FRAME_HUB_FRACTION, Bfmn, NetworkFeatures, network_features
from .valence import LABELS, NEGATIVE, NEUTRAL, POSITIVE


@dataclass(frozen=True)
class SemanticFrame:
    target: str
    members: frozenset[str]
    induced_edges: tuple[tuple[str, str], ...]
    member_valences: Mapping[str, str] = field(hash=False)
    target_valence: str = NEUTRAL

    @property
    def degree(self) -> int:
        return len(self.members)

    @property
    def n_nodes_table(self) -> int:
        """Node count including the target, as reported in frame tables."""
        return len(self.members) + 1

    def graph(self) -> Bfmn:
        valence = dict(self.member_valences)
        valence[self.target] = self.target_valence
        return Bfmn.from_edges(self.induced_edges, valence, nodes=[self.target, *sorted(self.members)])


@dataclass(frozen=True)
class Aura:
    target: str
    counts: Mapping[str, int] = field(hash=False)
    polarity: str = NEUTRAL


def extract_frame(g: Bfmn, target: str) -> SemanticFrame:
    if target not in g:
        raise NodeNotFound(target)
    members = g.neighbors(target)
    sub = g.subgraph({target, *members})
    return SemanticFrame(
        target=target,
        members=members,
        induced_edges=tuple(sub.edges),
        member_valences={m: g.valence[m] for m in sorted(members)},
        target_valence=g.valence[target],
    )


def aura(frame: SemanticFrame) -> Aura:
    """Modal valence of the frame members (the target is not counted).
    A tie for the maximum count, or an empty frame, gives neutral."""
    counts = {lab: 0 for lab in (POSITIVE, NEUTRAL, NEGATIVE)}
    for lab in frame.member_valences.values():
        counts[lab] += 1
    top = max(counts.values())
    winners = [lab for lab in LABELS if counts[lab] == top]
    polarity = winners[0] if top > 0 and len(winners) == 1 else NEUTRAL
    return Aura(frame.target, counts, polarity)


def jaccard(frame_a: SemanticFrame, frame_b: SemanticFrame) -> float:
    union = frame_a.members | frame_b.members
    if not union:
        return 0.0
    return len(frame_a.members & frame_b.members) / len(union)


def frame_features(frame: SemanticFrame, top_fraction: float = FRAME_HUB_FRACTION) -> NetworkFeatures:
    return network_features(frame.graph(), top_fraction)


def jaccard_matrix(frames: Mapping[str, SemanticFrame],
                   pairs: Iterable[tuple[str, str]] | None = None) -> list[tuple[str, str, float]]:
    """Jaccard for the given target pairs (default: all unordered pairs, sorted)."""
    if pairs is None:
        pairs = itertools.combinations(sorted(frames), 2)
    return [(a, b, jaccard(frames[a], frames[b])) for a, b in pairs]


def write_jaccard_tsv(rows: Sequence[tuple[str, str, float]], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("target_a\ttarget_b\tjaccard\n")
        for a, b, j in rows:
            fh.write(f"{a}\t{b}\t{j!r}\n")


def frame_report(frame: SemanticFrame, features: NetworkFeatures | None = None) -> dict:
    au = aura(frame)
    features = features or frame_features(frame)
    return {
        "target": frame.target,
        "target_valence": frame.target_valence,
        "degree": frame.degree,
        "members": [{"word": m, "valence": frame.member_valences[m]} for m in sorted(frame.members)],
        "aura": {"counts": dict(au.counts), "polarity": au.polarity},
        "features": features.to_dict(),
    }
