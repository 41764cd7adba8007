import pytest

from bfmn.errors import NodeNotFound
from bfmn.frames import aura, extract_frame, frame_features, frame_report, jaccard, jaccard_matrix, SemanticFrame
from bfmn.graph import Bfmn
from bfmn.valence import NEGATIVE, NEUTRAL, POSITIVE


def test_extract_triangle_frame():
    g = Bfmn.from_edges([("t", "a"), ("t", "b"), ("a", "b"), ("b", "far")])
    f = extract_frame(g, "t")
    assert f.members == {"a", "b"}
    assert len(f.induced_edges) == 3
    assert f.n_nodes_table == 3
    assert set(f.induced_edges) <= set(g.edges)


def test_isolated_and_missing_targets():
    g = Bfmn({"t": [], "a": ["b"]})
    assert extract_frame(g, "t").members == frozenset()
    with pytest.raises(NodeNotFound):
        extract_frame(g, "nope")


def frame_with(counts, target_valence=POSITIVE):
    vals = {}
    for lab, n in counts.items():
        for i in range(n):
            vals[f"{lab}{i}"] = lab
    return SemanticFrame("t", frozenset(vals), tuple(("t", m) for m in sorted(vals)), vals, target_valence)


def test_aura_mode_and_ties():
    assert aura(frame_with({NEGATIVE: 5, POSITIVE: 2, NEUTRAL: 1})).polarity == NEGATIVE
    assert aura(frame_with({NEGATIVE: 3, POSITIVE: 3})).polarity == NEUTRAL
    school = aura(frame_with({NEUTRAL: 34, POSITIVE: 15, NEGATIVE: 3}))
    assert school.polarity == NEUTRAL and school.counts == {POSITIVE: 15, NEUTRAL: 34, NEGATIVE: 3}
    assert aura(frame_with({})).polarity == NEUTRAL


def test_aura_ignores_target_valence():
    assert aura(frame_with({NEGATIVE: 2, POSITIVE: 1}, target_valence=POSITIVE)).polarity == NEGATIVE


def test_jaccard_bounds():
    a = frame_with({POSITIVE: 3})
    b = SemanticFrame("u", frozenset({"x"}), (("u", "x"),), {"x": NEUTRAL})
    assert jaccard(a, a) == 1
    assert jaccard(a, b) == 0
    empty = SemanticFrame("e", frozenset(), (), {})
    assert jaccard(empty, empty) == 0
    rows = jaccard_matrix({"a": a, "b": b, "c": a})
    assert rows == [("a", "b", 0.0), ("a", "c", 1.0), ("b", "c", 0.0)]


def test_frame_features():
    star = Bfmn.from_edges([("t", m) for m in "abcd"])
    feats = frame_features(extract_frame(star, "t"))
    assert feats.clustering == 0 and feats.avg_shortest_path < 2
    assert feats.hubs[0] == ("t", 4)
    single = frame_features(extract_frame(Bfmn.from_edges([("t", "a")]), "t"))
    assert single.avg_shortest_path == 1 and single.diameter == 1


def test_report_is_serializable():
    import json

    g = Bfmn.from_edges([("t", "a"), ("t", "b")], {"a": POSITIVE})
    rep = frame_report(extract_frame(g, "t"))
    assert json.loads(json.dumps(rep))["aura"]["polarity"] == NEUTRAL
    assert rep["degree"] == 2
