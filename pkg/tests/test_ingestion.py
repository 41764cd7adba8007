import csv

import pytest

from bfmn.errors import BadFlagRow, BadScore, MissingColumn
from bfmn.ingestion import (
    AssociationRecord,
    ColumnSpec,
    MasItScore,
    assign_subgroups,
    clean_participants,
    cue_set_size,
    edge_frequency_table,
    group_tag_from_id,
    load_cue_set,
    load_resources,
    normalize_word,
    parse_associations,
    parse_masit,
    write_associations_csv,
)

HEADER = ["participant_id", "cue", "response_1", "response_2", "response_3",
          "valence_cue", "valence_r1", "valence_r2", "valence_r3"]


def write_rows(path, rows, header=HEADER):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def test_twin_row_gets_group_tag_and_two_responses(tmp_path):
    p = write_rows(tmp_path / "a.csv", [["gpt_oss_psychology_001", "math", "numeri", "ansia", "", "3", "4", "1", ""]])
    parsed = parse_associations(p)
    (rec,) = parsed.records
    assert rec.group_tag == "gpt_psychology"
    assert rec.responses == ("numeri", "ansia")
    assert rec.valences == {"math": 3, "numeri": 4, "ansia": 1}


def test_all_blank_responses_give_empty_tuple(tmp_path):
    p = write_rows(tmp_path / "a.csv", [["psychology_001", "math", "", "", "", "", "", "", ""]])
    (rec,) = parse_associations(p).records
    assert rec.responses == ()
    assert rec.valences == {}


def test_one_bad_rating_in_ten_rows(tmp_path):
    rows = [[f"psychology_{i:03d}", "math", "uno", "due", "tre", "3", "3", "3", "3"] for i in range(10)]
    rows[4][6] = "6"
    parsed = parse_associations(write_rows(tmp_path / "a.csv", rows))
    assert len(parsed.records) == 9
    assert [d.kind for d in parsed.diagnostics] == ["BadRating"]


def test_duplicate_participant_cue_row_is_diagnosed(tmp_path):
    rows = [["p_1", "math", "uno", "", "", "", "", "", ""], ["p_1", "math", "due", "", "", "", "", "", ""]]
    parsed = parse_associations(write_rows(tmp_path / "a.csv", rows))
    assert len(parsed.records) == 1
    assert parsed.diagnostics[0].kind == "DuplicateParticipantRow"


def test_missing_column_raises(tmp_path):
    p = write_rows(tmp_path / "a.csv", [], header=["participant_id", "cue"])
    with pytest.raises(MissingColumn):
        parse_associations(p)


def test_custom_columns_round_trip(tmp_path):
    cols = ColumnSpec.from_mapping({"participant_id": "id", "responses": "r1,r2", "valence_responses": "v1,v2"})
    recs = [AssociationRecord("x_1", "x", "casa", ("tetto", "porta"), {"casa": 4, "porta": 2})]
    write_associations_csv(recs, tmp_path / "o.csv", cols)
    back = parse_associations(tmp_path / "o.csv", cols).records
    assert back == recs and back[0].valences == recs[0].valences


def test_normalization():
    assert normalize_word("  Computer   Science ") == "computer science"
    assert group_tag_from_id("experts_012") == "experts"
    assert group_tag_from_id("gpt_oss_highschool_001") == "gpt_highschool"


def test_record_invariants():
    with pytest.raises(ValueError):
        AssociationRecord("p", "g", "c", ("a", "b", "c", "d"))
    with pytest.raises(ValueError):
        AssociationRecord("p", "g", "c", ("a",), {"z": 3})
    with pytest.raises(ValueError):
        AssociationRecord("p", "g", "c", ("a",), {"a": 0})


def _records(pid, filled, n_cues):
    out = []
    for i in range(n_cues):
        k = min(3, max(0, filled - 3 * i))
        out.append(AssociationRecord(pid, "g", f"cue{i}", tuple(f"w{i}_{j}" for j in range(k))))
    return out


def test_cleaning_boundaries():
    full = _records("full", 30, 10)
    third = _records("third", 20, 10)        # 10 of 30 missing: exactly 1/3
    ok = _records("ok", 81, 40)              # 39 of 120 missing: 32.5%
    kept, dropped = clean_participants(full + third + ok, {"full": 10, "third": 10, "ok": 40})
    assert {r.participant_id for r in kept} == {"full", "ok"}
    assert [d.participant_id for d in dropped] == ["third"]
    assert dropped[0].missing_cells == 10 and dropped[0].expected_cells == 30


def test_cleaning_counts_absent_cue_rows_as_missing():
    kept, dropped = clean_participants(_records("p", 12, 4), 6)
    assert kept == [] and dropped[0].missing_cells == 6


def test_median_split_rules():
    scores = [MasItScore(f"p{i}", (t,)) for i, t in enumerate([10, 20, 30])]
    # totals come from item sums; single-item scores outside 1..5 are fine for this helper
    subs = [a.subgroup for a in assign_subgroups(scores)]
    assert subs == ["low_anxiety", "excluded", "high_anxiety"]
    same = [MasItScore(f"p{i}", (3, 3)) for i in range(4)]
    assert {a.subgroup for a in assign_subgroups(same)} == {"excluded"}
    assert {a.subgroup for a in assign_subgroups(same, split=False)} == {"unsplit"}


def test_masit_total_and_factors(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("participant_id,item_1,item_2,item_3\np1,1,2,5\np2,4,,1\n", encoding="utf-8")
    parsed = parse_masit(p, factor_items={"a": [1, 3]})
    (s,) = parsed.records
    assert s.total == 8 and s.factor_scores == {"a": 6}
    assert parsed.diagnostics[0].kind == "MissingValue"


def test_edge_frequency_table():
    recs = [AssociationRecord("p1", "g", "math", ("ansia",)),
            AssociationRecord("p2", "g", "math", ("ansia",)),
            AssociationRecord("p3", "g", "ansia", ("math",))]
    table = edge_frequency_table(recs)
    assert table == {("ansia", "math"): 3}
    assert edge_frequency_table([]) == {}


def test_resources(tmp_path):
    (tmp_path / "emo.csv").write_text("word,j,t,f,s,sa,d,a,an\ngioia,1,0,0,0,0,0,0,1\n", encoding="utf-8")
    (tmp_path / "lem.tsv").write_text("matematiche\tmatematica\n", encoding="utf-8")
    (tmp_path / "conc.tsv").write_text("computer science\t4.1\n", encoding="utf-8")
    lex = load_resources(tmp_path / "lem.tsv", tmp_path / "emo.csv", tmp_path / "conc.tsv")
    assert lex.emotion_lexicon["gioia"] == {"joy", "anticipation"}
    assert lex.lemma("Matematiche") == "matematica"
    assert lex.concreteness_norms == {"computer science": 4.1}

    (tmp_path / "bad.tsv").write_text("casa\t7.2\n", encoding="utf-8")
    with pytest.raises(BadScore):
        load_resources(concreteness_path=tmp_path / "bad.tsv")
    (tmp_path / "badflag.csv").write_text("gioia,1,0,0,0,0,0,0,1\nx,1,0,2,0,0,0,0,1\n", encoding="utf-8")
    with pytest.raises(BadFlagRow):
        load_resources(emotion_path=tmp_path / "badflag.csv")


def test_nrc_long_format(tmp_path):
    (tmp_path / "nrc.txt").write_text("abandon\tfear\t1\nabandon\tjoy\t0\nabandon\tnegative\t1\n", encoding="utf-8")
    lex = load_resources(emotion_path=tmp_path / "nrc.txt")
    assert lex.emotion_lexicon == {"abandon": {"fear"}}


def test_bundled_cue_sets():
    sizes = [cue_set_size(i) for i in range(1, 6)]
    assert sizes == [50, 51, 40, 41, 42]
    for i in range(1, 6):
        cues = load_cue_set(i)
        assert len(cues) == len(set(cues)) and len(cues) <= sizes[i - 1]
    assert "mathematics" in load_cue_set(1)
