"""Parsing and cleaning of free-association, valence and MAS-IT files, plus
lexical resource loading (lemma map, emotion lexicon, concreteness norms)."""

from __future__ import annotations

import csv
import logging
import math
import re
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import BadFlagRow, BadRating, BadScore, DataError, MissingColumn

log = logging.getLogger(__name__)

EMOTIONS = ("joy", "trust", "fear", "surprise", "sadness", "disgust", "anger", "anticipation")
MAX_RESPONSES = 3
RATING_RANGE = range(1, 6)
CONCRETENESS_RANGE = (1.0, 5.0)

_TRAILING_INDEX = re.compile(r"^(.*?)[_\-]?\d+$")


def normalize_word(word: str | None) -> str:
    """Lowercase, trim and collapse internal whitespace. Accents, apostrophes
    and multi-word expressions are preserved."""
    if word is None:
        return ""
    return " ".join(str(word).split()).lower()


def group_tag_from_id(participant_id: str) -> str:
    """``gpt_oss_psychology_001`` -> ``gpt_psychology``; ``experts_12`` -> ``experts``."""
    pid = participant_id.strip().lower()
    m = _TRAILING_INDEX.match(pid)
    base = m.group(1) if m and m.group(1) else pid
    if base.startswith("gpt_oss_"):
        return "gpt_" + base[len("gpt_oss_"):]
    return base


@dataclass(frozen=True)
class AssociationRecord:
    participant_id: str
    group_tag: str
    cue: str
    responses: tuple[str, ...] = ()
    valences: Mapping[str, int] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if len(self.responses) > MAX_RESPONSES:
            raise ValueError(f"{self.participant_id}/{self.cue}: more than {MAX_RESPONSES} responses")
        if not self.cue or any(not r for r in self.responses):
            raise ValueError(f"{self.participant_id}: empty word in record")
        allowed = {self.cue, *self.responses}
        for word, rating in self.valences.items():
            if word not in allowed:
                raise ValueError(f"{self.participant_id}/{self.cue}: valence for foreign word {word!r}")
            if rating not in RATING_RANGE:
                raise ValueError(f"{self.participant_id}/{self.cue}: rating {rating} outside 1..5")

    @property
    def words(self) -> tuple[str, ...]:
        return (self.cue, *self.responses)


@dataclass(frozen=True)
class MasItScore:
    participant_id: str
    item_scores: tuple[int, ...]
    factor_scores: Mapping[str, int] = field(default_factory=dict, hash=False)

    @property
    def total(self) -> int:
        return sum(self.item_scores)


@dataclass(frozen=True)
class GroupAssignment:
    participant_id: str
    subgroup: str  # low_anxiety | high_anxiety | excluded | unsplit
    total: int


@dataclass(frozen=True)
class Diagnostic:
    line: int
    participant_id: str
    kind: str
    message: str


@dataclass
class ParsedFile:
    records: list
    diagnostics: list[Diagnostic]


@dataclass(frozen=True)
class DroppedParticipant:
    participant_id: str
    missing_cells: int
    expected_cells: int

    @property
    def reason(self) -> str:
        return f"{self.missing_cells}/{self.expected_cells} response cells missing (>= 1/3)"


@dataclass(frozen=True)
class ColumnSpec:
    """Header names of the association file. Overridable from the
    ``[columns]`` section of a run config."""

    participant_id: str = "participant_id"
    cue: str = "cue"
    responses: tuple[str, ...] = ("response_1", "response_2", "response_3")
    valence_cue: str = "valence_cue"
    valence_responses: tuple[str, ...] = ("valence_r1", "valence_r2", "valence_r3")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "ColumnSpec":
        kwargs: dict = {}
        for key in ("participant_id", "cue", "valence_cue"):
            if key in mapping:
                kwargs[key] = mapping[key].strip()
        for key in ("responses", "valence_responses"):
            if key in mapping:
                kwargs[key] = tuple(c.strip() for c in mapping[key].split(",") if c.strip())
        spec = cls(**kwargs)
        if len(spec.responses) != len(spec.valence_responses) or len(spec.responses) > MAX_RESPONSES:
            raise ValueError("responses and valence_responses must list the same number (<= 3) of columns")
        return spec

    @property
    def required(self) -> tuple[str, ...]:
        return (self.participant_id, self.cue, *self.responses, self.valence_cue, *self.valence_responses)


def _parse_rating(cell: str | None) -> int | None:
    if cell is None or not cell.strip():
        return None
    text = cell.strip()
    try:
        value = float(text)
    except ValueError:
        raise BadRating(f"rating {text!r} is not a number") from None
    if not value.is_integer() or int(value) not in RATING_RANGE:
        raise BadRating(f"rating {text!r} outside 1..5")
    return int(value)


def _open_csv(path: Path | str):
    return open(path, newline="", encoding="utf-8-sig")


def _check_header(fieldnames: Sequence[str] | None, required: Iterable[str], path) -> None:
    present = set(fieldnames or ())
    missing = [c for c in required if c not in present]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")


def parse_associations(path: Path | str, columns: ColumnSpec = ColumnSpec()) -> ParsedFile:
    """Read an association/valence CSV (one row per participant x cue).

    Rows with out-of-range or non-numeric ratings, blank ids/cues, or a
    repeated (participant, cue) pair are rejected and reported in
    ``diagnostics``; everything else becomes an :class:`AssociationRecord`.
    """
    records: list[AssociationRecord] = []
    diagnostics: list[Diagnostic] = []
    seen: set[tuple[str, str]] = set()
    with _open_csv(path) as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, columns.required, path)
        for row in reader:
            line = reader.line_num
            pid = (row.get(columns.participant_id) or "").strip()
            cue = normalize_word(row.get(columns.cue))
            if not pid or not cue:
                diagnostics.append(Diagnostic(line, pid, "MissingValue", "blank participant id or cue"))
                continue
            try:
                cue_rating = _parse_rating(row.get(columns.valence_cue))
                pairs = []
                for rcol, vcol in zip(columns.responses, columns.valence_responses):
                    word = normalize_word(row.get(rcol))
                    rating = _parse_rating(row.get(vcol))
                    if word:
                        pairs.append((word, rating))
            except BadRating as exc:
                diagnostics.append(Diagnostic(line, pid, "BadRating", str(exc)))
                continue
            if (pid, cue) in seen:
                diagnostics.append(
                    Diagnostic(line, pid, "DuplicateParticipantRow", f"second row for cue {cue!r}")
                )
                continue
            seen.add((pid, cue))
            valences: dict[str, int] = {}
            if cue_rating is not None:
                valences[cue] = cue_rating
            for word, rating in pairs:
                if rating is not None:
                    valences.setdefault(word, rating)
            records.append(
                AssociationRecord(
                    participant_id=pid,
                    group_tag=group_tag_from_id(pid),
                    cue=cue,
                    responses=tuple(w for w, _ in pairs),
                    valences=valences,
                )
            )
    for d in diagnostics:
        log.warning("%s:%d %s %s", path, d.line, d.kind, d.message)
    return ParsedFile(records, diagnostics)


def write_associations_csv(records: Iterable[AssociationRecord], path: Path | str,
                           columns: ColumnSpec = ColumnSpec()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns.required)
        n_slots = len(columns.responses)
        for rec in records:
            responses = list(rec.responses) + [""] * (n_slots - len(rec.responses))
            ratings = [rec.valences.get(w, "") if w else "" for w in responses]
            writer.writerow([rec.participant_id, rec.cue, *responses,
                             rec.valences.get(rec.cue, ""), *ratings])


def parse_masit(path: Path | str, id_column: str = "participant_id", item_prefix: str = "item_",
                factor_items: Mapping[str, Sequence[int]] | None = None) -> ParsedFile:
    """Read MAS-IT item scores. Items are the columns starting with
    ``item_prefix`` in header order; ``factor_items`` maps a factor name to
    1-based item indices."""
    scores: list[MasItScore] = []
    diagnostics: list[Diagnostic] = []
    seen: set[str] = set()
    with _open_csv(path) as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, [id_column], path)
        item_cols = [c for c in reader.fieldnames or () if c.startswith(item_prefix)]
        if not item_cols:
            raise MissingColumn(f"{path}: no columns with prefix {item_prefix!r}")
        for row in reader:
            line = reader.line_num
            pid = (row.get(id_column) or "").strip()
            if not pid:
                diagnostics.append(Diagnostic(line, pid, "MissingValue", "blank participant id"))
                continue
            try:
                items = [_parse_rating(row.get(c)) for c in item_cols]
            except BadRating as exc:
                diagnostics.append(Diagnostic(line, pid, "BadRating", str(exc)))
                continue
            if any(v is None for v in items):
                diagnostics.append(Diagnostic(line, pid, "MissingValue", "blank MAS-IT item"))
                continue
            if pid in seen:
                diagnostics.append(Diagnostic(line, pid, "DuplicateParticipantRow", "second MAS-IT row"))
                continue
            seen.add(pid)
            factors = {}
            for name, idx in (factor_items or {}).items():
                factors[name] = sum(items[i - 1] for i in idx)
            scores.append(MasItScore(pid, tuple(items), factors))
    return ParsedFile(scores, diagnostics)


def clean_participants(records: Sequence[AssociationRecord],
                       cue_set_size: int | Mapping[str, int]):
    """Drop participants with 1/3 or more of their response cells missing.

    ``cue_set_size`` is either one size for everyone or a per-participant
    mapping. Expected cells are ``3 * cue_set_size``; cues with no row at
    all count as fully missing. Returns ``(kept_records, dropped)``.
    """
    by_pid: dict[str, int] = defaultdict(int)
    for rec in records:
        by_pid[rec.participant_id] += len(rec.responses)
    dropped_ids: dict[str, DroppedParticipant] = {}
    for pid, given in by_pid.items():
        size = cue_set_size if isinstance(cue_set_size, int) else cue_set_size[pid]
        if size <= 0:
            raise ValueError("cue_set_size must be positive")
        expected = MAX_RESPONSES * size
        missing = max(expected - given, 0)
        if 3 * missing >= expected:
            dropped_ids[pid] = DroppedParticipant(pid, missing, expected)
    kept = [r for r in records if r.participant_id not in dropped_ids]
    dropped = sorted(dropped_ids.values(), key=lambda d: d.participant_id)
    return kept, dropped


def assign_subgroups(scores: Sequence[MasItScore], split: bool = True) -> list[GroupAssignment]:
    """Median split of MAS-IT totals; totals equal to the median are excluded."""
    if not scores:
        raise ValueError("assign_subgroups needs at least one score")
    if not split:
        return [GroupAssignment(s.participant_id, "unsplit", s.total) for s in scores]
    median = statistics.median([s.total for s in scores])
    out = []
    for s in scores:
        if s.total < median:
            sub = "low_anxiety"
        elif s.total > median:
            sub = "high_anxiety"
        else:
            sub = "excluded"
        out.append(GroupAssignment(s.participant_id, sub, s.total))
    return out


def edge_frequency_table(records: Iterable[AssociationRecord]) -> Counter:
    """Count every cue-response instance under an unordered pair key
    ``(min(a, b), max(a, b))``. Kept outside the (unweighted) graph; used only
    to filter pairs for display."""
    table: Counter = Counter()
    for rec in records:
        for resp in rec.responses:
            table[pair_key(rec.cue, resp)] += 1
    return table


def pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


# -- lexical resources ------------------------------------------------------


@dataclass
class LexicalResources:
    lemma_map: dict[str, str] = field(default_factory=dict)
    emotion_lexicon: dict[str, frozenset[str]] = field(default_factory=dict)
    concreteness_norms: dict[str, float] = field(default_factory=dict)
    translation_map: dict[str, str] = field(default_factory=dict)

    def lemma(self, word: str) -> str:
        w = normalize_word(word)
        return self.lemma_map.get(w, w)

    def display(self, word: str) -> str:
        return self.translation_map.get(word, word)


def _resource_rows(path: Path | str):
    with open(path, encoding="utf-8-sig") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            sep = "\t" if "\t" in line else ","
            yield lineno, [f.strip() for f in line.split(sep)]


def _put(target: dict, key, value, path, lineno) -> None:
    if key in target and target[key] != value:
        log.warning("%s:%d duplicate entry %r, keeping the last one", path, lineno, key)
    target[key] = value


def _load_pairs(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, row in _resource_rows(path):
        if len(row) != 2 or not row[0] or not row[1]:
            raise DataError(f"{path}:{lineno}: expected two columns")
        _put(out, normalize_word(row[0]), normalize_word(row[1]), path, lineno)
    return out


def _load_emotions(path) -> dict[str, frozenset[str]]:
    """Wide rows ``word,f1..f8`` in Plutchik order (joy, trust, fear, surprise,
    sadness, disgust, anger, anticipation), or NRC long rows
    ``word<TAB>emotion<TAB>0|1``. A non-conforming first row is taken as a header."""
    wide: dict[str, frozenset[str]] = {}
    long: dict[str, set[str]] = defaultdict(set)
    first = True
    for lineno, row in _resource_rows(path):
        is_first, first = first, False
        if len(row) == 3 and row[1].lower() in EMOTIONS + ("positive", "negative"):
            if row[2] not in ("0", "1"):
                raise BadFlagRow(f"{path}:{lineno}: flag {row[2]!r} is not 0/1")
            word = normalize_word(row[0])
            long.setdefault(word, set())
            if row[2] == "1" and row[1].lower() in EMOTIONS:
                long[word].add(row[1].lower())
            continue
        flags = row[1:]
        if len(row) != 1 + len(EMOTIONS) or any(f not in ("0", "1") for f in flags):
            if is_first:
                continue
            raise BadFlagRow(f"{path}:{lineno}: expected word + 8 binary flags")
        tagged = frozenset(e for e, f in zip(EMOTIONS, flags) if f == "1")
        _put(wide, normalize_word(row[0]), tagged, path, lineno)
    wide.update({w: frozenset(e) for w, e in long.items()})
    return wide


def _load_concreteness(path) -> dict[str, float]:
    out: dict[str, float] = {}
    first = True
    lo, hi = CONCRETENESS_RANGE
    for lineno, row in _resource_rows(path):
        is_first, first = first, False
        if len(row) != 2:
            raise BadScore(f"{path}:{lineno}: expected word and score")
        try:
            score = float(row[1])
        except ValueError:
            if is_first:
                continue
            raise BadScore(f"{path}:{lineno}: score {row[1]!r} is not a number") from None
        if not math.isfinite(score) or not lo <= score <= hi:
            raise BadScore(f"{path}:{lineno}: score {score} outside {lo:g}..{hi:g}")
        _put(out, normalize_word(row[0]), score, path, lineno)
    return out


def load_resources(lemma_path=None, emotion_path=None, concreteness_path=None,
                   translation_path=None) -> LexicalResources:
    """Load whichever resource files are given; missing ones stay empty."""
    return LexicalResources(
        lemma_map=_load_pairs(lemma_path) if lemma_path else {},
        emotion_lexicon=_load_emotions(emotion_path) if emotion_path else {},
        concreteness_norms=_load_concreteness(concreteness_path) if concreteness_path else {},
        translation_map=_load_pairs(translation_path) if translation_path else {},
    )


_NW_DIRECTIVE = re.compile(r"^#\s*n_w:\s*(\d+)\s*$")


def _cue_set_text(ref: int | str | Path) -> str:
    if isinstance(ref, int) or (isinstance(ref, str) and ref.strip().isdigit()):
        name = f"set_{int(ref)}.txt"
        return importlib_resources.files("bfmn").joinpath("data", "cue_sets", name).read_text("utf-8")
    return Path(ref).read_text(encoding="utf-8")


def cue_set_size(ref: int | str | Path) -> int:
    """Administered set size: the ``# n_w: N`` directive if present, else the
    number of listed cues. The appendix lists fewer English forms than N_w
    for sets 3-5, so the directive is authoritative."""
    text = _cue_set_text(ref)
    for line in text.splitlines():
        m = _NW_DIRECTIVE.match(line.strip())
        if m:
            return int(m.group(1))
    return len(load_cue_set(ref))


def load_cue_set(ref: int | str | Path) -> list[str]:
    """Cue list by registry id (1..5, bundled) or by path to a one-word-per-line file."""
    text = _cue_set_text(ref)
    cues = []
    for line in text.splitlines():
        word = normalize_word(line.split("#", 1)[0])
        if word and word not in cues:
            cues.append(word)
    return cues
