"""Config-driven orchestration shared by the CLI subcommands.

The run config is an INI file; relative paths resolve against the file's
directory. See the README for the full key list.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
import zlib
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .affect import DEFAULT_N_NULL, EmotionProfile, emotion_zscores
from .concreteness import DEFAULT_N_SAMPLES, concreteness_test, write_concreteness_tsv
from .errors import DataError, MissingReport, UnknownGroup
from .frames import SemanticFrame, extract_frame, frame_features, frame_report, jaccard_matrix, write_jaccard_tsv
from .graph import FRAME_HUB_FRACTION, FULL_NETWORK_HUB_FRACTION, Bfmn, build_bfmn, network_features, write_graph
from .ingestion import (
    AssociationRecord,
    ColumnSpec,
    Diagnostic,
    DroppedParticipant,
    LexicalResources,
    assign_subgroups,
    clean_participants,
    cue_set_size,
    edge_frequency_table,
    load_resources,
    normalize_word,
    pair_key,
    parse_associations,
    parse_masit,
)
from .render import RenderSpec, render_flower_svg, render_frame_svg, render_jaccard_bars
from .twins import EndpointConfig
from .valence import categorize_group, write_valence_table

log = logging.getLogger(__name__)

ALL = "all"
UNSCORED = "unscored"


class ConfigError(ValueError):
    """Invalid or incomplete run configuration (a usage error)."""


@dataclass
class RunConfig:
    associations: list[Path] = field(default_factory=list)
    masit: list[Path] = field(default_factory=list)
    lemmas: Path | None = None
    emotions: Path | None = None
    concreteness: Path | None = None
    translations: Path | None = None
    output: Path = Path("bfmn_out")
    request_log: Path | None = None
    masit_items: Path | None = None

    seed: int | None = None
    alpha_valence: float = 0.1
    alpha_concreteness: float = 0.1
    n_null_concreteness: int = DEFAULT_N_SAMPLES
    n_null_emotion: int = DEFAULT_N_NULL
    hub_fraction_full: float = FULL_NETWORK_HUB_FRACTION
    hub_fraction_frame: float = FRAME_HUB_FRACTION
    min_edge_frequency: int = 1
    median_split: bool = True
    valence_source: str = "group"
    exclude_unmatched_emotions: bool = False

    columns: ColumnSpec = field(default_factory=ColumnSpec)
    masit_id_column: str = "participant_id"
    masit_item_prefix: str = "item_"
    masit_factors: dict[str, list[int]] = field(default_factory=dict)
    cue_sets: dict[str, str] = field(default_factory=lambda: {"default": "auto"})
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)

    def __post_init__(self):
        for name in ("alpha_valence", "alpha_concreteness"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        for name in ("hub_fraction_full", "hub_fraction_frame"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in (0, 1]")
        if self.min_edge_frequency < 1:
            raise ConfigError("min_edge_frequency must be >= 1")
        if self.valence_source not in ("group", "dataset"):
            raise ConfigError("valence_source must be 'group' or 'dataset'")

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("this command resamples; pass --seed or set [analysis] seed")
        return self.seed

    def digest(self) -> str:
        """Hash of every analysis-relevant setting (paths by name, not content)."""
        payload = asdict(self)
        payload.pop("output")
        payload.pop("request_log")
        return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.replace(" ", "").split(",") if x]


def load_config(path: Path | str | None = None, **overrides) -> RunConfig:
    """Read an INI run config. ``overrides`` (non-None values) win over the file."""
    kwargs: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        cp = configparser.ConfigParser(inline_comment_prefixes=(";",), interpolation=None)
        cp.optionxform = str
        cp.read(path, encoding="utf-8")
        base = path.parent

        def p(value: str) -> Path:
            q = Path(value.strip()).expanduser()
            return q if q.is_absolute() else base / q

        if cp.has_section("paths"):
            sec = cp["paths"]
            for key in ("associations", "masit"):
                if key in sec:
                    kwargs[key] = [p(v) for v in sec[key].split(",") if v.strip()]
            for key in ("lemmas", "emotions", "concreteness", "translations", "output", "request_log"):
                if sec.get(key, "").strip():
                    kwargs[key] = p(sec[key])
        if cp.has_section("analysis"):
            sec = cp["analysis"]
            casts = {"seed": int, "alpha_valence": float, "alpha_concreteness": float,
                     "n_null_concreteness": int, "n_null_emotion": int, "hub_fraction_full": float,
                     "hub_fraction_frame": float, "min_edge_frequency": int, "median_split": _bool,
                     "valence_source": str.strip, "exclude_unmatched_emotions": _bool}
            for key, value in sec.items():
                if key not in casts:
                    raise ConfigError(f"unknown [analysis] key {key!r}")
                try:
                    kwargs[key] = casts[key](value)
                except ValueError as exc:
                    raise ConfigError(f"[analysis] {key}: {exc}") from exc
        if cp.has_section("columns"):
            try:
                kwargs["columns"] = ColumnSpec.from_mapping(dict(cp["columns"]))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if cp.has_section("masit"):
            sec = cp["masit"]
            if "id_column" in sec:
                kwargs["masit_id_column"] = sec["id_column"].strip()
            if "item_prefix" in sec:
                kwargs["masit_item_prefix"] = sec["item_prefix"].strip()
            if sec.get("items", "").strip():
                kwargs["masit_items"] = p(sec["items"])
        if cp.has_section("masit_factors"):
            kwargs["masit_factors"] = {k: _int_list(v) for k, v in cp["masit_factors"].items()}
        if cp.has_section("cue_sets"):
            sets = {"default": "auto"}
            for k, v in cp["cue_sets"].items():
                v = v.strip()
                sets[k] = v if v == "auto" or v.isdigit() else str(p(v))
            kwargs["cue_sets"] = sets
        if cp.has_section("endpoint"):
            names = {f.name: f.type for f in fields(EndpointConfig)}
            ep = {}
            for key, value in cp["endpoint"].items():
                if key not in names:
                    raise ConfigError(f"unknown [endpoint] key {key!r}")
                default = getattr(EndpointConfig(), key)
                if key == "temperature":
                    ep[key] = float(value) if value.strip() else None
                elif isinstance(default, bool):
                    ep[key] = _bool(value)
                elif isinstance(default, int):
                    ep[key] = int(value)
                elif isinstance(default, float):
                    ep[key] = float(value)
                else:
                    ep[key] = value.strip()
            kwargs["endpoint"] = EndpointConfig(**ep)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**kwargs)


# -- dataset ------------------------------------------------------------------


@dataclass
class Dataset:
    records: list[AssociationRecord]
    dropped: list[DroppedParticipant]
    diagnostics: list[Diagnostic]
    subgroup: dict[str, str]
    group_of: dict[str, str]

    def participants(self, group: str, subgroup: str = ALL) -> list[str]:
        return sorted(pid for pid, g in self.group_of.items()
                      if g == group and (subgroup == ALL or self.subgroup.get(pid) == subgroup))

    def summary(self) -> dict:
        counts: dict[str, Counter] = defaultdict(Counter)
        for pid, g in self.group_of.items():
            counts[g]["kept"] += 1
            counts[g][self.subgroup[pid]] += 1
        return {g: dict(sorted(c.items())) for g, c in sorted(counts.items())}


def _cue_sizes(records: Sequence[AssociationRecord], cue_sets: Mapping[str, str]) -> dict[str, int]:
    cues_by_pid: dict[str, set[str]] = defaultdict(set)
    tag_of = {}
    for r in records:
        cues_by_pid[r.participant_id].add(r.cue)
        tag_of[r.participant_id] = r.group_tag
    sizes = {}
    cache: dict[str, int] = {}
    for pid, cues in cues_by_pid.items():
        ref = cue_sets.get(tag_of[pid], cue_sets.get("default", "auto"))
        if ref == "auto":
            sizes[pid] = len(cues)
        else:
            if ref not in cache:
                cache[ref] = cue_set_size(ref)
            sizes[pid] = max(cache[ref], len(cues))
    return sizes


def load_dataset(config: RunConfig) -> Dataset:
    """Parse, clean and median-split. MAS-IT totals are split per group tag,
    over kept participants only; participants without a score are
    ``unscored``; groups without any MAS-IT data (or with splitting off)
    are ``all``."""
    if not config.associations:
        raise ConfigError("no association files configured ([paths] associations)")
    records: list[AssociationRecord] = []
    diagnostics: list[Diagnostic] = []
    seen: set[tuple[str, str]] = set()
    for path in config.associations:
        parsed = parse_associations(path, config.columns)
        for rec in parsed.records:
            key = (rec.participant_id, rec.cue)
            if key in seen:
                diagnostics.append(Diagnostic(0, rec.participant_id, "DuplicateParticipantRow",
                                              f"{path}: cue {rec.cue!r} already read from another file"))
                continue
            seen.add(key)
            records.append(rec)
        diagnostics += parsed.diagnostics
    if not records:
        raise DataError("no valid association rows in the configured files")
    kept, dropped = clean_participants(records, _cue_sizes(records, config.cue_sets))
    group_of = {r.participant_id: r.group_tag for r in kept}

    scores = []
    for path in config.masit:
        parsed = parse_masit(path, config.masit_id_column, config.masit_item_prefix, config.masit_factors)
        scores += parsed.records
        diagnostics += parsed.diagnostics
    scores_by_group = defaultdict(list)
    for s in scores:
        if s.participant_id in group_of:
            scores_by_group[group_of[s.participant_id]].append(s)

    subgroup = {}
    for pid, g in group_of.items():
        subgroup[pid] = UNSCORED if scores_by_group.get(g) else ALL
    for g, group_scores in scores_by_group.items():
        for a in assign_subgroups(group_scores, split=config.median_split):
            subgroup[a.participant_id] = ALL if a.subgroup == "unsplit" else a.subgroup
    return Dataset(kept, dropped, diagnostics, subgroup, group_of)


def parse_selector(selector: str) -> tuple[str, str]:
    group, _, sub = selector.partition(":")
    return group.strip(), (sub.strip() or ALL)


def select_records(ds: Dataset, selector: str) -> list[AssociationRecord]:
    group, sub = parse_selector(selector)
    pids = set(ds.participants(group, sub))
    if not pids:
        known = sorted({f"{g}:{ds.subgroup[p]}" for p, g in ds.group_of.items()} | set(ds.group_of.values()))
        raise UnknownGroup(f"no participants for {selector!r}; known: {', '.join(known)}")
    return [r for r in ds.records if r.participant_id in pids]


def load_lexicon(config: RunConfig) -> LexicalResources:
    return load_resources(config.lemmas, config.emotions, config.concreteness, config.translations)


def build_group_network(ds: Dataset, selector: str, config: RunConfig):
    records = select_records(ds, selector)
    source = ds.records if config.valence_source == "dataset" else None
    labels = categorize_group(records, config.alpha_valence, rating_source=source)
    g = build_bfmn(records, labels, group_tag=selector)
    return records, labels, g


def sub_seed(seed: int, kind: str, target: str) -> list[int]:
    """Order-independent seed for one (analysis, target) pair."""
    return [seed, zlib.crc32(kind.encode()), zlib.crc32(target.encode())]


def resolve_targets(g: Bfmn, targets: Sequence[str], lex: LexicalResources) -> tuple[list[str], list[str]]:
    """Map requested targets onto graph nodes (directly or through the
    translation map, English to source language); return (found, skipped)."""
    reverse = {normalize_word(v): k for k, v in sorted(lex.translation_map.items())}
    found, skipped = [], []
    for t in targets:
        w = normalize_word(t)
        node = w if w in g else reverse.get(w)
        if node is not None and node in g and g.degree(node) > 0:
            if node not in found:
                found.append(node)
        else:
            skipped.append(t)
    return found, skipped


# -- analysis bundle ------------------------------------------------------------


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _file_digest(paths: Sequence[Path | None]) -> str:
    h = hashlib.sha256()
    for p in paths:
        if p is None:
            continue
        h.update(Path(p).name.encode())
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def selector_slug(selector: str) -> str:
    return selector.replace(":", "__").replace("/", "_")


def analyze(config: RunConfig, selector: str, targets: Sequence[str], out_dir: Path | None = None,
            ds: Dataset | None = None) -> Path:
    """Write the full report bundle for one group and return its directory."""
    seed = config.require_seed()
    ds = ds or load_dataset(config)
    lex = load_lexicon(config)
    records, labels, g = build_group_network(ds, selector, config)
    freq = edge_frequency_table(records)
    found, skipped = resolve_targets(g, targets, lex)
    for t in skipped:
        log.warning("target %r not in the %s network; skipped", t, selector)

    out = Path(out_dir) if out_dir else config.output / selector_slug(selector)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    for stale in (out / "frames").glob("*.json"):
        stale.unlink()

    write_valence_table(labels, out / "valence.tsv")
    write_graph(g, out / "edges.tsv", out / "nodes.tsv", lex.translation_map)
    whole = network_features(g, config.hub_fraction_full)
    _dump(whole.to_dict(), out / "features.json")

    frames: dict[str, SemanticFrame] = {}
    emotions: dict[str, dict] = {}
    conc_rows = []
    notes = []
    for target in found:
        frame = extract_frame(g, target)
        frames[target] = frame
        report = frame_report(frame, frame_features(frame, config.hub_fraction_frame))
        report["display"] = lex.display(target)
        for m in report["members"]:
            m["display"] = lex.display(m["word"])
        report["edges"] = [[u, v, freq.get(pair_key(u, v), 0)] for u, v in frame.induced_edges]

        if lex.emotion_lexicon:
            try:
                prof = emotion_zscores(frame.members, lex, config.n_null_emotion,
                                       sub_seed(seed, "emotion", target),
                                       exclude_unmatched=config.exclude_unmatched_emotions)
                emotions[target] = report["emotions"] = prof.to_dict()
            except (DataError, ValueError) as exc:
                notes.append(f"{target}: emotions not computed ({exc})")
        if lex.concreteness_norms:
            try:
                res = concreteness_test(frame, lex.concreteness_norms, lex.lemma_map,
                                        config.n_null_concreteness, sub_seed(seed, "concreteness", target),
                                        config.alpha_concreteness, group_tag=selector)
                conc_rows.append(res)
                report["concreteness"] = res.to_dict()
            except DataError as exc:
                notes.append(f"{target}: concreteness not computed ({exc})")
        _dump(report, out / "frames" / f"{target}.json")

    write_jaccard_tsv(jaccard_matrix(frames, None), out / "jaccard.tsv")
    write_concreteness_tsv(conc_rows, out / "concreteness.tsv")
    _dump(emotions, out / "emotions.json")
    if not lex.emotion_lexicon:
        notes.append("no emotion lexicon configured; emotions skipped")
    if not lex.concreteness_norms:
        notes.append("no concreteness norms configured; concreteness skipped")

    pids = {r.participant_id for r in records}
    _dump({
        "group": selector,
        "n_participants": len(pids),
        "n_records": len(records),
        "targets": found,
        "skipped_targets": skipped,
        "notes": notes,
        "network": whole.to_dict(),
        "valence_counts": dict(sorted(Counter(l.label for l in labels.values()).items())),
    }, out / "report.json")
    _dump({
        "tool": "bfmn",
        "version": __version__,
        "seed": seed,
        "config_hash": config.digest(),
        "data_hash": _file_digest([*config.associations, *config.masit, config.lemmas, config.emotions,
                                   config.concreteness, config.translations]),
        "group": selector,
        "targets": list(targets),
    }, out / "manifest.json")
    return out


# -- render -------------------------------------------------------------------


def frame_from_report(report: Mapping) -> tuple[SemanticFrame, dict[tuple[str, str], int], dict[str, str]]:
    members = {m["word"]: m["valence"] for m in report["members"]}
    edges = tuple((u, v) for u, v, _ in report["edges"])
    freq = {pair_key(u, v): int(n) for u, v, n in report["edges"]}
    display = {m["word"]: m.get("display", m["word"]) for m in report["members"]}
    display[report["target"]] = report.get("display", report["target"])
    frame = SemanticFrame(report["target"], frozenset(members), edges, members, report["target_valence"])
    return frame, freq, display


def render_bundle(bundle: Path | str, out_dir: Path | None = None, min_edge_frequency: int = 1,
                  log_scale: bool = False) -> list[Path]:
    bundle = Path(bundle)
    frames_dir = bundle / "frames"
    if not (bundle / "manifest.json").exists() or not frames_dir.is_dir():
        raise MissingReport(f"{bundle} is not an analysis bundle")
    out = Path(out_dir) if out_dir else bundle / "svg"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for path in sorted(frames_dir.glob("*.json")):
        report = json.loads(path.read_text(encoding="utf-8"))
        frame, freq, display = frame_from_report(report)
        if not frame.members:
            continue
        spec = RenderSpec(min_edge_frequency=min_edge_frequency, translation_map=display)
        target = report["target"]
        dest = out / f"frame_{target}.svg"
        dest.write_text(render_frame_svg(frame, spec, freq), encoding="utf-8")
        written.append(dest)
        if "emotions" in report:
            dest = out / f"flower_{target}.svg"
            dest.write_text(render_flower_svg(EmotionProfile.from_dict(report["emotions"]),
                                              title=display[target]), encoding="utf-8")
            written.append(dest)
    jac = bundle / "jaccard.tsv"
    if jac.exists():
        values = {}
        with open(jac, encoding="utf-8") as fh:
            next(fh, None)
            for line in fh:
                a, b, j = line.rstrip("\n").split("\t")
                values[f"{a} / {b}"] = float(j)
        dest = out / "jaccard.svg"
        dest.write_text(render_jaccard_bars(values, log_scale=log_scale), encoding="utf-8")
        written.append(dest)
    return written
