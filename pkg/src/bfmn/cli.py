"""``bfmn`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 endpoint error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .affect import emotion_zscores
from .concreteness import concreteness_test, write_concreteness_tsv
from .errors import DataError, EndpointError
from .frames import extract_frame, frame_features, jaccard_matrix
from .graph import features_json, network_features
from .ingestion import load_cue_set, write_associations_csv
from .pipeline import (
    ConfigError,
    analyze,
    build_group_network,
    load_config,
    load_dataset,
    load_lexicon,
    render_bundle,
    resolve_targets,
    sub_seed,
)
from .twins import (
    EDUCATION_GROUP,
    EDUCATIONS,
    ChatClient,
    RequestLog,
    match_group_sizes,
    run_twins,
    sample_profile,
    twin_ids,
)

log = logging.getLogger("bfmn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ENDPOINT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _targets(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _config(args, need_seed: bool = False):
    cfg = load_config(args.config, seed=getattr(args, "seed", None),
                      output=Path(args.output) if getattr(args, "output", None) else None)
    if need_seed:
        cfg.require_seed()
    return cfg


def cmd_ingest(args) -> int:
    cfg = _config(args)
    ds = load_dataset(cfg)
    cfg.output.mkdir(parents=True, exist_ok=True)
    write_associations_csv(ds.records, cfg.output / "cleaned_associations.csv", cfg.columns)
    report = {
        "kept_participants": len(ds.group_of),
        "groups": ds.summary(),
        "dropped": [{"participant_id": d.participant_id, "reason": d.reason} for d in ds.dropped],
        "diagnostics": [{"line": d.line, "participant_id": d.participant_id, "kind": d.kind,
                         "message": d.message} for d in ds.diagnostics],
    }
    (cfg.output / "cleaning_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    for group, counts in report["groups"].items():
        detail = ", ".join(f"{k}={v}" for k, v in counts.items() if k != "kept")
        print(f"{group}: {counts['kept']} kept ({detail})")
    print(f"dropped {len(ds.dropped)} participant(s); {len(ds.diagnostics)} row diagnostic(s)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _config(args, need_seed=True)
    out = analyze(cfg, args.group, _targets(args.targets), Path(args.out) if args.out else None)
    skipped = json.loads((out / "report.json").read_text(encoding="utf-8"))["skipped_targets"]
    for t in skipped:
        print(f"notice: target {t!r} not in {args.group}; skipped", file=sys.stderr)
    print(out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args, need_seed=True)
    if args.language:
        cfg.endpoint.language = args.language
    group = EDUCATION_GROUP[args.education]
    ref = args.cue_set or cfg.cue_sets.get(f"gpt_{group}", cfg.cue_sets.get(group, cfg.cue_sets.get("default")))
    if ref in (None, "auto"):
        raise ConfigError("simulate needs a cue set (--cue-set or [cue_sets])")
    cues = load_cue_set(ref)
    items = None
    if cfg.masit_items:
        items = [l.strip() for l in cfg.masit_items.read_text(encoding="utf-8").splitlines() if l.strip()]
    client = ChatClient(cfg.endpoint)
    try:
        rlog = RequestLog(cfg.request_log or cfg.output / "requests.jsonl")
        pids = twin_ids(args.education, args.n)
        participants = [(pid, sample_profile(f"{cfg.seed}:{pid}", args.education)) for pid in pids]
        runs = run_twins(participants, cues, client, rlog, cue_set_id=str(ref), masit_items=items)
    finally:
        client.close()
    if args.match is not None:
        runs = match_group_sizes(runs, {group: args.match}, cfg.seed)
    out = Path(args.out) if args.out else cfg.output / f"gpt_oss_{group}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_associations_csv([r for run in runs for r in run.parsed], out, cfg.columns)
    scored = [run for run in runs if run.mas_it is not None]
    if items:
        with open(out.with_name(out.stem + "_masit.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([cfg.masit_id_column, *(f"{cfg.masit_item_prefix}{i}" for i in range(1, len(items) + 1))])
            for run in scored:
                w.writerow([run.participant_id, *run.mas_it.item_scores])
    print(f"{out}: {len(runs)} participant(s), {sum(len(r.parsed) for r in runs)} cue row(s)")
    return EXIT_OK


def cmd_render(args) -> int:
    min_freq = args.min_edge_frequency
    if min_freq is None:
        min_freq = load_config(args.config).min_edge_frequency if args.config else 1
    for path in render_bundle(args.bundle, Path(args.out) if args.out else None, min_freq, args.log_scale):
        print(path)
    return EXIT_OK


def _group_frames(args, cfg):
    ds = load_dataset(cfg)
    records, labels, g = build_group_network(ds, args.group, cfg)
    lex = load_lexicon(cfg)
    found, skipped = resolve_targets(g, _targets(args.targets), lex) if args.targets else ([], [])
    for t in skipped:
        print(f"notice: target {t!r} not in {args.group}; skipped", file=sys.stderr)
    return g, lex, {t: extract_frame(g, t) for t in found}


def cmd_features(args) -> int:
    cfg = _config(args)
    g, _, frames = _group_frames(args, cfg)
    if args.targets:
        payload = {t: frame_features(f, cfg.hub_fraction_frame) for t, f in frames.items()}
        print(features_json(payload))
    else:
        print(features_json(network_features(g, cfg.hub_fraction_full)))
    return EXIT_OK


def cmd_jaccard(args) -> int:
    cfg = _config(args)
    _, _, frames = _group_frames(args, cfg)
    print("target_a\ttarget_b\tjaccard")
    for a, b, j in jaccard_matrix(frames):
        print(f"{a}\t{b}\t{j:.6f}")
    return EXIT_OK


def cmd_concreteness(args) -> int:
    cfg = _config(args, need_seed=True)
    _, lex, frames = _group_frames(args, cfg)
    if not lex.concreteness_norms:
        raise ConfigError("no concreteness norms configured ([paths] concreteness)")
    results = [concreteness_test(f, lex.concreteness_norms, lex.lemma_map, cfg.n_null_concreteness,
                                 sub_seed(cfg.seed, "concreteness", t), cfg.alpha_concreteness, args.group)
               for t, f in frames.items()]
    write_concreteness_tsv(results, args.out or sys.stdout)
    return EXIT_OK


def cmd_emotions(args) -> int:
    cfg = _config(args, need_seed=True)
    _, lex, frames = _group_frames(args, cfg)
    if not lex.emotion_lexicon:
        raise ConfigError("no emotion lexicon configured ([paths] emotions)")
    payload = {t: emotion_zscores(f.members, lex, cfg.n_null_emotion, sub_seed(cfg.seed, "emotion", t),
                                  exclude_unmatched=cfg.exclude_unmatched_emotions).to_dict()
               for t, f in frames.items()}
    print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bfmn", description="Behavioural forma mentis network toolkit")
    parser.add_argument("--version", action="version", version=f"bfmn {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text, config_required=True, seed=False, group=False, targets=None):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=config_required, help="INI run config")
        p.add_argument("--output", help="output directory (overrides [paths] output)")
        if seed:
            p.add_argument("--seed", type=int, help="RNG seed (required here; may come from the config)")
        if group:
            p.add_argument("--group", required=True, help="group selector, e.g. psychology:high_anxiety")
        if targets is not None:
            p.add_argument("--targets", required=targets, help="comma-separated target words")
        p.set_defaults(func=func)
        return p

    add("ingest", cmd_ingest, "parse, clean and median-split the dataset")
    p = add("analyze", cmd_analyze, "write the full report bundle for one group", seed=True, group=True,
            targets=True)
    p.add_argument("--out", help="bundle directory (default: <output>/<group>)")
    p = add("simulate", cmd_simulate, "generate digital-twin participants via a chat endpoint", seed=True)
    p.add_argument("--n", type=int, required=True, help="number of twins to generate")
    p.add_argument("--education", required=True, choices=EDUCATIONS)
    p.add_argument("--cue-set", help="cue-set id 1-5 or path")
    p.add_argument("--language", choices=("it", "en"))
    p.add_argument("--match", type=int, help="subsample to this many twins")
    p.add_argument("--out", help="CSV path")
    p = add("render", cmd_render, "render SVG figures from an analysis bundle", config_required=False)
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", help="SVG directory (default: <bundle>/svg)")
    p.add_argument("--min-edge-frequency", type=int)
    p.add_argument("--log-scale", action="store_true", help="log-scale Jaccard bars")
    add("features", cmd_features, "network features of a group, or of target frames", group=True,
        targets=False)
    add("jaccard", cmd_jaccard, "pairwise Jaccard overlap of target frames", group=True, targets=True)
    p = add("concreteness", cmd_concreteness, "concreteness null tests for target frames", seed=True,
            group=True, targets=True)
    p.add_argument("--out", help="TSV path (default: stdout)")
    add("emotions", cmd_emotions, "emotion z-scores for target frames", seed=True, group=True, targets=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "min_edge_frequency", None) is not None and args.min_edge_frequency < 1:
        parser.error("--min-edge-frequency must be >= 1")
    if getattr(args, "n", None) is not None and args.n < 1:
        parser.error("--n must be positive")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"bfmn: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EndpointError as exc:
        print(f"bfmn: endpoint error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (DataError, OSError, UnicodeDecodeError) as exc:
        print(f"bfmn: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
