"""Command-line entry point: extract, search, evaluate, compare, mds, and
validate subcommands driven by manifests and an optional JSON config file.

Every command is idempotent (identical inputs produce byte-identical
outputs) and exits nonzero iff an error-severity diagnostic occurred.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, dtwsearch, evalkit, featio, mfcc
from .errors import QbestdError


@dataclass
class RunConfig:
    system_tag: str = "mfcc39"
    decimate_16k: bool = True
    search: dtwsearch.SearchConfig = field(default_factory=dtwsearch.SearchConfig)
    eval: evalkit.EvalConfig = field(default_factory=evalkit.EvalConfig)
    mfcc: mfcc.MfccConfig = field(default_factory=mfcc.MfccConfig)

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {"system_tag", "decimate_16k", "search", "eval", "mfcc"}
        unknown = set(raw) - known
        if unknown:
            raise QbestdError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(
            system_tag=raw.get("system_tag", "mfcc39"),
            decimate_16k=raw.get("decimate_16k", True),
            search=dtwsearch.SearchConfig(**raw.get("search", {})),
            eval=evalkit.EvalConfig(**raw.get("eval", {})),
            mfcc=mfcc.MfccConfig(**raw.get("mfcc", {})),
        )


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _load_features(rows: list[featio.ManifestEntry], tag: str) -> list[featio.FeatureMatrix]:
    return [
        featio.read_feature_file(row.path, source_id=row.id, extractor_tag=tag)
        for row in rows
    ]


def cmd_extract(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    rows = featio.load_manifest_rows(args.manifest)
    if not rows:
        _log("error: empty manifest")
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    decimate = config.decimate_16k and not args.no_decimate
    failures = 0
    emitted: list[featio.ManifestEntry] = []
    for row in rows:
        try:
            audio = featio.read_wav(row.path)
            if decimate and audio.sample_rate_hz == 2 * config.mfcc.sample_rate_hz:
                audio = featio.decimate_2x(audio)
            features = mfcc.extract_mfcc(audio, config.mfcc)
            features = mfcc.append_deltas(features, config.mfcc.delta_window)
            features.source_id = row.id
            target = out_dir / f"{row.id}.qf"
            featio.write_feature_file(features, target)
            emitted.append(
                featio.ManifestEntry(id=row.id, path=target.resolve(), transcription=row.transcription)
            )
        except (QbestdError, OSError, ValueError) as exc:
            _log(f"error: {row.id}: {exc}")
            failures += 1
    featio.write_manifest_rows(emitted, out_dir / "manifest.tsv")
    _log(f"extracted {len(emitted)}/{len(rows)} files to {out_dir}")
    return 1 if failures else 0


def _load_search_inputs(args: argparse.Namespace, config: RunConfig):
    manifest = featio.load_manifest(args.queries, args.items)
    problems = featio.validate_manifest(manifest)
    if problems:
        for p in problems:
            _log(f"error: {p}")
        raise QbestdError(f"{len(problems)} manifest problems")
    if not manifest.queries:
        raise QbestdError("no queries in manifest")
    if not manifest.items:
        raise QbestdError("no items in manifest")
    queries = _load_features(manifest.queries, config.system_tag)
    items = _load_features(manifest.items, config.system_tag)
    return manifest, queries, items


def cmd_search(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    if args.stride is not None:
        config.search.window_stride_frames = args.stride
    if args.window_scale is not None:
        config.search.window_scale = args.window_scale
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)

    manifest, queries, items = _load_search_inputs(args, config)
    total = len(queries) * len(items)
    _log(f"searching {len(queries)} queries x {len(items)} items = {total} pairs "
         f"({workers} workers)")

    done = 0

    def progress(query_id: str) -> None:
        nonlocal done
        done += 1
        _log(f"  [{done}/{len(queries)}] query {query_id}")

    begin = time.perf_counter()
    scores = dtwsearch.search_corpus(
        queries, items, config.search, workers=workers, progress=progress
    )
    elapsed = time.perf_counter() - begin

    dtwsearch.write_scores_tsv(scores, args.out)
    windows = sum(
        dtwsearch.num_windows(q.num_frames, t.num_frames, config.search)
        for q in queries
        for t in items
    )
    per_min_per_worker = windows / max(elapsed / 60.0, 1e-9) / workers
    _log(
        f"searched {total} pairs in {elapsed:.2f}s "
        f"({total / max(elapsed, 1e-9):.1f} pairs/s)"
    )
    _log(
        f"throughput: {windows} DTW window evaluations, "
        f"{per_min_per_worker:,.0f} per minute per worker"
    )
    return 0


def _gold_for(args: argparse.Namespace, manifest: featio.DatasetManifest) -> evalkit.GoldLabelSet:
    if args.gold:
        return evalkit.read_gold_tsv(args.gold)
    gold = evalkit.make_gold(manifest.queries, manifest.items)
    for diag in gold.diagnostics:
        _log(f"warning: {diag}")
    return gold


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    manifest = featio.load_manifest(args.queries, args.items)
    scores = dtwsearch.read_scores_tsv(args.scores)
    gold = _gold_for(args, manifest)

    have = {(s.query_id, s.item_id) for s in scores}
    missing = sorted(set(gold.labels) - have)
    if missing:
        for pair in missing[:10]:
            _log(f"error: missing score for pair {pair}")
        _log(f"error: {len(missing)} pairs missing from {args.scores}")
        return 1

    result = evalkit.evaluate_scores(scores, gold, config.eval)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    evalkit.write_report(
        {config.system_tag: result},
        [],
        json_path=prefix.with_suffix(".json"),
        csv_path=prefix.with_suffix(".csv"),
        dataset_id=manifest.dataset_id,
        cfg=config.eval,
    )
    _log(f"{config.system_tag}: MTWV {result.mtwv:.4f} "
         f"at threshold {result.optimal_threshold:.6f}")
    if result.excluded_queries:
        _log(f"note: {len(result.excluded_queries)} queries with no true "
             f"occurrence excluded from pooling")
    return 0


def _single_system(report: dict, path: str, requested: str | None) -> tuple[str, dict]:
    systems = report.get("systems", {})
    if requested is not None:
        if requested not in systems:
            raise QbestdError(f"{path}: no system {requested!r} (has {sorted(systems)})")
        return requested, systems[requested]
    if len(systems) != 1:
        raise QbestdError(
            f"{path}: report has {len(systems)} systems {sorted(systems)}; "
            f"pick one with --system-a/--system-b"
        )
    tag = next(iter(systems))
    return tag, systems[tag]


def cmd_compare(args: argparse.Namespace) -> int:
    report_a = json.loads(Path(args.report_a).read_text(encoding="utf-8"))
    report_b = json.loads(Path(args.report_b).read_text(encoding="utf-8"))
    tag_a, system_a = _single_system(report_a, args.report_a, args.system_a)
    tag_b, system_b = _single_system(report_b, args.report_b, args.system_b)
    per_query_a = system_a["per_query_mtwv"]
    per_query_b = system_b["per_query_mtwv"]

    if set(per_query_a) != set(per_query_b):
        only_a = sorted(set(per_query_a) - set(per_query_b))
        only_b = sorted(set(per_query_b) - set(per_query_a))
        _log(f"error: query sets differ; only in A: {only_a[:10]}, only in B: {only_b[:10]}")
        return 1

    query_ids = sorted(per_query_a)
    a = np.array([per_query_a[q] for q in query_ids])
    b = np.array([per_query_b[q] for q in query_ids])
    if tag_a == tag_b:
        tag_a, tag_b = f"{tag_a}:a", f"{tag_b}:b"

    lines = ["row_type,name,n_queries,mtwv,per_query_mean,per_query_sd,t_value,df,p_value"]
    for tag, system, values in ((tag_a, system_a, a), (tag_b, system_b, b)):
        sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        lines.append(
            f"system,{tag},{len(values)},{system['mtwv']:.6f},"
            f"{float(np.mean(values)):.6f},{sd:.6f},,,"
        )
    for name, x, y in ((f"{tag_a} > {tag_b}", a, b), (f"{tag_b} > {tag_a}", b, a)):
        test = evalkit.paired_t_test_one_sided(x, y)
        lines.append(
            f"t_test,{name},,,,,{test.t_value:.6f},"
            f"{test.degrees_of_freedom},{test.p_value_one_sided:.6f}"
        )
        _log(f"{name}: t = {test.t_value:.3f}, p = {test.p_value_one_sided:.4f}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_mds(args: argparse.Namespace) -> int:
    rows = featio.load_manifest_rows(args.manifest)
    if not rows:
        _log("error: empty manifest")
        return 1
    intervals = analysis.load_intervals_tsv(args.intervals)

    by_source: dict[str, list[analysis.LabeledInterval]] = {}
    for interval in intervals:
        source = interval.source_id
        if not source:
            if len(rows) != 1:
                _log("error: intervals without a source column need a single-row manifest")
                return 1
            source = rows[0].id
        by_source.setdefault(source, []).append(interval)

    known_ids = {row.id for row in rows}
    unknown = sorted(set(by_source) - known_ids)
    if unknown:
        _log(f"error: intervals reference unknown sources {unknown[:10]}")
        return 1

    tokens: list[analysis.SegmentToken] = []
    for row in rows:
        if row.id not in by_source:
            continue
        features = featio.read_feature_file(row.path, source_id=row.id)
        got, diagnostics = analysis.average_segment_features(features, by_source[row.id])
        for diag in diagnostics:
            _log(f"warning: {row.id}: {diag}")
        tokens.extend(got)

    if len(tokens) < 3:
        _log(f"error: only {len(tokens)} usable segment tokens; need at least 3")
        return 1

    distances = analysis.class_distance_matrix(tokens)
    embedding = analysis.classical_mds(distances, k=2)
    labels = [t.label for t in tokens]
    ellipses, diagnostics = analysis.class_ellipses(embedding, labels)
    for diag in diagnostics:
        _log(f"warning: {diag}")
    paths = analysis.emit_mds_outputs(embedding, labels, ellipses, args.out_prefix)
    _log(f"embedded {len(tokens)} tokens ({len(set(labels))} classes), "
         f"stress {embedding.stress:.3g}")
    _log(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    problems = 0
    for manifest_path in args.manifest:
        rows = featio.load_manifest_rows(manifest_path)
        seen: set[str] = set()
        for row in rows:
            if row.id in seen:
                _log(f"error: {manifest_path}: duplicate id: {row.id}")
                problems += 1
            seen.add(row.id)
            if not row.path.exists():
                _log(f"error: {manifest_path}: {row.id}: missing file {row.path}")
                problems += 1
                continue
            try:
                if row.path.suffix == ".qf":
                    featio.read_feature_file(row.path, source_id=row.id)
                elif row.path.suffix == ".wav":
                    featio.read_wav(row.path)
            except QbestdError as exc:
                _log(f"error: {manifest_path}: {row.id}: {exc}")
                problems += 1
        _log(f"{manifest_path}: {len(rows)} rows checked")
    _log(f"validation {'failed' if problems else 'passed'}: {problems} problems")
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbestd",
        description="Query-by-example spoken term detection pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="MFCC features from a WAV manifest")
    p.add_argument("--manifest", required=True, help="WAV manifest TSV")
    p.add_argument("--out", required=True, help="output directory for .qf files")
    p.add_argument("--config", default=None)
    p.add_argument("--no-decimate", action="store_true",
                   help="never halve 2x-rate audio before extraction")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("search", help="score every (query, item) pair")
    p.add_argument("--queries", required=True, help="query manifest TSV")
    p.add_argument("--items", required=True, help="item manifest TSV")
    p.add_argument("--out", required=True, help="output scores TSV")
    p.add_argument("--config", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--window-scale", type=float, default=None)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evaluate", help="MTWV report from a scores TSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--items", required=True)
    p.add_argument("--gold", default=None, help="optional gold TSV override")
    p.add_argument("--out-prefix", required=True,
                   help="writes <prefix>.json and <prefix>.csv")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="paired t-tests between two reports")
    p.add_argument("--report-a", required=True)
    p.add_argument("--report-b", required=True)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--system-a", default=None)
    p.add_argument("--system-b", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("mds", help="2-D embedding of labeled segments")
    p.add_argument("--manifest", required=True, help="feature manifest TSV")
    p.add_argument("--intervals", required=True, help="segment intervals TSV")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_mds)

    p = sub.add_parser("validate", help="check manifests and feature files")
    p.add_argument("--manifest", action="append", required=True,
                   help="manifest TSV (repeatable)")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QbestdError as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
