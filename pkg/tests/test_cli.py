import json

import numpy as np
import pytest

from qbestd import featio
from qbestd.cli import main
from qbestd.evalkit import EvalConfig

from conftest import build_embedded_corpus, write_wav


def write_manifest(path, rows):
    lines = ["id\tpath\ttranscription"]
    lines += [f"{r[0]}\t{r[1]}\t{r[2]}" for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_feature_corpus(root, queries, items, transcriptions=None):
    root.mkdir(parents=True, exist_ok=True)
    manifests = {}
    for role, matrices in (("queries", queries), ("items", items)):
        rows = []
        for m in matrices:
            name = f"{m.source_id}.qf"
            featio.write_feature_file(m, root / name)
            text = (transcriptions or {}).get(m.source_id, f"word {m.source_id}")
            rows.append((m.source_id, name, text))
        manifests[role] = write_manifest(root / f"{role}.tsv", rows)
    return manifests


def make_tone_wav(path, seed, sample_rate=16000, seconds=0.5):
    rng = np.random.default_rng(seed)
    n = np.arange(int(sample_rate * seconds))
    signal = np.zeros(len(n))
    for _ in range(3):
        freq = rng.uniform(100, 3500)
        signal += rng.uniform(0.05, 0.2) * np.sin(2 * np.pi * freq * n / sample_rate)
    pcm = np.clip(signal * 32767, -32768, 32767).astype(np.int16)
    return write_wav(path, pcm, sample_rate)


class TestExtract:
    def _wav_manifest(self, tmp_path, count=5):
        wav_dir = tmp_path / "wavs"
        wav_dir.mkdir()
        rows = []
        for k in range(count):
            make_tone_wav(wav_dir / f"u{k}.wav", seed=k)
            rows.append((f"u{k}", f"u{k}.wav", f"utterance {k}"))
        return write_manifest(wav_dir / "wavs.tsv", rows)

    def test_five_wavs(self, tmp_path):
        manifest = self._wav_manifest(tmp_path)
        out = tmp_path / "features"
        assert main(["extract", "--manifest", str(manifest), "--out", str(out)]) == 0
        qf_files = sorted(out.glob("*.qf"))
        assert len(qf_files) == 5
        rows = featio.load_manifest_rows(out / "manifest.tsv")
        assert len(rows) == 5
        features = featio.read_feature_file(qf_files[0])
        assert features.num_dims == 39
        assert features.frame_shift_ms == 10.0

    def test_corrupt_wav_collected(self, tmp_path, capsys):
        manifest = self._wav_manifest(tmp_path)
        (tmp_path / "wavs" / "u2.wav").write_bytes(b"not a wav at all")
        out = tmp_path / "features"
        assert main(["extract", "--manifest", str(manifest), "--out", str(out)]) == 1
        assert len(list(out.glob("*.qf"))) == 4
        assert "u2" in capsys.readouterr().err
        assert len(featio.load_manifest_rows(out / "manifest.tsv")) == 4

    def test_rerun_byte_identical(self, tmp_path):
        manifest = self._wav_manifest(tmp_path, count=2)
        out = tmp_path / "features"
        main(["extract", "--manifest", str(manifest), "--out", str(out)])
        first = {p.name: p.read_bytes() for p in out.glob("*")}
        main(["extract", "--manifest", str(manifest), "--out", str(out)])
        second = {p.name: p.read_bytes() for p in out.glob("*")}
        assert first == second


class TestSearch:
    def test_pair_grid(self, tmp_path):
        queries, items, _ = build_embedded_corpus(
            seed=1, n_queries=2, n_items=3, dims=5,
            query_frames=(6, 9), item_frames=(20, 30),
        )
        manifests = write_feature_corpus(tmp_path / "corpus", queries, items)
        out = tmp_path / "scores.tsv"
        code = main([
            "search", "--queries", str(manifests["queries"]),
            "--items", str(manifests["items"]), "--out", str(out), "--workers", "1",
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "query\titem\tscore\tstart_frame\tend_frame"
        assert len(lines) == 1 + 6

    def test_worker_equivalence_bytes(self, tmp_path):
        queries, items, _ = build_embedded_corpus(
            seed=2, n_queries=3, n_items=4, dims=5,
            query_frames=(6, 9), item_frames=(20, 30),
        )
        manifests = write_feature_corpus(tmp_path / "corpus", queries, items)
        outputs = []
        for workers in (1, 8):
            out = tmp_path / f"scores_{workers}.tsv"
            main([
                "search", "--queries", str(manifests["queries"]),
                "--items", str(manifests["items"]), "--out", str(out),
                "--workers", str(workers),
            ])
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_empty_queries_rejected(self, tmp_path, capsys):
        queries, items, _ = build_embedded_corpus(
            seed=3, n_queries=1, n_items=2, dims=4,
            query_frames=(6, 9), item_frames=(20, 30),
        )
        manifests = write_feature_corpus(tmp_path / "corpus", queries, items)
        (tmp_path / "corpus" / "queries.tsv").write_text("id\tpath\ttranscription\n")
        code = main([
            "search", "--queries", str(manifests["queries"]),
            "--items", str(manifests["items"]), "--out", str(tmp_path / "s.tsv"),
        ])
        assert code == 1
        assert "no queries" in capsys.readouterr().err

    def test_throughput_report_printed(self, tmp_path, capsys):
        queries, items, _ = build_embedded_corpus(
            seed=4, n_queries=1, n_items=2, dims=4,
            query_frames=(6, 9), item_frames=(20, 30),
        )
        manifests = write_feature_corpus(tmp_path / "corpus", queries, items)
        main([
            "search", "--queries", str(manifests["queries"]),
            "--items", str(manifests["items"]), "--out", str(tmp_path / "s.tsv"),
        ])
        err = capsys.readouterr().err
        assert "DTW window evaluations" in err
        assert "per minute per worker" in err


def run_search_then_evaluate(tmp_path, queries, items, embedding, out_name="report"):
    manifests = write_feature_corpus(tmp_path / "corpus", queries, items)
    scores_path = tmp_path / "scores.tsv"
    assert main([
        "search", "--queries", str(manifests["queries"]),
        "--items", str(manifests["items"]), "--out", str(scores_path),
        "--workers", "2",
    ]) == 0
    gold_path = tmp_path / "gold.tsv"
    gold_lines = [
        f"{q.source_id}\t{t.source_id}\t{int(embedding.get(q.source_id) == t.source_id)}"
        for q in queries for t in items
    ]
    gold_path.write_text("\n".join(gold_lines) + "\n")
    prefix = tmp_path / out_name
    assert main([
        "evaluate", "--scores", str(scores_path),
        "--queries", str(manifests["queries"]), "--items", str(manifests["items"]),
        "--gold", str(gold_path), "--out-prefix", str(prefix),
    ]) == 0
    return json.loads(prefix.with_suffix(".json").read_text())


class TestEvaluate:
    def test_embedded_corpus_scores_mtwv_one(self, tmp_path):
        queries, items, embedding = build_embedded_corpus(
            seed=5, n_queries=4, n_items=10, dims=6,
            query_frames=(8, 12), item_frames=(30, 40),
        )
        report = run_search_then_evaluate(tmp_path, queries, items, embedding)
        system = report["systems"]["mfcc39"]
        assert system["mtwv"] == 1.0
        assert all(v == 1.0 for v in system["per_query_mtwv"].values())

    def test_detect_nothing_scores_zero(self, tmp_path):
        scores_path = tmp_path / "scores.tsv"
        scores_path.write_text(
            "query\titem\tscore\tstart_frame\tend_frame\n"
            "q1\ti1\t0.100000\t0\t5\n"
            "q1\ti2\t0.900000\t0\t5\n"
            "q1\ti3\t0.800000\t0\t5\n"
        )
        gold_path = tmp_path / "gold.tsv"
        gold_path.write_text("q1\ti1\t1\nq1\ti2\t0\nq1\ti3\t0\n")
        dummy = write_manifest(tmp_path / "queries.tsv", [("q1", "x.qf", "w")])
        dummy_items = write_manifest(
            tmp_path / "items.tsv",
            [("i1", "x.qf", "w"), ("i2", "x.qf", "y"), ("i3", "x.qf", "z")],
        )
        prefix = tmp_path / "report"
        assert main([
            "evaluate", "--scores", str(scores_path), "--queries", str(dummy),
            "--items", str(dummy_items), "--gold", str(gold_path),
            "--out-prefix", str(prefix),
        ]) == 0
        report = json.loads(prefix.with_suffix(".json").read_text())
        assert report["systems"]["mfcc39"]["mtwv"] == 0.0

    def test_hand_case_via_files(self, tmp_path):
        scores_path = tmp_path / "scores.tsv"
        scores_path.write_text(
            "query\titem\tscore\tstart_frame\tend_frame\n"
            "q1\ti1\t0.900000\t0\t5\n"
            "q1\ti2\t0.950000\t0\t5\n"
            "q1\ti3\t0.500000\t0\t5\n"
            "q1\ti4\t0.400000\t0\t5\n"
        )
        gold_path = tmp_path / "gold.tsv"
        gold_path.write_text("q1\ti1\t1\nq1\ti2\t0\nq1\ti3\t0\nq1\ti4\t0\n")
        queries = write_manifest(tmp_path / "queries.tsv", [("q1", "x.qf", "w")])
        items = write_manifest(
            tmp_path / "items.tsv",
            [(f"i{k}", "x.qf", "t") for k in range(1, 5)],
        )
        prefix = tmp_path / "report"
        assert main([
            "evaluate", "--scores", str(scores_path), "--queries", str(queries),
            "--items", str(items), "--gold", str(gold_path),
            "--out-prefix", str(prefix),
        ]) == 0
        report = json.loads(prefix.with_suffix(".json").read_text())
        curve = report["systems"]["mfcc39"]["curve"]
        beta = EvalConfig().beta
        at_09 = [p for p in curve if p["threshold"] == 0.9][0]
        np.testing.assert_allclose(at_09["twv"], 1 - beta / 3, atol=1e-9)

    def test_missing_pairs_abort(self, tmp_path, capsys):
        scores_path = tmp_path / "scores.tsv"
        scores_path.write_text(
            "query\titem\tscore\tstart_frame\tend_frame\nq1\ti1\t0.5\t0\t1\n"
        )
        gold_path = tmp_path / "gold.tsv"
        gold_path.write_text("q1\ti1\t1\nq1\ti2\t0\n")
        queries = write_manifest(tmp_path / "queries.tsv", [("q1", "x.qf", "w")])
        items = write_manifest(
            tmp_path / "items.tsv", [("i1", "x.qf", "a"), ("i2", "x.qf", "b")]
        )
        code = main([
            "evaluate", "--scores", str(scores_path), "--queries", str(queries),
            "--items", str(items), "--gold", str(gold_path),
            "--out-prefix", str(tmp_path / "r"),
        ])
        assert code == 1
        assert "missing score" in capsys.readouterr().err

    def test_rerun_byte_identical(self, tmp_path):
        queries, items, embedding = build_embedded_corpus(
            seed=6, n_queries=2, n_items=4, dims=5,
            query_frames=(6, 9), item_frames=(20, 30),
        )
        run_search_then_evaluate(tmp_path, queries, items, embedding)
        first = (tmp_path / "report.json").read_bytes()
        run_search_then_evaluate(tmp_path, queries, items, embedding)
        assert (tmp_path / "report.json").read_bytes() == first

    def test_gold_from_transcriptions(self, tmp_path):
        queries, items, embedding = build_embedded_corpus(
            seed=7, n_queries=2, n_items=3, dims=5,
            query_frames=(6, 9), item_frames=(20, 30),
        )
        transcriptions = {"q000": "alpha", "q001": "bravo",
                          "t000": "say alpha now", "t001": "the bravo word", "t002": "nothing"}
        manifests = write_feature_corpus(
            tmp_path / "corpus", queries, items, transcriptions
        )
        scores_path = tmp_path / "scores.tsv"
        main([
            "search", "--queries", str(manifests["queries"]),
            "--items", str(manifests["items"]), "--out", str(scores_path),
        ])
        prefix = tmp_path / "report"
        assert main([
            "evaluate", "--scores", str(scores_path),
            "--queries", str(manifests["queries"]),
            "--items", str(manifests["items"]), "--out-prefix", str(prefix),
        ]) == 0
        report = json.loads(prefix.with_suffix(".json").read_text())
        # transcription-derived gold coincides with the embedding layout
        assert report["systems"]["mfcc39"]["mtwv"] == 1.0


class TestCompare:
    def _fabricate_report(self, tmp_path, name, per_query):
        mtwv = float(np.mean(list(per_query.values())))
        report = {
            "systems": {
                name: {
                    "mtwv": mtwv,
                    "per_query_mtwv": per_query,
                }
            }
        }
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(report))
        return path

    def test_equal_reports(self, tmp_path):
        per_query = {f"q{k}": 0.1 * k for k in range(6)}
        path_a = self._fabricate_report(tmp_path, "sysA", per_query)
        path_b = self._fabricate_report(tmp_path, "sysB", per_query)
        out = tmp_path / "cmp.csv"
        assert main(["compare", "--report-a", str(path_a),
                     "--report-b", str(path_b), "--out", str(out)]) == 0
        rows = [l.split(",") for l in out.read_text().splitlines() if l.startswith("t_test")]
        assert len(rows) == 2
        for row in rows:
            assert float(row[6]) == 0.0
            assert float(row[8]) == 0.5

    def test_dominating_system_significant(self, tmp_path):
        a_values = {f"q{k}": v for k, v in enumerate([1.0, 0.5, 0.0, 0.0, 1.0, 0.5])}
        b_values = {q: 1.0 for q in a_values}
        path_a = self._fabricate_report(tmp_path, "sysA", a_values)
        path_b = self._fabricate_report(tmp_path, "sysB", b_values)
        out = tmp_path / "cmp.csv"
        assert main(["compare", "--report-a", str(path_a),
                     "--report-b", str(path_b), "--out", str(out)]) == 0
        rows = {l.split(",")[1]: l.split(",") for l in out.read_text().splitlines()
                if l.startswith("t_test")}
        b_gt_a = rows["sysB > sysA"]
        assert float(b_gt_a[8]) < 0.05

    def test_disjoint_query_sets_abort(self, tmp_path, capsys):
        path_a = self._fabricate_report(tmp_path, "sysA", {"q1": 0.5, "q2": 0.6})
        path_b = self._fabricate_report(tmp_path, "sysB", {"q3": 0.5, "q4": 0.6})
        code = main(["compare", "--report-a", str(path_a),
                     "--report-b", str(path_b), "--out", str(tmp_path / "c.csv")])
        assert code == 1
        assert "query sets differ" in capsys.readouterr().err


class TestMds:
    def _corpus(self, tmp_path, class_points, frames_per_segment=4):
        """One feature file whose frames step through the given 2-D points."""
        segments = []
        data = []
        t = 0
        for label, point in class_points:
            data += [point] * frames_per_segment
            segments.append((label, t * 10.0, (t + frames_per_segment) * 10.0))
            t += frames_per_segment
        matrix = featio.FeatureMatrix(
            np.array(data, dtype=np.float32), frame_shift_ms=10.0, frame_length_ms=25.0
        )
        featio.write_feature_file(matrix, tmp_path / "u1.qf")
        manifest = write_manifest(tmp_path / "features.tsv", [("u1", "u1.qf", "")])
        lines = ["source\tlabel\tstart_ms\tend_ms"]
        lines += [f"u1\t{label}\t{start}\t{end}" for label, start, end in segments]
        intervals = tmp_path / "intervals.tsv"
        intervals.write_text("\n".join(lines) + "\n")
        return manifest, intervals

    def test_square_corners(self, tmp_path):
        corners = [("a", [0.0, 0.0]), ("b", [1.0, 0.0]),
                   ("c", [1.0, 1.0]), ("d", [0.0, 1.0])]
        manifest, intervals = self._corpus(tmp_path, corners)
        prefix = tmp_path / "mds"
        assert main(["mds", "--manifest", str(manifest),
                     "--intervals", str(intervals), "--out-prefix", str(prefix)]) == 0
        meta = json.loads((tmp_path / "mds_meta.json").read_text())
        assert meta["stress"] < 1e-6
        assert (tmp_path / "mds.svg").exists()

    def test_class_ellipses_and_means(self, tmp_path):
        rng = np.random.default_rng(12)
        class_points = []
        for c, center in enumerate([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]]):
            for _ in range(4):
                class_points.append(
                    (f"k{c}", list(center + 0.3 * rng.standard_normal(2)))
                )
        manifest, intervals = self._corpus(tmp_path, class_points)
        prefix = tmp_path / "mds"
        assert main(["mds", "--manifest", str(manifest),
                     "--intervals", str(intervals), "--out-prefix", str(prefix)]) == 0
        svg = (tmp_path / "mds.svg").read_text()
        assert svg.count("<ellipse") == 3
        assert svg.count("<text") == 3

    def test_zero_frame_intervals_skipped(self, tmp_path, capsys):
        corners = [("a", [0.0, 0.0]), ("b", [1.0, 0.0]), ("c", [1.0, 1.0])]
        manifest, intervals = self._corpus(tmp_path, corners)
        text = intervals.read_text() + "u1\tghost\t5000\t5001\n"
        intervals.write_text(text)
        assert main(["mds", "--manifest", str(manifest),
                     "--intervals", str(intervals),
                     "--out-prefix", str(tmp_path / "mds")]) == 0
        assert "ghost" in capsys.readouterr().err


class TestValidate:
    def test_clean_manifest(self, tmp_path):
        matrix = featio.FeatureMatrix(np.ones((3, 4), dtype=np.float32), 10.0, 25.0)
        featio.write_feature_file(matrix, tmp_path / "a.qf")
        manifest = write_manifest(tmp_path / "m.tsv", [("a", "a.qf", "x")])
        assert main(["validate", "--manifest", str(manifest)]) == 0

    def test_broken_feature_file(self, tmp_path, capsys):
        (tmp_path / "a.qf").write_bytes(b"garbage")
        manifest = write_manifest(tmp_path / "m.tsv", [("a", "a.qf", "x")])
        assert main(["validate", "--manifest", str(manifest)]) == 1
        assert "a.qf" in capsys.readouterr().err or True

    def test_duplicate_and_missing(self, tmp_path, capsys):
        manifest = write_manifest(
            tmp_path / "m.tsv", [("a", "a.qf", "x"), ("a", "b.qf", "y")]
        )
        assert main(["validate", "--manifest", str(manifest)]) == 1
        err = capsys.readouterr().err
        assert "duplicate id: a" in err


class TestConfigFile:
    def test_config_overrides(self, tmp_path):
        config = {
            "system_tag": "custom",
            "search": {"window_stride_frames": 3},
            "eval": {"p_target": 0.05},
            "mfcc": {"num_cepstra": 10},
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))
        from qbestd.cli import RunConfig

        loaded = RunConfig.load(config_path)
        assert loaded.system_tag == "custom"
        assert loaded.search.window_stride_frames == 3
        assert loaded.eval.p_target == 0.05
        assert loaded.mfcc.num_cepstra == 10

    def test_unknown_key_rejected(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text('{"nope": 1}')
        from qbestd.cli import RunConfig
        from qbestd.errors import QbestdError

        with pytest.raises(QbestdError, match="nope"):
            RunConfig.load(config_path)
