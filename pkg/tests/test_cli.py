import json

import numpy as np
import pytest

from corpusmix.cli import main
from corpusmix.corpus import load_corpus, write_embeddings

from conftest import unit_vectors, write_lines

WORDS = (
    "the model data cluster sample token budget quality diverse corpus "
    "mix weight count domain report train text score batch stream"
).split()


@pytest.fixture
def workspace(tmp_path):
    """Corpus with text+tokens, matching embeddings, and an output dir."""
    rng = np.random.default_rng(42)
    n = 600
    lines = []
    for i in range(n):
        words = rng.choice(WORDS, size=rng.integers(5, 60))
        text = " ".join(words) + "."
        lines.append(
            json.dumps(
                {
                    "id": f"doc-{i:04d}",
                    "domain": ["web", "books", "wiki"][int(rng.integers(3))],
                    "text": text,
                    "tokens": int(rng.integers(20, 400)),
                }
            )
        )
    corpus_path = tmp_path / "corpus.jsonl"
    write_lines(corpus_path, lines)

    emb_path = tmp_path / "emb.bin"
    vectors = unit_vectors(n, 12, seed=7)
    write_embeddings(emb_path, vectors, [f"doc-{i:04d}" for i in range(n)])

    out = tmp_path / "out"
    out.mkdir()
    return {"tmp": tmp_path, "corpus": corpus_path, "embeddings": emb_path, "out": out}


def run(*argv):
    return main([str(a) for a in argv])


class TestManifestCommand:
    def test_writes_manifest_and_exits_zero(self, workspace):
        code = run("manifest", "--corpus", workspace["corpus"], "--out-dir", workspace["out"])
        assert code == 0
        payload = json.loads((workspace["out"] / "manifest.json").read_text())
        assert payload["total_docs"] == 600
        assert set(payload["per_domain"]) == {"web", "books", "wiki"}

    def test_missing_path_names_it(self, workspace, capsys):
        code = run("manifest", "--corpus", "nowhere.jsonl", "--out-dir", workspace["out"])
        assert code == 2
        assert "nowhere.jsonl" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, workspace):
        args = ("manifest", "--corpus", workspace["corpus"], "--out-dir", workspace["out"])
        assert run(*args) == 0
        first = (workspace["out"] / "manifest.json").read_bytes()
        assert run(*args) == 0
        assert (workspace["out"] / "manifest.json").read_bytes() == first

    def test_snapshot_written(self, workspace):
        run("manifest", "--corpus", workspace["corpus"], "--out-dir", workspace["out"])
        snap = json.loads((workspace["out"] / "resolved_config.manifest.json").read_text())
        assert snap["stage"] == "manifest"
        assert snap["settings"]["corpus"] == str(workspace["corpus"])


class TestAnnotateFallback:
    def test_scores_every_document(self, workspace):
        code = run(
            "annotate-fallback", "--corpus", workspace["corpus"], "--out-dir", workspace["out"]
        )
        assert code == 0
        records = [
            json.loads(ln)
            for ln in (workspace["out"] / "quality.jsonl").read_text().splitlines()
        ]
        assert len(records) == 600
        assert all(0 <= r["quality"] <= 10 for r in records)


def run_cluster(workspace, seed=0, iters=25, out=None):
    return run(
        "cluster",
        "--corpus",
        workspace["corpus"],
        "--embeddings",
        workspace["embeddings"],
        "--out-dir",
        out or workspace["out"],
        "--seed",
        seed,
        "--iters",
        iters,
    )


def run_mix(workspace, out=None, alpha=0.8, seed=0, target=40_000, clusters=None, quality=None):
    argv = [
        "mix",
        "--corpus",
        workspace["corpus"],
        "--clusters",
        clusters or (workspace["out"] / "clusters.jsonl"),
        "--target-tokens",
        target,
        "--alpha",
        alpha,
        "--seed",
        seed,
        "--out-dir",
        out or workspace["out"],
    ]
    if quality:
        argv += ["--quality", quality]
    return run(*argv)


class TestClusterCommand:
    def test_artifacts_written(self, workspace):
        assert run_cluster(workspace) == 0
        out = workspace["out"]
        assert (out / "centroids.bin").exists()
        assert (out / "clusters.jsonl").exists()
        summary = json.loads((out / "cluster_summary.json").read_text())
        assert summary["k"] == 24  # floor(sqrt(600))
        hist = summary["objective_history"]
        assert all(hist[i + 1] <= hist[i] + 1e-9 for i in range(len(hist) - 1))

    def test_cluster_table_covers_corpus(self, workspace):
        run_cluster(workspace)
        ids = {
            json.loads(ln)["id"]
            for ln in (workspace["out"] / "clusters.jsonl").read_text().splitlines()
        }
        assert ids == set(load_corpus(workspace["corpus"]).ids())


class TestMixCommand:
    def test_full_pipeline_hits_budget(self, workspace):
        run_cluster(workspace)
        assert run_mix(workspace, target=60_000) == 0
        summary = json.loads((workspace["out"] / "mix_summary.json").read_text())
        assert summary["target_tokens"] == 60_000
        drift = abs(summary["realized_tokens"] / 60_000 - 1.0)
        assert drift < 0.05  # small corpus; the 2% budget bound is asserted at 50k docs
        assert (workspace["out"] / "dataset.jsonl").exists()
        assert (workspace["out"] / "plan.jsonl").exists()

    def test_deterministic_across_runs(self, workspace, tmp_path):
        run_cluster(workspace)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_mix(workspace, out=out_a, seed=3) == 0
        assert run_mix(workspace, out=out_b, seed=3) == 0
        for name in ("dataset.jsonl", "plan.jsonl", "mix_summary.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_alpha_zero_ignores_diversity(self, workspace, tmp_path):
        # two different clusterings, alpha=0: plans and datasets must agree
        clus_a, clus_b = tmp_path / "ca", tmp_path / "cb"
        clus_a.mkdir(), clus_b.mkdir()
        run_cluster(workspace, seed=1, out=clus_a)
        run_cluster(workspace, seed=2, out=clus_b)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_mix(workspace, out=out_a, alpha=0.0, clusters=clus_a / "clusters.jsonl") == 0
        assert run_mix(workspace, out=out_b, alpha=0.0, clusters=clus_b / "clusters.jsonl") == 0
        assert (out_a / "dataset.jsonl").read_bytes() == (out_b / "dataset.jsonl").read_bytes()
        # the plan's sampling decisions agree; only the d_norm diagnostic
        # column reflects the (ignored) clustering
        decisions = lambda p: [
            {k: r[k] for k in ("id", "weight", "frequency", "count")}
            for r in map(json.loads, (p / "plan.jsonl").read_text().splitlines())
        ]
        assert decisions(out_a) == decisions(out_b)

    def test_explicit_quality_file(self, workspace):
        run_cluster(workspace)
        run(
            "annotate-fallback",
            "--corpus",
            workspace["corpus"],
            "--out-dir",
            workspace["out"],
        )
        assert run_mix(workspace, quality=workspace["out"] / "quality.jsonl") == 0

    def test_failing_stage_preserves_artifacts(self, workspace, capsys):
        run(
            "manifest", "--corpus", workspace["corpus"], "--out-dir", workspace["out"]
        )
        before = (workspace["out"] / "manifest.json").read_bytes()
        code = run_mix(workspace, clusters=workspace["tmp"] / "missing.jsonl")
        assert code == 2
        assert "missing.jsonl" in capsys.readouterr().err
        assert (workspace["out"] / "manifest.json").read_bytes() == before
        assert not (workspace["out"] / "dataset.jsonl").exists()


class TestReportCommand:
    def test_overlap_requires_cluster_artifact(self, workspace, capsys):
        missing = workspace["tmp"] / "nope" / "clusters.jsonl"
        code = run(
            "report",
            "--kind",
            "overlap",
            "--corpus",
            workspace["corpus"],
            "--clusters",
            missing,
            "--out-dir",
            workspace["out"],
        )
        assert code == 2
        assert str(missing) in capsys.readouterr().err

    def test_overlap_after_clustering(self, workspace):
        run_cluster(workspace)
        code = run(
            "report",
            "--kind",
            "overlap",
            "--corpus",
            workspace["corpus"],
            "--clusters",
            workspace["out"] / "clusters.jsonl",
            "--out-dir",
            workspace["out"],
            "--svg",
            workspace["out"] / "overlap.svg",
        )
        assert code == 0
        payload = json.loads((workspace["out"] / "report_overlap.json").read_text())
        assert payload["domains"] == ["books", "web", "wiki"]
        cells = np.array(payload["cells"])
        np.testing.assert_array_equal(np.diag(cells), [100.0] * 3)
        assert (workspace["out"] / "overlap.svg").read_text().startswith("<svg")

    def test_counts_matches_library_call(self, workspace):
        run_cluster(workspace)
        run_mix(workspace)
        code = run(
            "report",
            "--kind",
            "counts",
            "--plan",
            workspace["out"] / "plan.jsonl",
            "--out-dir",
            workspace["out"],
        )
        assert code == 0
        payload = json.loads((workspace["out"] / "report_counts.json").read_text())

        from corpusmix.analysis import count_report
        from corpusmix.sampler import read_plan

        direct = count_report(read_plan(workspace["out"] / "plan.jsonl")).to_json_dict()
        assert payload == json.loads(json.dumps(direct))

    def test_distribution_quality(self, workspace):
        run(
            "annotate-fallback",
            "--corpus",
            workspace["corpus"],
            "--out-dir",
            workspace["out"],
        )
        code = run(
            "report",
            "--kind",
            "distribution",
            "--measure",
            "quality",
            "--corpus",
            workspace["corpus"],
            "--quality",
            workspace["out"] / "quality.jsonl",
            "--out-dir",
            workspace["out"],
        )
        assert code == 0
        payload = json.loads(
            (workspace["out"] / "report_distribution_quality.json").read_text()
        )
        assert set(payload["domains"]) == {"web", "books", "wiki"}

    def test_domains_report(self, workspace):
        run_cluster(workspace)
        run_mix(workspace)
        code = run(
            "report",
            "--kind",
            "domains",
            "--corpus",
            workspace["corpus"],
            "--plan",
            workspace["out"] / "plan.jsonl",
            "--out-dir",
            workspace["out"],
        )
        assert code == 0
        payload = json.loads((workspace["out"] / "report_domains.json").read_text())
        shares = payload["domain_token_shares"]
        assert sum(shares.values()) == pytest.approx(1.0, abs=1e-9)


class TestEvalScorer:
    def test_metrics_on_stdout(self, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        golds = tmp_path / "g.jsonl"
        write_lines(
            preds, [json.dumps({"id": f"d{i}", "score": min(i + 1, 10)}) for i in range(10)]
        )
        write_lines(golds, [json.dumps({"id": f"d{i}", "score": i}) for i in range(10)])
        assert run("eval-scorer", "--predictions", preds, "--labels", golds) == 0
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["n"] == 10
        assert metrics["cacc"] == 1.0  # every prediction is off by exactly one
        assert metrics["acc"] == 0.0
        assert metrics["mae"] == 1.0

    def test_disjoint_ids_rejected(self, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        golds = tmp_path / "g.jsonl"
        write_lines(preds, [json.dumps({"id": "a", "score": 1})])
        write_lines(golds, [json.dumps({"id": "b", "score": 1})])
        assert run("eval-scorer", "--predictions", preds, "--labels", golds) == 2
        assert "share no ids" in capsys.readouterr().err

    def test_accepts_quality_field_files(self, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        golds = tmp_path / "g.jsonl"
        write_lines(preds, [json.dumps({"id": "a", "quality": 4})])
        write_lines(golds, [json.dumps({"id": "a", "score": 4})])
        assert run("eval-scorer", "--predictions", preds, "--labels", golds) == 0
        assert json.loads(capsys.readouterr().out)["acc"] == 1.0

    def test_bad_record_names_file_and_line(self, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        golds = tmp_path / "g.jsonl"
        write_lines(preds, [json.dumps({"id": "a", "score": 4})])
        write_lines(golds, [json.dumps({"id": "a", "rating": 4})])
        assert run("eval-scorer", "--predictions", preds, "--labels", golds) == 2
        err = capsys.readouterr().err
        assert "g.jsonl:1" in err and "'score'" in err


class TestConfigAndEnv:
    def test_config_file_with_flag_override(self, workspace, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(
            json.dumps({"corpus": str(workspace["corpus"]), "out_dir": str(workspace["out"])})
        )
        other_out = tmp_path / "flagged"
        other_out.mkdir()
        assert run("manifest", "--config", config, "--out-dir", other_out) == 0
        assert (other_out / "manifest.json").exists()
        assert not (workspace["out"] / "manifest.json").exists()

    def test_env_out_dir_override(self, workspace, tmp_path, monkeypatch):
        env_out = tmp_path / "env_out"
        env_out.mkdir()
        monkeypatch.setenv("CORPUSMIX_OUT_DIR", str(env_out))
        assert (
            run("manifest", "--corpus", workspace["corpus"], "--out-dir", workspace["out"])
            == 0
        )
        assert (env_out / "manifest.json").exists()
        assert not (workspace["out"] / "manifest.json").exists()

    def test_unknown_config_key_rejected(self, workspace, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"corpsu": "typo.jsonl"}))
        assert run("manifest", "--config", config, "--out-dir", workspace["out"]) == 2
        assert "corpsu" in capsys.readouterr().err
