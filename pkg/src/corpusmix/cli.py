"""Pipeline command line: ingest -> annotate -> cluster -> mix -> report.

Every subcommand reads a declarative config file (JSON, or YAML when pyyaml
is installed) whose keys mirror the flags; flags override config values. A
resolved-config snapshot is written next to each run's outputs, and all
artifact writes are atomic so a failing stage never clobbers completed
outputs.

Environment:
    CORPUSMIX_OUT_DIR   overrides the output directory
    CORPUSMIX_THREADS   caps worker threads for the numeric kernels
    CORPUSMIX_BACKEND   kernel backend: auto (default), numba, numpy
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels, analysis, diversity, quality, sampler
from .corpus import (
    Corpus,
    CorpusError,
    atomic_write_text,
    attach_annotations,
    build_manifest,
    load_corpus,
    read_jsonl,
    write_jsonl,
)

CONFIG_KEYS = (
    "corpus",
    "embeddings",
    "quality",
    "clusters",
    "plan",
    "out_dir",
    "alpha",
    "tau",
    "target_tokens",
    "k",
    "iters",
    "seed",
    "token_factor",
    "kind",
    "measure",
    "exclude_domains",
)


def load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise CorpusError(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8")
    if p.suffix in (".yaml", ".yml"):
        try:
            import yaml
        except ImportError as exc:
            raise CorpusError("YAML config requires pyyaml") from exc
        payload = yaml.safe_load(text)
    else:
        payload = json.loads(text)
    if not isinstance(payload, dict):
        raise CorpusError(f"config file must hold a mapping: {p}")
    unknown = sorted(set(payload) - set(CONFIG_KEYS))
    if unknown:
        raise CorpusError(f"unknown config keys: {', '.join(unknown)}")
    return payload


def resolve(args: argparse.Namespace, key: str, default=None):
    """Flag > config file > default; out_dir additionally honors the env."""
    if key == "out_dir" and os.environ.get("CORPUSMIX_OUT_DIR"):
        return os.environ["CORPUSMIX_OUT_DIR"]
    value = getattr(args, key, None)
    if value is not None:
        return value
    return args._config.get(key, default)


def write_snapshot(out_dir: Path, stage: str, settings: dict) -> None:
    payload = {"stage": stage, "backend": _kernels.backend_name(), "settings": settings}
    atomic_write_text(
        out_dir / f"resolved_config.{stage}.json",
        json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
    )


def _require(settings: dict, *keys: str) -> None:
    missing = [k for k in keys if settings.get(k) is None]
    if missing:
        raise CorpusError(f"missing required setting(s): {', '.join(missing)}")


def _setting(settings: dict, key: str, default):
    value = settings.get(key)
    return default if value is None else value


def _load_corpus(settings: dict) -> Corpus:
    return load_corpus(
        settings["corpus"], token_factor=float(settings.get("token_factor") or 1.0)
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_manifest(settings: dict) -> None:
    _require(settings, "corpus", "out_dir")
    out_dir = Path(settings["out_dir"])
    corpus = _load_corpus(settings)
    manifest = build_manifest(corpus)
    atomic_write_text(out_dir / "manifest.json", manifest.to_json() + "\n")
    write_snapshot(out_dir, "manifest", settings)
    print(f"manifest: {manifest.total_docs} docs, {manifest.total_tokens} tokens")


def cmd_annotate_fallback(settings: dict) -> None:
    _require(settings, "corpus", "out_dir")
    out_dir = Path(settings["out_dir"])
    corpus = _load_corpus(settings)
    records = [
        {"id": doc.doc_id, "quality": quality.heuristic_quality(doc)} for doc in corpus
    ]
    write_jsonl(out_dir / "quality.jsonl", records)
    write_snapshot(out_dir, "annotate-fallback", settings)
    print(f"annotate-fallback: scored {len(records)} documents")


def cmd_cluster(settings: dict) -> None:
    _require(settings, "corpus", "embeddings", "out_dir")
    out_dir = Path(settings["out_dir"])
    corpus = _load_corpus(settings)
    attach_annotations(corpus, settings["embeddings"], "embedding")
    refs = [doc.embedding_ref for doc in corpus]
    if any(r is None for r in refs):
        raise CorpusError("some documents have no embedding row")
    store, _ = diversity.EmbeddingStore.from_file(settings["embeddings"])
    store = diversity.EmbeddingStore(vectors=store.vectors[np.array(refs)])
    store = diversity.normalize_embeddings(store)

    clustering = diversity.kmeans(
        store,
        k=int(settings["k"]) if settings.get("k") is not None else None,
        iters=int(_setting(settings, "iters", diversity.DEFAULT_ITERS)),
        seed=int(_setting(settings, "seed", 0)),
    )
    diversity.compute_cluster_stats(clustering, store)
    diversity.save_clustering(
        clustering, corpus.ids(), out_dir / "centroids.bin", out_dir / "clusters.jsonl"
    )
    summary = {
        "k": clustering.k,
        "iters": clustering.iters,
        "seed": clustering.seed,
        "objective_history": clustering.objective_history,
        "empty_clusters": clustering.empty_clusters,
    }
    atomic_write_text(
        out_dir / "cluster_summary.json",
        json.dumps(summary, sort_keys=True, indent=2) + "\n",
    )
    write_snapshot(out_dir, "cluster", settings)
    print(
        f"cluster: k={clustering.k}, objective "
        f"{clustering.objective_history[0]:.4f} -> {clustering.objective_history[-1]:.4f}"
    )


def cmd_mix(settings: dict) -> None:
    _require(settings, "corpus", "target_tokens", "out_dir")
    out_dir = Path(settings["out_dir"])
    corpus = _load_corpus(settings)

    if settings.get("quality"):
        attach_annotations(corpus, settings["quality"], "quality")
    else:
        for doc in corpus:
            doc.quality_score = quality.heuristic_quality(doc)
    if not settings.get("clusters"):
        raise CorpusError("mix needs --clusters (run the cluster stage first)")
    attach_annotations(corpus, settings["clusters"], "diversity")

    config = sampler.SamplerConfig(
        target_tokens=int(settings["target_tokens"]),
        alpha=float(_setting(settings, "alpha", sampler.DEFAULT_ALPHA)),
        tau=float(_setting(settings, "tau", sampler.DEFAULT_TAU)),
        seed=int(_setting(settings, "seed", 0)),
    )
    plan = sampler.build_plan(corpus, config)
    sampler.write_plan(plan, out_dir / "plan.jsonl")
    summary = sampler.assemble_dataset(corpus, plan.count, out_dir / "dataset.jsonl")
    summary.target_tokens = config.target_tokens
    atomic_write_text(
        out_dir / "mix_summary.json",
        json.dumps(summary.to_json_dict(), sort_keys=True, indent=2) + "\n",
    )
    write_snapshot(out_dir, "mix", settings)
    drift = summary.realized_tokens / config.target_tokens - 1.0
    print(
        f"mix: {summary.realized_docs} docs, {summary.realized_tokens} tokens "
        f"({drift:+.2%} vs budget), discarded {summary.discarded_fraction:.1%}"
    )


def cmd_report(settings: dict) -> None:
    _require(settings, "kind", "out_dir")
    kind = settings["kind"]
    out_dir = Path(settings["out_dir"])
    svg_path = settings.get("svg")

    if kind == "overlap":
        _require(settings, "corpus", "clusters")
        _check_artifact(settings["clusters"], "clustering table")
        corpus = _load_corpus(settings)
        table = diversity.load_cluster_table(settings["clusters"])
        assignment = _assignment_for(corpus, table, settings["clusters"])
        exclude = settings.get("exclude_domains") or None
        if isinstance(exclude, str):
            exclude = [d.strip() for d in exclude.split(",") if d.strip()]
        matrix = analysis.overlap_matrix(assignment, corpus, exclude_domains=exclude)
        payload = matrix.to_json_dict()
        out = out_dir / "report_overlap.json"
        if svg_path:
            atomic_write_text(
                svg_path,
                analysis.svg_heatmap(
                    matrix.domains, matrix.domains, matrix.cells, title="cluster overlap %"
                ),
            )
    elif kind == "distribution":
        _require(settings, "corpus", "measure")
        corpus = _load_corpus(settings)
        measure = settings["measure"]
        if measure == "quality":
            _require(settings, "quality")
            attach_annotations(corpus, settings["quality"], "quality")
        else:
            _require(settings, "clusters")
            _check_artifact(settings["clusters"], "clustering table")
            attach_annotations(corpus, settings["clusters"], "diversity")
        payload = analysis.distribution_report(corpus, measure)
        out = out_dir / f"report_distribution_{measure}.json"
        if svg_path:
            domains = sorted(payload["domains"])
            atomic_write_text(
                svg_path,
                analysis.svg_bar_chart(
                    domains,
                    [payload["domains"][d]["mean"] for d in domains],
                    title=f"mean {measure} by domain",
                ),
            )
    elif kind == "counts":
        _require(settings, "plan")
        _check_artifact(settings["plan"], "sampling plan")
        plan = sampler.read_plan(settings["plan"])
        report = analysis.count_report(plan)
        payload = report.to_json_dict()
        out = out_dir / "report_counts.json"
        if svg_path:
            atomic_write_text(
                svg_path,
                analysis.svg_bar_chart(
                    [b.count for b in report.buckets],
                    [b.proportion for b in report.buckets],
                    title="sampling count proportions",
                ),
            )
    elif kind == "domains":
        _require(settings, "corpus", "plan")
        _check_artifact(settings["plan"], "sampling plan")
        corpus = _load_corpus(settings)
        plan = sampler.read_plan(settings["plan"])
        if plan.doc_ids != corpus.ids():
            raise CorpusError("plan and corpus do not list the same documents")
        shares = analysis.emergent_domain_weights(plan, corpus)
        payload = {"domain_token_shares": shares}
        out = out_dir / "report_domains.json"
        if svg_path:
            atomic_write_text(
                svg_path,
                analysis.svg_bar_chart(
                    list(shares), list(shares.values()), title="emergent domain weights"
                ),
            )
    else:
        raise CorpusError(f"unknown report kind {kind!r}")

    atomic_write_text(out, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    write_snapshot(out_dir, f"report-{kind}", settings)
    print(f"report: wrote {out}")


def _check_artifact(path, what: str) -> None:
    if not Path(path).exists():
        raise CorpusError(f"{what} artifact not found: {path}")


def _assignment_for(corpus: Corpus, table: dict, source) -> np.ndarray:
    assignment = np.empty(len(corpus), dtype=np.int64)
    for i, doc in enumerate(corpus):
        rec = table.get(doc.doc_id)
        if rec is None:
            raise CorpusError(f"{source}: no cluster entry for document {doc.doc_id!r}")
        assignment[i] = int(rec["cluster"])
    return assignment


def _read_scores(path) -> dict[str, int]:
    if not Path(path).exists():
        raise CorpusError(f"score file not found: {path}")
    scores: dict[str, int] = {}
    for lineno, rec in enumerate(read_jsonl(path), start=1):
        value = rec.get("score", rec.get("quality"))
        if "id" not in rec or value is None:
            raise CorpusError(f"{path}:{lineno}: record needs 'id' and 'score'")
        scores[str(rec["id"])] = int(value)
    return scores


def cmd_eval_scorer(settings: dict) -> None:
    _require(settings, "predictions", "labels")
    pred = _read_scores(settings["predictions"])
    gold = _read_scores(settings["labels"])
    shared = sorted(set(pred) & set(gold))
    if not shared:
        raise CorpusError("prediction and label files share no ids")
    metrics = quality.evaluate_scorer(
        [pred[i] for i in shared], [gold[i] for i in shared]
    )
    metrics["n"] = len(shared)
    print(json.dumps(metrics, sort_keys=True))


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corpusmix",
        description="Sample-wise corpus mixing under a token budget.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON/YAML config file; flags override it")
        p.add_argument("--out-dir", dest="out_dir", help="output directory")

    p = sub.add_parser("manifest", help="corpus totals and per-domain breakdown")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--token-factor", dest="token_factor", type=float)

    p = sub.add_parser("annotate-fallback", help="heuristic quality annotations")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--token-factor", dest="token_factor", type=float)

    p = sub.add_parser("cluster", help="spherical K-means and diversity scores")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--embeddings")
    p.add_argument("--k", type=int, help="cluster count (default floor(sqrt(N)))")
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--token-factor", dest="token_factor", type=float)

    p = sub.add_parser("mix", help="weights, frequencies, counts, and the dataset")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--quality", help="quality JSONL (omit to use the fallback scorer)")
    p.add_argument("--clusters", help="clusters.jsonl from the cluster stage")
    p.add_argument("--target-tokens", dest="target_tokens", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--token-factor", dest="token_factor", type=float)

    p = sub.add_parser("report", help="diagnostic reports from pipeline artifacts")
    common(p)
    p.add_argument("--kind", choices=["overlap", "distribution", "counts", "domains"])
    p.add_argument("--corpus")
    p.add_argument("--quality")
    p.add_argument("--clusters")
    p.add_argument("--plan")
    p.add_argument("--measure", choices=["quality", "diversity"])
    p.add_argument("--exclude-domains", dest="exclude_domains")
    p.add_argument("--svg", help="also render the report as SVG to this path")
    p.add_argument("--token-factor", dest="token_factor", type=float)

    p = sub.add_parser("eval-scorer", help="ACC/MAE/MSE/CACC for a scorer")
    p.add_argument("--config", help="JSON/YAML config file; flags override it")
    p.add_argument("--predictions", help="JSONL with id, score")
    p.add_argument("--labels", help="JSONL with id, score")

    return parser


COMMANDS = {
    "manifest": (cmd_manifest, ("corpus", "token_factor", "out_dir")),
    "annotate-fallback": (cmd_annotate_fallback, ("corpus", "token_factor", "out_dir")),
    "cluster": (
        cmd_cluster,
        ("corpus", "embeddings", "k", "iters", "seed", "token_factor", "out_dir"),
    ),
    "mix": (
        cmd_mix,
        (
            "corpus",
            "quality",
            "clusters",
            "target_tokens",
            "alpha",
            "tau",
            "seed",
            "token_factor",
            "out_dir",
        ),
    ),
    "report": (
        cmd_report,
        (
            "kind",
            "corpus",
            "quality",
            "clusters",
            "plan",
            "measure",
            "exclude_domains",
            "svg",
            "token_factor",
            "out_dir",
        ),
    ),
    "eval-scorer": (cmd_eval_scorer, ("predictions", "labels")),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("CORPUSMIX_THREADS")
    if threads:
        _kernels.set_num_threads(int(threads))

    handler, keys = COMMANDS[args.command]
    try:
        args._config = load_config_file(getattr(args, "config", None))
        settings = {k: resolve(args, k) for k in keys}
        handler(settings)
    except (CorpusError, ValueError, OSError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
