import json

import numpy as np
import pytest

from corpusmix.corpus import Document


def write_lines(path, lines):
    path.write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")


def corpus_lines(docs):
    out = []
    for d in docs:
        rec = {"id": d["id"], "domain": d["domain"]}
        if "text" in d:
            rec["text"] = d["text"]
        if "tokens" in d:
            rec["tokens"] = d["tokens"]
        out.append(json.dumps(rec, ensure_ascii=False))
    return out


@pytest.fixture
def tiny_corpus_file(tmp_path):
    path = tmp_path / "corpus.jsonl"
    write_lines(
        path,
        corpus_lines(
            [
                {"id": "a", "domain": "web", "text": "one two three", "tokens": 3},
                {"id": "b", "domain": "web", "tokens": 7},
                {"id": "c", "domain": "books", "text": "four five"},
            ]
        ),
    )
    return path


def synthetic_corpus_file(path, n, domains, seed, token_range=(50, 2000)):
    """Write a synthetic corpus and return the generator-side ledger."""
    rng = np.random.default_rng(seed)
    ledger = {d: {"docs": 0, "tokens": 0} for d in domains}
    lines = []
    for i in range(n):
        domain = domains[int(rng.integers(len(domains)))]
        tokens = int(rng.integers(token_range[0], token_range[1] + 1))
        ledger[domain]["docs"] += 1
        ledger[domain]["tokens"] += tokens
        lines.append(
            json.dumps({"id": f"doc-{i:06d}", "domain": domain, "tokens": tokens})
        )
    write_lines(path, lines)
    return ledger


def synthetic_documents(n, domains, seed, token_range=(50, 2000)):
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n):
        docs.append(
            Document(
                doc_id=f"doc-{i:06d}",
                domain=domains[int(rng.integers(len(domains)))],
                token_count=int(rng.integers(token_range[0], token_range[1] + 1)),
            )
        )
    return docs


def unit_vectors(n, dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def clustered_unit_vectors(n, dim, centers, spread, seed):
    """Unit vectors in `centers` tight groups; returns (vectors, group ids)."""
    rng = np.random.default_rng(seed)
    anchors = rng.standard_normal((centers, dim))
    anchors /= np.linalg.norm(anchors, axis=1, keepdims=True)
    group = rng.integers(centers, size=n)
    x = anchors[group] + spread * rng.standard_normal((n, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x, group
