import json

import numpy as np
import pytest


@pytest.fixture
def fixture_corpus(tmp_path):
    """100-document corpus with text, domains, and token counts."""
    rng = np.random.default_rng(17)
    vocab = "data model training sample quality cluster corpus token batch mix".split()
    path = tmp_path / "corpus.jsonl"
    lines = []
    for i in range(100):
        words = rng.choice(vocab, size=int(rng.integers(4, 40)))
        lines.append(
            json.dumps(
                {
                    "id": f"doc-{i:03d}",
                    "domain": ["web", "books"][i % 2],
                    "text": " ".join(words) + ".",
                    "tokens": int(rng.integers(10, 200)),
                }
            )
        )
    path.write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")
    return path


def corpus_ids(path):
    return [json.loads(ln)["id"] for ln in path.read_text().splitlines()]
