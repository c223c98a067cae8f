"""Document embedding producer.

Backends:

* ``hash`` -- deterministic pseudo-embeddings seeded from a digest of the
  text. No model required; useful for offline pipelines and tests. The
  vector for a given text is stable across runs and platforms.
* any other model id -- a sentence-transformers model (local path or hub
  id), run on CPU in deterministic inference mode. Requires the ``models``
  extra.

Rows are emitted in corpus order; re-running a job with identical inputs
and settings produces identical file bytes.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .formats import read_corpus, write_embedding_file

log = logging.getLogger(__name__)

DEFAULT_DIM = 768
DEFAULT_MAX_LENGTH = 4096


@dataclass
class AdapterJob:
    """One embedding or scoring run over a corpus file."""

    corpus_path: str
    output_path: str
    model: str = "hash"
    batch_size: int = 32
    max_length: int = DEFAULT_MAX_LENGTH
    dim: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_length < 1:
            raise ValueError(f"max_length must be >= 1, got {self.max_length}")


@dataclass
class EmbedReport:
    rows: int
    dim: int
    model: str


def embed_corpus(job: AdapterJob) -> EmbedReport:
    """Embed every document and write the matrix + id sidecar."""
    ids: list[str] = []
    texts: list[str] = []
    for rec in read_corpus(job.corpus_path):
        text = rec.get("text")
        if text is None:
            raise ValueError(f"document {rec['id']!r} has no text to embed")
        ids.append(str(rec["id"]))
        texts.append(_truncate_words(text, job.max_length))
    if not ids:
        raise ValueError(f"empty corpus: {job.corpus_path}")

    if job.model == "hash":
        dim = job.dim or DEFAULT_DIM
        vectors = _hash_embed(texts, dim)
    else:
        vectors = _model_embed(texts, job)
        if job.dim is not None and vectors.shape[1] != job.dim:
            raise ValueError(
                f"model emits dim {vectors.shape[1]}, job declares {job.dim}"
            )
        dim = vectors.shape[1]

    write_embedding_file(job.output_path, vectors, ids)
    log.info("embedded %d documents (dim=%d, model=%s)", len(ids), dim, job.model)
    return EmbedReport(rows=len(ids), dim=dim, model=job.model)


def _truncate_words(text: str, max_length: int) -> str:
    words = text.split()
    if len(words) <= max_length:
        return text
    return " ".join(words[:max_length])


def _hash_embed(texts: list[str], dim: int) -> np.ndarray:
    out = np.empty((len(texts), dim), dtype=np.float32)
    for i, text in enumerate(texts):
        digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
        seed = int.from_bytes(digest, "little")
        rng = np.random.Generator(np.random.Philox(key=seed))
        row = rng.standard_normal(dim)
        out[i] = (row / np.linalg.norm(row)).astype(np.float32)
    return out


def _model_embed(texts: list[str], job: AdapterJob) -> np.ndarray:
    try:
        import torch
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:  # pragma: no cover
        raise ImportError(
            "sentence-transformers backend needs the 'models' extra"
        ) from exc
    torch.manual_seed(0)
    model = SentenceTransformer(job.model, device="cpu")
    model.max_seq_length = min(model.max_seq_length or job.max_length, job.max_length)
    model.eval()
    with torch.no_grad():
        vectors = model.encode(
            texts,
            batch_size=job.batch_size,
            convert_to_numpy=True,
            normalize_embeddings=False,
            show_progress_bar=False,
        )
    return np.asarray(vectors, dtype=np.float32)
