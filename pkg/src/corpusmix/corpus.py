"""Corpus ingestion, manifest accounting, and annotation joins.

File contracts
--------------
corpus file
    JSONL, one record per line with ``id``, ``domain``, and ``text`` and/or
    ``tokens``. When ``tokens`` is absent the token count is derived from a
    whitespace word count times a configurable factor (default 1.0).
quality annotations
    JSONL with ``id`` and ``quality`` (integer 0..10).
embedding file
    One ASCII JSON header line declaring ``dim``, ``count`` and ``dtype``,
    followed by the raw row-major matrix of little-endian float32. A JSONL
    sidecar at ``<path>.ids`` maps row index to document id, in row order.

Raw corpora are never mutated: annotations live in side files and are joined
onto in-memory documents by id.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

log = logging.getLogger(__name__)

EMBEDDING_FORMAT = "corpusmix/embeddings"
EMBEDDING_DTYPE = "<f4"
ANNOTATION_KINDS = ("quality", "embedding", "diversity")


class CorpusError(ValueError):
    """Malformed corpus or annotation input."""


class DuplicateDocIdError(CorpusError):
    """A document id appears more than once in a corpus."""


@dataclass
class Document:
    """One corpus sample plus its annotation slots."""

    doc_id: str
    domain: str
    text: str | None = None
    token_count: int = 0
    quality_score: int | None = None
    embedding_ref: int | None = None
    diversity_raw: float | None = None
    weight: float | None = None
    count: int | None = None


@dataclass
class CorpusManifest:
    """Aggregate document/token totals with a per-domain breakdown."""

    total_docs: int = 0
    total_tokens: int = 0
    per_domain: dict[str, dict[str, int]] = field(default_factory=dict)

    def add(self, doc: Document) -> None:
        self.total_docs += 1
        self.total_tokens += doc.token_count
        entry = self.per_domain.setdefault(doc.domain, {"docs": 0, "tokens": 0})
        entry["docs"] += 1
        entry["tokens"] += doc.token_count

    def merge(self, other: "CorpusManifest") -> "CorpusManifest":
        """Combine two partial manifests (associative, for sharded builds)."""
        out = CorpusManifest(
            total_docs=self.total_docs + other.total_docs,
            total_tokens=self.total_tokens + other.total_tokens,
            per_domain={k: dict(v) for k, v in self.per_domain.items()},
        )
        for domain, entry in other.per_domain.items():
            tgt = out.per_domain.setdefault(domain, {"docs": 0, "tokens": 0})
            tgt["docs"] += entry["docs"]
            tgt["tokens"] += entry["tokens"]
        return out

    def to_json(self) -> str:
        payload = {
            "total_docs": self.total_docs,
            "total_tokens": self.total_tokens,
            "per_domain": self.per_domain,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CorpusManifest":
        payload = json.loads(text)
        return cls(
            total_docs=payload["total_docs"],
            total_tokens=payload["total_tokens"],
            per_domain=payload["per_domain"],
        )


@dataclass
class AttachReport:
    """Outcome of one annotation join."""

    kind: str
    attached: int
    missing_doc_ids: list[str]


class Corpus:
    """In-memory document collection preserving file order, indexed by id."""

    def __init__(self, docs: Iterable[Document]):
        self.docs: list[Document] = list(docs)
        self._index: dict[str, int] = {}
        dupes = []
        for i, doc in enumerate(self.docs):
            if doc.doc_id in self._index:
                dupes.append(doc.doc_id)
            else:
                self._index[doc.doc_id] = i
        if dupes:
            raise DuplicateDocIdError(
                f"duplicate doc ids: {', '.join(sorted(set(dupes)))}"
            )

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.docs)

    def __getitem__(self, i: int) -> Document:
        return self.docs[i]

    def get(self, doc_id: str) -> Document | None:
        i = self._index.get(doc_id)
        return None if i is None else self.docs[i]

    def ids(self) -> list[str]:
        return [d.doc_id for d in self.docs]

    def domains(self) -> list[str]:
        return sorted({d.domain for d in self.docs})

    def token_counts(self) -> np.ndarray:
        return np.array([d.token_count for d in self.docs], dtype=np.int64)


def token_count_from_text(text: str, factor: float = 1.0) -> int:
    """Stand-in tokenizer rule: whitespace word count times ``factor``."""
    return int(round(len(text.split()) * factor))


def iter_documents(path: str | Path, token_factor: float = 1.0) -> Iterator[Document]:
    """Stream documents from a JSONL corpus file in file order.

    Malformed records (bad JSON, missing ``id``/``domain``, neither ``text``
    nor ``tokens``) raise :class:`CorpusError` naming the 1-based line number.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if "id" not in rec:
                raise CorpusError(f"{path}:{lineno}: record missing 'id'")
            if "domain" not in rec:
                raise CorpusError(f"{path}:{lineno}: record missing 'domain'")
            text = rec.get("text")
            tokens = rec.get("tokens")
            if text is None and tokens is None:
                raise CorpusError(
                    f"{path}:{lineno}: record needs 'text' and/or 'tokens'"
                )
            if tokens is None:
                tokens = token_count_from_text(text, token_factor)
            tokens = int(tokens)
            if tokens < 0:
                raise CorpusError(f"{path}:{lineno}: negative token count")
            yield Document(
                doc_id=str(rec["id"]),
                domain=str(rec["domain"]),
                text=text,
                token_count=tokens,
            )


def load_corpus(
    path: str | Path,
    fmt: str = "jsonl",
    token_factor: float = 1.0,
    allow_duplicates: bool = False,
) -> Corpus:
    """Load a corpus file into memory, checking id uniqueness.

    Duplicate ids are fatal by default; with ``allow_duplicates`` the first
    occurrence wins and the rest are dropped with a warning.
    """
    if fmt != "jsonl":
        raise CorpusError(f"unsupported corpus format: {fmt!r}")
    docs: list[Document] = []
    seen: Counter[str] = Counter()
    for doc in iter_documents(path, token_factor):
        seen[doc.doc_id] += 1
        if seen[doc.doc_id] == 1:
            docs.append(doc)
    dupes = sorted(i for i, n in seen.items() if n > 1)
    if dupes:
        if not allow_duplicates:
            raise DuplicateDocIdError(
                f"{path}: duplicate doc ids: {', '.join(dupes)}"
            )
        log.warning("%s: kept first occurrence of %d duplicated ids", path, len(dupes))
    return Corpus(docs)


def build_manifest(corpus: Iterable[Document]) -> CorpusManifest:
    """Exact totals and per-domain breakdown for a document stream."""
    manifest = CorpusManifest()
    for doc in corpus:
        manifest.add(doc)
    if manifest.total_docs == 0:
        raise CorpusError("empty corpus")
    return manifest


def attach_annotations(corpus: Corpus, path: str | Path, kind: str) -> AttachReport:
    """Join a side annotation file onto the corpus by document id.

    Returns an :class:`AttachReport`; documents without an annotation are
    listed (and logged) but do not fail the join. Annotations referencing
    unknown ids, and duplicate annotations for one id, are errors.
    """
    if kind not in ANNOTATION_KINDS:
        raise CorpusError(f"unknown annotation kind: {kind!r}")
    if kind == "quality":
        covered = _attach_quality(corpus, path)
    elif kind == "embedding":
        covered = _attach_embeddings(corpus, path)
    else:
        covered = _attach_diversity(corpus, path)
    missing = [d.doc_id for d in corpus if d.doc_id not in covered]
    if missing:
        log.warning(
            "%s annotations missing for %d documents: %s",
            kind,
            len(missing),
            ", ".join(missing[:10]) + ("..." if len(missing) > 10 else ""),
        )
    return AttachReport(kind=kind, attached=len(covered), missing_doc_ids=missing)


def _iter_annotation_records(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"annotation file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def _attach_quality(corpus: Corpus, path: str | Path) -> set[str]:
    covered: set[str] = set()
    for lineno, rec in _iter_annotation_records(path):
        doc_id = str(rec.get("id"))
        doc = corpus.get(doc_id)
        if doc is None:
            raise CorpusError(f"{path}:{lineno}: annotation for unknown id {doc_id!r}")
        if doc_id in covered:
            raise CorpusError(f"{path}:{lineno}: duplicate annotation for {doc_id!r}")
        score = rec.get("quality")
        if isinstance(score, bool) or not isinstance(score, int) or not 0 <= score <= 10:
            raise CorpusError(
                f"{path}:{lineno}: quality must be an integer in [0, 10], got {score!r}"
            )
        doc.quality_score = score
        covered.add(doc_id)
    return covered


def _attach_diversity(corpus: Corpus, path: str | Path) -> set[str]:
    covered: set[str] = set()
    for lineno, rec in _iter_annotation_records(path):
        doc_id = str(rec.get("id"))
        doc = corpus.get(doc_id)
        if doc is None:
            raise CorpusError(f"{path}:{lineno}: annotation for unknown id {doc_id!r}")
        if doc_id in covered:
            raise CorpusError(f"{path}:{lineno}: duplicate annotation for {doc_id!r}")
        value = rec.get("diversity")
        if value is None or float(value) < 0:
            raise CorpusError(
                f"{path}:{lineno}: diversity must be a non-negative number"
            )
        doc.diversity_raw = float(value)
        covered.add(doc_id)
    return covered


def _attach_embeddings(corpus: Corpus, path: str | Path) -> set[str]:
    ids = read_embedding_ids(path)
    covered: set[str] = set()
    for row, doc_id in enumerate(ids):
        doc = corpus.get(doc_id)
        if doc is None:
            raise CorpusError(f"{sidecar_path(path)}: row {row} references unknown id {doc_id!r}")
        if doc_id in covered:
            raise CorpusError(f"{sidecar_path(path)}: duplicate row for {doc_id!r}")
        doc.embedding_ref = row
        covered.add(doc_id)
    return covered


# ---------------------------------------------------------------------------
# embedding matrix file


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".ids")


def write_embeddings(path: str | Path, vectors: np.ndarray, ids: list[str]) -> None:
    """Write an N x dim float32 matrix plus its row->id sidecar."""
    vectors = np.asarray(vectors)
    if vectors.ndim != 2:
        raise CorpusError(f"embedding matrix must be 2-d, got shape {vectors.shape}")
    if len(ids) != vectors.shape[0]:
        raise CorpusError(
            f"id count {len(ids)} does not match row count {vectors.shape[0]}"
        )
    header = {
        "format": EMBEDDING_FORMAT,
        "version": 1,
        "dim": int(vectors.shape[1]),
        "count": int(vectors.shape[0]),
        "dtype": EMBEDDING_DTYPE,
    }
    payload = np.ascontiguousarray(vectors, dtype=np.dtype(EMBEDDING_DTYPE))
    data = json.dumps(header, sort_keys=True).encode("ascii") + b"\n" + payload.tobytes()
    atomic_write_bytes(path, data)
    sidecar = "".join(
        json.dumps({"row": i, "id": doc_id}, ensure_ascii=False) + "\n"
        for i, doc_id in enumerate(ids)
    )
    atomic_write_text(sidecar_path(path), sidecar)


def read_embeddings(path: str | Path) -> tuple[np.ndarray, list[str]]:
    """Read an embedding file and its sidecar; returns (matrix, ids)."""
    matrix = read_embedding_matrix(path)
    ids = read_embedding_ids(path)
    if len(ids) != matrix.shape[0]:
        raise CorpusError(
            f"{sidecar_path(path)}: {len(ids)} ids for {matrix.shape[0]} rows"
        )
    return matrix, ids


def read_embedding_matrix(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"embedding file not found: {path}")
    with path.open("rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid embedding header") from exc
        if header.get("format") != EMBEDDING_FORMAT:
            raise CorpusError(f"{path}: not a {EMBEDDING_FORMAT} file")
        dim = int(header["dim"])
        count = int(header["count"])
        dtype = np.dtype(header.get("dtype", EMBEDDING_DTYPE))
        raw = fh.read()
    expected = count * dim * dtype.itemsize
    if len(raw) != expected:
        raise CorpusError(
            f"{path}: payload is {len(raw)} bytes, header declares {expected}"
        )
    return np.frombuffer(raw, dtype=dtype).reshape(count, dim)


def read_embedding_ids(path: str | Path) -> list[str]:
    sidecar = sidecar_path(path)
    if not sidecar.exists():
        raise CorpusError(f"embedding sidecar not found: {sidecar}")
    ids: list[str] = []
    for lineno, rec in _iter_annotation_records(sidecar):
        if int(rec.get("row", -1)) != len(ids):
            raise CorpusError(f"{sidecar}:{lineno}: rows must be contiguous from 0")
        ids.append(str(rec["id"]))
    return ids


# ---------------------------------------------------------------------------
# shared file helpers


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    text = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    atomic_write_text(path, text)


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file and rename, so failures never clobber outputs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
