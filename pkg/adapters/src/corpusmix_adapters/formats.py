"""Writers for the corpusmix ingestion file contracts.

These mirror the formats documented by the corpusmix package without
importing it; the adapters talk to the toolkit purely through files.

embedding file: one ASCII JSON header line ({"format", "version", "dim",
"count", "dtype"}), then the raw row-major little-endian float32 matrix.
Sidecar at ``<path>.ids``: JSONL mapping row index to document id, in row
order. Quality file: JSONL records with ``id`` and integer ``quality``.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterator

import numpy as np

EMBEDDING_FORMAT = "corpusmix/embeddings"
EMBEDDING_DTYPE = "<f4"


def write_embedding_file(path, vectors: np.ndarray, ids: list[str]) -> None:
    vectors = np.ascontiguousarray(vectors, dtype=np.dtype(EMBEDDING_DTYPE))
    if vectors.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {vectors.shape}")
    if vectors.shape[0] != len(ids):
        raise ValueError(f"{len(ids)} ids for {vectors.shape[0]} rows")
    header = {
        "format": EMBEDDING_FORMAT,
        "version": 1,
        "dim": int(vectors.shape[1]),
        "count": int(vectors.shape[0]),
        "dtype": EMBEDDING_DTYPE,
    }
    payload = json.dumps(header, sort_keys=True).encode("ascii") + b"\n" + vectors.tobytes()
    _atomic_write_bytes(path, payload)
    sidecar = "".join(
        json.dumps({"row": i, "id": doc_id}, ensure_ascii=False) + "\n"
        for i, doc_id in enumerate(ids)
    )
    _atomic_write_bytes(Path(str(path) + ".ids"), sidecar.encode("utf-8"))


def write_quality_file(path, records: list[dict]) -> None:
    for rec in records:
        score = rec.get("quality")
        if isinstance(score, bool) or not isinstance(score, int) or not 0 <= score <= 10:
            raise ValueError(f"quality out of range for {rec.get('id')!r}: {score!r}")
    text = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    _atomic_write_bytes(path, text.encode("utf-8"))


def read_corpus(path) -> Iterator[dict]:
    """Stream corpus records ({"id", "domain", "text", ...}) in file order."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if "id" not in rec:
                raise ValueError(f"{path}:{lineno}: record missing 'id'")
            yield rec


def _atomic_write_bytes(path, data: bytes) -> None:
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
