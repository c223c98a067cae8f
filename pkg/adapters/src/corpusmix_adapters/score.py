"""Quality score producer.

Two scorer families:

* prompt-based: render a template around each document, send it to a
  responder (a mock ledger for tests/offline runs, or an OpenAI-compatible
  chat endpoint), and parse the JSON reply's "Final Score" field.
  Unparseable replies skip the document and land in a skip report;
  out-of-range scores are clamped and flagged.
* ordinal: a local encoder checkpoint with K binary "score > t" heads;
  threshold probabilities are differenced into a class distribution and the
  argmax is the score. Requires the ``models`` extra.

Both write the toolkit's quality JSONL (``id``, ``quality``).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embed import AdapterJob
from .formats import read_corpus, write_quality_file, _atomic_write_bytes

log = logging.getLogger(__name__)

DEFAULT_TEMPLATE = """Rate the overall quality of the document below as an integer from 0 to 10, \
weighing clarity, completeness, structure and style, content accuracy, significance, \
knowledge richness, and logical depth. Reply with JSON only, including the key "Final Score".

<<<Document>>>
{document}"""


@dataclass
class ScoreReport:
    scored: int
    skipped: list[tuple[str, str]] = field(default_factory=list)
    clamped: list[str] = field(default_factory=list)


def parse_score(response: str) -> int:
    """Extract the integer "Final Score" from a model reply.

    Accepts raw JSON, fenced code blocks, or JSON embedded in prose.
    Raises ValueError when no parsable score is present.
    """
    payload = _extract_json(response)
    if payload is None or "Final Score" not in payload:
        raise ValueError("no JSON object with a \"Final Score\" field")
    value = payload["Final Score"]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"\"Final Score\" is not a number: {value!r}")
    return int(round(value))


def _extract_json(text: str):
    fenced = re.search(r"```(?:json)?\s*(\{.*?\})\s*```", text, re.DOTALL)
    candidates = [fenced.group(1)] if fenced else []
    candidates.append(text)
    brace = _balanced_braces(text)
    if brace:
        candidates.append(brace)
    for candidate in candidates:
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def _balanced_braces(text: str) -> str | None:
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


class MockResponder:
    """Replays canned responses from a JSONL ledger ({"id", "response"})."""

    def __init__(self, ledger_path):
        self.responses = {}
        with Path(ledger_path).open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    self.responses[str(rec["id"])] = rec["response"]

    def __call__(self, doc_id: str, prompt: str) -> str:
        if doc_id not in self.responses:
            raise KeyError(f"no canned response for {doc_id!r}")
        return self.responses[doc_id]


class HttpResponder:
    """OpenAI-compatible chat-completions endpoint."""

    def __init__(self, endpoint: str, model: str, api_key: str = "", timeout: float = 60.0):
        try:
            import httpx
        except ImportError as exc:  # pragma: no cover
            raise ImportError("HTTP responder needs the 'http' extra") from exc
        self._client = httpx.Client(timeout=timeout)
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key

    def __call__(self, doc_id: str, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        resp = self._client.post(
            f"{self.endpoint}/chat/completions",
            headers=headers,
            json={
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": 0,
            },
        )
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]


def score_corpus(job: AdapterJob, responder, template: str = DEFAULT_TEMPLATE) -> ScoreReport:
    """Prompt-score every document; write quality JSONL plus a skip report.

    ``responder`` is any callable ``(doc_id, prompt) -> response text``.
    The skip report lands at ``<output>.skipped`` with one record per
    document that could not be scored.
    """
    report = ScoreReport(scored=0)
    records = []
    for rec in read_corpus(job.corpus_path):
        doc_id = str(rec["id"])
        text = rec.get("text") or ""
        prompt = template.format(document=_truncate(text, job.max_length))
        try:
            response = responder(doc_id, prompt)
            score = parse_score(response)
        except (ValueError, KeyError) as exc:
            report.skipped.append((doc_id, str(exc)))
            log.warning("skipping %s: %s", doc_id, exc)
            continue
        if not 0 <= score <= 10:
            report.clamped.append(doc_id)
            log.warning("clamping out-of-range score %d for %s", score, doc_id)
            score = min(max(score, 0), 10)
        records.append({"id": doc_id, "quality": score})
        report.scored += 1

    write_quality_file(job.output_path, records)
    skip_lines = "".join(
        json.dumps({"id": i, "reason": reason}, ensure_ascii=False) + "\n"
        for i, reason in report.skipped
    )
    _atomic_write_bytes(Path(str(job.output_path) + ".skipped"), skip_lines.encode("utf-8"))
    return report


def _truncate(text: str, max_length: int) -> str:
    words = text.split()
    if len(words) <= max_length:
        return text
    return " ".join(words[:max_length])


# ---------------------------------------------------------------------------
# local ordinal-regression scorer


class OrdinalScorer:
    """Encoder + K binary threshold heads loaded from a checkpoint directory.

    Layout: a transformers encoder (save_pretrained format) plus
    ``ordinal_heads.pt`` holding a (K, hidden) weight matrix and (K,) bias.
    Head k predicts P(score > k); the decoded score is the argmax of the
    differenced class distribution.
    """

    def __init__(self, model_dir, max_length: int = 4096, batch_size: int = 8):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:  # pragma: no cover
            raise ImportError("ordinal scorer needs the 'models' extra") from exc
        self._torch = torch
        model_dir = Path(model_dir)
        self.encoder = AutoModel.from_pretrained(model_dir)
        self.encoder.eval()
        self.tokenizer = AutoTokenizer.from_pretrained(model_dir)
        heads = torch.load(model_dir / "ordinal_heads.pt", weights_only=True)
        self.weight = heads["weight"]  # (K, hidden)
        self.bias = heads["bias"]  # (K,)
        self.max_length = max_length
        self.batch_size = batch_size

    def thresholds(self, texts: list[str]) -> np.ndarray:
        """P(score > k) per text, shape (n, K)."""
        torch = self._torch
        outs = []
        with torch.no_grad():
            for start in range(0, len(texts), self.batch_size):
                batch = texts[start : start + self.batch_size]
                enc = self.tokenizer(
                    batch,
                    truncation=True,
                    padding=True,
                    max_length=self.max_length,
                    return_tensors="pt",
                )
                hidden = self.encoder(**enc).last_hidden_state[:, 0, :]
                logits = hidden @ self.weight.T + self.bias
                outs.append(torch.sigmoid(logits).numpy())
        return np.concatenate(outs, axis=0)

    def scores(self, texts: list[str]) -> np.ndarray:
        t = self.thresholds(texts)
        n, k = t.shape
        probs = np.empty((n, k + 1))
        probs[:, 0] = 1.0 - t[:, 0]
        if k > 1:
            probs[:, 1:-1] = t[:, :-1] - t[:, 1:]
        probs[:, -1] = t[:, -1]
        return probs.argmax(axis=1)


def score_corpus_ordinal(job: AdapterJob, scorer: OrdinalScorer | None = None) -> ScoreReport:
    """Score with a local ordinal checkpoint (job.model = checkpoint dir)."""
    if scorer is None:
        scorer = OrdinalScorer(job.model, max_length=job.max_length, batch_size=job.batch_size)
    ids, texts = [], []
    for rec in read_corpus(job.corpus_path):
        ids.append(str(rec["id"]))
        texts.append(rec.get("text") or "")
    if not ids:
        raise ValueError(f"empty corpus: {job.corpus_path}")
    scores = scorer.scores(texts)
    records = [
        {"id": doc_id, "quality": int(score)} for doc_id, score in zip(ids, scores)
    ]
    write_quality_file(job.output_path, records)
    _atomic_write_bytes(Path(str(job.output_path) + ".skipped"), b"")
    return ScoreReport(scored=len(records))
