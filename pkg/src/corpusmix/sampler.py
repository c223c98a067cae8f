"""Sampling weights, frequencies, integer counts, and dataset assembly.

The chain is: min-max normalize diversity and quality, blend them with a
weighting factor alpha into a per-document weight p in [0, 1], convert
weights to real-valued frequencies through a temperature softmax scaled to
the target document count, then stochastically round to integer counts and
emit each document count times.

Counts come from a counter-based RNG (Philox) keyed by (seed, document
index): the draw for document i never depends on iteration order or shard
boundaries, so sharded and single-process runs agree bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, CorpusManifest, atomic_write_text

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.8
DEFAULT_TAU = 0.2


@dataclass
class SamplerConfig:
    """Knobs for one mixing run."""

    target_tokens: int
    alpha: float = DEFAULT_ALPHA
    tau: float = DEFAULT_TAU
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.tau <= 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.target_tokens < 1:
            raise ValueError(f"target_tokens must be >= 1, got {self.target_tokens}")


@dataclass
class SamplingPlan:
    """Per-document weights/frequencies/counts plus run aggregates."""

    doc_ids: list[str]
    weight: np.ndarray
    frequency: np.ndarray
    count: np.ndarray
    target_docs: float
    expected_tokens: float
    realized_tokens: int
    config: SamplerConfig | None
    d_norm: np.ndarray | None = None
    q_norm: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.doc_ids)


@dataclass
class MixSummary:
    """What the assembled dataset looks like against its budget."""

    realized_docs: int
    realized_tokens: int
    target_tokens: int
    discarded_docs: int
    discarded_fraction: float
    discarded_mean_weight: float | None
    domain_token_shares: dict[str, float]
    count_histogram: dict[int, int]

    def to_json_dict(self) -> dict:
        return {
            "realized_docs": self.realized_docs,
            "realized_tokens": self.realized_tokens,
            "target_tokens": self.target_tokens,
            "discarded_docs": self.discarded_docs,
            "discarded_fraction": self.discarded_fraction,
            "discarded_mean_weight": self.discarded_mean_weight,
            "domain_token_shares": self.domain_token_shares,
            "count_histogram": {str(k): v for k, v in sorted(self.count_histogram.items())},
        }


def minmax_normalize(values) -> np.ndarray:
    """Affine map of a vector onto [0, 1]; a constant vector maps to 0.5.

    The midpoint convention for degenerate input keeps a constant measure
    from annihilating the other half of the blended weight.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("values must be a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("values contain non-finite entries")
    lo = v.min()
    hi = v.max()
    if hi == lo:
        return np.full(v.shape, 0.5)
    return (v - lo) / (hi - lo)


def sampling_weights(d_norm, q_norm, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Blend normalized diversity and quality: alpha*d + (1-alpha)*q."""
    d = np.asarray(d_norm, dtype=np.float64)
    q = np.asarray(q_norm, dtype=np.float64)
    if d.shape != q.shape:
        raise ValueError(f"length mismatch: {d.shape} vs {q.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    for name, arr in (("d_norm", d), ("q_norm", q)):
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError(f"{name} must lie in [0, 1]")
    return alpha * d + (1.0 - alpha) * q


def target_doc_count(t_tgt: int, manifest: CorpusManifest) -> float:
    """Documents to draw for a token budget: t_tgt / T_src * |D_src|.

    Computed as (t_tgt * |D_src|) / T_src so integer inputs divide exactly.
    """
    if manifest.total_tokens <= 0:
        raise ValueError("manifest has zero total tokens")
    if manifest.total_docs <= 0:
        raise ValueError("manifest has zero documents")
    return (float(t_tgt) * float(manifest.total_docs)) / float(manifest.total_tokens)


def sampling_frequencies(p, tau: float, target_docs: float) -> np.ndarray:
    """Real-valued expected appearance counts via a temperature softmax.

    c_i = target_docs * softmax(p/tau)_i, computed with max-subtraction.
    Frequencies sum to target_docs and increase strictly with p.
    """
    w = np.asarray(p, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("p must be a non-empty 1-d vector")
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    z = w / tau
    z -= z.max()
    e = np.exp(z)
    return target_docs * (e / e.sum())


def counter_uniforms(seed: int, start: int, n: int) -> np.ndarray:
    """Uniforms for document indices [start, start+n) from a Philox stream
    keyed by seed. Slicing the stream at any boundary reproduces the same
    values, which is what makes sharded rounding order-independent."""
    bg = np.random.Philox(key=seed)
    # Philox advances in blocks of four 64-bit words = four doubles
    bg.advance(start // 4)
    gen = np.random.Generator(bg)
    skip = start % 4
    if skip:
        gen.random(skip)
    return gen.random(n)


def stochastic_round(frequencies, seed: int, start: int = 0) -> np.ndarray:
    """Integer counts: floor(c) plus one more with probability frac(c).

    Deterministic for a fixed seed; the draw for index i depends only on
    (seed, start + i). Expected value of each count is exactly c.
    """
    c = np.asarray(frequencies, dtype=np.float64)
    if c.ndim != 1:
        raise ValueError("frequencies must be a 1-d vector")
    if c.size and c.min() < 0.0:
        raise ValueError("negative frequency")
    floor = np.floor(c)
    frac = c - floor
    u = counter_uniforms(seed, start, c.size)
    return (floor + (u < frac)).astype(np.int64)


def build_plan(
    corpus: Corpus,
    config: SamplerConfig,
    quality=None,
    diversity=None,
    manifest: CorpusManifest | None = None,
) -> SamplingPlan:
    """Run the full weight -> frequency -> count chain for a corpus.

    Quality and diversity default to the per-document annotations; pass
    arrays (aligned with corpus order) to override. Raw measures are min-max
    normalized here, then blended, scaled, and rounded.
    """
    n = len(corpus)
    if n == 0:
        raise ValueError("empty corpus")
    tokens = corpus.token_counts()
    bad = [corpus[i].doc_id for i in np.flatnonzero(tokens < 1)[:10]]
    if bad:
        raise ValueError(f"documents with zero tokens are not samplable: {', '.join(bad)}")

    if quality is None:
        quality = _annotation_array(corpus, "quality_score", "quality")
    if diversity is None:
        diversity = _annotation_array(corpus, "diversity_raw", "diversity")
    q_norm = minmax_normalize(quality)
    d_norm = minmax_normalize(diversity)
    p = sampling_weights(d_norm, q_norm, config.alpha)

    if manifest is None:
        from .corpus import build_manifest

        manifest = build_manifest(corpus)
    target = target_doc_count(config.target_tokens, manifest)
    freq = sampling_frequencies(p, config.tau, target)
    counts = stochastic_round(freq, config.seed)

    plan = SamplingPlan(
        doc_ids=corpus.ids(),
        weight=p,
        frequency=freq,
        count=counts,
        target_docs=target,
        expected_tokens=float(freq @ tokens),
        realized_tokens=int(counts @ tokens),
        config=config,
        d_norm=d_norm,
        q_norm=q_norm,
    )
    for i, doc in enumerate(corpus):
        doc.weight = float(p[i])
        doc.count = int(counts[i])
    return plan


def _annotation_array(corpus: Corpus, attr: str, kind: str) -> np.ndarray:
    values = np.empty(len(corpus), dtype=np.float64)
    missing = []
    for i, doc in enumerate(corpus):
        v = getattr(doc, attr)
        if v is None:
            missing.append(doc.doc_id)
            continue
        values[i] = float(v)
    if missing:
        raise ValueError(
            f"{len(missing)} documents lack a {kind} annotation: "
            + ", ".join(missing[:10])
            + ("..." if len(missing) > 10 else "")
        )
    return values


def write_plan(plan: SamplingPlan, path) -> None:
    """Persist the per-document plan as JSONL (one record per document)."""
    import json

    lines = []
    for i, doc_id in enumerate(plan.doc_ids):
        rec = {
            "id": doc_id,
            "weight": float(plan.weight[i]),
            "frequency": float(plan.frequency[i]),
            "count": int(plan.count[i]),
        }
        if plan.d_norm is not None:
            rec["d_norm"] = float(plan.d_norm[i])
        if plan.q_norm is not None:
            rec["q_norm"] = float(plan.q_norm[i])
        lines.append(json.dumps(rec, ensure_ascii=False))
    atomic_write_text(path, "".join(ln + "\n" for ln in lines))


def read_plan(path, config: SamplerConfig | None = None) -> SamplingPlan:
    """Load a persisted plan; aggregates are recomputed from the records."""
    from .corpus import read_jsonl

    doc_ids, weight, freq, count = [], [], [], []
    for rec in read_jsonl(path):
        doc_ids.append(str(rec["id"]))
        weight.append(float(rec["weight"]))
        freq.append(float(rec["frequency"]))
        count.append(int(rec["count"]))
    if not doc_ids:
        raise ValueError(f"empty plan file: {path}")
    return SamplingPlan(
        doc_ids=doc_ids,
        weight=np.array(weight),
        frequency=np.array(freq),
        count=np.array(count, dtype=np.int64),
        target_docs=float(np.sum(freq)),
        expected_tokens=float("nan"),
        realized_tokens=0,
        config=config,
    )


def assemble_dataset(corpus: Corpus, counts, output_path) -> MixSummary:
    """Write each document ``count`` times; replicas get an ``#<r>`` id
    suffix and every record carries a ``replica`` index field.

    Returns the realized totals, per-domain token shares of the output, and
    the discarded (count 0) share with its mean weight.
    """
    import json

    counts = np.asarray(counts)
    if counts.shape[0] != len(corpus):
        raise ValueError(
            f"counts cover {counts.shape[0]} documents, corpus has {len(corpus)}"
        )
    if counts.size and counts.min() < 0:
        raise ValueError("negative count")

    realized_docs = 0
    realized_tokens = 0
    domain_tokens: dict[str, int] = {}
    histogram: dict[int, int] = {}
    discarded_weights: list[float] = []
    lines: list[str] = []
    for i, doc in enumerate(corpus):
        c = int(counts[i])
        histogram[c] = histogram.get(c, 0) + 1
        if c == 0:
            if doc.weight is not None:
                discarded_weights.append(doc.weight)
            continue
        base = {"id": doc.doc_id, "domain": doc.domain}
        if doc.text is not None:
            base["text"] = doc.text
        base["tokens"] = doc.token_count
        for r in range(c):
            rec = dict(base)
            if r > 0:
                rec["id"] = f"{doc.doc_id}#{r}"
            rec["replica"] = r
            lines.append(json.dumps(rec, ensure_ascii=False))
        realized_docs += c
        realized_tokens += c * doc.token_count
        domain_tokens[doc.domain] = domain_tokens.get(doc.domain, 0) + c * doc.token_count

    atomic_write_text(output_path, "".join(ln + "\n" for ln in lines))
    if realized_docs == 0:
        log.warning("all counts are zero: wrote an empty dataset to %s", output_path)

    discarded = histogram.get(0, 0)
    shares = {
        d: (t / realized_tokens if realized_tokens else 0.0)
        for d, t in sorted(domain_tokens.items())
    }
    return MixSummary(
        realized_docs=realized_docs,
        realized_tokens=realized_tokens,
        target_tokens=0,
        discarded_docs=discarded,
        discarded_fraction=discarded / len(corpus),
        discarded_mean_weight=(
            float(np.mean(discarded_weights)) if discarded_weights else None
        ),
        domain_token_shares=shares,
        count_histogram=histogram,
    )
