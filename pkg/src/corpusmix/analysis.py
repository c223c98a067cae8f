"""Diagnostic reports: cluster overlap between domains, measure
distributions, sampling-count breakdowns, and emergent domain weights.

Reports are pure reductions over immutable inputs and serialize to JSON;
bar charts and heatmaps can additionally be emitted as standalone SVG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .sampler import SamplingPlan

QUALITY_BINS = 11
DIVERSITY_BINS = 50


@dataclass
class OverlapMatrix:
    """Row domain i, column domain j: percentage of i's clusters that also
    contain at least one sample from j."""

    domains: list[str]
    cells: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "domains": self.domains,
            "cells": [[float(v) for v in row] for row in self.cells],
        }


@dataclass
class CountBucket:
    count: int
    docs: int
    proportion: float
    mean_weight: float


@dataclass
class CountReport:
    """Documents bucketed by realized sampling count."""

    buckets: list[CountBucket]
    overall_mean_weight: float
    discarded_fraction: float

    def to_json_dict(self) -> dict:
        return {
            "buckets": [
                {
                    "count": b.count,
                    "docs": b.docs,
                    "proportion": b.proportion,
                    "mean_weight": b.mean_weight,
                }
                for b in self.buckets
            ],
            "overall_mean_weight": self.overall_mean_weight,
            "discarded_fraction": self.discarded_fraction,
        }


def overlap_matrix(
    assignment,
    corpus: Corpus,
    include_domains: list[str] | None = None,
    exclude_domains: list[str] | None = None,
) -> OverlapMatrix:
    """Cross-domain cluster sharing, as presence percentages.

    A domain's cluster set is every cluster holding at least one of its
    documents; cell (i, j) is 100 * |clusters of i also holding j| /
    |clusters of i|. The diagonal is 100 by construction. Domains are
    reported in sorted order regardless of document order.
    """
    assignment = np.asarray(assignment)
    if assignment.shape[0] != len(corpus):
        raise ValueError("assignment does not cover the corpus")

    domains = corpus.domains()
    if exclude_domains:
        domains = [d for d in domains if d not in set(exclude_domains)]
    if include_domains:
        present = set(domains)
        missing = [d for d in include_domains if d not in present]
        if missing:
            raise ValueError(
                f"domain(s) with zero documents: {', '.join(sorted(missing))}"
            )
        domains = [d for d in domains if d in set(include_domains)]
    if not domains:
        raise ValueError("no domains to report")

    cluster_sets: dict[str, set[int]] = {d: set() for d in domains}
    wanted = set(domains)
    for i, doc in enumerate(corpus):
        if doc.domain in wanted:
            cluster_sets[doc.domain].add(int(assignment[i]))

    k = len(domains)
    cells = np.zeros((k, k), dtype=np.float64)
    for a, da in enumerate(domains):
        own = cluster_sets[da]
        for b, db in enumerate(domains):
            shared = len(own & cluster_sets[db])
            cells[a, b] = 100.0 * shared / len(own)
    return OverlapMatrix(domains=domains, cells=cells)


def distribution_report(corpus: Corpus, measure: str) -> dict:
    """Per-domain histogram and mean of an annotated measure.

    Quality uses the 11 integer bins 0..10; diversity uses 50 uniform bins
    over the observed range (recorded in the report for comparability).
    """
    if measure == "quality":
        values = _measure_array(corpus, "quality_score", measure)
        edges = np.arange(QUALITY_BINS + 1) - 0.5
    elif measure == "diversity":
        values = _measure_array(corpus, "diversity_raw", measure)
        lo, hi = float(values.min()), float(values.max())
        if hi == lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, DIVERSITY_BINS + 1)
    else:
        raise ValueError(f"unknown measure {measure!r}")

    report: dict = {
        "measure": measure,
        "bin_edges": [float(e) for e in edges],
        "domains": {},
    }
    domains = np.array([d.domain for d in corpus])
    for domain in corpus.domains():
        sel = values[domains == domain]
        hist, _ = np.histogram(sel, bins=edges)
        report["domains"][domain] = {
            "docs": int(sel.size),
            "mean": float(sel.mean()),
            "histogram": hist.tolist(),
        }
    return report


def _measure_array(corpus: Corpus, attr: str, measure: str) -> np.ndarray:
    values = np.empty(len(corpus), dtype=np.float64)
    missing = 0
    for i, doc in enumerate(corpus):
        v = getattr(doc, attr)
        if v is None:
            missing += 1
        else:
            values[i] = float(v)
    if missing:
        raise ValueError(f"{missing} documents lack a {measure} annotation")
    return values


def count_report(plan: SamplingPlan) -> CountReport:
    """Proportion of documents and mean sampling weight per count value."""
    if len(plan) == 0:
        raise ValueError("empty sampling plan")
    counts = np.asarray(plan.count)
    weights = np.asarray(plan.weight)
    n = counts.size
    buckets = []
    for c in sorted(set(int(v) for v in counts)):
        sel = counts == c
        docs = int(sel.sum())
        buckets.append(
            CountBucket(
                count=c,
                docs=docs,
                proportion=docs / n,
                mean_weight=float(weights[sel].mean()),
            )
        )
    return CountReport(
        buckets=buckets,
        overall_mean_weight=float(weights.mean()),
        discarded_fraction=float((counts == 0).sum() / n),
    )


def emergent_domain_weights(plan: SamplingPlan, corpus: Corpus) -> dict[str, float]:
    """Token share of each domain in the assembled dataset (sums to 1)."""
    if len(plan) != len(corpus):
        raise ValueError("plan does not cover the corpus")
    tokens: dict[str, int] = {}
    total = 0
    for i, doc in enumerate(corpus):
        t = int(plan.count[i]) * doc.token_count
        tokens[doc.domain] = tokens.get(doc.domain, 0) + t
        total += t
    if total == 0:
        raise ValueError("empty dataset: every document has count 0")
    return {d: tokens[d] / total for d in sorted(tokens)}


# ---------------------------------------------------------------------------
# SVG emitters (no plotting dependency; consumers are scripts and papers)


def svg_bar_chart(labels, values, title: str = "", width: int = 640, height: int = 360) -> str:
    values = [float(v) for v in values]
    labels = [str(l) for l in labels]
    if len(labels) != len(values) or not values:
        raise ValueError("labels and values must be equal-length and non-empty")
    top = max(max(values), 1e-12)
    margin, gap = 48, 4
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    bar_w = plot_w / len(values) - gap
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
    ]
    for i, (label, value) in enumerate(zip(labels, values)):
        h = plot_h * value / top
        x = margin + i * (bar_w + gap)
        y = margin + plot_h - h
        parts.append(
            f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" height="{h:.1f}" fill="#4878a8"/>'
        )
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{height - margin + 14:.1f}" '
            f'text-anchor="middle" font-size="10">{_esc(label)}</text>'
        )
    parts.append(
        f'<line x1="{margin}" y1="{margin + plot_h}" x2="{margin + plot_w}" '
        f'y2="{margin + plot_h}" stroke="#333"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def svg_heatmap(row_labels, col_labels, cells, title: str = "", cell: int = 48) -> str:
    cells = np.asarray(cells, dtype=np.float64)
    rows, cols = cells.shape
    if rows != len(row_labels) or cols != len(col_labels):
        raise ValueError("label counts do not match the matrix shape")
    margin = 96
    width = margin + cols * cell + 16
    height = margin + rows * cell + 16
    top = max(cells.max(), 1e-12)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
    ]
    for j, label in enumerate(col_labels):
        parts.append(
            f'<text x="{margin + j * cell + cell / 2:.1f}" y="{margin - 8}" '
            f'text-anchor="middle" font-size="10">{_esc(str(label))}</text>'
        )
    for i, label in enumerate(row_labels):
        parts.append(
            f'<text x="{margin - 8}" y="{margin + i * cell + cell / 2 + 4:.1f}" '
            f'text-anchor="end" font-size="10">{_esc(str(label))}</text>'
        )
        for j in range(cols):
            share = cells[i, j] / top
            shade = int(255 - 175 * share)
            parts.append(
                f'<rect x="{margin + j * cell}" y="{margin + i * cell}" width="{cell}" '
                f'height="{cell}" fill="rgb({shade},{shade},255)" stroke="#fff"/>'
            )
            parts.append(
                f'<text x="{margin + j * cell + cell / 2:.1f}" '
                f'y="{margin + i * cell + cell / 2 + 4:.1f}" text-anchor="middle" '
                f'font-size="10">{cells[i, j]:.1f}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts)


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
