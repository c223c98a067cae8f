"""Producers for corpusmix ingestion files: embeddings and quality scores.

Strictly a format producer: no mixing logic lives here, and the corpusmix
package is consumed only through its documented file formats and CLI.
"""

__version__ = "0.1.0"

from .embed import AdapterJob, EmbedReport, embed_corpus
from .score import (
    DEFAULT_TEMPLATE,
    HttpResponder,
    MockResponder,
    OrdinalScorer,
    ScoreReport,
    parse_score,
    score_corpus,
    score_corpus_ordinal,
)

__all__ = [
    "AdapterJob",
    "DEFAULT_TEMPLATE",
    "EmbedReport",
    "HttpResponder",
    "MockResponder",
    "OrdinalScorer",
    "ScoreReport",
    "embed_corpus",
    "parse_score",
    "score_corpus",
    "score_corpus_ordinal",
]
