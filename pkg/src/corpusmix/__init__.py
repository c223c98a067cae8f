"""corpusmix: sample-wise corpus mixing under a token budget.

Score every document for quality and diversity, blend the scores into
sampling weights, convert weights to frequencies under a token budget, and
materialize the mixed dataset with diagnostic reports.
"""

__version__ = "0.1.0"

from .corpus import (
    AttachReport,
    Corpus,
    CorpusError,
    CorpusManifest,
    Document,
    DuplicateDocIdError,
    attach_annotations,
    build_manifest,
    iter_documents,
    load_corpus,
    read_embeddings,
    write_embeddings,
)
from .diversity import (
    Clustering,
    EmbeddingStore,
    cluster_compactness,
    cluster_separation,
    compute_cluster_stats,
    diversity_scores,
    kmeans,
    normalize_embeddings,
)
from .quality import (
    QualityRubric,
    decode_ordinal,
    evaluate_scorer,
    heuristic_quality,
)
from .sampler import (
    MixSummary,
    SamplerConfig,
    SamplingPlan,
    assemble_dataset,
    build_plan,
    minmax_normalize,
    sampling_frequencies,
    sampling_weights,
    stochastic_round,
    target_doc_count,
)
from .analysis import (
    CountReport,
    OverlapMatrix,
    count_report,
    distribution_report,
    emergent_domain_weights,
    overlap_matrix,
)

__all__ = [
    "AttachReport",
    "Clustering",
    "Corpus",
    "CorpusError",
    "CorpusManifest",
    "CountReport",
    "Document",
    "DuplicateDocIdError",
    "EmbeddingStore",
    "MixSummary",
    "OverlapMatrix",
    "QualityRubric",
    "SamplerConfig",
    "SamplingPlan",
    "assemble_dataset",
    "attach_annotations",
    "build_manifest",
    "build_plan",
    "cluster_compactness",
    "cluster_separation",
    "compute_cluster_stats",
    "count_report",
    "decode_ordinal",
    "distribution_report",
    "diversity_scores",
    "emergent_domain_weights",
    "evaluate_scorer",
    "heuristic_quality",
    "iter_documents",
    "kmeans",
    "load_corpus",
    "minmax_normalize",
    "normalize_embeddings",
    "overlap_matrix",
    "read_embeddings",
    "sampling_frequencies",
    "sampling_weights",
    "stochastic_round",
    "target_doc_count",
    "write_embeddings",
]
