"""Spherical K-means over unit embeddings and per-sample diversity scores.

Clustering runs on L2-normalized vectors with cosine distance (1 - dot).
Centroids are re-normalized every iteration; the cluster count defaults to
floor(sqrt(N)). Per-cluster statistics feed the per-sample diversity score:
every member of cluster j receives compactness_j * separation_j.

Determinism: for a fixed seed the run is bit-reproducible. Rows are first
brought into a canonical (content-derived) order, seeding and iteration
happen in that order, and assignments are mapped back, so permuting the
input rows yields the identical partition.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .corpus import read_embeddings, write_embeddings, write_jsonl

log = logging.getLogger(__name__)

NORM_ATOL = 1e-6
DEFAULT_ITERS = 50


@dataclass
class EmbeddingStore:
    """N x dim matrix of document embeddings, optionally unit-normalized."""

    vectors: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError(f"vectors must be 2-d, got shape {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("vectors contain non-finite values")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_file(cls, path) -> tuple["EmbeddingStore", list[str]]:
        matrix, ids = read_embeddings(path)
        return cls(vectors=matrix), ids


@dataclass
class Clustering:
    """Result of one clustering run plus derived per-cluster statistics."""

    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    objective_history: list[float] = field(default_factory=list)
    empty_clusters: list[int] = field(default_factory=list)
    seed: int = 0
    iters: int = DEFAULT_ITERS
    compactness: np.ndarray | None = None
    separation: np.ndarray | None = None

    def member_counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k).astype(np.int64)


def normalize_embeddings(store: EmbeddingStore) -> EmbeddingStore:
    """Scale every row to unit L2 norm; zero rows are an error."""
    norms = np.linalg.norm(store.vectors, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"zero embedding vector at row(s) {zero[:10].tolist()}")
    return EmbeddingStore(vectors=store.vectors / norms[:, None], normalized=True)


def _check_normalized(store: EmbeddingStore) -> None:
    norms = np.linalg.norm(store.vectors, axis=1)
    if not np.allclose(norms, 1.0, atol=NORM_ATOL, rtol=0.0):
        raise ValueError("store is not unit-normalized; call normalize_embeddings first")


def _canonical_order(x: np.ndarray) -> np.ndarray:
    """Content-derived total order on rows (byte-wise), so the clustering
    outcome cannot depend on input row positions."""
    blob = np.ascontiguousarray(x).view(np.dtype((np.void, x.shape[1] * x.itemsize)))
    return np.argsort(blob.ravel(), kind="stable")


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding under cosine distance."""
    n = x.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    dist = np.maximum(1.0 - x @ x[chosen[0]], 0.0)
    for j in range(1, k):
        weights = dist * dist
        total = weights.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=weights / total))
        else:
            # all remaining points coincide with a chosen centroid
            mask = np.ones(n, dtype=bool)
            mask[chosen[:j]] = False
            idx = int(np.flatnonzero(mask)[0]) if mask.any() else int(rng.integers(n))
        chosen[j] = idx
        dist = np.minimum(dist, np.maximum(1.0 - x @ x[idx], 0.0))
    return x[chosen].copy()


def _random_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    idx = rng.choice(x.shape[0], size=k, replace=False)
    return x[np.sort(idx)].copy()


def kmeans(
    store: EmbeddingStore,
    k: int | None = None,
    iters: int = DEFAULT_ITERS,
    seed: int = 0,
    init: str = "kmeans++",
    canonical: bool = True,
    chunk: int = 8192,
    early_stop: bool = True,
) -> Clustering:
    """Spherical K-means: Lloyd iterations with per-iteration centroid
    re-normalization, deterministic for a fixed seed.

    ``k`` defaults to floor(sqrt(N)). Each entry of ``objective_history`` is
    the sum of cosine distances to assigned centroids measured at an
    assignment step; the sequence is non-increasing. Clusters that come up
    empty after an update are re-seeded from the point currently farthest
    from its own centroid. A final assignment against the final centroids
    guarantees every row maps to its nearest centroid.

    With ``early_stop`` the loop exits once the assignment is stable (the
    update is then a fixpoint, so later iterations cannot change anything);
    disable it to force exactly ``iters`` recorded iterations.
    """
    _check_normalized(store)
    n = len(store)
    if k is None:
        k = max(1, math.floor(math.sqrt(n)))
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows ({n})")
    if init not in ("kmeans++", "random"):
        raise ValueError(f"unknown init {init!r}")

    x = store.vectors
    order = _canonical_order(x) if canonical else np.arange(n)
    xs = np.ascontiguousarray(x[order])

    rng = np.random.default_rng(seed)
    if init == "kmeans++":
        centroids = _kmeans_pp_init(xs, k, rng)
    else:
        centroids = _random_init(xs, k, rng)

    history: list[float] = []
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(iters):
        new_labels, best, sums, counts = _kernels.assign_accumulate(xs, centroids, chunk)
        history.append(float(n - best.sum()))
        converged = bool(np.array_equal(new_labels, labels))
        labels = new_labels
        if converged and early_stop:
            break
        centroids = _update_centroids(centroids, sums, counts)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            _reseed_empty(centroids, empty, xs, best)

    final_labels, best = _kernels.assign_rows(xs, centroids, chunk)
    history.append(float(n - best.sum()))

    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = final_labels
    final_counts = np.bincount(final_labels, minlength=k)
    return Clustering(
        k=k,
        centroids=centroids,
        assignment=assignment,
        objective_history=history,
        empty_clusters=np.flatnonzero(final_counts == 0).tolist(),
        seed=seed,
        iters=iters,
    )


def _update_centroids(centroids, sums, counts) -> np.ndarray:
    new = centroids.copy()
    nonempty = counts > 0
    means = sums[nonempty] / counts[nonempty, None]
    norms = np.linalg.norm(means, axis=1)
    # a degenerate mean (antipodal members cancelling out) keeps its old centroid
    ok = norms > 1e-12
    means[ok] /= norms[ok, None]
    updated = np.flatnonzero(nonempty)[ok]
    new[updated] = means[ok]
    return new


def _reseed_empty(centroids, empty, xs, best) -> None:
    # farthest points first: smallest dot with their assigned centroid
    farthest = np.argsort(best, kind="stable")
    for slot, j in enumerate(empty):
        centroids[j] = xs[farthest[slot % len(farthest)]]


def cluster_compactness(clustering: Clustering, store: EmbeddingStore) -> np.ndarray:
    """Mean cosine distance of each cluster's members to its centroid.

    Singletons score 0 by definition (one member carries no within-cluster
    redundancy); empty clusters also report 0 and are flagged on the
    clustering.
    """
    _check_normalized(store)
    n = len(store)
    if clustering.assignment.shape[0] != n:
        raise ValueError("clustering does not cover this store")
    dots = np.einsum(
        "ij,ij->i", store.vectors, clustering.centroids[clustering.assignment]
    )
    # dot(x, x) can exceed 1 by an ulp for unit vectors; distances stay >= 0
    dist = np.maximum(1.0 - dots, 0.0)
    sums = np.bincount(clustering.assignment, weights=dist, minlength=clustering.k)
    counts = clustering.member_counts()
    out = np.zeros(clustering.k, dtype=np.float64)
    multi = counts > 1
    out[multi] = sums[multi] / counts[multi]
    return out


def cluster_separation(clustering: Clustering, aggregate: str = "mean") -> np.ndarray:
    """Distance from each centroid to the other centroids.

    ``aggregate`` is "mean" (default) or "min". Undefined for k=1; callers
    should fall back to compactness-only diversity in that case.
    """
    k = clustering.k
    if k < 2:
        raise ValueError(
            "separation undefined for a single cluster; use compactness-only diversity"
        )
    if aggregate not in ("mean", "min"):
        raise ValueError(f"unknown aggregation {aggregate!r}")
    sims = clustering.centroids @ clustering.centroids.T
    dist = np.maximum(1.0 - sims, 0.0)
    np.fill_diagonal(dist, 0.0)
    if aggregate == "mean":
        return dist.sum(axis=1) / (k - 1)
    np.fill_diagonal(dist, np.inf)
    return dist.min(axis=1)


def compute_cluster_stats(
    clustering: Clustering, store: EmbeddingStore, aggregate: str = "mean"
) -> Clustering:
    """Fill compactness and separation on the clustering (in place)."""
    clustering.compactness = cluster_compactness(clustering, store)
    if clustering.k >= 2:
        clustering.separation = cluster_separation(clustering, aggregate)
    else:
        clustering.separation = None
    return clustering


def diversity_scores(clustering: Clustering) -> np.ndarray:
    """Per-sample diversity: compactness_j * separation_j of the sample's
    cluster j. All members of a cluster share the identical value."""
    if clustering.compactness is None:
        raise ValueError("compactness not computed; call compute_cluster_stats first")
    if clustering.separation is None:
        if clustering.k == 1:
            log.warning("single cluster: diversity falls back to compactness only")
            per_cluster = clustering.compactness
        else:
            raise ValueError("separation not computed; call compute_cluster_stats first")
    else:
        per_cluster = clustering.compactness * clustering.separation
    return per_cluster[clustering.assignment]


# ---------------------------------------------------------------------------
# persistence


def save_clustering(
    clustering: Clustering, doc_ids: list[str], centroids_path, clusters_path
) -> None:
    """Persist centroids (embedding-matrix format) and the per-document
    cluster/diversity table (JSONL)."""
    if len(doc_ids) != clustering.assignment.shape[0]:
        raise ValueError("doc_ids do not cover the clustering")
    write_embeddings(
        centroids_path,
        clustering.centroids,
        [f"centroid-{j}" for j in range(clustering.k)],
    )
    scores = diversity_scores(clustering)
    compactness = clustering.compactness
    separation = clustering.separation
    records = []
    for i, doc_id in enumerate(doc_ids):
        j = int(clustering.assignment[i])
        records.append(
            {
                "id": doc_id,
                "cluster": j,
                "compactness": float(compactness[j]),
                "separation": float(separation[j]) if separation is not None else None,
                "diversity": float(scores[i]),
            }
        )
    write_jsonl(clusters_path, records)


def load_cluster_table(clusters_path) -> dict[str, dict]:
    """Read the per-document cluster table back as id -> record."""
    from .corpus import read_jsonl

    table = {}
    for rec in read_jsonl(clusters_path):
        table[str(rec["id"])] = rec
    return table
