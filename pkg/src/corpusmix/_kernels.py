"""Hot numeric kernels: cluster assignment and centroid accumulation.

Two interchangeable backends:

* ``numba`` -- @njit kernels that fuse assignment and centroid accumulation
  into a single pass over the rows (similarities still go through BLAS via
  ``np.dot``), avoiding the full N x k similarity matrix and the slow
  scatter-add of the fallback.
* ``numpy`` -- pure-numpy fallback: chunked matmul + ``np.add.at``.

Backend is selected once at import time from the ``CORPUSMIX_BACKEND``
environment variable: ``numba`` (require JIT, raise if unavailable),
``numpy`` (force fallback), or ``auto``/unset (numba when importable).

Both backends accumulate rows in increasing row order, so for identical
inputs they return identical labels, sums, and counts.
"""

from __future__ import annotations

import os

import numpy as np

_CHUNK = 8192

_requested = os.environ.get("CORPUSMIX_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"CORPUSMIX_BACKEND must be 'auto', 'numba' or 'numpy', got {_requested!r}"
    )

_numba_err = None
if _requested in ("auto", "numba"):
    try:
        import numba
    except ImportError as exc:  # pragma: no cover - exercised via env flag only
        numba = None
        _numba_err = exc
else:
    numba = None

if _requested == "numba" and numba is None:  # pragma: no cover
    raise ImportError(f"CORPUSMIX_BACKEND=numba but numba is unavailable: {_numba_err}")

BACKEND = "numba" if numba is not None else "numpy"


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return BACKEND


def set_num_threads(n: int) -> None:
    """Best-effort thread cap for the JIT backend (no-op on the fallback)."""
    if numba is not None:
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------------------
# numpy fallback


def _assign_np(x: np.ndarray, ct: np.ndarray, chunk: int):
    n = x.shape[0]
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    for s0 in range(0, n, chunk):
        s1 = min(s0 + chunk, n)
        sims = x[s0:s1] @ ct
        lab = np.argmax(sims, axis=1)
        labels[s0:s1] = lab
        best[s0:s1] = sims[np.arange(s1 - s0), lab]
    return labels, best


def _pass_np(x: np.ndarray, ct: np.ndarray, chunk: int):
    k = ct.shape[1]
    labels, best = _assign_np(x, ct, chunk)
    sums = np.zeros((k, x.shape[1]), dtype=np.float64)
    # np.add.at applies updates in row order, matching the JIT kernel bit for bit
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return labels, best, sums, counts


# ---------------------------------------------------------------------------
# numba kernels

if numba is not None:

    @numba.njit(cache=True)
    def _assign_nb(x, ct, chunk):  # pragma: no cover - covered via dispatch
        n = x.shape[0]
        k = ct.shape[1]
        labels = np.empty(n, dtype=np.int64)
        best = np.empty(n, dtype=np.float64)
        for s0 in range(0, n, chunk):
            s1 = min(s0 + chunk, n)
            sims = np.dot(x[s0:s1], ct)
            for r in range(s1 - s0):
                b = -2.0
                bj = 0
                for j in range(k):
                    v = sims[r, j]
                    if v > b:
                        b = v
                        bj = j
                labels[s0 + r] = bj
                best[s0 + r] = b
        return labels, best

    @numba.njit(cache=True)
    def _pass_nb(x, ct, chunk):  # pragma: no cover - covered via dispatch
        n, d = x.shape
        k = ct.shape[1]
        labels = np.empty(n, dtype=np.int64)
        best = np.empty(n, dtype=np.float64)
        sums = np.zeros((k, d), dtype=np.float64)
        counts = np.zeros(k, dtype=np.int64)
        for s0 in range(0, n, chunk):
            s1 = min(s0 + chunk, n)
            sims = np.dot(x[s0:s1], ct)
            for r in range(s1 - s0):
                b = -2.0
                bj = 0
                for j in range(k):
                    v = sims[r, j]
                    if v > b:
                        b = v
                        bj = j
                i = s0 + r
                labels[i] = bj
                best[i] = b
                counts[bj] += 1
                for t in range(d):
                    sums[bj, t] += x[i, t]
        return labels, best, sums, counts


# ---------------------------------------------------------------------------
# dispatch


def _prep(x: np.ndarray, centroids: np.ndarray):
    x = np.ascontiguousarray(x, dtype=np.float64)
    ct = np.ascontiguousarray(centroids.T, dtype=np.float64)
    return x, ct


def assign_rows(x: np.ndarray, centroids: np.ndarray, chunk: int = _CHUNK):
    """Assign each row of ``x`` to its nearest centroid by max dot product.

    Returns ``(labels, best_dot)``; ties break toward the lower centroid
    index. Rows and centroids must share the same dimensionality.
    """
    x, ct = _prep(x, centroids)
    if BACKEND == "numba":
        return _assign_nb(x, ct, chunk)
    return _assign_np(x, ct, chunk)


def assign_accumulate(x: np.ndarray, centroids: np.ndarray, chunk: int = _CHUNK):
    """One fused clustering pass: assignment plus per-cluster sums/counts.

    Returns ``(labels, best_dot, sums, counts)`` where ``sums[j]`` is the
    elementwise sum of the rows assigned to cluster ``j``.
    """
    x, ct = _prep(x, centroids)
    if BACKEND == "numba":
        return _pass_nb(x, ct, chunk)
    return _pass_np(x, ct, chunk)
