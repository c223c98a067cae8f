"""Quality label schema, ordinal-threshold decoding, and scorer metrics.

Scores are integers 0..10, the sum of seven rubric dimensions. Trained
evaluators emit K threshold probabilities ("score > t"); `decode_ordinal`
differences them into a class distribution and takes the argmax. A
deterministic text heuristic is provided as a stand-in scorer for pipelines
without precomputed scores; it makes no claim of agreement with any trained
evaluator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np

# dimension name -> (min, max). Two dimensions span three grades; the rest
# are binary. Totals land in [0, 10].
RUBRIC_DIMENSIONS: dict[str, tuple[int, int]] = {
    "clarity": (0, 1),
    "completeness": (0, 1),
    "structure_style": (0, 1),
    "content_accuracy": (0, 1),
    "significance": (0, 1),
    "knowledge_richness": (0, 2),
    "logicality_depth": (0, 2),
}

MIN_SCORE = 0
MAX_SCORE = 10
DEFAULT_NUM_THRESHOLDS = 10


@dataclass
class QualityRubric:
    """Seven-dimension quality breakdown for one document."""

    clarity: int = 0
    completeness: int = 0
    structure_style: int = 0
    content_accuracy: int = 0
    significance: int = 0
    knowledge_richness: int = 0
    logicality_depth: int = 0

    @property
    def total(self) -> int:
        return sum(getattr(self, f.name) for f in fields(self))

    def validate(self) -> None:
        for name, (lo, hi) in RUBRIC_DIMENSIONS.items():
            value = getattr(self, name)
            if not isinstance(value, int) or not lo <= value <= hi:
                raise ValueError(f"{name} must be an integer in [{lo}, {hi}], got {value!r}")
        if not MIN_SCORE <= self.total <= MAX_SCORE:
            raise ValueError(f"total {self.total} outside [{MIN_SCORE}, {MAX_SCORE}]")


class NonMonotoneThresholds(UserWarning):
    """Threshold vector is not non-increasing; class probabilities may go negative."""


def decode_ordinal(thresholds) -> tuple[int, np.ndarray]:
    """Decode K "score > t" probabilities into (score, class distribution).

    class_probs[0] = 1 - thresholds[0]; class_probs[i] = thresholds[i-1] -
    thresholds[i] for the middle classes; class_probs[K] = thresholds[K-1].
    The score is the argmax, ties broken toward the lower score. Inputs that
    are not monotone non-increasing are accepted with a warning; the argmax
    is still well-defined even if some entries go negative.
    """
    t = np.asarray(thresholds, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("thresholds must be a non-empty 1-d vector")
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("thresholds must be finite values in [0, 1]")
    if np.any(np.diff(t) > 0):
        warnings.warn(
            "threshold vector is not monotone non-increasing", NonMonotoneThresholds
        )
    k = t.size
    probs = np.empty(k + 1, dtype=np.float64)
    probs[0] = 1.0 - t[0]
    if k > 1:
        probs[1:-1] = t[:-1] - t[1:]
    probs[-1] = t[-1]
    score = int(np.argmax(probs))
    return score, probs


def heuristic_quality(doc_or_text) -> int:
    """Deterministic fallback score from surface text features, in [0, 10].

    Combines a length band (0-4), a type-token ratio band (0-3), and a
    sentence-completeness band (0-3). Identical text always yields the same
    score. This is plumbing for desk-scale runs, not a quality evaluator.
    """
    text = getattr(doc_or_text, "text", doc_or_text)
    if text is None:
        raise ValueError("document has no text to score")
    if not isinstance(text, str):
        raise ValueError(f"expected text, got {type(text).__name__}")
    words = text.split()
    if not words:
        return 0

    n = len(words)
    if n < 20:
        length_band = 0
    elif n < 50:
        length_band = 1
    elif n < 200:
        length_band = 2
    elif n < 1000:
        length_band = 3
    else:
        length_band = 4

    window = [w.lower() for w in words[:500]]
    ttr = len(set(window)) / len(window)
    if ttr < 0.3:
        ttr_band = 0
    elif ttr < 0.5:
        ttr_band = 1
    elif ttr < 0.7:
        ttr_band = 2
    else:
        ttr_band = 3

    terminal = ".!?"
    completeness = 0
    stripped = text.rstrip().rstrip("\"')]")
    if stripped and stripped[-1] in terminal:
        completeness += 1
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if lines:
        ended = sum(1 for ln in lines if ln.rstrip("\"')]")[-1:] in tuple(terminal))
        if ended / len(lines) >= 0.5:
            completeness += 1
    if sum(text.count(ch) for ch in terminal) >= 3:
        completeness += 1

    return min(max(length_band + ttr_band + completeness, MIN_SCORE), MAX_SCORE)


def evaluate_scorer(predictions, labels) -> dict[str, float]:
    """Exact/absolute/squared error metrics plus the relaxed +/-1 accuracy.

    ``acc`` is the exact-match fraction, ``mae``/``mse`` the mean absolute
    and squared deviations, and ``cacc`` counts a prediction as correct when
    it lands within one point of the label.
    """
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    if pred.shape != lab.shape or pred.ndim != 1:
        raise ValueError(f"shape mismatch: {pred.shape} vs {lab.shape}")
    if pred.size == 0:
        raise ValueError("empty inputs")
    for name, arr in (("predictions", pred), ("labels", lab)):
        if np.any(arr < MIN_SCORE) or np.any(arr > MAX_SCORE):
            raise ValueError(f"{name} must lie in [{MIN_SCORE}, {MAX_SCORE}]")
    diff = pred.astype(np.float64) - lab.astype(np.float64)
    return {
        "acc": float(np.mean(diff == 0)),
        "mae": float(np.mean(np.abs(diff))),
        "mse": float(np.mean(diff**2)),
        "cacc": float(np.mean(np.abs(diff) <= 1)),
    }
