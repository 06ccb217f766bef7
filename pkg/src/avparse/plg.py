"""Pseudo label generation: similarity thresholding masked by the weak label.

Similarities are softmax-normalized cosine scores between one image embedding
per segment and one text embedding per category.  A segment is labeled with a
category when its similarity clears the threshold tau and the category occurs
in the video-level label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import LabelSet, PseudoLabelMatrix, SimilarityMatrix, Stage

DEFAULT_TAU = 0.040
DEFAULT_EPSILON = 0.1


@dataclass(frozen=True)
class PlgConfig:
    tau: float = DEFAULT_TAU
    prompt_id: str = "P1"

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")


@dataclass(frozen=True)
class FeaturePair:
    """Per-segment image embeddings (T x d) and per-category text embeddings (C x d)."""

    image_features: np.ndarray
    text_features: np.ndarray

    def __post_init__(self):
        img = np.asarray(self.image_features, dtype=np.float64)
        txt = np.asarray(self.text_features, dtype=np.float64)
        object.__setattr__(self, "image_features", img)
        object.__setattr__(self, "text_features", txt)
        if img.ndim != 2 or txt.ndim != 2:
            raise ValueError("feature arrays must be 2-D")
        if img.shape[1] != txt.shape[1]:
            raise ValueError(
                f"feature dimensions differ: image d={img.shape[1]}, text d={txt.shape[1]}"
            )
        for name, arr in (("image", img), ("text", txt)):
            norms = np.linalg.norm(arr, axis=1)
            bad = np.flatnonzero(norms == 0.0)
            if bad.size:
                raise ValueError(f"{name} feature row {bad[0]} has zero norm")

    @property
    def d(self) -> int:
        return self.image_features.shape[1]


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def similarity_from_features(features: FeaturePair) -> SimilarityMatrix:
    """Row-wise softmax over cosine similarities between segments and categories."""
    img = features.image_features / np.linalg.norm(features.image_features, axis=1, keepdims=True)
    txt = features.text_features / np.linalg.norm(features.text_features, axis=1, keepdims=True)
    return SimilarityMatrix(_softmax_rows(img @ txt.T))


def generate_pseudo_labels(
    sim: SimilarityMatrix, labels: LabelSet, cfg: PlgConfig
) -> PseudoLabelMatrix:
    """Threshold similarities at tau and mask by the weak video label.

    Ties at the threshold count as positive.  Categories absent from the video
    label can never fire, so the column-consistency invariant holds by
    construction.
    """
    if sim.C != labels.C:
        raise ValueError(f"similarity has {sim.C} columns but labels define {labels.C} categories")
    if sim.T != labels.T:
        raise ValueError(f"similarity has {sim.T} rows but labels define T={labels.T}")
    mask = sim.values - cfg.tau >= 0.0
    values = mask.astype(np.int8) * labels.video_label[None, :]
    return PseudoLabelMatrix(values, Stage.PLG)


def smooth_video_labels(labels: LabelSet, epsilon: float = DEFAULT_EPSILON):
    """Symmetric label smoothing of the weak label; returns the (visual, audio)
    video-level target pair."""
    if not 0.0 <= epsilon < 0.5:
        raise ValueError(f"epsilon must lie in [0, 0.5), got {epsilon}")
    y = labels.video_label.astype(np.float64)
    smooth = (1.0 - epsilon) * y + epsilon * (1.0 - y)
    return smooth, smooth.copy()
