"""Core label containers shared by every pipeline stage.

A video carries a weak label vector over C event categories (the union of
its audio and visual events), T temporal segments, a T x C binary matrix of
segment-level visual pseudo labels, and a T x C row-stochastic similarity
matrix between segments and category texts.  All containers validate on
construction and are immutable afterwards; :func:`validate` is the
non-raising variant that reports every violation with coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

ROW_SUM_TOL = 1e-6


def _frozen(arr, dtype=np.float64) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(arr, dtype=dtype))
    out.flags.writeable = False
    return out


class Stage(Enum):
    """Provenance of a pseudo-label matrix: freshly generated or denoised."""

    PLG = "plg"
    PLD = "pld"


@dataclass(frozen=True)
class LabelSet:
    """Weak video-level label plus the category vocabulary and segment count."""

    video_label: np.ndarray
    categories: list[str]
    T: int

    def __post_init__(self):
        object.__setattr__(self, "video_label", _frozen(self.video_label, np.int8))
        object.__setattr__(self, "categories", list(self.categories))
        y = self.video_label
        if y.ndim != 1:
            raise ValueError(f"video_label must be a vector, got shape {y.shape}")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("video_label entries must be 0 or 1")
        if len(self.categories) != y.shape[0]:
            raise ValueError(
                f"{len(self.categories)} categories but video_label has length {y.shape[0]}"
            )
        if any(not isinstance(c, str) or not c for c in self.categories):
            raise ValueError("category names must be non-empty strings")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("category names must be unique")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")

    @property
    def C(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class PseudoLabelMatrix:
    """T x C binary matrix of segment-level visual pseudo labels."""

    values: np.ndarray
    stage: Stage

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.int8))
        v = self.values
        if v.ndim != 2:
            raise ValueError(f"pseudo labels must be a T x C matrix, got shape {v.shape}")
        if not np.isin(v, (0, 1)).all():
            raise ValueError("pseudo label entries must be 0 or 1")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def C(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SimilarityMatrix:
    """T x C row-stochastic similarity scores between segments and categories."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        v = self.values
        if v.ndim != 2:
            raise ValueError(f"similarities must be a T x C matrix, got shape {v.shape}")
        if (v < 0).any() or (v > 1).any():
            raise ValueError("similarity entries must lie in [0, 1]")
        sums = v.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise ValueError(
                f"similarity row {bad[0]} sums to {sums[bad[0]]:.8f}, expected 1 within {ROW_SUM_TOL}"
            )

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def C(self) -> int:
        return self.values.shape[1]


def derive_video_label(pseudo: PseudoLabelMatrix | np.ndarray) -> np.ndarray:
    """Collapse segment labels to a video-level vector: 1 iff the category
    fires in at least one segment."""
    values = pseudo.values if isinstance(pseudo, PseudoLabelMatrix) else np.asarray(pseudo)
    return (values.any(axis=0)).astype(np.int8)


@dataclass(frozen=True)
class Violation:
    """One invariant breach, with coordinates when they exist."""

    code: str
    message: str
    row: int | None = field(default=None)
    col: int | None = field(default=None)

    def __str__(self):
        loc = ""
        if self.row is not None or self.col is not None:
            loc = f" at ({self.row}, {self.col})"
        return f"[{self.code}]{loc} {self.message}"


def validate(labels: LabelSet, pseudo) -> list[Violation]:
    """Report every invariant violation of a (labels, pseudo-label) pair.

    Accepts a raw array for ``pseudo`` so that invalid data read from disk can
    be diagnosed rather than rejected at construction.  Returns an empty list
    iff all invariants hold.
    """
    values = pseudo.values if isinstance(pseudo, PseudoLabelMatrix) else np.asarray(pseudo)
    out: list[Violation] = []
    if values.ndim != 2:
        return [Violation("shape", f"pseudo labels must be 2-D, got shape {values.shape}")]
    T, C = values.shape
    if C != labels.C:
        out.append(
            Violation("dim-mismatch", f"pseudo has {C} columns but labels define {labels.C} categories")
        )
    if T != labels.T:
        out.append(Violation("dim-mismatch", f"pseudo has {T} rows but labels define T={labels.T}"))
    for t, c in zip(*np.nonzero(~np.isin(values, (0, 1)))):
        out.append(Violation("domain", f"entry {values[t, c]!r} is not 0/1", int(t), int(c)))
    for c in range(min(C, labels.C)):
        if labels.video_label[c] == 0:
            for t in np.flatnonzero(values[:, c]):
                out.append(
                    Violation(
                        "column-consistency",
                        f"category {labels.categories[c]!r} absent from the video label but set in segment {t}",
                        int(t),
                        int(c),
                    )
                )
    return out
