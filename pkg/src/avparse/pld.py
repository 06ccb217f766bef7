"""Pseudo label denoising: flip entries whose forward BCE loss is abnormally
large for their category.

Per category column, the threshold is alpha times the average of the K
smallest losses; entries at or above it are flipped.  Columns whose category
is absent from the video-level pseudo label are exempt: applying the rule
literally to an all-zero column would flip every entry of a category the
video does not contain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import PseudoLabelMatrix, Stage, derive_video_label
from .losses import DEFAULT_CLAMP_EPS, bce_matrix

DEFAULT_K = 5
DEFAULT_ALPHA = 10.0


@dataclass(frozen=True)
class PldConfig:
    k: int = DEFAULT_K
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")


@dataclass(frozen=True)
class FlipMask:
    """T x C binary matrix marking the entries to flip."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.int8))
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValueError(f"flip mask must be a T x C matrix, got shape {v.shape}")
        if not np.isin(v, (0, 1)).all():
            raise ValueError("flip mask entries must be 0 or 1")


def loss_matrix(P_v, pseudo: PseudoLabelMatrix,
                clamp_eps: float = DEFAULT_CLAMP_EPS) -> np.ndarray:
    """Elementwise forward BCE between the visual prediction and the pseudo
    label, no reduction."""
    P_v = np.asarray(P_v, dtype=np.float64)
    if P_v.shape != pseudo.values.shape:
        raise ValueError(f"prediction shape {P_v.shape} != pseudo label shape {pseudo.values.shape}")
    return bce_matrix(P_v, pseudo.values, clamp_eps)


def mask_loss_matrix(M, y_hat_video) -> np.ndarray:
    """Zero the loss columns of categories absent from the video-level pseudo
    label; those columns are never denoised."""
    M = np.asarray(M, dtype=np.float64)
    y = np.asarray(y_hat_video)
    if M.shape[1] != y.shape[0]:
        raise ValueError(f"loss matrix has {M.shape[1]} columns but mask vector has length {y.shape[0]}")
    return M * y[None, :]


def flip_mask(M_masked, y_hat_video, cfg: PldConfig) -> FlipMask:
    """Flag entries whose loss reaches alpha times the mean of the K smallest
    losses in their column.  Ties at the threshold are flagged."""
    M = np.asarray(M_masked, dtype=np.float64)
    y = np.asarray(y_hat_video)
    T, C = M.shape
    if cfg.k > T:
        raise ValueError(f"k={cfg.k} exceeds the segment count T={T}")
    out = np.zeros((T, C), dtype=np.int8)
    for j in range(C):
        if y[j] == 0:
            continue
        smallest = np.sort(M[:, j])[: cfg.k]
        mu = cfg.alpha * smallest.mean()
        out[:, j] = M[:, j] >= mu
    return FlipMask(out)


def denoise(pseudo: PseudoLabelMatrix, flips: FlipMask) -> PseudoLabelMatrix:
    """Invert the pseudo label wherever the flip mask is set.

    Applying the same mask twice restores the original matrix.  On a freshly
    generated matrix, flips are only legal inside categories present at the
    video level; a flip elsewhere means the mask was built against a different
    matrix and is rejected.  Already-denoised matrices are exempt from that
    check: a valid mask can erase a category entirely, so reapplying it must
    be allowed to restore the column it emptied.
    """
    if flips.values.shape != pseudo.values.shape:
        raise ValueError(f"flip mask shape {flips.values.shape} != pseudo label shape {pseudo.values.shape}")
    if pseudo.stage is Stage.PLG:
        y_hat = derive_video_label(pseudo)
        illegal = flips.values * (1 - y_hat[None, :])
        if illegal.any():
            t, c = (int(i) for i in np.argwhere(illegal)[0])
            raise ValueError(
                f"flip requested at ({t}, {c}) but category {c} is absent from the video-level pseudo label"
            )
    refined = np.where(flips.values == 1, 1 - pseudo.values, pseudo.values)
    return PseudoLabelMatrix(refined, Stage.PLD)


def denoise_with_predictions(P_v, pseudo: PseudoLabelMatrix, cfg: PldConfig,
                             clamp_eps: float = DEFAULT_CLAMP_EPS) -> PseudoLabelMatrix:
    """Full denoising pass: loss matrix, masking, thresholding, flipping."""
    y_hat = derive_video_label(pseudo)
    masked = mask_loss_matrix(loss_matrix(P_v, pseudo, clamp_eps), y_hat)
    return denoise(pseudo, flip_mask(masked, y_hat, cfg))
