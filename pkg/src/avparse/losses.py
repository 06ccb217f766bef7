"""Training objectives: elementwise binary cross entropy, the video-level
loss, category/segment richness alignment, and the weighted total loss with
exact gradients with respect to every prediction input.

Reduction convention: mean over the elements of each term, then sum of terms,
so the richness weight keeps its meaning across segment and category counts.
Gradients are closed-form; finite differences appear only in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import LabelSet, PseudoLabelMatrix, derive_video_label

DEFAULT_LAMBDA = 0.5
DEFAULT_CLAMP_EPS = 1e-7


@dataclass(frozen=True)
class LossConfig:
    lam: float = DEFAULT_LAMBDA
    clamp_eps: float = DEFAULT_CLAMP_EPS

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda weight must be >= 0, got {self.lam}")
        if not 0.0 < self.clamp_eps < 1e-3:
            raise ValueError(f"clamp_eps must lie in (0, 1e-3), got {self.clamp_eps}")


@dataclass(frozen=True)
class RichnessVectors:
    """Per-segment category richness (length T) and per-category segment
    richness (length C) of one T x C matrix."""

    cr: np.ndarray
    sr: np.ndarray

    def __post_init__(self):
        cr = np.asarray(self.cr, dtype=np.float64)
        sr = np.asarray(self.sr, dtype=np.float64)
        for name, v in (("cr", cr), ("sr", sr)):
            if v.ndim != 1:
                raise ValueError(f"{name} must be a vector")
            if (v < 0).any() or (v > 1).any():
                raise ValueError(f"{name} entries must lie in [0, 1]")
        object.__setattr__(self, "cr", cr)
        object.__setattr__(self, "sr", sr)


def _check_unit_interval(name: str, arr: np.ndarray):
    if (arr < 0).any() or (arr > 1).any():
        raise ValueError(f"{name} must lie in [0, 1]")


def bce(p: float, y: float, clamp_eps: float = DEFAULT_CLAMP_EPS) -> float:
    """Binary cross entropy of one probability against one (possibly soft)
    target, with the log arguments clamped at clamp_eps."""
    return float(bce_matrix(np.float64(p), np.float64(y), clamp_eps))


def bce_matrix(p, y, clamp_eps: float = DEFAULT_CLAMP_EPS) -> np.ndarray:
    """Elementwise binary cross entropy, no reduction."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_unit_interval("predictions", p)
    _check_unit_interval("targets", y)
    return -(y * np.log(np.maximum(p, clamp_eps)) + (1.0 - y) * np.log(np.maximum(1.0 - p, clamp_eps)))


def bce_mean(p, y, clamp_eps: float = DEFAULT_CLAMP_EPS) -> float:
    return float(bce_matrix(p, y, clamp_eps).mean())


def bce_grad(p, y, clamp_eps: float = DEFAULT_CLAMP_EPS) -> np.ndarray:
    """d bce / d p, elementwise.  Zero inside clamped regions, where the loss
    is locally constant in p."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grad = np.zeros(np.broadcast(p, y).shape)
    live_lo = p > clamp_eps
    live_hi = (1.0 - p) > clamp_eps
    grad += np.where(live_lo, -y / np.maximum(p, clamp_eps), 0.0)
    grad += np.where(live_hi, (1.0 - y) / np.maximum(1.0 - p, clamp_eps), 0.0)
    return grad


def category_richness(M, labels: LabelSet) -> np.ndarray:
    """Per-segment ratio of fired categories to the video's category count."""
    M = np.asarray(M, dtype=np.float64)
    denom = float(labels.video_label.sum())
    if denom < 1:
        raise ValueError("video label has no positive category; richness is undefined")
    return M.sum(axis=1) / denom


def segment_richness(M) -> np.ndarray:
    """Per-category fraction of segments in which the category fires."""
    M = np.asarray(M, dtype=np.float64)
    return M.mean(axis=0)


def richness_vectors(M, labels: LabelSet) -> RichnessVectors:
    return RichnessVectors(category_richness(M, labels), segment_richness(M))


def loss_video(p_union, p_a, p_v, y_union, y_a_smooth, y_v_plg,
               cfg: LossConfig = LossConfig()) -> float:
    """Video-level loss: mean BCE of the union prediction against the weak
    label, of the audio prediction against the smoothed label, and of the
    visual prediction against the pseudo-label-derived video vector."""
    vecs = [np.asarray(v, dtype=np.float64) for v in (p_union, p_a, p_v, y_union, y_a_smooth, y_v_plg)]
    C = vecs[0].shape[0]
    for v in vecs:
        if v.shape != (C,):
            raise ValueError(f"all vectors must have length {C}, got shape {v.shape}")
    return (
        bce_mean(vecs[0], vecs[3], cfg.clamp_eps)
        + bce_mean(vecs[1], vecs[4], cfg.clamp_eps)
        + bce_mean(vecs[2], vecs[5], cfg.clamp_eps)
    )


def _clip01(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


def loss_richness(P_v, pseudo: PseudoLabelMatrix, labels: LabelSet,
                  cfg: LossConfig = LossConfig()) -> float:
    """Align the richness statistics of the visual prediction with those of
    the pseudo label.

    Prediction-side richness is clipped to [0, 1] before the BCE: a
    probability matrix can fire more categories in a segment than the video
    label contains, pushing its category richness above 1.
    """
    P_v = np.asarray(P_v, dtype=np.float64)
    if P_v.shape != pseudo.values.shape:
        raise ValueError(f"prediction shape {P_v.shape} != pseudo label shape {pseudo.values.shape}")
    target = richness_vectors(pseudo.values, labels)
    pcr = _clip01(category_richness(P_v, labels))
    psr = _clip01(segment_richness(P_v))
    return bce_mean(pcr, target.cr, cfg.clamp_eps) + bce_mean(psr, target.sr, cfg.clamp_eps)


@dataclass(frozen=True)
class TotalLoss:
    """Scalar total loss, its two components, and exact partial derivatives
    with respect to every prediction input."""

    value: float
    video: float
    richness: float
    d_p_union: np.ndarray
    d_p_a: np.ndarray
    d_p_v: np.ndarray
    d_P_v: np.ndarray


def loss_total(p_union, p_a, p_v, P_v, *, pseudo: PseudoLabelMatrix,
               labels: LabelSet, y_a_smooth, cfg: LossConfig = LossConfig()) -> TotalLoss:
    """Total objective: video-level loss plus lambda times the richness loss,
    with gradients for the three video-level vectors and the visual segment
    matrix (the only prediction inputs the objective reads)."""
    p_union = np.asarray(p_union, dtype=np.float64)
    p_a = np.asarray(p_a, dtype=np.float64)
    p_v = np.asarray(p_v, dtype=np.float64)
    P_v = np.asarray(P_v, dtype=np.float64)
    y_union = labels.video_label.astype(np.float64)
    y_v_plg = derive_video_label(pseudo).astype(np.float64)
    y_a_smooth = np.asarray(y_a_smooth, dtype=np.float64)

    C = labels.C
    T = pseudo.T
    lv = loss_video(p_union, p_a, p_v, y_union, y_a_smooth, y_v_plg, cfg)
    ls = loss_richness(P_v, pseudo, labels, cfg)
    eps = cfg.clamp_eps

    d_p_union = bce_grad(p_union, y_union, eps) / C
    d_p_a = bce_grad(p_a, y_a_smooth, eps) / C
    d_p_v = bce_grad(p_v, y_v_plg, eps) / C

    target = richness_vectors(pseudo.values, labels)
    denom = float(y_union.sum())
    pcr_raw = category_richness(P_v, labels)
    psr_raw = segment_richness(P_v)
    # richness never goes negative, so the clip only binds from above
    d_pcr = bce_grad(_clip01(pcr_raw), target.cr, eps) * (pcr_raw < 1.0)
    d_psr = bce_grad(_clip01(psr_raw), target.sr, eps) * (psr_raw < 1.0)
    d_P_v = cfg.lam * ((d_pcr / (T * denom))[:, None] + (d_psr / (C * T))[None, :])

    return TotalLoss(
        value=lv + cfg.lam * ls,
        video=lv,
        richness=ls,
        d_p_union=d_p_union,
        d_p_a=d_p_a,
        d_p_v=d_p_v,
        d_P_v=d_P_v,
    )
