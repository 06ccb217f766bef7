"""Synthetic scenario generator with known segment-level ground truth.

Every quantity the real pipeline consumes (weak labels, features,
similarities) is derived from seeded draws plus a known T x C event layout
per modality, so directional claims about label quality and training can be
checked against exact ground truth at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .labels import LabelSet, PseudoLabelMatrix, SimilarityMatrix, derive_video_label
from .metrics import Counts
from .network import FeatureBundle
from .plg import PlgConfig, generate_pseudo_labels

CATEGORY_POOL = [
    "speech", "dog", "cat", "guitar", "piano", "violin", "car", "motorcycle",
    "train", "airplane", "vacuum_cleaner", "rooster", "chainsaw", "helicopter",
    "drums", "singing", "basketball", "frying_food", "lawn_mower", "cello",
    "clapping", "baby_cry", "fireworks", "banjo", "accordion",
]


def default_categories(C: int) -> list[str]:
    if C <= len(CATEGORY_POOL):
        return CATEGORY_POOL[:C]
    return CATEGORY_POOL + [f"event_{i:03d}" for i in range(len(CATEGORY_POOL), C)]


@dataclass(frozen=True)
class ScenarioConfig:
    n_videos: int = 50
    T: int = 10
    C: int = 8
    max_events_per_modality: int = 2
    min_event_len: int = 2
    max_event_len: int = 6
    signal: float = 4.0
    noise_sigma: float = 2.0
    feature_dim: int = 16
    feature_signal: float | None = None
    context_leak: float = 0.5
    occlusion_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_videos < 1 or self.T < 1 or self.C < 2 or self.feature_dim < 1:
            raise ValueError("n_videos, T, feature_dim must be >= 1 and C >= 2")
        if self.max_events_per_modality < 0:
            raise ValueError("max_events_per_modality must be >= 0")
        if not 1 <= self.min_event_len <= self.max_event_len:
            raise ValueError("need 1 <= min_event_len <= max_event_len")
        if self.max_event_len > self.T:
            raise ValueError(
                f"max_event_len={self.max_event_len} does not fit into T={self.T} segments"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.occlusion_rate < 1.0:
            raise ValueError("occlusion_rate must lie in [0, 1)")


@dataclass(frozen=True)
class SyntheticVideo:
    video_id: str
    gt_audio: np.ndarray
    gt_visual: np.ndarray
    labels: LabelSet
    features: FeatureBundle
    similarities: SimilarityMatrix


@dataclass(frozen=True)
class Scenario:
    cfg: ScenarioConfig
    categories: list[str]
    videos: list[SyntheticVideo] = field(default_factory=list)


def _draw_gt(rng: np.random.Generator, cfg: ScenarioConfig) -> np.ndarray:
    gt = np.zeros((cfg.T, cfg.C), dtype=np.int8)
    n_events = int(rng.integers(0, cfg.max_events_per_modality + 1))
    for _ in range(n_events):
        c = int(rng.integers(cfg.C))
        length = int(rng.integers(cfg.min_event_len, cfg.max_event_len + 1))
        start = int(rng.integers(0, cfg.T - length + 1))
        gt[start : start + length, c] = 1
    return gt


def synth_similarities(gt_visual, cfg: ScenarioConfig,
                       rng: np.random.Generator | None = None) -> SimilarityMatrix:
    """Noisy stand-in for a vision-language model: softmax of the ground-truth
    indicator scaled by the signal strength plus Gaussian logit noise.

    A nonzero occlusion rate suppresses the signal of whole segments, the way
    a blurry or badly lit frame defeats image-text scoring while the regular
    feature extractors still see the event.  Occluded segments produce the
    structured misses that label denoising is meant to repair.
    """
    gt = np.asarray(gt_visual, dtype=np.float64)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    visible = np.ones((gt.shape[0], 1))
    if cfg.occlusion_rate > 0.0:
        visible = (rng.random(gt.shape[0]) >= cfg.occlusion_rate).astype(np.float64)[:, None]
    logits = cfg.signal * gt * visible + rng.normal(0.0, cfg.noise_sigma, size=gt.shape)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return SimilarityMatrix(e / e.sum(axis=1, keepdims=True))


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    """Seeded dataset of videos with ground truth for both modalities.

    The weak label is the union of the two modality ground truths.  Videos
    that would come out empty are redrawn (unless events are disabled
    outright), since downstream training excludes zero-label videos anyway.
    Features are category-prototype sums plus unit noise, so both modalities
    are linearly decodable to a degree set by the signal strength.
    """
    categories = default_categories(cfg.C)
    root = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    proto_a = root.standard_normal((cfg.C, cfg.feature_dim)) / np.sqrt(cfg.feature_dim)
    proto_v = root.standard_normal((cfg.C, cfg.feature_dim)) / np.sqrt(cfg.feature_dim)
    videos = []
    for i in range(cfg.n_videos):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, i]))
        while True:
            gt_a = _draw_gt(rng, cfg)
            gt_v = _draw_gt(rng, cfg)
            union = derive_video_label(gt_a) | derive_video_label(gt_v)
            if union.any() or cfg.max_events_per_modality == 0:
                break
        labels = LabelSet(union, categories, cfg.T)
        # each segment also carries a faint imprint of every event the video
        # contains anywhere (scene context), so that event-absent segments of
        # a present category stay genuinely ambiguous
        fsig = cfg.signal if cfg.feature_signal is None else cfg.feature_signal
        leak_a = derive_video_label(gt_a).astype(np.float64) @ proto_a
        leak_v = derive_video_label(gt_v).astype(np.float64) @ proto_v
        audio = fsig * (gt_a.astype(np.float64) @ proto_a + cfg.context_leak * leak_a[None, :])
        audio += rng.standard_normal(audio.shape)
        visual = fsig * (gt_v.astype(np.float64) @ proto_v + cfg.context_leak * leak_v[None, :])
        visual += rng.standard_normal(visual.shape)
        sims = synth_similarities(gt_v, cfg, rng)
        videos.append(
            SyntheticVideo(
                video_id=f"video_{i:04d}",
                gt_audio=gt_a,
                gt_visual=gt_v,
                labels=labels,
                features=FeatureBundle(audio, visual),
                similarities=sims,
            )
        )
    return Scenario(cfg=cfg, categories=categories, videos=videos)


@dataclass(frozen=True)
class LabelQuality:
    segment: dict
    video: dict

    @staticmethod
    def _prf(pred: np.ndarray, gt: np.ndarray) -> dict:
        pred = pred != 0
        gt = gt != 0
        tp = int((pred & gt).sum())
        fp = int((pred & ~gt).sum())
        fn = int((~pred & gt).sum())
        precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
        recall = 1.0 if tp + fn == 0 else tp / (tp + fn)
        f = Counts(tp, fp, fn).f_score
        return {"precision": precision, "recall": recall, "f": f,
                "tp": tp, "fp": fp, "fn": fn}


def evaluate_pseudo_labels(pseudo: PseudoLabelMatrix | np.ndarray, gt_visual) -> LabelQuality:
    """Precision/recall/F of pseudo labels against visual ground truth, over
    segment cells and over the derived video-level vectors."""
    values = pseudo.values if isinstance(pseudo, PseudoLabelMatrix) else np.asarray(pseudo)
    gt = np.asarray(gt_visual)
    if values.shape != gt.shape:
        raise ValueError(f"pseudo shape {values.shape} != ground truth shape {gt.shape}")
    return LabelQuality(
        segment=LabelQuality._prf(values, gt),
        video=LabelQuality._prf(derive_video_label(values), derive_video_label(gt)),
    )


def overall_segment_f(pseudo_list, gt_list) -> float:
    """Micro segment-level F of many pseudo-label matrices against ground truth."""
    total = Counts()
    for pseudo, gt in zip(pseudo_list, gt_list):
        values = pseudo.values if isinstance(pseudo, PseudoLabelMatrix) else np.asarray(pseudo)
        q = LabelQuality._prf(values, np.asarray(gt))
        total = total + Counts(q["tp"], q["fp"], q["fn"])
    return total.f_score


def calibrate_tau(videos: list[SyntheticVideo], fraction: float = 0.2,
                  max_candidates: int = 400) -> float:
    """Pick the threshold maximizing segment-level pseudo-label F on the first
    `fraction` of videos, which act as the held-out calibration split.

    The similarity scale depends on C through the softmax, so a fixed
    threshold does not transfer across scenario shapes.  Candidate thresholds
    are the observed similarity values themselves (ties count as positive, so
    these are exactly the distinct labelings), subsampled if very numerous.
    """
    n_cal = max(1, int(round(fraction * len(videos))))
    cal = videos[:n_cal]
    values = np.unique(np.concatenate([v.similarities.values.ravel() for v in cal]))
    values = values[(values > 0.0) & (values < 1.0)]
    if values.size > max_candidates:
        values = values[:: values.size // max_candidates + 1]
    scores = np.empty(values.size)
    for i, tau in enumerate(values):
        cfg = PlgConfig(tau=float(tau), prompt_id="synthetic")
        pseudo = [generate_pseudo_labels(v.similarities, v.labels, cfg) for v in cal]
        scores[i] = overall_segment_f(pseudo, [v.gt_visual for v in cal])
    # the optimum is usually a plateau; its middle resists threshold drift on
    # unseen videos (lower middle, so a two-point tie keeps the recall side)
    ties = np.flatnonzero(scores == scores.max())
    return float(values[ties[(ties.size - 1) // 2]])
