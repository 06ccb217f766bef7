"""Segment- and event-level F-scores for audio, visual, and audio-visual
event parsing.

Segment scores micro-average TP/FP/FN over every (segment, category) cell of
every video.  Event scores treat maximal consecutive runs per category as
events and match them greedily in descending IoU order at a fixed IoU
threshold.  Type@AV is the unweighted mean of the A/V/AV F-scores; Event@AV
pools the audio and visual counts before computing one F-score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_MIOU = 0.5

EVENT_TYPES = ("A", "V", "AV")
REPORT_KEYS = ("A", "V", "AV", "Type@AV", "Event@AV")


@dataclass(frozen=True)
class EventSpan:
    """One event: a category and an inclusive segment range."""

    category: int
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid span ({self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def span_iou(a: EventSpan, b: EventSpan) -> float:
    inter = min(a.end, b.end) - max(a.start, b.start) + 1
    if inter <= 0:
        return 0.0
    union = a.length + b.length - inter
    return inter / union


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def f_score(self) -> float:
        if self.tp == 0 and self.fp == 0 and self.fn == 0:
            return 1.0
        return 2.0 * self.tp / (2.0 * self.tp + self.fp + self.fn)

    @property
    def zero_support(self) -> bool:
        return self.tp == 0 and self.fp == 0 and self.fn == 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class BinaryParse:
    """Binary T x C decisions for the three event types of one video.

    The audio-visual matrix defaults to the intersection of the audio and
    visual ones, which is exact for ground truth; predictions pass their own
    matrix binarized from the joint probability.
    """

    audio: np.ndarray
    visual: np.ndarray
    audio_visual: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        a = np.asarray(self.audio, dtype=np.int8)
        v = np.asarray(self.visual, dtype=np.int8)
        av = self.audio_visual
        av = a & v if av is None else np.asarray(av, dtype=np.int8)
        if a.shape != v.shape or a.shape != av.shape:
            raise ValueError("audio, visual, and audio-visual matrices must share one shape")
        object.__setattr__(self, "audio", a)
        object.__setattr__(self, "visual", v)
        object.__setattr__(self, "audio_visual", av)

    def by_type(self, event_type: str) -> np.ndarray:
        return {"A": self.audio, "V": self.visual, "AV": self.audio_visual}[event_type]


def extract_events(binary) -> list[EventSpan]:
    """Maximal runs of consecutive 1s per category, ordered by (category, start)."""
    m = np.asarray(binary)
    if m.ndim != 2:
        raise ValueError(f"expected a T x C matrix, got shape {m.shape}")
    T, C = m.shape
    padded = np.zeros((T + 2, C), dtype=np.int8)
    padded[1:-1] = m != 0
    diff = np.diff(padded, axis=0)
    spans = []
    for c in range(C):
        starts = np.flatnonzero(diff[:, c] == 1)
        ends = np.flatnonzero(diff[:, c] == -1) - 1
        spans.extend(EventSpan(c, int(s), int(e)) for s, e in zip(starts, ends))
    return spans


def segment_counts(pred, gt) -> Counts:
    pred = np.asarray(pred) != 0
    gt = np.asarray(gt) != 0
    if pred.shape != gt.shape:
        raise ValueError(f"prediction shape {pred.shape} != ground truth shape {gt.shape}")
    tp = int((pred & gt).sum())
    fp = int((pred & ~gt).sum())
    fn = int((~pred & gt).sum())
    return Counts(tp, fp, fn)


def segment_f1(pred, gt) -> tuple[float, Counts]:
    """Micro F-score over all (segment, category) cells."""
    counts = segment_counts(pred, gt)
    return counts.f_score, counts


def event_counts(pred_events: list[EventSpan], gt_events: list[EventSpan],
                 miou_threshold: float = DEFAULT_MIOU) -> Counts:
    """Greedy one-to-one matching within category, highest IoU first; a pair
    matches iff its IoU reaches the threshold."""
    if not 0.0 < miou_threshold <= 1.0:
        raise ValueError(f"miou_threshold must lie in (0, 1], got {miou_threshold}")
    candidates = []
    for i, p in enumerate(pred_events):
        for j, g in enumerate(gt_events):
            if p.category != g.category:
                continue
            iou = span_iou(p, g)
            if iou >= miou_threshold:
                candidates.append((-iou, p.category, p.start, g.start, i, j))
    candidates.sort()
    used_pred: set[int] = set()
    used_gt: set[int] = set()
    tp = 0
    for _, _, _, _, i, j in candidates:
        if i in used_pred or j in used_gt:
            continue
        used_pred.add(i)
        used_gt.add(j)
        tp += 1
    return Counts(tp, len(pred_events) - tp, len(gt_events) - tp)


def event_f1(pred_events, gt_events, miou_threshold: float = DEFAULT_MIOU) -> tuple[float, Counts]:
    counts = event_counts(pred_events, gt_events, miou_threshold)
    return counts.f_score, counts


@dataclass(frozen=True)
class MetricsReport:
    """All F-scores plus the raw counts they were computed from."""

    segment_f: dict[str, float]
    event_f: dict[str, float]
    segment_counts: dict[str, Counts]
    event_counts: dict[str, Counts]
    n_videos: int

    def to_dict(self) -> dict:
        def counts_block(block):
            return {
                key: {"tp": c.tp, "fp": c.fp, "fn": c.fn, "zero_support": c.zero_support}
                for key, c in block.items()
            }

        return {
            "schema_version": 1,
            "n_videos": self.n_videos,
            "segment_level": dict(self.segment_f),
            "event_level": dict(self.event_f),
            "counts": {
                "segment_level": counts_block(self.segment_counts),
                "event_level": counts_block(self.event_counts),
            },
        }


def report(preds: list[BinaryParse], gts: list[BinaryParse],
           miou_threshold: float = DEFAULT_MIOU) -> MetricsReport:
    """Micro-aggregate per-video counts into the five F-scores at both levels."""
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions but {len(gts)} ground truths")
    seg = {t: Counts() for t in EVENT_TYPES}
    evt = {t: Counts() for t in EVENT_TYPES}
    for p, g in zip(preds, gts):
        for t in EVENT_TYPES:
            seg[t] = seg[t] + segment_counts(p.by_type(t), g.by_type(t))
            evt[t] = evt[t] + event_counts(
                extract_events(p.by_type(t)), extract_events(g.by_type(t)), miou_threshold
            )
    seg["Event@AV"] = seg["A"] + seg["V"]
    evt["Event@AV"] = evt["A"] + evt["V"]

    def scores(block):
        out = {t: block[t].f_score for t in EVENT_TYPES}
        out["Type@AV"] = float(np.mean([out[t] for t in EVENT_TYPES]))
        out["Event@AV"] = block["Event@AV"].f_score
        return out

    return MetricsReport(
        segment_f=scores(seg),
        event_f=scores(evt),
        segment_counts=seg,
        event_counts=evt,
        n_videos=len(preds),
    )
