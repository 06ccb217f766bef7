"""Compact parsing network: per-modality self- plus cross-attention encoding,
shared sigmoid classifier over segments, and attentive pooling to video-level
probabilities, with a deterministic Adam trainer.

The heavy math lives in the selected kernel backend; this module owns
parameter initialization, the checkpoint format, and the training loop.
No positional encoding is used, so the encoder is permutation-equivariant
over segments.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from . import backend
from .backend.layout import NetDims, block_specs, total_params, views
from .labels import LabelSet, PseudoLabelMatrix, derive_video_label
from .losses import DEFAULT_CLAMP_EPS, DEFAULT_LAMBDA, category_richness, segment_richness
from .metrics import BinaryParse
from .plg import DEFAULT_EPSILON, smooth_video_labels

CHECKPOINT_KIND = "avparse-model"
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class FeatureBundle:
    """Per-segment raw feature matrices for both modalities."""

    audio: np.ndarray
    visual: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.audio, dtype=np.float64))
        v = np.ascontiguousarray(np.asarray(self.visual, dtype=np.float64))
        if a.ndim != 2 or v.ndim != 2:
            raise ValueError("feature matrices must be 2-D")
        if a.shape[0] != v.shape[0]:
            raise ValueError(f"audio has {a.shape[0]} segments but visual has {v.shape[0]}")
        if not (np.isfinite(a).all() and np.isfinite(v).all()):
            raise ValueError("features must be finite")
        object.__setattr__(self, "audio", a)
        object.__setattr__(self, "visual", v)

    @property
    def T(self) -> int:
        return self.audio.shape[0]


@dataclass
class ModelParams:
    """All network parameters in one flat float64 vector."""

    dims: NetDims
    theta: np.ndarray
    categories: list[str] | None = None

    def __post_init__(self):
        self.theta = np.ascontiguousarray(np.asarray(self.theta, dtype=np.float64))
        n = total_params(self.dims)
        if self.theta.shape != (n,):
            raise ValueError(f"expected {n} parameters for {self.dims}, got shape {self.theta.shape}")
        if not np.isfinite(self.theta).all():
            raise ValueError("parameters must be finite")

    @classmethod
    def init(cls, dims: NetDims, seed: int, categories=None) -> "ModelParams":
        """Seeded Gaussian init, scaled by 1/sqrt(fan_in); biases start at zero."""
        rng = np.random.default_rng(seed)
        theta = np.zeros(total_params(dims))
        v = views(theta, dims)
        for name, shape in block_specs(dims):
            if len(shape) == 2:
                v[name][:] = rng.standard_normal(shape) / np.sqrt(shape[0])
            elif name == "matt_w":
                v[name][:] = rng.standard_normal(shape) / np.sqrt(shape[0])
        return cls(dims, theta, categories=list(categories) if categories else None)

    def block(self, name: str) -> np.ndarray:
        return views(self.theta, self.dims)[name]

    def save(self, path):
        """Versioned textual checkpoint: a shape header plus row-major
        float64 blocks, base64 over little-endian bytes."""
        blocks = {}
        for name, shape in block_specs(self.dims):
            arr = np.ascontiguousarray(self.block(name), dtype="<f8")
            blocks[name] = {
                "shape": list(shape),
                "data": base64.b64encode(arr.tobytes()).decode("ascii"),
            }
        doc = {
            "schema_version": 1,
            "kind": CHECKPOINT_KIND,
            "dims": self.dims.to_dict(),
            "categories": self.categories,
            "blocks": blocks,
        }
        from .io import atomic_write_text

        atomic_write_text(path, json.dumps(doc, indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ModelParams":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("kind") != CHECKPOINT_KIND:
            raise ValueError(f"{path} is not a model checkpoint")
        if doc.get("schema_version") != 1:
            raise ValueError(f"unsupported checkpoint schema_version {doc.get('schema_version')!r}")
        dims = NetDims(**doc["dims"])
        theta = np.zeros(total_params(dims))
        v = views(theta, dims)
        for name, shape in block_specs(dims):
            blk = doc["blocks"][name]
            if list(blk["shape"]) != list(shape):
                raise ValueError(f"checkpoint block {name} has shape {blk['shape']}, expected {list(shape)}")
            raw = np.frombuffer(base64.b64decode(blk["data"]), dtype="<f8")
            v[name][:] = raw.reshape(shape)
        return cls(dims, theta, categories=doc.get("categories"))


@dataclass(frozen=True)
class PredictionSet:
    """Segment- and video-level event probabilities for one video."""

    P_a: np.ndarray
    P_v: np.ndarray
    P_av: np.ndarray
    p_a: np.ndarray
    p_v: np.ndarray
    p_union: np.ndarray

    def __post_init__(self):
        for name in ("P_a", "P_v", "P_av", "p_a", "p_v", "p_union"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if (arr < 0).any() or (arr > 1).any():
                raise ValueError(f"{name} must lie in [0, 1]")
            object.__setattr__(self, name, arr)
        if not np.array_equal(self.P_av, self.P_a * self.P_v):
            raise ValueError("P_av must equal the elementwise product of P_a and P_v")

    @property
    def T(self) -> int:
        return self.P_a.shape[0]

    @property
    def C(self) -> int:
        return self.P_a.shape[1]


def forward(features: FeatureBundle, params: ModelParams) -> PredictionSet:
    """Deterministic forward pass through the selected backend."""
    dims = params.dims
    if features.audio.shape[1] != dims.d_audio_in:
        raise ValueError(
            f"audio features have dim {features.audio.shape[1]}, model expects {dims.d_audio_in}"
        )
    if features.visual.shape[1] != dims.d_visual_in:
        raise ValueError(
            f"visual features have dim {features.visual.shape[1]}, model expects {dims.d_visual_in}"
        )
    Pa, Pv, Pav, pa, pv, pu = backend.forward(params.theta, dims, features.audio, features.visual)
    return PredictionSet(Pa, Pv, Pav, pa, pv, pu)


def mmil_pool(probs_a, probs_v, tatt_logits_a, tatt_logits_v, modality_w):
    """Attentive pooling of segment probabilities to video level.

    Temporal attention softmaxes the logits over segments per category and
    takes the weighted sum of segment probabilities; modality attention maps
    each pooled vector to a scalar logit and combines the two modalities
    convexly.
    """
    probs_a = np.asarray(probs_a, dtype=np.float64)
    probs_v = np.asarray(probs_v, dtype=np.float64)
    from .backend.pure import _softmax_cols

    Aa = _softmax_cols(np.asarray(tatt_logits_a, dtype=np.float64))
    Av = _softmax_cols(np.asarray(tatt_logits_v, dtype=np.float64))
    if Aa.shape != probs_a.shape or Av.shape != probs_v.shape:
        raise ValueError("attention logits must match the probability matrices in shape")
    p_a = (Aa * probs_a).sum(axis=0)
    p_v = (Av * probs_v).sum(axis=0)
    w = np.asarray(modality_w, dtype=np.float64)
    ga, gv = float(p_a @ w), float(p_v @ w)
    m = max(ga, gv)
    ea, ev = np.exp(ga - m), np.exp(gv - m)
    ua = ea / (ea + ev)
    p_union = ua * p_a + (1.0 - ua) * p_v
    return p_a, p_v, p_union


def binarize(preds: PredictionSet, threshold: float = DEFAULT_THRESHOLD) -> BinaryParse:
    """Hard decisions at a probability threshold; ties count as positive.
    The audio-visual matrix is thresholded on the joint probability."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return BinaryParse(
        audio=(preds.P_a >= threshold).astype(np.int8),
        visual=(preds.P_v >= threshold).astype(np.int8),
        audio_visual=(preds.P_av >= threshold).astype(np.int8),
    )


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and objective knobs.  The stock values suit full-scale runs;
    tests and the synthetic pipeline override epochs, batch size, and rate."""

    epochs: int = 30
    batch_size: int = 32
    lr: float = 3e-4
    lam: float = DEFAULT_LAMBDA
    label_smoothing: float = DEFAULT_EPSILON
    clamp_eps: float = DEFAULT_CLAMP_EPS
    d_model: int = 64
    n_heads: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")


@dataclass(frozen=True)
class TrainExample:
    features: FeatureBundle
    labels: LabelSet
    pseudo: PseudoLabelMatrix


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, step: int, value: float):
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step


def _targets_for(example: TrainExample, smoothing: float):
    labels = example.labels
    if labels.video_label.sum() == 0:
        raise ValueError("video label has no positive category; exclude such videos before training")
    if example.pseudo.values.shape != (labels.T, labels.C):
        raise ValueError("pseudo label shape does not match the label set")
    _, y_a_smooth = smooth_video_labels(labels, smoothing)
    y_union = labels.video_label.astype(np.float64)
    y_v = derive_video_label(example.pseudo).astype(np.float64)
    cr = category_richness(example.pseudo.values, labels)
    sr = segment_richness(example.pseudo.values)
    return (y_union, y_a_smooth, y_v, cr, sr, float(y_union.sum()))


def train(dataset: list[TrainExample], cfg: TrainConfig) -> tuple[ModelParams, list[float]]:
    """Minimize the total objective with Adam.

    Fully deterministic for a given config: parameter init, batch order, and
    gradient summation order are all derived from cfg.seed.  Returns the
    trained parameters and the mean loss per epoch, logged as observed.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    da = dataset[0].features.audio.shape[1]
    dv = dataset[0].features.visual.shape[1]
    C = dataset[0].labels.C
    cats = dataset[0].labels.categories
    for i, ex in enumerate(dataset):
        if ex.features.audio.shape[1] != da or ex.features.visual.shape[1] != dv:
            raise ValueError(f"video {i} has inconsistent feature dims")
        if ex.labels.categories != cats:
            raise ValueError(f"video {i} has a different category vocabulary")
    dims = NetDims(da, dv, cfg.d_model, cfg.n_heads, C)
    params = ModelParams.init(dims, cfg.seed, categories=cats)
    targets = [_targets_for(ex, cfg.label_smoothing) for ex in dataset]

    # shuffle stream kept distinct from the init stream
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    theta = params.theta
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    step = 0
    epoch_log: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        epoch_losses = np.zeros(len(dataset))
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            grad = np.zeros_like(theta)
            for idx in batch:
                ex = dataset[idx]
                loss, g = backend.loss_grad(
                    theta, dims, ex.features.audio, ex.features.visual,
                    targets[idx], cfg.lam, cfg.clamp_eps,
                )
                if not np.isfinite(loss):
                    raise TrainingDiverged(epoch, step, loss)
                epoch_losses[idx] = loss
                grad += g
            grad /= len(batch)
            step += 1
            m = beta1 * m + (1.0 - beta1) * grad
            v = beta2 * v + (1.0 - beta2) * grad * grad
            m_hat = m / (1.0 - beta1**step)
            v_hat = v / (1.0 - beta2**step)
            theta = theta - cfg.lr * m_hat / (np.sqrt(v_hat) + adam_eps)
            if not np.isfinite(theta).all():
                raise TrainingDiverged(epoch, step, float("nan"))
        epoch_log.append(float(epoch_losses.mean()))
    return ModelParams(dims, theta, categories=cats), epoch_log


def loss_from_params(params: ModelParams, features: FeatureBundle,
                     example_targets, lam: float, clamp_eps: float = DEFAULT_CLAMP_EPS) -> float:
    """Scalar objective as a function of the flat parameter vector; the probe
    the gradient checks differentiate numerically."""
    return backend.loss_value(
        params.theta, params.dims, features.audio, features.visual,
        example_targets, lam, clamp_eps,
    )
