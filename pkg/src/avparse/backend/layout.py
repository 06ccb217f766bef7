"""Flat parameter layout shared by the numpy and compiled kernels.

All parameters of the parsing network live in one contiguous float64 vector;
the blocks below define its one true ordering.  Attention blocks appear in
the order audio-self, audio-cross, visual-self, visual-cross.  The temporal
and modality attention maps carry no bias: a bias shifts every logit of a
softmax group equally and can never affect the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ATTENTION_BLOCKS = ("att_aa", "att_av", "att_vv", "att_va")


@dataclass(frozen=True)
class NetDims:
    d_audio_in: int
    d_visual_in: int
    d_model: int
    n_heads: int
    n_classes: int

    def __post_init__(self):
        for name in ("d_audio_in", "d_visual_in", "d_model", "n_heads", "n_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"n_heads={self.n_heads} must divide d_model={self.d_model}"
            )

    def to_dict(self) -> dict:
        return {
            "d_audio_in": self.d_audio_in,
            "d_visual_in": self.d_visual_in,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_classes": self.n_classes,
        }


def block_specs(dims: NetDims) -> list[tuple[str, tuple[int, ...]]]:
    d, C = dims.d_model, dims.n_classes
    specs = [
        ("proj_a_w", (dims.d_audio_in, d)),
        ("proj_a_b", (d,)),
        ("proj_v_w", (dims.d_visual_in, d)),
        ("proj_v_b", (d,)),
    ]
    for blk in ATTENTION_BLOCKS:
        for part in ("q", "k", "v", "o"):
            specs.append((f"{blk}_w{part}", (d, d)))
            specs.append((f"{blk}_b{part}", (d,)))
    specs += [
        ("cls_w", (d, C)),
        ("cls_b", (C,)),
        ("tatt_w", (d, C)),
        ("matt_w", (C,)),
    ]
    return specs


def offsets(dims: NetDims) -> dict[str, tuple[int, tuple[int, ...]]]:
    out = {}
    pos = 0
    for name, shape in block_specs(dims):
        out[name] = (pos, shape)
        pos += int(np.prod(shape))
    return out


def total_params(dims: NetDims) -> int:
    return sum(int(np.prod(shape)) for _, shape in block_specs(dims))


def views(theta: np.ndarray, dims: NetDims) -> dict[str, np.ndarray]:
    """Name-indexed reshaped views into the flat vector (no copies)."""
    out = {}
    for name, (pos, shape) in offsets(dims).items():
        out[name] = theta[pos : pos + int(np.prod(shape))].reshape(shape)
    return out
