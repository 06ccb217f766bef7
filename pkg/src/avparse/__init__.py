"""Label engineering toolkit for weakly supervised audio-visual video parsing.

Pipeline stages: generate segment-level visual pseudo labels from similarity
scores, train a compact attention parser with a richness-aware objective,
denoise the labels by flipping large-loss entries per category, and evaluate
with segment- and event-level F-scores.
"""

__version__ = "0.1.0"

from .backend import active_backend  # noqa: F401
