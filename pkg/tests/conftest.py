import numpy as np
import pytest

from avparse.labels import LabelSet, PseudoLabelMatrix, Stage


@pytest.fixture
def fig_multi_event():
    """Four-segment video with three visual events: one category in every
    segment, one in the first two, one in the first only."""
    labels = LabelSet([1, 1, 1], ["dog", "rooster", "speech"], T=4)
    pseudo = PseudoLabelMatrix(
        [[1, 1, 1],
         [1, 1, 0],
         [1, 0, 0],
         [1, 0, 0]],
        Stage.PLG,
    )
    return labels, pseudo


@pytest.fixture
def fig_two_event():
    """Five-segment video: one category in segments 0-3, the other only in
    segment 3."""
    labels = LabelSet([1, 1], ["speech", "vacuum_cleaner"], T=5)
    pseudo = PseudoLabelMatrix(
        [[0, 1],
         [0, 1],
         [0, 1],
         [1, 1],
         [0, 0]],
        Stage.PLG,
    )
    return labels, pseudo


def max_rel_err(a, b, floor=1e-6):
    """Worst relative discrepancy, with an absolute floor so that finite
    difference noise on near-zero entries does not register."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def random_binary_pseudo(rng, T, C, video_label):
    """Random pseudo-label matrix respecting the column-consistency invariant."""
    values = (rng.random((T, C)) < 0.5).astype(np.int8) * np.asarray(video_label, dtype=np.int8)
    return values
