import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avparse.labels import (
    LabelSet,
    PseudoLabelMatrix,
    SimilarityMatrix,
    Stage,
    derive_video_label,
    validate,
)


class TestDeriveVideoLabel:
    def test_basic(self):
        out = derive_video_label(np.array([[1, 0], [1, 0], [1, 1]]))
        assert out.tolist() == [1, 1]

    def test_all_zero(self):
        assert derive_video_label(np.zeros((5, 3), dtype=int)).tolist() == [0, 0, 0]

    def test_multi_event_example(self, fig_multi_event):
        _, pseudo = fig_multi_event
        assert derive_video_label(pseudo).tolist() == [1, 1, 1]

    def test_idempotent_under_row_duplication(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            T, C = rng.integers(1, 8), rng.integers(1, 6)
            m = (rng.random((T, C)) < 0.4).astype(np.int8)
            t = int(rng.integers(T))
            dup = np.vstack([m, m[t : t + 1]])
            assert derive_video_label(dup).tolist() == derive_video_label(m).tolist()

    @given(st.integers(0, 6), st.integers(0, 4), st.data())
    @settings(max_examples=60, deadline=None)
    def test_monotone(self, t_extra, c_extra, data):
        T, C = t_extra + 1, c_extra + 1
        flat = data.draw(st.lists(st.booleans(), min_size=T * C, max_size=T * C))
        m = np.array(flat, dtype=np.int8).reshape(T, C)
        before = derive_video_label(m)
        zeros = np.argwhere(m == 0)
        if len(zeros) == 0:
            return
        t, c = zeros[data.draw(st.integers(0, len(zeros) - 1))]
        m2 = m.copy()
        m2[t, c] = 1
        after = derive_video_label(m2)
        assert (after >= before).all()


class TestConstructors:
    def test_label_set_validation(self):
        with pytest.raises(ValueError, match="0 or 1"):
            LabelSet([0, 2], ["a", "b"], T=3)
        with pytest.raises(ValueError, match="unique"):
            LabelSet([0, 1], ["a", "a"], T=3)
        with pytest.raises(ValueError, match="non-empty"):
            LabelSet([0, 1], ["a", ""], T=3)
        with pytest.raises(ValueError, match="T must be"):
            LabelSet([0, 1], ["a", "b"], T=0)
        with pytest.raises(ValueError, match="categories"):
            LabelSet([0, 1, 1], ["a", "b"], T=3)

    def test_label_set_immutable(self):
        ls = LabelSet([1, 0], ["a", "b"], T=2)
        with pytest.raises(ValueError):
            ls.video_label[0] = 0

    def test_pseudo_rejects_non_binary(self):
        with pytest.raises(ValueError, match="0 or 1"):
            PseudoLabelMatrix([[0, 2]], Stage.PLG)

    def test_similarity_row_sum_checked(self):
        with pytest.raises(ValueError, match="row 1 sums"):
            SimilarityMatrix([[0.5, 0.5], [0.6, 0.5]])
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            SimilarityMatrix([[1.2, -0.2]])
        sm = SimilarityMatrix([[0.25, 0.75], [0.5, 0.5]])
        assert sm.T == 2 and sm.C == 2


class TestValidate:
    def test_valid_pair_ok(self, fig_multi_event):
        labels, pseudo = fig_multi_event
        assert validate(labels, pseudo) == []

    def test_domain_violation_located(self):
        labels = LabelSet([1, 1], ["a", "b"], T=2)
        raw = np.array([[2, 0], [0, 0]])
        violations = validate(labels, raw)
        assert any(v.code == "domain" and (v.row, v.col) == (0, 0) for v in violations)

    def test_column_consistency_violation(self):
        labels = LabelSet([1, 0], ["a", "b"], T=2)
        raw = np.array([[0, 1], [0, 0]])
        violations = validate(labels, raw)
        assert any(v.code == "column-consistency" and v.col == 1 for v in violations)

    def test_dimension_mismatch_is_reported_not_raised(self):
        labels = LabelSet([1, 0, 1], ["a", "b", "c"], T=2)
        violations = validate(labels, np.zeros((2, 2), dtype=int))
        assert any(v.code == "dim-mismatch" for v in violations)
