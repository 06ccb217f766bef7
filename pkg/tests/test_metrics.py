import itertools

import numpy as np
import pytest

from avparse.metrics import (
    BinaryParse,
    Counts,
    EventSpan,
    event_counts,
    event_f1,
    extract_events,
    report,
    segment_f1,
    span_iou,
)


def brute_force_event_counts(pred_events, gt_events, threshold):
    """Oracle: exhaustive optimal one-to-one matching, maximizing matches."""
    by_cat_pred = {}
    by_cat_gt = {}
    for e in pred_events:
        by_cat_pred.setdefault(e.category, []).append(e)
    for e in gt_events:
        by_cat_gt.setdefault(e.category, []).append(e)
    total = 0
    for cat, preds in by_cat_pred.items():
        gts = by_cat_gt.get(cat, [])
        if not gts:
            continue
        feasible = [[span_iou(p, g) >= threshold for g in gts] for p in preds]
        best = 0
        swap = len(preds) > len(gts)
        smaller, larger = (gts, preds) if swap else (preds, gts)
        for assignment in itertools.permutations(range(len(larger)), len(smaller)):
            matches = 0
            for i, j in enumerate(assignment):
                pi, gj = (j, i) if swap else (i, j)
                if feasible[pi][gj]:
                    matches += 1
            best = max(best, matches)
        total += best
    return Counts(total, len(pred_events) - total, len(gt_events) - total)


class TestExtractEvents:
    def test_two_runs(self):
        col = np.array([[1], [1], [0], [1], [1], [1]])
        spans = extract_events(col)
        assert [(s.category, s.start, s.end) for s in spans] == [(0, 0, 1), (0, 3, 5)]

    def test_empty(self):
        assert extract_events(np.zeros((4, 3), dtype=int)) == []

    def test_full_column(self):
        spans = extract_events(np.ones((10, 1), dtype=int))
        assert spans == [EventSpan(0, 0, 9)]

    def test_ordering(self):
        m = np.array([[0, 1], [1, 1], [1, 0]])
        spans = extract_events(m)
        assert [(s.category, s.start, s.end) for s in spans] == [(0, 1, 2), (1, 0, 1)]

    def test_span_validation(self):
        with pytest.raises(ValueError):
            EventSpan(0, 3, 2)


class TestSegmentF1:
    def test_perfect(self):
        m = np.array([[1, 0], [0, 1]])
        f, counts = segment_f1(m, m)
        assert f == 1.0 and counts.fp == 0 and counts.fn == 0

    def test_inverted(self):
        m = np.array([[1, 0], [0, 1]])
        f, _ = segment_f1(1 - m, m)
        assert f == 0.0

    def test_hand_counted(self):
        pred = np.array([[1, 0], [1, 1]])
        gt = np.array([[1, 1], [0, 1]])
        f, counts = segment_f1(pred, gt)
        assert (counts.tp, counts.fp, counts.fn) == (2, 1, 1)
        assert f == pytest.approx(2 * 2 / (4 + 1 + 1))

    def test_micro_counts_are_additive_across_videos(self):
        rng = np.random.default_rng(0)
        pred1, gt1 = (rng.random((4, 3)) < 0.5), (rng.random((4, 3)) < 0.5)
        pred2, gt2 = (rng.random((6, 3)) < 0.5), (rng.random((6, 3)) < 0.5)
        _, c1 = segment_f1(pred1, gt1)
        _, c2 = segment_f1(pred2, gt2)
        _, joined = segment_f1(np.vstack([pred1, pred2]), np.vstack([gt1, gt2]))
        assert joined == c1 + c2

    def test_zero_support_is_one(self):
        f, counts = segment_f1(np.zeros((2, 2)), np.zeros((2, 2)))
        assert f == 1.0 and counts.zero_support


class TestEventF1:
    def test_identical_lists(self):
        spans = [EventSpan(0, 0, 2), EventSpan(1, 4, 6)]
        f, _ = event_f1(spans, list(spans))
        assert f == 1.0

    def test_low_iou_is_no_match(self):
        f, counts = event_f1([EventSpan(0, 0, 4)], [EventSpan(0, 2, 6)])
        # overlap 3 of 7 segments
        assert span_iou(EventSpan(0, 0, 4), EventSpan(0, 2, 6)) == pytest.approx(3 / 7)
        assert f == 0.0 and counts.tp == 0

    def test_high_iou_matches(self):
        assert span_iou(EventSpan(0, 0, 5), EventSpan(0, 0, 4)) == pytest.approx(5 / 6)
        f, _ = event_f1([EventSpan(0, 0, 5)], [EventSpan(0, 0, 4)])
        assert f == 1.0

    def test_category_must_agree(self):
        f, _ = event_f1([EventSpan(0, 0, 4)], [EventSpan(1, 0, 4)])
        assert f == 0.0

    def test_swap_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            pred = random_spans(rng)
            gt = random_spans(rng)
            f1, c1 = event_f1(pred, gt)
            f2, c2 = event_f1(gt, pred)
            assert f1 == pytest.approx(f2)
            assert (c1.tp, c1.fp, c1.fn) == (c2.tp, c2.fn, c2.fp)

    def test_zero_support(self):
        f, counts = event_f1([], [])
        assert f == 1.0 and counts.zero_support

    def test_threshold_validated(self):
        with pytest.raises(ValueError, match="miou_threshold"):
            event_f1([], [], 0.0)


def random_spans(rng, T=12, C=3, max_events=4):
    """Disjoint per-category runs, the same shape extract_events produces."""
    spans = []
    for c in range(C):
        col = (rng.random(T) < rng.uniform(0.2, 0.6)).astype(np.int8)
        spans.extend(EventSpan(c, s.start, s.end) for s in extract_events(col[:, None]))
    out = []
    for s in spans:
        if sum(1 for o in out if o.category == s.category) < max_events:
            out.append(s)
    return out


class TestGreedyAgainstBruteForce:
    def test_greedy_is_optimal_at_operating_threshold(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            pred = random_spans(rng)
            gt = random_spans(rng)
            greedy = event_counts(pred, gt, 0.5)
            optimal = brute_force_event_counts(pred, gt, 0.5)
            assert greedy == optimal


class TestReport:
    def test_perfect_predictions(self):
        rng = np.random.default_rng(3)
        videos = []
        for _ in range(3):
            a = (rng.random((6, 4)) < 0.4).astype(np.int8)
            v = (rng.random((6, 4)) < 0.4).astype(np.int8)
            videos.append(BinaryParse(a, v))
        rep = report(videos, videos)
        assert all(f == 1.0 for f in rep.segment_f.values())
        assert all(f == 1.0 for f in rep.event_f.values())

    def test_type_av_is_the_mean(self):
        # single-category videos crafted for A counts (3,2,2), V counts
        # (3,7,7), AV zero support broken by one false positive
        a_pred = np.array([[1]] * 5 + [[0]] * 15)
        a_gt = np.array([[1]] * 3 + [[0]] * 2 + [[1]] * 2 + [[0]] * 13)
        v_pred = np.array([[1]] * 10 + [[0]] * 10)
        v_gt = np.array([[1]] * 3 + [[0]] * 7 + [[1]] * 7 + [[0]] * 3)
        av_pred = (a_pred & v_pred)
        pred = BinaryParse(a_pred, v_pred, av_pred)
        gt = BinaryParse(a_gt, v_gt)
        rep = report([pred], [gt])
        seg = rep.segment_f
        assert seg["A"] == pytest.approx(0.6)
        assert seg["V"] == pytest.approx(0.3)
        assert seg["Type@AV"] == pytest.approx((seg["A"] + seg["V"] + seg["AV"]) / 3)

    def test_event_av_pools_audio_and_visual_counts(self):
        # A: two matched events plus one spurious; V: one matched, two missed
        T = 20
        a_gt = np.zeros((T, 1), dtype=np.int8)
        for s, e in [(0, 1), (3, 4), (6, 7)]:
            a_gt[s : e + 1, 0] = 1
        a_pred = np.zeros((T, 1), dtype=np.int8)
        for s, e in [(0, 1), (3, 4), (9, 10)]:
            a_pred[s : e + 1, 0] = 1
        v_gt = a_gt.copy()
        v_pred = np.zeros((T, 1), dtype=np.int8)
        v_pred[0:2, 0] = 1
        pred = BinaryParse(a_pred, v_pred, np.zeros((T, 1), dtype=np.int8))
        gt = BinaryParse(a_gt, v_gt, np.zeros((T, 1), dtype=np.int8))
        rep = report([pred], [gt])
        ec = rep.event_counts
        assert (ec["A"].tp, ec["A"].fp, ec["A"].fn) == (2, 1, 1)
        assert (ec["V"].tp, ec["V"].fp, ec["V"].fn) == (1, 0, 2)
        assert rep.event_f["Event@AV"] == pytest.approx(2 * 3 / (6 + 1 + 3))

    def test_misaligned_lists_rejected(self):
        v = BinaryParse(np.zeros((2, 2)), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="predictions but"):
            report([v], [v, v])

    def test_to_dict_has_all_score_fields(self):
        v = BinaryParse(np.ones((2, 2)), np.ones((2, 2)))
        doc = report([v], [v]).to_dict()
        for level in ("segment_level", "event_level"):
            assert set(doc[level]) == {"A", "V", "AV", "Type@AV", "Event@AV"}
        assert doc["counts"]["segment_level"]["A"]["tp"] == 4
