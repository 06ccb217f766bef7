"""Acceptance suite: one test per release criterion, each printing a PASS or
FAIL line (run with `pytest tests/test_acceptance.py -s` to see them).

The numeric tolerances and seed counts here are the release gate; the
synthetic end-to-end scenarios use the compiled kernels and stay within the
stated CPU budgets on an ordinary machine.
"""

import json
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from avparse import backend
from avparse.backend.layout import NetDims, total_params
from avparse.cli import main as cli_main
from avparse.labels import LabelSet, PseudoLabelMatrix, SimilarityMatrix, Stage, derive_video_label
from avparse.losses import LossConfig, category_richness, loss_total, segment_richness
from avparse.metrics import BinaryParse, report, segment_f1, event_counts
from avparse.network import (
    FeatureBundle,
    TrainConfig,
    TrainExample,
    _targets_for,
    binarize,
    forward,
    train,
)
from avparse.pld import PldConfig, denoise, denoise_with_predictions, flip_mask, loss_matrix, mask_loss_matrix
from avparse.plg import PlgConfig, generate_pseudo_labels
from avparse.synth import ScenarioConfig, calibrate_tau, generate_scenario, overall_segment_f

from conftest import max_rel_err, random_binary_pseudo
from test_metrics import brute_force_event_counts, random_spans


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


def _random_loss_instance(rng):
    T = int(rng.integers(2, 7))
    C = int(rng.integers(2, 6))
    y = (rng.random(C) < 0.6).astype(int)
    if y.sum() == 0:
        y[int(rng.integers(C))] = 1
    labels = LabelSet(y, [f"c{i}" for i in range(C)], T=T)
    pseudo = PseudoLabelMatrix(random_binary_pseudo(rng, T, C, y), Stage.PLG)
    return labels, pseudo


def test_gradient_correctness():
    """Analytic gradients match central finite differences at 1e-3 for all
    prediction inputs and all model parameters, 50 instances, under 30 s."""
    with criterion("gradient-correctness"):
        rng = np.random.default_rng(2024)
        cfg = LossConfig(lam=0.5)
        h = 1e-6
        start = time.monotonic()
        for i in range(50):
            labels, pseudo = _random_loss_instance(rng)
            T, C = pseudo.values.shape
            y_a = 0.9 * labels.video_label + 0.1 * (1 - labels.video_label)

            # prediction-space gradients
            p_union = rng.uniform(0.05, 0.95, C)
            p_a = rng.uniform(0.05, 0.95, C)
            p_v = rng.uniform(0.05, 0.95, C)
            P_v = rng.uniform(0.05, 0.95, (T, C))
            out = loss_total(p_union, p_a, p_v, P_v, pseudo=pseudo, labels=labels,
                             y_a_smooth=y_a, cfg=cfg)

            def value(pu=p_union, pa=p_a, pv=p_v, Pv=P_v):
                return loss_total(pu, pa, pv, Pv, pseudo=pseudo, labels=labels,
                                  y_a_smooth=y_a, cfg=cfg).value

            for vec, grad, key in ((p_union, out.d_p_union, "pu"),
                                   (p_a, out.d_p_a, "pa"), (p_v, out.d_p_v, "pv")):
                fd = np.zeros_like(vec)
                for j in range(C):
                    up, dn = vec.copy(), vec.copy()
                    up[j] += h
                    dn[j] -= h
                    kw_up = {key: up} if key != "pu" else {"pu": up}
                    kw_dn = {key: dn} if key != "pu" else {"pu": dn}
                    fd[j] = (value(**kw_up) - value(**kw_dn)) / (2 * h)
                assert max_rel_err(grad, fd, floor=1e-5) <= 1e-3
            fd = np.zeros_like(P_v)
            for t in range(T):
                for c in range(C):
                    up, dn = P_v.copy(), P_v.copy()
                    up[t, c] += h
                    dn[t, c] -= h
                    fd[t, c] = (value(Pv=up) - value(Pv=dn)) / (2 * h)
            assert max_rel_err(out.d_P_v, fd, floor=1e-5) <= 1e-3

            # parameter-space gradients through the network; the wider step
            # keeps finite-difference roundoff well under the tolerance
            hp = 1e-5
            dims = NetDims(int(rng.integers(3, 9)), int(rng.integers(3, 9)), 8, 2, C)
            theta = rng.standard_normal(total_params(dims)) * 0.4
            audio = rng.standard_normal((T, dims.d_audio_in))
            visual = rng.standard_normal((T, dims.d_visual_in))
            ex = TrainExample(FeatureBundle(audio, visual), labels, pseudo)
            targets = _targets_for(ex, 0.1)
            _, grad = backend.loss_grad(theta, dims, audio, visual, targets, 0.5, 1e-7)
            fd = np.zeros_like(grad)
            for j in range(len(theta)):
                up, dn = theta.copy(), theta.copy()
                up[j] += hp
                dn[j] -= hp
                fd[j] = (
                    backend.loss_value(up, dims, audio, visual, targets, 0.5, 1e-7)
                    - backend.loss_value(dn, dims, audio, visual, targets, 0.5, 1e-7)
                ) / (2 * hp)
            assert max_rel_err(grad, fd, floor=1e-5) <= 1e-3
        elapsed = time.monotonic() - start
        assert elapsed < 30.0, f"gradient sweep took {elapsed:.1f}s"


def test_richness_constants(fig_multi_event, fig_two_event):
    """The worked richness ratios reproduce exactly."""
    with criterion("richness-constants"):
        labels3, pseudo3 = fig_multi_event
        cr = category_richness(pseudo3.values, labels3)
        sr = segment_richness(pseudo3.values)
        assert cr[0] == 1.0 and cr[-1] == 1 / 3
        assert sr[0] == 1.0 and sr[2] == 1 / 4
        labels2, pseudo2 = fig_two_event
        cr = category_richness(pseudo2.values, labels2)
        sr = segment_richness(pseudo2.values)
        assert cr[3] == 1.0 and cr[0] == 1 / 2
        assert sr[1] == 4 / 5 and sr[0] == 1 / 5


def test_pld_oracle_and_properties():
    """Hand-computed flip case plus involution and carve-out over 1000 random
    matrices, under 5 s."""
    with criterion("pld-oracle"):
        start = time.monotonic()
        M = np.array([[0.1], [0.2], [5.0], [0.15]])
        mask = flip_mask(M, [1], PldConfig(k=2, alpha=10.0))
        assert mask.values.ravel().tolist() == [0, 0, 1, 0]

        rng = np.random.default_rng(7)
        for _ in range(1000):
            T = int(rng.integers(2, 10))
            C = int(rng.integers(1, 7))
            y = (rng.random(C) < 0.7).astype(int)
            pseudo = PseudoLabelMatrix(random_binary_pseudo(rng, T, C, y), Stage.PLG)
            P = rng.uniform(0.02, 0.98, (T, C))
            cfg = PldConfig(k=int(rng.integers(1, T + 1)), alpha=float(rng.uniform(1.5, 15.0)))
            y_hat = derive_video_label(pseudo)
            flips = flip_mask(mask_loss_matrix(loss_matrix(P, pseudo), y_hat), y_hat, cfg)
            assert not flips.values[:, y_hat == 0].any()
            once = denoise(pseudo, flips)
            twice = denoise(once, flips)
            assert np.array_equal(twice.values, pseudo.values)
        elapsed = time.monotonic() - start
        assert elapsed < 5.0, f"pld property sweep took {elapsed:.1f}s"


def test_metrics_oracle_equivalence():
    """Greedy event matching equals brute-force optimal matching on 500
    random instances with at most four events per category; segment counts
    match hand-tallied fixtures."""
    with criterion("metrics-oracle"):
        rng = np.random.default_rng(11)
        for _ in range(500):
            pred = random_spans(rng, T=int(rng.integers(6, 16)), C=int(rng.integers(1, 4)))
            gt = random_spans(rng, T=int(rng.integers(6, 16)), C=int(rng.integers(1, 4)))
            greedy = event_counts(pred, gt, 0.5)
            optimal = brute_force_event_counts(pred, gt, 0.5)
            assert greedy == optimal

        f, counts = segment_f1(np.array([[1, 0], [1, 1]]), np.array([[1, 1], [0, 1]]))
        assert (counts.tp, counts.fp, counts.fn) == (2, 1, 1)
        assert f == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))
        f, counts = segment_f1(np.eye(3, dtype=int), np.eye(3, dtype=int))
        assert (counts.tp, counts.fp, counts.fn) == (3, 0, 0) and f == 1.0


E2E_SCENARIO = dict(n_videos=50, T=10, C=8, max_events_per_modality=2,
                    min_event_len=2, max_event_len=6, signal=6.0,
                    noise_sigma=0.4, feature_dim=16, feature_signal=8.0,
                    context_leak=0.1, occlusion_rate=0.3)
E2E_TRAIN = dict(epochs=60, batch_size=8, lr=3e-3, d_model=32, n_heads=4)
# k/alpha tuned for this scenario family the way the operating point is tuned
# on a validation split at full scale; the column-mean variant (k = T) is the
# robust scale estimate when easy cells saturate
E2E_PLD = dict(k=10, alpha=8.5)


def _pipeline_once(seed):
    scenario = generate_scenario(ScenarioConfig(seed=seed, **E2E_SCENARIO))
    tau = calibrate_tau(scenario.videos, fraction=0.2)
    plg_cfg = PlgConfig(tau=tau, prompt_id="synthetic")
    pseudo = [generate_pseudo_labels(v.similarities, v.labels, plg_cfg) for v in scenario.videos]
    gts = [v.gt_visual for v in scenario.videos]
    dataset = [TrainExample(v.features, v.labels, p) for v, p in zip(scenario.videos, pseudo)]
    params, _ = train(dataset, TrainConfig(seed=seed, **E2E_TRAIN))
    refined = []
    for v, p in zip(scenario.videos, pseudo):
        preds = forward(v.features, params)
        refined.append(denoise_with_predictions(preds.P_v, p, PldConfig(**E2E_PLD)))
    return overall_segment_f(pseudo, gts), overall_segment_f(refined, gts)


def test_denoising_improves_labels_end_to_end():
    """Over ten seeded scenarios, denoised labels score at least as well as
    generated ones in at least 8, with positive mean improvement, under two
    minutes per seed."""
    with criterion("e2e-denoising-improvement"):
        wins = 0
        diffs = []
        for seed in range(10):
            start = time.monotonic()
            f_plg, f_pld = _pipeline_once(seed)
            elapsed = time.monotonic() - start
            assert elapsed < 120.0, f"seed {seed} took {elapsed:.1f}s"
            wins += f_pld >= f_plg
            diffs.append(f_pld - f_plg)
        assert wins >= 8, f"denoising won only {wins}/10 seeds ({diffs})"
        assert float(np.mean(diffs)) > 0.0, f"mean improvement {np.mean(diffs):+.5f}"


def test_richness_supervision_generalizes():
    """Retraining with the richness term beats the plain video-level
    objective on held-out videos in at least 7 of 10 seeds."""
    with criterion("richness-supervision"):
        wins = 0
        for seed in range(10):
            cfg = ScenarioConfig(seed=seed, **{**E2E_SCENARIO, "n_videos": 60})
            scenario = generate_scenario(cfg)
            train_videos, held = scenario.videos[:48], scenario.videos[48:]
            tau = calibrate_tau(scenario.videos, fraction=0.2)
            plg_cfg = PlgConfig(tau=tau, prompt_id="synthetic")
            pseudo = [generate_pseudo_labels(v.similarities, v.labels, plg_cfg) for v in train_videos]
            dataset = [TrainExample(v.features, v.labels, p) for v, p in zip(train_videos, pseudo)]
            pre, _ = train(dataset, TrainConfig(seed=seed, **E2E_TRAIN))
            refined = [
                denoise_with_predictions(forward(v.features, pre).P_v, p, PldConfig(**E2E_PLD))
                for v, p in zip(train_videos, pseudo)
            ]
            dataset_pld = [TrainExample(v.features, v.labels, r) for v, r in zip(train_videos, refined)]
            scores = {}
            for lam in (0.5, 0.0):
                params, _ = train(dataset_pld, TrainConfig(seed=seed, lam=lam, **E2E_TRAIN))
                preds = [binarize(forward(v.features, params), 0.5) for v in held]
                gts = [BinaryParse(v.gt_audio, v.gt_visual) for v in held]
                scores[lam] = report(preds, gts).segment_f["Type@AV"]
            wins += scores[0.5] >= scores[0.0]
        assert wins >= 7, f"richness supervision won only {wins}/10 seeds"


def _run_cli(argv):
    return cli_main([str(a) for a in argv])


def _stage_all(root: Path):
    data = root / "data"
    args = ["synth", "--out", data, "--seed", "3", "--n-videos", "6", "--segments", "8",
            "--classes", "5", "--feature-dim", "6", "--signal", "6", "--noise-sigma", "0.8"]
    assert _run_cli(args) == 0
    assert _run_cli(["plg", "--data", data, "--tau-auto"]) == 0
    small = ["--epochs", "2", "--batch-size", "4", "--lr", "1e-3", "--d-model", "16", "--n-heads", "2"]
    assert _run_cli(["train", "--data", data, "--out", root / "pre", "--seed", "5"] + small) == 0
    assert _run_cli(["pld", "--data", data, "--checkpoint", root / "pre/model.ckpt"]) == 0
    assert _run_cli(["retrain", "--data", data, "--out", root / "post", "--seed", "5"] + small) == 0
    assert _run_cli(["eval", "--data", data, "--checkpoint", root / "post/model.ckpt",
                     "--out", root / "scores"]) == 0


def test_stage_determinism(tmp_path):
    """Re-running every pipeline stage with identical configs and seeds
    produces byte-identical artifacts."""
    with criterion("stage-determinism"):
        a, b = tmp_path / "a", tmp_path / "b"
        for root in (a, b):
            root.mkdir()
            _stage_all(root)
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), f"{rel} differs"
        doc = json.loads((a / "scores/report.json").read_text())
        assert set(doc["segment_level"]) == {"A", "V", "AV", "Type@AV", "Event@AV"}


def test_plg_structural_invariants():
    """Threshold monotonicity, weak-label filtering, and row-stochastic
    similarity checks over 1000 random instances."""
    with criterion("plg-invariants"):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            T = int(rng.integers(1, 9))
            C = int(rng.integers(2, 8))
            logits = rng.standard_normal((T, C)) * rng.uniform(0.5, 3.0)
            e = np.exp(logits - logits.max(axis=1, keepdims=True))
            sim = SimilarityMatrix(e / e.sum(axis=1, keepdims=True))
            assert np.abs(sim.values.sum(axis=1) - 1.0).max() <= 1e-6
            y = (rng.random(C) < 0.6).astype(int)
            labels = LabelSet(y, [f"c{i}" for i in range(C)], T=T)
            t1, t2 = sorted(rng.uniform(0.005, 0.95, size=2))
            lo = generate_pseudo_labels(sim, labels, PlgConfig(tau=float(t1)))
            hi = generate_pseudo_labels(sim, labels, PlgConfig(tau=float(t2)))
            assert (lo.values >= hi.values).all()
            assert (derive_video_label(lo) <= y).all()
            assert (derive_video_label(hi) <= y).all()
