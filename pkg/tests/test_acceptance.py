"""Acceptance suite: one test per exit criterion, each printing a PASS/FAIL
line (run with ``pytest tests/test_acceptance.py -v -s``). Tolerances are
pinned here and nowhere else."""

import hashlib
import math
import os
import time
from contextlib import contextmanager

import numpy as np

from oracles import acm_scalar, slic_assign_scalar, softmax_rows_scalar
from seedforge.acm import AcmParams, apply_acm, conflict_count
from seedforge.cam_refine import CamStack, affinity_from_qk, compute_cam, refine_cam
from seedforge.evaluation import accumulate, confusion_matrix, miou
from seedforge.fixtures import FixtureSpec, generate_fixtures
from seedforge.mecp import EstimationSchedule, generate_hide_mask, mecp_for_epoch
from seedforge.pipeline import PipelineConfig, run_pipeline
from seedforge.slic import (
    SlicParams,
    SuperpixelLabeling,
    assignment_step,
    init_centers,
    rgb_to_lab,
    slic_segment,
    slic_segment_with_info,
    update_step,
)
from seedforge.tensor_io import read_png
from scipy import ndimage


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


def _tree_digest(root):
    h = hashlib.sha256()
    for base, _, files in sorted(os.walk(root)):
        for name in sorted(files):
            path = os.path.join(base, name)
            h.update(os.path.relpath(path, root).encode())
            h.update(open(path, "rb").read())
    return h.hexdigest()


def test_complement_identity():
    """1000 random (image, schedule, epoch, seed) runs: cp + cp_bar == image
    exactly, supports disjoint, in under 10 seconds."""
    with criterion("complement-identity"):
        rng = np.random.default_rng(1001)
        start = time.monotonic()
        for i in range(1000):
            h, w = int(rng.integers(16, 29)), int(rng.integers(16, 29))
            img = rng.integers(0, 256, (h, w, 3)).astype(np.uint8)
            ks = tuple(int(k) for k in rng.integers(2, 15, size=int(rng.integers(1, 6))))
            schedule = EstimationSchedule(ks=ks, hide_prob=float(rng.random()))
            pair = mecp_for_epoch(
                img,
                schedule,
                epoch=int(rng.integers(0, 32)),
                seed=int(rng.integers(0, 2**63)),
                image_id=f"img{i}",
            )
            assert (pair.cp.astype(np.int64) + pair.cp_bar == img).all()
            assert not np.logical_and(pair.cp > 0, pair.cp_bar > 0).any()
        elapsed = time.monotonic() - start
        assert elapsed < 10.0, f"took {elapsed:.1f}s"


def test_acm_oracle_equivalence():
    """500 random stacks (<=16x16, B<=5), with and without saliency: the
    vectorized path equals the scalar per-pixel rules on every pixel."""
    with criterion("acm-oracle"):
        rng = np.random.default_rng(1002)
        start = time.monotonic()
        for i in range(500):
            nb = int(rng.integers(1, 6))
            h, w = int(rng.integers(2, 17)), int(rng.integers(2, 17))
            maps = rng.random((nb, h, w))
            ids = tuple(int(v) for v in rng.choice(np.arange(1, 40), nb, replace=False))
            sal = rng.integers(0, 256, (h, w)).astype(np.uint8) if i % 2 == 0 else None
            params = AcmParams(
                conflict_rate=round(float(rng.integers(0, 11)) / 10.0, 1),
                bg_threshold=int(rng.integers(0, 256)),
                seed_bg_alpha=float(rng.random()),
            )
            seeds = CamStack(maps=maps, class_ids=ids)
            mine = apply_acm(seeds, sal, params)
            ref = np.array(
                acm_scalar(
                    maps.tolist(),
                    list(ids),
                    sal.tolist() if sal is not None else None,
                    params.conflict_rate,
                    params.bg_threshold,
                    params.seed_bg_alpha,
                ),
                dtype=np.uint8,
            )
            assert (mine == ref).all()
        elapsed = time.monotonic() - start
        assert elapsed < 30.0, f"took {elapsed:.1f}s"


def test_conflict_rate_monotonicity():
    """Sweeping the conflict rate over the 0.0..1.0 grid: rule one marks a
    non-increasing pixel count, and nothing at rate 1.0."""
    with criterion("conflict-rate-monotonicity"):
        rng = np.random.default_rng(1003)
        grid = [round(0.1 * i, 1) for i in range(11)]
        for _ in range(100):
            nb = int(rng.integers(2, 6))
            maps = rng.random((nb, 12, 12))
            seeds = CamStack(maps=maps, class_ids=tuple(range(1, nb + 1)))
            counts = [(conflict_count(seeds, cr) > 1).sum() for cr in grid]
            assert all(a >= b for a, b in zip(counts, counts[1:])), counts
            assert counts[-1] == 0


def test_affinity_checks():
    """200 random (Q, K): row sums 1 within 1e-5, per-row logit shifts leave
    the map unchanged within 1e-5, scalar softmax oracle agrees within 1e-6."""
    with criterion("affinity-checks"):
        rng = np.random.default_rng(1004)
        for _ in range(200):
            tokens = int(rng.integers(2, 10))
            dim = int(rng.integers(1, 12))
            q = rng.standard_normal((tokens, dim)) * 2
            k = rng.standard_normal((tokens, dim)) * 2
            a = affinity_from_qk(q, k)
            assert (a >= 0).all()
            np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-5)

            logits = (q @ k.T) / math.sqrt(dim)
            ref = np.array(softmax_rows_scalar(logits.tolist()))
            np.testing.assert_allclose(a, ref, atol=1e-6)

            shifts = rng.standard_normal(tokens) * 4
            s = (math.sqrt(dim + 1) / math.sqrt(dim)) ** 0.5
            q2 = np.hstack([q * s, shifts[:, None]])
            k2 = np.hstack([k * s, np.ones((tokens, 1))])
            np.testing.assert_allclose(a, affinity_from_qk(q2, k2), atol=1e-5)


def test_refinement_algebra():
    """Identity affinity reproduces the input exactly; uniform affinity gives
    spatial means within 1e-6; the CAM is linear in the weights within 1e-5."""
    with criterion("refinement-algebra"):
        rng = np.random.default_rng(1005)
        for _ in range(50):
            nb = int(rng.integers(1, 5))
            side = int(rng.integers(2, 7))
            cam = CamStack(maps=rng.standard_normal((nb, side, side)), class_ids=tuple(range(nb)))
            out = refine_cam(cam, np.eye(side * side))
            assert (out.maps == cam.maps).all()

            uniform = refine_cam(cam, np.full((side * side,) * 2, 1.0 / (side * side)))
            for b in range(nb):
                np.testing.assert_allclose(
                    uniform.maps[b], np.full((side, side), cam.maps[b].mean()), atol=1e-6
                )

            f = rng.standard_normal((5, side, side))
            w1 = rng.standard_normal((nb, 5))
            w2 = rng.standard_normal((nb, 5))
            alpha, beta = float(rng.standard_normal()), float(rng.standard_normal())
            lhs = compute_cam(f, alpha * w1 + beta * w2).maps
            rhs = alpha * compute_cam(f, w1).maps + beta * compute_cam(f, w2).maps
            np.testing.assert_allclose(lhs, rhs, rtol=1e-5, atol=1e-9)


def test_slic_behaviour():
    """k=1 collapses to one segment; a uniform 16x16 with k=4 splits into the
    2x2 block grid; the clustering objective never rises across iterations on
    50 random images; the assignment step equals the windowed brute force."""
    with criterion("slic"):
        rng = np.random.default_rng(1006)
        img = rng.integers(0, 256, (18, 13, 3)).astype(np.uint8)
        one = slic_segment(img, SlicParams(k=1))
        assert one.num_segments == 1 and (one.labels == 0).all()

        uniform = np.full((16, 16, 3), 77, np.uint8)
        four = slic_segment(uniform, SlicParams(k=4))
        expected = np.zeros((16, 16), np.uint32)
        expected[:8, 8:] = 1
        expected[8:, :8] = 2
        expected[8:, 8:] = 3
        assert four.num_segments == 4
        assert (four.labels == expected).all()

        for _ in range(50):
            img = rng.integers(0, 256, (32, 32, 3)).astype(np.uint8)
            _, info = slic_segment_with_info(img, SlicParams(k=8))
            assert all(b <= a + 1e-9 for a, b in zip(info.energies, info.energies[1:])), info.energies

        for _ in range(6):
            h, w = int(rng.integers(8, 17)), int(rng.integers(8, 17))
            k = int(rng.integers(1, 5))
            img = rng.integers(0, 256, (h, w, 3)).astype(np.uint8)
            lab = rgb_to_lab(img)
            g = math.sqrt(h * w / k)
            centers = init_centers(lab, k)
            labels = np.full((h, w), -1, np.int64)
            for _ in range(3):
                mine = assignment_step(lab, centers, g, 10.0, labels)
                ref = np.array(slic_assign_scalar(lab, centers, g, 10.0, labels))
                assert (mine == ref).all()
                labels = mine
                centers = update_step(lab, labels, centers)


def test_hiding_statistics():
    """10,000 masks over 4 segments at hide probability 0.5: the mean hidden
    count sits within 2.0 +/- 0.06."""
    with criterion("hiding-statistics"):
        labels = np.repeat(np.repeat(np.arange(4).reshape(2, 2), 4, axis=0), 4, axis=1)
        labeling = SuperpixelLabeling(labels=labels.astype(np.uint32), num_segments=4)
        total = 0
        for seed in range(10_000):
            total += len(generate_hide_mask(labeling, 0.5, seed).hidden_patch_ids)
        mean = total / 10_000
        assert abs(mean - 2.0) <= 0.06, mean


def test_miou_hand_case():
    """The four-pixel confusion example scores exactly 7/12."""
    with criterion("miou-hand-case"):
        gt = np.array([0, 0, 1, 1], np.uint8)
        pred = np.array([0, 1, 1, 1], np.uint8)
        cm = accumulate(confusion_matrix(2), pred, gt)
        per_class, mean = miou(cm)
        assert abs(per_class[0] - 0.5) < 1e-12
        assert abs(per_class[1] - 2.0 / 3.0) < 1e-12
        assert abs(mean - 7.0 / 12.0) < 1e-12


def test_end_to_end_synthetic_recovery(tmp_path):
    """20 noise-free 2-class blob images: the pipeline scores mIoU >= 0.95 in
    under 60 seconds; overlapping-blob fixtures get their shared strip
    marked 255."""
    with criterion("end-to-end-recovery"):
        start = time.monotonic()
        fx = tmp_path / "fx"
        generate_fixtures(2024, FixtureSpec(num_images=20, num_classes=2, noise=0.0), fx)
        out = tmp_path / "out"
        cfg = PipelineConfig(
            input_dir=str(fx),
            output_dir=str(out),
            acm=AcmParams(conflict_rate=0.9, bg_threshold=128, seed_bg_alpha=0.5),
        )
        manifest = run_pipeline(cfg)
        assert manifest["metrics"]["mean_iou"] >= 0.95

        fx2 = tmp_path / "fx2"
        generate_fixtures(77, FixtureSpec(num_images=3, num_classes=2, overlap=True), fx2)
        out2 = tmp_path / "out2"
        cfg2 = PipelineConfig(
            input_dir=str(fx2),
            output_dir=str(out2),
            acm=AcmParams(conflict_rate=0.9, bg_threshold=128, seed_bg_alpha=0.5),
        )
        run_pipeline(cfg2)
        for image_id in ("img_0000", "img_0001", "img_0002"):
            gt = read_png(fx2 / "labels" / f"{image_id}.png")
            pred = read_png(out2 / "pred" / f"{image_id}.png")
            strip = gt == 255
            assert strip.any()
            interior = ndimage.binary_erosion(strip, iterations=3)
            assert interior.any()
            assert (pred[interior] == 255).all()
            assert (pred[strip] == 255).mean() >= 0.6
        elapsed = time.monotonic() - start
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_pipeline_determinism(tmp_path, monkeypatch):
    """The same fixture seed and config produce byte-identical output trees,
    including across 1-thread and 4-thread runs."""
    with criterion("determinism"):
        fx = tmp_path / "fx"
        generate_fixtures(555, FixtureSpec(num_images=5, num_classes=2), fx)

        def run(out, threads):
            monkeypatch.setenv("SEEDFORGE_THREADS", str(threads))
            cfg = PipelineConfig(
                input_dir=str(fx),
                output_dir=str(out),
                threads=threads,
                acm=AcmParams(conflict_rate=0.9, bg_threshold=128, seed_bg_alpha=0.5),
            )
            run_pipeline(cfg)
            return _tree_digest(out)

        first = run(tmp_path / "o1", 1)
        second = run(tmp_path / "o2", 1)
        multi = run(tmp_path / "o4", 4)
        assert first == second == multi

        fx_b = tmp_path / "fx_b"
        generate_fixtures(555, FixtureSpec(num_images=5, num_classes=2), fx_b)
        assert _tree_digest(fx) == _tree_digest(fx_b)
