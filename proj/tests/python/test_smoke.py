import json
import math

import numpy as np
import pytest

import clodgs


@pytest.fixture(scope="module")
def scene():
    return clodgs.synthetic_scene(count=300, seed=2)


@pytest.fixture(scope="module")
def cameras(scene):
    return clodgs.camera_set(scene, count=3, width=32, height=32)


def test_scalar_functions():
    assert clodgs.attenuate_opacity(0.8, 0.5, 1.0, 2.0) == pytest.approx(0.4852, abs=5e-5)
    assert clodgs.reg_loss(3.0, 0.4, clodgs.target_ratio(3.0)) == pytest.approx(0.17231, abs=5e-6)
    assert clodgs.target_ratio(4.0) == pytest.approx(0.125)
    assert clodgs.adaptive_weight(1.0, 5.0) == pytest.approx(0.81)


def test_render_shapes_and_counts(scene, cameras):
    cam = cameras.cameras[0]
    out = clodgs.render(scene, cam)
    assert out["image"].shape == (32, 32, 3)
    assert out["total"] == len(scene)
    assert out["mask"].sum() == out["rendered_count"]
    counts = [clodgs.render(scene, cam, s_v=s)["rendered_count"] for s in (1.0, 3.0, 9.0)]
    assert counts == sorted(counts, reverse=True)
    assert clodgs.render(scene, cam, top_k=10)["rendered_count"] == 10


def test_ground_truth_matches_plain_render(scene, cameras):
    img = clodgs.render(scene, cameras.cameras[1], attenuate=False)["image"]
    gt = cameras.image(1)
    assert clodgs.psnr(img, gt) == math.inf
    assert clodgs.ssim(img, gt) == pytest.approx(1.0)


def test_ply_round_trip(scene, tmp_path):
    path = tmp_path / "s.ply"
    clodgs.save_ply(scene, path)
    back = clodgs.load_ply(path)
    clodgs.save_ply(back, tmp_path / "t.ply")
    assert path.read_bytes() == (tmp_path / "t.ply").read_bytes()
    assert np.allclose(back.positions, scene.positions, atol=1e-6)


def test_errors(scene, cameras, tmp_path):
    with pytest.raises(clodgs.IoError):
        clodgs.load_ply(tmp_path / "missing.ply")
    with pytest.raises(clodgs.ConfigError):
        clodgs.render(scene, cameras.cameras[0], s_v=0.5)
    with pytest.raises(clodgs.ClodgsError):
        clodgs.synthetic_scene(layout="nope")


def test_short_training_improves(scene, cameras):
    init = clodgs.perturb_scene(scene)
    cfg = json.loads(clodgs.default_train_config())
    cfg.update(iterations=30, mechanism_start_iter=10)
    trained = clodgs.train(init, cameras, json.dumps(cfg))
    before = clodgs.quality_curve(init, cameras, [1.0])[0]["psnr"]
    after = clodgs.quality_curve(trained, cameras, [1.0])[0]["psnr"]
    assert after > before
    summary = json.loads(clodgs.summarize(trained, cameras))
    assert summary["num_gaussians"] == len(scene)


def test_quality_curve(scene, cameras):
    pts = clodgs.quality_curve(scene, cameras, clodgs.make_grid(1.0, 3.0, 1.0))
    assert [p["s_v"] for p in pts] == [1.0, 2.0, 3.0]
    assert all(a["count"] >= b["count"] for a, b in zip(pts, pts[1:]))
