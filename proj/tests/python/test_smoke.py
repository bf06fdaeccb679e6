import os
import subprocess

import numpy as np
import pytest

import cce


def test_masks():
    m = cce.central_mask(32, 32, 0.25)
    assert m.shape == (32, 32)
    assert m.sum() == 256
    assert m[8:24, 8:24].all()
    for seed in range(50):
        r = cce.random_blocks_mask(32, 32, 0.25, 4, 12, seed)
        assert 0 < cce.coverage(r) <= 0.25


def test_estimators_agree_with_numpy():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(40, 7)) * 2.5 + 1.0
    diffs = x[:, None, :] - x[None, :, :]
    ref = (diffs**2).sum(axis=2).mean()
    assert cce.pairwise_sq_distortion(x) == pytest.approx(ref, rel=1e-12)
    assert cce.mean_sq_distortion(x) == pytest.approx(ref, rel=1e-12)


def test_nsd_calibration():
    rng = np.random.default_rng(5)
    sets = [rng.normal(size=(100, 64)) for _ in range(50)]
    r = cce.nsd_estimate(sets)
    assert 0.95 <= r["nsd_mean"] <= 1.05
    assert r["dim"] == 64 and r["images"] == 50 and r["masks"] == 100
    per_image = np.array(r["per_image_dist2"]) / 128.0
    assert r["nsd_std"] == pytest.approx(per_image.std(ddof=1), rel=1e-12)
    assert cce.chi2_reference(16, 100000, 1) == pytest.approx(32.0, rel=0.02)


def test_images_and_resampling():
    img = cce.synth_sample(32, 1, 0)
    assert img.shape == (3, 32, 32)
    assert np.abs(img).max() <= 1.0
    np.testing.assert_array_equal(img, cce.synth_sample(32, 1, 0))
    small = cce.downscale(img)
    np.testing.assert_allclose(small, img.reshape(3, 16, 2, 16, 2).mean(axis=(2, 4)), atol=1e-15)
    assert cce.upscale(small).shape == (3, 32, 32)
    masked = cce.apply_mask(img, cce.central_mask(32, 32), [0.0, 0.0, 0.0])
    assert (masked[:, 8:24, 8:24] == 0).all()


def test_grad_suite():
    results = dict(cce.grad_check_suite())
    assert "joint_loss" in results and "cascade/rec_loss" in results
    assert max(results.values()) < 1e-6


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    cli = os.environ.get("CCE_CLI")
    if not cli:
        pytest.skip("CCE_CLI not set")
    out = tmp_path_factory.mktemp("train")
    subprocess.run(
        [cli, "train", "--synth-count", "12", "--synth-size", "16", "--synth-val", "2",
         "--epochs", "1", "--latent-dim", "32", "--stages", "1,2,single", "--out", str(out)],
        check=True, capture_output=True)
    return out


def test_model_inference(trained):
    img = cce.synth_sample(16, 4, 0)
    mask = cce.central_mask(16, 16)
    for name, cascade in (("single.cepk", False), ("cascade.ccpk", True)):
        model = cce.load_model(str(trained / name))
        assert model.is_cascade == cascade
        assert model.latent_dim == 32
        z = np.array(model.encode(img, mask))
        assert z.shape == (32,) and np.isfinite(z).all()
        out = model.inpaint(img, mask)
        keep = mask == 0
        np.testing.assert_array_equal(out[:, keep], img[:, keep])
    with pytest.raises(ValueError):
        model.inpaint(cce.synth_sample(32, 4, 0), cce.central_mask(32, 32))
