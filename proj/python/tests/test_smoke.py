import numpy as np
import pytest

wm = pytest.importorskip("wmforge_py")


def test_clean_image_shape_and_range():
    x = wm.gen_clean(9, 0, 64)
    assert x.shape == (64, 64, 3)
    assert x.dtype == np.float32
    assert x.min() >= 0.0 and x.max() <= 1.0
    y = wm.gen_clean(9, 0, 64)
    np.testing.assert_array_equal(x, y)


def test_artifact_residual_peak():
    x = wm.gen_clean(9, 1, 64)
    corrupted, omega = wm.apply_artifact(x, "noise", seed=3)
    assert corrupted.shape == x.shape
    assert omega.shape == x.shape
    assert abs(omega).max() == pytest.approx(0.05, abs=1e-6)
    np.testing.assert_allclose(corrupted, np.clip(x + omega, 0.0, 1.0), atol=1e-7)


def test_embed_decode_round_trip():
    x = wm.gen_clean(9, 2, 128)
    msg = "deadbeef"
    xw = wm.embed(x, msg, key_seed=1234)
    decoded, corrs = wm.decode(xw, key_seed=1234)
    assert decoded == msg
    assert len(corrs) == 32
    assert wm.bit_accuracy(decoded, msg) == 1.0
    assert wm.psnr(xw, x) > 40.0


def test_model_roundtrip_and_score(tmp_path):
    m = wm.init_model(width=8, depth=1, seed=3)
    x = wm.gen_clean(9, 3, 64)
    s = m.score(x)
    assert np.isfinite(s)
    p = str(tmp_path / "model.ckpt")
    m.save(p)
    m2 = wm.load_model(p)
    assert m2.score(x) == s
    assert m2.width == 8 and m2.depth == 1


def test_train_smoke_and_attack():
    imgs = [wm.gen_clean(11, i, 48) for i in range(3)]
    model, trace = wm.train(imgs, steps=2, batch=2, lr=1e-3, crop=16, resize=32,
                            width=8, depth=1, seed=5, log_every=1)
    assert len(trace) >= 2
    assert all(np.isfinite(row[1]) for row in trace)

    xw = wm.embed(wm.gen_clean(11, 7, 64), "deadbeef", key_seed=1)
    what = wm.extract(model, xw, k=3, working=64)
    assert what.shape == xw.shape
    cleaned = wm.remove(model, xw, k=3, working=64)
    np.testing.assert_allclose(cleaned + what, xw, atol=2e-6)
    y = wm.gen_clean(11, 8, 64)
    forged = wm.forge(model, xw, y, k=3, working=64)
    assert forged.min() >= 0.0 and forged.max() <= 1.0


def test_binomial_fpr_edges():
    assert wm.binomial_fpr(0, 32) == 1.0
    assert wm.binomial_fpr(32, 32) == 2.0 ** -32
    assert wm.binomial_fpr(33, 32) == 0.0


def test_jnd_map_range():
    x = wm.gen_clean(9, 4, 64)
    mask = wm.jnd_map(x)
    assert mask.shape == (64, 64)
    assert mask.min() >= 0.0 and mask.max() <= 1.0
