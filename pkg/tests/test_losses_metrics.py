import math

import numpy as np
import pytest

from oracles import sq_loss_naive, ssim_naive
from hrolf.autodiff import Tape, Tensor, backward
from hrolf.errors import ConfigError, ShapeError
from hrolf.lightfield import LightField
from hrolf.losses import FeatureNet, LossWeights, perceptual_loss, reconstruction_loss, total_loss
from hrolf.metrics import eval_lf, psnr, ssim, to_luma


# --- losses ------------------------------------------------------------------------------------

def test_reconstruction_loss_values(rng):
    a = rng.standard_normal((2, 3, 4, 4, 1))
    b = rng.standard_normal((2, 3, 4, 4, 1))
    assert reconstruction_loss(Tensor(a), Tensor(a)).item() == 0.0
    for norm in (True, False):
        got = reconstruction_loss(Tensor(a), Tensor(b), norm).item()
        ref = sq_loss_naive(a, b, norm)
        assert abs(got - ref) / ref < 1e-12
    ones = np.ones((2, 2, 3, 3, 1))
    assert reconstruction_loss(Tensor(ones), Tensor(np.zeros_like(ones)), False).item() == ones.size


def test_losses_accept_lightfields(rng):
    a = LightField(rng.uniform(size=(2, 2, 8, 8, 1)))
    assert reconstruction_loss(a, a).item() == 0.0
    assert perceptual_loss(a, a, FeatureNet(dtype=np.float64)).item() == 0.0


def test_loss_shape_mismatch():
    with pytest.raises(ShapeError):
        reconstruction_loss(Tensor(np.zeros((1, 1, 2, 2, 1))), Tensor(np.zeros((1, 1, 2, 3, 1))))
    with pytest.raises(ShapeError):
        perceptual_loss(Tensor(np.zeros((1, 1, 8, 8, 1))), Tensor(np.zeros((1, 2, 8, 8, 1))), FeatureNet())


def test_perceptual_is_average_of_views(rng):
    phi = FeatureNet(dtype=np.float64)
    a = rng.uniform(size=(2, 3, 16, 16, 1))
    b = rng.uniform(size=(2, 3, 16, 16, 1))
    whole = perceptual_loss(Tensor(a), Tensor(b), phi).item()
    per = [perceptual_loss(Tensor(a[s:s + 1, t:t + 1]), Tensor(b[s:s + 1, t:t + 1]), phi).item()
           for s in range(2) for t in range(3)]
    assert abs(whole - np.mean(per)) < 1e-12 * max(1.0, whole)


def test_feature_net_deterministic_and_shape(rng):
    x = Tensor(rng.uniform(size=(1, 2, 16, 16, 1)))
    f1 = FeatureNet(seed=7)(x).data
    f2 = FeatureNet(seed=7)(x).data
    assert f1.shape == (1, 2, 2, 2, 32)
    np.testing.assert_array_equal(f1, f2)
    assert not np.array_equal(f1, FeatureNet(seed=8)(x).data)
    # views never mix: feature of one view ignores its neighbours
    y = x.data.copy()
    y[0, 1] += 1.0
    np.testing.assert_array_equal(FeatureNet(seed=7)(Tensor(y)).data[0, 0], f1[0, 0])


def test_feature_net_loaded_weights(rng):
    phi = FeatureNet(seed=3)
    clone = FeatureNet(weights=[(k.weight.data, k.bias.data) for k in phi.stages])
    x = Tensor(rng.uniform(size=(1, 1, 8, 8, 1)).astype(np.float32))
    np.testing.assert_array_equal(phi(x).data, clone(x).data)
    with pytest.raises(ShapeError):
        FeatureNet(in_channels=3, weights=[(k.weight.data, k.bias.data) for k in phi.stages])


def test_total_loss_and_weights():
    assert total_loss(2.0, 3.0, LossWeights(1.0, 0.01)) == pytest.approx(2.03, abs=1e-15)
    assert total_loss(2.0, 3.0, LossWeights(1.0, 0.0)) == 2.0
    for bad in ((-1, 1), (1, -0.1), (0, 0)):
        with pytest.raises(ConfigError):
            LossWeights(*bad)


def test_total_gradient_is_weighted_sum(rng):
    phi = FeatureNet(dtype=np.float64)
    p = Tensor(rng.uniform(size=(1, 2, 8, 8, 1)), requires_grad=True)
    t = Tensor(rng.uniform(size=(1, 2, 8, 8, 1)))
    w = LossWeights(0.7, 0.3)

    def grad(fn):
        with Tape() as tape:
            loss = fn()
        return backward(tape, loss, [p])[p]

    g_r = grad(lambda: reconstruction_loss(p, t))
    g_p = grad(lambda: perceptual_loss(p, t, phi))
    g = grad(lambda: total_loss(reconstruction_loss(p, t), perceptual_loss(p, t, phi), w))
    np.testing.assert_allclose(g, 0.7 * g_r + 0.3 * g_p, rtol=1e-10, atol=1e-14)


# --- metrics -----------------------------------------------------------------------------------

def test_psnr_values(rng):
    a = rng.uniform(0, 255, (16, 16))
    assert psnr(a, a) == math.inf
    assert psnr(a, a + 1.0) == pytest.approx(48.13080360867910, abs=1e-10)
    e = rng.standard_normal(a.shape)
    assert psnr(a, a + e / 2) - psnr(a, a + e) == pytest.approx(20 * math.log10(2), abs=1e-9)
    with pytest.raises(ShapeError):
        psnr(a, a[:4])


def test_ssim_identity_and_inverted(rng):
    a = rng.uniform(0, 255, (20, 18))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    inv = 255.0 - a
    got = ssim(a, inv)
    assert got < 0.5
    assert got == pytest.approx(ssim_naive(a, inv), abs=1e-12)


def test_ssim_random_pair_matches_scalar_reference(rng):
    a = rng.uniform(0, 255, (14, 13))
    b = np.clip(a + rng.normal(0, 20, a.shape), 0, 255)
    assert ssim(a, b) == pytest.approx(ssim_naive(a, b), abs=1e-12)


def test_ssim_matches_scikit_image(rng):
    skm = pytest.importorskip("skimage.metrics")
    a = rng.uniform(0, 255, (40, 36))
    b = np.clip(a + rng.normal(0, 15, a.shape), 0, 255)
    ref = skm.structural_similarity(a, b, data_range=255, gaussian_weights=True, sigma=1.5,
                                    use_sample_covariance=False)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-9)


def test_ssim_continuity_near_constant():
    a = np.full((12, 12), 100.0)
    vals = [ssim(a, a + d) for d in (1.0, 0.1, 0.01, 0.0)]
    assert vals == sorted(vals) and vals[-1] == 1.0
    assert 1.0 - vals[2] < 1e-6


def test_ssim_small_image_rejected():
    with pytest.raises(ConfigError):
        ssim(np.zeros((10, 20)), np.zeros((10, 20)))


def test_to_luma(rng):
    rgb = rng.uniform(size=(2, 3, 3))
    np.testing.assert_allclose(to_luma(rgb), 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2])


def test_eval_modes(rng):
    truth = LightField(rng.uniform(0, 255, (3, 3, 12, 12, 1)))
    pred = LightField(np.clip(truth.data + rng.normal(0, 3, truth.shape), 0, 255))
    rep = eval_lf(truth, truth)
    assert len(rep.views) == 9 and rep.mean_psnr == math.inf and rep.mean_ssim == pytest.approx(1.0)
    part = eval_lf(pred, truth, "synthesized-only", ([0, 2], [0, 2]))
    assert len(part.views) == 5
    assert (0, 0) not in {(v.s, v.t) for v in part.views}
    text = part.to_text()
    assert text.startswith("mode synthesized-only") and "average psnr" in text
    tsv = part.to_tsv().splitlines()
    assert tsv[0] == "s\tt\tpsnr\tssim" and tsv[-1].startswith("mean\tmean")
    with pytest.raises(ConfigError):
        eval_lf(pred, truth, "synthesized-only")
    with pytest.raises(ShapeError):
        eval_lf(pred, LightField(truth.data[:2]))
