import numpy as np
import pytest

from hrolf.baseline import baseline, upsample_angular, upsample_spatial
from hrolf.degrade import DegradationConfig, degrade_spatial
from hrolf.errors import ConfigError
from hrolf.lightfield import LightField
from hrolf.metrics import eval_lf, psnr
from hrolf.synth import synth_scene, two_layer_config


def test_constant_field_stays_constant():
    lf = LightField(np.full((2, 2, 8, 8, 1), 77.0))
    for method in ("bicubic", "linear"):
        out = upsample_spatial(lf, 2, method)
        assert out.shape == (2, 2, 16, 16, 1)
        np.testing.assert_allclose(out.data, 77.0, atol=1e-3)


def test_lr_samples_land_on_hr_grid(rng):
    # with top-left anchoring LR sample k sits at HR index scale*k, so a linear ramp is reproduced there
    x = np.arange(8.0)[:, None] * np.ones(8)[None, :]
    lf = LightField((x * 10 + 5)[None, None, :, :, None])
    out = upsample_spatial(lf, 2, "linear").data[0, 0, :, :, 0]
    np.testing.assert_allclose(out[:14:2, 3], lf.data[0, 0, :7, 1, 0], atol=1e-3)


def test_baseline_beats_nothing_but_not_truth():
    hr, _ = synth_scene(two_layer_config(3, 3, 32, 32), 0)
    lr = degrade_spatial(hr, DegradationConfig(2, noise_seed=1))
    up = baseline(lr, 2)
    base = eval_lf(up, hr).mean_psnr
    assert 15 < base < eval_lf(hr, hr).mean_psnr
    nn = LightField(np.repeat(np.repeat(lr.data, 2, axis=2), 2, axis=3))
    assert base > psnr(nn.data, hr.data)


def test_angular_baseline(rng):
    lf = LightField(rng.uniform(0, 255, (3, 3, 4, 4, 1)))
    out = baseline(lf, 1, (5, 5))
    assert out.shape == (5, 5, 4, 4, 1)
    np.testing.assert_array_equal(out.data[::2, ::2], lf.data)
    np.testing.assert_array_equal(upsample_angular(lf, 3, 3).data, lf.data)


def test_bad_method():
    with pytest.raises(ConfigError):
        upsample_spatial(LightField(np.zeros((1, 1, 4, 4, 1))), 2, "lanczos")
