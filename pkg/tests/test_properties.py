"""Invariants checked on generated inputs."""

import math

import numpy as np
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hrolf.autodiff import Tensor
from hrolf.degrade import DegradationConfig, degrade_spatial, task_indices
from hrolf.lightfield import LightField, crop_patch, decode_lf4, encode_lf4
from hrolf.losses import reconstruction_loss
from hrolf.metrics import psnr, ssim
from hrolf.ops import Kernel4D, agbn, angular_linear_interp, hconv4d, pixel_shuffle_spatial, pixel_unshuffle_spatial
from hrolf.synth import Layer, SynthConfig, synth_scene
from hrolf.train import TrainConfig, lr_schedule

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False, width=64)
seeds = st.integers(0, 2 ** 31 - 1)


@st.composite
def fields(draw, max_ang=3, max_sp=6, channels=(1, 3)):
    S, T = draw(st.integers(1, max_ang)), draw(st.integers(1, max_ang))
    X, Y = draw(st.integers(1, max_sp)), draw(st.integers(1, max_sp))
    C = draw(st.sampled_from(channels))
    data = draw(arrays(np.float32, (S, T, X, Y, C), elements=st.floats(0, 255, width=32)))
    return LightField(data)


@given(fields())
def test_lf4_round_trip(lf):
    assert decode_lf4(encode_lf4(lf)) == lf


@given(fields(max_sp=8), st.data())
def test_crop_is_a_view_window(lf, data):
    w = data.draw(st.integers(1, lf.X))
    h = data.draw(st.integers(1, lf.Y))
    x0 = data.draw(st.integers(0, lf.X - w))
    y0 = data.draw(st.integers(0, lf.Y - h))
    p = crop_patch(lf, x0, y0, w, h)
    assert p.angular == lf.angular and p.spatial == (w, h)
    np.testing.assert_array_equal(p.data, lf.data[:, :, x0:x0 + w, y0:y0 + h])


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_hconv_is_linear_in_input(seed, ci, co):
    rng = np.random.default_rng(seed)
    k = Kernel4D(Tensor(rng.standard_normal((3, 1, 3, 1, ci, co))), Tensor(np.zeros(co)))
    a, b = rng.standard_normal((2, 2, 3, 3, ci)), rng.standard_normal((2, 2, 3, 3, ci))
    lhs = hconv4d(Tensor(2.0 * a - b), k).data
    rhs = 2.0 * hconv4d(Tensor(a), k).data - hconv4d(Tensor(b), k).data
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


@given(seeds, st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_shuffle_unshuffle_inverse(seed, r, x, c):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 1, x, x + 1, c * r * r))
    np.testing.assert_array_equal(pixel_unshuffle_spatial(pixel_shuffle_spatial(Tensor(a), r), r).data, a)


@given(seeds, st.integers(2, 4), st.integers(2, 4), st.integers(0, 2), st.integers(0, 2))
def test_interp_preserves_constants_and_endpoints(seed, s_in, t_in, ds, dt):
    rng = np.random.default_rng(seed)
    s_out, t_out = s_in + ds * (s_in - 1), t_in + dt * (t_in - 1)
    a = rng.standard_normal((s_in, t_in, 2, 2, 1))
    out = angular_linear_interp(Tensor(a), s_out, t_out).data
    np.testing.assert_array_equal(out[::ds + 1, ::dt + 1], a)
    const = angular_linear_interp(Tensor(np.full((s_in, t_in, 1, 1, 1), 3.25)), s_out + 1, t_out + 1).data
    np.testing.assert_allclose(const, 3.25, rtol=1e-15)


@given(seeds, st.floats(0.5, 20), st.floats(-50, 50))
def test_agbn_invariant_to_affine_input(seed, scale, shift):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 2, 3, 3, 2)) * 4
    g, b = Tensor(rng.standard_normal(2)), Tensor(rng.standard_normal(2))
    a = agbn(Tensor(x), g, b, eps=1e-12).data
    c = agbn(Tensor(x * scale + shift), g, b, eps=1e-12).data
    np.testing.assert_allclose(a, c, rtol=1e-7, atol=1e-7)


@given(seeds, st.sampled_from([1, 2, 4]), st.floats(0.1, 10))
def test_noise_free_degradation_is_linear(seed, scale, gain):
    rng = np.random.default_rng(seed)
    lf = rng.uniform(0, 255, (2, 1, 8, 8, 1))
    cfg = DegradationConfig(scale, noise_std=0.0)
    a = degrade_spatial(LightField(lf * gain), cfg).data
    b = degrade_spatial(LightField(lf), cfg).data * gain
    np.testing.assert_allclose(a, b, rtol=1e-12)


@given(st.integers(1, 6), st.integers(1, 5))
def test_task_indices_uniform_endpoint_inclusive(k, step):
    n = (k - 1) * step + 1
    idx = task_indices(n, k)
    assert len(idx) == k and idx[0] == (0 if k > 1 else (n - 1) // 2)
    if k > 1:
        assert idx[-1] == n - 1 and len(set(np.diff(idx))) == 1


@given(st.integers(0, 200), st.integers(1, 20))
def test_lr_schedule_step_shape(epoch, every):
    cfg = TrainConfig(lr0=0.5, decay=0.1, decay_every=every)
    lr = lr_schedule(epoch, cfg)
    assert math.isclose(lr, 0.5 * 0.1 ** (epoch // every), rel_tol=1e-12)
    assert lr_schedule(epoch + 1, cfg) <= lr


@given(arrays(np.float64, (1, 2, 3, 3, 1), elements=finite), arrays(np.float64, (1, 2, 3, 3, 1), elements=finite))
def test_reconstruction_loss_nonnegative(a, b):
    v = reconstruction_loss(Tensor(a), Tensor(b)).item()
    assert v >= 0
    assert (v == 0) == np.array_equal(a, b)


@given(seeds, st.floats(1, 60))
def test_psnr_ssim_symmetric(seed, noise):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 255, (12, 12))
    b = np.clip(a + rng.normal(0, noise, a.shape), 0, 255)
    assert psnr(a, b) == psnr(b, a)
    assert abs(ssim(a, b) - ssim(b, a)) < 1e-12
    assert ssim(a, b) <= 1.0


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_zero_disparity_scene_has_identical_views(seed, S, T):
    lf, disp = synth_scene(SynthConfig(layers=(Layer(0.0),), S=S, T=T, X=6, Y=5), seed)
    assert np.all(lf.data == lf.data[:1, :1])
    assert not disp.any()
