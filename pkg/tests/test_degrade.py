import math

import numpy as np
import pytest

from oracles import degrade_naive, gaussian_weights_naive
from hrolf.degrade import (DegradationConfig, decimate_angular, degrade_spatial, gaussian_kernel, parse_angular_target,
                           task_indices, view_noise)
from hrolf.errors import ConfigError, RangeError
from hrolf.lightfield import LightField


def test_kernel_normalized_and_center_weight():
    k = gaussian_kernel(7, 1.2)
    assert abs(k.sum() - 1.0) < 1e-12
    direct = gaussian_weights_naive(7, 1.2)[3][3]
    assert abs(k[3, 3] - direct) < 1e-12
    # frozen value of the direct evaluation
    assert abs(k[3, 3] - 0.11112038276415147) < 1e-12


def test_kernel_rejects_even_or_nonpositive():
    with pytest.raises(ConfigError):
        gaussian_kernel(6, 1.0)
    with pytest.raises(ConfigError):
        gaussian_kernel(7, 0.0)


def test_degrade_matches_loop_oracle(rng):
    hr = rng.uniform(0, 255, (2, 2, 12, 10, 1))
    cfg = DegradationConfig(2, 7, 1.2, 1.0, 11)
    out = degrade_spatial(LightField(hr), cfg).data
    noise = np.empty((2, 2, 6, 5, 1))
    children = np.random.SeedSequence(11).spawn(4)
    for k, child in enumerate(children):
        noise[k // 2, k % 2] = np.random.default_rng(child).normal(0, 1.0, (6, 5, 1))
    ref = degrade_naive(hr, 7, 1.2, 2, noise)
    assert np.max(np.abs(out - ref)) / np.max(np.abs(ref)) < 1e-12


def test_shapes_and_constant_field():
    lf = LightField(np.full((2, 2, 64, 64, 1), 93.0))
    out = degrade_spatial(lf, DegradationConfig(2, noise_std=0.0))
    assert out.shape == (2, 2, 32, 32, 1)
    np.testing.assert_allclose(out.data, 93.0, rtol=1e-14)


def test_noise_free_deterministic_and_noise_seeded(rng):
    lf = LightField(rng.uniform(0, 255, (2, 2, 16, 16, 1)))
    a = degrade_spatial(lf, DegradationConfig(4, noise_std=0.0))
    b = degrade_spatial(lf, DegradationConfig(4, noise_std=0.0))
    assert a == b
    c = degrade_spatial(lf, DegradationConfig(2, noise_seed=1))
    d = degrade_spatial(lf, DegradationConfig(2, noise_seed=1))
    e = degrade_spatial(lf, DegradationConfig(2, noise_seed=2))
    assert c == d and not np.array_equal(c.data, e.data)


def test_view_noise_streams_independent():
    n = view_noise((3, 3, 64, 64, 1), 1.0, 0)
    assert abs(n.std() - 1.0) < 0.02
    assert not np.array_equal(n[0, 0], n[0, 1])
    corr = np.corrcoef(n[0, 0].ravel(), n[1, 1].ravel())[0, 1]
    assert abs(corr) < 0.1


def test_dtype_preserved(rng):
    lf = LightField(rng.uniform(0, 255, (1, 1, 8, 8, 1)).astype(np.float32))
    assert degrade_spatial(lf, DegradationConfig(2)).data.dtype == np.float32


def test_indivisible_rejected(rng):
    with pytest.raises(ConfigError):
        degrade_spatial(LightField(rng.uniform(size=(1, 1, 9, 8, 1))), DegradationConfig(2))


@pytest.mark.parametrize("n,k,idx", [(9, 3, [0, 4, 8]), (8, 2, [0, 7]), (9, 5, [0, 2, 4, 6, 8]), (5, 5, [0, 1, 2, 3, 4]),
                                     (9, 1, [4])])
def test_task_indices(n, k, idx):
    assert task_indices(n, k) == idx


def test_task_indices_non_uniform():
    with pytest.raises(RangeError):
        task_indices(8, 3)
    with pytest.raises(RangeError):
        task_indices(3, 5)


def test_decimate_angular(rng):
    lf = LightField(rng.uniform(size=(9, 9, 4, 4, 1)))
    out = decimate_angular(lf, "3x3")
    assert out.angular == (3, 3)
    np.testing.assert_array_equal(out.data, lf.data[::4, ::4])
    two = decimate_angular(LightField(rng.uniform(size=(8, 8, 2, 2, 1))), (2, 2))
    assert two.angular == (2, 2)
    explicit = decimate_angular(lf, ([0, 8], [4]))
    np.testing.assert_array_equal(explicit.data, lf.data[[0, 8]][:, [4]])
    with pytest.raises(RangeError):
        decimate_angular(lf, ([0, 9], [0]))
    with pytest.raises(ConfigError):
        parse_angular_target("three")
