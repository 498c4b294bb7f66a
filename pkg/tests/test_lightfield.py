import struct

import numpy as np
import pytest

from hrolf.errors import ConfigError, FormatError, RangeError, ShapeError
from hrolf.lightfield import (LightField, center_index, crop_patch, decode_lf4, encode_lf4, extract_epi,
                              load_lightfield, save_lightfield)
from hrolf.synth import Layer, SynthConfig, synth_scene


def test_construction_and_accessors(rng):
    lf = LightField(rng.uniform(0, 255, (3, 5, 8, 6)))
    assert lf.shape == (3, 5, 8, 6, 1)
    assert lf.angular == (3, 5) and lf.spatial == (8, 6)
    assert lf.center() == (1, 2)
    assert lf.view(0, 0).shape == (8, 6, 1)
    assert lf.data.dtype == np.float64
    assert LightField(np.zeros((1, 1, 2, 2), np.uint8)).data.dtype == np.float32


def test_immutable(rng):
    lf = LightField(rng.uniform(size=(2, 2, 3, 3, 1)))
    with pytest.raises(ValueError):
        lf.data[0, 0, 0, 0, 0] = 1.0
    with pytest.raises(AttributeError):
        lf.foo = 1


@pytest.mark.parametrize("bad", [np.zeros((2, 2, 3)), np.zeros((2, 2, 3, 3, 2)), np.full((1, 1, 2, 2, 1), np.nan)])
def test_rejects_invalid(bad):
    with pytest.raises(ShapeError):
        LightField(bad)


def test_center_index():
    assert [center_index(n) for n in (1, 2, 3, 8, 9)] == [0, 0, 1, 3, 4]


def test_lf4_round_trip_bit_exact(rng, tmp_path):
    lf = LightField(rng.uniform(0, 255, (3, 3, 8, 8, 1)).astype(np.float32))
    save_lightfield(lf, tmp_path / "a.lf4")
    back = load_lightfield(tmp_path / "a.lf4")
    assert back == lf
    assert back.data.tobytes() == lf.data.tobytes()


def test_lf4_header_layout(rng):
    lf = LightField(rng.uniform(0, 255, (2, 3, 4, 5, 3)).astype(np.float32))
    buf = encode_lf4(lf)
    magic, version, S, T, X, Y, C, code = struct.unpack_from("<4sIIIIIIB", buf)
    assert (magic, version, S, T, X, Y, C, code) == (b"LF4\0", 1, 2, 3, 4, 5, 3, 0)
    body = np.frombuffer(buf[struct.calcsize("<4sIIIIIIB"):], "<f4").reshape(2, 3, 5, 4, 3)
    # payload is stored y-major within each view
    np.testing.assert_array_equal(body.transpose(0, 1, 3, 2, 4), lf.data)


def test_lf4_u8_rounds_and_clamps():
    vals = np.array([-3.0, 0.49, 0.5, 1.5, 254.6, 300.0]).reshape(1, 1, 6, 1, 1)
    back = decode_lf4(encode_lf4(LightField(vals), "u8"))
    assert back.data.ravel().tolist() == [0, 0, 1, 2, 255, 255]


@pytest.mark.parametrize("mutate,field", [
    (lambda b: b[:10], "header"),
    (lambda b: b"XXXX" + b[4:], "magic"),
    (lambda b: b[:4] + struct.pack("<I", 9) + b[8:], "version"),
    (lambda b: b[:28] + bytes([7]) + b[29:], "dtype"),
    (lambda b: b[:-4], "payload"),
    (lambda b: b[:8] + struct.pack("<I", 0) + b[12:], "dims"),
])
def test_lf4_corruption_names_field(rng, mutate, field):
    buf = encode_lf4(LightField(rng.uniform(size=(2, 2, 3, 3, 1))))
    with pytest.raises(FormatError, match=field):
        decode_lf4(mutate(buf))


def test_view_directory_round_trip(rng, tmp_path):
    vals = np.floor(rng.uniform(0, 255, (2, 3, 5, 4, 3)))
    lf = LightField(vals)
    save_lightfield(lf, tmp_path / "views", "view-directory")
    names = sorted(p.name for p in (tmp_path / "views").iterdir())
    assert "view_01_02.png" in names and "manifest.txt" in names
    back = load_lightfield(tmp_path / "views")
    np.testing.assert_array_equal(back.data, vals)


def test_view_directory_without_manifest(rng, tmp_path):
    lf = LightField(np.floor(rng.uniform(0, 255, (2, 2, 4, 6, 1))))
    save_lightfield(lf, tmp_path / "v", "view-directory")
    (tmp_path / "v" / "manifest.txt").unlink()
    back = load_lightfield(tmp_path / "v")
    np.testing.assert_array_equal(back.data, lf.data)


def test_view_directory_missing_view(rng, tmp_path):
    save_lightfield(LightField(rng.uniform(0, 255, (2, 2, 4, 4, 1))), tmp_path / "v", "view-directory")
    (tmp_path / "v" / "view_01_01.png").unlink()
    with pytest.raises(FormatError, match="view_01_01"):
        load_lightfield(tmp_path / "v")


def test_unknown_format(tmp_path, rng):
    with pytest.raises(ConfigError):
        save_lightfield(LightField(rng.uniform(size=(1, 1, 2, 2))), tmp_path / "x", "tiff")


def test_crop_patch(rng):
    lf = LightField(rng.uniform(size=(2, 2, 128, 128, 1)))
    p = crop_patch(lf, 10, 20, 96, 96)
    assert p.shape == (2, 2, 96, 96, 1)
    with pytest.raises(RangeError):
        crop_patch(lf, 40, 0, 96, 96)


def test_overlapping_crops_agree(rng):
    lf = LightField(rng.uniform(size=(2, 2, 20, 20, 1)))
    a = crop_patch(lf, 2, 3, 10, 10).data
    b = crop_patch(lf, 6, 5, 10, 10).data
    np.testing.assert_array_equal(a[:, :, 4:, 2:], b[:, :, :6, :8])


def test_epi_orientation_and_shapes(rng):
    lf = LightField(rng.uniform(size=(3, 5, 7, 9, 1)))
    h = extract_epi(lf, "horizontal", 4, 2)
    v = extract_epi(lf, "vertical", 6, 1)
    assert h.values.shape == (7, 3) and v.values.shape == (9, 5)
    np.testing.assert_array_equal(h.values[:, 1], lf.data[1, 2, :, 4, 0])
    np.testing.assert_array_equal(v.values[:, 3], lf.data[1, 3, 6, :, 0])
    with pytest.raises(RangeError):
        extract_epi(lf, "horizontal", 9, 0)
    with pytest.raises(ConfigError):
        extract_epi(lf, "diagonal", 0, 0)


def test_epi_slope_matches_disparity():
    # a single plane with disparity 1 shifts one pixel per view step along x
    cfg = SynthConfig(layers=(Layer(1.0),), S=5, T=1, X=24, Y=4)
    lf, _ = synth_scene(cfg, seed=3)
    epi = extract_epi(lf, "horizontal", 2, 0).values  # X x S
    for s in range(4):
        np.testing.assert_allclose(epi[:-5, s + 1], epi[1:-4, s], atol=1e-9)
