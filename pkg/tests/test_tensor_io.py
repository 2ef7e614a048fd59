import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from pffl.errors import BadMagic, DimensionOverflow, UnsupportedPng
from pffl.tensor_io import (HEADER, NormalizationSpec, decode_tensor, denormalize, encode_tensor,
                            load_png, normalize, read_tensor, save_png, to_luminance, write_tensor)


def _png(path, arr, mode):
    Image.fromarray(arr, mode=mode).save(path)
    return path


def test_load_black_and_white(tmp_path):
    black = load_png(_png(tmp_path / "k.png", np.zeros((2, 2), np.uint8), "L"))
    white = load_png(_png(tmp_path / "w.png", np.full((2, 2, 3), 255, np.uint8), "RGB"))
    assert black.shape == (1, 2, 2) and np.all(black == 0.0)
    assert white.shape == (3, 2, 2) and np.all(white == 1.0)


def test_load_byte_128(tmp_path):
    img = load_png(_png(tmp_path / "g.png", np.full((2, 2), 128, np.uint8), "L"))
    assert img[0, 0, 0] == pytest.approx(128 / 255)


@pytest.mark.parametrize("mode, shape", [("RGBA", (4, 4, 4)), ("LA", (4, 4, 2)), ("P", (4, 4))])
def test_load_rejects_alpha_and_palette(tmp_path, mode, shape):
    p = tmp_path / "x.png"
    Image.fromarray(np.zeros(shape, np.uint8), mode=mode).save(p)
    with pytest.raises(UnsupportedPng):
        load_png(p)


def test_load_rejects_16_bit(tmp_path):
    p = tmp_path / "x.png"
    Image.fromarray(np.zeros((4, 4), np.uint16)).save(p)
    with pytest.raises(UnsupportedPng):
        load_png(p)


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_png(tmp_path / "nope.png")


def test_save_clamps(tmp_path):
    img = np.array([[[1.5, -0.2], [0.0, 1.0]]])
    save_png(img, tmp_path / "c.png")
    raw = np.asarray(Image.open(tmp_path / "c.png"))
    assert raw.tolist() == [[255, 0], [0, 255]]


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    for c in (1, 3):
        x = rng.uniform(0, 1, (c, 9, 12))
        save_png(x, tmp_path / "r.png")
        y = load_png(tmp_path / "r.png")
        assert np.max(np.abs(y - x)) < 1 / 255


def test_tensor_file_size(tmp_path):
    p = tmp_path / "t.pft"
    write_tensor(np.zeros((3, 8, 8)), p)
    # 4 magic + 1 rank + 3 * 4 dims = 17 header bytes
    assert HEADER.size == 17
    assert os.path.getsize(p) == 17 + 3 * 8 * 8 * 4


def test_tensor_header_layout():
    buf = encode_tensor(np.zeros((1, 2, 3), np.float32))
    assert buf[:4] == b"PFT1" and buf[4] == 3
    assert int.from_bytes(buf[5:9], "little") == 1
    assert int.from_bytes(buf[9:13], "little") == 2
    assert int.from_bytes(buf[13:17], "little") == 3


@settings(max_examples=50, deadline=None)
@given(arrays(np.float32, st.tuples(st.sampled_from([1, 3]), st.integers(1, 9), st.integers(1, 9)),
              elements=st.floats(-1e6, 1e6, width=32)))
def test_tensor_round_trip_bitwise(x):
    y = decode_tensor(encode_tensor(x))
    assert y.dtype == np.float32
    assert y.tobytes() == x.tobytes()


def test_tensor_file_round_trip(tmp_path):
    x = np.random.default_rng(0).standard_normal((3, 8, 8)).astype(np.float32)
    write_tensor(x, tmp_path / "x.pft")
    assert read_tensor(tmp_path / "x.pft").tobytes() == x.tobytes()


def test_tensor_malformed():
    good = encode_tensor(np.ones((1, 4, 4), np.float32))
    with pytest.raises(BadMagic):
        decode_tensor(b"XXXX" + good[4:])
    with pytest.raises(BadMagic):
        decode_tensor(good[:-3])
    with pytest.raises(BadMagic):
        decode_tensor(good[:10])
    with pytest.raises(BadMagic):
        decode_tensor(good[:4] + bytes([2]) + good[5:])


def test_tensor_dimension_overflow():
    hdr = HEADER.pack(b"PFT1", 3, 1 << 16, 1 << 16, 1 << 16)
    with pytest.raises(DimensionOverflow):
        decode_tensor(hdr)


def test_normalize_identity_and_mean():
    x = np.random.default_rng(1).uniform(0, 1, (3, 8, 8))
    assert np.array_equal(normalize(x, NormalizationSpec.identity()), x)
    spec = NormalizationSpec()
    at_mean = np.broadcast_to(np.array(spec.mean)[:, None, None], (3, 8, 8))
    assert np.allclose(normalize(at_mean, spec), 0.0, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 8, 8), elements=st.floats(0, 1)))
def test_normalize_inverse(x):
    spec = NormalizationSpec()
    assert np.allclose(denormalize(normalize(x, spec), spec), x, atol=1e-6)
    assert np.allclose(normalize(denormalize(x, spec), spec), x, atol=1e-6)


def test_normalize_grayscale_uses_first_channel():
    spec = NormalizationSpec()
    x = np.full((1, 8, 8), 0.5)
    assert np.allclose(normalize(x, spec), (0.5 - spec.mean[0]) / spec.std[0])


def test_luminance():
    g = np.random.default_rng(2).uniform(0, 1, (1, 8, 8))
    assert np.array_equal(to_luminance(g), g[0])
    assert np.allclose(to_luminance(np.ones((3, 8, 8))), 1.0)
    red = np.zeros((3, 8, 8))
    red[0] = 1
    assert np.allclose(to_luminance(red), 0.299)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 8, 8), elements=st.floats(0, 1)))
def test_luminance_in_range(x):
    y = to_luminance(x)
    assert y.min() >= 0 and y.max() <= 1 + 1e-12


def test_normalization_spec_validates():
    with pytest.raises(ValueError):
        NormalizationSpec(std=(0.1, 0.0, 0.2))
