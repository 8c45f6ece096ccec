import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gray_image
from morphkit.errors import EmptyIntersection
from morphkit.image import (
    ImageBuffer,
    bilinear_sample,
    crop_and_resize,
    flip_horizontal,
    quantize,
    read_png,
    to_grayscale,
    write_png,
)
from morphkit.manifest import BoundingBox
from oracles import bilinear_at


def test_quantize_rounds_half_up():
    values = np.array([0.0, 0.4, 0.5, 1.5, 127.5, 254.49, 254.5, 300.0, -5.0])
    expected = np.array([0, 0, 1, 2, 128, 254, 255, 255, 0], dtype=np.uint8)
    assert np.array_equal(quantize(values), expected)


def test_grayscale_weights():
    img = ImageBuffer(np.array([[[255, 255, 255], [255, 0, 0],
                                 [0, 255, 0], [0, 0, 255]]], dtype=np.uint8))
    gray = to_grayscale(img)
    # 0.299 R + 0.587 G + 0.114 B, round-half-up
    assert gray.pixels[0, :, 0].tolist() == [255, 76, 150, 29]


def test_grayscale_passthrough_is_bitwise():
    img = gray_image(np.arange(12, dtype=np.uint8).reshape(3, 4))
    out = to_grayscale(img)
    assert np.array_equal(out.pixels, img.pixels)
    assert out.pixels is not img.pixels


def test_flip_horizontal_swaps_columns():
    img = gray_image([[10, 20]])
    assert flip_horizontal(img).pixels[:, :, 0].tolist() == [[20, 10]]


def test_flip_is_involution():
    rng = np.random.Generator(np.random.PCG64(0))
    img = ImageBuffer(rng.integers(0, 256, (7, 5, 3), dtype=np.uint8))
    assert np.array_equal(flip_horizontal(flip_horizontal(img)).pixels, img.pixels)


def test_flip_constant_is_identity():
    img = gray_image(np.full((4, 6), 33))
    assert np.array_equal(flip_horizontal(img).pixels, img.pixels)


def test_crop_identity_is_pixel_exact():
    rng = np.random.Generator(np.random.PCG64(1))
    img = ImageBuffer(rng.integers(0, 256, (9, 13, 3), dtype=np.uint8))
    out = crop_and_resize(img, img.full_box(), img.width, img.height)
    assert np.array_equal(out.pixels, img.pixels)


def test_downscale_midpoint():
    img = gray_image([[0, 0], [255, 255]])
    out = crop_and_resize(img, img.full_box(), 1, 1)
    assert out.pixels[0, 0, 0] == 128  # bilinear midpoint 127.5 rounds up


def test_crop_clamps_box_to_image():
    img = gray_image(np.full((4, 4), 200))
    out = crop_and_resize(img, BoundingBox(-10, -10, 100, 100), 8, 8)
    assert out.width == 8 and out.height == 8
    assert np.all(out.pixels == 200)


def test_empty_intersection_raises():
    img = gray_image(np.zeros((4, 4)))
    with pytest.raises(EmptyIntersection):
        crop_and_resize(img, BoundingBox(10, 10, 5, 5), 2, 2)


def test_bilinear_matches_scalar_reference():
    rng = np.random.Generator(np.random.PCG64(2))
    pixels = rng.uniform(0, 255, (6, 7, 1))
    xs = rng.uniform(-1.0, 8.0, 40)
    ys = rng.uniform(-1.0, 7.0, 40)
    fast = bilinear_sample(pixels, xs, ys)
    for k in range(len(xs)):
        slow = bilinear_at(pixels, xs[k], ys[k])
        assert fast[k] == pytest.approx(slow, abs=1e-12)


def test_bilinear_clamps_to_edges():
    pixels = np.array([[[10.0], [20.0]], [[30.0], [40.0]]])
    far = bilinear_sample(pixels, np.array([-100.0]), np.array([-100.0]))
    assert far[0, 0] == 10.0
    far = bilinear_sample(pixels, np.array([100.0]), np.array([100.0]))
    assert far[0, 0] == 40.0


@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 10), st.integers(1, 10))
@settings(max_examples=25, deadline=None)
def test_output_size_is_exact(in_w, in_h, out_w, out_h):
    img = gray_image(np.zeros((in_h, in_w)))
    out = crop_and_resize(img, img.full_box(), out_w, out_h)
    assert (out.width, out.height, out.channels) == (out_w, out_h, 1)


def test_png_round_trip(tmp_path):
    rng = np.random.Generator(np.random.PCG64(3))
    for channels in (1, 3):
        img = ImageBuffer(rng.integers(0, 256, (11, 9, channels), dtype=np.uint8))
        path = tmp_path / f"img{channels}.png"
        write_png(img, path)
        loaded = read_png(path)
        assert np.array_equal(loaded.pixels, img.pixels)


def test_image_buffer_validates_shape():
    with pytest.raises(ValueError):
        ImageBuffer(np.zeros((4, 4, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        ImageBuffer(np.zeros((4, 4), dtype=np.float64))
