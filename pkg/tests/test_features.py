import numpy as np
import pytest

from conftest import gray_image
from morphkit.errors import ImageTooSmall, ParseError
from morphkit.features import (
    LBP_BINS,
    NEIGHBOR_OFFSETS,
    UNIFORM_BIN_TABLE,
    extract_from_image,
    extract_lbp_histogram,
    lbp_code,
    lbp_code_image,
    load_features,
    parse_profile,
    save_features,
)
from morphkit.image import ImageBuffer, flip_horizontal
from oracles import CODE_TO_BIN, LBP_OFFSETS, UNIFORM_CODES, naive_lbp_histogram


def test_bin_layout_matches_independent_table():
    assert LBP_BINS == 59
    assert len(UNIFORM_CODES) == 58
    for code in range(256):
        expected = CODE_TO_BIN.get(code, 58)
        assert UNIFORM_BIN_TABLE[code] == expected


def test_lbp_code_tie_sets_bit():
    assert lbp_code(7, [7] * 8) == 255


def test_lbp_code_bit_order():
    # clockwise from top-left: (1,2,3,4) below center, (6,7,8,9) at or above
    assert lbp_code(5, [1, 2, 3, 4, 6, 7, 8, 9]) == 0b11110000


def test_lbp_code_all_below():
    assert lbp_code(255, [0] * 8) == 0


def test_lbp_code_image_offsets():
    # one hot neighbor at a time pins each bit to its image position
    for k, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
        img = np.full((3, 3), 100, dtype=np.uint8)
        img[1, 1] = 150
        img[1 + dy, 1 + dx] = 200
        codes = lbp_code_image(img)
        assert codes.shape == (1, 1)
        assert codes[0, 0] == 1 << k
        neighbors = [img[1 + oy, 1 + ox] for ox, oy in LBP_OFFSETS]
        assert lbp_code(150, neighbors) == 1 << k


def test_constant_image_is_one_hot_per_cell():
    img = gray_image(np.full((20, 20), 77))
    vec = extract_lbp_histogram(img, grid=(2, 2))
    blocks = vec.values.reshape(4, LBP_BINS)
    hot = CODE_TO_BIN[255]
    for block in blocks:
        assert block[hot] == 1.0
        assert block.sum() == 1.0


def test_vector_length_4x4():
    img = gray_image(np.zeros((40, 40)))
    vec = extract_lbp_histogram(img, grid=(4, 4))
    assert len(vec.values) == 944


def test_matches_naive_oracle():
    rng = np.random.Generator(np.random.PCG64(5))
    cases = [((20, 20), (2, 2)), ((13, 11), (3, 2)), ((34, 30), (4, 4)),
             ((9, 23), (2, 3))]
    for (w, h), grid in cases:
        pixels = rng.integers(0, 256, (h, w), dtype=np.uint8)
        vec = extract_lbp_histogram(gray_image(pixels), grid=grid)
        expected = naive_lbp_histogram(pixels, grid)
        assert np.array_equal(vec.values, expected)


def test_blocks_are_l1_normalized():
    rng = np.random.Generator(np.random.PCG64(6))
    img = gray_image(rng.integers(0, 256, (25, 31), dtype=np.uint8))
    vec = extract_lbp_histogram(img, grid=(3, 3))
    blocks = vec.values.reshape(9, LBP_BINS).astype(np.float64)
    assert np.allclose(blocks.sum(axis=1), 1.0, atol=1e-6)


def test_determinism():
    rng = np.random.Generator(np.random.PCG64(7))
    pixels = rng.integers(0, 256, (18, 18), dtype=np.uint8)
    a = extract_lbp_histogram(gray_image(pixels), grid=(2, 2))
    b = extract_lbp_histogram(gray_image(pixels.copy()), grid=(2, 2))
    assert a.values.tobytes() == b.values.tobytes()
    assert a.descriptor_id == b.descriptor_id


def _mirror_bin_map():
    """Bin permutation induced by column-mirroring: offsets map (dx,dy) -> (-dx,dy)."""
    bit_map = {}
    for k, (dx, dy) in enumerate(LBP_OFFSETS):
        bit_map[k] = LBP_OFFSETS.index((-dx, dy))
    def mirror_code(code):
        out = 0
        for k in range(8):
            if code >> k & 1:
                out |= 1 << bit_map[k]
        return out
    bin_map = np.arange(59)
    for code in range(256):
        src = CODE_TO_BIN.get(code, 58)
        dst = CODE_TO_BIN.get(mirror_code(code), 58)
        bin_map[src] = dst
    return bin_map


def test_flip_covariance():
    # grid chosen so cells tile the coded interior exactly
    rng = np.random.Generator(np.random.PCG64(8))
    img = gray_image(rng.integers(0, 256, (10, 18), dtype=np.uint8))
    gx, gy = 4, 2
    orig = extract_lbp_histogram(img, grid=(gx, gy)).values.reshape(gy, gx, 59)
    flip = extract_lbp_histogram(flip_horizontal(img), grid=(gx, gy)).values.reshape(gy, gx, 59)
    bin_map = _mirror_bin_map()
    permuted = np.zeros_like(orig)
    for b in range(59):
        permuted[:, :, bin_map[b]] = orig[:, :, b]
    assert np.array_equal(flip, permuted[:, ::-1, :])


def test_image_too_small():
    with pytest.raises(ImageTooSmall):
        extract_lbp_histogram(gray_image(np.zeros((10, 5))), grid=(4, 4))


def test_named_profiles():
    hrnet = parse_profile("hrnet")
    assert (hrnet.out_w, hrnet.out_h) == (256, 256)
    xception = parse_profile("xception")
    assert (xception.out_w, xception.out_h) == (299, 299)
    custom = parse_profile("lbp-3x2-64x48")
    assert custom.grid == (3, 2)
    assert (custom.out_w, custom.out_h) == (64, 48)
    assert custom.dim == 6 * 59
    with pytest.raises(ParseError):
        parse_profile("resnet")


def test_extract_from_image_resizes_first():
    rng = np.random.Generator(np.random.PCG64(9))
    img = ImageBuffer(rng.integers(0, 256, (50, 70, 3), dtype=np.uint8))
    profile = parse_profile("lbp-2x2-32x32")
    vec = extract_from_image(img, profile)
    assert len(vec.values) == profile.dim
    assert vec.descriptor_id == "lbp-2x2-32x32"


def test_feature_file_round_trip(tmp_path):
    rng = np.random.Generator(np.random.PCG64(10))
    entries = [(f"sample_{i}", rng.random(16).astype(np.float32)) for i in range(5)]
    entries.append(("sample_0#flip", rng.random(16).astype(np.float32)))
    path = tmp_path / "features.mkfv"
    save_features(entries, path)
    loaded = load_features(path)
    assert list(loaded) == [sid for sid, _ in entries]
    for sid, values in entries:
        assert np.array_equal(loaded[sid], values)


def test_feature_file_rejects_duplicates(tmp_path):
    path = tmp_path / "dup.mkfv"
    save_features([("a", np.zeros(4, dtype=np.float32)),
                   ("a", np.ones(4, dtype=np.float32))], path)
    with pytest.raises(ParseError):
        load_features(path)


def test_feature_file_bad_magic(tmp_path):
    path = tmp_path / "bad.mkfv"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ParseError):
        load_features(path)
