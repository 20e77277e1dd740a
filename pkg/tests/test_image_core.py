"""Raster validators, PGM I/O, normalization, resizing, augmentation."""

import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from lungprep.errors import FormatError, InputDataError, UsageError
from lungprep.image_core import (
    AugmentSpec,
    augment,
    bit_depth,
    load_image,
    normalize_max,
    require_float,
    require_gray,
    require_mask,
    resize_bilinear,
    resize_nearest_mask,
    round_half_away,
    save_image,
    to_u8,
)

from oracles import (
    oracle_resize_bilinear,
    oracle_resize_nearest,
    oracle_round_half_away,
    oracle_to_u8,
)


def _gray(vals, dtype=np.uint8):
    return np.asarray(vals, dtype=dtype)


class TestValidators:
    def test_gray_accepts_u8_and_u16(self):
        require_gray(np.zeros((2, 3), dtype=np.uint8))
        require_gray(np.zeros((2, 3), dtype=np.uint16))

    def test_gray_rejects_float(self):
        with pytest.raises(UsageError):
            require_gray(np.zeros((2, 2), dtype=np.float64))

    def test_gray_rejects_1d_and_3d(self):
        with pytest.raises(UsageError):
            require_gray(np.zeros(4, dtype=np.uint8))
        with pytest.raises(UsageError):
            require_gray(np.zeros((2, 2, 3), dtype=np.uint8))

    def test_gray_rejects_empty(self):
        with pytest.raises(UsageError):
            require_gray(np.zeros((0, 5), dtype=np.uint8))

    def test_float_rejects_nan_and_inf(self):
        img = np.zeros((2, 2))
        img[0, 0] = np.nan
        with pytest.raises(UsageError):
            require_float(img)
        img[0, 0] = np.inf
        with pytest.raises(UsageError):
            require_float(img)

    def test_float_rejects_f32(self):
        with pytest.raises(UsageError):
            require_float(np.zeros((2, 2), dtype=np.float32))

    def test_mask_rejects_int(self):
        with pytest.raises(UsageError):
            require_mask(np.zeros((2, 2), dtype=np.uint8))

    def test_mask_accepts_bool(self):
        require_mask(np.ones((3, 3), dtype=bool))

    def test_bit_depth(self):
        assert bit_depth(np.zeros((1, 1), dtype=np.uint8)) == 8
        assert bit_depth(np.zeros((1, 1), dtype=np.uint16)) == 16


class TestRounding:
    @pytest.mark.parametrize(
        "x,expect",
        [(0.5, 1), (1.5, 2), (2.5, 3), (-0.5, -1), (-2.5, -3), (0.4999, 0), (-0.4999, 0), (0.0, 0)],
    )
    def test_half_away_from_zero(self, x, expect):
        assert round_half_away(np.float64(x)) == expect

    @given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
    def test_matches_oracle(self, x):
        got = round_half_away(np.float64(x))
        assert got == oracle_round_half_away(x)

    def test_integers_pass_through(self):
        assert round_half_away(3.0) == 3
        assert round_half_away(-7.0) == -7
        assert isinstance(round_half_away(0.5), int)


class TestToU8:
    def test_endpoints(self):
        img = np.array([[1.0, 0.5], [-0.2, 0.0]])
        out = to_u8(img)
        assert out.dtype == np.uint8
        # 0.5 * 255 = 127.5 rounds away from zero to 128
        assert out.tolist() == [[255, 128], [0, 0]]

    def test_clamps_above_one(self):
        assert to_u8(np.array([[3.7]]))[0, 0] == 255

    @given(
        hnp.arrays(
            np.float64,
            (4, 5),
            elements=st.floats(min_value=-2.0, max_value=3.0, allow_nan=False),
        )
    )
    def test_matches_oracle(self, img):
        assert np.array_equal(to_u8(img), oracle_to_u8(img))

    def test_normalize_then_quantize_is_stable(self):
        rng = np.random.default_rng(3)
        raw = rng.integers(0, 4096, size=(16, 16)).astype(np.uint16)
        once = to_u8(normalize_max(raw))
        twice = to_u8(normalize_max(once))
        assert np.array_equal(once, twice)


class TestNormalizeMax:
    def test_constant_image_becomes_ones(self):
        img = np.full((3, 3), 700, dtype=np.uint16)
        assert np.array_equal(normalize_max(img), np.ones((3, 3)))

    def test_exact_division(self):
        img = _gray([[100, 200], [50, 200]])
        assert normalize_max(img).tolist() == [[0.5, 1.0], [0.25, 1.0]]

    def test_all_zero_warns_and_returns_zeros(self, caplog):
        img = np.zeros((2, 2), dtype=np.uint8)
        with caplog.at_level("WARNING"):
            out = normalize_max(img)
        assert np.array_equal(out, np.zeros((2, 2)))
        assert any("zero" in rec.message for rec in caplog.records)

    @given(
        hnp.arrays(np.uint16, (6, 6), elements=st.integers(min_value=0, max_value=65535))
    )
    def test_peak_is_one_and_order_preserved(self, img):
        out = normalize_max(img)
        if img.max() > 0:
            assert out.max() == 1.0
            a, b = img.ravel(), out.ravel()
            order = np.argsort(a, kind="stable")
            assert np.all(np.diff(b[order]) >= 0)
        else:
            assert not out.any()


class TestPgmRoundTrip:
    def test_u8_bytes(self, tmp_path):
        img = _gray([[0, 128], [255, 7]])
        p = tmp_path / "a.pgm"
        save_image(img, p)
        raw = p.read_bytes()
        assert raw == b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7])
        back = load_image(p)
        assert back.dtype == np.uint8
        assert np.array_equal(back, img)

    def test_u16_big_endian(self, tmp_path):
        img = np.array([[0, 1], [256, 65535]], dtype=np.uint16)
        p = tmp_path / "b.pgm"
        save_image(img, p)
        raw = p.read_bytes()
        assert raw.startswith(b"P5\n2 2\n65535\n")
        payload = raw.split(b"65535\n", 1)[1]
        assert payload == struct.pack(">4H", 0, 1, 256, 65535)
        back = load_image(p)
        assert back.dtype == np.uint16
        assert np.array_equal(back, img)

    @given(
        hnp.arrays(np.uint8, (3, 5), elements=st.integers(min_value=0, max_value=255))
    )
    def test_u8_round_trip_property(self, img):
        import tempfile

        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "x.pgm"
            save_image(img, p)
            assert np.array_equal(load_image(p), img)

    def test_header_comments_and_whitespace(self, tmp_path):
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5\n# a comment\n 2  2 \n# more\n255\n" + bytes([1, 2, 3, 4]))
        img = load_image(p)
        assert img.tolist() == [[1, 2], [3, 4]]

    def test_maxval_under_255_still_u8(self, tmp_path):
        p = tmp_path / "d.pgm"
        p.write_bytes(b"P5\n1 1\n100\n" + bytes([42]))
        img = load_image(p)
        assert img.dtype == np.uint8
        assert img[0, 0] == 42

    def test_maxval_300_is_two_byte(self, tmp_path):
        p = tmp_path / "e.pgm"
        p.write_bytes(b"P5\n1 1\n300\n" + struct.pack(">H", 260))
        img = load_image(p)
        assert img.dtype == np.uint16
        assert img[0, 0] == 260

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "f.pgm"
        p.write_bytes(b"P5\n2 2\n255\n" + bytes([1, 2]))
        with pytest.raises(FormatError):
            load_image(p)

    def test_ascii_pgm_readable_via_pillow(self, tmp_path):
        # P2 is not the canonical interchange format but Pillow decodes it,
        # which satisfies the single-channel contract.
        pytest.importorskip("PIL.Image")
        p = tmp_path / "g.pgm"
        p.write_bytes(b"P2\n1 1\n255\n7\n")
        assert load_image(p)[0, 0] == 7

    def test_unidentifiable_bytes(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"\x00\x01garbage not an image")
        with pytest.raises(FormatError):
            load_image(p)

    def test_zero_maxval(self, tmp_path):
        p = tmp_path / "h.pgm"
        p.write_bytes(b"P5\n1 1\n0\n\x00")
        with pytest.raises(FormatError):
            load_image(p)

    def test_maxval_too_large(self, tmp_path):
        p = tmp_path / "i.pgm"
        p.write_bytes(b"P5\n1 1\n70000\n\x00\x00")
        with pytest.raises(FormatError):
            load_image(p)

    def test_zero_dimension(self, tmp_path):
        p = tmp_path / "j.pgm"
        p.write_bytes(b"P5\n0 2\n255\n")
        with pytest.raises(FormatError):
            load_image(p)

    def test_non_integer_header(self, tmp_path):
        p = tmp_path / "k.pgm"
        p.write_bytes(b"P5\nx 2\n255\n\x00\x00")
        with pytest.raises(FormatError):
            load_image(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises((InputDataError, OSError)):
            load_image(tmp_path / "absent.pgm")


class TestPillowFormats:
    def test_png_gray_round_trip(self, tmp_path):
        PIL = pytest.importorskip("PIL.Image")
        img = _gray([[0, 60], [200, 255]])
        p = tmp_path / "a.png"
        PIL.fromarray(img, mode="L").save(p)
        back = load_image(p)
        assert back.dtype == np.uint8
        assert np.array_equal(back, img)

    def test_color_png_rejected(self, tmp_path):
        PIL = pytest.importorskip("PIL.Image")
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        p = tmp_path / "rgb.png"
        PIL.fromarray(rgb, mode="RGB").save(p)
        with pytest.raises(FormatError, match="multi-channel"):
            load_image(p)

    def test_16bit_png(self, tmp_path):
        PIL = pytest.importorskip("PIL.Image")
        img = np.array([[0, 4096], [300, 65535]], dtype=np.uint16)
        p = tmp_path / "deep.png"
        PIL.fromarray(img).save(p)  # uint16 maps to mode I;16
        back = load_image(p)
        assert back.dtype == np.uint16
        assert np.array_equal(back, img)


class TestResize:
    def test_same_size_is_identity(self):
        rng = np.random.default_rng(0)
        img = rng.random((7, 9))
        out = resize_bilinear(img, 9, 7)
        assert np.array_equal(out, img)
        assert out is not img

    def test_constant_stays_constant(self):
        img = np.full((5, 5), 0.37)
        out = resize_bilinear(img, 13, 3)
        assert np.allclose(out, 0.37, rtol=0, atol=1e-15)

    def test_2x2_to_4x4_matches_formula(self):
        img = np.array([[0.0, 1.0], [1.0, 0.0]])
        got = resize_bilinear(img, 4, 4)
        want = oracle_resize_bilinear(img, 4, 4)
        assert np.allclose(got, want, rtol=0, atol=1e-12)

    @given(
        hnp.arrays(
            np.float64,
            st.tuples(st.integers(2, 8), st.integers(2, 8)),
            elements=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        ),
        st.integers(1, 12),
        st.integers(1, 12),
    )
    def test_matches_oracle(self, img, out_w, out_h):
        got = resize_bilinear(img, out_w, out_h)
        want = oracle_resize_bilinear(img, out_w, out_h)
        assert got.shape == (out_h, out_w)
        assert np.allclose(got, want, rtol=0, atol=1e-12)

    def test_zero_dims_rejected(self):
        img = np.zeros((2, 2))
        with pytest.raises(UsageError):
            resize_bilinear(img, 0, 4)
        with pytest.raises(UsageError):
            resize_bilinear(img, 4, 0)

    def test_output_within_input_range(self):
        rng = np.random.default_rng(5)
        img = rng.random((6, 6))
        out = resize_bilinear(img, 17, 11)
        assert out.min() >= img.min() - 1e-12
        assert out.max() <= img.max() + 1e-12


class TestResizeNearestMask:
    def test_same_size_identity(self):
        m = np.array([[True, False], [False, True]])
        assert np.array_equal(resize_nearest_mask(m, 2, 2), m)

    def test_all_true_stays_true(self):
        m = np.ones((4, 4), dtype=bool)
        assert resize_nearest_mask(m, 9, 3).all()

    def test_checkerboard_downsample(self):
        m = np.indices((4, 4)).sum(axis=0) % 2 == 0
        got = resize_nearest_mask(m, 2, 2)
        want = oracle_resize_nearest(m, 2, 2)
        assert got.dtype == bool
        assert np.array_equal(got, want)

    @given(
        hnp.arrays(np.bool_, (5, 7), elements=st.booleans()),
        st.integers(1, 11),
        st.integers(1, 11),
    )
    def test_matches_oracle(self, m, out_w, out_h):
        got = resize_nearest_mask(m, out_w, out_h)
        assert np.array_equal(got, oracle_resize_nearest(m, out_w, out_h))


class TestAugment:
    def test_flip_only(self):
        img = _gray([[1, 2], [3, 4]])
        out = augment(img, AugmentSpec(horizontal_flip=True, rotations=()))
        assert len(out) == 2
        assert np.array_equal(out[0], img)
        assert out[1].tolist() == [[2, 1], [4, 3]]

    def test_empty_spec_returns_original_only(self):
        img = _gray([[9]])
        out = augment(img, AugmentSpec(horizontal_flip=False, rotations=()))
        assert len(out) == 1
        assert np.array_equal(out[0], img)

    def test_rotation_dimensions(self):
        img = np.arange(6, dtype=np.uint8).reshape(2, 3)
        out = augment(img, AugmentSpec(horizontal_flip=False, rotations=(90, 180, 270)))
        assert [o.shape for o in out] == [(2, 3), (3, 2), (2, 3), (3, 2)]

    def test_double_flip_round_trips(self):
        rng = np.random.default_rng(8)
        img = rng.integers(0, 256, size=(5, 4)).astype(np.uint8)
        flipped = augment(img, AugmentSpec(horizontal_flip=True, rotations=()))[1]
        back = augment(flipped, AugmentSpec(horizontal_flip=True, rotations=()))[1]
        assert np.array_equal(back, img)

    def test_outputs_are_permutations(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, size=(3, 5)).astype(np.uint8)
        out = augment(img, AugmentSpec(horizontal_flip=True, rotations=(90, 180, 270)))
        base = np.sort(img.ravel())
        for o in out:
            assert np.array_equal(np.sort(o.ravel()), base)

    def test_duplicate_rotation_rejected(self):
        with pytest.raises(UsageError):
            AugmentSpec(horizontal_flip=False, rotations=(90, 90))

    def test_bad_angle_rejected(self):
        with pytest.raises(UsageError):
            AugmentSpec(horizontal_flip=False, rotations=(45,))
