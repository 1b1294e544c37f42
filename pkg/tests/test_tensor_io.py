"""Tensor container and PNG round-trip contracts."""

import struct
import zlib

import numpy as np
import pytest
from PIL import Image

from seedforge.errors import BadMagic, InvalidShape, TruncatedPayload, UnsupportedDtype, UnsupportedPng
from seedforge.tensor_io import read_png, read_tensor, write_png, write_tensor


def _container(shape, values, magic=b"MECPTNS1", dtype=b"F32A", crc=None):
    payload = struct.pack(f"<{len(values)}f", *values)
    blob = magic + dtype + struct.pack("<I", len(shape))
    blob += struct.pack(f"<{len(shape)}I", *shape)
    blob += payload
    blob += struct.pack("<I", zlib.crc32(payload) if crc is None else crc)
    return blob


class TestTensorContainer:
    def test_decode_handwritten_file(self, tmp_path):
        """A file assembled byte-by-byte decodes to the stored shape/data."""
        path = tmp_path / "t.tns"
        path.write_bytes(_container([2, 2], [1.0, 2.0, 3.0, 4.0]))
        arr = read_tensor(path)
        assert arr.shape == (2, 2)
        assert arr.dtype == np.float32
        np.testing.assert_array_equal(arr, [[1.0, 2.0], [3.0, 4.0]])

    def test_write_read_roundtrip_bytes(self, tmp_path):
        a, b = tmp_path / "a.tns", tmp_path / "b.tns"
        arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
        write_tensor(arr, a)
        write_tensor(read_tensor(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_roundtrip_bit_exact_on_random_tensors(self, tmp_path):
        """1000 random tensors survive the container with exact f32 bits."""
        rng = np.random.default_rng(42)
        path = tmp_path / "t.tns"
        for _ in range(1000):
            rank = int(rng.integers(1, 5))
            shape = rng.integers(1, 5, size=rank)
            arr = rng.standard_normal(shape).astype(np.float32)
            write_tensor(arr, path)
            back = read_tensor(path)
            assert back.shape == arr.shape
            assert back.tobytes() == arr.tobytes()

    def test_file_size_is_header_plus_payload_plus_crc(self, tmp_path):
        # 8 magic + 4 dtype + 4 rank + 4 dim + 4 payload + 4 crc
        path = tmp_path / "t.tns"
        write_tensor(np.array([0.0], dtype=np.float32), path)
        assert path.stat().st_size == 28

    def test_payload_shorter_than_dims(self, tmp_path):
        path = tmp_path / "t.tns"
        path.write_bytes(_container([3, 3], [float(i) for i in range(8)]))
        with pytest.raises(TruncatedPayload):
            read_tensor(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "t.tns"
        path.write_bytes(_container([2], [1.0, 2.0]) + b"xx")
        with pytest.raises(TruncatedPayload):
            read_tensor(path)

    def test_crc_mismatch(self, tmp_path):
        path = tmp_path / "t.tns"
        path.write_bytes(_container([2], [1.0, 2.0], crc=0xDEADBEEF))
        with pytest.raises(TruncatedPayload):
            read_tensor(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.tns"
        path.write_bytes(_container([1], [0.0], magic=b"NOTMAGIC"))
        with pytest.raises(BadMagic):
            read_tensor(path)

    def test_unsupported_dtype(self, tmp_path):
        path = tmp_path / "t.tns"
        path.write_bytes(_container([1], [0.0], dtype=b"F64A"))
        with pytest.raises(UnsupportedDtype):
            read_tensor(path)

    def test_zero_dim_rejected_before_write(self, tmp_path):
        with pytest.raises(InvalidShape):
            write_tensor(np.zeros((0,), dtype=np.float32), tmp_path / "t.tns")

    def test_rank_limits(self, tmp_path):
        with pytest.raises(InvalidShape):
            write_tensor(np.zeros((1, 1, 1, 1, 1), dtype=np.float32), tmp_path / "t.tns")
        with pytest.raises(InvalidShape):
            write_tensor(np.float32(1.0), tmp_path / "t.tns")


class TestPng:
    def test_white_rgb_pixel(self, tmp_path):
        path = tmp_path / "w.png"
        write_png(np.full((1, 1, 3), 255, np.uint8), path)
        np.testing.assert_array_equal(read_png(path), [[[255, 255, 255]]])

    def test_gray_ignore_value_preserved(self, tmp_path):
        path = tmp_path / "g.png"
        img = np.array([[0, 255], [128, 7]], dtype=np.uint8)
        write_png(img, path)
        np.testing.assert_array_equal(read_png(path), img)

    def test_roundtrip_random(self, tmp_path):
        rng = np.random.default_rng(1)
        rgb = rng.integers(0, 256, (9, 7, 3)).astype(np.uint8)
        gray = rng.integers(0, 256, (5, 11)).astype(np.uint8)
        for name, img in (("rgb.png", rgb), ("gray.png", gray)):
            path = tmp_path / name
            write_png(img, path)
            np.testing.assert_array_equal(read_png(path), img)

    def test_16bit_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        Image.new("I;16", (2, 2)).save(path)
        with pytest.raises(UnsupportedPng):
            read_png(path)

    def test_alpha_rejected(self, tmp_path):
        path = tmp_path / "a.png"
        Image.fromarray(np.zeros((2, 2, 4), dtype=np.uint8), mode="RGBA").save(path)
        with pytest.raises(UnsupportedPng):
            read_png(path)

    def test_palette_without_alpha_expands_to_rgb(self, tmp_path):
        path = tmp_path / "p.png"
        im = Image.fromarray(np.array([[0, 1]], dtype=np.uint8), mode="P")
        im.putpalette([10, 20, 30, 40, 50, 60] + [0] * 762)
        im.save(path)
        out = read_png(path)
        np.testing.assert_array_equal(out, [[[10, 20, 30], [40, 50, 60]]])
