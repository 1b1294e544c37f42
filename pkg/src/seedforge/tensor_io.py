"""Binary tensor container and 8-bit PNG I/O.

Tensor container layout, all little-endian:

    [magic 8B "MECPTNS1"] ["F32A" 4B] [rank u32] [dims u32 x rank]
    [payload f32 x prod(dims), row-major] [crc32 u32 of payload bytes]

Only f32 tensors of rank 1..4 are supported. Images (labels, saliency,
inputs) travel as 8-bit grayscale or RGB PNG, never as tensors.
"""

import struct
import zlib

import numpy as np
from PIL import Image

from .errors import (
    BadMagic,
    InvalidShape,
    ShapeMismatch,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedPng,
)

MAGIC = b"MECPTNS1"
DTYPE_F32 = b"F32A"
MAX_RANK = 4


def _check_shape(shape):
    if not 1 <= len(shape) <= MAX_RANK:
        raise InvalidShape(f"rank must be 1..{MAX_RANK}, got {len(shape)}")
    if any(d < 1 for d in shape):
        raise InvalidShape(f"all dims must be >= 1, got {tuple(shape)}")


def write_tensor(arr: np.ndarray, path) -> None:
    """Write a float32 array to the tensor container at ``path``."""
    arr = np.asarray(arr)
    _check_shape(arr.shape)
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(DTYPE_F32)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def read_tensor(path) -> np.ndarray:
    """Read a tensor container; returns a C-contiguous float32 array.

    Raises BadMagic / UnsupportedDtype / TruncatedPayload on any corruption,
    including CRC mismatch and trailing bytes past the declared payload.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise BadMagic(f"{path}: not a tensor container")
    if blob[8:12] != DTYPE_F32:
        raise UnsupportedDtype(f"{path}: dtype code {blob[8:12]!r}")
    if len(blob) < 16:
        raise TruncatedPayload(f"{path}: header cut short")
    (rank,) = struct.unpack_from("<I", blob, 12)
    if not 1 <= rank <= MAX_RANK:
        raise InvalidShape(f"{path}: rank {rank} outside 1..{MAX_RANK}")
    body = 16 + 4 * rank
    if len(blob) < body:
        raise TruncatedPayload(f"{path}: dims cut short")
    shape = struct.unpack_from(f"<{rank}I", blob, 16)
    _check_shape(shape)
    count = int(np.prod(shape, dtype=np.int64))
    end = body + 4 * count
    if len(blob) < end + 4:
        raise TruncatedPayload(
            f"{path}: payload holds {(len(blob) - body - 4) // 4} values, dims need {count}"
        )
    if len(blob) > end + 4:
        raise TruncatedPayload(f"{path}: {len(blob) - end - 4} trailing bytes")
    payload = blob[body:end]
    (crc,) = struct.unpack_from("<I", blob, end)
    if crc != zlib.crc32(payload):
        raise TruncatedPayload(f"{path}: crc mismatch")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()


def read_png(path) -> np.ndarray:
    """Read an 8-bit PNG as uint8: (H, W) for grayscale, (H, W, 3) for RGB.

    Palette images without transparency are expanded to RGB. 16-bit depth
    and any alpha channel raise UnsupportedPng.
    """
    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
            raise UnsupportedPng(f"{path}: bit depth > 8 ({im.mode})")
        if im.mode in ("RGBA", "LA", "PA") or "transparency" in im.info:
            raise UnsupportedPng(f"{path}: alpha/transparency not supported")
        if im.mode == "P":
            im = im.convert("RGB")
        if im.mode == "1":
            im = im.convert("L")
        if im.mode not in ("L", "RGB"):
            raise UnsupportedPng(f"{path}: mode {im.mode}")
        return np.asarray(im, dtype=np.uint8)


def write_png(img: np.ndarray, path) -> None:
    """Write a uint8 array, (H, W) or (H, W, 3), as PNG."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ShapeMismatch(f"expected uint8 pixels, got {img.dtype}")
    if img.ndim == 2:
        mode = "L"
    elif img.ndim == 3 and img.shape[2] == 3:
        mode = "RGB"
    else:
        raise ShapeMismatch(f"expected (H, W) or (H, W, 3), got {img.shape}")
    if img.size == 0:
        raise ShapeMismatch("image must contain at least one pixel")
    Image.fromarray(img, mode=mode).save(path, format="PNG")
