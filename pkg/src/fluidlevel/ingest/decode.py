"""Decoding of encoded still images to 8-bit grayscale frames."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import CorruptImage, UnsupportedFormat
from ..vision import Frame
from .pgm import read_pgm

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8"


def sniff_format(data: bytes) -> str | None:
    if data.startswith(_PNG_MAGIC):
        return "png"
    if data.startswith(_JPEG_MAGIC):
        return "jpeg"
    if data.startswith(b"P5"):
        return "pgm"
    return None


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    """Integer BT.601 luma, rounding half up."""
    rgb = rgb.astype(np.int64)
    y = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return y.astype(np.uint8)


def decode_image(data: bytes, hint: str | None = None,
                 timestamp: float | None = None) -> Frame:
    """Decode PGM, PNG or JPEG bytes to a grayscale frame.

    ``hint`` ("pgm", "png", "jpeg"/"jpg") is only used when the leading
    magic bytes are not recognized.
    """
    data = bytes(data)
    fmt = sniff_format(data)
    if fmt is None and hint is not None:
        fmt = {"jpg": "jpeg"}.get(hint.lower().lstrip("."), hint.lower().lstrip("."))
    if fmt == "pgm":
        return read_pgm(data, timestamp)
    if fmt not in ("png", "jpeg"):
        raise UnsupportedFormat(f"unrecognized image data (hint={hint!r})")
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            if img.mode in ("L", "LA", "1"):
                pixels = np.asarray(img.convert("L") if img.mode != "LA"
                                    else img.getchannel("L"))
            elif img.mode.startswith("I") or img.mode == "F":
                raise UnsupportedFormat(f"unsupported pixel mode {img.mode}")
            else:
                pixels = rgb_to_luma(np.asarray(img.convert("RGB")))
    except UnsupportedFormat:
        raise
    except (OSError, UnidentifiedImageError, SyntaxError, ValueError) as exc:
        raise CorruptImage(f"cannot decode {fmt}: {exc}") from exc
    return Frame(np.ascontiguousarray(pixels, dtype=np.uint8), timestamp)
