"""Binary PGM (P5) reading and writing, 8-bit only."""

from __future__ import annotations

import numpy as np

from ..errors import BadMagic, MalformedHeader, TruncatedRaster, UnsupportedMaxval
from ..vision import Frame

_WHITESPACE = b" \t\n\r\v\f"


def _header_tokens(data: bytes, count: int):
    """Return ``count`` integer tokens after the magic and the raster offset."""
    pos, tokens = 2, []
    n = len(data)
    while len(tokens) < count:
        while pos < n and (data[pos] in _WHITESPACE or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        token = data[start:pos]
        if not token:
            raise MalformedHeader("header ended before width, height and maxval")
        if not token.isdigit():
            raise MalformedHeader(f"non-numeric header field {token!r}")
        tokens.append(int(token))
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n or data[pos] not in _WHITESPACE:
        raise MalformedHeader("missing whitespace after maxval")
    return tokens, pos + 1


def read_pgm(data: bytes, timestamp: float | None = None) -> Frame:
    data = bytes(data)
    if data[:2] != b"P5":
        raise BadMagic(f"expected P5 magic, got {data[:2]!r}")
    if len(data) > 2 and data[2] not in _WHITESPACE and data[2] != ord("#"):
        raise BadMagic(f"expected P5 magic, got {data[:3]!r}")
    (width, height, maxval), offset = _header_tokens(data, 3)
    if width < 1 or height < 1:
        raise MalformedHeader(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} is not supported (need 255)")
    size = width * height
    raster = data[offset:offset + size]
    if len(raster) < size:
        raise TruncatedRaster(f"raster has {len(raster)} of {size} bytes")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return Frame(pixels.copy(), timestamp)


def write_pgm(frame: Frame) -> bytes:
    header = b"P5\n%d %d\n255\n" % (frame.width, frame.height)
    return header + frame.pixels.tobytes()
