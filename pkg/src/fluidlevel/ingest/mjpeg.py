"""MJPEG over HTTP (``multipart/x-mixed-replace``) client.

Camera servers disagree on details, so the parser accepts delimiter lines
spelled either ``--<boundary>`` or ``<boundary>``, tolerates blank lines
between parts, and honours ``Content-Length`` when a part carries one.
Without it the payload runs up to the CRLF preceding the next delimiter.
"""

from __future__ import annotations

import http.client
import time
from dataclasses import dataclass
from email.message import Message
from typing import BinaryIO, Iterator
from urllib.parse import urlsplit

from ..errors import ConnectError, NotMultipart, ProtocolError, TruncatedFrame
from ..vision import Frame
from .decode import decode_image

_CHUNK = 65536


@dataclass(frozen=True)
class Part:
    headers: dict[str, str]
    payload: bytes
    received: float


class _Reader:
    def __init__(self, stream: BinaryIO):
        self._stream = stream
        self._buf = bytearray()
        self.eof = False

    def _fill(self) -> bool:
        if self.eof:
            return False
        read = getattr(self._stream, "read1", None) or self._stream.read
        try:
            chunk = read(_CHUNK)
        except http.client.IncompleteRead as exc:
            chunk = exc.partial
            self.eof = True
        except (OSError, http.client.HTTPException):
            chunk = b""
        if not chunk:
            self.eof = True
            return False
        self._buf += chunk
        return True

    def readline(self) -> bytes | None:
        """Next line including its terminator; the tail at EOF; None if empty."""
        while True:
            i = self._buf.find(b"\n")
            if i >= 0:
                line = bytes(self._buf[:i + 1])
                del self._buf[:i + 1]
                return line
            if not self._fill():
                if self._buf:
                    line = bytes(self._buf)
                    self._buf.clear()
                    return line
                return None

    def read_exact(self, n: int) -> bytes | None:
        while len(self._buf) < n:
            if not self._fill():
                return None
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    def read_until_delimiter(self, delimiters: tuple[bytes, ...]) -> bytes | None:
        """Bytes before the line break that precedes a delimiter line.

        The delimiter itself is left in the buffer. None on EOF.
        """
        start = 0
        while True:
            hit = None
            for d in delimiters:
                j = self._buf.find(b"\n" + d, start)
                while j >= 0:
                    end = j + 1 + len(d)
                    if end + 1 > len(self._buf) and not self.eof:
                        break  # need to see what follows the delimiter
                    tail = bytes(self._buf[end:end + 2])
                    if tail[:1] in (b"\r", b"\n", b"") or tail == b"--":
                        if hit is None or j < hit:
                            hit = j
                        break
                    j = self._buf.find(b"\n" + d, j + 1)
            if hit is not None:
                cut = hit - 1 if hit > 0 and self._buf[hit - 1] == 0x0D else hit
                payload = bytes(self._buf[:cut])
                del self._buf[:hit + 1]
                return payload
            start = max(0, len(self._buf) - max(len(d) for d in delimiters) - 2)
            if not self._fill():
                return None


def _delimiters(boundary: str) -> tuple[bytes, ...]:
    b = boundary.encode("latin-1")
    return (b"--" + b, b) if not b.startswith(b"--") else (b, b[2:], b"--" + b)


def _delimiter_kind(line: bytes, delimiters) -> str | None:
    s = line.strip()
    for d in delimiters:
        if s == d:
            return "part"
        if s == d + b"--":
            return "close"
    return None


def iter_parts(stream: BinaryIO, boundary: str) -> Iterator[Part]:
    """Split a multipart body into parts.

    Raises:
        ProtocolError: malformed framing or part headers.
        TruncatedFrame: the body ended inside a part; every complete part
            has been yielded by then.
    """
    delims = _delimiters(boundary)
    reader = _Reader(stream)
    # preamble, possibly empty or a lone CRLF
    while True:
        line = reader.readline()
        if line is None:
            return
        kind = _delimiter_kind(line, delims)
        if kind == "close":
            return
        if kind == "part":
            break

    while True:
        headers: dict[str, str] = {}
        while True:
            line = reader.readline()
            if line is None or not line.endswith(b"\n"):
                raise TruncatedFrame("stream closed inside part headers")
            line = line.rstrip(b"\r\n")
            if not line:
                break
            name, sep, value = line.decode("latin-1").partition(":")
            if not sep or not name.strip():
                raise ProtocolError(f"malformed part header {line!r}")
            headers[name.strip().lower()] = value.strip()

        ctype = headers.get("content-type", "").split(";")[0].strip().lower()
        if ctype != "image/jpeg":
            raise ProtocolError(f"part content type {ctype or None!r}, expected image/jpeg")

        length = headers.get("content-length")
        if length is not None:
            try:
                n = int(length)
            except ValueError:
                raise ProtocolError(f"bad Content-Length {length!r}") from None
            if n < 0:
                raise ProtocolError(f"bad Content-Length {length!r}")
            payload = reader.read_exact(n)
            if payload is None:
                raise TruncatedFrame(f"stream closed inside a {n}-byte part")
            yield Part(headers, payload, time.monotonic())
            while True:
                line = reader.readline()
                if line is None:
                    return
                if not line.strip():
                    continue
                kind = _delimiter_kind(line, delims)
                if kind is None:
                    raise ProtocolError("missing boundary after part body")
                if kind == "close":
                    return
                break
        else:
            payload = reader.read_until_delimiter(delims)
            if payload is None:
                raise TruncatedFrame("stream closed before the part's closing boundary")
            yield Part(headers, payload, time.monotonic())
            kind = _delimiter_kind(reader.readline() or b"", delims)
            if kind == "close":
                return


def _boundary_of(content_type: str | None) -> str:
    msg = Message()
    msg["Content-Type"] = content_type or ""
    if msg.get_content_type() != "multipart/x-mixed-replace":
        raise NotMultipart(f"response content type is {content_type!r}")
    boundary = msg.get_param("boundary")
    if not boundary:
        raise ProtocolError("multipart response without a boundary parameter")
    return str(boundary)


def mjpeg_parts(url: str, timeout: float = 10.0) -> Iterator[Part]:
    """GET ``url`` and yield raw JPEG parts as they arrive."""
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https") or not parts.hostname:
        raise ConnectError(f"not an http(s) URL: {url!r}")
    cls = http.client.HTTPSConnection if parts.scheme == "https" else http.client.HTTPConnection
    conn = cls(parts.hostname, parts.port, timeout=timeout)
    path = parts.path or "/"
    if parts.query:
        path += "?" + parts.query
    try:
        try:
            conn.request("GET", path, headers={"Accept": "multipart/x-mixed-replace"})
            resp = conn.getresponse()
        except (OSError, http.client.HTTPException) as exc:
            raise ConnectError(f"{url}: {exc}") from exc
        if resp.status != 200:
            raise ConnectError(f"{url}: HTTP {resp.status} {resp.reason}")
        boundary = _boundary_of(resp.getheader("Content-Type"))
        yield from iter_parts(resp, boundary)
    finally:
        conn.close()


def mjpeg_source(url: str, timeout: float = 10.0) -> Iterator[Frame]:
    """Decoded frames from an MJPEG stream, stamped with receipt time."""
    for part in mjpeg_parts(url, timeout):
        yield decode_image(part.payload, "jpeg", timestamp=part.received)
