"""Frame sources: single files, directories and MJPEG URLs."""

from __future__ import annotations

import fnmatch
import logging
import os
from pathlib import Path
from typing import Iterator

from ..errors import FluidLevelError, FrameDecodeError, NoMatches
from ..vision import Frame
from .decode import decode_image
from .mjpeg import mjpeg_source

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".png", ".jpg", ".jpeg")


def read_frame_file(path, timestamp: float | None = None) -> Frame:
    path = Path(path)
    data = path.read_bytes()
    return decode_image(data, path.suffix, timestamp=timestamp)


class DirectorySource:
    """Image files of a directory in lexicographic byte order of their names.

    Timestamps are synthesized as ``index * frame_interval``. Files that
    fail to decode are recorded in ``skipped`` and passed over, or raise
    FrameDecodeError when ``strict`` is set.
    """

    def __init__(self, path, pattern: str | None = None, frame_interval: float = 0.1,
                 strict: bool = False):
        self.path = Path(path)
        if not self.path.is_dir():
            raise NoMatches(f"{self.path} is not a directory")
        names = [e.name for e in os.scandir(self.path) if e.is_file()]
        if pattern is None:
            names = [n for n in names if n.lower().endswith(IMAGE_SUFFIXES)]
        else:
            names = [n for n in names if fnmatch.fnmatchcase(n, pattern)]
        if not names:
            raise NoMatches(f"no files in {self.path} match {pattern or 'image suffixes'}")
        self.files = [self.path / n for n in sorted(names, key=os.fsencode)]
        self.frame_interval = frame_interval
        self.strict = strict
        self.skipped: list[tuple[Path, FluidLevelError]] = []

    def __len__(self):
        return len(self.files)

    def __iter__(self) -> Iterator[Frame]:
        for i, f in enumerate(self.files):
            try:
                yield read_frame_file(f, timestamp=i * self.frame_interval)
            except (FluidLevelError, OSError) as exc:
                if self.strict:
                    raise FrameDecodeError(f, exc) from exc
                log.warning("skipping %s: %s", f, exc)
                self.skipped.append((f, exc))


def directory_source(path, pattern: str | None = None, frame_interval: float = 0.1,
                     strict: bool = False) -> DirectorySource:
    return DirectorySource(path, pattern, frame_interval, strict)


def open_source(spec: str, pattern: str | None = None, frame_interval: float = 0.1,
                strict: bool = False):
    """Resolve ``dir:<path>``, ``file:<path>`` or an http(s) URL to frames."""
    if spec.startswith("dir:"):
        return directory_source(spec[4:], pattern, frame_interval, strict)
    if spec.startswith("file:"):
        return [read_frame_file(spec[5:], timestamp=0.0)]
    if spec.startswith(("http://", "https://")):
        return mjpeg_source(spec)
    raise ValueError(f"unrecognized source spec {spec!r}")
