"""Frame ingestion: PGM, PNG/JPEG, directories and MJPEG streams."""

from .decode import decode_image, rgb_to_luma
from .mjpeg import Part, iter_parts, mjpeg_parts, mjpeg_source
from .pgm import read_pgm, write_pgm
from .sources import DirectorySource, directory_source, open_source, read_frame_file

__all__ = [
    "decode_image",
    "rgb_to_luma",
    "read_pgm",
    "write_pgm",
    "Part",
    "iter_parts",
    "mjpeg_parts",
    "mjpeg_source",
    "DirectorySource",
    "directory_source",
    "open_source",
    "read_frame_file",
]
