"""Binary PGM (P5) and PPM (P6) reading and writing.

Depth maps are stored as P5 with maxval 255 or 65535 (16-bit samples are
big-endian); colour images as P6 with maxval 255. Loaded samples are divided
by maxval, rows run top to bottom.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from aggfov.common.errors import NetpbmError

PGM_MAGIC = b"P5"
PPM_MAGIC = b"P6"
SUPPORTED_MAXVAL = {PGM_MAGIC: (255, 65535), PPM_MAGIC: (255,)}

_WHITESPACE = b" \t\n\r\x0b\x0c"


@dataclass(frozen=True)
class NetpbmImage:
    """Raw integer samples of a netpbm file.

    ``pixels`` is (H, W) for P5 and (H, W, 3) for P6.
    """

    magic: bytes
    width: int
    height: int
    maxval: int
    pixels: np.ndarray


class _HeaderReader:
    """Token reader over the ASCII header; ``#`` starts a comment line."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _skip_space(self) -> None:
        data = self.data
        while self.pos < len(data):
            c = data[self.pos : self.pos + 1]
            if c in _WHITESPACE:
                self.pos += 1
            elif c == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            else:
                return

    def integer(self, field: str) -> int:
        self._skip_space()
        start = self.pos
        while self.data[self.pos : self.pos + 1].isdigit():
            self.pos += 1
        if self.pos == start:
            if start >= len(self.data):
                raise NetpbmError(f"header ends before {field}", start)
            raise NetpbmError(f"expected a decimal {field}", start)
        return int(self.data[start : self.pos])


def decode_netpbm(data: bytes) -> NetpbmImage:
    """Parse a P5/P6 payload.

    Raises:
        NetpbmError: Wrong magic, bad header, unsupported maxval or short payload
    """
    magic = data[:2]
    if magic not in SUPPORTED_MAXVAL:
        raise NetpbmError(f"unsupported magic {magic!r}, expected P5 or P6", 0)
    reader = _HeaderReader(data)
    reader.pos = 2
    if reader.pos >= len(data) or data[2:3] not in _WHITESPACE + b"#":
        raise NetpbmError("missing whitespace after magic", 2)
    width = reader.integer("width")
    height = reader.integer("height")
    maxval_offset = reader.pos
    maxval = reader.integer("maxval")
    if maxval not in SUPPORTED_MAXVAL[magic]:
        raise NetpbmError(f"unsupported maxval {maxval}", maxval_offset)
    if width <= 0 or height <= 0:
        raise NetpbmError(f"invalid size {width}x{height}", maxval_offset)
    if reader.pos >= len(data) or data[reader.pos : reader.pos + 1] not in _WHITESPACE:
        raise NetpbmError("missing whitespace after maxval", reader.pos)
    start = reader.pos + 1

    channels = 3 if magic == PPM_MAGIC else 1
    sample = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    expected = count * sample.itemsize
    if len(data) - start < expected:
        raise NetpbmError(
            f"truncated payload: need {expected} bytes, have {len(data) - start}",
            len(data),
        )
    flat = np.frombuffer(data, dtype=sample, count=count, offset=start)
    shape = (height, width, 3) if channels == 3 else (height, width)
    pixels = flat.reshape(shape).astype(np.uint16)
    return NetpbmImage(magic, width, height, maxval, pixels)


def encode_netpbm(image: NetpbmImage) -> bytes:
    """Serialize samples with a minimal ``P? W H MAXVAL`` header."""
    header = b"%s\n%d %d\n%d\n" % (image.magic, image.width, image.height, image.maxval)
    sample = np.dtype(">u2") if image.maxval > 255 else np.dtype("u1")
    return header + np.ascontiguousarray(image.pixels, dtype=sample).tobytes()


def _read(path: str | Path) -> NetpbmImage:
    return decode_netpbm(Path(path).read_bytes())


def load_pgm(path: str | Path) -> np.ndarray:
    """Load a P5 file as a float32 (H, W) plane in [0, 1]."""
    image = _read(path)
    if image.magic != PGM_MAGIC:
        raise NetpbmError(f"{path} is not a PGM (P5) file", 0)
    return (image.pixels / np.float32(image.maxval)).astype(np.float32)


def load_ppm(path: str | Path) -> np.ndarray:
    """Load a P6 file as a float32 (3, H, W) RGB image in [0, 1]."""
    image = _read(path)
    if image.magic != PPM_MAGIC:
        raise NetpbmError(f"{path} is not a PPM (P6) file", 0)
    rgb = image.pixels.transpose(2, 0, 1) / np.float32(image.maxval)
    return rgb.astype(np.float32)


def quantize(values: np.ndarray, maxval: int) -> np.ndarray:
    """Map [0, 1] reals to integer samples, rounding to nearest."""
    return np.rint(np.clip(values, 0.0, 1.0) * maxval).astype(np.uint16)


def save_pgm(path: str | Path, plane: np.ndarray, bits: int = 8) -> None:
    """Write an (H, W) plane in [0, 1] as an 8- or 16-bit P5 file."""
    if bits not in (8, 16):
        raise ValueError(f"PGM bit depth must be 8 or 16, got {bits}")
    if plane.ndim != 2:
        raise ValueError(f"PGM plane must be 2-D, got shape {plane.shape}")
    maxval = 255 if bits == 8 else 65535
    height, width = plane.shape
    image = NetpbmImage(PGM_MAGIC, width, height, maxval, quantize(plane, maxval))
    Path(path).write_bytes(encode_netpbm(image))


def save_ppm(path: str | Path, rgb: np.ndarray) -> None:
    """Write a (3, H, W) RGB image in [0, 1] as an 8-bit P6 file."""
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise ValueError(f"PPM image must be (3, H, W), got shape {rgb.shape}")
    _, height, width = rgb.shape
    pixels = quantize(rgb.transpose(1, 2, 0), 255)
    image = NetpbmImage(PPM_MAGIC, width, height, 255, pixels)
    Path(path).write_bytes(encode_netpbm(image))
