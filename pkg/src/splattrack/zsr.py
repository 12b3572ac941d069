"""ZSR raster container and file I/O.

Wire format (bit-exact, little-endian):
    bytes 0..3    magic "ZSRF"
    bytes 4..7    width  (u32)
    bytes 8..11   height (u32)
    bytes 12..15  channels (u32)
    then width*height*channels IEEE-754 binary32 samples,
    row-major, channel-interleaved.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"ZSRF"
_HEADER_SIZE = 16
_MAX_SAMPLES = 2**31


class BadMagic(ValueError):
    """File does not start with the ZSR magic."""


class TruncatedFile(ValueError):
    """File ends before the header-declared sample count."""


class DimensionOverflow(ValueError):
    """Header declares width*height*channels > 2^31."""


class IoFailure(OSError):
    """Underlying write failed."""


@dataclass(frozen=True)
class Raster:
    """Row-major float32 raster, shape (height, width, channels).

    Samples must be finite or NaN; NaN marks an invalid sample (used by
    depth rasters for "no depth"). Infinities are never valid.
    """

    width: int
    height: int
    channels: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0 or self.channels <= 0:
            raise ValueError(f"non-positive raster dims {self.width}x{self.height}x{self.channels}")
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.size != self.width * self.height * self.channels:
            raise ValueError(
                f"data length {arr.size} != {self.width}*{self.height}*{self.channels}"
            )
        arr = arr.reshape(self.height, self.width, self.channels)
        if np.isinf(arr).any():
            raise ValueError("raster samples must be finite or NaN")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Raster":
        """Build a raster from an (h, w) or (h, w, c) array."""
        arr = np.asarray(arr, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D array, got shape {arr.shape}")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr)

    def plane(self, channel: int = 0) -> np.ndarray:
        """Single channel as an (h, w) view."""
        return self.data[:, :, channel]


def parse_raster(blob: bytes, label: str = "<bytes>") -> Raster:
    """Decode ZSR bytes, normalizing byte order to host."""
    if len(blob) < len(MAGIC):
        raise TruncatedFile(f"{label}: {len(blob)} bytes, no room for magic")
    if blob[:4] != MAGIC:
        raise BadMagic(f"{label}: magic {blob[:4]!r}")
    if len(blob) < _HEADER_SIZE:
        raise TruncatedFile(f"{label}: header truncated at {len(blob)} bytes")
    w, h, c = (int(v) for v in np.frombuffer(blob, dtype="<u4", count=3, offset=4))
    if w == 0 or h == 0 or c == 0:
        raise ValueError(f"{label}: zero dimension {w}x{h}x{c}")
    n = w * h * c
    if n > _MAX_SAMPLES:
        raise DimensionOverflow(f"{label}: {w}x{h}x{c} = {n} samples")
    expected = _HEADER_SIZE + 4 * n
    if len(blob) < expected:
        raise TruncatedFile(f"{label}: {len(blob)} bytes, expected {expected}")
    samples = np.frombuffer(blob, dtype="<f4", count=n, offset=_HEADER_SIZE)
    # astype(...) copies, freeing the read-only buffer view and flipping to host order.
    return Raster(width=w, height=h, channels=c, data=samples.astype(np.float32))


def serialize_raster(raster: Raster) -> bytes:
    """ZSR bytes for a raster; parse_raster inverts this bit-exactly."""
    header = MAGIC + np.array(
        [raster.width, raster.height, raster.channels], dtype="<u4"
    ).tobytes()
    return header + np.ascontiguousarray(raster.data, dtype="<f4").tobytes()


def read_raster(path: str | os.PathLike) -> Raster:
    """Read a ZSR file."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as exc:
        raise IoFailure(f"reading {path}: {exc}") from exc
    return parse_raster(blob, label=str(path))


def write_raster(raster: Raster, path: str | os.PathLike) -> None:
    """Write a ZSR file readable by read_raster with bit-identical samples."""
    try:
        with open(path, "wb") as f:
            f.write(serialize_raster(raster))
    except OSError as exc:
        raise IoFailure(f"writing {path}: {exc}") from exc
