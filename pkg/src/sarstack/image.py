"""Quantized images, threshold decomposition, sliding windows and PGM I/O.

Conventions used throughout the package:

* Images are 2-D numpy arrays indexed ``[row, col]``; ``x`` is the column
  and ``y`` the row.
* A window of ``rows x cols`` samples is read row-major. Sample ``j`` of
  that read-out is bit ``j`` (value ``2**j``) of the pattern index, so the
  top-left sample is the least-significant bit.
* Positions outside the image are filled by edge replication.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, FormatError

SUPPORTED_MAXVALS = (255, 65535)
MAX_WINDOW_SIZE = 25


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QuantizedImage:
    """Gray-level image with integer values in ``{0, ..., levels}``."""

    pixels: np.ndarray
    levels: int = 255

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise DomainError(f"image must be a non-empty 2-D grid, got shape {px.shape}")
        if int(self.levels) < 1:
            raise DomainError(f"levels must be positive, got {self.levels}")
        if not np.issubdtype(px.dtype, np.integer):
            if not np.all(np.equal(np.mod(px, 1), 0)):
                raise DomainError("pixel values must be integers")
        px = px.astype(np.int64)
        lo, hi = int(px.min()), int(px.max())
        if lo < 0 or hi > self.levels:
            raise DomainError(f"pixel values must lie in [0, {self.levels}], found [{lo}, {hi}]")
        object.__setattr__(self, "levels", int(self.levels))
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, QuantizedImage):
            return NotImplemented
        return self.levels == other.levels and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class BinaryImage:
    """A single threshold slice: values in ``{0, 1}``."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.size == 0:
            raise DomainError(f"binary image must be a non-empty 2-D grid, got shape {b.shape}")
        if not np.all((b == 0) | (b == 1)):
            raise DomainError("binary image values must be 0 or 1")
        object.__setattr__(self, "bits", _frozen(b.astype(np.uint8)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def as_image(self) -> QuantizedImage:
        return QuantizedImage(self.bits, levels=1)

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True)
class Window:
    """Odd-sized rectangular neighbourhood centred on the current pixel."""

    rows: int = 3
    cols: int = 3

    def __post_init__(self):
        for name in ("rows", "cols"):
            v = getattr(self, name)
            if int(v) != v or v < 1 or v % 2 == 0:
                raise DomainError(f"window {name} must be an odd positive integer, got {v}")
        if self.rows * self.cols > MAX_WINDOW_SIZE:
            raise DomainError(
                f"window {self.rows}x{self.cols} exceeds {MAX_WINDOW_SIZE} samples"
            )

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def center_index(self) -> int:
        return (self.rows // 2) * self.cols + self.cols // 2

    def offsets(self) -> list[tuple[int, int]]:
        """(drow, dcol) of each sample, in pattern-bit order."""
        r, c = self.rows // 2, self.cols // 2
        return [(dr, dc) for dr in range(-r, r + 1) for dc in range(-c, c + 1)]

    @classmethod
    def parse(cls, text: str) -> "Window":
        m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
        if not m:
            raise DomainError(f"cannot parse window {text!r}; expected e.g. '3x3'")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self):
        return f"{self.rows}x{self.cols}"


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle; ``stat`` optionally names a per-region target."""

    x: int
    y: int
    w: int
    h: int
    stat: str | None = None

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)


@dataclass(frozen=True)
class RegionOfInterest:
    """Union of rectangles inside an image."""

    rects: tuple[Rect, ...] = field(default_factory=tuple)

    def __post_init__(self):
        rects = tuple(r if isinstance(r, Rect) else Rect(*r) for r in self.rects)
        if not rects:
            raise DomainError("region of interest is empty")
        for r in rects:
            if r.w < 1 or r.h < 1:
                raise DomainError(f"rectangle {r} has no area")
        object.__setattr__(self, "rects", rects)

    def validate(self, shape: tuple[int, int]) -> None:
        height, width = shape
        for r in self.rects:
            if r.x < 0 or r.y < 0 or r.x + r.w > width or r.y + r.h > height:
                raise DomainError(f"rectangle {r} lies outside the {width}x{height} image")

    def mask(self, shape: tuple[int, int]) -> np.ndarray:
        self.validate(shape)
        m = np.zeros(shape, dtype=bool)
        for r in self.rects:
            m[r.slices()] = True
        return m

    def __len__(self):
        return len(self.rects)

    def __iter__(self):
        return iter(self.rects)

    @classmethod
    def from_json(cls, data) -> "RegionOfInterest":
        """Accept ``[{"x":..,"y":..,"w":..,"h":..,"stat":..}, ...]`` or ``[[x,y,w,h], ...]``."""
        if isinstance(data, dict):
            data = data.get("rois", data.get("rects"))
        if not isinstance(data, list):
            raise DomainError("ROI document must be a list of rectangles")
        rects = []
        for item in data:
            if isinstance(item, dict):
                try:
                    rects.append(Rect(int(item["x"]), int(item["y"]), int(item["w"]),
                                      int(item["h"]), item.get("stat")))
                except KeyError as exc:
                    raise DomainError(f"ROI rectangle missing field {exc}") from None
            else:
                x, y, w, h = (int(v) for v in item)
                rects.append(Rect(x, y, w, h))
        return cls(tuple(rects))


def threshold(img: QuantizedImage, m: int) -> BinaryImage:
    """Binary slice ``T^m``: 1 where the pixel is at least ``m``."""
    if not 1 <= m <= img.levels:
        raise DomainError(f"threshold {m} outside [1, {img.levels}]")
    return BinaryImage((img.pixels >= m).astype(np.uint8))


def threshold_stack(img: QuantizedImage) -> list[BinaryImage]:
    return [threshold(img, m) for m in range(1, img.levels + 1)]


def reconstruct(slices: Sequence[BinaryImage], levels: int) -> QuantizedImage:
    """Sum the threshold slices back into a gray-level image."""
    if len(slices) != levels:
        raise DomainError(f"expected {levels} slices, got {len(slices)}")
    shape = slices[0].shape
    total = np.zeros(shape, dtype=np.int64)
    for s in slices:
        if s.shape != shape:
            raise DomainError(f"slice shape {s.shape} differs from {shape}")
        total += s.bits
    return QuantizedImage(total, levels)


def window_values(pixels: np.ndarray, window: Window) -> np.ndarray:
    """Neighbourhood samples of every pixel, shape ``(H, W, n)``.

    The last axis follows pattern-bit order; borders are edge-replicated.
    """
    pr, pc = window.rows // 2, window.cols // 2
    padded = np.pad(np.asarray(pixels), ((pr, pr), (pc, pc)), mode="edge")
    view = sliding_window_view(padded, (window.rows, window.cols))
    return view.reshape(view.shape[0], view.shape[1], window.size)


def pattern_weights(n: int) -> np.ndarray:
    return np.left_shift(np.int64(1), np.arange(n, dtype=np.int64))


def window_patterns(img: BinaryImage, window: Window) -> np.ndarray:
    """Pattern index of every pixel of a binary image, shape ``(H, W)``."""
    vals = window_values(img.bits, window).astype(np.int64)
    return vals @ pattern_weights(window.size)


def window_pattern(img: BinaryImage, center: tuple[int, int], window: Window) -> str:
    """Row-major bit string of the window at ``center = (row, col)``."""
    row, col = center
    h, w = img.shape
    if not (0 <= row < h and 0 <= col < w):
        raise DomainError(f"center {center} outside the {w}x{h} image")
    bits = []
    for dr, dc in window.offsets():
        r = min(max(row + dr, 0), h - 1)
        c = min(max(col + dc, 0), w - 1)
        bits.append(str(int(img.bits[r, c])))
    return "".join(bits)


def pattern_to_string(p: int, n: int) -> str:
    """Row-major bit string of a pattern index (bit 0 first)."""
    return "".join("1" if (p >> j) & 1 else "0" for j in range(n))


def string_to_pattern(s: str) -> int:
    return sum(1 << j for j, ch in enumerate(s) if ch == "1")


# --- PGM ---------------------------------------------------------------------

_WS = b" \t\r\n\v\f"


def _read_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    while pos < len(data):
        ch = data[pos:pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif ch in _WS:
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos:pos + 1] not in _WS and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError("truncated PGM header", start)
    return data[start:pos], start, pos


def decode_pgm(data: bytes) -> QuantizedImage:
    if data[:2] != b"P5":
        raise FormatError("not a binary PGM (magic 'P5' missing)", 0)
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _read_token(data, pos)
        if not tok.isdigit():
            raise FormatError(f"bad PGM {name} {tok!r}", start)
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"bad PGM dimensions {width}x{height}", 2)
    if maxval not in SUPPORTED_MAXVALS:
        raise FormatError(f"unsupported PGM maxval {maxval}", pos)
    if pos >= len(data) or data[pos:pos + 1] not in _WS:
        raise FormatError("missing whitespace after PGM maxval", pos)
    pos += 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = width * height * dtype.itemsize
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise FormatError(f"truncated PGM payload: need {need} bytes, have {len(payload)}",
                          pos + len(payload))
    pixels = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    if int(pixels.max()) > maxval:
        raise FormatError(f"sample exceeds maxval {maxval}", pos)
    return QuantizedImage(pixels, maxval)


def encode_pgm(img: QuantizedImage) -> bytes:
    if img.levels not in SUPPORTED_MAXVALS:
        raise DomainError(f"PGM output needs levels in {SUPPORTED_MAXVALS}, got {img.levels}")
    dtype = ">u2" if img.levels > 255 else np.uint8
    header = f"P5\n{img.width} {img.height}\n{img.levels}\n".encode("ascii")
    return header + img.pixels.astype(dtype).tobytes()


def read_pgm(path: str | os.PathLike) -> QuantizedImage:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def write_pgm(img: QuantizedImage, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))


def labels_to_image(labels: Iterable) -> QuantizedImage:
    """Label map (class index as gray level) ready for PGM output."""
    return QuantizedImage(np.asarray(labels), 255)
