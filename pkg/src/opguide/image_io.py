"""File formats: binary PGM/PPM are parsed in-repo, PNG goes through Pillow.

Loading scales intensities to [0, 1] by the file's maximum value; saving
quantizes with round-half-up, so a save/load round trip moves each pixel by
at most half a quantization step.  Values are clamped only when saving.
"""

from __future__ import annotations

from pathlib import Path
from typing import BinaryIO

import numpy as np
from PIL import Image as PILImage

from .core import Image


class ImageFormatError(ValueError):
    """Malformed header, truncated data, or unsupported format variant."""


def _next_token(f: BinaryIO) -> bytes:
    c = f.read(1)
    while c:
        if c == b"#":
            while c and c not in (b"\n", b"\r"):
                c = f.read(1)
            c = f.read(1)
        elif c.isspace():
            c = f.read(1)
        else:
            break
    if not c:
        raise ImageFormatError("truncated header")
    token = bytearray()
    while c and not c.isspace():
        token += c
        c = f.read(1)
    return bytes(token)


def _int_token(f: BinaryIO, what: str) -> int:
    tok = _next_token(f)
    try:
        return int(tok)
    except ValueError as err:
        raise ImageFormatError(f"malformed {what} field: {tok!r}") from err


def _load_pnm(f: BinaryIO) -> Image:
    magic = f.read(2)
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported magic {magic!r}, expected binary P5/P6")
    channels = 1 if magic == b"P5" else 3
    width = _int_token(f, "width")
    height = _int_token(f, "height")
    maxval = _int_token(f, "maxval")
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    if maxval > 255 and channels == 3:
        raise ImageFormatError("16-bit PPM is not supported")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    raw = f.read(count * dtype.itemsize)
    if len(raw) < count * dtype.itemsize:
        raise ImageFormatError(
            f"truncated raster: expected {count * dtype.itemsize} bytes, got {len(raw)}"
        )
    values = np.frombuffer(raw, dtype=dtype).astype(np.float64) / maxval
    return Image(values.reshape(height, width, channels))


def _load_png(path: Path) -> Image:
    with PILImage.open(path) as pil:
        if pil.mode in ("I;16", "I"):
            arr = np.asarray(pil, dtype=np.float64) / 65535.0
        elif pil.mode == "L":
            arr = np.asarray(pil, dtype=np.float64) / 255.0
        else:
            if pil.mode != "RGB":
                pil = pil.convert("RGB")
            arr = np.asarray(pil, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Image(arr)


def load_image(path: str | Path) -> Image:
    """Read a PGM/PPM/PNG file into a [0, 1] float image."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        return _load_png(path)
    with open(path, "rb") as f:
        return _load_pnm(f)


def _quantize(img: Image, maxval: int) -> np.ndarray:
    clipped = np.clip(img.data, 0.0, 1.0)
    return np.floor(clipped * maxval + 0.5)


def save_image(img: Image, path: str | Path, bit_depth: int = 8) -> None:
    """Write an image, clamping to [0, 1] and quantizing round-half-up.

    .pgm holds a single channel (8- or 16-bit), .ppm three 8-bit channels,
    .png either (16-bit only for single-channel).
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if bit_depth not in (8, 16):
        raise ImageFormatError(f"unsupported bit depth {bit_depth}")
    if bit_depth == 16 and img.channels != 1:
        raise ImageFormatError("16-bit output is supported for single-channel images only")
    maxval = 255 if bit_depth == 8 else 65535
    quantized = _quantize(img, maxval)

    if suffix == ".pgm":
        if img.channels != 1:
            raise ImageFormatError("PGM holds a single channel; got a color image")
        dtype = np.dtype("u1") if bit_depth == 8 else np.dtype(">u2")
        with open(path, "wb") as f:
            f.write(f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii"))
            f.write(quantized.astype(dtype)[:, :, 0].tobytes())
    elif suffix == ".ppm":
        if img.channels != 3:
            raise ImageFormatError("PPM holds three channels; got a single-channel image")
        if bit_depth != 8:
            raise ImageFormatError("16-bit PPM is not supported")
        with open(path, "wb") as f:
            f.write(f"P6\n{img.width} {img.height}\n{maxval}\n".encode("ascii"))
            f.write(quantized.astype(np.uint8).tobytes())
    elif suffix == ".png":
        if bit_depth == 16:
            PILImage.fromarray(quantized[:, :, 0].astype(np.uint16)).save(path)
        elif img.channels == 1:
            PILImage.fromarray(quantized[:, :, 0].astype(np.uint8)).save(path)
        else:
            PILImage.fromarray(quantized.astype(np.uint8)).save(path)
    else:
        raise ImageFormatError(f"unsupported output format {suffix!r}")
