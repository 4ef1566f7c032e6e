"""Read and write 14-bit grayscale radiographs (binary PGM and 16-bit PNG)."""
from __future__ import annotations

import os
import re

import numpy as np

from .errors import ParseError

MAXVAL = 16383

_PGM_HEADER = re.compile(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+"
                         rb"(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    m = _PGM_HEADER.match(data)
    if m is None:
        raise ParseError(f"{path}: not a binary (P5) PGM file")
    width, height, maxval = (int(g) for g in m.groups())
    if not 0 < maxval <= MAXVAL:
        raise ParseError(f"{path}: maxval {maxval} outside 1..{MAXVAL}")
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    if len(data) - m.end() < count * np.dtype(dtype).itemsize:
        raise ParseError(f"{path}: truncated pixel data")
    body = np.frombuffer(data, dtype=dtype, count=count, offset=m.end())
    return body.reshape(height, width).astype(np.uint16)


def write_pgm(path, image: np.ndarray, maxval: int = MAXVAL) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM images must be 2-D")
    if img.min() < 0 or img.max() > maxval:
        raise ValueError(f"intensities must lie in 0..{maxval}")
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (img.shape[1], img.shape[0], maxval))
        fh.write(img.astype(">u2" if maxval > 255 else "u1").tobytes())


def read_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("I;16", "I;16B", "I", "L"):
            raise ParseError(f"{path}: expected grayscale PNG, got mode {im.mode}")
        arr = np.array(im)
    if arr.min() < 0 or arr.max() > MAXVAL:
        raise ParseError(f"{path}: intensities exceed the 14-bit range")
    return arr.astype(np.uint16)


def write_png(path, image: np.ndarray) -> None:
    from PIL import Image

    img = np.asarray(image, dtype=np.uint16)
    Image.fromarray(img).save(path)


def read_image(path) -> np.ndarray:
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".pgm", ".pnm"):
        return read_pgm(path)
    if ext == ".png":
        return read_png(path)
    raise ParseError(f"{path}: unsupported image type {ext!r}")
