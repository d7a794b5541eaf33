"""PNG / PFM readers and writers. All writers are atomic (temp file + rename)."""
from __future__ import annotations

import io
import os
import re
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageFormatError
from .panorama import EquirectImage


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c):
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def to_srgb8(linear) -> np.ndarray:
    """Linear [0, 1] floats to 8-bit sRGB codes."""
    return np.round(linear_to_srgb(linear) * 255.0).astype(np.uint8)


def quantize_srgb8(linear) -> np.ndarray:
    """8-bit sRGB values rescaled to [0, 1], i.e. what a saved PNG holds."""
    return to_srgb8(linear).astype(np.float64) / 255.0


def encode_png(img: EquirectImage) -> bytes:
    codes = to_srgb8(img.data)
    if codes.shape[2] == 1:
        codes = codes[:, :, 0]
    buf = io.BytesIO()
    Image.fromarray(codes).save(buf, format="PNG")
    return buf.getvalue()


def write_png(path, img: EquirectImage) -> None:
    atomic_write_bytes(path, encode_png(img))


def read_png(path) -> EquirectImage:
    try:
        im = Image.open(path)
    except UnidentifiedImageError:
        raise ImageFormatError(f"{path}: not a readable image") from None
    with im:
        mode = "L" if im.mode in ("L", "I", "I;16") else "RGB"
        codes = np.asarray(im.convert(mode), dtype=np.float64) / 255.0
    return EquirectImage(srgb_to_linear(codes).astype(np.float32))


def encode_pfm(img: EquirectImage) -> bytes:
    C = img.channels
    if C not in (1, 3):
        raise ImageFormatError("PFM stores 1 or 3 channels")
    header = f"{'PF' if C == 3 else 'Pf'}\n{img.width} {img.height}\n-1.0\n".encode("ascii")
    # PFM rows run bottom to top
    body = np.ascontiguousarray(img.data[::-1], dtype="<f4")
    return header + body.tobytes()


def write_pfm(path, img: EquirectImage) -> None:
    atomic_write_bytes(path, encode_pfm(img))


_PFM_HEADER = re.compile(rb"^(PF|Pf)\s+(\d+)\s+(\d+)\s+(-?[0-9.eE+-]+)\s")


def decode_pfm(raw: bytes) -> EquirectImage:
    m = _PFM_HEADER.match(raw)
    if not m:
        raise ImageFormatError("not a PFM file")
    C = 3 if m.group(1) == b"PF" else 1
    W, H = int(m.group(2)), int(m.group(3))
    scale = float(m.group(4))
    dtype = "<f4" if scale < 0 else ">f4"
    if len(raw) - m.end() < 4 * H * W * C:
        raise ImageFormatError("PFM payload is truncated")
    data = np.frombuffer(raw[m.end():], dtype=dtype, count=H * W * C)
    return EquirectImage(data.reshape(H, W, C)[::-1].astype(np.float32))


def read_pfm(path) -> EquirectImage:
    return decode_pfm(Path(path).read_bytes())


def read_image(path) -> EquirectImage:
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return read_pfm(path)
    return read_png(path)


def write_image(path, img: EquirectImage) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        write_pfm(path, img)
    else:
        write_png(path, img)
