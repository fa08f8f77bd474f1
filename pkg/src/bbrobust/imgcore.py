"""Image representation, PNG/PPM I/O, domain conversion and seeded randomness.

Images are ``uint8`` numpy arrays of shape ``(height, width, 3)`` in RGB
order. Float images are ``float64`` arrays of the same shape, nominally in
``[0, 1]``.
"""

from __future__ import annotations

import hashlib
import io
import os
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
STANDARD_SIZE = 224


class ImageError(Exception):
    pass


class UnsupportedFormat(ImageError):
    pass


class CorruptImage(ImageError):
    pass


def as_image(data) -> np.ndarray:
    """Validate ``data`` as an RGB image and return a read-only uint8 array."""
    arr = np.asarray(data)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
            raise ValueError("non-finite intensities")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("intensities outside [0, 255]")
        if np.issubdtype(arr.dtype, np.floating) and np.any(arr != np.round(arr)):
            raise ValueError("non-integral intensities; use quantize()")
        arr = arr.astype(np.uint8)
    else:
        arr = arr.copy()
    arr.setflags(write=False)
    return arr


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def normalize(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=np.float64) / 255.0


def quantize(fimg: np.ndarray) -> np.ndarray:
    clipped = np.clip(np.asarray(fimg, dtype=np.float64), 0.0, 1.0)
    return as_image(round_half_away(255.0 * clipped))


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Round 8-bit-domain floats with the shared rule and clamp to [0, 255]."""
    return as_image(np.clip(round_half_away(values), 0, 255))


# --- I/O ------------------------------------------------------------------


def _read_ppm(raw: bytes) -> np.ndarray:
    # header: magic, width, height, maxval, separated by whitespace, comments allowed
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise CorruptImage("truncated PPM header")
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte before the raster
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise CorruptImage(f"bad PPM header: {tokens!r}") from exc
    if maxval != 255:
        raise UnsupportedFormat(f"PPM maxval {maxval} not supported (need 255)")
    if width < 1 or height < 1:
        raise CorruptImage("PPM has empty geometry")
    payload = raw[pos:pos + width * height * 3]
    if len(payload) != width * height * 3:
        raise CorruptImage("truncated PPM raster")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)


def _read_png(raw: bytes) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(raw)) as im:
            im.load()
            if im.mode in ("RGBA", "LA", "P", "PA", "L", "1", "RGB"):
                im = im.convert("RGB")
            else:
                raise UnsupportedFormat(f"PNG mode {im.mode} not supported")
            return np.array(im, dtype=np.uint8)
    except UnsupportedFormat:
        raise
    except Exception as exc:
        raise CorruptImage(f"cannot decode PNG: {exc}") from exc


def decode_image(raw: bytes) -> np.ndarray:
    if raw.startswith(PNG_MAGIC):
        return as_image(_read_png(raw))
    if raw.startswith(b"P6"):
        return as_image(_read_ppm(raw))
    raise UnsupportedFormat("not a PNG or binary PPM (P6) file")


def load_image(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    return decode_image(path.read_bytes())


def encode_image(img: np.ndarray, fmt: str = "png") -> bytes:
    img = as_image(img)
    if fmt == "ppm":
        h, w, _ = img.shape
        return f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()
    if fmt == "png":
        buf = io.BytesIO()
        PILImage.fromarray(img, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()
    raise UnsupportedFormat(f"unknown output format {fmt!r}")


def save_image(img: np.ndarray, path, fmt: str | None = None) -> None:
    path = Path(path)
    if fmt is None:
        fmt = "ppm" if path.suffix.lower() == ".ppm" else "png"
    data = encode_image(img, fmt)
    # IoError surfaces as OSError (FileNotFoundError for a missing parent)
    with open(path, "wb") as fh:
        fh.write(data)


def canonical_bytes(img: np.ndarray) -> bytes:
    """Format-independent byte form: geometry header plus raw RGB raster."""
    img = as_image(img)
    h, w, _ = img.shape
    return f"RGB8 {w} {h}\n".encode("ascii") + img.tobytes()


def image_digest(img: np.ndarray) -> str:
    return hashlib.sha256(canonical_bytes(img)).hexdigest()


# --- geometry -------------------------------------------------------------


def resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resample with pixel-centre alignment and edge clamping.

    Same-size resampling is the identity and constant images stay constant.
    """
    src = np.asarray(img, dtype=np.float64)
    in_h, in_w = src.shape[:2]
    if (in_h, in_w) == (height, width):
        return as_image(img)

    def axis(n_out, n_in):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0, n_in - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis(height, in_h)
    x0, x1, fx = axis(width, in_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    return to_uint8(top * (1 - fy) + bottom * fy)


def resize_cover(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Scale so the target box is covered, then center-crop to it."""
    img = as_image(img)
    in_h, in_w = img.shape[:2]
    scale = max(height / in_h, width / in_w)
    new_h = max(height, int(round_half_away(in_h * scale)))
    new_w = max(width, int(round_half_away(in_w * scale)))
    scaled = resize_bilinear(img, new_h, new_w)
    top = (new_h - height) // 2
    left = (new_w - width) // 2
    return as_image(scaled[top:top + height, left:left + width])


def clip_to_standard(img: np.ndarray, size: int = STANDARD_SIZE) -> np.ndarray:
    """Scale the shorter side to ``size`` (bilinear) and center-crop a square."""
    if size < 1:
        raise ValueError("size must be >= 1")
    return resize_cover(img, size, size)


# --- randomness -----------------------------------------------------------

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed; the only RNG family used in the package."""
    return np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))


def derive_seed(master: int, *keys) -> int:
    """Child seed from a master seed and arbitrary keys (SHA-256, first 8 bytes)."""
    h = hashlib.sha256(str(int(master) & SEED_MASK).encode("ascii"))
    for key in keys:
        h.update(b"\x1f")
        h.update(str(key).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def ensure_parent(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
