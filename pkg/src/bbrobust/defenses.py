"""Inference-time preprocessing filters and training-time augmentation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .attacks import CHANNELS, grayscale, rotate
from .imgcore import as_image, make_rng, resize_bilinear, to_uint8

try:
    import cv2
except ImportError:  # pragma: no cover
    cv2 = None

FILTERS = ("none", "gauss", "median")


class InvalidParameter(ValueError):
    pass


def _check_ksize(img, ksize):
    if not isinstance(ksize, (int, np.integer)) or ksize < 3 or ksize % 2 == 0:
        raise InvalidParameter(f"ksize must be an odd integer >= 3, got {ksize!r}")
    if img is not None and ksize > min(img.shape[:2]):
        raise InvalidParameter(f"ksize {ksize} exceeds image side {min(img.shape[:2])}")


def gauss_sigma(ksize: int) -> float:
    return 0.3 * ((ksize - 1) / 2.0 - 1.0) + 0.8


def gauss_kernel(ksize: int) -> np.ndarray:
    _check_ksize(None, ksize)
    sigma = gauss_sigma(ksize)
    x = np.arange(ksize, dtype=np.float64) - (ksize - 1) / 2.0
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def gauss_filter(img, ksize: int):
    """Separable Gaussian blur per channel with reflect-101 borders."""
    img = as_image(img)
    _check_ksize(img, ksize)
    k = gauss_kernel(ksize)
    r = ksize // 2
    x = np.pad(img.astype(np.float64), ((r, r), (r, r), (0, 0)), mode="reflect")
    # window axis is appended last, so contract it against the 1-D kernel
    x = sliding_window_view(x, ksize, axis=0) @ k
    x = sliding_window_view(x, ksize, axis=1) @ k
    return to_uint8(x)


def median_filter(img, ksize: int):
    """Per-channel median over a ksize x ksize window, edge-replicated borders."""
    img = as_image(img)
    _check_ksize(img, ksize)
    if cv2 is not None:
        # medianBlur replicates borders, identical to the numpy path
        return as_image(cv2.medianBlur(np.ascontiguousarray(img), ksize))
    return _median_filter_numpy(img, ksize)


def _median_filter_numpy(img, ksize):
    r = ksize // 2
    x = np.pad(img, ((r, r), (r, r), (0, 0)), mode="edge")
    h, w, c = img.shape
    out = np.empty_like(img)
    mid = ksize * ksize // 2
    for ch in range(c):
        win = sliding_window_view(x[..., ch], (ksize, ksize)).reshape(h, w, ksize * ksize)
        out[..., ch] = np.partition(win, mid, axis=-1)[..., mid]
    return as_image(out)


def apply_filter(img, name: str, ksize: int):
    if name == "none":
        return as_image(img)
    if name == "gauss":
        return gauss_filter(img, ksize)
    if name == "median":
        return median_filter(img, ksize)
    raise InvalidParameter(f"unknown filter {name!r}")


@dataclass(frozen=True)
class MonoVerdict:
    kind: str  # "ok" | "single_channel" | "grayscale"
    channel: str | None = None

    def __str__(self):
        return f"single_channel({self.channel})" if self.channel else self.kind


def detect_monochrome(img) -> MonoVerdict:
    img = as_image(img)
    nonzero = [bool(img[..., k].any()) for k in range(3)]
    if sum(nonzero) == 1:
        return MonoVerdict("single_channel", CHANNELS[nonzero.index(True)])
    if np.array_equal(img[..., 0], img[..., 1]) and np.array_equal(img[..., 1], img[..., 2]):
        return MonoVerdict("grayscale")
    return MonoVerdict("ok")


def gray_normalize(img, verdict: MonoVerdict | None = None):
    """Map a monochrome input to a gray image.

    A single-channel input becomes that channel replicated to RGB (its only
    data is the gray image); anything else goes through luma conversion.
    """
    img = as_image(img)
    verdict = verdict or detect_monochrome(img)
    if verdict.kind == "single_channel":
        k = CHANNELS.index(verdict.channel)
        return as_image(np.repeat(img[..., k:k + 1], 3, axis=2))
    return grayscale(img)


@dataclass(frozen=True)
class Rejected:
    reason: str


@dataclass(frozen=True)
class DefenseConfig:
    filter: str = "none"
    ksize: int = 3
    grayscale_normalize: bool = False
    reject_monochrome: bool = False

    def __post_init__(self):
        if self.filter not in FILTERS:
            raise InvalidParameter(f"filter must be one of {FILTERS}")
        _check_ksize(None, self.ksize)

    def __str__(self):
        items = []
        if self.filter != "none":
            items.append(f"ksize={self.ksize}")
        if self.grayscale_normalize:
            items.append("grayflag")
        if self.reject_monochrome:
            items.append("rejectmono")
        return self.filter + (":" + ",".join(items) if items else "")


def parse_defense(text: str) -> DefenseConfig:
    """Parse ``<filter>[:ksize=N][,grayflag][,rejectmono]``, e.g. ``median:ksize=11,grayflag``."""
    name, _, rest = text.strip().partition(":")
    kwargs = {"filter": name.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if item.startswith("ksize="):
            try:
                kwargs["ksize"] = int(item[len("ksize="):])
            except ValueError as exc:
                raise InvalidParameter(f"bad ksize in {text!r}") from exc
        elif item == "grayflag":
            kwargs["grayscale_normalize"] = True
        elif item == "rejectmono":
            kwargs["reject_monochrome"] = True
        else:
            raise InvalidParameter(f"unknown defense option {item!r}")
    return DefenseConfig(**kwargs)


# Table 5 preprocessing row: median 11 plus grayscale handling
RECOMMENDED_DEFENSE = DefenseConfig("median", 11, grayscale_normalize=True)


def preprocess(img, cfg: DefenseConfig):
    """Monochrome check, optional gray normalization, then the filter.

    Returns the defended image, or a ``Rejected`` verdict.
    """
    img = as_image(img)
    if cfg.reject_monochrome or cfg.grayscale_normalize:
        verdict = detect_monochrome(img)
        if verdict.kind != "ok":
            if cfg.reject_monochrome:
                return Rejected(str(verdict))
            img = gray_normalize(img, verdict)
    if cfg.filter == "none":
        return img
    return apply_filter(img, cfg.filter, cfg.ksize)


# --- training-time augmentation --------------------------------------------


@dataclass(frozen=True)
class AugmentConfig:
    rotation_range: tuple[float, float] = (0.0, 360.0)
    grayscale_prob: float = 0.5
    hflip_prob: float = 0.5
    crop_size: int = 224
    # area fraction and aspect-ratio ranges for the random resized crop
    crop_scale: tuple[float, float] = (0.5, 1.0)
    crop_ratio: tuple[float, float] = (3 / 4, 4 / 3)
    train_filters: tuple[tuple[str, int], ...] = (("gauss", 29), ("median", 11))

    def __post_init__(self):
        for p in (self.grayscale_prob, self.hflip_prob):
            if not 0.0 <= p <= 1.0:
                raise InvalidParameter("probabilities must be in [0, 1]")
        if self.crop_size < 1:
            raise InvalidParameter("crop_size must be >= 1")
        lo, hi = self.crop_scale
        if not 0.0 < lo <= hi <= 1.0:
            raise InvalidParameter("crop_scale must satisfy 0 < lo <= hi <= 1")
        if not 0.0 < self.crop_ratio[0] <= self.crop_ratio[1]:
            raise InvalidParameter("crop_ratio must be positive and ordered")
        for name, k in self.train_filters:
            if name not in ("gauss", "median"):
                raise InvalidParameter(f"unknown training filter {name!r}")
            _check_ksize(None, k)

    @classmethod
    def identity(cls, crop_size: int = 224) -> "AugmentConfig":
        return cls((0.0, 0.0), 0.0, 0.0, crop_size, (1.0, 1.0), (1.0, 1.0), ())


def random_resized_crop(img, size, scale, ratio, rng):
    h, w = img.shape[:2]
    area = h * w
    s = rng.uniform(*scale)
    log_r = rng.uniform(math.log(ratio[0]), math.log(ratio[1]))
    r = math.exp(log_r)
    cw = min(w, max(1, int(round(math.sqrt(s * area * r)))))
    ch = min(h, max(1, int(round(math.sqrt(s * area / r)))))
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    return resize_bilinear(img[top:top + ch, left:left + cw], size, size)


def augment(img, cfg: AugmentConfig, seed: int):
    """Crop, flip, rotate, grayscale, then one training filter, all drawn from ``seed``.

    Every random number is drawn regardless of outcome so the draw sequence is
    fixed per config.
    """
    rng = make_rng(seed)
    out = random_resized_crop(as_image(img), cfg.crop_size, cfg.crop_scale, cfg.crop_ratio, rng)
    if rng.random() < cfg.hflip_prob:
        out = as_image(out[:, ::-1])
    angle = rng.uniform(*cfg.rotation_range)
    if angle != 0.0:
        out = rotate(out, angle)
    if rng.random() < cfg.grayscale_prob:
        out = grayscale(out)
    if cfg.train_filters:
        name, k = cfg.train_filters[int(rng.integers(0, len(cfg.train_filters)))]
        if k <= min(out.shape[:2]):
            out = apply_filter(out, name, k)
    return out
