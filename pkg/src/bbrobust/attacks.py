"""Simple Transformation attacks and Image Fusion.

Every attack maps an RGB uint8 image to a new image of the same geometry.
Stochastic attacks take an explicit seed and can return the noise field or
corruption mask they drew.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .imgcore import (
    as_image,
    load_image,
    make_rng,
    normalize,
    quantize,
    resize_cover,
    round_half_away,
    to_uint8,
)

CHANNELS = ("red", "green", "blue")
KINDS = ("gaussian", "saltpepper", "rotate", "mono", "gray", "fusion")

# Table-level grouping: grayscale shares the monochromatization row
FAMILIES = {
    "gaussian": "gaussian",
    "saltpepper": "saltpepper",
    "rotate": "rotate",
    "mono": "mono",
    "gray": "mono",
    "fusion": "fusion",
}


class InvalidParameter(ValueError):
    pass


def gaussian_noise(img, mean=0.0, var=0.0, seed=0, return_noise=False):
    """Add N(mean, var) noise in the unit domain, then clip and requantize."""
    if not var >= 0:
        raise InvalidParameter(f"var must be >= 0, got {var}")
    base = normalize(img)
    noise = make_rng(seed).normal(mean, math.sqrt(var), size=base.shape)
    out = quantize(base + noise)
    return (out, noise) if return_noise else out


def salt_pepper(img, amount, seed=0, per_pixel=False, return_mask=False):
    """Impulse noise: each coordinate goes to 0 or 255 with probability amount/2 each.

    With ``per_pixel=True`` the draw is made once per pixel and applied to all
    three channels instead of independently per channel.
    """
    if not 0.0 <= amount <= 1.0:
        raise InvalidParameter(f"amount must be in [0, 1], got {amount}")
    img = as_image(img)
    h, w, c = img.shape
    shape = (h, w, 1) if per_pixel else (h, w, c)
    u = make_rng(seed).random(shape)
    pepper = u < amount / 2
    salt = (u >= amount / 2) & (u < amount)
    out = img.copy()
    out[np.broadcast_to(pepper, img.shape)] = 0
    out[np.broadcast_to(salt, img.shape)] = 255
    out = as_image(out)
    if return_mask:
        return out, np.broadcast_to(pepper | salt, img.shape)
    return out


def rotate(img, degree):
    """Rotate clockwise about the image center, keeping the canvas; corners fill black."""
    img = as_image(img)
    h, w = img.shape[:2]
    d = degree % 360.0
    quarter = d / 90.0
    if quarter == int(quarter):
        k = int(quarter) % 4
        if k == 0:
            return img
        if k == 2:
            return as_image(img[::-1, ::-1])
        if h == w:
            return as_image(np.rot90(img, k=-k))
    return _rotate_bilinear(img, d)


def _rotate_bilinear(img, degree):
    h, w = img.shape[:2]
    theta = math.radians(degree)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    # inverse of the clockwise map (y axis points down)
    sx = cos_t * dx + sin_t * dy + cx
    sy = -sin_t * dx + cos_t * dy + cy

    padded = np.zeros((h + 2, w + 2, 3), dtype=np.float64)
    padded[1:-1, 1:-1] = img
    # shift into padded coordinates; anything beyond one pixel outside is black
    sx = np.clip(sx + 1, -1, w + 2)
    sy = np.clip(sy + 1, -1, h + 2)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]

    def tap(yi, xi):
        inside = (yi >= 0) & (yi < h + 2) & (xi >= 0) & (xi < w + 2)
        vals = padded[np.clip(yi, 0, h + 1), np.clip(xi, 0, w + 1)]
        return vals * inside[..., None]

    out = (
        tap(y0, x0) * (1 - fx) * (1 - fy)
        + tap(y0, x0 + 1) * fx * (1 - fy)
        + tap(y0 + 1, x0) * (1 - fx) * fy
        + tap(y0 + 1, x0 + 1) * fx * fy
    )
    return to_uint8(out)


def monochromatize(img, channel):
    """Keep one RGB channel and zero the other two."""
    if channel not in CHANNELS:
        raise InvalidParameter(f"channel must be one of {CHANNELS}, got {channel!r}")
    img = as_image(img)
    out = np.zeros_like(img)
    k = CHANNELS.index(channel)
    out[..., k] = img[..., k]
    return as_image(out)


def grayscale(img):
    """Luma 0.299 R + 0.587 G + 0.114 B, rounded half up and replicated to 3 channels."""
    img = as_image(img).astype(np.int64)
    # integer arithmetic keeps the .5 ties exact
    g = (299 * img[..., 0] + 587 * img[..., 1] + 114 * img[..., 2] + 500) // 1000
    return as_image(np.repeat(g[..., None], 3, axis=2))


def image_fusion(original, background, alpha):
    """Blend ``alpha * original + (1 - alpha) * background`` in the 8-bit domain."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameter(f"alpha must be in [0, 1], got {alpha}")
    original = as_image(original)
    background = as_image(background)
    if background.shape != original.shape:
        background = resize_cover(background, *original.shape[:2])
    if alpha == 1.0:
        return original
    if alpha == 0.0:
        return background
    mixed = alpha * original.astype(np.float64) + (1.0 - alpha) * background.astype(np.float64)
    return as_image(round_half_away(mixed))


# --- attack specs ---------------------------------------------------------


def _fmt(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


@dataclass(frozen=True)
class AttackSpec:
    """One attack cell, e.g. ``AttackSpec("gaussian", var=0.05)``.

    ``background`` holds a path for fusion; the image itself is loaded on demand.
    """

    kind: str
    mean: float | None = None
    var: float | None = None
    amount: float | None = None
    degree: float | None = None
    channel: str | None = None
    alpha: float | None = None
    background: str | None = None

    def __post_init__(self):
        required = {
            "gaussian": {"var"},
            "saltpepper": {"amount"},
            "rotate": {"degree"},
            "mono": {"channel"},
            "gray": set(),
            "fusion": {"alpha", "background"},
        }
        optional = {"gaussian": {"mean"}}
        if self.kind not in required:
            raise InvalidParameter(f"unknown attack kind {self.kind!r}")
        given = {
            name
            for name in ("mean", "var", "amount", "degree", "channel", "alpha", "background")
            if getattr(self, name) is not None
        }
        missing = required[self.kind] - given
        extra = given - required[self.kind] - optional.get(self.kind, set())
        if missing or extra:
            raise InvalidParameter(
                f"{self.kind}: missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        if self.var is not None and self.var < 0:
            raise InvalidParameter("var must be >= 0")
        if self.amount is not None and not 0 <= self.amount <= 1:
            raise InvalidParameter("amount must be in [0, 1]")
        if self.alpha is not None and not 0 <= self.alpha <= 1:
            raise InvalidParameter("alpha must be in [0, 1]")
        if self.channel is not None and self.channel not in CHANNELS:
            raise InvalidParameter(f"channel must be one of {CHANNELS}")

    @property
    def family(self) -> str:
        return FAMILIES[self.kind]

    @property
    def stochastic(self) -> bool:
        return self.kind in ("gaussian", "saltpepper")

    def __str__(self) -> str:
        if self.kind == "gaussian":
            s = f"gaussian:var={_fmt(self.var)}"
            if self.mean:
                s = f"gaussian:mean={_fmt(self.mean)},var={_fmt(self.var)}"
            return s
        if self.kind == "saltpepper":
            return f"saltpepper:amount={_fmt(self.amount)}"
        if self.kind == "rotate":
            return f"rotate:degree={_fmt(self.degree)}"
        if self.kind == "mono":
            return f"mono:channel={self.channel}"
        if self.kind == "gray":
            return "gray"
        return f"fusion:alpha={_fmt(self.alpha)},bg={self.background}"

    def parameter(self):
        """The swept parameter value (x axis in plots)."""
        return {
            "gaussian": self.var,
            "saltpepper": self.amount,
            "rotate": self.degree,
            "mono": self.channel,
            "gray": "gray",
            "fusion": self.alpha,
        }[self.kind]


def parse_attack(text: str) -> AttackSpec:
    """Parse the canonical text form, e.g. ``saltpepper:amount=0.01``."""
    kind, _, rest = text.strip().partition(":")
    kwargs = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise InvalidParameter(f"malformed attack parameter {item!r} in {text!r}")
            key = key.strip()
            if key == "bg":
                kwargs["background"] = value
            elif key == "channel":
                kwargs["channel"] = value.strip()
            elif key in ("mean", "var", "amount", "degree", "alpha"):
                try:
                    kwargs[key] = float(value)
                except ValueError as exc:
                    raise InvalidParameter(f"{key}={value!r} is not a number") from exc
            else:
                raise InvalidParameter(f"unknown attack parameter {key!r}")
    try:
        return AttackSpec(kind.strip(), **kwargs)
    except TypeError as exc:
        raise InvalidParameter(str(exc)) from exc


@lru_cache(maxsize=16)
def _cached_background(path: str):
    return load_image(path)


def apply_attack(img, spec: AttackSpec, seed: int = 0, background=None):
    """Run one attack cell. ``background`` overrides the spec's path for fusion."""
    if spec.kind == "gaussian":
        return gaussian_noise(img, spec.mean or 0.0, spec.var, seed)
    if spec.kind == "saltpepper":
        return salt_pepper(img, spec.amount, seed)
    if spec.kind == "rotate":
        return rotate(img, spec.degree)
    if spec.kind == "mono":
        return monochromatize(img, spec.channel)
    if spec.kind == "gray":
        return grayscale(img)
    if background is None:
        background = _cached_background(spec.background)
    return image_fusion(img, background, spec.alpha)


def default_grid() -> list[AttackSpec]:
    """The 16 Simple Transformation cells, four levels per method."""
    grid = [AttackSpec("gaussian", var=v) for v in (0.05, 0.10, 0.15, 0.20)]
    grid += [AttackSpec("rotate", degree=d) for d in (45.0, 90.0, 135.0, 180.0)]
    grid += [AttackSpec("saltpepper", amount=a) for a in (0.01, 0.02, 0.03, 0.04)]
    grid += [AttackSpec("mono", channel=c) for c in ("blue", "green", "red")]
    grid.append(AttackSpec("gray"))
    return grid


def fusion_grid(background: str, alphas=(0.2, 0.4, 0.6, 0.8, 1.0)) -> list[AttackSpec]:
    return [AttackSpec("fusion", alpha=a, background=background) for a in alphas]


def validate_grid(grid) -> list[AttackSpec]:
    grid = list(grid)
    if not grid:
        raise InvalidParameter("attack grid is empty")
    if len(set(grid)) != len(grid):
        raise InvalidParameter("attack grid has duplicate cells")
    return grid


def grid_levels(grid) -> dict[AttackSpec, str]:
    """Level label per cell: position within its family, in grid order (L1, L2, ...)."""
    counts: dict[str, int] = {}
    levels = {}
    for spec in grid:
        counts[spec.family] = counts.get(spec.family, 0) + 1
        levels[spec] = f"L{counts[spec.family]}"
    return levels
