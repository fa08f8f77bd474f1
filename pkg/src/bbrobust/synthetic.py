"""Synthetic image fixtures: smooth natural-like scenes, class-conditioned
color datasets for the reference classifier, and fusion backgrounds."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imgcore import as_image, derive_seed, make_rng, save_image, to_uint8

# (background RGB, object RGB, secondary RGB) per class, loosely after the animals
CLASS_PALETTES = {
    "tench": ((55, 75, 40), (95, 105, 45), (70, 60, 30)),
    "goldfish": ((40, 90, 160), (235, 125, 30), (250, 200, 80)),
    "white shark": ((20, 60, 120), (200, 205, 210), (120, 130, 140)),
    "cat": ((190, 170, 140), (150, 105, 65), (90, 85, 80)),
}
DEFAULT_CLASSES = tuple(CLASS_PALETTES)
CLASS_SYNONYMS = {
    "tench": ("tinca", "fish"),
    "goldfish": ("carassius", "koi"),
    "white shark": ("great white", "shark"),
    "cat": ("kitten", "feline", "tabby"),
}


def _smooth_field(rng, h, w, n_waves=4, max_freq=3.0):
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    field = np.zeros((h, w))
    for _ in range(n_waves):
        fy, fx = rng.uniform(-max_freq, max_freq, 2)
        phase = rng.uniform(0, 2 * np.pi)
        field += np.cos(2 * np.pi * (fy * yy + fx * xx) + phase)
    return field / n_waves


def natural_fixture(seed: int, size: int = 224) -> np.ndarray:
    """Smooth, colorful scene: low-frequency color waves plus a few soft blobs."""
    rng = make_rng(seed)
    h = w = size
    img = np.empty((h, w, 3))
    base = rng.uniform(60, 190, 3)
    for k in range(3):
        img[..., k] = base[k] + 55 * _smooth_field(rng, h, w)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(3):
        cy, cx = rng.uniform(0.2, 0.8, 2) * size
        r = rng.uniform(0.08, 0.2) * size
        color = rng.uniform(20, 235, 3)
        weight = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))[..., None]
        img = img * (1 - weight) + color * weight
    return to_uint8(np.clip(img, 0, 255))


def class_image(class_name: str, seed: int, size: int = 224, texture: float = 14.0) -> np.ndarray:
    """One image of a palette class: tinted background, an elliptical object, texture."""
    bg, obj, sec = (np.array(c, dtype=np.float64) for c in CLASS_PALETTES[class_name])
    rng = make_rng(seed)
    h = w = size
    jitter = lambda: rng.normal(0, 10, 3)  # noqa: E731
    img = np.empty((h, w, 3))
    shade = 18 * _smooth_field(rng, h, w, n_waves=2, max_freq=1.5)
    img[:] = bg + jitter()
    img += shade[..., None]
    yy, xx = np.mgrid[0:h, 0:w] / size
    cy, cx = rng.uniform(0.35, 0.65, 2)
    ry, rx = rng.uniform(0.15, 0.3, 2)
    angle = rng.uniform(0, np.pi)
    dy, dx = yy - cy, xx - cx
    u = dx * np.cos(angle) + dy * np.sin(angle)
    v = -dx * np.sin(angle) + dy * np.cos(angle)
    body = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0
    img[body] = obj + jitter() + shade[body][:, None]
    stripes = body & (np.sin(2 * np.pi * (u * rng.uniform(6, 12))) > 0.6)
    img[stripes] = sec + jitter()
    img += rng.normal(0, texture, img.shape)
    return to_uint8(np.clip(img, 0, 255))


def class_dataset(n_per_class: int, seed: int, classes=DEFAULT_CLASSES, size: int = 224):
    """``[(image, class_name), ...]`` interleaved by class."""
    out = []
    for i in range(n_per_class):
        for c in classes:
            out.append((class_image(c, derive_seed(seed, c, i), size), c))
    return out


def fusion_background(seed: int, size: int = 224, patch: int = 16) -> np.ndarray:
    """Mosaic of saturated color patches with sharp edges, unlike any palette class.

    Patches are larger than the defensive filter windows, so smoothing keeps them.
    """
    rng = make_rng(seed)
    colors = np.array([
        (230, 30, 200), (40, 220, 220), (240, 230, 40), (140, 40, 230),
        (250, 90, 140), (60, 240, 90), (30, 30, 30), (245, 245, 245),
    ], dtype=np.float64)
    n = -(-size // patch)
    idx = rng.integers(0, len(colors), (n, n))
    img = colors[idx].repeat(patch, axis=0).repeat(patch, axis=1)[:size, :size]
    img = img + rng.normal(0, 6, img.shape)
    return to_uint8(np.clip(img, 0, 255))


def write_dataset(root, items, manifest_name: str = "manifest.csv", synonyms=CLASS_SYNONYMS):
    """Save ``(image, class)`` items as PNGs plus a manifest; returns the manifest path."""
    from .harness.manifest import write_manifest

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, (img, c) in enumerate(items):
        name = f"{c.replace(' ', '_')}_{i:04d}.png"
        save_image(as_image(img), root / name)
        rows.append((name, c, synonyms.get(c, ())))
    path = root / manifest_name
    write_manifest(path, rows)
    return path
