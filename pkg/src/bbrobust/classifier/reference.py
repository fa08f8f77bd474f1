"""Offline reference classifier: nearest centroid on 4x4x4 RGB color histograms."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..defenses import AugmentConfig, augment
from ..imgcore import as_image, clip_to_standard, derive_seed
from .types import Classification, Label

BINS = 4
MODEL_FORMAT = "bbrobust.refmodel"
MODEL_VERSION = 1


class InsufficientData(ValueError):
    pass


def color_histogram(img) -> np.ndarray:
    """64-dim normalized joint RGB histogram with 4 bins per channel."""
    img = as_image(img)
    q = img.astype(np.intp) * BINS // 256
    idx = (q[..., 0] * BINS + q[..., 1]) * BINS + q[..., 2]
    hist = np.bincount(idx.ravel(), minlength=BINS**3).astype(np.float64)
    return hist / hist.sum()


def hellinger(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hellinger distance between histograms, in [0, 1]; broadcasts over rows of ``q``."""
    return np.linalg.norm(np.sqrt(q) - np.sqrt(p), axis=-1) / np.sqrt(2.0)


@dataclass(frozen=True)
class RefModel:
    classes: tuple[str, ...]
    centroids: np.ndarray  # (n_classes, 64)

    @property
    def backend_id(self) -> str:
        import hashlib

        return "ref:" + hashlib.sha256(self.to_json().encode()).hexdigest()[:12]

    def to_json(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "bins": BINS,
            "classes": [
                {"name": name, "centroid": [float(v) for v in row]}
                for name, row in zip(self.classes, self.centroids)
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "RefModel":
        doc = json.loads(text)
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise ValueError("not a version-1 reference model document")
        names = tuple(c["name"] for c in doc["classes"])
        cents = np.array([c["centroid"] for c in doc["classes"]], dtype=np.float64)
        if cents.shape != (len(names), BINS**3):
            raise ValueError(f"bad centroid matrix shape {cents.shape}")
        return cls(names, cents)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "RefModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


def train_reference(dataset, augment_cfg: AugmentConfig | None = None, passes: int = 1,
                    seed: int = 0) -> RefModel:
    """Average per-class histograms over ``passes`` augmented draws of every image.

    ``dataset`` is an iterable of ``(image, class_name)``; class order follows first
    appearance. ``augment_cfg=None`` trains on the standardized images as-is.
    """
    feats: dict[str, list[np.ndarray]] = {}
    for i, (img, name) in enumerate(dataset):
        base = clip_to_standard(img)
        for p in range(passes if augment_cfg is not None else 1):
            x = base if augment_cfg is None else augment(base, augment_cfg, derive_seed(seed, i, p))
            feats.setdefault(name, []).append(color_histogram(x))
    if len(feats) < 2:
        raise InsufficientData("need at least two classes")
    classes = tuple(feats)
    cents = np.stack([np.mean(feats[c], axis=0) for c in classes])
    return RefModel(classes, cents)


def predict_reference(model: RefModel, img, backend_id: str | None = None) -> Classification:
    """Softmax over negative Hellinger distances to the class centroids."""
    d = hellinger(color_histogram(img), model.centroids)
    z = np.exp(-(d - d.min()))
    p = z / z.sum()
    labels = tuple(Label(name, float(min(1.0, pi))) for name, pi in zip(model.classes, p))
    return Classification(labels, backend_id or model.backend_id)


class ReferenceBackend:
    def __init__(self, model: RefModel):
        self.model = model
        self.backend_id = model.backend_id

    def classify(self, img) -> Classification:
        return predict_reference(self.model, img, self.backend_id)
