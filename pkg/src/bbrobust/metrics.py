"""MSE, PSNR and SSIM between two RGB images, all in the 8-bit domain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

MAX_I = 255.0
SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
PSNR_DISPLAY_CAP = 40.0


class ShapeMismatch(ValueError):
    pass


class ImageTooSmall(ValueError):
    pass


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(err: float) -> float:
    if err == 0:
        return math.inf
    return 10.0 * math.log10(MAX_I**2 / err)


def psnr(a, b) -> float:
    return psnr_from_mse(mse(a, b))


def gaussian_window(size: int = SSIM_WIN, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable weighted sum over every fully-inside window, per channel
    rows = sliding_window_view(x, g.size, axis=0) @ g
    return sliding_window_view(rows, g.size, axis=1) @ g


def ssim_map(a, b) -> np.ndarray:
    """Local SSIM at every valid window position, shape (H-10, W-10, 3)."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if min(a.shape[:2]) < SSIM_WIN:
        raise ImageTooSmall(f"SSIM needs both sides >= {SSIM_WIN}, got {a.shape[:2]}")
    g = gaussian_window()
    c1 = (SSIM_K1 * MAX_I) ** 2
    c2 = (SSIM_K2 * MAX_I) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    # central moments from the shifted signal to limit cancellation
    da = a - a.mean()
    db = b - b.mean()
    ma = mu_a - a.mean()
    mb = mu_b - b.mean()
    var_a = _filter_valid(da * da, g) - ma * ma
    var_b = _filter_valid(db * db, g) - mb * mb
    cov = _filter_valid(da * db, g) - ma * mb
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b) -> float:
    """Mean local SSIM (11x11 Gaussian window, sigma 1.5), averaged over channels."""
    a_arr = np.asarray(a)
    if a_arr.shape == np.shape(b) and np.array_equal(a_arr, b):
        if min(a_arr.shape[:2]) < SSIM_WIN:
            raise ImageTooSmall(f"SSIM needs both sides >= {SSIM_WIN}")
        return 1.0
    smap = ssim_map(a, b)
    return float(np.mean(smap.mean(axis=(0, 1))))


@dataclass(frozen=True)
class QualityReport:
    mse: float
    psnr: float
    ssim: float

    @property
    def good_similarity(self) -> bool:
        return 0.5 < self.ssim <= 1.0

    @property
    def typical_quality(self) -> bool:
        return 20.0 <= self.psnr <= 40.0

    def to_dict(self) -> dict:
        return {"mse": self.mse, "psnr": format_psnr(self.psnr), "ssim": self.ssim}

    @classmethod
    def from_dict(cls, d: dict) -> "QualityReport":
        return cls(float(d["mse"]), parse_psnr(d["psnr"]), float(d["ssim"]))


def format_psnr(value: float):
    return "inf" if math.isinf(value) else value


def parse_psnr(value) -> float:
    return math.inf if value == "inf" else float(value)


def psnr_for_plot(value: float) -> float:
    return min(value, PSNR_DISPLAY_CAP)


def quality(a, b) -> QualityReport:
    err = mse(a, b)
    if err == 0:
        return QualityReport(0.0, math.inf, 1.0)
    return QualityReport(err, psnr_from_mse(err), ssim(a, b))
