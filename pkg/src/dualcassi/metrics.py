"""Reconstruction quality metrics: PSNR, SSIM and spectral angle.

Conventions are fixed here once: peak is 1.0 (cubes are normalized), PSNR and
SSIM are means over per-band values, the spectral angle is a mean over pixels
in degrees. Zero-MSE bands report the 99 dB cap so means stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .core import HsiCube

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SAM_NORM_EPS = 1e-12


@dataclass(frozen=True)
class MetricReport:
    """One evaluation: band-mean PSNR/SSIM and pixel-mean spectral angle."""

    psnr_db: float
    ssim: float
    sam_deg: float

    def csv_row(self, scene_id: str, method: str) -> str:
        return f"{scene_id},{method},{self.psnr_db!r},{self.ssim!r},{self.sam_deg!r}"


def _check_dims(ref: HsiCube, test: HsiCube) -> None:
    if ref.data.shape != test.data.shape:
        raise ValueError(
            f"cube shapes differ: {ref.data.shape} vs {test.data.shape}"
        )


def psnr(ref: HsiCube, test: HsiCube) -> float:
    """Band-mean 10*log10(1/MSE) in dB, each band capped at 99 dB."""
    _check_dims(ref, test)
    diff = ref.data - test.data
    mse = diff.reshape(ref.bands, -1).astype(np.float64) ** 2
    per_band_mse = mse.mean(axis=1)
    with np.errstate(divide="ignore"):
        vals = 10.0 * np.log10(1.0 / per_band_mse)
    vals = np.minimum(vals, PSNR_CAP_DB)
    return float(vals.mean())


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    ax = np.arange(size) - half
    g = np.exp(-0.5 * (ax / sigma) ** 2)
    win = np.outer(g, g)
    return win / win.sum()


def _ssim_band(ref: np.ndarray, test: np.ndarray, win: np.ndarray) -> float:
    # Local weighted statistics on the interior where the full window fits.
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mu_x = correlate(ref, win, mode="constant")
    mu_y = correlate(test, win, mode="constant")
    xx = correlate(ref * ref, win, mode="constant")
    yy = correlate(test * test, win, mode="constant")
    xy = correlate(ref * test, win, mode="constant")
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    pad = win.shape[0] // 2
    ssim_map = num / den
    return float(ssim_map[pad:-pad, pad:-pad].mean())


def ssim(ref: HsiCube, test: HsiCube) -> float:
    """Band-mean structural similarity with an 11x11 Gaussian window (sigma 1.5)."""
    _check_dims(ref, test)
    if ref.height < SSIM_WINDOW or ref.width < SSIM_WINDOW:
        raise ValueError(
            f"spatial dims {ref.width}x{ref.height} smaller than the "
            f"{SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    vals = [_ssim_band(ref.data[i], test.data[i], win) for i in range(ref.bands)]
    return float(np.mean(vals))


def sam(ref: HsiCube, test: HsiCube) -> float:
    """Pixel-mean spectral angle in degrees; zero-norm spectra are excluded.

    Computed as 2*arcsin(||u - v|| / 2) on the unit-normalized spectra, the
    half-angle form of arccos(<u, v>); it is exact at zero angle, where the
    dot-product form loses the last bits to normalization round-off.
    """
    _check_dims(ref, test)
    a = ref.data.reshape(ref.bands, -1)
    b = test.data.reshape(ref.bands, -1)
    na = np.linalg.norm(a, axis=0)
    nb = np.linalg.norm(b, axis=0)
    keep = (na > SAM_NORM_EPS) & (nb > SAM_NORM_EPS)
    if not keep.any():
        raise ValueError("every pixel has a zero-norm spectrum on one side")
    u = a[:, keep] / na[keep]
    v = b[:, keep] / nb[keep]
    half_chord = 0.5 * np.linalg.norm(u - v, axis=0)
    angles = 2.0 * np.arcsin(np.clip(half_chord, 0.0, 1.0))
    return float(np.degrees(angles).mean())


def evaluate(ref: HsiCube, test: HsiCube) -> MetricReport:
    return MetricReport(psnr_db=psnr(ref, test), ssim=ssim(ref, test), sam_deg=sam(ref, test))
