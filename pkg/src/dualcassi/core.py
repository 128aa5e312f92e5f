"""Core domain types for hyperspectral cubes, masks, measurements and camera curves.

All arrays are float64 internally and are copied and frozen (read-only) at
construction, so every type is immutable and safe to share across threads.
Cubes use a band-major layout: ``data[band, row, column]``, i.e. the spectral
axis is outermost and the fastest-varying index is x (width).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen_f64(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


# Bayer layouts: 2x2 channel indices (0=R, 1=G, 2=B) indexed by (row parity, col parity).
BAYER_PATTERNS = {
    "rggb": ((0, 1), (1, 2)),
    "bggr": ((2, 1), (1, 0)),
    "grbg": ((1, 0), (2, 1)),
    "gbrg": ((1, 2), (0, 1)),
}


@dataclass(frozen=True)
class WavelengthGrid:
    """Uniform spectral sampling: band i sits at start_nm + i * step_nm."""

    start_nm: float
    step_nm: float
    bands: int

    def __post_init__(self):
        if self.bands < 1:
            raise ValueError("bands must be >= 1")
        if not self.step_nm > 0:
            raise ValueError("step_nm must be > 0")

    def wavelength(self, i: int) -> float:
        if not 0 <= i < self.bands:
            raise ValueError(f"band index {i} outside [0, {self.bands})")
        return self.start_nm + i * self.step_nm

    def wavelengths(self) -> np.ndarray:
        return self.start_nm + self.step_nm * np.arange(self.bands, dtype=np.float64)

    @classmethod
    def default(cls, bands: int) -> "WavelengthGrid":
        # Synthetic default spans 450-650 nm (visible band-limited range).
        if bands < 1:
            raise ValueError("bands must be >= 1")
        step = 200.0 / (bands - 1) if bands > 1 else 200.0
        return cls(start_nm=450.0, step_nm=step, bands=bands)


@dataclass(frozen=True)
class HsiCube:
    """Hyperspectral cube h(x, y, lambda) stored band-major as data[band, y, x]."""

    grid: WavelengthGrid
    data: np.ndarray

    def __post_init__(self):
        arr = _frozen_f64(self.data, 3, "cube data")
        if arr.shape[0] != self.grid.bands:
            raise ValueError(
                f"cube has {arr.shape[0]} bands but grid declares {self.grid.bands}"
            )
        object.__setattr__(self, "data", arr)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class CodedAperture:
    """Transmissive mask T(x, y); values in [0, 1], stored as values[y, x]."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_f64(self.values, 2, "mask values")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("mask values must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def is_binary(self) -> bool:
        return bool(np.all((self.values == 0.0) | (self.values == 1.0)))


@dataclass(frozen=True)
class CompressedFrame:
    """Dispersed grayscale measurement; width is X + (N-1)*s for the producing cube."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_f64(self.values, 2, "frame values"))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RawColorFrame:
    """Bayer-mosaic color measurement, one scalar per pixel, same size as the scene."""

    values: np.ndarray
    pattern: str = "rggb"

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_f64(self.values, 2, "frame values"))
        if self.pattern not in BAYER_PATTERNS:
            raise ValueError(f"unknown Bayer pattern {self.pattern!r}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SpectralResponse:
    """Per-channel quantum-efficiency curves of the color camera filter array.

    Each curve has one efficiency value in [0, 1] per spectral band; the Bayer
    pattern assigns one of the three curves to every pixel parity.
    """

    red: np.ndarray
    green: np.ndarray
    blue: np.ndarray
    pattern: str = "rggb"

    def __post_init__(self):
        for name in ("red", "green", "blue"):
            curve = _frozen_f64(getattr(self, name), 1, f"{name} curve")
            if curve.size and (curve.min() < 0.0 or curve.max() > 1.0):
                raise ValueError(f"{name} curve values must lie in [0, 1]")
            object.__setattr__(self, name, curve)
        if self.green.shape != self.red.shape or self.blue.shape != self.red.shape:
            raise ValueError("all three curves must have equal length")
        if self.pattern not in BAYER_PATTERNS:
            raise ValueError(f"unknown Bayer pattern {self.pattern!r}")

    @property
    def bands(self) -> int:
        return self.red.shape[0]

    def curves(self) -> np.ndarray:
        """Stacked (3, bands) array in channel order R, G, B."""
        return np.stack([self.red, self.green, self.blue])

    @classmethod
    def default_gaussian(cls, grid: WavelengthGrid, pattern: str = "rggb") -> "SpectralResponse":
        """Smooth overlapping Gaussian curves centered at 470/530/600 nm, 50 nm FWHM."""
        lam = grid.wavelengths()
        sigma = 50.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        curves = [np.exp(-0.5 * ((lam - c) / sigma) ** 2) for c in (600.0, 530.0, 470.0)]
        r, g, b = (np.clip(c, 0.0, 1.0) for c in curves)
        return cls(red=r, green=g, blue=b, pattern=pattern)


@dataclass(frozen=True)
class Illuminant:
    """Illumination spectrum L(lambda); strictly positive per band."""

    spectrum: np.ndarray

    def __post_init__(self):
        arr = _frozen_f64(self.spectrum, 1, "illuminant spectrum")
        if arr.size == 0 or arr.min() <= 0.0:
            raise ValueError("illuminant spectrum must be strictly positive")
        object.__setattr__(self, "spectrum", arr)

    @property
    def bands(self) -> int:
        return self.spectrum.shape[0]

    @classmethod
    def flat(cls, grid: WavelengthGrid) -> "Illuminant":
        return cls(spectrum=np.ones(grid.bands))


def crop_patch(cube: HsiCube, x0: int, y0: int, w: int, h: int) -> HsiCube:
    """Copy a w-by-h spatial window (origin x0, y0) out of the cube, keeping all bands."""
    if w < 1 or h < 1:
        raise ValueError("crop window must have positive size")
    if x0 < 0 or y0 < 0 or x0 + w > cube.width or y0 + h > cube.height:
        raise ValueError(
            f"crop window ({x0},{y0},{w},{h}) exceeds cube extent "
            f"{cube.width}x{cube.height}"
        )
    patch = cube.data[:, y0 : y0 + h, x0 : x0 + w].copy()
    return HsiCube(grid=cube.grid, data=patch)
