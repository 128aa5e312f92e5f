"""Deterministic synthetic scenes and coded apertures for experiments.

Three scene families stand in for lab datasets at desk scale:

* ``smooth-blobs``: sums of spatial Gaussians, each carrying a smooth
  Gaussian spectrum (peak-normalized when the sum exceeds 1).
* ``step-targets``: piecewise-constant rectangles painted in sequence, each
  with its own smooth spectrum.
* ``spectral-ramps``: vertical strips whose intensity is linear in the band
  index between two random endpoints.

Masks are either i.i.d. Bernoulli draws or a {0,1}-remapped Sylvester
Hadamard tile repeated across the aperture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .core import CodedAperture, HsiCube, WavelengthGrid

SCENE_FAMILIES = ("smooth-blobs", "step-targets", "spectral-ramps")
MASK_KINDS = ("bernoulli", "hadamard-derived")


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    bands: int
    family: str = "smooth-blobs"
    seed: int = 0
    noise_sigma: float = 0.0
    elements: int = 6

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.bands < 1:
            raise ValueError("width, height and bands must be >= 1")
        if self.family not in SCENE_FAMILIES:
            raise ValueError(f"unknown scene family {self.family!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.elements < 0:
            raise ValueError("elements must be >= 0")


@dataclass(frozen=True)
class MaskSpec:
    kind: str = "bernoulli"
    density: float = 0.5
    order: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise ValueError(f"unknown mask kind {self.kind!r}")
        if self.kind == "bernoulli" and not 0.0 < self.density <= 1.0:
            raise ValueError("bernoulli density must be in (0, 1]")
        if self.kind == "hadamard-derived":
            if self.order < 1 or self.order & (self.order - 1):
                raise ValueError("hadamard order must be a power of 2")


def _gaussian_spectrum(rng: np.random.Generator, grid: WavelengthGrid) -> np.ndarray:
    lam = grid.wavelengths()
    span = max(lam[-1] - lam[0], 1.0)
    center = rng.uniform(lam[0], lam[-1])
    sigma = rng.uniform(span / 8.0, span / 3.0)
    amp = rng.uniform(0.3, 0.8)
    floor = rng.uniform(0.0, 0.2)
    return floor + amp * np.exp(-((lam - center) ** 2) / (2.0 * sigma**2))


def _smooth_blobs(rng, spec, grid) -> np.ndarray:
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    data = np.zeros((spec.bands, spec.height, spec.width))
    extent = float(min(spec.width, spec.height))
    for _ in range(spec.elements):
        cx = rng.uniform(0, spec.width)
        cy = rng.uniform(0, spec.height)
        sig = rng.uniform(extent / 8.0, extent / 3.0)
        amp = rng.uniform(0.4, 1.0)
        spatial = amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sig**2))
        spectrum = _gaussian_spectrum(rng, grid)
        data += spectrum[:, None, None] * spatial[None]
    peak = data.max()
    if peak > 1.0:
        data /= peak
    return data


def _step_targets(rng, spec, grid) -> np.ndarray:
    data = np.zeros((spec.bands, spec.height, spec.width))
    for _ in range(spec.elements):
        w = int(rng.integers(max(spec.width // 6, 1), max(spec.width // 2, 2)))
        h = int(rng.integers(max(spec.height // 6, 1), max(spec.height // 2, 2)))
        x0 = int(rng.integers(0, max(spec.width - w, 1)))
        y0 = int(rng.integers(0, max(spec.height - h, 1)))
        spectrum = _gaussian_spectrum(rng, grid)
        data[:, y0 : y0 + h, x0 : x0 + w] = spectrum[:, None, None]
    return data


def _spectral_ramps(rng, spec, grid) -> np.ndarray:
    data = np.zeros((spec.bands, spec.height, spec.width))
    if spec.elements == 0:
        return data
    if spec.bands > 1:
        t = np.arange(spec.bands) / (spec.bands - 1)
    else:
        t = np.zeros(1)
    edges = np.linspace(0, spec.width, spec.elements + 1).astype(int)
    for j in range(spec.elements):
        a, b = rng.uniform(0.0, 1.0, size=2)
        ramp = a + (b - a) * t
        data[:, :, edges[j] : edges[j + 1]] = ramp[:, None, None]
    return data


def generate_scene(spec: SceneSpec) -> HsiCube:
    """Deterministic synthetic cube in [0, 1] for the given spec."""
    rng = np.random.default_rng(spec.seed)
    grid = WavelengthGrid.default(spec.bands)
    builders = {
        "smooth-blobs": _smooth_blobs,
        "step-targets": _step_targets,
        "spectral-ramps": _spectral_ramps,
    }
    data = builders[spec.family](rng, spec, grid)
    return HsiCube(grid=grid, data=data)


def generate_mask(spec: MaskSpec, width: int, height: int) -> CodedAperture:
    """Deterministic coded aperture of the given spatial extent."""
    if width < 1 or height < 1:
        raise ValueError("mask dimensions must be >= 1")
    if spec.kind == "bernoulli":
        rng = np.random.default_rng(spec.seed)
        values = (rng.random((height, width)) < spec.density).astype(np.float64)
        return CodedAperture(values=values)
    if width % spec.order or height % spec.order:
        raise ValueError(
            f"hadamard order {spec.order} does not tile {width}x{height}"
        )
    tile = (hadamard(spec.order) + 1) // 2
    values = np.tile(tile, (height // spec.order, width // spec.order)).astype(np.float64)
    return CodedAperture(values=values)
