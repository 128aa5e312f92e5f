"""Physical acquisition operators for the two camera branches and their adjoints.

The dispersive branch multiplies the scene by the coded aperture and shears
band i by ``i * shift_step`` pixels along x before summing onto the sensor,
so a cube of size X x Y x N lands on a frame of size (X + (N-1)*s) x Y.
The color branch weights every band by the Bayer-assigned quantum-efficiency
curve times the illuminant and sums over bands, one scalar per pixel.

``build_sensing_matrix`` materializes the dispersive branch as an explicit
sparse matrix over the vectorized cube; it is a small-scale verification
oracle, never the production path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import (
    BAYER_PATTERNS,
    CodedAperture,
    CompressedFrame,
    HsiCube,
    Illuminant,
    RawColorFrame,
    SpectralResponse,
    WavelengthGrid,
)

MATRIX_COLUMN_CAP = 65_536


@dataclass(frozen=True)
class CassiOperator:
    """Coded-aperture dispersive branch: band i shifts by i * shift_step pixels in x."""

    mask: CodedAperture
    bands: int
    shift_step: int = 1

    def __post_init__(self):
        if self.bands < 1:
            raise ValueError("bands must be >= 1")
        if self.shift_step < 1:
            raise ValueError("shift_step must be >= 1")

    @property
    def frame_width(self) -> int:
        return self.mask.width + (self.bands - 1) * self.shift_step

    @property
    def frame_height(self) -> int:
        return self.mask.height


@dataclass(frozen=True)
class ColorOperator:
    """Color-camera branch: per-pixel spectral weighting by QE curve times illuminant."""

    response: SpectralResponse
    illuminant: Illuminant

    def __post_init__(self):
        if self.response.bands != self.illuminant.bands:
            raise ValueError(
                f"response has {self.response.bands} bands but illuminant has "
                f"{self.illuminant.bands}"
            )

    @property
    def bands(self) -> int:
        return self.response.bands


def _check_cassi_cube(cube: HsiCube, op: CassiOperator) -> None:
    if cube.bands != op.bands:
        raise ValueError(f"cube has {cube.bands} bands, operator expects {op.bands}")
    if (cube.height, cube.width) != (op.mask.height, op.mask.width):
        raise ValueError(
            f"cube spatial dims {cube.width}x{cube.height} do not match mask "
            f"{op.mask.width}x{op.mask.height}"
        )


def cassi_forward(cube: HsiCube, op: CassiOperator) -> CompressedFrame:
    """Mask then shift-and-sum the cube onto the dispersive sensor."""
    _check_cassi_cube(cube, op)
    out = _cassi_forward_raw(cube.data, op.mask.values, op.shift_step)
    return CompressedFrame(values=out)


def _cassi_forward_raw(data: np.ndarray, mask: np.ndarray, s: int) -> np.ndarray:
    bands, height, width = data.shape
    out = np.zeros((height, width + (bands - 1) * s))
    for i in range(bands):
        out[:, i * s : i * s + width] += data[i] * mask
    return out


def cassi_adjoint(frame: CompressedFrame, op: CassiOperator) -> HsiCube:
    """Exact algebraic transpose of cassi_forward.

    The operator carries no wavelength metadata, so the returned cube gets the
    default grid; rebuild with the real grid if it matters downstream."""
    data = cassi_adjoint_raw(frame.values, op)
    grid = WavelengthGrid.default(op.bands)
    return HsiCube(grid=grid, data=data)


def cassi_adjoint_raw(frame_values: np.ndarray, op: CassiOperator) -> np.ndarray:
    if frame_values.ndim != 2:
        raise ValueError("frame values must be 2-D")
    height, fwidth = frame_values.shape
    if height != op.mask.height or fwidth != op.frame_width:
        raise ValueError(
            f"frame is {fwidth}x{height}, operator expects {op.frame_width}x"
            f"{op.frame_height}"
        )
    mask = op.mask.values
    width, s = op.mask.width, op.shift_step
    data = np.empty((op.bands, height, width))
    for i in range(op.bands):
        data[i] = mask * frame_values[:, i * s : i * s + width]
    return data


def _channel_index_map(height: int, width: int, pattern: str) -> np.ndarray:
    tile = np.array(BAYER_PATTERNS[pattern], dtype=np.intp)
    rows = np.arange(height)[:, None] & 1
    cols = np.arange(width)[None, :] & 1
    return tile[rows, cols]


def _color_weights(op: ColorOperator, height: int, width: int) -> np.ndarray:
    """Per-pixel spectral weights K(x,y,:) * L(:), shaped (bands, height, width)."""
    weighted = op.response.curves() * op.illuminant.spectrum  # (3, bands)
    idx = _channel_index_map(height, width, op.response.pattern)
    return np.moveaxis(weighted[idx], 2, 0)


def color_forward(cube: HsiCube, op: ColorOperator) -> RawColorFrame:
    """Sum the cube over bands under the Bayer-assigned QE times illuminant weights."""
    if cube.bands != op.bands:
        raise ValueError(f"cube has {cube.bands} bands, operator expects {op.bands}")
    weights = _color_weights(op, cube.height, cube.width)
    out = np.einsum("byx,byx->yx", cube.data, weights)
    return RawColorFrame(values=out, pattern=op.response.pattern)


def color_adjoint(frame: RawColorFrame, op: ColorOperator) -> HsiCube:
    if frame.pattern != op.response.pattern:
        raise ValueError(
            f"frame pattern {frame.pattern!r} does not match operator "
            f"{op.response.pattern!r}"
        )
    data = color_adjoint_raw(frame.values, op)
    grid = WavelengthGrid.default(op.bands)
    return HsiCube(grid=grid, data=data)


def color_adjoint_raw(frame_values: np.ndarray, op: ColorOperator) -> np.ndarray:
    if frame_values.ndim != 2:
        raise ValueError("frame values must be 2-D")
    height, width = frame_values.shape
    weights = _color_weights(op, height, width)
    return frame_values[np.newaxis] * weights


@dataclass(frozen=True)
class SparseSensingMatrix:
    """Explicit coordinate-form sensing matrix over the band-major vectorized cube.

    Row r = y * frame_width + x_out indexes the vectorized frame; column
    c = band * (Y*X) + y * X + x indexes the vectorized cube. Every nonzero
    equals a mask entry and each row holds at most ``bands`` nonzeros.
    """

    rows: int
    cols: int
    row_idx: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not (self.row_idx.shape == self.col_idx.shape == self.values.shape):
            raise ValueError("coordinate arrays must have identical shapes")

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def _csr(self) -> sp.csr_matrix:
        return sp.coo_matrix(
            (self.values, (self.row_idx, self.col_idx)), shape=(self.rows, self.cols)
        ).tocsr()

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        return self._csr() @ np.asarray(vec, dtype=np.float64)

    def rmatvec(self, vec: np.ndarray) -> np.ndarray:
        return self._csr().T @ np.asarray(vec, dtype=np.float64)

    def to_dense(self) -> np.ndarray:
        return self._csr().toarray()

    def export_text(self, path) -> None:
        """Coordinate-list text dump: 'rows cols nnz' header then 'row col value' lines."""
        lines = [f"{self.rows} {self.cols} {self.nnz}"]
        for r, c, v in zip(self.row_idx, self.col_idx, self.values):
            lines.append(f"{int(r)} {int(c)} {float(v)!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def build_sensing_matrix(op: CassiOperator, column_cap: int = MATRIX_COLUMN_CAP) -> SparseSensingMatrix:
    """Enumerate the dispersive branch as explicit (row, col, value) triplets.

    Small-scale verification oracle: refuses problems above ``column_cap``
    columns. Entries are enumerated directly from the index algebra, not via
    cassi_forward, so the two paths stay independent cross-checks.
    """
    width, height = op.mask.width, op.mask.height
    bands, s = op.bands, op.shift_step
    n_cols = width * height * bands
    if n_cols > column_cap:
        raise ValueError(f"{n_cols} columns exceeds the verification cap {column_cap}")
    fwidth = op.frame_width
    band, y, x = np.meshgrid(
        np.arange(bands), np.arange(height), np.arange(width), indexing="ij"
    )
    band, y, x = band.ravel(), y.ravel(), x.ravel()
    rows = y * fwidth + x + band * s
    cols = band * (height * width) + y * width + x
    vals = np.broadcast_to(op.mask.values, (bands, height, width)).ravel().copy()
    keep = vals != 0.0
    return SparseSensingMatrix(
        rows=fwidth * height,
        cols=n_cols,
        row_idx=rows[keep],
        col_idx=cols[keep],
        values=vals[keep],
    )


def phi_phit_diagonal(op: CassiOperator) -> np.ndarray:
    """Diagonal of Phi Phi^T, frame-shaped (height, frame_width).

    For the dispersive structure Phi Phi^T is exactly diagonal; entry (y, x)
    is the sum of squared mask values feeding that measurement pixel. Ravel
    order matches the vectorized matrix row order.
    """
    mask_sq = op.mask.values**2
    out = np.zeros((op.frame_height, op.frame_width))
    for i in range(op.bands):
        out[:, i * op.shift_step : i * op.shift_step + op.mask.width] += mask_sq
    return out
