"""Cube and measurement-frame file I/O.

A stored object is a pair of files: a JSON header at ``path`` and a raw
little-endian binary payload at ``path + ".bin"``. The header declares::

    {"width": int, "height": int, "bands": int, "start_nm": float,
     "step_nm": float, "peak": float, "dtype": "f32"|"f64", "order": "band-major"}

Payload samples are band-major (band, then row, then column) and are divided
by ``peak`` on load, so loaded cubes always sit in [0, 1]. Measurement frames
and masks reuse the container with ``bands = 1`` plus a ``"kind"`` field
("cassi", "bayer-<pattern>" or "mask"); for frames,
``start_nm``/``step_nm``/``grid_bands`` record the grid of the cube that
produced them.
"""

from __future__ import annotations

import json
from pathlib import Path

from .core import (
    BAYER_PATTERNS,
    CodedAperture,
    CompressedFrame,
    HsiCube,
    RawColorFrame,
    WavelengthGrid,
)

import numpy as np

_DTYPES = {"f32": "<f4", "f64": "<f8"}

_HEADER_KEYS = {"width", "height", "bands", "start_nm", "step_nm", "peak", "dtype", "order"}


def _payload_path(path) -> Path:
    return Path(str(path) + ".bin")


def _read_header(path) -> dict:
    try:
        text = Path(path).read_text()
    except IsADirectoryError as exc:
        raise OSError(f"cannot read header {path}: {exc}") from exc
    try:
        header = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed header {path}: {exc}") from exc
    if not isinstance(header, dict):
        raise ValueError(f"malformed header {path}: not a JSON object")
    missing = _HEADER_KEYS - header.keys()
    if missing:
        raise ValueError(f"malformed header {path}: missing keys {sorted(missing)}")
    if header["dtype"] not in _DTYPES:
        raise ValueError(f"malformed header {path}: dtype must be 'f32' or 'f64'")
    if header["order"] != "band-major":
        raise ValueError(f"malformed header {path}: unsupported order {header['order']!r}")
    if not all(int(header[k]) >= 1 for k in ("width", "height", "bands")):
        raise ValueError(f"malformed header {path}: dims must be positive")
    if not float(header["peak"]) > 0:
        raise ValueError(f"malformed header {path}: peak must be positive")
    return header


def _read_payload(path, header: dict) -> np.ndarray:
    width, height, bands = (int(header[k]) for k in ("width", "height", "bands"))
    raw = _payload_path(path).read_bytes()
    samples = np.frombuffer(raw, dtype=_DTYPES[header["dtype"]])
    expected = width * height * bands
    if samples.size != expected:
        raise ValueError(
            f"payload length mismatch for {path}: expected {expected} samples, "
            f"got {samples.size}"
        )
    data = samples.astype(np.float64).reshape(bands, height, width)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"payload of {path} contains non-finite values")
    return data


def _write(path, header: dict, data: np.ndarray, dtype: str) -> None:
    if dtype not in _DTYPES:
        raise ValueError("dtype must be 'f32' or 'f64'")
    Path(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    _payload_path(path).write_bytes(
        np.ascontiguousarray(data, dtype=_DTYPES[dtype]).tobytes()
    )


def save_cube(cube: HsiCube, path, dtype: str = "f64") -> None:
    """Write a cube; values must lie in [0, 1] so that loading is the exact inverse."""
    if cube.data.size and (cube.data.min() < 0.0 or cube.data.max() > 1.0):
        raise ValueError("cube values outside [0, 1]; rescale before saving")
    header = {
        "width": cube.width,
        "height": cube.height,
        "bands": cube.bands,
        "start_nm": cube.grid.start_nm,
        "step_nm": cube.grid.step_nm,
        "peak": 1.0,
        "dtype": dtype,
        "order": "band-major",
    }
    _write(path, header, cube.data, dtype)


def load_cube(path) -> HsiCube:
    """Read a cube file, rescaling samples to [0, 1] by the header's peak."""
    header = _read_header(path)
    if "kind" in header:
        raise ValueError(f"{path} holds a {header['kind']!r} frame, not a cube")
    data = _read_payload(path, header) / float(header["peak"])
    if data.min() < 0.0 or data.max() > 1.0:
        raise ValueError(f"{path}: samples exceed the declared peak range")
    grid = WavelengthGrid(
        start_nm=float(header["start_nm"]),
        step_nm=float(header["step_nm"]),
        bands=int(header["bands"]),
    )
    return HsiCube(grid=grid, data=data)


def save_frame(frame, path, grid: WavelengthGrid, dtype: str = "f64") -> None:
    """Write a measurement frame; grid records the source cube's spectral axis."""
    if isinstance(frame, CompressedFrame):
        kind = "cassi"
    elif isinstance(frame, RawColorFrame):
        kind = f"bayer-{frame.pattern}"
    else:
        raise ValueError(f"unsupported frame type {type(frame).__name__}")
    header = {
        "width": frame.width,
        "height": frame.height,
        "bands": 1,
        "start_nm": grid.start_nm,
        "step_nm": grid.step_nm,
        "grid_bands": grid.bands,
        "peak": 1.0,
        "dtype": dtype,
        "order": "band-major",
        "kind": kind,
    }
    _write(path, header, frame.values[np.newaxis], dtype)


def load_frame(path):
    """Read a measurement frame; returns (frame, header) so callers can recover the grid."""
    header = _read_header(path)
    kind = header.get("kind")
    if kind is None:
        raise ValueError(f"{path} has no 'kind' field; use load_cube for cubes")
    values = (_read_payload(path, header) / float(header["peak"]))[0]
    if kind == "cassi":
        return CompressedFrame(values=values), header
    if kind.startswith("bayer-"):
        pattern = kind[len("bayer-") :]
        if pattern not in BAYER_PATTERNS:
            raise ValueError(f"{path}: unknown Bayer pattern {pattern!r}")
        return RawColorFrame(values=values, pattern=pattern), header
    if kind == "mask":
        raise ValueError(f"{path} holds a mask; use load_mask")
    raise ValueError(f"{path}: unknown frame kind {kind!r}")


def save_mask(mask: CodedAperture, path, dtype: str = "f64") -> None:
    header = {
        "width": mask.width,
        "height": mask.height,
        "bands": 1,
        "start_nm": 0.0,
        "step_nm": 1.0,
        "peak": 1.0,
        "dtype": dtype,
        "order": "band-major",
        "kind": "mask",
    }
    _write(path, header, mask.values[np.newaxis], dtype)


def load_mask(path) -> CodedAperture:
    header = _read_header(path)
    if header.get("kind") != "mask":
        raise ValueError(f"{path} is not a mask file")
    values = (_read_payload(path, header) / float(header["peak"]))[0]
    return CodedAperture(values=values)
