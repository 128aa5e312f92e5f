"""Unit tests for the dispersive and color forward operators and their adjoints.

Every operator is checked against a scalar-loop oracle written directly from
the index algebra, and against the explicit sparse-matrix construction, so the
vectorized production paths never verify themselves.
"""

import numpy as np
import pytest

from dualcassi.core import (
    BAYER_PATTERNS,
    CodedAperture,
    CompressedFrame,
    HsiCube,
    Illuminant,
    RawColorFrame,
    SpectralResponse,
    WavelengthGrid,
)
from dualcassi.forward import (
    CassiOperator,
    ColorOperator,
    build_sensing_matrix,
    cassi_adjoint,
    cassi_forward,
    color_adjoint,
    color_forward,
    phi_phit_diagonal,
)


def cassi_forward_oracle(data, mask, s):
    bands, height, width = data.shape
    out = np.zeros((height, width + (bands - 1) * s))
    for i in range(bands):
        for y in range(height):
            for x in range(width):
                out[y, x + i * s] += data[i, y, x] * mask[y, x]
    return out


def cassi_adjoint_oracle(frame, mask, bands, s):
    height, width = mask.shape
    out = np.zeros((bands, height, width))
    for i in range(bands):
        for y in range(height):
            for x in range(width):
                out[i, y, x] = mask[y, x] * frame[y, x + i * s]
    return out


def color_forward_oracle(data, resp: SpectralResponse, illum: Illuminant):
    tile = BAYER_PATTERNS[resp.pattern]
    curves = [resp.red, resp.green, resp.blue]
    bands, height, width = data.shape
    out = np.zeros((height, width))
    for y in range(height):
        for x in range(width):
            ch = tile[y % 2][x % 2]
            out[y, x] = sum(
                data[b, y, x] * curves[ch][b] * illum.spectrum[b] for b in range(bands)
            )
    return out


def random_instance(rng, bands, height, width, s, binary=True):
    cube = HsiCube(
        grid=WavelengthGrid.default(bands), data=rng.random((bands, height, width))
    )
    if binary:
        values = (rng.random((height, width)) < 0.5).astype(float)
    else:
        values = rng.random((height, width))
    op = CassiOperator(mask=CodedAperture(values=values), bands=bands, shift_step=s)
    return cube, op


def random_color_op(rng, bands, pattern="rggb"):
    resp = SpectralResponse(
        red=rng.random(bands),
        green=rng.random(bands),
        blue=rng.random(bands),
        pattern=pattern,
    )
    return ColorOperator(response=resp, illuminant=Illuminant(spectrum=rng.random(bands) + 0.5))


def test_cassi_forward_worked_example():
    # 2x2x2 cube under an all-ones mask with unit shift: the two bands overlap
    # on the middle column only, giving rows [1, 8, 7] and [2, 10, 8].
    data = np.array([[[1.0, 3.0], [2.0, 4.0]], [[5.0, 7.0], [6.0, 8.0]]])
    cube = HsiCube(grid=WavelengthGrid.default(2), data=data)
    op = CassiOperator(mask=CodedAperture(values=np.ones((2, 2))), bands=2, shift_step=1)
    frame = cassi_forward(cube, op)
    assert np.array_equal(frame.values, [[1.0, 8.0, 7.0], [2.0, 10.0, 8.0]])
    # The explicit matrix reproduces the same frame.
    mat = build_sensing_matrix(op)
    assert np.array_equal(mat.matvec(data.ravel()).reshape(2, 3), frame.values)


def test_cassi_frame_shape_law():
    rng = np.random.default_rng(10)
    for _ in range(20):
        bands = int(rng.integers(1, 6))
        height = int(rng.integers(1, 7))
        width = int(rng.integers(1, 7))
        s = int(rng.integers(1, 4))
        cube, op = random_instance(rng, bands, height, width, s)
        frame = cassi_forward(cube, op)
        assert frame.width == width + (bands - 1) * s
        assert frame.height == height
        assert op.frame_width == frame.width


def test_cassi_forward_matches_scalar_oracle():
    rng = np.random.default_rng(11)
    for binary in (True, False):
        for s in (1, 2):
            cube, op = random_instance(rng, 4, 5, 6, s, binary=binary)
            frame = cassi_forward(cube, op)
            oracle = cassi_forward_oracle(cube.data, op.mask.values, s)
            assert np.array_equal(frame.values, oracle)


def test_cassi_single_band_is_plain_masking():
    rng = np.random.default_rng(12)
    cube, op = random_instance(rng, 1, 4, 5, 1, binary=False)
    frame = cassi_forward(cube, op)
    assert frame.width == 5
    assert np.array_equal(frame.values, cube.data[0] * op.mask.values)


def test_cassi_adjoint_matches_scalar_oracle():
    rng = np.random.default_rng(13)
    for s in (1, 2):
        _, op = random_instance(rng, 3, 4, 5, s)
        frame = CompressedFrame(values=rng.random((4, op.frame_width)))
        back = cassi_adjoint(frame, op)
        oracle = cassi_adjoint_oracle(frame.values, op.mask.values, 3, s)
        assert np.array_equal(back.data, oracle)
    assert np.all(
        cassi_adjoint(CompressedFrame(values=np.zeros((4, op.frame_width))), op).data
        == 0.0
    )


def test_cassi_adjoint_dot_identity():
    # <Phi u, v> must equal <u, Phi^T v> to 1e-10 relative on random pairs.
    rng = np.random.default_rng(14)
    for _ in range(100):
        bands = int(rng.integers(1, 5))
        height = int(rng.integers(1, 6))
        width = int(rng.integers(1, 6))
        s = int(rng.integers(1, 3))
        cube, op = random_instance(rng, bands, height, width, s, binary=False)
        v = rng.standard_normal((height, op.frame_width))
        lhs = float((cassi_forward(cube, op).values * v).sum())
        rhs = float(
            (cube.data * cassi_adjoint(CompressedFrame(values=v), op).data).sum()
        )
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1.0)


def test_cassi_linearity():
    rng = np.random.default_rng(15)
    for _ in range(20):
        cube_a, op = random_instance(rng, 3, 4, 4, 1, binary=False)
        cube_b = HsiCube(grid=cube_a.grid, data=rng.random((3, 4, 4)))
        a, b = float(rng.standard_normal()), float(rng.standard_normal())
        mixed = HsiCube(grid=cube_a.grid, data=a * cube_a.data + b * cube_b.data)
        lhs = cassi_forward(mixed, op).values
        rhs = a * cassi_forward(cube_a, op).values + b * cassi_forward(cube_b, op).values
        scale = max(np.abs(rhs).max(), 1.0)
        assert np.abs(lhs - rhs).max() <= 1e-12 * scale


def test_color_forward_matches_scalar_oracle():
    rng = np.random.default_rng(16)
    for pattern in BAYER_PATTERNS:
        op = random_color_op(rng, 5, pattern)
        cube = HsiCube(grid=WavelengthGrid.default(5), data=rng.random((5, 4, 6)))
        frame = color_forward(cube, op)
        assert frame.pattern == pattern
        oracle = color_forward_oracle(cube.data, op.response, op.illuminant)
        np.testing.assert_allclose(frame.values, oracle, rtol=1e-13, atol=1e-15)


def test_color_forward_flat_curves_sum_bands():
    rng = np.random.default_rng(17)
    bands = 4
    resp = SpectralResponse(red=np.ones(bands), green=np.ones(bands), blue=np.ones(bands))
    op = ColorOperator(response=resp, illuminant=Illuminant(spectrum=np.ones(bands)))
    cube = HsiCube(grid=WavelengthGrid.default(bands), data=rng.random((bands, 3, 3)))
    frame = color_forward(cube, op)
    np.testing.assert_allclose(frame.values, cube.data.sum(axis=0), rtol=1e-14)


def test_color_adjoint_dot_identity():
    rng = np.random.default_rng(18)
    for _ in range(100):
        bands = int(rng.integers(1, 6))
        height = int(rng.integers(1, 6))
        width = int(rng.integers(1, 6))
        op = random_color_op(rng, bands)
        cube = HsiCube(
            grid=WavelengthGrid.default(bands), data=rng.random((bands, height, width))
        )
        v = rng.standard_normal((height, width))
        lhs = float((color_forward(cube, op).values * v).sum())
        frame = RawColorFrame(values=v, pattern=op.response.pattern)
        rhs = float((cube.data * color_adjoint(frame, op).data).sum())
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1.0)


def test_color_linearity():
    rng = np.random.default_rng(19)
    op = random_color_op(rng, 4)
    grid = WavelengthGrid.default(4)
    for _ in range(20):
        cube_a = HsiCube(grid=grid, data=rng.random((4, 4, 4)))
        cube_b = HsiCube(grid=grid, data=rng.random((4, 4, 4)))
        a, b = float(rng.standard_normal()), float(rng.standard_normal())
        mixed = HsiCube(grid=grid, data=a * cube_a.data + b * cube_b.data)
        lhs = color_forward(mixed, op).values
        rhs = a * color_forward(cube_a, op).values + b * color_forward(cube_b, op).values
        scale = max(np.abs(rhs).max(), 1.0)
        assert np.abs(lhs - rhs).max() <= 1e-12 * scale


def test_color_adjoint_pattern_mismatch():
    rng = np.random.default_rng(20)
    op = random_color_op(rng, 3, "rggb")
    frame = RawColorFrame(values=np.ones((2, 2)), pattern="bggr")
    with pytest.raises(ValueError):
        color_adjoint(frame, op)


def test_dimension_mismatches_raise():
    rng = np.random.default_rng(21)
    cube, op = random_instance(rng, 3, 4, 4, 1)
    wrong_bands = HsiCube(grid=WavelengthGrid.default(2), data=np.zeros((2, 4, 4)))
    with pytest.raises(ValueError):
        cassi_forward(wrong_bands, op)
    wrong_space = HsiCube(grid=WavelengthGrid.default(3), data=np.zeros((3, 5, 4)))
    with pytest.raises(ValueError):
        cassi_forward(wrong_space, op)
    with pytest.raises(ValueError):
        cassi_adjoint(CompressedFrame(values=np.zeros((4, op.frame_width + 1))), op)
    color_op = random_color_op(rng, 3)
    with pytest.raises(ValueError):
        color_forward(wrong_bands, color_op)


def test_sensing_matrix_dimensions_example():
    # 2x2 mask, two bands, unit shift: 6 measurement rows, 8 cube columns.
    op = CassiOperator(mask=CodedAperture(values=np.ones((2, 2))), bands=2, shift_step=1)
    mat = build_sensing_matrix(op)
    assert (mat.rows, mat.cols) == (6, 8)
    dense = mat.to_dense()
    assert dense.shape == (6, 8)
    assert (np.count_nonzero(dense, axis=1) <= op.bands).all()
    # Each column feeds exactly one measurement pixel.
    assert (np.count_nonzero(dense, axis=0) == 1).all()


def test_sensing_matrix_matches_operator():
    rng = np.random.default_rng(22)
    for _ in range(25):
        bands = int(rng.integers(1, 5))
        height = int(rng.integers(1, 7))
        width = int(rng.integers(1, 7))
        s = int(rng.integers(1, 3))
        cube, op = random_instance(rng, bands, height, width, s, binary=bool(rng.integers(2)))
        mat = build_sensing_matrix(op)
        frame = cassi_forward(cube, op).values
        via_mat = mat.matvec(cube.data.ravel()).reshape(frame.shape)
        scale = max(np.abs(frame).max(), 1.0)
        assert np.abs(frame - via_mat).max() <= 1e-12 * scale
        v = rng.standard_normal(frame.shape)
        adj = cassi_adjoint(CompressedFrame(values=v), op).data
        via_rmat = mat.rmatvec(v.ravel()).reshape(adj.shape)
        assert np.abs(adj - via_rmat).max() <= 1e-12 * max(np.abs(adj).max(), 1.0)


def test_sensing_matrix_drops_zero_mask_entries():
    op = CassiOperator(mask=CodedAperture(values=np.zeros((3, 3))), bands=2, shift_step=1)
    mat = build_sensing_matrix(op)
    assert mat.nnz == 0
    assert np.all(mat.matvec(np.ones(18)) == 0.0)


def test_sensing_matrix_column_cap():
    op = CassiOperator(mask=CodedAperture(values=np.ones((2, 2))), bands=2, shift_step=1)
    with pytest.raises(ValueError, match="cap"):
        build_sensing_matrix(op, column_cap=7)


def test_export_text_round_trip(tmp_path):
    rng = np.random.default_rng(23)
    _, op = random_instance(rng, 3, 3, 4, 1, binary=False)
    mat = build_sensing_matrix(op)
    path = tmp_path / "matrix.txt"
    mat.export_text(path)
    lines = path.read_text().strip().split("\n")
    rows, cols, nnz = (int(tok) for tok in lines[0].split())
    assert (rows, cols, nnz) == (mat.rows, mat.cols, mat.nnz)
    assert len(lines) == nnz + 1
    rebuilt = np.zeros((rows, cols))
    for line in lines[1:]:
        r, c, v = line.split()
        rebuilt[int(r), int(c)] = float(v)
    assert np.array_equal(rebuilt, mat.to_dense())


def test_phi_phit_is_exactly_diagonal():
    rng = np.random.default_rng(24)
    for _ in range(10):
        bands = int(rng.integers(1, 5))
        height = int(rng.integers(1, 5))
        width = int(rng.integers(1, 6))
        s = int(rng.integers(1, 3))
        _, op = random_instance(rng, bands, height, width, s, binary=bool(rng.integers(2)))
        dense = build_sensing_matrix(op).to_dense()
        gram = dense @ dense.T
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() == 0.0  # disjoint row supports: structural zeros
        diag = phi_phit_diagonal(op)
        assert diag.shape == (op.frame_height, op.frame_width)
        np.testing.assert_allclose(diag.ravel(), np.diag(gram), rtol=1e-12, atol=1e-15)


def test_phi_phit_diagonal_ones_mask_counts_overlaps():
    op = CassiOperator(mask=CodedAperture(values=np.ones((2, 4))), bands=3, shift_step=1)
    diag = phi_phit_diagonal(op)
    # Coverage count along x for a 4-wide mask and three unit shifts.
    assert np.array_equal(diag, np.tile([1.0, 2.0, 3.0, 3.0, 2.0, 1.0], (2, 1)))
    zero_op = CassiOperator(mask=CodedAperture(values=np.zeros((2, 2))), bands=2)
    assert np.all(phi_phit_diagonal(zero_op) == 0.0)
