import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wannier_homotopy.diagnostics import RegularityField, regularity
from wannier_homotopy.errors import CountMismatch, MissingNeighbor, ParseError
from wannier_homotopy.fileio import (MmnData, emit_field, field_text, mmn_from_model, parse_eig,
                                     parse_field, parse_mmn, provider_from_mmn, read_field,
                                     regularity_csv, write_mmn)
from wannier_homotopy.frames import GaugeFrame, frame_2d, frame_3d
from wannier_homotopy.grid import KGrid
from wannier_homotopy.homotopy import UnitaryField, contract_columns_1d
from wannier_homotopy.models import KaneMeleParams, kane_mele, random_tight_binding, toy_diag_loop
from wannier_homotopy.transport import ArrayProvider

MINIMAL = "comment\n1 1 1\n1 1 0 0 0\n1.0 0.0\n"


def test_minimal_mmn():
    data = parse_mmn(MINIMAL)
    assert (data.n_bands, data.n_kpts, data.n_neighbors) == (1, 1, 1)
    assert data.blocks[0, 0, 0, 0] == 1
    assert data.neighbors[0, 0] == 0
    assert data.comment == "comment"


def test_column_major_block_order():
    text = "c\n2 1 1\n1 1 0 0 0\n1 0\n2 0\n3 0\n4 0\n"
    block = parse_mmn(text).blocks[0, 0]
    # bra index runs fastest
    assert np.array_equal(block, np.array([[1, 3], [2, 4]]))


@pytest.mark.parametrize("cut", [1, 3])
def test_truncated_file_reports_line(cut):
    lines = MINIMAL.splitlines(keepends=True)[:cut]
    with pytest.raises(ParseError) as info:
        parse_mmn("".join(lines))
    assert info.value.line == cut + 1


def test_missing_blocks_is_count_mismatch():
    header_only = "".join(MINIMAL.splitlines(keepends=True)[:2])
    with pytest.raises(CountMismatch):
        parse_mmn(header_only)


def test_truncated_inside_block():
    text = "c\n2 1 1\n1 1 0 0 0\n1 0\n2 0\n"
    with pytest.raises(ParseError) as info:
        parse_mmn(text)
    assert info.value.line == 6
    assert "end of file" in str(info.value)


def test_malformed_number():
    with pytest.raises(ParseError) as info:
        parse_mmn("c\n1 1 1\n1 1 0 0 0\n1.0 abc\n")
    assert info.value.line == 4


def test_block_count_mismatch():
    with pytest.raises(CountMismatch):
        parse_mmn("c\n1 1 2\n1 1 0 0 0\n1.0 0.0\n")


def random_mmn(seed, n_bands, n_kpts, nnb):
    rng = np.random.default_rng(seed)
    return MmnData(
        n_bands, n_kpts, nnb,
        rng.integers(0, n_kpts, (n_kpts, nnb)),
        rng.integers(-1, 2, (n_kpts, nnb, 3)),
        rng.standard_normal((n_kpts, nnb, n_bands, n_bands))
        + 1j * rng.standard_normal((n_kpts, nnb, n_bands, n_bands)),
        comment="random",
    )


@given(st.integers(0, 1000), st.integers(1, 3), st.integers(1, 4), st.integers(1, 3))
def test_mmn_write_parse_round_trip(seed, n_bands, n_kpts, nnb):
    data = random_mmn(seed, n_bands, n_kpts, nnb)
    back = parse_mmn(write_mmn(data))
    assert np.array_equal(back.blocks, data.blocks)
    assert np.array_equal(back.neighbors, data.neighbors)
    assert np.array_equal(back.shifts, data.shifts)
    assert back.comment == data.comment


def test_mmn_provider_reproduces_model_frame_2d():
    model = kane_mele(KaneMeleParams(0.0, 1.0))
    grid = KGrid((24, 24))
    data = parse_mmn(write_mmn(mmn_from_model(model, grid)))
    file_provider = provider_from_mmn(data, (0, 2), grid, strict=True)
    model_provider = ArrayProvider.from_model(model, grid)
    a = frame_2d(file_provider)
    b = frame_2d(model_provider)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-8


def test_mmn_provider_reproduces_model_frame_3d():
    model = random_tight_binding(3, 4, 2, seed=2, hopping=0.6)
    grid = KGrid((8, 8, 8))
    data = parse_mmn(io.StringIO(write_mmn(mmn_from_model(model, grid))))
    a = frame_3d(provider_from_mmn(data, (0, 2), grid, strict=True))
    b = frame_3d(ArrayProvider.from_model(model, grid))
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-8


def test_reverse_direction_from_conjugate_transpose():
    model = random_tight_binding(2, 3, 1, seed=5)
    grid = KGrid((8, 8))
    only_minus = mmn_from_model(model, grid, offsets=[(-1, 0), (0, -1)])
    p = provider_from_mmn(only_minus, (0, 1), grid)
    q = ArrayProvider.from_model(model, grid)
    for axis in range(2):
        assert np.allclose(p.axis_overlaps(axis), q.axis_overlaps(axis), atol=1e-12)
    assert np.allclose(p.overlap((7, 3), (1, 0)), q.overlap((7, 3), (1, 0)))


def test_missing_axis_neighbour():
    model = random_tight_binding(2, 2, 1, seed=0)
    grid = KGrid((8, 8))
    data = mmn_from_model(model, grid, offsets=[(1, 0)])
    with pytest.raises(MissingNeighbor):
        provider_from_mmn(data, (0, 1), grid)


def test_strict_mode_rejects_bad_shifts():
    model = random_tight_binding(2, 2, 1, seed=0)
    grid = KGrid((8, 8))
    data = mmn_from_model(model, grid)
    provider_from_mmn(data, (0, 1), grid, strict=True)
    data.shifts[0, 0, 0] += 1
    provider_from_mmn(data, (0, 1), grid)  # lenient mode ignores shifts
    with pytest.raises(ParseError):
        provider_from_mmn(data, (0, 1), grid, strict=True)


def test_window_validation():
    data = mmn_from_model(random_tight_binding(2, 2, 1, seed=0), KGrid((8, 8)))
    with pytest.raises(ValueError):
        provider_from_mmn(data, (0, 3), KGrid((8, 8)))
    with pytest.raises(CountMismatch):
        provider_from_mmn(data, (0, 1), KGrid((8, 9)))


def test_window_selects_bands():
    model = random_tight_binding(2, 4, 2, seed=1)
    grid = KGrid((8, 8))
    data = mmn_from_model(model, grid)
    upper = provider_from_mmn(data, (2, 4), grid)
    assert upper.n_occ == 2
    assert np.allclose(upper.axis_overlaps(0)[0, 0], data.blocks[0, 0, 2:, 2:])


def test_parse_eig():
    text = "1 1 -1.5\n2 1 0.5\n1 2 -1.4\n2 2 0.7\n"
    e = parse_eig(text)
    assert e.shape == (2, 2)
    assert e[1, 1] == 0.7
    with pytest.raises(ParseError):
        parse_eig("1 1\n")
    with pytest.raises(CountMismatch):
        parse_eig(text, n_bands=3)


def test_identity_field_records():
    grid = KGrid((4,))
    field = UnitaryField(grid, np.broadcast_to(np.eye(2), (4, 2, 2)))
    records = [line for line in field_text(field).splitlines() if not line.startswith("#")]
    assert records == ["1 0 0 0 0 0 1 0"] * 4


@given(st.integers(0, 1000))
def test_frame_round_trip_is_exact(seed):
    rng = np.random.default_rng(seed)
    grid = KGrid((3, 2))
    coeffs = rng.standard_normal((3, 2, 2, 2)) + 1j * rng.standard_normal((3, 2, 2, 2))
    frame = GaugeFrame(grid, coeffs, {"seed": seed, "method": "columns"})
    back = parse_field(field_text(frame))
    assert np.array_equal(back.coeffs, frame.coeffs)
    assert back.metadata == frame.metadata
    assert field_text(back) == field_text(frame)


def test_homotopy_round_trip(tmp_path):
    hom = contract_columns_1d(toy_diag_loop((1, -1), 16), 5)
    path = emit_field(hom, tmp_path / "hom.dat")
    back = read_field(path)
    assert np.array_equal(back.values, hom.values)
    assert np.array_equal(back.t, hom.t)
    assert back.metadata["reference_vectors"] == hom.metadata["reference_vectors"]


def test_regularity_csv(tmp_path):
    grid = KGrid((2, 3))
    field = RegularityField(grid, np.arange(6.0).reshape(2, 3) / 7)
    text = regularity_csv(field)
    lines = text.splitlines()
    assert lines[0] == "k1,k2,value"
    assert lines[1] == "0,0,0"
    assert len(lines) == 7
    path = emit_field(field, tmp_path / "reg.csv")
    back = read_field(path)
    assert np.array_equal(back.values, field.values)


def test_emit_is_byte_stable(tmp_path, km_qsh_48):
    f = frame_2d(km_qsh_48, seed=1)
    a = emit_field(f, tmp_path / "a.dat", metadata={"seed": 1})
    b = emit_field(frame_2d(km_qsh_48, seed=1), tmp_path / "b.dat", metadata={"seed": 1})
    assert open(a, "rb").read() == open(b, "rb").read()
    r = emit_field(regularity(f, km_qsh_48), tmp_path / "r.csv")
    assert open(r).read().startswith("k1,k2,value\n")


def test_emit_unknown_object(tmp_path):
    with pytest.raises(TypeError):
        emit_field(object(), tmp_path / "x.dat")
