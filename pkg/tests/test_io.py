import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bifcurrent.io import (FormatError, dump_json, fmt, load_json, read_cloud_csv, read_grid,
                           read_pgm, table_csv, to_gray, to_jsonable, write_cloud_csv,
                           write_grid, write_pgm, write_roots_csv)
from bifcurrent.lifted import vertical_tangencies
from bifcurrent.measures import AtomCloud, GridField, GridMeasure, GridSpec

finite = st.floats(allow_nan=False, allow_infinity=False)


def test_fmt():
    assert fmt(-0.0) == "0.0"
    assert fmt(0.1) == "0.1"
    assert fmt(np.float64(1e-300)) == "1e-300"


@given(finite)
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_cloud_csv_round_trip_dim2(tmp_path):
    cloud = vertical_tangencies(4)
    path = tmp_path / "atoms.csv"
    write_cloud_csv(path, cloud)
    back = read_cloud_csv(path)
    assert back.points.tobytes() == cloud.points.tobytes()
    assert back.weights.tobytes() == cloud.weights.tobytes()
    np.testing.assert_array_equal(back.labels, cloud.labels)
    assert path.read_text().splitlines()[0] == "c_re,c_im,z_re,z_im,j,weight"


def test_cloud_csv_round_trip_dim1(tmp_path):
    cloud = AtomCloud([0.1 - 0.2j, 3], [0.25, 0.75])
    path = tmp_path / "m.csv"
    write_cloud_csv(path, cloud)
    assert path.read_text() == "re,im,weight\n0.1,-0.2,0.25\n3.0,0.0,0.75\n"
    assert read_cloud_csv(path).points.tolist() == cloud.points.tolist()


def test_cloud_csv_bad_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(FormatError):
        read_cloud_csv(path)
    path.write_text("")
    with pytest.raises(FormatError):
        read_cloud_csv(path)


def test_roots_csv(tmp_path):
    path = tmp_path / "roots.csv"
    write_roots_csv(path, np.array([1 + 2j]), [1e-16])
    assert path.read_text() == "re,im,residual\n1.0,2.0,1e-16\n"


def test_table_csv():
    assert table_csv(["a", "b"], [[1, 0.5], ["x", True]]) == "a,b\n1,0.5\nx,True\n"


@settings(max_examples=25)
@given(arrays(np.float64, st.tuples(st.integers(2, 6), st.integers(2, 6)), elements=finite))
def test_grid_round_trip(tmp_path_factory, values):
    ny, nx = values.shape
    spec = GridSpec((-1.5, 0.5, -1, 1), nx, ny)
    path = tmp_path_factory.mktemp("g") / "f.bfgrid"
    write_grid(path, GridField(spec, values))
    back = read_grid(path)
    assert isinstance(back, GridField) and back.spec == spec
    assert back.values.tobytes() == values.tobytes()


def test_grid_layout_and_kind(tmp_path):
    spec = GridSpec((0, 1, 2, 3), 3, 2)
    mass = np.arange(6, dtype=float).reshape(2, 3)
    path = tmp_path / "m.bfgrid"
    write_grid(path, GridMeasure(spec, mass))
    raw = path.read_bytes()
    assert len(raw) == 64 + 48
    assert struct.unpack_from("<8sQQQ4d", raw) == (b"BFGRID01", 3, 2, 1, 0.0, 1.0, 2.0, 3.0)
    assert struct.unpack_from("<6d", raw, 64) == tuple(range(6))
    back = read_grid(path)
    assert isinstance(back, GridMeasure)
    np.testing.assert_array_equal(back.cell_mass, mass)


@pytest.mark.parametrize("mutate", [
    lambda raw: raw[:20],
    lambda raw: b"XXGRID01" + raw[8:],
    lambda raw: raw[:-8],
    lambda raw: raw[:24] + struct.pack("<Q", 7) + raw[32:],
])
def test_grid_corruption(tmp_path, mutate):
    path = tmp_path / "f.bfgrid"
    write_grid(path, GridField(GridSpec((0, 1, 0, 1), 2, 2), np.zeros((2, 2))))
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FormatError):
        read_grid(path)


def test_write_grid_type_check(tmp_path):
    with pytest.raises(TypeError):
        write_grid(tmp_path / "x", np.zeros((2, 2)))


def test_to_gray():
    g = to_gray(np.array([[0.0, 1.0], [np.nan, 100.0]]))
    assert g.dtype == np.uint8
    assert g[0, 0] == 0 and g[1, 0] == 0 and g[1, 1] == 255
    assert not to_gray(np.zeros((2, 2))).any()


def test_pgm_round_trip_and_orientation(tmp_path):
    values = np.zeros((3, 4))
    values[-1, 0] = 5.0  # largest Im row
    path = tmp_path / "q.pgm"
    write_pgm(path, values)
    assert path.read_bytes().startswith(b"P5\n#")
    img = read_pgm(path)
    assert img.shape == (3, 4)
    assert img[0, 0] == 255 and img.sum() == 255


def test_pgm_rejects_other_formats(tmp_path):
    path = tmp_path / "x.pgm"
    path.write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(FormatError):
        read_pgm(path)


def test_to_jsonable():
    obj = {"c": 1 + 2j, 3: np.int64(4), "a": np.arange(2), "x": float("inf"),
           "f": np.float32(0.5), "b": np.bool_(True), "t": (1, 2)}
    assert to_jsonable(obj) == {"c": [1.0, 2.0], "3": 4, "a": [0, 1], "x": "inf",
                                "f": 0.5, "b": True, "t": [1, 2]}


def test_json_round_trip(tmp_path):
    path = tmp_path / "c.json"
    dump_json(path, {"b": 1, "a": [1.5]})
    assert path.read_text().index('"a"') < path.read_text().index('"b"')
    assert load_json(path) == {"a": [1.5], "b": 1}
    path.write_text("[1]")
    with pytest.raises(FormatError):
        load_json(path)
