import numpy as np
import pytest

from minkmembrane.fields import (
    GridSpec,
    ScalarField,
    as_flat,
    as_nd,
    derivative,
    dump_field_csv,
    norm_l2,
    norm_sup,
)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(4, 1.0, 11)
    with pytest.raises(ValueError):
        GridSpec(1, -1.0, 11)
    with pytest.raises(ValueError):
        GridSpec(1, 1.0, 10)
    with pytest.raises(ValueError):
        GridSpec(1, 1.0, 3)


def test_axis_coords_and_spacing():
    g = GridSpec(1, 2.0, 5)
    assert np.allclose(g.axis_coords(), [-2.0, -1.0, 0.0, 1.0, 2.0])
    assert g.spacing == pytest.approx(1.0)
    assert g.size == 5
    g2 = GridSpec(2, 1.0, 9)
    assert g2.size == 81
    assert g2.spacing == pytest.approx(0.25)


def test_flat_nd_roundtrip():
    g = GridSpec(2, 1.0, 9)
    rng = np.random.default_rng(3)
    flat = rng.normal(size=g.size)
    assert np.array_equal(as_flat(g, as_nd(g, flat)), flat)


def test_mesh_radius_and_node_coords():
    g = GridSpec(2, 1.0, 5)
    x = g.axis_coords()
    assert g.mesh(0).shape == (5, 1)
    assert g.mesh(1).shape == (1, 5)
    r = g.radius()
    assert r[0, 0] == pytest.approx(np.sqrt(2.0))
    assert r[2, 2] == pytest.approx(0.0)
    # flat index runs over axis 0 fastest
    assert g.node_coords(0) == (-1.0, -1.0)
    assert g.node_coords(1) == (float(x[1]), -1.0)
    assert g.node_coords(5) == (-1.0, float(x[1]))


def test_derivative_polynomial_exact():
    g = GridSpec(1, 1.0, 21)
    x = g.axis_coords()
    f = ScalarField(g, x**4 - x)
    d = derivative(f, 0)
    assert np.max(np.abs(d.values - (4.0 * x**3 - 1.0))) < 1e-10


def test_norms():
    g = GridSpec(1, 1.0, 5)
    f = ScalarField(g, np.array([0.0, -3.0, 1.0, 2.0, 0.0]))
    assert norm_sup(f) == pytest.approx(3.0)
    assert norm_l2(f) == pytest.approx(np.sqrt(0.5 * 14.0))


def test_dump_field_csv_roundtrip(tmp_path):
    g = GridSpec(1, 1.0, 5)
    f = ScalarField(g, np.array([0.0, 1e-300, -2.5, 0.125, 3.0]))
    out = tmp_path / "field.csv"
    dump_field_csv(f, out, header_comment="config_hash=deadbeef0123 version=0.1.0")
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[1].split(",")[0] == "index"
    assert "np.float64" not in lines[2]
    vals = [float(ln.rsplit(",", 1)[1]) for ln in lines[2:]]
    assert vals == [0.0, 1e-300, -2.5, 0.125, 3.0]
