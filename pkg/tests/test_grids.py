import numpy as np
import pytest

from sfrec.errors import ParameterError
from sfrec.grids import (build_dictionary, custom_directions, fibonacci_hemisphere,
                         make_grid, semicircle_directions, subdomain_grid)


def test_line_array_grid_matches_setup():
    lam = 1.0
    grid = make_grid(241, lam / 24, wavelength=lam, origin=0.5 * lam)
    assert grid.size == 241
    x = grid.axis_coordinates(0)
    assert x[0] == pytest.approx(0.5 * lam, abs=1e-15)
    assert x[-1] == pytest.approx(10.5 * lam, rel=1e-14)


def test_square_grid_node_count():
    grid = make_grid((51, 51), 0.0343, wavelength=0.343)
    assert grid.size == 2601
    assert grid.ndim == 2


def test_degenerate_single_node_grid():
    grid = make_grid(1, 1.0, wavelength=1.0, origin=0.0)
    assert grid.size == 1
    assert np.allclose(grid.coordinates()[0], [0, 0, 0])


def test_node_coordinates_reproducible():
    grid = make_grid((4, 5), 0.31, wavelength=1.0, origin=(-0.2, 0.7, 0.1))
    coords = grid.coordinates()
    for flat in (0, 7, 19):
        assert np.array_equal(coords[flat], grid.node_coordinate(flat))


@pytest.mark.parametrize("shape,spacing,wavelength", [
    ((0,), 1.0, 1.0), ((4,), -1.0, 1.0), ((4,), 1.0, 0.0), ((2, 2, 2), 1.0, 1.0),
])
def test_invalid_grid_parameters(shape, spacing, wavelength):
    with pytest.raises(ParameterError):
        make_grid(shape, spacing, wavelength=wavelength)


def test_semicircle_endpoints_and_count():
    d = semicircle_directions(21)
    assert d.count == 21
    assert np.allclose(d.vectors[0], [1, 0, 0])
    assert np.allclose(d.vectors[-1], [-1, 0, 0], atol=1e-15)


def test_semicircle_two_and_three_angles():
    two = semicircle_directions(2)
    assert np.allclose(two.vectors[:, 0], [1, -1])
    three = semicircle_directions(3)
    assert np.allclose(three.vectors[:, 0], [1, 0, -1], atol=1e-15)
    assert three.vectors[1, 2] == pytest.approx(1.0)


def test_semicircle_rejects_single_angle():
    with pytest.raises(ParameterError):
        semicircle_directions(1)


@pytest.mark.parametrize("count", [1, 100, 1000])
def test_fibonacci_hemisphere_upper_and_distinct(count):
    d = fibonacci_hemisphere(count)
    assert d.count == count
    assert np.all(d.vectors[:, 2] >= 0)
    assert np.allclose(np.linalg.norm(d.vectors, axis=1), 1.0, atol=1e-12)
    assert len(np.unique(np.round(d.vectors, 12), axis=0)) == count


def test_fibonacci_mean_height_matches_uniform_hemisphere():
    # z of a uniform hemisphere averages to 1/2
    d = fibonacci_hemisphere(5000)
    assert d.vectors[:, 2].mean() == pytest.approx(0.5, abs=0.02)


def test_direction_sets_deterministic():
    a = fibonacci_hemisphere(333)
    b = fibonacci_hemisphere(333)
    assert np.array_equal(a.vectors, b.vectors)
    assert np.array_equal(semicircle_directions(17).vectors,
                          semicircle_directions(17).vectors)


def test_dictionary_entries_on_unit_circle():
    grid = make_grid((12, 9), 0.11, wavelength=0.5, origin=(-0.3, 0.2, 0.0))
    atoms = build_dictionary(grid, fibonacci_hemisphere(40)).atoms
    assert np.allclose(np.abs(atoms), 1.0, atol=1e-12)


def test_dictionary_unit_value_at_origin_node():
    grid = make_grid(5, 0.2, wavelength=1.0, origin=0.0)
    atoms = build_dictionary(grid, semicircle_directions(7)).atoms
    assert np.allclose(atoms[0], 1.0 + 0j)


def test_dictionary_full_period_along_axis():
    lam = 0.75
    grid = make_grid(2, lam, wavelength=lam, origin=0.0)
    d = custom_directions([[1.0, 0.0, 0.0]])
    atoms = build_dictionary(grid, d).atoms
    assert atoms[1, 0] == pytest.approx(1.0 + 0j, abs=1e-12)


def test_dictionary_matches_pointwise_oracle():
    rng = np.random.default_rng(7)
    grid = make_grid((6, 4), 0.23, wavelength=0.9, origin=(0.4, -1.2, 0.3))
    dirs = fibonacci_hemisphere(11)
    atoms = build_dictionary(grid, dirs).atoms
    coords = grid.coordinates()
    for _ in range(20):
        n = rng.integers(grid.size)
        m = rng.integers(dirs.count)
        k = 2 * np.pi / grid.wavelength
        expected = np.exp(-1j * k * float(coords[n] @ dirs.vectors[m]))
        assert atoms[n, m] == pytest.approx(expected, abs=1e-12)


def test_reversed_direction_conjugates_atom():
    grid = make_grid(33, 0.07, wavelength=0.4, origin=0.8)
    v = np.array([0.6, 0.0, 0.8])
    fwd = build_dictionary(grid, custom_directions([v])).atoms[:, 0]
    rev = build_dictionary(grid, custom_directions([-v])).atoms[:, 0]
    assert np.allclose(rev, np.conj(fwd), atol=1e-12)


def test_subdomain_grid_inherits_geometry():
    grid = make_grid((10, 10), 0.1, wavelength=0.55, origin=(1.0, 2.0, 0.0))
    local = subdomain_grid(grid, (4, 4))
    assert local.spacing == grid.spacing
    assert local.wavelength == grid.wavelength
    assert local.origin == (0.0, 0.0, 0.0)
