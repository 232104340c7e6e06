import numpy as np
import pytest

import sfrec
from sfrec.fields import (Medium, VectorField, intensity, monopole_velocity,
                          plane_wave_velocity, velocity_from_conv_maps,
                          velocity_from_global, velocity_from_local_maps)
from sfrec.grids import (build_dictionary, custom_directions, make_grid,
                         semicircle_directions, subdomain_grid)
from sfrec.partition import wavelength_partition
from sfrec.simulate import SoundField, plane_wave_field


AIR = Medium()


def test_medium_defaults_and_impedance():
    assert AIR.density == pytest.approx(1.204)
    assert AIR.sound_speed == pytest.approx(343.0)
    assert AIR.impedance == pytest.approx(1.204 * 343.0)


def square_setup(n=21, lam=0.5):
    grid = make_grid((n, n), lam / 10, wavelength=lam,
                     origin=(-lam, -lam, 0.0))
    directions = sfrec.fibonacci_hemisphere(24)
    return grid, directions, build_dictionary(grid, directions)


def test_single_plane_wave_impedance():
    grid, directions, dictionary = square_setup()
    x = np.zeros(directions.count, dtype=complex)
    x[5] = 2.0 - 1j
    u = velocity_from_global(dictionary, x, AIR)
    p = dictionary.atoms @ x
    speed = np.linalg.norm(u.vectors, axis=1)
    assert np.allclose(speed * AIR.impedance, np.abs(p), atol=1e-10)


def test_zero_coefficients_zero_velocity():
    grid, directions, dictionary = square_setup()
    u = velocity_from_global(dictionary, np.zeros(directions.count), AIR)
    assert not np.any(u.vectors)


def test_velocity_linear_in_coefficients():
    grid, directions, dictionary = square_setup()
    rng = np.random.default_rng(0)
    x1 = rng.standard_normal(directions.count) + 1j * rng.standard_normal(directions.count)
    x2 = rng.standard_normal(directions.count) + 1j * rng.standard_normal(directions.count)
    u1 = velocity_from_global(dictionary, x1, AIR).vectors
    u2 = velocity_from_global(dictionary, x2, AIR).vectors
    u12 = velocity_from_global(dictionary, x1 + x2, AIR).vectors
    assert np.allclose(u12, u1 + u2, atol=1e-12)


def test_counter_propagating_waves_null_velocity_at_antinodes():
    lam = 1.0
    grid = make_grid(41, lam / 40, wavelength=lam, origin=0.0)
    directions = custom_directions([[1.0, 0, 0], [-1.0, 0, 0]])
    dictionary = build_dictionary(grid, directions)
    x = np.array([1.0, 1.0], dtype=complex)
    u = velocity_from_global(dictionary, x, AIR)
    p = dictionary.atoms @ x
    # standing wave: velocity ~ sin(kx), pressure ~ cos(kx)
    antinodes = np.argsort(np.abs(p))[-3:]
    assert np.max(np.linalg.norm(u.vectors[antinodes], axis=1)) < 1e-10 / AIR.impedance


def test_conv_maps_velocity_matches_global_single_atom():
    lam = 1.0
    grid = make_grid(49, lam / 8, wavelength=lam, origin=0.25)
    directions = semicircle_directions(9)
    dictionary = build_dictionary(grid, directions)
    truth = SoundField(grid=grid, pressure=dictionary.atoms[:, 3].copy())
    obs = sfrec.observe(truth, np.arange(grid.size))
    scheme = wavelength_partition(grid)
    from sfrec.convadmm import ConvParams, make_conv_problem
    problem = make_conv_problem(obs, scheme, directions,
                                ConvParams(sparsity=0.0, rho=1.0, max_iter=1))
    # delta map at the zero shift reproduces the plane wave exactly
    maps = np.zeros((directions.count, *problem.padded.shape), dtype=complex)
    maps[3][tuple(0 for _ in problem.padded.shape)] = 1.0
    u_conv = velocity_from_conv_maps(problem, maps, AIR)
    x = np.zeros(directions.count, dtype=complex)
    x[3] = 1.0
    u_global = velocity_from_global(dictionary, x, AIR)
    assert np.allclose(u_conv.vectors, u_global.vectors, atol=1e-8)


def test_conv_maps_zero_gives_zero():
    lam = 1.0
    grid = make_grid(33, lam / 8, wavelength=lam)
    directions = semicircle_directions(5)
    truth = SoundField(grid=grid, pressure=np.ones(grid.size))
    obs = sfrec.observe(truth, np.arange(grid.size))
    scheme = wavelength_partition(grid)
    from sfrec.convadmm import ConvParams, make_conv_problem
    problem = make_conv_problem(obs, scheme, directions,
                                ConvParams(sparsity=0.0, rho=1.0, max_iter=1))
    maps = np.zeros((directions.count, *problem.padded.shape), dtype=complex)
    assert not np.any(velocity_from_conv_maps(problem, maps, AIR).vectors)


def test_local_maps_velocity_constant_coefficient_plane_wave():
    # every subdomain holding the same single-atom coefficient reproduces the
    # local plane wave's impedance relation after averaging
    lam = 1.0
    grid = make_grid(49, lam / 8, wavelength=lam, origin=0.0)
    directions = semicircle_directions(9)
    scheme = wavelength_partition(grid)
    local = build_dictionary(subdomain_grid(grid, scheme.subdomain_shape), directions)
    maps = np.zeros((directions.count, scheme.padded_size), dtype=complex)
    maps[0, :] = 1.0  # atom 0 propagates along +x
    u = velocity_from_local_maps(local, maps, scheme, AIR)
    # patch averaging of identical plane-wave pieces shifts phases, but the
    # impedance relation survives on the interior away from pad edges
    speeds = np.linalg.norm(u.vectors, axis=1)
    assert np.all(speeds > 0)
    direction_cos = np.real(u.vectors[:, 0]) / np.abs(u.vectors[:, 0] + 0j)
    assert np.allclose(np.abs(u.vectors[:, 1]), 0.0, atol=1e-12)


def test_intensity_plane_wave_identity():
    lam = 0.7
    grid = make_grid((15, 15), lam / 6, wavelength=lam, origin=(0.0, 0.0, 0.0))
    d = np.array([0.6, 0.8, 0.0])
    p = plane_wave_field(grid, d, amplitude=2.0)
    u = plane_wave_velocity(grid, d, AIR, amplitude=2.0)
    s = intensity(p, u)
    expected = abs(2.0) ** 2 / (2 * AIR.impedance)
    along = s.vectors.real @ d
    assert np.allclose(along, expected, rtol=1e-10)
    assert np.allclose(np.linalg.norm(s.vectors.real, axis=1), expected, rtol=1e-10)


def test_intensity_quadrature_is_reactive():
    grid = make_grid(5, 0.1, wavelength=1.0)
    p = SoundField(grid=grid, pressure=np.ones(5, dtype=complex))
    u = VectorField(grid=grid, vectors=1j * np.ones((5, 3)))
    s = intensity(p, u)
    assert np.allclose(s.vectors.real, 0.0, atol=1e-15)


def test_intensity_half_factor_toggle():
    grid = make_grid(4, 0.1, wavelength=1.0)
    p = SoundField(grid=grid, pressure=2.0 * np.ones(4, dtype=complex))
    u = VectorField(grid=grid, vectors=np.ones((4, 3), dtype=complex))
    with_half = intensity(p, u, time_average=True)
    without = intensity(p, u, time_average=False)
    assert np.allclose(without.vectors.real, 2 * with_half.vectors.real)


def test_monopole_intensity_radial_inverse_square():
    lam = 0.25
    grid = make_grid(2, 4.0, wavelength=lam, origin=4.0)  # far field, r=4 and 8
    src = (0.0, 0.0, 0.0)
    p = sfrec.monopole_field(grid, src)
    u = monopole_velocity(grid, src, AIR)
    s = intensity(p, u)
    radial = s.vectors.real[:, 0]  # both nodes on +x axis
    assert radial[0] > 0 and radial[1] > 0
    assert radial[0] / radial[1] == pytest.approx(4.0, rel=1e-6)
    # transverse components vanish
    assert np.allclose(s.vectors.real[:, 1:], 0.0, atol=1e-18)


def test_monopole_velocity_points_outward():
    lam = 0.343
    grid = make_grid((11, 11), lam / 5, wavelength=lam,
                     origin=(-lam, -lam, 0.0))
    src = (0.0, 0.0, lam / 8)
    p = sfrec.monopole_field(grid, src)
    u = monopole_velocity(grid, src, AIR)
    s = intensity(p, u)
    coords = grid.coordinates()
    outward = coords - np.asarray([0.0, 0.0, lam / 8])
    outward /= np.linalg.norm(outward, axis=1)[:, None]
    flux = np.sum(s.vectors.real * outward, axis=1)
    assert np.all(flux > 0)
