"""Particle velocity and time-averaged intensity from field representations.

Every plane wave carries velocity along its propagation direction with the
characteristic impedance ``rho0 * c`` relating pressure and speed, so any
plane-wave coefficient representation converts to a velocity vector field
analytically, without numerical pressure gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convadmm import ConvProblem
from .errors import ParameterError
from .grids import Grid, PlaneWaveDictionary
from .partition import PartitionedField, PartitionScheme, crop, overlap_average
from .simulate import SoundField


@dataclass(frozen=True)
class Medium:
    """Acoustic medium constants (defaults: air at 20 C)."""

    density: float = 1.204
    sound_speed: float = 343.0
    frequency: float | None = None

    def __post_init__(self):
        if self.density <= 0 or self.sound_speed <= 0:
            raise ParameterError("medium constants must be positive")
        if self.frequency is not None and self.frequency <= 0:
            raise ParameterError("frequency must be positive")

    @property
    def impedance(self) -> float:
        return self.density * self.sound_speed


@dataclass(frozen=True, eq=False)
class VectorField:
    """One complex 3-vector per grid node (C-ordered, like pressures)."""

    grid: Grid
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.complex128).reshape(-1, 3)
        if v.shape[0] != self.grid.size:
            raise ParameterError("one vector per grid node required")
        object.__setattr__(self, "vectors", v)


def velocity_from_global(dictionary: PlaneWaveDictionary, coefficients,
                         medium: Medium) -> VectorField:
    """Velocity of a global plane-wave expansion: each atom contributes
    ``direction / (rho0*c)`` times its pressure."""
    x = np.asarray(getattr(coefficients, "values", coefficients),
                   dtype=np.complex128).reshape(-1)
    if x.size != dictionary.n_atoms:
        raise ParameterError("coefficient length must match dictionary atoms")
    weighted = x[:, None] * dictionary.directions.vectors  # (M, 3)
    vectors = dictionary.atoms @ weighted / medium.impedance
    return VectorField(grid=dictionary.grid, vectors=vectors)


def velocity_from_conv_maps(problem: ConvProblem, maps: np.ndarray,
                            medium: Medium) -> VectorField:
    """Velocity of a convolutional representation via per-atom outputs."""
    maps_freq = np.fft.fftn(np.asarray(maps, dtype=np.complex128),
                            axes=problem.spatial_axes)
    per_atom = np.fft.ifftn(problem.transfer * maps_freq, axes=problem.spatial_axes)
    pad_n = int(np.prod(problem.padded.shape))
    flat = per_atom.reshape(problem.n_atoms, pad_n)
    padded_vectors = flat.T @ problem.directions.vectors / medium.impedance
    vectors = np.stack([crop(padded_vectors[:, ax], problem.scheme).ravel()
                        for ax in range(3)], axis=1)
    return VectorField(grid=problem.scheme.grid, vectors=vectors)


def velocity_from_local_maps(local_dictionary: PlaneWaveDictionary,
                             maps: np.ndarray, scheme: PartitionScheme,
                             medium: Medium) -> VectorField:
    """Velocity of independent subdomain representations, overlap-averaged
    per vector component and cropped to the grid."""
    maps = np.asarray(maps, dtype=np.complex128)
    if maps.shape[0] != local_dictionary.n_atoms:
        raise ParameterError("map count must match dictionary atoms")
    components = []
    for ax in range(3):
        weighted = maps * local_dictionary.directions.vectors[:, ax][:, None]
        patches = local_dictionary.atoms @ weighted / medium.impedance
        partitioned = PartitionedField(scheme=scheme, domain_shape=scheme.padded_shape,
                                       patches=patches)
        components.append(crop(overlap_average(partitioned), scheme).ravel())
    return VectorField(grid=scheme.grid, vectors=np.stack(components, axis=1))


def intensity(pressure: SoundField, velocity: VectorField,
              time_average: bool = True) -> VectorField:
    """Active intensity ``Re{p * conj(u)}`` per component.

    ``time_average`` applies the 1/2 factor for complex amplitudes; disable
    it to read the product without the factor.
    """
    if pressure.grid != velocity.grid:
        raise ParameterError("pressure and velocity grids differ")
    factor = 0.5 if time_average else 1.0
    vectors = factor * np.real(pressure.pressure[:, None] * np.conj(velocity.vectors))
    return VectorField(grid=pressure.grid, vectors=vectors.astype(np.complex128))


def monopole_velocity(grid: Grid, source_position, medium: Medium,
                      amplitude: float = 1.0) -> VectorField:
    """Analytic particle velocity of a free-field point source.

    ``u(r) = p(r)/(rho0*c) * (1 + 1/(1j*k*d)) * rhat`` including the
    near-field term, with ``d`` the source distance and ``rhat`` the radial
    unit vector.
    """
    src = np.asarray(source_position, dtype=float).reshape(-1)
    src = np.pad(src, (0, 3 - src.size))
    offsets = grid.coordinates() - src
    dist = np.linalg.norm(offsets, axis=1)
    if np.min(dist) <= 0:
        raise ParameterError("source coincides with a grid node")
    k = grid.wavenumber
    pressure = amplitude * np.exp(-1j * k * dist) / (4.0 * np.pi * dist)
    radial = pressure / medium.impedance * (1.0 + 1.0 / (1j * k * dist))
    return VectorField(grid=grid, vectors=radial[:, None] * (offsets / dist[:, None]))


def plane_wave_velocity(grid: Grid, direction, medium: Medium,
                        amplitude: complex = 1.0) -> VectorField:
    """Analytic particle velocity of a plane wave."""
    d = np.asarray(direction, dtype=float).reshape(-1)
    if abs(np.linalg.norm(d) - 1.0) > 1e-8:
        raise ParameterError("direction must be unit norm")
    phase = grid.coordinates() @ d
    pressure = amplitude * np.exp(-1j * grid.wavenumber * phase)
    return VectorField(grid=grid,
                       vectors=pressure[:, None] * d[None, :] / medium.impedance)
