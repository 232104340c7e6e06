"""Ground-truth field synthesis, observation masks and noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SamplingError, SingularSourceError
from .grids import Grid

#: Physical separations below this fraction of a wavelength count as "on a node".
_SINGULARITY_REL = 1e-9

#: Rejection budget for minimum-distance sampling.
_MAX_REJECTIONS = 10_000


@dataclass(frozen=True, eq=False)
class SoundField:
    """Complex pressure at every node of a grid (flat, C-ordered)."""

    grid: Grid
    pressure: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pressure, dtype=np.complex128).reshape(-1)
        if p.size != self.grid.size:
            raise ParameterError(
                f"pressure has {p.size} values for a grid of {self.grid.size} nodes")
        object.__setattr__(self, "pressure", p)

    def shaped(self) -> np.ndarray:
        """Pressure reshaped to the grid shape."""
        return self.pressure.reshape(self.grid.shape)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Pressure values observed at a subset of grid nodes.

    ``indices`` are strictly increasing flat node indices; ``values`` holds
    the corresponding complex pressures.
    """

    grid: Grid
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        val = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if idx.size != val.size:
            raise ParameterError("indices and values must have equal length")
        if idx.size and (idx[0] < 0 or idx[-1] >= self.grid.size):
            raise ParameterError("observation indices out of grid range")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ParameterError("observation indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def count(self) -> int:
        return int(self.indices.size)

    def positions(self) -> np.ndarray:
        return self.grid.coordinates()[self.indices]


def monopole_field(grid: Grid, source_position, amplitude: float = 1.0) -> SoundField:
    """Free-field point source: ``p(r) = A * exp(-1j*k*d) / (4*pi*d)``.

    ``d`` is the distance to ``source_position``.  Raises
    :class:`SingularSourceError` if the source lies on a grid node.
    """
    src = np.asarray(source_position, dtype=float)
    if src.size > 3:
        raise ParameterError("source position must have at most 3 components")
    src = np.pad(src.reshape(-1), (0, 3 - src.size))
    dist = np.linalg.norm(grid.coordinates() - src, axis=1)
    if np.min(dist) < _SINGULARITY_REL * grid.wavelength:
        raise SingularSourceError(
            f"source {tuple(src)} coincides with a grid node")
    pressure = amplitude * np.exp(-1j * grid.wavenumber * dist) / (4.0 * np.pi * dist)
    return SoundField(grid=grid, pressure=pressure)


def plane_wave_field(grid: Grid, direction, amplitude: complex = 1.0) -> SoundField:
    """Plane wave ``p(r) = A * exp(-1j*k * d . r)`` for a unit direction ``d``."""
    d = np.asarray(direction, dtype=float).reshape(-1)
    if d.size != 3:
        raise ParameterError("direction must have 3 components")
    if abs(np.linalg.norm(d) - 1.0) > 1e-8:
        raise ParameterError(f"direction must be unit norm, got |d| = {np.linalg.norm(d)}")
    phase = grid.coordinates() @ d
    return SoundField(grid=grid, pressure=amplitude * np.exp(-1j * grid.wavenumber * phase))


def superpose(*fields: SoundField) -> SoundField:
    """Elementwise sum of fields sharing one grid."""
    if not fields:
        raise ParameterError("superpose needs at least one field")
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ParameterError("superposed fields must share one grid")
    return SoundField(grid=grid, pressure=np.sum([f.pressure for f in fields], axis=0))


def observe(field: SoundField, indices) -> ObservationSet:
    """Observation set reading the field at the given (sorted) node indices."""
    idx = np.sort(np.asarray(indices, dtype=np.int64).reshape(-1))
    return ObservationSet(grid=field.grid, indices=idx, values=field.pressure[idx])


def sample_observations(field: SoundField, count: int, seed: int,
                        min_distance: float | None = None) -> ObservationSet:
    """Uniformly sample ``count`` distinct nodes, optionally spaced apart.

    With ``min_distance`` set, nodes are drawn one at a time and draws that
    fall within the exclusion distance of an accepted node are rejected; the
    total rejection budget is 10^4, after which :class:`SamplingError` is
    raised.  Deterministic for a fixed ``seed``.
    """
    n = field.grid.size
    if count < 1 or count > n:
        raise ParameterError(f"count must be in [1, {n}], got {count}")
    rng = np.random.default_rng(seed)
    if min_distance is None:
        idx = rng.choice(n, size=count, replace=False)
        return observe(field, idx)

    coords = field.grid.coordinates()
    chosen: list[int] = []
    chosen_pos = np.empty((0, 3))
    rejections = 0
    while len(chosen) < count:
        cand = int(rng.integers(n))
        pos = coords[cand]
        if cand in chosen or (
                chosen and np.min(np.linalg.norm(chosen_pos - pos, axis=1)) < min_distance):
            rejections += 1
            if rejections > _MAX_REJECTIONS:
                raise SamplingError(
                    f"could not place {count} observations with min_distance="
                    f"{min_distance} after {_MAX_REJECTIONS} rejections "
                    f"({len(chosen)} placed)")
            continue
        chosen.append(cand)
        chosen_pos = np.vstack([chosen_pos, pos])
    return observe(field, chosen)


def regular_subsample(field: SoundField, every) -> ObservationSet:
    """Observations on a coarser lattice: node indices 0, k, 2k, ... per axis."""
    grid = field.grid
    if np.isscalar(every):
        every = (int(every),) * grid.ndim
    every = tuple(int(k) for k in every)
    if len(every) != grid.ndim or any(k < 1 for k in every):
        raise ParameterError(f"invalid subsampling strides {every}")
    axes = [np.arange(0, n, k) for n, k in zip(grid.shape, every)]
    if grid.ndim == 1:
        flat = axes[0]
    else:
        i, j = np.meshgrid(*axes, indexing="ij")
        flat = np.ravel_multi_index((i.ravel(), j.ravel()), grid.shape)
    return observe(field, flat)


def add_noise(observations: ObservationSet, snr_db: float, seed: int) -> ObservationSet:
    """Add complex white Gaussian noise at the requested SNR (dB)."""
    rng = np.random.default_rng(seed)
    signal_power = np.mean(np.abs(observations.values) ** 2)
    noise_power = signal_power / (10.0 ** (snr_db / 10.0))
    scale = np.sqrt(noise_power / 2.0)
    noise = scale * (rng.standard_normal(observations.count)
                     + 1j * rng.standard_normal(observations.count))
    return ObservationSet(grid=observations.grid, indices=observations.indices,
                          values=observations.values + noise)
