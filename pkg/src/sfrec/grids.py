"""Regular grids, propagation-direction sets, and plane-wave dictionaries.

Positions live in R^3.  A 1-D grid runs along the x axis, a 2-D grid spans
the x-y plane; the remaining coordinates are fixed by the grid origin.
Plane-wave atoms follow the convention ``exp(-1j * k . r)`` with
``|k| = 2*pi / wavelength``, so a wave with direction ``d`` propagates
towards ``+d`` under an ``exp(+1j*omega*t)`` time convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def _as_origin3(origin) -> tuple[float, float, float]:
    if np.isscalar(origin):
        return (float(origin), 0.0, 0.0)
    origin = tuple(float(v) for v in np.atleast_1d(origin))
    if len(origin) > 3:
        raise ParameterError(f"origin must have at most 3 components, got {len(origin)}")
    return origin + (0.0,) * (3 - len(origin))


@dataclass(frozen=True)
class Grid:
    """Regular 1-D or 2-D reconstruction lattice.

    Parameters
    ----------
    shape : tuple of int
        Number of nodes per axis (one or two entries).
    spacing : float
        Distance between neighbouring nodes, in metres.
    origin : tuple of float
        Physical coordinates of node ``(0, ...)``.
    wavelength : float
        Acoustic wavelength the grid is intended to sample, in metres.

    The flat node ordering is C order (last axis fastest), and node ``i``
    along an axis sits at ``origin + i * spacing``.
    """

    shape: tuple[int, ...]
    spacing: float
    origin: tuple[float, float, float]
    wavelength: float

    def __post_init__(self):
        if not 1 <= len(self.shape) <= 2:
            raise ParameterError(f"grid must be 1-D or 2-D, got shape {self.shape}")
        if any(int(n) < 1 or int(n) != n for n in self.shape):
            raise ParameterError(f"shape entries must be positive integers, got {self.shape}")
        if not self.spacing > 0:
            raise ParameterError(f"spacing must be positive, got {self.spacing}")
        if not self.wavelength > 0:
            raise ParameterError(f"wavelength must be positive, got {self.wavelength}")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def wavenumber(self) -> float:
        """Magnitude of the wavenumber vector, ``2*pi / wavelength``."""
        return 2.0 * np.pi / self.wavelength

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Physical coordinates of the nodes along one grid axis."""
        return self.origin[axis] + self.spacing * np.arange(self.shape[axis])

    def coordinates(self) -> np.ndarray:
        """All node positions as an ``(N, 3)`` array, C-ordered."""
        coords = np.empty((self.size, 3))
        if self.ndim == 1:
            coords[:, 0] = self.axis_coordinates(0)
            coords[:, 1] = self.origin[1]
            coords[:, 2] = self.origin[2]
        else:
            x, y = np.meshgrid(self.axis_coordinates(0), self.axis_coordinates(1),
                               indexing="ij")
            coords[:, 0] = x.ravel()
            coords[:, 1] = y.ravel()
            coords[:, 2] = self.origin[2]
        return coords

    def node_coordinate(self, flat_index: int) -> np.ndarray:
        """Position of a single node identified by its flat index."""
        multi = np.unravel_index(int(flat_index), self.shape)
        pos = np.array(self.origin)
        for axis, idx in enumerate(multi):
            pos[axis] += idx * self.spacing
        return pos


def make_grid(shape, spacing: float, wavelength: float, origin=0.0) -> Grid:
    """Build a :class:`Grid`, accepting an int or tuple for ``shape``.

    ``origin`` may be a scalar (x coordinate) or a 2/3-component sequence.
    """
    if np.isscalar(shape):
        shape = (int(shape),)
    shape = tuple(int(n) for n in shape)
    return Grid(shape=shape, spacing=float(spacing), origin=_as_origin3(origin),
                wavelength=float(wavelength))


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Set of unit propagation directions.

    ``mode`` records the construction ("semicircle-1d", "fibonacci-hemisphere"
    or "custom"); ``vectors`` is an ``(M, 3)`` array of unit vectors.
    """

    mode: str
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 1:
            raise ParameterError(f"direction vectors must be (M, 3), got {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-12):
            raise ParameterError("direction vectors must have unit norm")
        object.__setattr__(self, "vectors", v)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]


def custom_directions(vectors) -> DirectionSet:
    """Wrap explicit unit vectors in a :class:`DirectionSet`."""
    return DirectionSet(mode="custom", vectors=np.asarray(vectors, dtype=float))


def semicircle_directions(count: int) -> DirectionSet:
    """Directions equally spaced over a semicircle, for 1-D apertures.

    The ``count`` angles cover ``[0, pi]`` inclusive and the vectors lie in
    the x-z plane (the array axis and its normal), so the endpoints point
    along +x and -x.
    """
    if count < 2:
        raise ParameterError(f"semicircle needs at least 2 directions, got {count}")
    angles = np.pi * np.arange(count) / (count - 1)
    vectors = np.column_stack([np.cos(angles), np.zeros(count), np.sin(angles)])
    return DirectionSet(mode="semicircle-1d", vectors=vectors)


def fibonacci_hemisphere(count: int) -> DirectionSet:
    """Golden-angle spiral of ``count`` directions on the upper hemisphere.

    Deterministic for a given ``count``; every vector satisfies ``z >= 0``
    and the z components average to 1/2 as on a uniform hemisphere.
    """
    if count < 1:
        raise ParameterError(f"need at least 1 direction, got {count}")
    i = np.arange(count)
    z = (i + 0.5) / count
    radial = np.sqrt(1.0 - z * z)
    azimuth = GOLDEN_ANGLE * i
    vectors = np.column_stack([radial * np.cos(azimuth), radial * np.sin(azimuth), z])
    # renormalize to keep norms at 1 within strict tolerance
    vectors /= np.linalg.norm(vectors, axis=1)[:, None]
    return DirectionSet(mode="fibonacci-hemisphere", vectors=vectors)


@dataclass(frozen=True, eq=False)
class PlaneWaveDictionary:
    """Complex plane-wave atoms evaluated on a grid.

    ``atoms`` is an ``(N, M)`` matrix whose entry ``(n, m)`` is
    ``exp(-1j * k_m . r_n)`` with ``|k_m| = 2*pi / wavelength``.
    """

    grid: Grid
    directions: DirectionSet
    atoms: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]


def build_dictionary(grid: Grid, directions: DirectionSet) -> PlaneWaveDictionary:
    """Evaluate every plane wave of ``directions`` at every node of ``grid``."""
    phase = grid.coordinates() @ directions.vectors.T  # (N, M) of k_hat . r
    atoms = np.exp(-1j * grid.wavenumber * phase)
    return PlaneWaveDictionary(grid=grid, directions=directions, atoms=atoms)


def subdomain_grid(grid: Grid, subdomain_shape: tuple[int, ...]) -> Grid:
    """Local grid of a subdomain: same spacing and wavelength, origin at 0."""
    if len(subdomain_shape) != grid.ndim:
        raise ParameterError("subdomain shape must match grid dimensionality")
    return Grid(shape=tuple(int(n) for n in subdomain_shape), spacing=grid.spacing,
                origin=(0.0, 0.0, 0.0), wavelength=grid.wavelength)
