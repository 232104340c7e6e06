"""Measured-dataset container, ingestion checks and a synthetic stand-in.

Datasets are NumPy ``.npz`` archives with the keys

    layout       fixed string "grid-2d"
    shape        two ints, nodes per axis
    spacing      grid step in metres
    origin       3 floats, position of node (0, 0)
    frequencies  strictly increasing list of F frequencies in Hz
    units        pressure unit string (informative)
    positions    (N, 3) float64 node positions, C-ordered, N = prod(shape)
    responses    (N, F) complex128 pressure responses

``ingest_dataset`` validates the archive against its own header before any
use and reports the offending record on failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IngestionError
from .grids import Grid, make_grid
from .simulate import SoundField

_POSITION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DatasetFile:
    shape: tuple[int, int]
    spacing: float
    origin: tuple[float, float, float]
    frequencies: np.ndarray
    units: str
    positions: np.ndarray
    responses: np.ndarray

    @property
    def n_positions(self) -> int:
        return int(np.prod(self.shape))

    def grid(self, wavelength: float) -> Grid:
        return make_grid(self.shape, self.spacing, wavelength=wavelength,
                         origin=self.origin)

    def nearest_frequency(self, frequency: float) -> int:
        return int(np.argmin(np.abs(self.frequencies - frequency)))

    def field(self, frequency_index: int, sound_speed: float) -> SoundField:
        """Single-frequency slice as a SoundField on the dataset grid."""
        f = float(self.frequencies[frequency_index])
        return SoundField(grid=self.grid(wavelength=sound_speed / f),
                          pressure=self.responses[:, frequency_index])


def write_dataset(path, dataset: DatasetFile) -> None:
    np.savez(path, layout="grid-2d", shape=np.asarray(dataset.shape, dtype=np.int64),
             spacing=float(dataset.spacing), origin=np.asarray(dataset.origin),
             frequencies=np.asarray(dataset.frequencies, dtype=float),
             units=dataset.units, positions=dataset.positions,
             responses=dataset.responses)


def _expected_positions(shape, spacing, origin) -> np.ndarray:
    grid = make_grid(shape, spacing, wavelength=1.0, origin=origin)
    return grid.coordinates()


def from_arrays(shape, spacing, origin, frequencies, units, positions,
                responses) -> DatasetFile:
    """Validate raw arrays against the declared header."""
    shape = tuple(int(n) for n in np.asarray(shape).reshape(-1))
    if len(shape) != 2 or any(n < 1 for n in shape):
        raise IngestionError(f"header shape must be two positive ints, got {shape}")
    spacing = float(spacing)
    if spacing <= 0:
        raise IngestionError(f"header spacing must be positive, got {spacing}")
    origin = tuple(float(v) for v in np.asarray(origin).reshape(-1))
    if len(origin) != 3:
        raise IngestionError(f"header origin must have 3 components, got {len(origin)}")
    frequencies = np.asarray(frequencies, dtype=float).reshape(-1)
    if frequencies.size < 1:
        raise IngestionError("header must declare at least one frequency")
    if np.any(np.diff(frequencies) <= 0):
        raise IngestionError("header frequencies must be strictly increasing")
    n = int(np.prod(shape))
    positions = np.asarray(positions, dtype=float)
    if positions.shape != (n, 3):
        raise IngestionError(
            f"header declares {n} positions but the positions record has shape "
            f"{positions.shape}")
    responses = np.asarray(responses, dtype=np.complex128)
    if responses.shape != (n, frequencies.size):
        raise IngestionError(
            f"responses record has shape {responses.shape}, expected "
            f"({n}, {frequencies.size})")
    expected = _expected_positions(shape, spacing, origin)
    deviation = np.max(np.abs(positions - expected), axis=1)
    worst = int(np.argmax(deviation))
    if deviation[worst] > _POSITION_TOL:
        raise IngestionError(
            f"position record {worst} at {tuple(positions[worst])} is off the "
            f"declared grid by {deviation[worst]:.3e} m")
    return DatasetFile(shape=shape, spacing=spacing, origin=origin,
                       frequencies=frequencies, units=str(units),
                       positions=positions, responses=responses)


def ingest_dataset(path) -> DatasetFile:
    """Load and validate a dataset archive."""
    try:
        archive = np.load(path, allow_pickle=False)
    except Exception as exc:
        raise IngestionError(f"cannot read dataset archive {path}: {exc}") from exc
    required = ["layout", "shape", "spacing", "origin", "frequencies", "units",
                "positions", "responses"]
    missing = [k for k in required if k not in archive]
    if missing:
        raise IngestionError(f"dataset archive is missing records: {missing}")
    layout = str(archive["layout"])
    if layout != "grid-2d":
        raise IngestionError(f"unsupported dataset layout {layout!r}")
    return from_arrays(archive["shape"], archive["spacing"], archive["origin"],
                       archive["frequencies"], archive["units"],
                       archive["positions"], archive["responses"])


def synthesize_classroom(shape=(35, 35), spacing: float = 0.05,
                         frequencies=(500.0, 800.0, 1100.0, 1400.0, 1700.0, 2000.0),
                         n_waves: int = 64, seed: int = 7,
                         sound_speed: float = 343.0,
                         origin=(0.0, 0.0, 0.0)) -> DatasetFile:
    """Diffuse-like stand-in for a reverberant room measurement.

    Each frequency response is a superposition of ``n_waves`` plane waves
    with directions drawn uniformly on the sphere and unit-variance complex
    Gaussian amplitudes.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    frequencies = np.asarray(sorted(frequencies), dtype=float)
    grid = make_grid(shape, spacing, wavelength=1.0, origin=origin)
    coords = grid.coordinates()
    responses = np.empty((grid.size, frequencies.size), dtype=np.complex128)
    for j, f in enumerate(frequencies):
        directions = rng.standard_normal((n_waves, 3))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        amplitudes = (rng.standard_normal(n_waves)
                      + 1j * rng.standard_normal(n_waves)) / np.sqrt(2.0 * n_waves)
        phase = coords @ directions.T  # (N, n_waves)
        k = 2.0 * np.pi * f / sound_speed
        responses[:, j] = np.exp(-1j * k * phase) @ amplitudes
    return DatasetFile(shape=tuple(int(n) for n in shape), spacing=float(spacing),
                       origin=tuple(float(v) for v in origin) if len(origin) == 3
                       else (float(origin[0]), float(origin[1]), 0.0),
                       frequencies=frequencies, units="Pa",
                       positions=coords, responses=responses)


def raw_payload(path) -> dict:
    """Archive contents as a payload without semantic validation.

    Used by clients that forward a file to the service's check endpoint:
    only readability and record presence are verified here.
    """
    try:
        archive = np.load(path, allow_pickle=False)
    except Exception as exc:
        raise IngestionError(f"cannot read dataset archive {path}: {exc}") from exc
    required = ["shape", "spacing", "origin", "frequencies", "units",
                "positions", "responses"]
    missing = [k for k in required if k not in archive]
    if missing:
        raise IngestionError(f"dataset archive is missing records: {missing}")
    responses = np.asarray(archive["responses"])
    return {
        "shape": np.asarray(archive["shape"]).tolist(),
        "spacing": float(archive["spacing"]),
        "origin": np.asarray(archive["origin"]).tolist(),
        "frequencies": np.asarray(archive["frequencies"]).tolist(),
        "units": str(archive["units"]),
        "positions": np.asarray(archive["positions"]).tolist(),
        "responses": {"re": responses.real.tolist(), "im": responses.imag.tolist()},
    }


def to_payload(dataset: DatasetFile) -> dict:
    """JSON-safe form of a dataset (used by the service API)."""
    return {
        "shape": list(dataset.shape),
        "spacing": dataset.spacing,
        "origin": list(dataset.origin),
        "frequencies": dataset.frequencies.tolist(),
        "units": dataset.units,
        "positions": dataset.positions.tolist(),
        "responses": {
            "re": dataset.responses.real.tolist(),
            "im": dataset.responses.imag.tolist(),
        },
    }


def from_payload(payload: dict) -> DatasetFile:
    responses = (np.asarray(payload["responses"]["re"], dtype=float)
                 + 1j * np.asarray(payload["responses"]["im"], dtype=float))
    return from_arrays(payload["shape"], payload["spacing"], payload["origin"],
                       payload["frequencies"], payload["units"],
                       payload["positions"], responses)
