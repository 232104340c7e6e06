"""Request/response schemas of the reconstruction service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..config import (ConvSolverConfig, Dataset2DConfig, LocalSolverConfig,
                      Monopole1DConfig, MonopolePlane2DConfig, SynthesizeConfig)


class ComplexArray(BaseModel):
    re: list[float]
    im: list[float]


class ComplexMatrix(BaseModel):
    re: list[list[float]]
    im: list[list[float]]


class HealthResponse(BaseModel):
    status: str
    version: str


class GridModel(BaseModel):
    shape: list[int] = Field(min_length=1, max_length=2)
    spacing: float = Field(gt=0)
    wavelength: float = Field(gt=0)
    origin: list[float] = [0.0, 0.0, 0.0]


class DirectionsModel(BaseModel):
    mode: Literal["semicircle-1d", "fibonacci-hemisphere"]
    count: int = Field(ge=1)


class ObservationsModel(BaseModel):
    indices: list[int]
    values: ComplexArray


class RegularizerModel(BaseModel):
    kind: Literal["least-squares", "ridge", "ridge-loocv", "lasso", "lasso-loocv"]
    beta: Optional[float] = None
    grid: Optional[list[float]] = None
    grid_lo: float = 1e-8
    grid_hi: float = 1e-1
    grid_points: int = 20


class GlobalReconstructRequest(BaseModel):
    grid: GridModel
    directions: DirectionsModel
    observations: ObservationsModel
    regularizer: RegularizerModel


class LocalReconstructRequest(BaseModel):
    grid: GridModel
    directions: DirectionsModel
    observations: ObservationsModel
    local: LocalSolverConfig = LocalSolverConfig()


class ConvReconstructRequest(BaseModel):
    grid: GridModel
    directions: DirectionsModel
    observations: ObservationsModel
    solver: ConvSolverConfig = ConvSolverConfig()


class FieldModel(BaseModel):
    shape: list[int]
    spacing: float
    wavelength: float
    origin: list[float]
    values: ComplexArray


class ReconstructResponse(BaseModel):
    field: FieldModel
    chosen_beta: Optional[float] = None
    diagnostics: Optional[list[list[float]]] = None


class NmseRow1D(BaseModel):
    distance_wavelengths: float
    method: str
    nmse_db: float
    similarity: float
    n_obs: int


class Trace1D(BaseModel):
    distance_wavelengths: float
    spacing: float
    origin_x: float
    true: ComplexArray
    observed_indices: list[int]
    observed_values: ComplexArray
    estimates: dict[str, ComplexArray]


class Monopole1DResponse(BaseModel):
    kind: Literal["monopole-1d"]
    version: str
    config: Monopole1DConfig
    config_hash: str
    wavelength: float
    distances: list[float]
    rows: list[NmseRow1D]
    trace: Optional[Trace1D]
    diagnostics: dict[str, list[list[float]]]


class NmseRow2D(BaseModel):
    count: int
    method: str
    nmse_db: float
    nmse_near_db: float
    similarity: float
    n_obs: int


class Case2D(BaseModel):
    count: int
    estimates: dict[str, ComplexArray]
    observed_indices: list[int]
    diagnostics: dict[str, list[list[float]]]
    vectors: dict[str, dict[str, ComplexArray]]


class MonopolePlane2DResponse(BaseModel):
    kind: Literal["monopole-plane-2d"]
    version: str
    config: MonopolePlane2DConfig
    config_hash: str
    wavelength: float
    shape: list[int]
    spacing: float
    origin: list[float]
    rows: list[NmseRow2D]
    truth: ComplexArray
    cases: list[Case2D]


class DatasetPayloadModel(BaseModel):
    shape: list[int]
    spacing: float
    origin: list[float]
    frequencies: list[float]
    units: str
    positions: list[list[float]]
    responses: ComplexMatrix


class Dataset2DRequest(BaseModel):
    config: Dataset2DConfig
    dataset: Optional[DatasetPayloadModel] = None


class DatasetRow(BaseModel):
    frequency: float
    count: int
    seed_index: int
    method: str
    nmse_db: float
    similarity: float


class DatasetAggregate(BaseModel):
    frequency: float
    count: int
    method: str
    nmse_mean_db: float
    nmse_std_db: float
    n_seeds: int
    below_marker: bool


class Dataset2DResponse(BaseModel):
    kind: Literal["dataset-2d"]
    version: str
    config: Dataset2DConfig
    config_hash: str
    frequencies: list[float]
    markers: dict[str, float]
    rows: list[DatasetRow]
    aggregates: list[DatasetAggregate]


class DatasetCheckResponse(BaseModel):
    valid: bool
    errors: list[str]
    n_positions: Optional[int] = None
    n_frequencies: Optional[int] = None
    spacing: Optional[float] = None


class SynthesizeRequest(BaseModel):
    config: SynthesizeConfig = SynthesizeConfig()
