"""Experiment configuration models (validated before any compute)."""

from __future__ import annotations

from typing import Literal, Optional

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator

from .errors import ParameterError

Method = Literal["global-ls", "global-ridge", "local-independent",
                 "conv-sparse", "conv-smooth"]


class ConvSolverConfig(BaseModel):
    """Penalties and iteration budget of the convolutional solver."""

    sparsity: float = Field(default=1e-5, ge=0)
    smoothness: float = Field(default=1e-3, ge=0)
    rho: float = Field(default=1e-5, gt=0)
    max_iter: int = Field(default=500, ge=1)
    dictionary_mode: Literal["global", "filters"] = "global"


class LocalSolverConfig(BaseModel):
    """Per-subdomain sparse solver selection."""

    regularizer: Literal["lasso", "lasso-loocv"] = "lasso-loocv"
    beta: float = Field(default=1e-5, gt=0)
    grid_points: int = Field(default=20, ge=1)
    grid_lo: float = Field(default=1e-8, gt=0)
    grid_hi: float = Field(default=1e-1, gt=0)
    # throughput bound on leave-one-out refits per subdomain (0 = exhaustive)
    loocv_max_folds: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _range_ok(self):
        if self.grid_lo >= self.grid_hi:
            raise ValueError("grid_lo must be below grid_hi")
        return self


class RidgeSolverConfig(BaseModel):
    """Candidate grid of the cross-validated global ridge."""

    grid_points: int = Field(default=20, ge=1)
    grid_lo: float = Field(default=1e-8, gt=0)
    grid_hi: float = Field(default=1e-1, gt=0)


class Monopole1DConfig(BaseModel):
    """Line-array sweep over the source-to-array distance."""

    wavelength: float = Field(default=1.0, gt=0)
    n_nodes: int = Field(default=241, ge=2)
    nodes_per_wavelength: int = Field(default=24, ge=2)
    mic_stride: int = Field(default=8, ge=1)
    n_directions: int = Field(default=21, ge=2)
    distances: list[float] = Field(
        default=[0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0, 7.0, 10.0])
    trace_distance: Optional[float] = 0.5
    methods: list[Method] = Field(
        default=["global-ls", "local-independent", "conv-smooth"])
    # line-array defaults calibrated for the unit-amplitude source model
    conv: ConvSolverConfig = ConvSolverConfig(sparsity=2e-7, smoothness=1.0,
                                              rho=3e-5)
    local: LocalSolverConfig = LocalSolverConfig()
    noise_snr_db: Optional[float] = None
    seed: int = 0
    workers: int = Field(default=1, ge=1)

    @field_validator("distances")
    @classmethod
    def _distances_ok(cls, v):
        if not v or any(d <= 0 for d in v):
            raise ValueError("distances must be a non-empty list of positive values")
        return v


class MonopolePlane2DConfig(BaseModel):
    """Planar aperture: monopole interfering with a plane wave."""

    wavelength: float = Field(default=0.343, gt=0)
    nodes_per_axis: int = Field(default=51, ge=3)
    nodes_per_wavelength: int = Field(default=10, ge=2)
    monopole_height_wavelengths: float = Field(default=0.125, gt=0)
    plane_direction: tuple[float, float, float] = (0.38, -0.76, 0.52)
    plane_amplitude_scale: float = Field(default=1.0, ge=0)
    mic_counts: list[int] = Field(default=[100, 300])
    global_directions: int = Field(default=1000, ge=2)
    local_directions: int = Field(default=100, ge=2)
    methods: list[Method] = Field(
        default=["global-ridge", "local-independent", "conv-sparse", "conv-smooth"])
    conv: ConvSolverConfig = ConvSolverConfig()
    local: LocalSolverConfig = LocalSolverConfig()
    ridge: RidgeSolverConfig = RidgeSolverConfig()
    near_radius_wavelengths: float = Field(default=1.0, gt=0)
    vector_methods: list[Method] = Field(
        default=["global-ridge", "local-independent", "conv-smooth"])
    emit_vector_fields: bool = True
    density: float = Field(default=1.204, gt=0)
    sound_speed: float = Field(default=343.0, gt=0)
    seed: int = 0
    workers: int = Field(default=1, ge=1)

    @field_validator("mic_counts")
    @classmethod
    def _counts_ok(cls, v):
        if not v or any(c < 1 for c in v):
            raise ValueError("mic_counts must be a non-empty list of positive ints")
        return v


class SynthesizeConfig(BaseModel):
    """Synthetic stand-in for a measured room dataset."""

    nodes_per_axis: int = Field(default=35, ge=4)
    spacing: float = Field(default=0.05, gt=0)
    frequencies: list[float] = Field(
        default=[500.0, 800.0, 1100.0, 1400.0, 1700.0, 2000.0])
    n_waves: int = Field(default=64, ge=1)
    seed: int = 7
    sound_speed: float = Field(default=343.0, gt=0)

    @field_validator("frequencies")
    @classmethod
    def _freqs_ok(cls, v):
        if not v or any(f <= 0 for f in v):
            raise ValueError("frequencies must be a non-empty list of positive values")
        if sorted(set(v)) != sorted(v):
            raise ValueError("frequencies must be distinct")
        return v


class Dataset2DConfig(BaseModel):
    """Frequency/mic-count sweep over a gridded 2-D dataset."""

    dataset_path: Optional[str] = None
    synthesize: Optional[SynthesizeConfig] = None
    frequencies: Optional[list[float]] = None  # default: every dataset frequency
    mic_counts: list[int] = Field(default=[80, 160, 320])
    n_seeds: int = Field(default=12, ge=1)
    min_distance: Optional[float] = 0.07
    methods: list[Method] = Field(
        default=["global-ridge", "local-independent", "conv-sparse", "conv-smooth"])
    conv: ConvSolverConfig = ConvSolverConfig()
    local: LocalSolverConfig = LocalSolverConfig()
    ridge: RidgeSolverConfig = RidgeSolverConfig()
    global_directions: int = Field(default=1000, ge=2)
    local_directions: int = Field(default=100, ge=2)
    sound_speed: float = Field(default=343.0, gt=0)
    seed: int = 0
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _source_ok(self):
        if (self.dataset_path is None) == (self.synthesize is None):
            raise ValueError("exactly one of dataset_path or synthesize is required")
        return self


def load_config(path, model: type[BaseModel]) -> BaseModel:
    """Parse a YAML file into a config model, validating everything."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParameterError(f"config file {path} must hold a mapping")
    return model.model_validate(raw)
