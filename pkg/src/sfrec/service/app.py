"""HTTP service wrapping the reconstruction library.

Long-running reconstructions and experiment sweeps run inside request
handlers; clients that need timeouts should configure them accordingly.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .._version import __version__
from ..config import SynthesizeConfig
from ..convadmm import ConvParams, make_conv_problem
from ..convadmm import solve as conv_solve
from ..dataset import from_payload, ingest_dataset, synthesize_classroom, to_payload
from ..direct import (Lasso, LassoLOOCV, LeastSquares, LinearInverseProblem,
                      Ridge, RidgeLOOCV, reconstruct_global, solve,
                      solve_local_independent)
from ..errors import IngestionError, SfrecError
from ..experiments import (_stats_rows, run_dataset_2d, run_monopole_1d,
                           run_monopole_plane_2d)
from ..grids import build_dictionary, fibonacci_hemisphere, make_grid, \
    semicircle_directions, subdomain_grid
from ..partition import wavelength_partition
from ..simulate import ObservationSet, SoundField
from . import models as m

app = FastAPI(title="sfrec", version=__version__,
              description="Sound field reconstruction service")


@app.exception_handler(SfrecError)
async def _domain_error(request: Request, exc: SfrecError):
    return JSONResponse(status_code=400,
                        content={"error": {"type": type(exc).__name__,
                                           "message": str(exc)}})


@app.get("/health", response_model=m.HealthResponse)
def health():
    return m.HealthResponse(status="ok", version=__version__)


def _grid(model: m.GridModel):
    return make_grid(model.shape, model.spacing, wavelength=model.wavelength,
                     origin=tuple(model.origin))


def _directions(model: m.DirectionsModel):
    if model.mode == "semicircle-1d":
        return semicircle_directions(model.count)
    return fibonacci_hemisphere(model.count)


def _observations(grid, model: m.ObservationsModel) -> ObservationSet:
    values = np.asarray(model.values.re) + 1j * np.asarray(model.values.im)
    return ObservationSet(grid=grid, indices=np.asarray(model.indices), values=values)


def _regularizer(model: m.RegularizerModel):
    grid = tuple(model.grid) if model.grid is not None else None
    if model.kind == "least-squares":
        return LeastSquares()
    if model.kind == "ridge":
        return Ridge(beta=model.beta)
    if model.kind == "ridge-loocv":
        return RidgeLOOCV(grid=grid, lo=model.grid_lo, hi=model.grid_hi,
                          points=model.grid_points)
    if model.kind == "lasso":
        return Lasso(beta=model.beta)
    return LassoLOOCV(grid=grid, lo=model.grid_lo, hi=model.grid_hi,
                      points=model.grid_points)


def _field_model(field: SoundField) -> m.FieldModel:
    return m.FieldModel(shape=list(field.grid.shape), spacing=field.grid.spacing,
                        wavelength=field.grid.wavelength,
                        origin=list(field.grid.origin),
                        values=m.ComplexArray(re=field.pressure.real.tolist(),
                                              im=field.pressure.imag.tolist()))


@app.post("/reconstruct/global", response_model=m.ReconstructResponse)
def reconstruct_global_endpoint(body: m.GlobalReconstructRequest):
    grid = _grid(body.grid)
    dictionary = build_dictionary(grid, _directions(body.directions))
    obs = _observations(grid, body.observations)
    problem = LinearInverseProblem(dictionary_obs=dictionary.atoms[obs.indices],
                                   observations=obs.values,
                                   regularizer=_regularizer(body.regularizer))
    coef = solve(problem)
    return m.ReconstructResponse(field=_field_model(reconstruct_global(dictionary, coef)),
                                 chosen_beta=coef.chosen_beta)


@app.post("/reconstruct/local", response_model=m.ReconstructResponse)
def reconstruct_local_endpoint(body: m.LocalReconstructRequest):
    grid = _grid(body.grid)
    obs = _observations(grid, body.observations)
    scheme = wavelength_partition(grid)
    local_dict = build_dictionary(subdomain_grid(grid, scheme.subdomain_shape),
                                  _directions(body.directions))
    if body.local.regularizer == "lasso":
        reg = Lasso(beta=body.local.beta)
    else:
        reg = LassoLOOCV(lo=body.local.grid_lo, hi=body.local.grid_hi,
                         points=body.local.grid_points)
    result = solve_local_independent(obs, scheme, local_dict, reg)
    return m.ReconstructResponse(field=_field_model(result.field))


@app.post("/reconstruct/conv", response_model=m.ReconstructResponse)
def reconstruct_conv_endpoint(body: m.ConvReconstructRequest):
    grid = _grid(body.grid)
    obs = _observations(grid, body.observations)
    scheme = wavelength_partition(grid)
    params = ConvParams(sparsity=body.solver.sparsity,
                        smoothness=body.solver.smoothness, rho=body.solver.rho,
                        max_iter=body.solver.max_iter,
                        dictionary_mode=body.solver.dictionary_mode)
    problem = make_conv_problem(obs, scheme, _directions(body.directions), params)
    result = conv_solve(problem)
    return m.ReconstructResponse(field=_field_model(result.field),
                                 diagnostics=_stats_rows(result.stats))


@app.post("/experiments/monopole-1d", response_model=m.Monopole1DResponse)
def monopole_1d_endpoint(config: m.Monopole1DConfig):
    return run_monopole_1d(config)


@app.post("/experiments/monopole-plane-2d", response_model=m.MonopolePlane2DResponse)
def monopole_plane_2d_endpoint(config: m.MonopolePlane2DConfig):
    return run_monopole_plane_2d(config)


@app.post("/experiments/dataset-2d", response_model=m.Dataset2DResponse)
def dataset_2d_endpoint(body: m.Dataset2DRequest):
    if body.dataset is not None:
        dataset = from_payload(body.dataset.model_dump())
    elif body.config.synthesize is not None:
        s = body.config.synthesize
        dataset = synthesize_classroom(shape=(s.nodes_per_axis, s.nodes_per_axis),
                                       spacing=s.spacing, frequencies=s.frequencies,
                                       n_waves=s.n_waves, seed=s.seed,
                                       sound_speed=s.sound_speed)
    else:
        dataset = ingest_dataset(body.config.dataset_path)
    return run_dataset_2d(body.config, dataset)


@app.post("/datasets/synthesize", response_model=m.DatasetPayloadModel)
def synthesize_endpoint(body: m.SynthesizeRequest):
    cfg: SynthesizeConfig = body.config
    dataset = synthesize_classroom(shape=(cfg.nodes_per_axis, cfg.nodes_per_axis),
                                   spacing=cfg.spacing, frequencies=cfg.frequencies,
                                   n_waves=cfg.n_waves, seed=cfg.seed,
                                   sound_speed=cfg.sound_speed)
    return to_payload(dataset)


@app.post("/datasets/check", response_model=m.DatasetCheckResponse)
def dataset_check_endpoint(body: dict):
    try:
        dataset = from_payload(body)
    except (IngestionError, KeyError, TypeError, ValueError) as exc:
        return m.DatasetCheckResponse(valid=False, errors=[str(exc)])
    return m.DatasetCheckResponse(valid=True, errors=[],
                                  n_positions=dataset.n_positions,
                                  n_frequencies=int(dataset.frequencies.size),
                                  spacing=dataset.spacing)
