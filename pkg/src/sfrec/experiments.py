"""Experiment runners and result writers.

Each runner returns a JSON-safe payload (nested dicts/lists of Python
scalars); the matching ``write_*`` function turns a payload into result
files.  Keeping the payload JSON-safe lets the same writer consume results
produced in-process or received from the HTTP service, and the writers use
shortest-roundtrip float formatting so identical payloads give bit-identical
files.
"""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from ._version import __version__
from .config import (ConvSolverConfig, Dataset2DConfig, LocalSolverConfig,
                     Monopole1DConfig, MonopolePlane2DConfig, RidgeSolverConfig)
from .convadmm import ConvParams, make_conv_problem
from .convadmm import solve as conv_solve
from .dataset import DatasetFile, synthesize_classroom
from .direct import (Lasso, LassoLOOCV, LeastSquares, LinearInverseProblem,
                     RidgeLOOCV, reconstruct_global, solve,
                     solve_local_independent)
from .errors import ParameterError
from .fields import (Medium, VectorField, intensity, monopole_velocity,
                     plane_wave_velocity, velocity_from_conv_maps,
                     velocity_from_global, velocity_from_local_maps)
from .grids import (build_dictionary, fibonacci_hemisphere, make_grid,
                    semicircle_directions, subdomain_grid)
from .io import config_hash, write_csv, write_field, write_json
from .metrics import nmse, similarity
from .partition import wavelength_partition
from .simulate import (ObservationSet, SoundField, add_noise, monopole_field,
                       observe, plane_wave_field, regular_subsample,
                       sample_observations, superpose)

SPL_REFERENCE = 20e-6


def _complex_payload(values: np.ndarray) -> dict:
    arr = np.asarray(values, dtype=np.complex128).reshape(-1)
    return {"re": arr.real.tolist(), "im": arr.imag.tolist()}


def payload_complex(payload: dict) -> np.ndarray:
    return (np.asarray(payload["re"], dtype=float)
            + 1j * np.asarray(payload["im"], dtype=float))


def _stats_rows(stats) -> list[list[float]]:
    return [[s.iteration, s.objective, s.split_objective,
             s.primal_residual, s.dual_residual] for s in stats]


def _local_regularizer(cfg: LocalSolverConfig):
    if cfg.regularizer == "lasso":
        return Lasso(beta=cfg.beta)
    return LassoLOOCV(lo=cfg.grid_lo, hi=cfg.grid_hi, points=cfg.grid_points)


def _conv_params(cfg: ConvSolverConfig, smooth: bool) -> ConvParams:
    return ConvParams(sparsity=cfg.sparsity,
                      smoothness=cfg.smoothness if smooth else 0.0,
                      rho=cfg.rho, max_iter=cfg.max_iter,
                      dictionary_mode=cfg.dictionary_mode)


def _solve_method(method: str, grid, obs: ObservationSet, directions_global,
                  directions_local, scheme, conv_cfg: ConvSolverConfig,
                  local_cfg: LocalSolverConfig, ridge_cfg: RidgeSolverConfig):
    """Run one reconstruction method; returns (field, extras).

    ``extras`` carries what derived-field computations need: coefficient
    vectors for global models, coefficient maps plus scheme or problem for
    local and convolutional models, and solver diagnostics.
    """
    if method in ("global-ls", "global-ridge"):
        dictionary = build_dictionary(grid, directions_global)
        h_obs = dictionary.atoms[obs.indices]
        if method == "global-ls":
            reg = LeastSquares()
        else:
            reg = RidgeLOOCV(lo=ridge_cfg.grid_lo, hi=ridge_cfg.grid_hi,
                             points=ridge_cfg.grid_points)
        coef = solve(LinearInverseProblem(dictionary_obs=h_obs,
                                          observations=obs.values,
                                          regularizer=reg))
        field = reconstruct_global(dictionary, coef)
        return field, {"kind": "global", "dictionary": dictionary, "coefficients": coef}
    if method == "local-independent":
        local_dict = build_dictionary(subdomain_grid(grid, scheme.subdomain_shape),
                                      directions_local)
        result = solve_local_independent(obs, scheme, local_dict,
                                         _local_regularizer(local_cfg),
                                         loocv_max_folds=local_cfg.loocv_max_folds)
        return result.field, {"kind": "local", "dictionary": local_dict,
                              "maps": result.maps, "scheme": scheme}
    if method in ("conv-sparse", "conv-smooth"):
        params = _conv_params(conv_cfg, smooth=method == "conv-smooth")
        problem = make_conv_problem(obs, scheme, directions_local, params)
        result = conv_solve(problem)
        return result.field, {"kind": "conv", "problem": problem,
                              "maps": result.maps, "stats": result.stats}
    raise ParameterError(f"unknown method {method!r}")


def _pool_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    # spawn keeps worker processes clear of the parent's compute threads
    context = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=context) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# line array, monopole distance sweep
# ---------------------------------------------------------------------------

def _monopole_1d_point(cfg: Monopole1DConfig, distance: float) -> dict:
    lam = cfg.wavelength
    spacing = lam / cfg.nodes_per_wavelength
    grid = make_grid(cfg.n_nodes, spacing, wavelength=lam, origin=distance * lam)
    truth = monopole_field(grid, (0.0, 0.0, 0.0))
    obs = regular_subsample(truth, cfg.mic_stride)
    if cfg.noise_snr_db is not None:
        obs = add_noise(obs, cfg.noise_snr_db, seed=cfg.seed)
    directions = semicircle_directions(cfg.n_directions)
    scheme = wavelength_partition(grid)

    rows = []
    estimates = {}
    diagnostics = {}
    for method in cfg.methods:
        field, extras = _solve_method(method, grid, obs, directions, directions,
                                      scheme, cfg.conv, cfg.local, RidgeSolverConfig())
        rows.append({"distance_wavelengths": distance, "method": method,
                     "nmse_db": nmse(field, truth),
                     "similarity": similarity(field, truth),
                     "n_obs": obs.count})
        estimates[method] = field.pressure
        if extras.get("stats") is not None:
            diagnostics[method] = _stats_rows(extras["stats"])
    return {"distance": distance, "rows": rows, "grid_origin": grid.origin,
            "truth": truth.pressure, "observed_indices": obs.indices.tolist(),
            "observed_values": obs.values, "estimates": estimates,
            "diagnostics": diagnostics}


def run_monopole_1d(cfg: Monopole1DConfig) -> dict:
    """Sweep the source-to-array distance and reconstruct with each method."""
    points = _pool_map(partial(_monopole_1d_point, cfg), list(cfg.distances),
                       cfg.workers)
    rows = [row for point in points for row in point["rows"]]
    diagnostics = {}
    for idx, point in enumerate(points):
        for method, stats in point["diagnostics"].items():
            diagnostics[f"{method}@{idx}"] = stats

    trace = None
    if cfg.trace_distance is not None:
        idx = int(np.argmin(np.abs(np.asarray(cfg.distances) - cfg.trace_distance)))
        point = points[idx]
        spacing = cfg.wavelength / cfg.nodes_per_wavelength
        trace = {
            "distance_wavelengths": point["distance"],
            "spacing": spacing,
            "origin_x": point["grid_origin"][0],
            "true": _complex_payload(point["truth"]),
            "observed_indices": point["observed_indices"],
            "observed_values": _complex_payload(point["observed_values"]),
            "estimates": {m: _complex_payload(v)
                          for m, v in point["estimates"].items()},
        }

    config = cfg.model_dump(mode="json")
    return {"kind": "monopole-1d", "version": __version__, "config": config,
            "config_hash": config_hash(config), "wavelength": cfg.wavelength,
            "distances": list(cfg.distances), "rows": rows, "trace": trace,
            "diagnostics": diagnostics}


def write_monopole_1d(payload: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "nmse.csv", payload["rows"],
              ["distance_wavelengths", "method", "nmse_db", "similarity", "n_obs"])
    lam = payload["wavelength"]
    trace = payload.get("trace")
    if trace:
        spacing = trace["spacing"]
        meta = {"distance_wavelengths": trace["distance_wavelengths"]}
        write_field(out / "trace_true.cfld", payload_complex(trace["true"]),
                    spacing=spacing, wavelength=lam,
                    origin=(trace["origin_x"], 0.0, 0.0), meta=meta)
        for method, values in sorted(trace["estimates"].items()):
            write_field(out / f"trace_{method}.cfld", payload_complex(values),
                        spacing=spacing, wavelength=lam,
                        origin=(trace["origin_x"], 0.0, 0.0), meta=meta)
        obs_rows = [{"node_index": i,
                     "x": trace["origin_x"] + i * spacing,
                     "re": re, "im": im}
                    for i, re, im in zip(trace["observed_indices"],
                                         trace["observed_values"]["re"],
                                         trace["observed_values"]["im"])]
        write_csv(out / "observations.csv", obs_rows, ["node_index", "x", "re", "im"])
    for key, stats in sorted(payload["diagnostics"].items()):
        method, idx = key.split("@")
        rows = [{"iteration": int(r[0]), "objective": r[1], "split_objective": r[2],
                 "primal_residual": r[3], "dual_residual": r[4]} for r in stats]
        write_csv(out / f"diagnostics_{method}_{idx}.csv", rows,
                  ["iteration", "objective", "split_objective",
                   "primal_residual", "dual_residual"])
    write_json(out / "summary.json",
               {k: payload[k] for k in ("kind", "version", "config", "config_hash",
                                        "wavelength", "distances", "rows")})


# ---------------------------------------------------------------------------
# planar aperture, monopole + plane wave
# ---------------------------------------------------------------------------

def _unit(vector) -> np.ndarray:
    v = np.asarray(vector, dtype=float)
    return v / np.linalg.norm(v)


def _monopole_plane_truth(cfg: MonopolePlane2DConfig):
    lam = cfg.wavelength
    spacing = lam / cfg.nodes_per_wavelength
    n = cfg.nodes_per_axis
    half = 0.5 * (n - 1) * spacing
    grid = make_grid((n, n), spacing, wavelength=lam, origin=(-half, -half, 0.0))
    source = (0.0, 0.0, cfg.monopole_height_wavelengths * lam)
    direction = _unit(cfg.plane_direction)
    amplitude = cfg.plane_amplitude_scale / (4.0 * np.pi)
    truth = superpose(monopole_field(grid, source),
                      plane_wave_field(grid, direction, amplitude))
    return grid, truth, source, direction, amplitude


def _monopole_plane_case(cfg: MonopolePlane2DConfig, count: int) -> dict:
    grid, truth, source, direction, amplitude = _monopole_plane_truth(cfg)
    medium = Medium(density=cfg.density, sound_speed=cfg.sound_speed,
                    frequency=cfg.sound_speed / cfg.wavelength)
    obs = sample_observations(truth, count, seed=[cfg.seed, count])
    directions_global = fibonacci_hemisphere(cfg.global_directions)
    directions_local = fibonacci_hemisphere(cfg.local_directions)
    scheme = wavelength_partition(grid)

    coords = grid.coordinates()
    near = np.hypot(coords[:, 0], coords[:, 1]) < cfg.near_radius_wavelengths * cfg.wavelength

    emit_vectors = cfg.emit_vector_fields and count == max(cfg.mic_counts)
    rows = []
    estimates = {}
    diagnostics = {}
    vectors = {}
    if emit_vectors:
        u_true = monopole_velocity(grid, source, medium).vectors \
            + plane_wave_velocity(grid, direction, medium, amplitude).vectors
        u_true_field = VectorField(grid=grid, vectors=u_true)
        vectors["true"] = {
            "velocity": _complex_payload(u_true),
            "intensity": _complex_payload(intensity(truth, u_true_field).vectors),
        }
    for method in cfg.methods:
        field, extras = _solve_method(method, grid, obs, directions_global,
                                      directions_local, scheme, cfg.conv,
                                      cfg.local, cfg.ridge)
        rows.append({"count": count, "method": method,
                     "nmse_db": nmse(field, truth),
                     "nmse_near_db": nmse(field.pressure[near], truth.pressure[near]),
                     "similarity": similarity(field, truth),
                     "n_obs": obs.count})
        estimates[method] = _complex_payload(field.pressure)
        if extras.get("stats") is not None:
            diagnostics[method] = _stats_rows(extras["stats"])
        if emit_vectors and method in cfg.vector_methods:
            if extras["kind"] == "global":
                velocity = velocity_from_global(extras["dictionary"],
                                                extras["coefficients"], medium)
            elif extras["kind"] == "local":
                velocity = velocity_from_local_maps(extras["dictionary"],
                                                    extras["maps"],
                                                    extras["scheme"], medium)
            else:
                velocity = velocity_from_conv_maps(extras["problem"],
                                                   extras["maps"], medium)
            vectors[method] = {
                "velocity": _complex_payload(velocity.vectors),
                "intensity": _complex_payload(intensity(field, velocity).vectors),
            }
    return {"count": count, "rows": rows, "estimates": estimates,
            "observed_indices": obs.indices.tolist(),
            "diagnostics": diagnostics, "vectors": vectors}


def run_monopole_plane_2d(cfg: MonopolePlane2DConfig) -> dict:
    """Reconstruct the interference field for each microphone count."""
    grid, truth, *_ = _monopole_plane_truth(cfg)
    cases = _pool_map(partial(_monopole_plane_case, cfg), list(cfg.mic_counts),
                      cfg.workers)
    rows = [row for case in cases for row in case["rows"]]
    config = cfg.model_dump(mode="json")
    return {"kind": "monopole-plane-2d", "version": __version__, "config": config,
            "config_hash": config_hash(config), "wavelength": cfg.wavelength,
            "shape": list(grid.shape), "spacing": grid.spacing,
            "origin": list(grid.origin), "rows": rows,
            "truth": _complex_payload(truth.pressure),
            "cases": [{k: case[k] for k in ("count", "estimates",
                                            "observed_indices", "diagnostics",
                                            "vectors")}
                      for case in cases]}


def write_monopole_plane_2d(payload: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "nmse.csv", payload["rows"],
              ["count", "method", "nmse_db", "nmse_near_db", "similarity", "n_obs"])
    shape = tuple(payload["shape"])
    spacing = payload["spacing"]
    lam = payload["wavelength"]
    origin = tuple(payload["origin"])

    def _write(name, values, components=None, meta=None):
        write_field(out / name, values, spacing=spacing, wavelength=lam,
                    origin=origin, components=components, meta=meta)

    truth = payload_complex(payload["truth"]).reshape(shape)
    _write("field_true.cfld", truth)
    level_rows = _level_rows(truth, shape)
    write_csv(out / "levels_true.csv", level_rows, ["ix", "iy", "spl_db"])
    for case in payload["cases"]:
        count = case["count"]
        obs_rows = [{"node_index": i} for i in case["observed_indices"]]
        write_csv(out / f"observations_{count}.csv", obs_rows, ["node_index"])
        for method, values in sorted(case["estimates"].items()):
            field = payload_complex(values).reshape(shape)
            _write(f"field_{count}_{method}.cfld", field)
            write_csv(out / f"levels_{count}_{method}.csv",
                      _level_rows(field, shape), ["ix", "iy", "spl_db"])
        for method, stats in sorted(case["diagnostics"].items()):
            rows = [{"iteration": int(r[0]), "objective": r[1],
                     "split_objective": r[2], "primal_residual": r[3],
                     "dual_residual": r[4]} for r in stats]
            write_csv(out / f"diagnostics_{count}_{method}.csv", rows,
                      ["iteration", "objective", "split_objective",
                       "primal_residual", "dual_residual"])
        for method, pair in sorted(case["vectors"].items()):
            for kind in ("velocity", "intensity"):
                arr = payload_complex(pair[kind]).reshape(shape + (3,))
                _write(f"{kind}_{count}_{method}.cfld", arr, components=3)
    write_json(out / "summary.json",
               {k: payload[k] for k in ("kind", "version", "config", "config_hash",
                                        "wavelength", "shape", "spacing", "origin",
                                        "rows")})


def _level_rows(field: np.ndarray, shape) -> list[dict]:
    mag = np.maximum(np.abs(field), 1e-300)
    db = 20.0 * np.log10(mag / SPL_REFERENCE)
    rows = []
    for ix in range(shape[0]):
        for iy in range(shape[1]):
            rows.append({"ix": ix, "iy": iy, "spl_db": float(db[ix, iy])})
    return rows


# ---------------------------------------------------------------------------
# gridded 2-D dataset, frequency / microphone-count sweep
# ---------------------------------------------------------------------------

def mean_spacing_marker(dataset: DatasetFile, count: int, sound_speed: float) -> float:
    """Frequency at which half a wavelength equals the mean mic spacing.

    The mean spacing of ``count`` microphones over the aperture is estimated
    as ``sqrt(area / count)``.
    """
    extent_x = (dataset.shape[0] - 1) * dataset.spacing
    extent_y = (dataset.shape[1] - 1) * dataset.spacing
    mean_d = np.sqrt(extent_x * extent_y / count)
    return float(sound_speed / (2.0 * mean_d))


def _dataset_task(cfg: Dataset2DConfig, dataset: DatasetFile, task) -> dict:
    f_index, count, seed_index = task
    field = dataset.field(f_index, cfg.sound_speed)
    grid = field.grid
    # mic layout depends only on (count, seed_index), so it is shared across
    # the frequency sweep like a fixed physical array
    obs = sample_observations(field, count, seed=[cfg.seed, count, seed_index],
                              min_distance=cfg.min_distance)
    directions_global = fibonacci_hemisphere(cfg.global_directions)
    directions_local = fibonacci_hemisphere(cfg.local_directions)
    scheme = wavelength_partition(grid)
    rows = []
    for method in cfg.methods:
        estimate, _ = _solve_method(method, grid, obs, directions_global,
                                    directions_local, scheme, cfg.conv,
                                    cfg.local, cfg.ridge)
        rows.append({"frequency": float(dataset.frequencies[f_index]),
                     "count": count, "seed_index": seed_index, "method": method,
                     "nmse_db": nmse(estimate, field),
                     "similarity": similarity(estimate, field)})
    return {"rows": rows}


def run_dataset_2d(cfg: Dataset2DConfig, dataset: DatasetFile) -> dict:
    """Sweep frequency, microphone count and sampling seed over a dataset."""
    if cfg.frequencies is None:
        f_indices = list(range(dataset.frequencies.size))
    else:
        f_indices = sorted({dataset.nearest_frequency(f) for f in cfg.frequencies})
    tasks = [(fi, count, seed_index)
             for fi in f_indices
             for count in cfg.mic_counts
             for seed_index in range(cfg.n_seeds)]
    results = _pool_map(partial(_dataset_task, cfg, dataset), tasks, cfg.workers)
    rows = [row for res in results for row in res["rows"]]

    markers = {str(count): mean_spacing_marker(dataset, count, cfg.sound_speed)
               for count in cfg.mic_counts}
    aggregates = []
    for fi in f_indices:
        f = float(dataset.frequencies[fi])
        for count in cfg.mic_counts:
            for method in cfg.methods:
                vals = np.array([r["nmse_db"] for r in rows
                                 if r["frequency"] == f and r["count"] == count
                                 and r["method"] == method])
                std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
                aggregates.append({
                    "frequency": f, "count": count, "method": method,
                    "nmse_mean_db": float(np.mean(vals)), "nmse_std_db": std,
                    "n_seeds": int(vals.size),
                    "below_marker": bool(f < markers[str(count)])})

    config = cfg.model_dump(mode="json")
    return {"kind": "dataset-2d", "version": __version__, "config": config,
            "config_hash": config_hash(config),
            "frequencies": [float(dataset.frequencies[fi]) for fi in f_indices],
            "markers": markers, "rows": rows, "aggregates": aggregates}


def write_dataset_2d(payload: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "nmse.csv", payload["rows"],
              ["frequency", "count", "seed_index", "method", "nmse_db", "similarity"])
    write_csv(out / "aggregate.csv", payload["aggregates"],
              ["frequency", "count", "method", "nmse_mean_db", "nmse_std_db",
               "n_seeds", "below_marker"])
    write_json(out / "summary.json",
               {k: payload[k] for k in ("kind", "version", "config", "config_hash",
                                        "frequencies", "markers", "aggregates")})


def dataset_for_config(cfg: Dataset2DConfig) -> DatasetFile:
    """Resolve the dataset a sweep config refers to (file or synthetic)."""
    if cfg.synthesize is not None:
        s = cfg.synthesize
        return synthesize_classroom(shape=(s.nodes_per_axis, s.nodes_per_axis),
                                    spacing=s.spacing, frequencies=s.frequencies,
                                    n_waves=s.n_waves, seed=s.seed,
                                    sound_speed=s.sound_speed)
    from .dataset import ingest_dataset
    return ingest_dataset(cfg.dataset_path)


def write_payload(payload: dict, out_dir) -> None:
    """Dispatch a payload to its writer based on its ``kind``."""
    kind = payload.get("kind")
    if kind == "monopole-1d":
        write_monopole_1d(payload, out_dir)
    elif kind == "monopole-plane-2d":
        write_monopole_plane_2d(payload, out_dir)
    elif kind == "dataset-2d":
        write_dataset_2d(payload, out_dir)
    else:
        raise ParameterError(f"unknown payload kind {kind!r}")
