import json

import numpy as np
import pytest

from sfrec.config import (Dataset2DConfig, Monopole1DConfig,
                          MonopolePlane2DConfig, SynthesizeConfig, load_config)
from sfrec.dataset import synthesize_classroom
from sfrec.experiments import (dataset_for_config, mean_spacing_marker,
                               payload_complex, run_dataset_2d,
                               run_monopole_1d, run_monopole_plane_2d,
                               write_dataset_2d, write_monopole_1d,
                               write_monopole_plane_2d)
from sfrec.io import read_field

FAST_CONV = {"sparsity": 1e-8, "smoothness": 1e-3, "rho": 1e-2, "max_iter": 25}


def fast_1d(**overrides):
    base = dict(n_nodes=49, nodes_per_wavelength=8, mic_stride=4,
                n_directions=7, distances=[0.5, 1.0], trace_distance=0.5,
                methods=["global-ls", "local-independent", "conv-smooth"],
                conv=FAST_CONV)
    base.update(overrides)
    return Monopole1DConfig(**base)


def fast_2d(**overrides):
    base = dict(nodes_per_axis=15, nodes_per_wavelength=5, mic_counts=[40, 60],
                global_directions=60, local_directions=20,
                methods=["global-ridge", "conv-smooth"],
                vector_methods=["global-ridge", "conv-smooth"],
                conv=FAST_CONV)
    base.update(overrides)
    return MonopolePlane2DConfig(**base)


def test_monopole_1d_payload_shape():
    payload = run_monopole_1d(fast_1d())
    assert payload["kind"] == "monopole-1d"
    assert len(payload["rows"]) == 6
    assert payload["trace"]["distance_wavelengths"] == 0.5
    assert set(payload["trace"]["estimates"]) == {"global-ls",
                                                  "local-independent",
                                                  "conv-smooth"}
    assert payload["config_hash"]
    # diagnostics only for the iterative solver
    assert all(key.startswith("conv-smooth@") for key in payload["diagnostics"])


def test_monopole_1d_deterministic_payload():
    a = run_monopole_1d(fast_1d())
    b = run_monopole_1d(fast_1d())
    assert a == b


def test_monopole_1d_writer_outputs(tmp_path):
    payload = run_monopole_1d(fast_1d())
    write_monopole_1d(payload, tmp_path)
    trace, header = read_field(tmp_path / "trace_true.cfld")
    assert trace.size == 49
    assert header["origin"][0] == pytest.approx(0.5)
    rows = (tmp_path / "nmse.csv").read_text().strip().splitlines()
    assert rows[0] == "distance_wavelengths,method,nmse_db,similarity,n_obs"
    assert len(rows) == 7
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["n_nodes"] == 49


def test_monopole_1d_workers_match_serial():
    serial = run_monopole_1d(fast_1d(workers=1))
    parallel = run_monopole_1d(fast_1d(workers=2))
    a = {(r["distance_wavelengths"], r["method"]): r["nmse_db"]
         for r in serial["rows"]}
    b = {(r["distance_wavelengths"], r["method"]): r["nmse_db"]
         for r in parallel["rows"]}
    assert a == b


def test_monopole_plane_payload_and_writer(tmp_path):
    payload = run_monopole_plane_2d(fast_2d())
    assert payload["kind"] == "monopole-plane-2d"
    assert {row["count"] for row in payload["rows"]} == {40, 60}
    # vector fields only for the largest count
    by_count = {case["count"]: case for case in payload["cases"]}
    assert by_count[40]["vectors"] == {}
    assert set(by_count[60]["vectors"]) == {"true", "global-ridge", "conv-smooth"}
    write_monopole_plane_2d(payload, tmp_path)
    field, header = read_field(tmp_path / "field_60_conv-smooth.cfld")
    assert field.shape == (15, 15)
    vel, header = read_field(tmp_path / "velocity_60_true.cfld")
    assert vel.shape == (15, 15, 3)
    assert (tmp_path / "levels_60_global-ridge.csv").exists()
    assert (tmp_path / "nmse.csv").exists()


def test_near_field_metric_column():
    payload = run_monopole_plane_2d(fast_2d(mic_counts=[50]))
    row = payload["rows"][0]
    assert np.isfinite(row["nmse_near_db"])
    assert row["nmse_near_db"] != row["nmse_db"]


def test_marker_frequency_formula():
    ds = synthesize_classroom(shape=(35, 35), spacing=0.05,
                              frequencies=[500.0], n_waves=2, seed=0)
    marker = mean_spacing_marker(ds, 160, sound_speed=343.0)
    area = (34 * 0.05) ** 2
    expected = 343.0 / (2 * np.sqrt(area / 160))
    assert marker == pytest.approx(expected, rel=1e-12)


def sweep_config(**overrides):
    base = dict(
        synthesize=SynthesizeConfig(nodes_per_axis=11, spacing=0.08,
                                    frequencies=[500.0, 1000.0], n_waves=6,
                                    seed=2),
        mic_counts=[15], n_seeds=2, min_distance=None,
        methods=["global-ridge", "conv-smooth"], global_directions=50,
        local_directions=16, conv=FAST_CONV)
    base.update(overrides)
    return Dataset2DConfig(**base)


def test_dataset_sweep_rows_and_aggregates(tmp_path):
    cfg = sweep_config()
    dataset = dataset_for_config(cfg)
    payload = run_dataset_2d(cfg, dataset)
    assert len(payload["rows"]) == 2 * 2 * 2  # freq x seeds x methods
    assert len(payload["aggregates"]) == 2 * 2
    for agg in payload["aggregates"]:
        assert agg["n_seeds"] == 2
        assert isinstance(agg["below_marker"], bool)
    write_dataset_2d(payload, tmp_path)
    agg_rows = (tmp_path / "aggregate.csv").read_text().strip().splitlines()
    assert len(agg_rows) == 5
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "markers" in summary


def test_dataset_sweep_single_row_case():
    cfg = sweep_config(n_seeds=1, methods=["global-ridge"],
                       frequencies=[1000.0])
    dataset = dataset_for_config(cfg)
    payload = run_dataset_2d(cfg, dataset)
    assert len(payload["rows"]) == 1
    assert payload["aggregates"][0]["nmse_std_db"] == 0.0


def test_config_source_validation():
    with pytest.raises(ValueError):
        Dataset2DConfig()  # neither dataset_path nor synthesize
    with pytest.raises(ValueError):
        Dataset2DConfig(dataset_path="x.npz", synthesize=SynthesizeConfig())


def test_load_config_rejects_non_mapping(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("- 1\n- 2\n")
    from sfrec.errors import ParameterError
    with pytest.raises(ParameterError):
        load_config(path, Monopole1DConfig)


def test_payload_complex_roundtrip():
    z = np.array([1 + 2j, -0.5j, 3.0])
    from sfrec.experiments import _complex_payload
    assert np.array_equal(payload_complex(_complex_payload(z)), z)
