"""Command-line interface: a thin client of the reconstruction service.

Every experiment command validates its configuration locally, sends it to
the service (in-process unless ``--server`` points at a running instance)
and writes the returned payload to the output directory.  Failures emit one
machine-readable JSON error record on stderr; exit code 2 flags invalid
input, 1 a runtime failure.
"""

from __future__ import annotations

import json
import os
import sys
from contextlib import contextmanager

import click
from pydantic import ValidationError

from ._version import __version__
from .client import ServiceClient, ServiceError
from .config import (Dataset2DConfig, Monopole1DConfig, MonopolePlane2DConfig,
                     SynthesizeConfig, load_config)
from .dataset import from_payload, ingest_dataset, raw_payload, to_payload, \
    write_dataset
from .errors import SfrecError
from .experiments import (write_dataset_2d, write_monopole_1d,
                          write_monopole_plane_2d)

WORKERS_ENV = "SFREC_WORKERS"


def _emit_error(kind: str, exc: Exception) -> None:
    record = {"error": {"type": type(exc).__name__, "command": kind,
                        "message": str(exc)}}
    if isinstance(exc, ValidationError):
        record["error"]["details"] = exc.errors(include_url=False)
    elif isinstance(exc, ServiceError):
        record["error"]["details"] = exc.detail
    click.echo(json.dumps(record, default=str), err=True)


@contextmanager
def _failures_as_records(kind: str):
    try:
        yield
    except (ValidationError, click.ClickException) as exc:
        _emit_error(kind, exc)
        sys.exit(2)
    except (SfrecError, OSError) as exc:
        _emit_error(kind, exc)
        sys.exit(1)


def _common_options(fn):
    fn = click.option("--server", default=None, metavar="URL",
                      help="Base URL of a running service (default: in-process).")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the config seed.")(fn)
    fn = click.option("--workers", type=int, default=None,
                      help=f"Parallel sweep workers (env {WORKERS_ENV}).")(fn)
    fn = click.option("--out", "out_dir", required=True,
                      type=click.Path(file_okay=False),
                      help="Directory for result files.")(fn)
    fn = click.option("--config", "config_path", default=None,
                      type=click.Path(exists=True, dir_okay=False),
                      help="YAML configuration (defaults apply when omitted).")(fn)
    return fn


def _load(model, config_path, workers, seed):
    cfg = load_config(config_path, model) if config_path else model()
    updates = {}
    if workers is None and os.environ.get(WORKERS_ENV):
        workers = int(os.environ[WORKERS_ENV])
    if workers is not None:
        updates["workers"] = workers
    if seed is not None:
        updates["seed"] = seed
    if updates:
        cfg = cfg.model_copy(update=updates)
    return cfg


@click.group()
@click.version_option(__version__)
def main():
    """Sound field reconstruction experiments."""


@main.command("monopole-1d")
@_common_options
def monopole_1d(config_path, out_dir, workers, seed, server):
    """Distance sweep of a line array near a point source."""
    with _failures_as_records("monopole-1d"):
        cfg = _load(Monopole1DConfig, config_path, workers, seed)
        with ServiceClient(server) as client:
            payload = client.monopole_1d(cfg.model_dump(mode="json"))
        write_monopole_1d(payload, out_dir)
        click.echo(f"monopole-1d results written to {out_dir}")


@main.command("monopole-plane-2d")
@_common_options
def monopole_plane_2d(config_path, out_dir, workers, seed, server):
    """Planar aperture with a point source interfering with a plane wave."""
    with _failures_as_records("monopole-plane-2d"):
        cfg = _load(MonopolePlane2DConfig, config_path, workers, seed)
        with ServiceClient(server) as client:
            payload = client.monopole_plane_2d(cfg.model_dump(mode="json"))
        write_monopole_plane_2d(payload, out_dir)
        click.echo(f"monopole-plane-2d results written to {out_dir}")


@main.command("dataset-2d")
@_common_options
def dataset_2d(config_path, out_dir, workers, seed, server):
    """Frequency and microphone-count sweep over a gridded dataset."""
    with _failures_as_records("dataset-2d"):
        cfg = _load(Dataset2DConfig, config_path, workers, seed)
        dataset_payload = None
        if cfg.dataset_path is not None:
            dataset_payload = to_payload(ingest_dataset(cfg.dataset_path))
        with ServiceClient(server) as client:
            payload = client.dataset_2d(cfg.model_dump(mode="json"),
                                        dataset=dataset_payload)
        write_dataset_2d(payload, out_dir)
        click.echo(f"dataset-2d results written to {out_dir}")


@main.command("ingest-check")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--server", default=None, metavar="URL")
def ingest_check(dataset, server):
    """Validate a dataset archive and print a JSON report."""
    with _failures_as_records("ingest-check"):
        payload = raw_payload(dataset)
        with ServiceClient(server) as client:
            report = client.check_dataset(payload)
        click.echo(json.dumps(report, sort_keys=True))
        if not report.get("valid", False):
            sys.exit(1)


@main.command("synth-dataset")
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--server", default=None, metavar="URL")
def synth_dataset(config_path, out_path, server):
    """Generate the synthetic room-like dataset archive."""
    with _failures_as_records("synth-dataset"):
        cfg = (load_config(config_path, SynthesizeConfig) if config_path
               else SynthesizeConfig())
        with ServiceClient(server) as client:
            payload = client.synthesize_dataset(cfg.model_dump(mode="json"))
        write_dataset(out_path, from_payload(payload))
        click.echo(f"dataset written to {out_path}")


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the reconstruction service."""
    import uvicorn

    uvicorn.run("sfrec.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
