"""File formats for results: complex field grids, CSV tables, JSON summaries.

Complex fields use a small self-describing container (extension ``.cfld``):
an ASCII first line ``CFLD1 <json-header>`` followed by the raw values as
little-endian float64 pairs (real, imag) in C order.  The header carries the
array shape, grid spacing, wavelength and optional metadata; an optional
trailing ``components`` axis stores vector fields.
"""

from __future__ import annotations

import csv
import hashlib
import json

import numpy as np

from .errors import ParameterError

_MAGIC = b"CFLD1 "


def canonical_json(obj) -> str:
    """Deterministic JSON serialization (sorted keys, compact separators)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    """Stable short hash identifying a configuration."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def write_field(path, values: np.ndarray, spacing: float, wavelength: float,
                origin=(0.0, 0.0, 0.0), components: int | None = None,
                meta: dict | None = None) -> None:
    """Write a complex grid (or vector) field to a ``.cfld`` file."""
    arr = np.asarray(values, dtype=np.complex128)
    header = {
        "shape": list(arr.shape if components is None else arr.shape[:-1]),
        "spacing": spacing,
        "wavelength": wavelength,
        "origin": list(origin),
    }
    if components is not None:
        if arr.shape[-1] != components:
            raise ParameterError("trailing axis must hold the vector components")
        header["components"] = components
    if meta:
        header["meta"] = meta
    body = np.empty(arr.shape + (2,), dtype="<f8")
    body[..., 0] = arr.real
    body[..., 1] = arr.imag
    with open(path, "wb") as fh:
        fh.write(_MAGIC + canonical_json(header).encode() + b"\n")
        fh.write(body.tobytes(order="C"))


def read_field(path) -> tuple[np.ndarray, dict]:
    """Read a ``.cfld`` file back into a complex array and its header."""
    with open(path, "rb") as fh:
        line = fh.readline()
        if not line.startswith(_MAGIC):
            raise ParameterError(f"{path} is not a complex-field file")
        header = json.loads(line[len(_MAGIC):].decode())
        raw = np.frombuffer(fh.read(), dtype="<f8")
    shape = tuple(header["shape"])
    if "components" in header:
        shape = shape + (header["components"],)
    expected = 2 * int(np.prod(shape))
    if raw.size != expected:
        raise ParameterError(f"{path}: expected {expected} values, found {raw.size}")
    pairs = raw.reshape(shape + (2,))
    return (pairs[..., 0] + 1j * pairs[..., 1]).astype(np.complex128), header


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, rows: list[dict], columns: list[str]) -> None:
    """Write dict rows with deterministic float formatting (shortest repr)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(canonical_json(obj))
        fh.write("\n")
