"""Reconstruction quality metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

#: Reported NMSE for an exact match, keeping reports finite.
NMSE_FLOOR_DB = -300.0

#: Reconstruction method identifiers used throughout results and reports.
METHODS = ("global-ls", "global-ridge", "local-independent", "conv-sparse", "conv-smooth")


def _values(field) -> np.ndarray:
    pressure = getattr(field, "pressure", field)
    return np.asarray(pressure, dtype=np.complex128).reshape(-1)


def nmse(estimate, truth) -> float:
    """Normalized mean square error in dB: ``20*log10(||e - t|| / ||t||)``."""
    e = _values(estimate)
    t = _values(truth)
    if e.shape != t.shape:
        raise ParameterError("estimate and truth must have equal size")
    t_norm = np.linalg.norm(t)
    if t_norm == 0.0:
        raise ParameterError("NMSE is undefined for a zero reference field")
    err = np.linalg.norm(e - t)
    if err == 0.0:
        return NMSE_FLOOR_DB
    return max(20.0 * np.log10(err / t_norm), NMSE_FLOOR_DB)


def similarity(estimate, truth) -> float:
    """Normalized squared inner product; 1 means indistinguishable shapes.

    Invariant to global complex scaling of either argument.
    """
    e = _values(estimate)
    t = _values(truth)
    if e.shape != t.shape:
        raise ParameterError("estimate and truth must have equal size")
    ee = np.real(np.vdot(e, e))
    tt = np.real(np.vdot(t, t))
    if ee == 0.0 or tt == 0.0:
        raise ParameterError("similarity is undefined for a zero field")
    return float(np.abs(np.vdot(e, t)) ** 2 / (ee * tt))


@dataclass(frozen=True)
class EvalReport:
    """Summary of one reconstruction run."""

    method: str
    nmse_db: float
    similarity: float
    n_obs: int

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if not -1e-12 <= self.similarity <= 1.0 + 1e-12:
            raise ParameterError(f"similarity {self.similarity} outside [0, 1]")


def evaluate(method: str, estimate, truth, n_obs: int) -> EvalReport:
    return EvalReport(method=method, nmse_db=nmse(estimate, truth),
                      similarity=similarity(estimate, truth), n_obs=n_obs)
