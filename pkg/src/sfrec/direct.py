"""Direct linear inverse solvers: least squares, ridge with leave-one-out
cross-validation, and the complex lasso, plus their per-subdomain application.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._cd import lasso_cd, lasso_loocv, local_lasso_batch
from .errors import ParameterError
from .grids import PlaneWaveDictionary
from .partition import (PartitionedField, PartitionScheme, crop, interior_indices,
                        overlap_average)
from .simulate import ObservationSet, SoundField

#: Relative log-grid of candidate regularization weights (20 points).
DEFAULT_BETA_RANGE = (1e-8, 1e-1)
DEFAULT_BETA_POINTS = 20


@dataclass(frozen=True)
class LeastSquares:
    """No regularization; minimum-norm solution of the observed system."""


@dataclass(frozen=True)
class Ridge:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ParameterError("ridge weight must be positive")


@dataclass(frozen=True)
class RidgeLOOCV:
    """Ridge with the weight chosen by closed-form leave-one-out errors.

    ``grid`` fixes absolute candidate weights; without it a log grid of
    ``points`` values spanning ``[lo, hi]`` relative to the data scale is
    generated per problem.
    """

    grid: tuple[float, ...] | None = None
    lo: float = DEFAULT_BETA_RANGE[0]
    hi: float = DEFAULT_BETA_RANGE[1]
    points: int = DEFAULT_BETA_POINTS


@dataclass(frozen=True)
class Lasso:
    beta: float

    def __post_init__(self):
        if not self.beta >= 0:
            raise ParameterError("lasso weight must be non-negative")


@dataclass(frozen=True)
class LassoLOOCV:
    """Lasso with the weight chosen by explicit leave-one-out refits."""

    grid: tuple[float, ...] | None = None
    lo: float = DEFAULT_BETA_RANGE[0]
    hi: float = DEFAULT_BETA_RANGE[1]
    points: int = DEFAULT_BETA_POINTS


@dataclass(frozen=True, eq=False)
class LinearInverseProblem:
    """Masked linear model ``dictionary_obs @ x ~ observations``."""

    dictionary_obs: np.ndarray
    observations: np.ndarray
    regularizer: object = field(default_factory=LeastSquares)

    def __post_init__(self):
        A = np.asarray(self.dictionary_obs, dtype=np.complex128)
        p = np.asarray(self.observations, dtype=np.complex128).reshape(-1)
        if A.ndim != 2 or A.shape[0] != p.size:
            raise ParameterError(
                f"dictionary rows {A.shape} must match {p.size} observations")
        if A.shape[0] < 1 or A.shape[1] < 1:
            raise ParameterError("empty inverse problem")
        object.__setattr__(self, "dictionary_obs", A)
        object.__setattr__(self, "observations", p)


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    values: np.ndarray
    chosen_beta: float | None
    fit_residual: float
    converged: bool = True


def relative_beta_grid(dictionary_obs, observations,
                       lo: float = DEFAULT_BETA_RANGE[0],
                       hi: float = DEFAULT_BETA_RANGE[1],
                       num: int = DEFAULT_BETA_POINTS) -> np.ndarray:
    """Log-spaced candidate weights scaled to ``max |A^H p|``."""
    scale = float(np.max(np.abs(np.conj(dictionary_obs).T @ observations)))
    if scale == 0.0:
        scale = 1.0
    return scale * np.logspace(np.log10(lo), np.log10(hi), num)


def _validated_grid(grid) -> np.ndarray:
    betas = np.asarray(grid, dtype=float)
    if betas.size == 0:
        raise ParameterError("empty candidate grid")
    if np.any(betas <= 0) or np.any(np.diff(np.sort(betas)) <= 0):
        raise ParameterError("candidate grid must be positive with distinct entries")
    return np.sort(betas)


def _residual(A, p, x) -> float:
    return float(np.linalg.norm(A @ x - p))


def solve_least_squares(problem: LinearInverseProblem) -> CoefficientVector:
    """Minimum-norm least squares via SVD with relative rank cutoff 1e-10."""
    if not isinstance(problem.regularizer, LeastSquares):
        raise ParameterError("problem is not configured for least squares")
    A, p = problem.dictionary_obs, problem.observations
    x, *_ = np.linalg.lstsq(A, p, rcond=1e-10)
    return CoefficientVector(values=x, chosen_beta=None, fit_residual=_residual(A, p, x))


def _ridge_path(A, p, betas):
    """Solutions, fitted values and leverages of the ridge path via one SVD."""
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    Uhp = U.conj().T @ p
    solutions = []
    loo_errors = np.empty(betas.size)
    for j, beta in enumerate(betas):
        gain = s / (s * s + beta)
        x = Vh.conj().T @ (gain * Uhp)
        fitted = U @ (s * gain * Uhp)
        leverage = (np.abs(U) ** 2) @ (s * s / (s * s + beta))
        residual = (p - fitted) / (1.0 - leverage)
        loo_errors[j] = np.sum(np.abs(residual) ** 2)
        solutions.append(x)
    return solutions, loo_errors


def solve_ridge(problem: LinearInverseProblem) -> CoefficientVector:
    if not isinstance(problem.regularizer, Ridge):
        raise ParameterError("problem is not configured for ridge")
    A, p = problem.dictionary_obs, problem.observations
    beta = problem.regularizer.beta
    solutions, _ = _ridge_path(A, p, np.array([beta]))
    x = solutions[0]
    return CoefficientVector(values=x, chosen_beta=beta, fit_residual=_residual(A, p, x))


def solve_ridge_loocv(problem: LinearInverseProblem) -> CoefficientVector:
    """Ridge with the weight minimizing the closed-form leave-one-out error.

    The per-observation error uses the leverage identity, so no refits are
    needed; ties resolve to the smallest candidate weight.
    """
    if not isinstance(problem.regularizer, RidgeLOOCV):
        raise ParameterError("problem is not configured for ridge LOOCV")
    A, p = problem.dictionary_obs, problem.observations
    reg = problem.regularizer
    betas = (_validated_grid(reg.grid) if reg.grid is not None
             else relative_beta_grid(A, p, lo=reg.lo, hi=reg.hi, num=reg.points))
    solutions, loo = _ridge_path(A, p, betas)
    best = int(np.argmin(loo))
    x = solutions[best]
    return CoefficientVector(values=x, chosen_beta=float(betas[best]),
                             fit_residual=_residual(A, p, x))


def solve_lasso(problem: LinearInverseProblem, max_sweeps: int = 10_000,
                tol: float = 1e-10) -> CoefficientVector:
    """Complex lasso by coordinate descent with modulus soft-thresholding.

    Convergence is declared when the largest coefficient move in a sweep
    falls below ``tol``; running out of sweeps flags the returned vector as
    non-converged but still returns it.
    """
    A, p = problem.dictionary_obs, problem.observations
    reg = problem.regularizer
    if isinstance(reg, Lasso):
        x, converged = lasso_cd(A, p, reg.beta, max_sweeps=max_sweeps, tol=tol)
        return CoefficientVector(values=x, chosen_beta=reg.beta,
                                 fit_residual=_residual(A, p, x), converged=converged)
    if isinstance(reg, LassoLOOCV):
        betas = (_validated_grid(reg.grid) if reg.grid is not None
                 else relative_beta_grid(A, p, lo=reg.lo, hi=reg.hi, num=reg.points))
        x, chosen, _, converged = lasso_loocv(A, p, betas)
        return CoefficientVector(values=x, chosen_beta=chosen,
                                 fit_residual=_residual(A, p, x),
                                 converged=converged)
    raise ParameterError("problem is not configured for the lasso")


def solve(problem: LinearInverseProblem) -> CoefficientVector:
    """Dispatch on the problem's regularizer."""
    reg = problem.regularizer
    if isinstance(reg, LeastSquares) or reg is None:
        return solve_least_squares(problem)
    if isinstance(reg, Ridge):
        return solve_ridge(problem)
    if isinstance(reg, RidgeLOOCV):
        return solve_ridge_loocv(problem)
    return solve_lasso(problem)


def reconstruct_global(dictionary: PlaneWaveDictionary,
                       coefficients: CoefficientVector | np.ndarray) -> SoundField:
    """Expand coefficients over the full grid: ``p = H x``."""
    x = getattr(coefficients, "values", coefficients)
    x = np.asarray(x, dtype=np.complex128).reshape(-1)
    if x.size != dictionary.n_atoms:
        raise ParameterError("coefficient length must match dictionary atoms")
    return SoundField(grid=dictionary.grid, pressure=dictionary.atoms @ x)


@dataclass(frozen=True, eq=False)
class LocalReconstruction:
    """Per-subdomain solve output: patches, coefficient maps and the field."""

    patches: PartitionedField
    maps: np.ndarray
    field: SoundField
    padded_estimate: np.ndarray
    chosen_betas: np.ndarray
    observation_counts: np.ndarray


def solve_local_independent(observations: ObservationSet, scheme: PartitionScheme,
                            local_dictionary: PlaneWaveDictionary,
                            regularizer, loocv_max_folds: int = 0
                            ) -> LocalReconstruction:
    """Fit each overlapping subdomain separately, then overlap-average.

    Observations are placed on the padded domain; each subdomain's sparse
    coefficients are fitted from the observations it contains (zero
    observations give zero coefficients) and the reconstructed patches are
    averaged per node and cropped back to the grid.  ``loocv_max_folds``
    bounds the leave-one-out refits per subdomain for cross-validated
    regularizers (0 = one refit per observation).
    """
    if tuple(local_dictionary.grid.shape) != scheme.subdomain_shape:
        raise ParameterError("local dictionary does not match the subdomain shape")
    atoms = local_dictionary.atoms  # (N_s, M)
    m_atoms = atoms.shape[1]
    pad_shape = scheme.padded_shape
    n_sub = scheme.padded_size
    if scheme.stride != 1 or not scheme.circular:
        raise ParameterError("local solve expects a stride-1 circular scheme")
    if isinstance(regularizer, Lasso):
        betas, relative = np.array([regularizer.beta]), False
    elif isinstance(regularizer, LassoLOOCV):
        if regularizer.grid is not None:
            betas, relative = _validated_grid(regularizer.grid), False
        else:
            betas = np.logspace(np.log10(regularizer.lo),
                                np.log10(regularizer.hi), regularizer.points)
            relative = True
    else:
        raise ParameterError("subdomain solves support lasso regularizers only")

    # scatter observations into (subdomain, local offset) buckets
    obs_padded_flat = interior_indices(scheme)[observations.indices]
    obs_multi = np.unravel_index(obs_padded_flat, pad_shape)
    offsets = np.stack(np.meshgrid(*[np.arange(s) for s in scheme.subdomain_shape],
                                   indexing="ij"), axis=-1).reshape(-1, len(pad_shape))
    sub_ids = []
    local_rows = []
    obs_rows = []
    for row, off in enumerate(offsets):
        sub_multi = tuple((obs_multi[ax] - off[ax]) % pad_shape[ax]
                          for ax in range(len(pad_shape)))
        sub_ids.append(np.ravel_multi_index(sub_multi, pad_shape))
        local_rows.append(np.full(observations.count, row))
        obs_rows.append(np.arange(observations.count))
    sub_ids = np.concatenate(sub_ids)
    local_rows = np.concatenate(local_rows)
    obs_rows = np.concatenate(obs_rows)
    order = np.argsort(sub_ids, kind="stable")
    sub_ids, local_rows, obs_rows = sub_ids[order], local_rows[order], obs_rows[order]
    boundaries = np.searchsorted(sub_ids, np.arange(n_sub + 1)).astype(np.int64)

    maps, chosen = local_lasso_batch(atoms, local_rows,
                                     observations.values[obs_rows], boundaries,
                                     betas, relative, max_folds=loocv_max_folds)
    counts = np.diff(boundaries)

    patch_matrix = atoms @ maps
    partitioned = PartitionedField(scheme=scheme, domain_shape=pad_shape,
                                   patches=patch_matrix)
    padded_estimate = overlap_average(partitioned)
    field = SoundField(grid=scheme.grid, pressure=crop(padded_estimate, scheme).ravel())
    return LocalReconstruction(patches=partitioned, maps=maps, field=field,
                               padded_estimate=padded_estimate, chosen_betas=chosen,
                               observation_counts=counts)
