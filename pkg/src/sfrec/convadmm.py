"""Masked convolutional sparse coding with smooth coefficient maps.

The model writes a padded field as ``sum_m h_m (*) x_m`` where ``(*)`` is a
circular convolution, ``h_m`` are plane-wave generators and ``x_m`` complex
coefficient maps.  The solver minimizes

    0.5 * || mask (sum_m h_m (*) x_m) - p_obs ||_2^2
    + 0.5 * smoothness * sum_{m,l} || diff_l x_m ||_2^2
    + sparsity * sum_m || x_m ||_1

by ADMM with mask decoupling: an auxiliary field variable absorbs the masked
data term and an auxiliary copy of the maps absorbs the l1 term.  The map
update decouples per spatial-frequency bin into a (diagonal + rank-one)
system solved in closed form with the Sherman-Morrison identity, the field
update is an elementwise blend of data and consensus, and the map copy is
updated by complex soft-thresholding.

Deriving the map update from the augmented Lagrangian gives, per bin ``v``
with dictionary transfer vector ``d(v)`` and difference-energy ``g(v)``,

    (smoothness*g(v)*I + rho*conj(d)d^T + rho*I) xt(v)
        = rho*conj(d)*(y0t - u0t)(v) + rho*(y1t - u1t)(v),

i.e. both right-hand terms carry the penalty weight and the identity block
of the constraint contributes ``rho*I`` on the left, which keeps every bin
strictly positive definite.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError
from .grids import DirectionSet, Grid, build_dictionary
from .partition import PartitionScheme, crop, interior_indices, padded_grid
from .simulate import ObservationSet, SoundField

#: Tikhonov floor for degenerate per-bin systems (only reachable when both
#: penalty weights collapse to zero).
_BIN_EPS = 1e-12

_DIVERGENCE_FACTOR = 10.0
_DIVERGENCE_STREAK = 50


class DivergenceMonitor:
    """Flags residuals that stay far above their initial values.

    The first reported pair sets the baseline; a streak of ``streak``
    consecutive iterations with either residual above ``factor`` times its
    baseline counts as divergence.
    """

    def __init__(self, factor: float = _DIVERGENCE_FACTOR,
                 streak: int = _DIVERGENCE_STREAK):
        self.factor = factor
        self.streak = streak
        self._baseline = None
        self._run = 0

    def update(self, primal: float, dual: float) -> bool:
        if self._baseline is None:
            self._baseline = (max(primal, 1e-300), max(dual, 1e-300))
        if primal > self.factor * self._baseline[0] or \
                dual > self.factor * self._baseline[1]:
            self._run += 1
        else:
            self._run = 0
        return self._run >= self.streak


def soft_threshold(values: np.ndarray, amount: float) -> np.ndarray:
    """Complex shrinkage: modulus reduced by ``amount``, phase preserved."""
    z = np.asarray(values, dtype=np.complex128)
    mag = np.abs(z)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(mag > amount, 1.0 - amount / np.where(mag > 0, mag, 1.0), 0.0)
    return z * scale


class GradientOperator:
    """Circular first differences along each axis of a map shape.

    ``apply`` returns ``x[n] - x[n+1]`` (wrapping) along one axis; the
    frequency response per axis is the transform of the difference stencil,
    ``1 - exp(-2j*pi*v/N)``, whose squared magnitudes accumulate into the
    energy spectrum used by the map update.
    """

    def __init__(self, shape: tuple[int, ...]):
        self.shape = tuple(int(n) for n in shape)

    def apply(self, arr: np.ndarray, axis: int) -> np.ndarray:
        return arr - np.roll(arr, -1, axis=axis)

    def transfer(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        stencil = np.zeros(n)
        stencil[0] = 1.0
        if n > 1:
            stencil[1] = -1.0
        return np.fft.fft(stencil)

    def energy_spectrum(self) -> np.ndarray:
        """``sum_l |transfer_l|^2`` broadcast over the full bin lattice."""
        total = np.zeros(self.shape)
        for axis in range(len(self.shape)):
            t = np.abs(self.transfer(axis)) ** 2
            expand = [None] * len(self.shape)
            expand[axis] = slice(None)
            total = total + t[tuple(expand)]
        return total

    def penalty(self, maps: np.ndarray) -> float:
        """``sum_{m,l} ||diff_l map_m||^2`` for a stack of maps."""
        ndim = len(self.shape)
        total = 0.0
        for axis in range(ndim):
            d = self.apply(maps, axis=maps.ndim - ndim + axis)
            total += float(np.sum(np.abs(d) ** 2))
        return total


@dataclass(frozen=True)
class ConvParams:
    """Penalty weights and iteration controls for the convolutional solver."""

    sparsity: float
    smoothness: float = 0.0
    rho: float = 1e-5
    max_iter: int = 500
    abs_tol: float = 0.0
    rel_tol: float = 0.0
    dictionary_mode: str = "global"  # or "filters" (zero-padded local atoms)

    def __post_init__(self):
        if self.sparsity < 0 or self.smoothness < 0:
            raise ParameterError("penalty weights must be non-negative")
        if not self.rho > 0:
            raise ParameterError("the ADMM penalty must be positive")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")
        if self.dictionary_mode not in ("global", "filters"):
            raise ParameterError(f"unknown dictionary mode {self.dictionary_mode!r}")


@dataclass(frozen=True, eq=False)
class ConvProblem:
    """Frozen problem data for one convolutional reconstruction."""

    scheme: PartitionScheme
    directions: DirectionSet
    params: ConvParams
    padded: Grid
    mask: np.ndarray        # bool over the padded shape
    obs: np.ndarray         # complex over the padded shape, zeros off-mask
    transfer: np.ndarray    # (M, *padded shape) dictionary spectra
    filters: np.ndarray     # (M, *subdomain shape) local plane-wave atoms

    @property
    def n_atoms(self) -> int:
        return self.transfer.shape[0]

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(1, 1 + len(self.padded.shape)))


def make_conv_problem(observations: ObservationSet, scheme: PartitionScheme,
                      directions: DirectionSet, params: ConvParams) -> ConvProblem:
    """Assemble the padded-domain problem from grid-level observations.

    In the default ``"global"`` dictionary mode each generator is the plane
    wave evaluated over the whole padded domain; ``"filters"`` truncates the
    generators to the subdomain-sized corner block (zero-padded filters).
    """
    if observations.grid != scheme.grid:
        raise ParameterError("observations and scheme refer to different grids")
    pgrid = padded_grid(scheme)
    pad_shape = pgrid.shape
    atoms = build_dictionary(pgrid, directions).atoms  # (N', M)
    generators = np.ascontiguousarray(atoms.T).reshape(directions.count, *pad_shape)
    filters = generators[(slice(None),) + tuple(slice(0, s)
                                                for s in scheme.subdomain_shape)].copy()
    if params.dictionary_mode == "filters":
        truncated = np.zeros_like(generators)
        truncated[(slice(None),) + tuple(slice(0, s)
                                         for s in scheme.subdomain_shape)] = filters
        generators = truncated
    spatial = tuple(range(1, 1 + len(pad_shape)))
    transfer = np.fft.fftn(generators, axes=spatial)

    mask = np.zeros(pad_shape, dtype=bool)
    obs = np.zeros(pad_shape, dtype=np.complex128)
    flat = interior_indices(scheme)[observations.indices]
    mask.reshape(-1)[flat] = True
    obs.reshape(-1)[flat] = observations.values
    return ConvProblem(scheme=scheme, directions=directions, params=params,
                       padded=pgrid, mask=mask, obs=obs, transfer=transfer,
                       filters=filters)


@dataclass(eq=False)
class AdmmState:
    """Mutable iterate: maps ``x``, split variables ``y``, scaled duals ``u``."""

    x: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    iteration: int = 0


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    objective: float
    split_objective: float
    primal_residual: float
    dual_residual: float


def write_diagnostics_csv(path, stats: list[IterationStats]) -> None:
    """Per-iteration solver record as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "split_objective",
                         "primal_residual", "dual_residual"])
        for s in stats:
            writer.writerow([s.iteration, repr(s.objective), repr(s.split_objective),
                             repr(s.primal_residual), repr(s.dual_residual)])


@dataclass(frozen=True, eq=False)
class ConvResult:
    maps: np.ndarray
    field: SoundField
    padded_estimate: np.ndarray
    consensus: np.ndarray
    stats: list[IterationStats]
    state: AdmmState
    n_iterations: int
    stopped_by_tolerance: bool


def solve_diag_rank1(d: np.ndarray, g: float | np.ndarray, smoothness: float,
                     rho: float, b0, b1: np.ndarray) -> np.ndarray:
    """Closed-form solve of one (or many) per-bin map-update systems.

    Solves ``(smoothness*g*I + rho*conj(d)d^T + rho*I) x = rho*(conj(d)*b0 + b1)``
    by the Sherman-Morrison identity.  ``d``/``b1`` have the atom axis first
    and may carry trailing bin axes; ``g``/``b0`` are scalars or bin arrays.
    """
    d = np.asarray(d, dtype=np.complex128)
    b1 = np.asarray(b1, dtype=np.complex128)
    rhs = rho * (np.conj(d) * np.asarray(b0) + b1)
    sigma = smoothness * np.asarray(g, dtype=float) + rho
    sigma = np.where(sigma > 0, sigma, _BIN_EPS)
    dd = np.sum(np.abs(d) ** 2, axis=0)
    correction = rho * np.sum(d * rhs, axis=0) / (sigma * (sigma + rho * dd))
    return rhs / sigma - np.conj(d) * correction


def apply_dictionary(problem: ConvProblem, maps_freq: np.ndarray) -> np.ndarray:
    """Spatial field ``sum_m h_m (*) x_m`` from map spectra."""
    return np.fft.ifftn(np.sum(problem.transfer * maps_freq, axis=0))


def reconstruct(problem: ConvProblem, maps: np.ndarray) -> SoundField:
    """Crop the modelled padded field back to the reconstruction grid."""
    maps_freq = np.fft.fftn(maps, axes=problem.spatial_axes)
    padded = apply_dictionary(problem, maps_freq)
    return SoundField(grid=problem.scheme.grid,
                      pressure=crop(padded, problem.scheme).ravel())


def objective(problem: ConvProblem, maps: np.ndarray,
              estimate: np.ndarray | None = None) -> float:
    """Data misfit plus smoothness and sparsity penalties at the given maps."""
    if estimate is None:
        maps_freq = np.fft.fftn(maps, axes=problem.spatial_axes)
        estimate = apply_dictionary(problem, maps_freq)
    misfit = 0.5 * np.sum(np.abs(estimate[problem.mask] - problem.obs[problem.mask]) ** 2)
    grad = GradientOperator(problem.padded.shape)
    smooth = 0.5 * problem.params.smoothness * grad.penalty(maps)
    l1 = problem.params.sparsity * np.sum(np.abs(maps))
    return float(misfit + smooth + l1)


def x_step(problem: ConvProblem, state: AdmmState,
           energy: np.ndarray | None = None) -> np.ndarray:
    """Map update: per-bin Sherman-Morrison solve; returns map spectra."""
    params = problem.params
    if energy is None:
        energy = GradientOperator(problem.padded.shape).energy_spectrum()
    b0 = np.fft.fftn(state.y0 - state.u0)
    b1 = np.fft.fftn(state.y1 - state.u1, axes=problem.spatial_axes)
    return solve_diag_rank1(problem.transfer, energy, params.smoothness,
                            params.rho, b0, b1)


def y0_step(problem: ConvProblem, modelled: np.ndarray, u0: np.ndarray) -> np.ndarray:
    """Field update: blend of observed data and the modelled consensus."""
    rho = problem.params.rho
    m = problem.mask.astype(float)
    return (m * problem.obs + rho * (modelled + u0)) / (m + rho)


def y1_step(problem: ConvProblem, x: np.ndarray, u1: np.ndarray) -> np.ndarray:
    """Map-copy update by soft-thresholding."""
    return soft_threshold(x + u1, problem.params.sparsity / problem.params.rho)


def u_step(state: AdmmState, modelled: np.ndarray) -> None:
    """Scaled dual ascent; exact bookkeeping on the two constraint blocks."""
    state.u0 = state.u0 + (modelled - state.y0)
    state.u1 = state.u1 + (state.x - state.y1)


def solve(problem: ConvProblem, callback=None) -> ConvResult:
    """Run the ADMM iteration from zero initialization.

    Stops at ``max_iter`` or, when tolerances are set, at the standard
    primal/dual residual criterion.  Raises :class:`DivergenceError` when
    either residual stays above ten times its initial value for fifty
    consecutive iterations.
    """
    params = problem.params
    pad_shape = problem.padded.shape
    m_atoms = problem.n_atoms
    spatial = problem.spatial_axes
    n_bins = float(np.prod(pad_shape))
    grad = GradientOperator(pad_shape)
    energy = grad.energy_spectrum()

    state = AdmmState(
        x=np.zeros((m_atoms, *pad_shape), dtype=np.complex128),
        y0=np.zeros(pad_shape, dtype=np.complex128),
        y1=np.zeros((m_atoms, *pad_shape), dtype=np.complex128),
        u0=np.zeros(pad_shape, dtype=np.complex128),
        u1=np.zeros((m_atoms, *pad_shape), dtype=np.complex128),
    )
    stats: list[IterationStats] = []
    mask_f = problem.mask.astype(float)
    monitor = DivergenceMonitor()
    stopped = False
    modelled = np.zeros(pad_shape, dtype=np.complex128)

    for k in range(1, params.max_iter + 1):
        xf = x_step(problem, state, energy=energy)
        state.x = np.fft.ifftn(xf, axes=spatial)
        modelled = np.fft.ifftn(np.sum(problem.transfer * xf, axis=0))

        y0_new = y0_step(problem, modelled, state.u0)
        y1_new = y1_step(problem, state.x, state.u1)
        dy0 = y0_new - state.y0
        dy1 = y1_new - state.y1
        state.y0, state.y1 = y0_new, y1_new
        u_step(state, modelled)
        state.iteration = k

        primal = float(np.sqrt(np.sum(np.abs(modelled - state.y0) ** 2)
                               + np.sum(np.abs(state.x - state.y1) ** 2)))
        dual_freq = (np.conj(problem.transfer) * np.fft.fftn(dy0)
                     + np.fft.fftn(dy1, axes=spatial))
        dual = float(params.rho * np.linalg.norm(dual_freq) / np.sqrt(n_bins))

        smooth = 0.5 * params.smoothness * float(
            np.sum(energy * np.abs(xf) ** 2)) / n_bins
        misfit_x = 0.5 * float(np.sum(np.abs(modelled[problem.mask]
                                             - problem.obs[problem.mask]) ** 2))
        obj = misfit_x + smooth + params.sparsity * float(np.sum(np.abs(state.x)))
        misfit_y = 0.5 * float(np.sum(
            np.abs(mask_f * state.y0 - problem.obs) ** 2))
        split_obj = misfit_y + smooth + params.sparsity * float(np.sum(np.abs(state.y1)))
        record = IterationStats(iteration=k, objective=obj, split_objective=split_obj,
                                primal_residual=primal, dual_residual=dual)
        stats.append(record)
        if callback is not None:
            callback(record)

        if monitor.update(primal, dual):
            raise DivergenceError(
                f"residuals stayed {monitor.factor:.0f}x above their initial "
                f"values for {monitor.streak} iterations (iteration {k})",
                state=state, diagnostics=stats)

        if params.abs_tol > 0 or params.rel_tol > 0:
            ax_norm = float(np.sqrt(np.sum(np.abs(modelled) ** 2)
                                    + np.sum(np.abs(state.x) ** 2)))
            y_norm = float(np.sqrt(np.sum(np.abs(state.y0) ** 2)
                                   + np.sum(np.abs(state.y1) ** 2)))
            atu = (np.conj(problem.transfer) * np.fft.fftn(state.u0)
                   + np.fft.fftn(state.u1, axes=spatial))
            atu_norm = float(params.rho * np.linalg.norm(atu) / np.sqrt(n_bins))
            n_primal = np.sqrt((m_atoms + 1) * n_bins)
            n_dual = np.sqrt(m_atoms * n_bins)
            eps_pri = n_primal * params.abs_tol + params.rel_tol * max(ax_norm, y_norm)
            eps_dual = n_dual * params.abs_tol + params.rel_tol * atu_norm
            if primal <= eps_pri and dual <= eps_dual:
                stopped = True
                break

    field = SoundField(grid=problem.scheme.grid,
                       pressure=crop(modelled, problem.scheme).ravel())
    return ConvResult(maps=state.x, field=field, padded_estimate=modelled,
                      consensus=state.y0, stats=stats, state=state,
                      n_iterations=state.iteration, stopped_by_tolerance=stopped)
