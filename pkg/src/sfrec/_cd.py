"""Numba kernels for the complex-valued lasso.

Two solvers cover different regimes of ``min ||A x - p||_2^2 + beta ||x||_1``
with complex data:

* coordinate descent on the Gram form (``lasso_cd``), the high-precision
  solver used for standalone solves; it maintains ``q = G x`` incrementally
  so sweeps only pay for coordinates that move;
* a scaled-dual splitting whose quadratic step is solved through the small
  observation-side system (``_lasso_path``), used for the per-subdomain
  leave-one-out paths where the weight grid reaches values near zero and
  coordinate descent stalls on coherent dictionaries.  The splitting penalty
  follows the weight down the path (with a floor), which keeps the iteration
  count roughly flat across the grid.
"""

from __future__ import annotations

import os

import numpy as np
import numba
from numba import njit, prange

# the workqueue layer is fork-safe, so experiment-level process pools can
# coexist with the threaded subdomain solves
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"


@njit(cache=True)
def _refresh_q(G, x, q):
    m_total = x.shape[0]
    for k in range(m_total):
        acc = 0j
        for l in range(m_total):
            acc += G[k, l] * x[l]
        q[k] = acc


@njit(cache=True)
def _cd(G, c, beta, x, q, diag, diag_floor, max_sweeps, tol):
    """Sweep coordinates until the largest coefficient move drops below tol.

    Returns the number of sweeps used, or -1 if the budget ran out.
    """
    m_total = x.shape[0]
    half = 0.5 * beta
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for m in range(m_total):
            gmm = diag[m]
            if gmm <= diag_floor:
                # column is (numerically) zero: the penalty pins the coefficient
                if x[m] != 0j:
                    x[m] = 0j
                continue
            z = x[m] - (q[m] - c[m]) / gmm
            az = abs(z)
            thr = half / gmm
            if az <= thr:
                xn = 0j
            else:
                xn = z * (1.0 - thr / az)
            d = xn - x[m]
            ad = abs(d)
            if ad != 0.0:
                x[m] = xn
                for k in range(m_total):
                    q[k] += G[k, m] * d
                if ad > max_delta:
                    max_delta = ad
        if max_delta < tol:
            return sweep + 1
        if (sweep + 1) % 64 == 0:
            _refresh_q(G, x, q)
    return -1


def lasso_cd(dictionary_obs: np.ndarray, observations: np.ndarray, beta: float,
             x0: np.ndarray | None = None, max_sweeps: int = 10_000,
             tol: float = 1e-10) -> tuple[np.ndarray, bool]:
    """Solve one complex lasso instance; returns (solution, converged)."""
    A = np.ascontiguousarray(dictionary_obs, dtype=np.complex128)
    p = np.ascontiguousarray(observations, dtype=np.complex128)
    G = A.conj().T @ A
    c = A.conj().T @ p
    diag = np.real(np.diag(G)).copy()
    floor = 1e-12 * max(float(diag.max(initial=0.0)), 1e-300)
    x = np.zeros(A.shape[1], dtype=np.complex128) if x0 is None \
        else np.asarray(x0, dtype=np.complex128).copy()
    q = G @ x
    sweeps = _cd(G, c, float(beta), x, q, diag, floor, int(max_sweeps), float(tol))
    return x, sweeps >= 0


@njit(cache=True)
def _lasso_path(A, p, betas_desc, rho, solutions, iters_first, iters_warm, tol):
    """Warm-started lasso path by scaled-dual splitting on one fold.

    Each quadratic step inverts ``(2 A^H A + rho I)`` through the small
    observation-side system, so the per-iteration cost stays O(n*M); the
    penalty is fixed at the dictionary's diagonal energy so the shrink
    threshold stays proportional to the coefficient scale at every weight,
    and over-relaxation (1.8) speeds up the shrink-dominated regime.
    Solutions land in ``solutions`` (one row per weight, descending order).
    """
    n, m_total = A.shape
    n_beta = betas_desc.shape[0]
    relax = 1.8
    Ah = np.conj(A).T.copy()
    core = np.dot(A, Ah) / rho  # n x n observation-side system
    for i in range(n):
        core[i, i] += 0.5
    core_inv = np.linalg.inv(core)
    c2 = 2.0 * np.dot(Ah, p)
    z = np.zeros(m_total, dtype=np.complex128)
    u = np.zeros(m_total, dtype=np.complex128)
    for j in range(n_beta):
        thr = betas_desc[j] / rho
        budget = iters_first if j == 0 else iters_warm
        for _ in range(budget):
            w = c2 + rho * (z - u)
            y = np.dot(core_inv, np.dot(A, w))
            x = (w - np.dot(Ah, y) / rho) / rho
            gap = 0.0
            shift = 0.0
            for k in range(m_total):
                xr = relax * x[k] + (1.0 - relax) * z[k]
                v = xr + u[k]
                mag = abs(v)
                zn = v * (1.0 - thr / mag) if mag > thr else 0j
                d = abs(zn - z[k])
                if d > shift:
                    shift = d
                z[k] = zn
                u[k] = v - zn
                g = abs(x[k] - zn)
                if g > gap:
                    gap = g
            if gap < tol and shift < tol:
                break
        solutions[j] = z


@njit(cache=True)
def _loocv_paths(A, p, betas_desc, rho, tol, iters_first, iters_warm,
                 max_folds):
    """Leave-one-out error along the path, one warm-started path per fold.

    ``max_folds`` bounds the number of left-out observations (an evenly
    spaced subset), 0 means every observation.  A single-weight grid skips
    the fold loop entirely.
    """
    n, m_total = A.shape
    n_beta = betas_desc.shape[0]
    solutions = np.zeros((n_beta, m_total), dtype=np.complex128)
    _lasso_path(A, p, betas_desc, rho, solutions, iters_first, iters_warm, tol)
    cv = np.zeros(n_beta)
    if n_beta == 1:
        return cv, solutions
    if n == 1:
        # leaving out the only observation leaves the zero fit
        for j in range(n_beta):
            cv[j] = abs(p[0]) ** 2
        return cv, solutions
    n_folds = n if max_folds <= 0 or n <= max_folds else max_folds
    fold_solutions = np.zeros((n_beta, m_total), dtype=np.complex128)
    A_fold = np.zeros((n - 1, m_total), dtype=np.complex128)
    p_fold = np.zeros(n - 1, dtype=np.complex128)
    for f in range(n_folds):
        i = (f * n) // n_folds
        r = 0
        for s in range(n):
            if s != i:
                A_fold[r] = A[s]
                p_fold[r] = p[s]
                r += 1
        _lasso_path(A_fold, p_fold, betas_desc, rho, fold_solutions,
                    iters_first, iters_warm, tol)
        for j in range(n_beta):
            pred = 0j
            for k in range(m_total):
                pred += A[i, k] * fold_solutions[j, k]
            diff = p[i] - pred
            cv[j] += diff.real * diff.real + diff.imag * diff.imag
    return cv, solutions


@njit(cache=True)
def _correlation_scale(A, p):
    n, m_total = A.shape
    corr = 0.0
    for m in range(m_total):
        acc = 0j
        for r in range(n):
            acc += np.conj(A[r, m]) * p[r]
        a = abs(acc)
        if a > corr:
            corr = a
    return corr


@njit(cache=True)
def _diag_max(A):
    n, m_total = A.shape
    best = 0.0
    for m in range(m_total):
        acc = 0.0
        for r in range(n):
            acc += A[r, m].real ** 2 + A[r, m].imag ** 2
        if acc > best:
            best = acc
    return best


@njit(cache=True)
def _select_smallest_min(cv_desc):
    """Index of the minimum, preferring later entries (smaller weights)."""
    best = 0
    for j in range(cv_desc.shape[0]):
        if cv_desc[j] <= cv_desc[best]:
            best = j
    return best


@njit(cache=True, parallel=True)
def _local_batch(atoms, local_rows, obs_values, boundaries, betas_desc,
                 relative, tol_rel, iters_first, iters_warm,
                 max_folds, maps_out, chosen_out):
    """Independent lasso(-LOOCV) solves for every subdomain bucket.

    ``atoms`` is the shared local dictionary; subdomain ``s`` sees rows
    ``local_rows[boundaries[s]:boundaries[s+1]]`` with values from
    ``obs_values``.  With ``relative`` the weight grid scales per subdomain
    to ``max |A^H p|``.  Outputs are written into disjoint columns, so the
    parallel loop is deterministic.
    """
    n_sub = boundaries.shape[0] - 1
    m_total = atoms.shape[1]
    n_beta = betas_desc.shape[0]
    for s in prange(n_sub):
        lo = boundaries[s]
        hi = boundaries[s + 1]
        n = hi - lo
        if n == 0:
            continue
        A = np.empty((n, m_total), dtype=np.complex128)
        p = np.empty(n, dtype=np.complex128)
        for r in range(n):
            A[r] = atoms[local_rows[lo + r]]
            p[r] = obs_values[lo + r]
        corr = _correlation_scale(A, p)
        dmax = _diag_max(A)
        if corr == 0.0 or dmax == 0.0:
            chosen_out[s] = betas_desc[n_beta - 1] * (corr if relative else 1.0)
            continue
        betas = betas_desc * corr if relative else betas_desc
        coef_scale = corr / dmax
        cv, sols = _loocv_paths(A, p, betas, dmax, tol_rel * coef_scale,
                                iters_first, iters_warm, max_folds)
        best = _select_smallest_min(cv) if n_beta > 1 else 0
        maps_out[:, s] = sols[best]
        chosen_out[s] = betas[best]


def local_lasso_batch(atoms: np.ndarray, local_rows: np.ndarray,
                      obs_values: np.ndarray, boundaries: np.ndarray,
                      betas: np.ndarray, relative: bool, tol_rel: float = 1e-6,
                      iters_first: int = 200, iters_warm: int = 60,
                      max_folds: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Solve every subdomain's (cross-validated) lasso; see ``_local_batch``."""
    atoms = np.ascontiguousarray(atoms, dtype=np.complex128)
    betas_desc = np.sort(np.asarray(betas, dtype=float))[::-1].copy()
    n_sub = boundaries.size - 1
    maps = np.zeros((atoms.shape[1], n_sub), dtype=np.complex128)
    chosen = np.full(n_sub, np.nan)
    _local_batch(atoms, np.ascontiguousarray(local_rows, dtype=np.int64),
                 np.ascontiguousarray(obs_values, dtype=np.complex128),
                 np.ascontiguousarray(boundaries, dtype=np.int64),
                 betas_desc, relative, float(tol_rel),
                 int(iters_first), int(iters_warm), int(max_folds),
                 maps, chosen)
    return maps, chosen


def lasso_loocv(dictionary_obs: np.ndarray, observations: np.ndarray,
                betas: np.ndarray, rel_tol: float = 1e-6,
                iters_first: int = 400, iters_warm: int = 120,
                max_folds: int = 0, polish: bool = True,
                polish_sweeps: int = 2_000, rel_tol_polish: float = 1e-9
                ) -> tuple[np.ndarray, float, np.ndarray, bool]:
    """Pick the lasso weight by explicit leave-one-out refits.

    One warm-started path is solved per left-out observation (plus the
    full-data path) under a tolerance relative to the coefficient scale.
    With ``polish`` the returned solution is refined at the chosen weight by
    strict coordinate descent.  Returns ``(solution, chosen_beta, cv_errors,
    converged)`` with ``cv_errors`` aligned to ``betas`` sorted ascending;
    ties select the smallest beta.
    """
    A = np.ascontiguousarray(dictionary_obs, dtype=np.complex128)
    p = np.ascontiguousarray(observations, dtype=np.complex128)
    betas_asc = np.sort(np.asarray(betas, dtype=float))
    diag_max = float(np.max(np.sum(np.abs(A) ** 2, axis=0), initial=0.0))
    if diag_max <= 0.0:
        return (np.zeros(A.shape[1], dtype=np.complex128), float(betas_asc[0]),
                np.full(betas_asc.size, float(np.sum(np.abs(p) ** 2))), True)
    correlation = float(np.max(np.abs(A.conj().T @ p), initial=0.0))
    coef_scale = max(correlation / diag_max, 1e-300)
    cv_desc, sols_desc = _loocv_paths(A, p, betas_asc[::-1].copy(), diag_max,
                                      rel_tol * coef_scale, int(iters_first),
                                      int(iters_warm), int(max_folds))
    best_desc = int(_select_smallest_min(cv_desc)) if betas_asc.size > 1 else 0
    x = sols_desc[best_desc].copy()
    chosen = float(betas_asc[::-1][best_desc])
    converged = True
    if polish:
        x, converged = lasso_cd(A, p, chosen, x0=x, max_sweeps=polish_sweeps,
                                tol=rel_tol_polish * coef_scale)
    cv = cv_desc[::-1]
    return x, chosen, cv.copy(), converged
