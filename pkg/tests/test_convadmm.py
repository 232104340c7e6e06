import numpy as np
import pytest

import sfrec
from sfrec.convadmm import (AdmmState, ConvParams, GradientOperator,
                            apply_dictionary, make_conv_problem, objective,
                            soft_threshold, solve, solve_diag_rank1, u_step,
                            x_step, y0_step, y1_step)
from sfrec.errors import DivergenceError, ParameterError
from sfrec.grids import make_grid, semicircle_directions
from sfrec.metrics import nmse
from sfrec.partition import wavelength_partition
from sfrec.simulate import SoundField, observe


def small_problem(n=49, n_per_wavelength=8, beta=1e-8, mu=1e-3, rho=1e-2,
                  max_iter=100, mode="global", obs_indices=None):
    lam = 1.0
    grid = make_grid(n, lam / n_per_wavelength, wavelength=lam, origin=0.25)
    directions = semicircle_directions(7)
    dictionary = sfrec.build_dictionary(grid, directions)
    truth = SoundField(grid=grid, pressure=dictionary.atoms[:, 2].copy())
    idx = np.arange(grid.size) if obs_indices is None else obs_indices
    obs = observe(truth, idx)
    scheme = wavelength_partition(grid)
    params = ConvParams(sparsity=beta, smoothness=mu, rho=rho, max_iter=max_iter,
                        dictionary_mode=mode)
    return truth, obs, make_conv_problem(obs, scheme, directions, params)


# --- soft threshold -----------------------------------------------------------

def test_shrink_real_and_null():
    assert soft_threshold(np.array([2.0 + 0j]), 1.0)[0] == pytest.approx(1.0 + 0j)
    assert soft_threshold(np.array([0.5 + 0j]), 1.0)[0] == 0.0
    assert soft_threshold(np.array([0.0 + 0j]), 1.0)[0] == 0.0


def test_shrink_preserves_phase():
    for theta in np.linspace(0, 2 * np.pi, 9):
        z = 3.0 * np.exp(1j * theta)
        out = soft_threshold(np.array([z]), 1.0)[0]
        assert out == pytest.approx(2.0 * np.exp(1j * theta), abs=1e-12)


def test_shrink_is_exact_proximal_map():
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = rng.standard_normal() + 1j * rng.standard_normal()
        alpha = abs(rng.standard_normal())
        y = soft_threshold(np.array([z]), alpha)[0]
        # subgradient condition of alpha*|y| + 0.5*|y - z|^2
        if y != 0:
            assert abs((z - y) - alpha * y / abs(y)) < 1e-12
        else:
            assert abs(z) <= alpha + 1e-12
        # dense polar search around the minimizer
        best = np.inf
        best_y = None
        for r in np.linspace(0, abs(z), 120):
            for phi in np.linspace(0, 2 * np.pi, 120, endpoint=False):
                cand = r * np.exp(1j * phi)
                val = alpha * abs(cand) + 0.5 * abs(cand - z) ** 2
                if val < best:
                    best, best_y = val, cand
        assert alpha * abs(y) + 0.5 * abs(y - z) ** 2 <= best + 1e-3


# --- gradient operator --------------------------------------------------------

def test_gradient_apply_matches_rolling_difference():
    op = GradientOperator((6,))
    x = np.arange(6.0) + 1j
    d = op.apply(x, axis=0)
    expected = np.array([x[i] - x[(i + 1) % 6] for i in range(6)])
    assert np.array_equal(d, expected)


def test_gradient_transfer_matches_stencil_fft():
    for n in (4, 9, 16):
        op = GradientOperator((n,))
        stencil = np.zeros(n)
        stencil[0], stencil[1] = 1.0, -1.0
        assert np.allclose(op.transfer(0), np.fft.fft(stencil), atol=1e-12)


def test_gradient_energy_spectrum_2d_additive():
    op = GradientOperator((5, 8))
    g = op.energy_spectrum()
    gx = np.abs(op.transfer(0)) ** 2
    gy = np.abs(op.transfer(1)) ** 2
    assert np.allclose(g, gx[:, None] + gy[None, :], atol=1e-12)


def test_constant_map_has_zero_penalty():
    op = GradientOperator((7, 7))
    maps = np.full((3, 7, 7), 2.0 - 1j)
    assert op.penalty(maps) == 0.0


# --- per-bin solver -----------------------------------------------------------

@pytest.mark.parametrize("m_atoms", [1, 7, 32])
def test_diag_rank1_matches_dense_solve(m_atoms):
    rng = np.random.default_rng(5)
    for _ in range(100):
        d = rng.standard_normal(m_atoms) + 1j * rng.standard_normal(m_atoms)
        g = float(abs(rng.standard_normal())) * 4
        mu = 10.0 ** rng.uniform(-6, 1)
        rho = 10.0 ** rng.uniform(-6, 1)
        b0 = complex(rng.standard_normal(), rng.standard_normal())
        b1 = rng.standard_normal(m_atoms) + 1j * rng.standard_normal(m_atoms)
        x = solve_diag_rank1(d, g, mu, rho, b0, b1)
        dense = (mu * g + rho) * np.eye(m_atoms) + rho * np.outer(np.conj(d), d)
        rhs = rho * (np.conj(d) * b0 + b1)
        expected = np.linalg.solve(dense, rhs)
        assert np.linalg.norm(x - expected) <= 1e-10 * np.linalg.norm(expected)


def test_diag_rank1_single_atom_reduces_to_scalar_division():
    d = np.array([1.5 - 0.5j])
    out = solve_diag_rank1(d, 2.0, 0.3, 0.7, 1.0 + 1j, np.array([0.2j]))
    denominator = 0.3 * 2.0 + 0.7 + 0.7 * abs(d[0]) ** 2
    expected = 0.7 * (np.conj(d[0]) * (1 + 1j) + 0.2j) / denominator
    assert out[0] == pytest.approx(expected, rel=1e-12)


def test_diag_rank1_zero_smoothness_stays_finite():
    rng = np.random.default_rng(6)
    d = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    out = solve_diag_rank1(d, 0.0, 0.0, 1.0, 1.0 + 0j, np.zeros(5))
    dense = np.eye(5) + np.outer(np.conj(d), d)
    expected = np.linalg.solve(dense, np.conj(d))
    assert np.all(np.isfinite(out))
    assert np.allclose(out, expected, atol=1e-12)


# --- objective and steps ------------------------------------------------------

def test_objective_zero_maps():
    truth, obs, problem = small_problem()
    maps = np.zeros((problem.n_atoms, *problem.padded.shape), dtype=complex)
    expected = 0.5 * np.sum(np.abs(obs.values) ** 2)
    assert objective(problem, maps) == pytest.approx(expected, rel=1e-12)


def test_objective_constant_map_smoothness_free():
    truth, obs, problem = small_problem(beta=0.0, mu=5.0)
    maps = np.full((problem.n_atoms, *problem.padded.shape), 0.1 + 0.05j)
    grad_term = GradientOperator(problem.padded.shape).penalty(maps)
    assert grad_term == 0.0


def test_x_step_minimizes_its_quadratic():
    # compare against a dense frequency-domain solve, bin by bin
    truth, obs, problem = small_problem(n=17, n_per_wavelength=4, max_iter=1)
    rng = np.random.default_rng(1)
    shape = problem.padded.shape
    m = problem.n_atoms
    state = AdmmState(
        x=np.zeros((m, *shape), dtype=complex),
        y0=rng.standard_normal(shape) + 1j * rng.standard_normal(shape),
        y1=rng.standard_normal((m, *shape)) + 1j * rng.standard_normal((m, *shape)),
        u0=rng.standard_normal(shape) + 1j * rng.standard_normal(shape),
        u1=rng.standard_normal((m, *shape)) + 1j * rng.standard_normal((m, *shape)),
    )
    xf = x_step(problem, state)
    g = GradientOperator(shape).energy_spectrum()
    b0 = np.fft.fftn(state.y0 - state.u0)
    b1 = np.fft.fftn(state.y1 - state.u1, axes=problem.spatial_axes)
    params = problem.params
    for bin_index in [0, 3, shape[0] // 2, shape[0] - 1]:
        d = problem.transfer[:, bin_index]
        dense = (params.smoothness * g[bin_index] + params.rho) * np.eye(m) \
            + params.rho * np.outer(np.conj(d), d)
        rhs = params.rho * (np.conj(d) * b0[bin_index] + b1[:, bin_index])
        expected = np.linalg.solve(dense, rhs)
        assert np.allclose(xf[:, bin_index], expected, atol=1e-10)


def test_y0_step_formula_and_oracle():
    truth, obs, problem = small_problem(obs_indices=np.arange(0, 49, 3))
    rng = np.random.default_rng(2)
    shape = problem.padded.shape
    modelled = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    u0 = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    y0 = y0_step(problem, modelled, u0)
    rho = problem.params.rho
    # unobserved nodes carry no data term
    off = ~problem.mask
    assert np.allclose(y0[off], modelled[off] + u0[off], atol=1e-12)

    # generic quadratic oracle: Newton step from finite differences
    def loss(node, c):
        m_val = 1.0 if problem.mask[node] else 0.0
        v = modelled[node] + u0[node]
        return 0.5 * m_val * abs(c - problem.obs[node]) ** 2 \
            + 0.5 * rho * abs(c - v) ** 2

    h = 1e-4
    for node in [(0,), (13,), (24,), (48,)]:
        g = np.array([(loss(node, h) - loss(node, -h)) / (2 * h),
                      (loss(node, 1j * h) - loss(node, -1j * h)) / (2 * h)])
        hess = np.array([
            [(loss(node, h) - 2 * loss(node, 0) + loss(node, -h)) / h**2, 0.0],
            [0.0, (loss(node, 1j * h) - 2 * loss(node, 0)
                   + loss(node, -1j * h)) / h**2]])
        step = np.linalg.solve(hess, -g)
        oracle = complex(step[0], step[1])
        assert abs(y0[node] - oracle) < 1e-6 * max(1.0, abs(oracle))


def test_y0_step_small_rho_pins_observations():
    truth, obs, problem = small_problem(rho=1e-9)
    modelled = np.zeros(problem.padded.shape, dtype=complex)
    y0 = y0_step(problem, modelled, np.zeros_like(modelled))
    assert np.allclose(y0[problem.mask], problem.obs[problem.mask], atol=1e-6)


def test_u_step_is_exact_bookkeeping():
    truth, obs, problem = small_problem(max_iter=1)
    rng = np.random.default_rng(3)
    shape = problem.padded.shape
    m = problem.n_atoms
    state = AdmmState(
        x=rng.standard_normal((m, *shape)) + 0j,
        y0=rng.standard_normal(shape) + 0j,
        y1=rng.standard_normal((m, *shape)) + 0j,
        u0=rng.standard_normal(shape) + 0j,
        u1=rng.standard_normal((m, *shape)) + 0j,
    )
    modelled = rng.standard_normal(shape) + 0j
    u0_before, u1_before = state.u0.copy(), state.u1.copy()
    u_step(state, modelled)
    assert np.array_equal(state.u0, u0_before + (modelled - state.y0))
    assert np.array_equal(state.u1, u1_before + (state.x - state.y1))


def test_u_step_consensus_leaves_duals_unchanged():
    truth, obs, problem = small_problem(max_iter=1)
    shape = problem.padded.shape
    m = problem.n_atoms
    rng = np.random.default_rng(4)
    x = rng.standard_normal((m, *shape)) + 0j
    modelled = rng.standard_normal(shape) + 0j
    state = AdmmState(x=x, y0=modelled.copy(), y1=x.copy(),
                      u0=rng.standard_normal(shape) + 0j,
                      u1=rng.standard_normal((m, *shape)) + 0j)
    u0_before, u1_before = state.u0.copy(), state.u1.copy()
    u_step(state, modelled)
    assert np.array_equal(state.u0, u0_before)
    assert np.array_equal(state.u1, u1_before)


# --- full solve ----------------------------------------------------------------

def test_exact_model_recovery_fully_observed():
    truth, obs, problem = small_problem(n=97, beta=1e-9, mu=1e-3, rho=1e-2,
                                        max_iter=400)
    result = solve(problem)
    assert nmse(result.field, truth) < -40.0


def test_zero_observations_give_zero_maps():
    truth, obs, problem = small_problem(beta=1e-3, max_iter=50,
                                        obs_indices=np.array([], dtype=int))
    result = solve(problem)
    assert np.allclose(result.maps, 0.0, atol=1e-12)
    assert np.allclose(result.field.pressure, 0.0, atol=1e-10)


def test_residual_norm_matches_definition():
    truth, obs, problem = small_problem(max_iter=5)
    result = solve(problem)
    state = result.state
    modelled = result.padded_estimate
    expected = np.sqrt(np.sum(np.abs(modelled - state.y0) ** 2)
                       + np.sum(np.abs(state.x - state.y1) ** 2))
    assert result.stats[-1].primal_residual == pytest.approx(expected, rel=1e-12)


def test_fixed_point_matches_dense_least_squares():
    # no penalties, identity mask (no padding): the solver's limit satisfies
    # the normal equations of the convolutional least-squares fit
    lam = 1.0
    grid = make_grid(16, lam / 4, wavelength=lam, origin=0.25)
    directions = semicircle_directions(5)
    dictionary = sfrec.build_dictionary(grid, directions)
    truth = SoundField(grid=grid, pressure=dictionary.atoms[:, 1].copy())
    obs = observe(truth, np.arange(grid.size))
    scheme = wavelength_partition(grid, pad_per_side=(0,))
    params = ConvParams(sparsity=0.0, smoothness=0.0, rho=1e-1, max_iter=4000)
    problem = make_conv_problem(obs, scheme, directions, params)
    assert bool(problem.mask.all())
    result = solve(problem)

    generators = np.fft.ifftn(problem.transfer, axes=problem.spatial_axes)
    cols = [np.roll(generators[a], shift)
            for a in range(problem.n_atoms)
            for shift in range(grid.size)]
    dense = np.stack(cols, axis=1)
    x_flat = result.state.x.reshape(-1)
    target = problem.obs.reshape(-1)
    normal_residual = dense.conj().T @ (dense @ x_flat - target)
    scale = np.linalg.norm(dense.conj().T @ target)
    assert np.linalg.norm(normal_residual) / scale < 1e-6


def test_objective_trend_nonincreasing_windowed():
    truth, obs, problem = small_problem(n=97, beta=1e-8, mu=1e-3, rho=1e-2,
                                        max_iter=250)
    result = solve(problem)
    split = [s.split_objective for s in result.stats]
    for start in range(20, len(split) - 50):
        assert split[start + 49] <= split[start] * (1 + 1e-9) + 1e-15


def test_divergence_monitor_fires_after_sustained_growth():
    from sfrec.convadmm import DivergenceMonitor
    monitor = DivergenceMonitor(factor=10.0, streak=50)
    assert not monitor.update(1.0, 1.0)  # baseline
    for _ in range(100):
        assert not monitor.update(5.0, 5.0)  # elevated but below 10x
    fired = False
    for _ in range(50):
        fired = monitor.update(11.0, 1.0)
    assert fired


def test_divergence_monitor_resets_on_recovery():
    from sfrec.convadmm import DivergenceMonitor
    monitor = DivergenceMonitor(factor=10.0, streak=3)
    monitor.update(1.0, 1.0)
    monitor.update(20.0, 1.0)
    monitor.update(20.0, 1.0)
    assert not monitor.update(1.0, 1.0)  # streak broken
    monitor.update(20.0, 1.0)
    monitor.update(20.0, 1.0)
    assert monitor.update(20.0, 1.0)


def test_default_solve_never_raises_divergence():
    truth, obs, problem = small_problem(max_iter=120)
    try:
        solve(problem)
    except DivergenceError as exc:  # pragma: no cover - would be a regression
        pytest.fail(f"divergence detector fired on a default config: {exc}")


def test_filters_mode_truncates_generators():
    truth, obs, problem = small_problem(mode="filters", max_iter=2)
    generators = np.fft.ifftn(problem.transfer, axes=problem.spatial_axes)
    n_s = problem.scheme.subdomain_shape[0]
    tail = generators[:, n_s:]
    assert np.max(np.abs(tail)) < 1e-10


def test_reconstruction_uses_cropped_model_output():
    truth, obs, problem = small_problem(max_iter=30)
    result = solve(problem)
    maps_freq = np.fft.fftn(result.maps, axes=problem.spatial_axes)
    padded = apply_dictionary(problem, maps_freq)
    from sfrec.partition import crop
    assert np.allclose(result.field.pressure,
                       crop(padded, problem.scheme).ravel(), atol=1e-12)


def test_invalid_params_rejected():
    with pytest.raises(ParameterError):
        ConvParams(sparsity=-1.0)
    with pytest.raises(ParameterError):
        ConvParams(sparsity=0.0, rho=0.0)
    with pytest.raises(ParameterError):
        ConvParams(sparsity=0.0, max_iter=0)
    with pytest.raises(ParameterError):
        ConvParams(sparsity=0.0, dictionary_mode="magic")
