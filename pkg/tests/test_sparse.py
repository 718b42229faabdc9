import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmptf import spectral
from nmptf.errors import InvalidArgumentError, InvalidPhaseError
from nmptf.model import (PhaseFn, ScatterSet, Signal, TimeGrid, gen_example_signal, restrict,
                         subsample_random)
from nmptf.solver import SolverOptions, decompose_well_resolved
from nmptf.sparse import (SparseOptions, basis_pursuit, build_matrix, decompose_sparse,
                          default_n_basis, phase_error, relative_phase_error, run_trial,
                          success_trial, trial_seeds)

TWO_PI = 2 * np.pi


def _warped(n, amp=0.3):
    t = np.arange(n) / n
    return PhaseFn(TWO_PI * t + amp * np.sin(TWO_PI * t), TWO_PI + amp * TWO_PI * np.cos(TWO_PI * t))


def test_matrix_examples():
    full = ScatterSet(np.arange(16), 16)
    U = build_matrix(PhaseFn.linear(16, 1), full, 16, weighted=True).entries
    assert np.max(np.abs(U.conj().T @ U - np.eye(16))) <= 1e-12
    A = build_matrix(PhaseFn.linear(16, 1), ScatterSet(np.array([1, 5, 9]), 16), 8)
    assert A.shape == (3, 8) and np.allclose(np.abs(A.entries), 1, atol=1e-15)
    _, truth = gen_example_signal(2, TimeGrid(4096))
    A = build_matrix(truth.phase, subsample_random(TimeGrid(4096), 120, 1), 256)
    assert A.shape == (120, 256)


def test_matrix_interpolates_phase_from_other_grid():
    samples = ScatterSet(np.array([3, 17, 40]), 64)
    on_parent = build_matrix(_warped(64), samples, 8)
    on_fine = build_matrix(_warped(256), samples, 8)
    assert np.max(np.abs(on_parent.entries - on_fine.entries)) <= 1e-12


def test_matrix_errors():
    with pytest.raises(InvalidArgumentError):
        build_matrix(PhaseFn.linear(16, 1), ScatterSet(np.arange(4), 16), 7)
    t = np.arange(32) / 32
    folded = PhaseFn(TWO_PI * t + 0.5 * np.sin(TWO_PI * t), TWO_PI * (1 + 1.5 * np.cos(TWO_PI * t)))
    with pytest.raises(InvalidPhaseError):
        build_matrix(folded, ScatterSet(np.arange(32), 32), 8)


def test_default_basis_size():
    assert default_n_basis(100, 4096) == 256
    assert default_n_basis(10, 256) == 32
    assert default_n_basis(100, 128) == 128


def test_bp_zero_rhs():
    A = build_matrix(PhaseFn.linear(64, 1), ScatterSet(np.arange(0, 64, 4), 64), 32)
    sol = basis_pursuit(A, np.zeros(16), 1e-8)
    assert np.all(sol.x == 0) and sol.converged


@pytest.mark.parametrize("seed", range(5))
def test_bp_compressive_recovery(seed):
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(256, 64, replace=False))
    A = build_matrix(PhaseFn.linear(256, 1), ScatterSet(rows, 256), 256)
    x0 = np.zeros(256, complex)
    x0[rng.choice(256, 5, replace=False)] = 1
    f = A.entries @ x0
    sol = basis_pursuit(A, f, 1e-6 * np.linalg.norm(f))
    assert sol.converged
    assert np.max(np.abs(sol.x - x0)) <= 1e-4


def test_bp_ex2_spectrum_at_exact_phase():
    n = 4096
    sig, truth = gen_example_signal(2, TimeGrid(n))
    samples = subsample_random(TimeGrid(n), 120, 3)
    A = build_matrix(truth.phase, samples, 256)
    f = sig.values[samples.indices]
    sol = basis_pursuit(A, f, 1e-6 * np.linalg.norm(f))
    tb = truth.phase.normalized()
    exact = spectral.theta_nudft(sig.values, tb.values, A.wavenumbers, tb.derivative).coeffs
    w = np.abs(A.wavenumbers)
    near = (w <= 2) | (np.abs(w - 100) <= 2)
    assert np.all(np.abs(exact[~near]) <= 1e-10)
    assert np.max(np.abs(sol.x - exact)) <= 1e-4


@pytest.mark.parametrize("seed", range(10))
def test_bp_feasible_or_flagged(seed):
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(128, 30, replace=False))
    A = build_matrix(_warped(128), ScatterSet(rows, 128), 64)
    f = rng.standard_normal(30)
    tol = 1e-3 * np.linalg.norm(f)
    sol = basis_pursuit(A, f, tol, max_iter=int(rng.integers(5, 400)))
    if sol.converged:
        assert sol.primal_residual <= tol


def test_bp_infeasible_overdetermined_is_flagged():
    A = build_matrix(PhaseFn.linear(64, 1), ScatterSet(np.arange(64), 64), 8)
    f = np.cos(TWO_PI * 20 * np.arange(64) / 64)  # outside the span
    sol = basis_pursuit(A, f, 1e-6)
    assert not sol.converged and sol.primal_residual > 1e-6


@pytest.mark.parametrize("seed", range(10))
def test_bp_not_worse_than_support_least_squares(seed):
    rng = np.random.default_rng(100 + seed)
    nb, ns = 64, 24
    rows = np.sort(rng.choice(256, ns, replace=False))
    A = build_matrix(_warped(256), ScatterSet(rows, 256), nb)
    support = rng.choice(nb, 3, replace=False)
    x0 = np.zeros(nb, complex)
    x0[support] = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    f = A.entries @ x0 + 1e-3 * rng.standard_normal(ns)
    tol = 2e-3 * np.sqrt(ns)
    sol = basis_pursuit(A, f, tol, max_iter=20000)
    xs = np.zeros(nb, complex)
    xs[support] = np.linalg.lstsq(A.entries[:, support], f, rcond=None)[0]
    assert np.linalg.norm(A.entries @ xs - f) <= tol
    assert sol.objective <= np.sum(np.abs(xs)) + 1e-6


def test_weighted_and_unweighted_agree_with_lattice_minimizer():
    rng = np.random.default_rng(7)
    nb = 8
    rows = np.sort(rng.choice(64, 6, replace=False))
    samples = ScatterSet(rows, 64)
    theta = _warped(64)
    A = build_matrix(theta, samples, nb)
    Phi = build_matrix(theta, samples, nb, weighted=True)
    x0 = np.zeros(nb)
    x0[[2, 5]] = [1, -2]
    f = A.entries @ x0
    f_w = Phi.row_weights * f

    grid = np.array(list(itertools.product(range(-2, 3), repeat=nb)), dtype=float)
    feasible = np.linalg.norm(grid @ A.entries.T - f, axis=1) <= 1e-9
    best = grid[feasible][np.argmin(np.abs(grid[feasible]).sum(axis=1))]

    a = basis_pursuit(A, f, 1e-9 * np.linalg.norm(f), max_iter=20000).x
    b = basis_pursuit(Phi, f_w, 1e-9 * np.linalg.norm(f_w), max_iter=20000).x
    assert np.max(np.abs(a - best)) <= 1e-5
    assert np.max(np.abs(b - best)) <= 1e-5


def test_sparse_zero_samples():
    samples = Signal(ScatterSet(np.arange(0, 256, 8), 256), np.zeros(32))
    dec = decompose_sparse(samples, PhaseFn.linear(256, 10))
    assert dec.empty and np.all(dec.imf == 0) and np.all(dec.a0 == 0)


@pytest.fixture(scope="module")
def ex2_good():
    n = 4096
    sig, truth = gen_example_signal(2, TimeGrid(n))
    samples = subsample_random(TimeGrid(n), 120, trial_seeds(0)[1])
    dec = decompose_sparse(restrict(sig, samples), PhaseFn.linear(n, 100), truth=truth.phase)
    return dec, truth


def test_sparse_ex2_relative_errors(ex2_good):
    dec, truth = ex2_good
    imf_rel = np.max(np.abs(dec.imf - truth.imf)) / np.max(np.abs(truth.imf))
    assert imf_rel <= 1e-2
    assert relative_phase_error(dec.phase.values, truth.phase.values) <= 1e-3


def test_sparse_residual_at_samples(ex2_good):
    dec, _ = ex2_good
    assert dec.residual.shape == (120,)
    assert np.max(np.abs(dec.residual)) <= 1e-3


@pytest.mark.parametrize("ex,n", [(1, 256), (2, 4096)])
def test_sparse_with_all_samples_matches_uniform_solver(ex, n):
    sig, truth = gen_example_signal(ex, TimeGrid(n))
    theta0 = PhaseFn.linear(n, round(truth.phase.cycle_count))
    tol = 1e-8 * np.sqrt(n)
    ref = decompose_well_resolved(sig, theta0, SolverOptions(eps0=tol, transform_mode="nudft"))
    got = decompose_sparse(restrict(sig, ScatterSet(np.arange(n), n)), theta0,
                           SolverOptions(eps0=tol, max_iter=40, transform_mode="nudft"),
                           SparseOptions(bp_rel_tol=1e-10))
    assert np.max(np.abs(got.phase.values - ref.phase.values)) <= 1e-6


def test_sparse_rejects_too_few_samples():
    samples = Signal(ScatterSet(np.array([0, 9, 20]), 64), np.ones(3))
    with pytest.raises(InvalidArgumentError):
        decompose_sparse(samples, PhaseFn.linear(64, 4))


def test_trial_determinism_and_rate():
    a = run_trial(2, 120, 4, 1e-2)
    b = run_trial(2, 120, 4, 1e-2)
    assert a == b
    rate = success_trial(2, 120, 2, 4, 1e-2)
    assert rate in (0.0, 0.5, 1.0)
    assert (rate == 1.0) == (a.success and run_trial(2, 120, 5, 1e-2).success)
    with pytest.raises(InvalidArgumentError):
        success_trial(2, 120, 0, 0, 1e-2)


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50), st.integers(-3, 3))
def test_phase_error_ignores_whole_cycles(offset, cycles):
    ref = np.linspace(0, 20, 50) + offset
    wiggle = 0.01 * np.sin(np.arange(50))
    assert phase_error(ref + TWO_PI * cycles + wiggle, ref) == pytest.approx(np.max(np.abs(wiggle)))
