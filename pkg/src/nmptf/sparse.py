"""Decomposition from few random samples via l1 minimization.

The Fourier coefficients of the signal in the current phase coordinate are
recovered by basis pursuit over warped Fourier atoms; the rest of each
iteration (demodulation, phase correction) is shared with the well-resolved
solver.

Basis pursuit is solved by ADMM on the splitting

    minimize ||z||_1 + I(||y - f||_2 <= tol)   s.t.  x = z,  A x = y

whose x-update is a fixed linear solve with ``I + A^H A``, factored once per
matrix. The iteration count is capped, so a solve is deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg

from . import spectral
from .errors import InvalidArgumentError, InvalidPhaseError
from .model import (PhaseFn, ScatterSet, Signal, TimeGrid, gen_example_signal, restrict,
                    subsample_random, TWO_PI)
from .solver import (Decomposition, IterRecord, IterTrace, SolverOptions,
                     envelopes_from_spectrum, finalize, l1_freq_error, phase_update)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SensingMatrix:
    entries: np.ndarray
    row_times: np.ndarray
    wavenumbers: np.ndarray
    weighted: bool = False
    row_weights: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.entries.shape


@dataclass
class BPSolution:
    x: np.ndarray
    objective: float
    primal_residual: float
    iterations: int
    converged: bool
    state: Optional[tuple] = None


def default_n_basis(L0: float, n_parent: int) -> int:
    """Twice the cycle count, rounded up to a power of two and capped at the grid size."""
    nb = 1 << int(np.ceil(np.log2(max(2.0, 2 * L0))))
    return int(min(nb, n_parent))


def build_matrix(theta: PhaseFn, samples: ScatterSet, n_basis: int,
                 weighted: bool = False) -> SensingMatrix:
    """Warped Fourier atoms ``exp(i 2 pi k theta_bar(t_j))`` at the sample times.

    ``theta`` may be given on the parent grid of ``samples`` (values are
    indexed) or on any other uniform grid (values are interpolated).
    Weighted rows are scaled by ``sqrt(theta_bar'(t_j) / N_f)``.
    """
    if n_basis < 2 or n_basis % 2:
        raise InvalidArgumentError(f"number of basis functions must be even and >= 2, got {n_basis}")
    tb = theta.normalized()
    if tb.n == samples.parent_n:
        phase = tb.values[samples.indices]
        rate = tb.derivative[samples.indices]
    else:
        phase = tb.evaluate(samples.times)
        rate = tb.evaluate_derivative(samples.times)
    if np.any(rate <= 0):
        raise InvalidPhaseError("theta_bar' must be positive at every sample")
    k = np.arange(-n_basis // 2 + 1, n_basis // 2 + 1)
    entries = np.exp(2j * np.pi * np.multiply.outer(phase, k))
    weights = None
    if weighted:
        weights = np.sqrt(rate / samples.parent_n)
        entries = entries * weights[:, None]
    entries.setflags(write=False)
    return SensingMatrix(entries, samples.times, k, weighted, weights)


def _soft(v, thresh):
    mag = np.abs(v)
    return np.where(mag > thresh, (1 - thresh / np.maximum(mag, thresh)) * v, 0)


def basis_pursuit(A: SensingMatrix, f, tol: float, max_iter: int = 3000,
                  x0=None, rho: Optional[float] = None, state=None) -> BPSolution:
    """Approximately minimize ``||x||_1`` subject to ``||A x - f||_2 <= tol``.

    ``rho=None`` picks ``0.5 / max|A^H f|`` after scaling ``A`` to unit
    norm. ``state`` is the ``(z, y, u, w, rho)`` tuple of a previous solve
    and warm-starts the iteration (``x0`` alone seeds the primal variable
    only).
    """
    M = A.entries
    f = np.asarray(f, dtype=complex)
    m, nb = M.shape
    if f.shape != (m,):
        raise InvalidArgumentError(f"right-hand side has {f.size} entries for {m} rows")
    if tol <= 0:
        raise InvalidArgumentError("tolerance must be positive")
    fnorm = np.linalg.norm(f)
    if fnorm <= tol:
        z = np.zeros(nb, dtype=complex)
        return BPSolution(z, 0.0, float(fnorm), 0, True,
                          (z, np.zeros(m, complex), z.copy(), np.zeros(m, complex), rho))

    if m >= nb:
        # an overdetermined system may have no point inside the ball; the
        # least-squares fit is then the closest answer and is flagged
        x_ls = np.linalg.lstsq(M, f, rcond=None)[0]
        r_min = float(np.linalg.norm(M @ x_ls - f))
        if r_min > tol:
            return BPSolution(x_ls, float(np.sum(np.abs(x_ls))), r_min, 0, False, None)

    # scale so that A has unit spectral norm; the l1 objective is unchanged
    s = np.linalg.norm(M, 2)
    As = M / s
    fs = f / s
    tols = tol / s
    K = As.conj().T
    if m < nb:
        # (I + As^H As)^-1 = I - As^H (I + As As^H)^-1 As
        chol = scipy.linalg.cho_factor(np.eye(m) + As @ K)

        def solve(v):
            return v - K @ scipy.linalg.cho_solve(chol, As @ v)
    else:
        chol = scipy.linalg.cho_factor(np.eye(nb) + K @ As)

        def solve(v):
            return scipy.linalg.cho_solve(chol, v)

    def ball(v):
        d = v - fs
        dn = np.linalg.norm(d)
        return fs + d * (tols / dn) if dn > tols else v

    if state is not None:
        z, y, u, w = (np.array(a, dtype=complex) for a in state[:4])
        y, w = y / s, w / s
        if rho is None:
            rho = state[4]
    else:
        z = np.zeros(nb, complex) if x0 is None else np.array(x0, dtype=complex)
        y = ball(As @ z)
        u = np.zeros(nb, complex)
        w = np.zeros(m, complex)
    if rho is None:
        rho = 0.5 / (np.max(np.abs(K @ fs)) + 1e-300)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        x = solve(z - u + K @ (y - w))
        ax = As @ x
        z = _soft(x + u, 1.0 / rho)
        y = ball(ax + w)
        u = u + x - z
        w = w + ax - y
        if it % 10 == 0:
            res = np.linalg.norm(As @ z - fs)
            gap = np.hypot(np.linalg.norm(x - z), np.linalg.norm(ax - y))
            if res <= tols and gap <= 1e-9 * max(1e-300, np.linalg.norm(z)):
                converged = True
                break
    res = float(np.linalg.norm(As @ z - fs) * s)
    converged = converged or res <= tol
    return BPSolution(z, float(np.sum(np.abs(z))), res, it, converged, (z, y * s, u, w * s, rho))


@dataclass(frozen=True)
class SparseOptions:
    """Basis-pursuit settings on top of :class:`SolverOptions`.

    ``n_basis=None`` picks :func:`default_n_basis` from the initial cycle
    count; ``bp_tol=None`` means ``bp_rel_tol * ||f||_2``.
    """

    n_basis: Optional[int] = None
    bp_tol: Optional[float] = None
    bp_rel_tol: float = 1e-6
    bp_max_iter: int = 3000


def sparse_default_options() -> SolverOptions:
    # steps stall at the basis-pursuit accuracy, so the stop test is looser
    return SolverOptions(M0=2, eps0=None, max_iter=40, transform_mode="nudft")


def _spectrum_from_bp(x, wavenumbers, L):
    return spectral.ThetaSpectrum(x, wavenumbers, L).symmetrized()


def decompose_sparse(samples: Signal, theta0: PhaseFn,
                     opts: Optional[SolverOptions] = None,
                     sparse_opts: SparseOptions = SparseOptions(),
                     truth: Optional[PhaseFn] = None) -> Decomposition:
    """Decompose a signal known only at the points of a :class:`ScatterSet`.

    ``theta0`` lives on the parent uniform grid and so does the result
    (``a0``, ``a1``, ``phase``, ``imf``); ``residual`` is reported at the
    sample points. ``opts.eps0=None`` means ``1e-4 * sqrt(N_f)``.
    """
    if opts is None:
        opts = sparse_default_options()
    grid = samples.grid
    if not isinstance(grid, ScatterSet):
        grid = ScatterSet(np.arange(len(samples)), len(samples))
        samples = Signal(grid, samples.values)
    nf = grid.parent_n
    if theta0.n != nf:
        raise InvalidArgumentError("initial phase must live on the parent grid of the samples")
    theta0.check_monotone()
    if len(samples) < 2 * opts.M0 + 2:
        raise InvalidArgumentError("too few samples for the requested frequency band")
    n_basis = sparse_opts.n_basis or default_n_basis(theta0.cycle_count, nf)
    f = samples.values
    fnorm = np.linalg.norm(f)
    trace = IterTrace()
    idx = grid.indices
    if fnorm == 0.0:
        zeros = np.zeros(nf)
        return Decomposition(zeros, zeros.copy(), theta0, zeros.copy(), np.zeros(len(f)),
                             trace, True, True)
    tol = sparse_opts.bp_tol if sparse_opts.bp_tol is not None else sparse_opts.bp_rel_tol * fnorm
    eps0 = opts.eps0 if opts.eps0 is not None else 1e-4 * np.sqrt(nf)

    def envelope_at(theta, state):
        tb = theta.normalized()
        A = build_matrix(theta, grid, n_basis)
        sol = basis_pursuit(A, f, tol, sparse_opts.bp_max_iter, state=state)
        spec = _spectrum_from_bp(sol.x, A.wavenumbers, theta.cycle_count)
        return envelopes_from_spectrum(spec, tb, theta.cycle_count), sol

    theta = theta0
    state = None
    converged = False
    for it in range(opts.max_iter):
        env, sol = envelope_at(theta, state)
        state = sol.state
        nxt, beta, delta = phase_update(theta, env, opts.M0)
        step = float(np.linalg.norm(nxt.values - theta.values))
        recon = (spectral.inverse_theta_fft(env.mean_hat, theta.normalized().values)
                 + env.a * np.cos(theta.values) - env.b * np.sin(theta.values))
        L = nxt.cycle_count
        fe = l1_freq_error(nxt, truth) if truth is not None else None
        trace.append(IterRecord(it, beta, step, float(np.linalg.norm(f - recon[idx])), L,
                                L - spectral.carrier_index(L), fe,
                                None if fe is None else fe / (TWO_PI * max(opts.M0, 1))))
        log.debug("sparse iter %d beta=%.2f step=%.3e bp_iter=%d", it, beta, step, sol.iterations)
        theta = nxt
        if step < eps0:
            converged = True
            break

    env, sol = envelope_at(theta, state)
    a0, a1, phase = finalize(None, theta, env)
    imf = a1 * np.cos(phase.values)
    residual = f - a0[idx] - imf[idx]
    return Decomposition(a0, a1, phase, imf, residual, trace, converged and sol.converged)


def phase_error(phase: np.ndarray, reference: np.ndarray) -> float:
    """Max deviation between two phases after removing the best multiple of 2*pi."""
    d = np.asarray(phase) - np.asarray(reference)
    shift = TWO_PI * np.round(np.mean(d) / TWO_PI)
    return float(np.max(np.abs(d - shift)))


def relative_phase_error(phase: np.ndarray, reference: np.ndarray) -> float:
    """Phase error as a fraction of one oscillation cycle (``phase_error / 2 pi``)."""
    return phase_error(phase, reference) / TWO_PI


@dataclass
class TrialResult:
    seed: int
    phase_error: float
    relative_phase_error: float
    imf_error: float
    a0_error: float
    a1_error: float
    iterations: int
    success: bool


def trial_seeds(seed: int):
    """Independent (noise, subsample) seeds derived from one trial seed."""
    noise_seed, sample_seed = np.random.SeedSequence(seed).generate_state(2)
    return int(noise_seed), int(sample_seed)


def run_trial(example_id: int, n_samples: int, seed: int, threshold: float,
              n_grid: int = 4096, opts: Optional[SolverOptions] = None,
              sparse_opts: SparseOptions = SparseOptions(),
              theta0: Optional[PhaseFn] = None) -> TrialResult:
    noise_seed, sample_seed = trial_seeds(seed)
    grid = TimeGrid(n_grid)
    signal, truth = gen_example_signal(example_id, grid, noise_seed)
    scatter = subsample_random(grid, n_samples, sample_seed)
    if theta0 is None:
        theta0 = PhaseFn.linear(n_grid, round(truth.phase.cycle_count))
    if truth.noise_sigma > 0 and sparse_opts.bp_tol is None:
        sparse_opts = replace(sparse_opts, bp_tol=truth.noise_sigma * np.sqrt(n_samples))
    dec = decompose_sparse(restrict(signal, scatter), theta0, opts, sparse_opts)
    perr = phase_error(dec.phase.values, truth.phase.values)
    rel = perr / TWO_PI
    return TrialResult(seed, perr, rel, float(np.max(np.abs(dec.imf - truth.imf))),
                       float(np.max(np.abs(dec.a0 - truth.a0))),
                       float(np.max(np.abs(dec.a1 - truth.a1))),
                       dec.iterations, bool(rel <= threshold))


def success_trial(example_id: int, n_samples: int, trials: int, seed0: int,
                  success_threshold: float, **kwargs) -> float:
    """Fraction of seeded trials whose relative phase error is within the threshold."""
    if trials < 1:
        raise InvalidArgumentError("need at least one trial")
    results = [run_trial(example_id, n_samples, seed0 + i, success_threshold, **kwargs)
               for i in range(trials)]
    return sum(r.success for r in results) / trials
