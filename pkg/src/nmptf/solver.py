"""Nonlinear matching pursuit for well-resolved periodic signals.

One iteration: transform the signal to the current phase coordinate, demodulate
the carrier into envelopes ``a``/``b``, turn ``d/dt arctan(b/a)`` into a
band-limited frequency correction, and take the largest step that keeps the
phase monotone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import spectral
from .errors import DegenerateEnvelopeError, InvalidArgumentError
from .model import PhaseFn, Signal, TimeGrid, TWO_PI

log = logging.getLogger(__name__)

TRANSFORM_MODES = ("fft_interp", "nudft")
BETA_LATTICE = np.arange(100, -1, -1) / 100.0
ENVELOPE_FLOOR = 1e-6
# below this fraction of the signal amplitude the carrier band counts as empty
EMPTY_ENVELOPE = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    """Iteration controls.

    ``eps0=None`` means ``1e-8 * sqrt(N)``: the stopping threshold on the
    grid 2-norm of the phase update.
    """

    M0: int = 2
    eps0: Optional[float] = None
    max_iter: int = 200
    transform_mode: str = "fft_interp"

    def __post_init__(self):
        if self.M0 < 0:
            raise InvalidArgumentError("M0 must be nonnegative")
        if self.eps0 is not None and self.eps0 <= 0:
            raise InvalidArgumentError("eps0 must be positive")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be at least 1")
        if self.transform_mode not in TRANSFORM_MODES:
            raise InvalidArgumentError(f"transform_mode must be one of {TRANSFORM_MODES}")

    def tolerance(self, n: int) -> float:
        return self.eps0 if self.eps0 is not None else 1e-8 * np.sqrt(n)


@dataclass(frozen=True)
class IterRecord:
    iteration: int
    beta: float
    step_norm: float
    residual_norm: float
    cycle_count: float
    L_fraction: float
    freq_error: Optional[float] = None
    gamma: Optional[float] = None


@dataclass
class IterTrace:
    records: List[IterRecord] = field(default_factory=list)

    def append(self, rec: IterRecord):
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def __len__(self):
        return len(self.records)


@dataclass
class EnvelopePair:
    a: np.ndarray
    b: np.ndarray
    da: np.ndarray
    db: np.ndarray
    a_hat: spectral.ThetaSpectrum = None
    b_hat: spectral.ThetaSpectrum = None
    mean_hat: spectral.ThetaSpectrum = None


@dataclass
class Decomposition:
    a0: np.ndarray
    a1: np.ndarray
    phase: PhaseFn
    imf: np.ndarray
    residual: np.ndarray
    trace: IterTrace
    converged: bool = True
    empty: bool = False

    @property
    def iterations(self) -> int:
        return len(self.trace)


def beta_max_monotone(theta_prime, delta_theta_prime) -> float:
    """Largest lattice step ``beta`` in {1, 0.99, ..., 0} keeping ``theta' + beta*dtheta' >= 0``."""
    tp = np.asarray(theta_prime, dtype=float)
    dp = np.asarray(delta_theta_prime, dtype=float)
    if tp.shape != dp.shape:
        raise InvalidArgumentError("frequency and correction differ in length")
    ok = np.all(tp[None, :] + BETA_LATTICE[:, None] * dp[None, :] >= 0, axis=1)
    return float(BETA_LATTICE[np.argmax(ok)]) if ok.any() else 0.0


def l1_freq_error(theta: PhaseFn, theta_ref: PhaseFn) -> float:
    """l1 norm of the time-domain Fourier coefficients of ``(theta - theta_ref)'``."""
    if theta.n != theta_ref.n:
        raise InvalidArgumentError("phases live on different grids")
    d = theta.derivative - theta_ref.derivative
    return float(np.sum(np.abs(np.fft.fft(d) / d.size)))


def envelopes(signal: Signal, theta: PhaseFn, mode: str) -> EnvelopePair:
    """Demodulated envelopes on the time grid for the current phase."""
    tb = theta.normalized()
    L = theta.cycle_count
    n = theta.n
    if mode == "nudft":
        spec = spectral.theta_nudft(signal.values, tb.values,
                                    spectral.ThetaSpectrum.fft_layout(n), tb.derivative)
    else:
        spec = spectral.theta_fft(spectral.interp_to_theta_grid(signal, theta))
    return envelopes_from_spectrum(spec, tb, L)


def envelopes_from_spectrum(spec: spectral.ThetaSpectrum, theta_bar: PhaseFn, L: float) -> EnvelopePair:
    a_hat, b_hat = spectral.extract_envelope_spectra(spec, L)
    a, da = spectral.inverse_with_derivative(a_hat, theta_bar)
    b, db = spectral.inverse_with_derivative(b_hat, theta_bar)
    return EnvelopePair(a, b, da, db, a_hat, b_hat, spectral.low_band(spec, L))


def _check_envelope(env: EnvelopePair) -> None:
    power = env.a ** 2 + env.b ** 2
    if np.min(power) < ENVELOPE_FLOOR * np.max(power):
        raise DegenerateEnvelopeError(
            f"envelope nearly vanishes (min/max power {np.min(power) / np.max(power):.2e})")


def phase_update(theta_n: PhaseFn, env: EnvelopePair, M0: int):
    """One phase correction. Returns ``(theta_next, beta, delta_theta)``.

    The arctangent derivative is formed as ``(a b' - b a')/(a^2 + b^2)``,
    projected onto the low modes ``|k| <= M0`` and integrated from 0.
    """
    _check_envelope(env)
    rate = (env.a * env.db - env.b * env.da) / (env.a ** 2 + env.b ** 2)
    d_prime = spectral.project_low_modes(rate, M0)
    delta = spectral.integrate_periodic(d_prime)
    beta = beta_max_monotone(theta_n.derivative, d_prime)
    nxt = PhaseFn(theta_n.values + beta * delta, theta_n.derivative + beta * d_prime)
    return nxt, beta, delta


def finalize(signal_values: np.ndarray, theta: PhaseFn, env: EnvelopePair, times=None):
    """Polar form at exit: ``a1 = |a + ib|`` and ``theta + arg(a + ib)``.

    Returns ``(a0, a1, phase)`` on the phase's grid.
    """
    tb = theta.normalized()
    a0 = spectral.inverse_theta_fft(env.mean_hat, tb.values)
    a1 = np.hypot(env.a, env.b)
    corr = np.unwrap(np.arctan2(env.b, env.a))
    dcorr = (env.a * env.db - env.b * env.da) / np.maximum(a1 ** 2, np.finfo(float).tiny)
    phase = PhaseFn(theta.values + corr, theta.derivative + dcorr)
    return a0, a1, phase


def _empty_decomposition(values, theta, mean, trace):
    zeros = np.zeros_like(values)
    return Decomposition(mean, zeros, theta, zeros.copy(), values - mean, trace,
                         converged=True, empty=True)


def initial_phase_guess(signal: Signal) -> PhaseFn:
    """Linear phase at the dominant nonzero wavenumber of the signal's spectrum.

    Scattered samples are transformed with the direct sum over the parent
    grid's wavenumbers; the result lives on the parent grid.
    """
    t = signal.times
    f = signal.values - signal.values.mean()
    if isinstance(signal.grid, TimeGrid):
        n = signal.grid.n
        power = np.abs(np.fft.rfft(f))[1:]
    else:
        n = signal.grid.parent_n
        k = np.arange(1, n // 2 + 1)
        power = np.abs(np.exp(-2j * np.pi * np.multiply.outer(k, t)) @ f)
    L_hat = int(np.argmax(power)) + 1
    return PhaseFn.linear(n, L_hat)


def decompose_well_resolved(signal: Signal, theta0: Optional[PhaseFn] = None,
                            opts: SolverOptions = SolverOptions(),
                            truth: Optional[PhaseFn] = None,
                            callback: Optional[Callable] = None) -> Decomposition:
    """Recover ``(a0, a1, theta)`` with ``f = a0 + a1 cos(theta)`` on a uniform grid.

    ``truth`` (optional) enables the contraction metric in the trace. A run
    that exhausts ``max_iter`` returns its last iterate with
    ``converged=False``.
    """
    if not isinstance(signal.grid, TimeGrid):
        raise InvalidArgumentError("well-resolved decomposition needs a uniform grid")
    n = signal.grid.n
    values = signal.values
    if theta0 is None:
        theta0 = initial_phase_guess(signal)
    if theta0.n != n:
        raise InvalidArgumentError("initial phase and signal grids differ")
    theta0.check_monotone()
    if theta0.cycle_count < 1 - 1e-9:
        raise InvalidArgumentError("initial phase must complete at least one cycle")

    trace = IterTrace()
    scale = np.max(np.abs(values)) if values.size else 0.0
    if scale == 0.0:
        return _empty_decomposition(values, theta0, np.zeros(n), trace)

    eps0 = opts.tolerance(n)
    theta = theta0
    converged = False
    for it in range(opts.max_iter):
        env = envelopes(signal, theta, opts.transform_mode)
        if np.sqrt(np.max(env.a ** 2 + env.b ** 2)) <= EMPTY_ENVELOPE * scale:
            mean = spectral.inverse_theta_fft(env.mean_hat, theta.normalized().values)
            return _empty_decomposition(values, theta, mean, trace)
        nxt, beta, delta = phase_update(theta, env, opts.M0)
        step = float(np.linalg.norm(nxt.values - theta.values))
        recon = (spectral.inverse_theta_fft(env.mean_hat, theta.normalized().values)
                 + env.a * np.cos(theta.values) - env.b * np.sin(theta.values))
        L = nxt.cycle_count
        fe = l1_freq_error(nxt, truth) if truth is not None else None
        rec = IterRecord(it, beta, step, float(np.linalg.norm(values - recon)), L,
                         L - spectral.carrier_index(L), fe,
                         None if fe is None else fe / (TWO_PI * max(opts.M0, 1)))
        trace.append(rec)
        log.debug("iter %d beta=%.2f step=%.3e", it, beta, step)
        if callback is not None:
            callback(rec, nxt)
        theta = nxt
        if step < eps0:
            converged = True
            break

    env = envelopes(signal, theta, opts.transform_mode)
    a0, a1, phase = finalize(values, theta, env)
    imf = a1 * np.cos(phase.values)
    return Decomposition(a0, a1, phase, imf, values - a0 - imf, trace, converged)


def peel_imfs(signal: Signal, initial_phases: Sequence[PhaseFn],
              opts: SolverOptions = SolverOptions()) -> List[Decomposition]:
    """Extract IMFs one after another, each stage decomposing the previous mean."""
    if len(initial_phases) == 0:
        raise InvalidArgumentError("need at least one initial phase")
    out = []
    current = signal
    tol = opts.tolerance(len(signal))
    for theta0 in initial_phases:
        dec = decompose_well_resolved(current, theta0, opts)
        out.append(dec)
        if np.linalg.norm(dec.a0) <= tol:
            break
        current = Signal(signal.grid, dec.a0)
    return out
