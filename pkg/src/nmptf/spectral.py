"""Fourier analysis in the normalized-phase coordinate.

Spectra are stored over a contiguous, ascending integer wavenumber range; the
FFT layout is ``-N/2+1 .. N/2``. Forward transforms carry the ``1/N``
quadrature factor and inverse transforms are plain sums, so the two round-trip
exactly on the uniform phase mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidArgumentError, InvalidPhaseError
from .model import PhaseFn, Signal, TimeGrid

# evaluation matrices are built in slabs of at most this many entries
_CHUNK = 1 << 21


@dataclass(frozen=True)
class ThetaSpectrum:
    coeffs: np.ndarray
    wavenumbers: np.ndarray
    cycle_count: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        k = np.asarray(self.wavenumbers, dtype=np.int64)
        if c.shape != k.shape or c.ndim != 1:
            raise InvalidArgumentError("coefficients and wavenumbers must match")
        if k.size > 1 and np.any(np.diff(k) != 1):
            raise InvalidArgumentError("wavenumbers must be a contiguous ascending range")
        c.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "wavenumbers", k)

    @classmethod
    def fft_layout(cls, n: int) -> np.ndarray:
        return np.arange(-n // 2 + 1, n // 2 + 1)

    def at(self, omega) -> np.ndarray:
        """Coefficient at integer wavenumber(s); zero outside the stored range."""
        omega = np.asarray(omega, dtype=np.int64)
        pos = omega - self.wavenumbers[0]
        inside = (pos >= 0) & (pos < self.coeffs.size)
        out = np.zeros(omega.shape, dtype=complex)
        out[inside] = self.coeffs[pos[inside]]
        return out

    def with_coeffs(self, coeffs) -> "ThetaSpectrum":
        return ThetaSpectrum(coeffs, self.wavenumbers, self.cycle_count)

    def symmetrized(self) -> "ThetaSpectrum":
        """Project onto conjugate-symmetric spectra (those of real functions)."""
        mirror = np.conj(self.at(-self.wavenumbers))
        has_pair = (-self.wavenumbers >= self.wavenumbers[0]) & (-self.wavenumbers <= self.wavenumbers[-1])
        c = np.where(has_pair, 0.5 * (self.coeffs + mirror), self.coeffs)
        return self.with_coeffs(c)


def normalize_phase(theta: PhaseFn):
    """Return ``(theta_bar, L)`` with ``theta_bar = (theta - theta(0)) / (2 pi L)``."""
    theta.check_monotone()
    return theta.normalized(), theta.cycle_count


def _exp_matrix_apply(points, wavenumbers, vec, sign):
    """``sum_k vec_k exp(sign*i*2*pi*k*points_j)`` or its transpose, chunked."""
    points = np.asarray(points, dtype=float)
    wavenumbers = np.asarray(wavenumbers, dtype=float)
    rows = max(1, _CHUNK // max(1, wavenumbers.size))
    out = np.empty(points.size, dtype=complex)
    for start in range(0, points.size, rows):
        p = points[start:start + rows]
        out[start:start + rows] = np.exp(sign * 2j * np.pi * np.multiply.outer(p, wavenumbers)) @ vec
    return out


def theta_fft(values) -> ThetaSpectrum:
    """Coefficients ``(1/N) sum_j v_j exp(-i 2 pi w j/N)`` for ``w = -N/2+1 .. N/2``."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n % 2 or n < 2:
        raise InvalidArgumentError(f"theta_fft needs an even length, got {n}")
    k = ThetaSpectrum.fft_layout(n)
    c = np.fft.fft(v) / n
    return ThetaSpectrum(c[k % n], k)


def inverse_theta_fft(spectrum: ThetaSpectrum, theta_bar_points) -> np.ndarray:
    """Real part of ``sum_w c(w) exp(i 2 pi w theta_bar)`` at arbitrary points."""
    return _inverse(spectrum, theta_bar_points).real


def _inverse(spectrum: ThetaSpectrum, points, weights=None) -> np.ndarray:
    c = spectrum.coeffs if weights is None else spectrum.coeffs * weights
    keep = np.flatnonzero(c)
    points = np.asarray(points, dtype=float)
    if keep.size == 0:
        return np.zeros(points.shape, dtype=complex)
    return _exp_matrix_apply(points.ravel(), spectrum.wavenumbers[keep], c[keep], +1).reshape(points.shape)


def inverse_with_derivative(spectrum: ThetaSpectrum, theta_bar: PhaseFn, times=None):
    """Evaluate a spectrum and its time derivative along a normalized phase.

    Uses ``d/dt exp(i 2 pi w theta_bar(t)) = i 2 pi w theta_bar'(t) exp(...)``.
    With ``times=None`` the grid points of ``theta_bar`` are used.
    """
    if times is None:
        tb, dtb = theta_bar.values, theta_bar.derivative
    else:
        tb, dtb = theta_bar.evaluate(times), theta_bar.evaluate_derivative(times)
    value = _inverse(spectrum, tb).real
    slope = (_inverse(spectrum, tb, 2j * np.pi * spectrum.wavenumbers) * dtb).real
    return value, slope


def theta_nudft(values, theta_bar, wavenumbers, derivative=None) -> ThetaSpectrum:
    """Direct non-uniform transform ``sum_j w_j f_j exp(-i 2 pi k theta_bar_j)``.

    For samples on a uniform time grid pass ``derivative`` (``theta_bar'`` at
    the samples): the weights ``theta_bar'/N`` turn the sum into the rectangle
    rule for the integral over ``d theta_bar``. Without it the weights are 1.
    """
    f = np.asarray(values, dtype=float)
    tb = np.asarray(theta_bar, dtype=float)
    if f.shape != tb.shape:
        raise InvalidArgumentError("samples and phase values differ in length")
    if tb.size and (tb.min() < -1e-9 or tb.max() > 1 + 1e-9):
        raise InvalidPhaseError("normalized phase must lie in [0, 1]")
    w = f if derivative is None else f * np.asarray(derivative, dtype=float) / f.size
    k = np.asarray(wavenumbers, dtype=np.int64)
    coeffs = np.empty(k.size, dtype=complex)
    cols = max(1, _CHUNK // max(1, tb.size))
    for start in range(0, k.size, cols):
        kk = k[start:start + cols].astype(float)
        coeffs[start:start + cols] = w @ np.exp(-2j * np.pi * np.multiply.outer(tb, kk))
    return ThetaSpectrum(coeffs, k)


def cutoff_chi(omega_over_L) -> np.ndarray | int:
    x = np.asarray(omega_over_L, dtype=float)
    out = ((x > -0.5) & (x < 0.5)).astype(int)
    return int(out) if out.ndim == 0 else out


def carrier_index(L: float) -> int:
    """Integer carrier wavenumber used for spectral shifts (``L`` rounded)."""
    return int(np.floor(L + 0.5))


def extract_envelope_spectra(spectrum: ThetaSpectrum, L: float):
    """Demodulate the carrier at ``+-L``: returns the spectra of ``a`` and ``b``.

    ``a_hat(w) = (r(w+L) + r(w-L)) chi(w/L)``,
    ``b_hat(w) = -i (r(w+L) - r(w-L)) chi(w/L)``, so that the band around the
    carrier reads ``a cos(2 pi L theta_bar) - b sin(2 pi L theta_bar)``.
    """
    if L < 1 - 1e-9:
        raise InvalidArgumentError(f"cycle count must be >= 1, got {L}")
    Lr = carrier_index(L)
    w = spectrum.wavenumbers
    up, down = spectrum.at(w + Lr), spectrum.at(w - Lr)
    chi = cutoff_chi(w / Lr)
    a_hat = (up + down) * chi
    b_hat = -1j * (up - down) * chi
    return (ThetaSpectrum(a_hat, w, L), ThetaSpectrum(b_hat, w, L))


def low_band(spectrum: ThetaSpectrum, L: float) -> ThetaSpectrum:
    """The part of the spectrum kept by ``chi(w/L)``, i.e. the local mean."""
    Lr = carrier_index(L)
    return spectrum.with_coeffs(spectrum.coeffs * cutoff_chi(spectrum.wavenumbers / Lr))


def _inverse_normalized_phase(theta_bar: PhaseFn, targets: np.ndarray, iters: int = 30) -> np.ndarray:
    """Solve ``theta_bar(t) = s`` for each target ``s`` by safeguarded Newton."""
    n = theta_bar.n
    t_grid = np.arange(n + 1) / n
    tb_grid = np.append(theta_bar.values, 1.0)
    t = np.interp(targets, tb_grid, t_grid)
    for _ in range(iters):
        g = theta_bar.evaluate(t) - targets
        d = theta_bar.evaluate_derivative(t)
        step = g / d
        t = t - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return t


def interp_to_theta_grid(signal: Signal, theta: PhaseFn) -> np.ndarray:
    """Resample a uniform-grid signal at the N points where ``theta_bar = j/N``.

    The inverse phase map is solved to machine precision; the only
    approximation is the periodic cubic spline through the signal samples.
    """
    if not isinstance(signal.grid, TimeGrid) or signal.grid.n != theta.n:
        raise InvalidArgumentError("signal and phase must share a uniform grid")
    if np.min(theta.derivative) <= 0:
        raise InvalidPhaseError("interpolation to the phase mesh needs theta' > 0")
    tb = theta.normalized()
    n = theta.n
    targets = np.arange(n) / n
    t_star = _inverse_normalized_phase(tb, targets)
    knots = np.append(signal.times, 1.0)
    spline = CubicSpline(knots, np.append(signal.values, signal.values[0]), bc_type="periodic")
    return spline(np.mod(t_star, 1.0))


def project_low_modes(values, M0: int) -> np.ndarray:
    """L2 projection of uniform-grid samples onto ``span{exp(i 2 pi k t), |k| <= M0}``."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if M0 < 0 or M0 >= n / 2:
        raise InvalidArgumentError(f"M0 must satisfy 0 <= M0 < N/2, got M0={M0}, N={n}")
    c = np.fft.rfft(v)
    c[M0 + 1:] = 0
    return np.fft.irfft(c, n)


def integrate_periodic(derivative) -> np.ndarray:
    """``int_0^t g(s) ds`` on the grid for a band-limited periodic ``g``."""
    g = np.asarray(derivative, dtype=float)
    n = g.size
    t = np.arange(n) / n
    c = np.fft.fft(g) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    mean = c[0].real
    c[0] = 0
    if n % 2 == 0:
        c[n // 2] = 0
    nz = k != 0
    prim = np.zeros(n, dtype=complex)
    prim[nz] = c[nz] / (2j * np.pi * k[nz])
    periodic = np.fft.ifft(prim * n).real
    return mean * t + periodic - periodic[0]


def spectral_derivative(values) -> np.ndarray:
    """Derivative of periodic uniform-grid samples on [0, 1) via FFT."""
    v = np.asarray(values, dtype=float)
    n = v.size
    c = np.fft.rfft(v)
    k = np.arange(c.size)
    c = c * (2j * np.pi * k)
    if n % 2 == 0:
        c[-1] = 0
    return np.fft.irfft(c, n)


def envelope_error_bounds(f0_hat: ThetaSpectrum, a_hat: ThetaSpectrum,
                          b_hat: ThetaSpectrum, L: float):
    """Right-hand sides of the spectral envelope-error estimates.

    Inputs are the exact spectra (in the current phase coordinate) of the
    mean ``f0`` and of ``a = f1 cos(dtheta)``, ``b = f1 sin(dtheta)``.
    Returns ``(bound_a, bound_b)`` bounding ``max |a - a_rec|`` and
    ``max |b - b_rec|``. Band edges are taken inclusively, which only
    enlarges the sums.
    """
    Lr = carrier_index(L)
    k = f0_hat.wavenumbers
    mid = (k >= Lr / 2) & (k <= 1.5 * Lr)
    far = (np.abs(k) >= 1.5 * Lr) & (np.abs(k) <= 2.5 * Lr)
    tail = np.abs(k) >= Lr / 2
    f0 = np.abs(f0_hat.at(k))
    fa, fb = np.abs(a_hat.at(k)), np.abs(b_hat.at(k))
    f0_mid = f0[mid].sum() + f0[(-k >= Lr / 2) & (-k <= 1.5 * Lr)].sum()
    # both signs of the 2L-shifted bands enter with weight 1/2
    common = f0_mid + 0.5 * (fa[far].sum() + fb[far].sum())
    return common + fa[tail].sum(), common + fb[tail].sum()
