"""Diagnostics for the compressive-sensing side of the method.

Everything here is a check rather than a solver: mutual coherence and
restricted-isometry estimates of warped Fourier matrices, the decay of
warped oscillatory sums, and a few closed-form bounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import mpmath
import numpy as np

from .errors import InvalidArgumentError
from .model import PhaseFn, ScatterSet
from .sparse import SensingMatrix, build_matrix

# supports are enumerated instead of sampled up to this many columns
EXHAUSTIVE_MAX_COLUMNS = 14


@dataclass(frozen=True)
class RipEstimate:
    """Lower estimate of the restricted isometry constant at sparsity ``S``.

    ``exhaustive`` is true when every support of size ``S`` was visited, in
    which case ``delta_lower`` is the exact constant.
    """

    S: int
    delta_lower: float
    trials: int
    seed: int
    exhaustive: bool = False


def _entries(U) -> np.ndarray:
    return U.entries if isinstance(U, SensingMatrix) else np.asarray(U, dtype=complex)


def mutual_coherence(U) -> float:
    """Largest entry of ``|U^H U - I|``; ``U`` should have near unit-norm columns."""
    M = _entries(U)
    G = M.conj().T @ M
    return float(np.max(np.abs(G - np.eye(G.shape[0]))))


def full_grid_matrix(theta: PhaseFn, n_basis: int) -> SensingMatrix:
    """Weighted warped Fourier matrix sampled at every point of the phase's grid."""
    return build_matrix(theta, ScatterSet(np.arange(theta.n), theta.n), n_basis, weighted=True)


def _support_delta(M: np.ndarray, cols) -> float:
    sub = M[:, list(cols)]
    ev = np.linalg.eigvalsh(sub.conj().T @ sub)
    return float(max(ev[-1] - 1.0, 1.0 - ev[0]))


def exhaustive_delta_s(Phi, S: int) -> float:
    """Exact restricted isometry constant by enumerating all supports of size ``S``.

    Supports smaller than ``S`` never give a larger value (eigenvalue
    interlacing), so size ``S`` alone suffices.
    """
    M = _entries(Phi)
    nb = M.shape[1]
    if not 1 <= S <= nb:
        raise InvalidArgumentError(f"sparsity {S} outside 1..{nb}")
    return max(_support_delta(M, T) for T in itertools.combinations(range(nb), S))


def estimate_delta_s(Phi, S: int, trials: int = 200, seed: int = 0,
                     exhaustive: bool | None = None) -> RipEstimate:
    """Monte-Carlo lower bound on ``delta_S``.

    Each trial draws a random permutation of the columns and uses its first
    ``S`` entries as the support, so runs with one seed use nested supports
    across ``S`` and the estimate is nondecreasing in ``S``. With
    ``exhaustive=None`` small instances (at most 14 columns, when the number
    of supports does not exceed ``trials``) are enumerated instead.
    """
    M = _entries(Phi)
    nb = M.shape[1]
    if S < 1 or S > nb:
        raise InvalidArgumentError(f"sparsity {S} outside 1..{nb}")
    if trials < 1:
        raise InvalidArgumentError("need at least one trial")
    if exhaustive is None:
        exhaustive = nb <= EXHAUSTIVE_MAX_COLUMNS and comb(nb, S) <= trials
    if exhaustive:
        if nb > EXHAUSTIVE_MAX_COLUMNS:
            raise InvalidArgumentError(
                f"exhaustive search limited to {EXHAUSTIVE_MAX_COLUMNS} columns, got {nb}")
        return RipEstimate(S, exhaustive_delta_s(M, S), comb(nb, S), seed, True)
    rng = np.random.default_rng(seed)
    delta = 0.0
    for _ in range(trials):
        delta = max(delta, _support_delta(M, rng.permutation(nb)[:S]))
    return RipEstimate(S, delta, trials, seed, False)


def _mode_coeffs(samples: np.ndarray):
    """One-sided Fourier coefficients ``F_j``, ``j = 0..n/2``, of periodic samples."""
    return np.fft.rfft(samples) / samples.size


def _band_limit(coeffs: np.ndarray, rel: float = 1e-12) -> int:
    mag = np.abs(coeffs[1:])
    if mag.size == 0 or not np.any(mag > rel * max(1.0, abs(coeffs[0]))):
        return 0
    return int(np.nonzero(mag > rel * max(1.0, abs(coeffs[0])))[0][-1]) + 1


def _oscillatory_sum_mp(coeffs: np.ndarray, M0: int, k: int, L: int, dps: int) -> complex:
    """The sum for the band-limited profile with one-sided coefficients ``coeffs[:M0+1]``.

    The mean is renormalized to exactly one so the phase runs from 0 to 1.
    """
    with mpmath.workdps(dps):
        G = [mpmath.mpc(complex(c)) / mpmath.mpf(float(coeffs[0].real)) for c in coeffs[1:M0 + 1]]
        two_pi = 2 * mpmath.pi

        def prof(t):
            return 1 + sum(2 * mpmath.re(g * mpmath.expjpi(2 * j * t)) for j, g in enumerate(G, 1))

        def phase(t):
            # antiderivative of prof, zero at t = 0
            return t + sum(2 * mpmath.re(g * (mpmath.expjpi(2 * j * t) - 1) / (1j * two_pi * j))
                           for j, g in enumerate(G, 1))

        total = mpmath.mpc(0)
        for j in range(L):
            t = mpmath.mpf(j) / L
            total += prof(t) * mpmath.expj(two_pi * k * phase(t))
        return complex(total / L)


def oscillatory_sum(phi: PhaseFn, k: int, L: int, n: int = 1, dps: int | None = None):
    """Warped exponential sum on the ``L``-point grid and its decay envelope.

    ``phi`` is rescaled to run from 0 to 1 first. Returns ``(value, bound)``
    with

        value = (1/L) sum_j phi'(t_j) exp(i 2 pi k phi(t_j)),  t_j = j/L
        bound = max((k ||F(phi')||_1 / L)^n, (2 M0 / L)^n)

    where ``F(phi')`` are the Fourier coefficients of ``phi'`` and ``M0``
    its band limit. The bound leaves out an ``n``-dependent constant, so
    only ``|value| / bound`` staying bounded in ``L`` is meaningful.

    For smooth phases the sum decays faster than any power of ``1/L`` and
    sinks below double-precision roundoff once ``L`` is a few times the
    band limit of ``phi' e^{i 2 pi k phi}``. With ``dps`` set, the sum is
    evaluated with that many decimal digits for the band-limited profile
    given by the low Fourier modes of ``phi'``; the profile must then be
    resolved by its samples.
    """
    if L < 1 or int(L) != L:
        raise InvalidArgumentError("L must be a positive integer")
    if n < 1:
        raise InvalidArgumentError("decay order n must be at least 1")
    p = phi.normalized()
    t = np.arange(L) / L
    phase = p.evaluate(t)
    rate = p.evaluate_derivative(t)
    F = _mode_coeffs(p.derivative)
    M0 = _band_limit(F)
    if dps is None:
        value = complex(np.mean(rate * np.exp(2j * np.pi * k * phase)))
    else:
        if 2 * M0 >= p.n:
            raise InvalidArgumentError("profile is not band-limited on its grid")
        value = _oscillatory_sum_mp(F, M0, k, L, dps)

    c = np.fft.fft(p.derivative) / p.n
    norm1 = float(np.sum(np.abs(c)))
    bound = max((abs(k) * norm1 / L) ** n, (2 * M0 / L) ** n)
    return value, bound


def covering_bound(M0: int, r: float, sharp: bool = False) -> float:
    """Cardinality bound for an ``r``-net of the admissible phase derivatives."""
    if M0 < 1:
        raise InvalidArgumentError("M0 must be a positive integer")
    if r <= 0:
        raise InvalidArgumentError("radius must be positive")
    if sharp:
        return float((8 * np.pi * M0 ** 2 / r ** 2) ** M0)
    return float((16 * np.pi * M0 ** 2 / r + 1) ** (2 * M0))


def delta_perturbation_bound(eps: float, M: int, S: int) -> float:
    """Bound on ``|delta_S(A) - delta_S(B)|`` when every entry moves by at most ``eps``."""
    if eps < 0:
        raise InvalidArgumentError("eps must be nonnegative")
    return (2 * eps * np.sqrt(M) + eps ** 2 * M) * S


def fourier_coeff_box_check(phi_prime, M0: int | None = None, tol: float = 1e-9) -> bool:
    """Check the coefficient box of a positive, mean-one frequency profile.

    Writing ``phi' = 1 + sum_j c_j cos(2 pi j t) + d_j sin(2 pi j t)``, the
    check is ``c_j^2 + d_j^2 <= 4`` for all ``j`` and ``max phi' <= 4 M0 + 1``.
    ``M0`` defaults to the band limit of the samples.
    """
    v = np.asarray(phi_prime, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise InvalidArgumentError("need a vector of periodic samples")
    F = _mode_coeffs(v)
    if abs(F[0].real - 1.0) > 1e-9:
        raise InvalidArgumentError(f"profile must have mean 1, got {F[0].real:.12g}")
    if M0 is None:
        M0 = _band_limit(F)
    # c_j^2 + d_j^2 = 4 |F_j|^2 for the one-sided coefficients
    pairs = 4 * np.abs(F[1:]) ** 2
    if v.size % 2 == 0:
        pairs[-1] /= 4  # the Nyquist term is not doubled
    return bool(np.all(pairs <= 4 + tol) and np.max(v) <= 4 * M0 + 1 + tol)
