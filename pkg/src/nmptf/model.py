"""Domain types, synthetic benchmark signals and sampling utilities.

All signals live on the periodic domain [0, 1). Random draws use numpy's
``Generator`` backed by PCG64, seeded with the integer passed by the caller,
so every trial is bit-reproducible across runs on the same numpy version.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InvalidArgumentError, InvalidPhaseError

TWO_PI = 2.0 * np.pi


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_j = j / n`` for ``j = 0 .. n-1``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidArgumentError(f"grid size must be an integer >= 2, got {self.n}")

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class ScatterSet:
    """A sorted subset of the points of a uniform parent grid."""

    indices: np.ndarray
    parent_n: int

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidArgumentError("scatter set needs a non-empty 1-D index array")
        if not np.issubdtype(idx.dtype, np.integer):
            if not np.all(idx == np.round(idx)):
                raise InvalidArgumentError("scatter indices must be integers")
            idx = idx.astype(np.int64)
        if np.any(np.diff(idx) <= 0):
            raise InvalidArgumentError("scatter indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.parent_n:
            raise InvalidArgumentError("scatter indices out of range of the parent grid")
        object.__setattr__(self, "indices", _frozen(idx, np.int64))

    @property
    def times(self) -> np.ndarray:
        return self.indices / self.parent_n

    @property
    def parent(self) -> TimeGrid:
        return TimeGrid(self.parent_n)

    def __len__(self):
        return self.indices.size


Grid = Union[TimeGrid, ScatterSet]


@dataclass(frozen=True)
class Signal:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise InvalidArgumentError(
                f"signal has {v.size} values for a grid of {len(self.grid)} points")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("signal values must be finite")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def times(self) -> np.ndarray:
        if isinstance(self.grid, TimeGrid):
            return self.grid.points
        return self.grid.times

    def __len__(self):
        return self.values.size


def _trig_eval(samples: np.ndarray, t) -> np.ndarray:
    """Evaluate the trigonometric interpolant of periodic samples at ``t``."""
    n = samples.size
    c = np.fft.fft(samples) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        # split the Nyquist mode symmetrically so real data stays real
        c = c.copy()
        c[n // 2] *= 0.5
        c = np.append(c, c[n // 2])
        k = np.append(k, n // 2)
        k[n // 2] = -n // 2
    # modes below roundoff of the largest one cannot change the result
    keep = np.abs(c) > 1e-16 * np.max(np.abs(c), initial=0.0)
    t = np.asarray(t, dtype=float)
    if not keep.any():
        return np.zeros(t.shape)
    out = np.exp(2j * np.pi * np.multiply.outer(t, k[keep])) @ c[keep]
    return out.real


@dataclass(frozen=True)
class PhaseFn:
    """Phase function sampled on a uniform grid.

    ``derivative`` is the instantaneous frequency in radians per unit time.
    The cycle count ``L`` is the mean of the derivative over one period
    divided by 2*pi, which is exact for band-limited frequencies.
    """

    values: np.ndarray
    derivative: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        d = np.asarray(self.derivative, dtype=float)
        if v.ndim != 1 or v.shape != d.shape or v.size < 2:
            raise InvalidArgumentError("phase values and derivative must be equal-length vectors")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(d))):
            raise InvalidPhaseError("phase contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "derivative", _frozen(d))

    @classmethod
    def linear(cls, n: int, cycles: float, offset: float = 0.0) -> "PhaseFn":
        t = np.arange(n) / n
        return cls(offset + TWO_PI * cycles * t, np.full(n, TWO_PI * cycles))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.n)

    @property
    def cycle_count(self) -> float:
        return float(np.mean(self.derivative)) / TWO_PI

    L = cycle_count

    def check_monotone(self, tol: float = 1e-12) -> None:
        scale = max(float(np.max(np.abs(self.derivative))), 1.0)
        if np.min(self.derivative) < -tol * scale:
            raise InvalidPhaseError("phase is not monotone (negative instantaneous frequency)")
        if self.cycle_count <= 0:
            raise InvalidPhaseError("phase must increase over the period")

    def periodic_part(self) -> np.ndarray:
        t = np.arange(self.n) / self.n
        return self.values - self.values[0] - TWO_PI * self.cycle_count * t

    def evaluate(self, t) -> np.ndarray:
        """Phase at arbitrary times (linear trend plus trigonometric interpolant)."""
        t = np.asarray(t, dtype=float)
        return self.values[0] + TWO_PI * self.cycle_count * t + _trig_eval(self.periodic_part(), t)

    def evaluate_derivative(self, t) -> np.ndarray:
        return _trig_eval(self.derivative, t)

    def normalized(self) -> "PhaseFn":
        """Return ``theta_bar = (theta - theta(0)) / (2 pi L)``, which runs from 0 to 1."""
        self.check_monotone()
        scale = TWO_PI * self.cycle_count
        return PhaseFn((self.values - self.values[0]) / scale, self.derivative / scale)


@dataclass(frozen=True)
class GroundTruth:
    a0: np.ndarray
    a1: np.ndarray
    phase: PhaseFn
    noise_sigma: float = 0.0
    noise: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("a0", "a1"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (self.a0.shape == self.a1.shape == self.phase.values.shape):
            raise InvalidArgumentError("ground-truth components must share one grid")
        if np.any(self.a1 <= 0):
            raise InvalidArgumentError("envelope must be strictly positive")
        if self.noise_sigma < 0:
            raise InvalidArgumentError("noise_sigma must be nonnegative")

    @property
    def imf(self) -> np.ndarray:
        return self.a1 * np.cos(self.phase.values)

    @property
    def clean(self) -> np.ndarray:
        return self.a0 + self.imf


def make_uniform_grid(n: int) -> TimeGrid:
    return TimeGrid(n)


def _phase_ex1(t):
    theta = 20 * np.pi * t + 2 * np.cos(TWO_PI * t) + 2 * np.sin(4 * np.pi * t)
    dtheta = 20 * np.pi - 4 * np.pi * np.sin(TWO_PI * t) + 8 * np.pi * np.cos(4 * np.pi * t)
    return theta, dtheta


def _phase_ex2(t):
    theta = 200 * np.pi * t - 10 * np.cos(TWO_PI * t) - 2 * np.sin(4 * np.pi * t)
    dtheta = 200 * np.pi + 20 * np.pi * np.sin(TWO_PI * t) - 8 * np.pi * np.cos(4 * np.pi * t)
    return theta, dtheta


def example_components(example_id: int, t):
    """Analytic ``(a0, a1, theta, theta')`` of a benchmark example at times ``t``."""
    t = np.asarray(t, dtype=float)
    if example_id == 1:
        theta, dtheta = _phase_ex1(t)
        tb = theta / 10
        a0 = 2 + np.cos(tb) + 2 * np.sin(2 * tb) + np.cos(3 * tb)
        a1 = 3 + np.cos(tb) + np.sin(3 * tb)
    elif example_id == 2:
        theta, dtheta = _phase_ex2(t)
        tb = theta / 100
        a0 = np.cos(tb)
        a1 = 3 + np.cos(tb) + np.sin(2 * tb)
    elif example_id == 3:
        theta, dtheta = _phase_ex2(t)
        theta = theta + 0.1 * np.sin(120 * np.pi * t)
        dtheta = dtheta + 12 * np.pi * np.cos(120 * np.pi * t)
        a0 = np.cos(TWO_PI * t)
        a1 = 3 + np.cos(TWO_PI * t) + np.sin(4 * np.pi * t)
    else:
        raise InvalidArgumentError(f"unknown example id {example_id!r}; expected 1, 2 or 3")
    return a0, a1, theta, dtheta


EXAMPLE_NOISE = {1: 0.0, 2: 0.0, 3: 0.1}


def gen_example_signal(example_id: int, grid: TimeGrid, seed: int = 0,
                       noise_sigma: float | None = None):
    """Sample benchmark example 1, 2 or 3 on ``grid``.

    Only example 3 is noisy by default (sigma 0.1); pass ``noise_sigma=0`` to
    get its clean version. Returns ``(Signal, GroundTruth)``.
    """
    if example_id not in EXAMPLE_NOISE:
        raise InvalidArgumentError(f"unknown example id {example_id!r}; expected 1, 2 or 3")
    if not isinstance(grid, TimeGrid):
        raise InvalidArgumentError("examples are generated on a uniform TimeGrid")
    sigma = EXAMPLE_NOISE[example_id] if noise_sigma is None else float(noise_sigma)
    a0, a1, theta, dtheta = example_components(example_id, grid.points)
    truth_phase = PhaseFn(theta, dtheta)
    clean = Signal(grid, a0 + a1 * np.cos(theta))
    signal = add_gaussian_noise(clean, sigma, seed) if sigma > 0 else clean
    truth = GroundTruth(a0, a1, truth_phase, sigma, signal.values - clean.values)
    return signal, truth


def subsample_random(grid: TimeGrid, count: int, seed: int) -> ScatterSet:
    """Draw ``count`` distinct grid indices uniformly without replacement."""
    if count < 1 or count > grid.n:
        raise InvalidArgumentError(f"cannot draw {count} samples from a grid of {grid.n}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(grid.n, size=count, replace=False))
    return ScatterSet(idx, grid.n)


def restrict(signal: Signal, samples: ScatterSet) -> Signal:
    """Values of a uniform-grid signal at the points of a scatter set."""
    if not isinstance(signal.grid, TimeGrid) or signal.grid.n != samples.parent_n:
        raise InvalidArgumentError("scatter set does not belong to the signal's grid")
    return Signal(samples, signal.values[samples.indices])


def add_gaussian_noise(signal: Signal, sigma: float, seed: int) -> Signal:
    if sigma < 0:
        raise InvalidArgumentError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(signal))
    return Signal(signal.grid, signal.values + sigma * noise)
