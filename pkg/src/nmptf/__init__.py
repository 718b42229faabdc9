"""Data-driven time-frequency decomposition by nonlinear matching pursuit.

A signal ``f = a0 + a1 cos(theta)`` is split into its mean ``a0``, envelope
``a1`` and phase ``theta``, either from a uniform grid or from a few random
samples via l1 minimization.
"""

__version__ = "0.1.0"

from .errors import (DegenerateEnvelopeError, InputFileError, InvalidArgumentError,
                     InvalidPhaseError, NmpError, NonUniformGridError, ParseError)
from .model import (GroundTruth, PhaseFn, ScatterSet, Signal, TimeGrid, add_gaussian_noise,
                    example_components, gen_example_signal, make_uniform_grid, restrict,
                    subsample_random)
from .spectral import ThetaSpectrum, inverse_theta_fft, theta_fft, theta_nudft
from .solver import (Decomposition, SolverOptions, decompose_well_resolved,
                     initial_phase_guess, peel_imfs)
from .sparse import (SparseOptions, basis_pursuit, build_matrix, decompose_sparse,
                     phase_error, success_trial)
from .probe import (covering_bound, delta_perturbation_bound, estimate_delta_s,
                    fourier_coeff_box_check, mutual_coherence, oscillatory_sum)
