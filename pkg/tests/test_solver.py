import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmptf import spectral
from nmptf.errors import DegenerateEnvelopeError, InvalidArgumentError
from nmptf.model import PhaseFn, Signal, TimeGrid, gen_example_signal
from nmptf.solver import (BETA_LATTICE, EnvelopePair, SolverOptions, beta_max_monotone,
                          decompose_well_resolved, initial_phase_guess, l1_freq_error,
                          peel_imfs, phase_update)
from nmptf.sparse import phase_error

TWO_PI = 2 * np.pi


@pytest.fixture(scope="module")
def ex1():
    return gen_example_signal(1, TimeGrid(256))


def _lattice_scan(tp, dp):
    for beta in BETA_LATTICE:
        if np.all(tp + beta * dp >= 0):
            return beta
    return 0.0


def test_beta_examples():
    assert beta_max_monotone(np.ones(8), np.zeros(8)) == 1.0
    assert beta_max_monotone(np.ones(8), np.full(8, -2.0)) == 0.5


@pytest.mark.parametrize("case", range(100))
def test_beta_matches_lattice_scan(case):
    rng = np.random.default_rng(case)
    tp = rng.uniform(0.01, 3, 40)
    dp = rng.normal(0, 2, 40)
    assert beta_max_monotone(tp, dp) == _lattice_scan(tp, dp)


def _pair(a, b, n):
    return EnvelopePair(a, b, spectral.spectral_derivative(a), spectral.spectral_derivative(b))


def test_phase_update_converged_state():
    n = 64
    theta = PhaseFn.linear(n, 4)
    nxt, beta, delta = phase_update(theta, _pair(np.full(n, 2.0), np.zeros(n), n), 2)
    assert beta == 1.0 and np.all(delta == 0)
    assert np.array_equal(nxt.values, theta.values)


def test_phase_update_recovers_arctan():
    n = 128
    t = np.arange(n) / n
    phi = 0.1 * np.sin(TWO_PI * t)
    _, _, delta = phase_update(PhaseFn.linear(n, 4), _pair(np.cos(phi), np.sin(phi), n), 1)
    assert np.max(np.abs(delta - phi)) <= 1e-8


def test_phase_update_degenerate():
    n = 32
    a = np.cos(TWO_PI * np.arange(n) / n)
    with pytest.raises(DegenerateEnvelopeError):
        phase_update(PhaseFn.linear(n, 4), _pair(a, np.zeros(n), n), 2)


def test_l1_freq_error_examples(ex1):
    _, truth = ex1
    n = 256
    t = np.arange(n) / n
    ref = PhaseFn.linear(n, 10)
    assert l1_freq_error(ref, ref) == 0
    bumped = PhaseFn(ref.values + np.sin(TWO_PI * t), ref.derivative + TWO_PI * np.cos(TWO_PI * t))
    assert l1_freq_error(bumped, ref) == pytest.approx(TWO_PI, rel=1e-12)
    assert l1_freq_error(truth.phase, ref) == pytest.approx(12 * np.pi, rel=1e-12)


def test_ex1_exact_recovery_nudft(ex1):
    sig, truth = ex1
    dec = decompose_well_resolved(sig, PhaseFn.linear(256, 10), SolverOptions(transform_mode="nudft"))
    assert dec.converged
    assert np.max(np.abs(dec.imf - truth.imf)) <= 1e-8
    assert phase_error(dec.phase.values, truth.phase.values) <= 1e-8
    assert np.max(np.abs(dec.a0 - truth.a0)) <= 1e-8


@pytest.mark.parametrize("n,lo,hi", [(256, 1e-5, 1e-3), (1024, 1e-8, 1e-6)])
def test_ex1_interpolation_error_level(n, lo, hi):
    sig, truth = gen_example_signal(1, TimeGrid(n))
    dec = decompose_well_resolved(sig, PhaseFn.linear(n, 10), SolverOptions(transform_mode="fft_interp"))
    err = max(np.max(np.abs(dec.imf - truth.imf)), phase_error(dec.phase.values, truth.phase.values))
    assert lo <= err <= hi


def test_invariants_along_run(ex1):
    sig, truth = ex1
    mins = []
    dec = decompose_well_resolved(sig, PhaseFn.linear(256, 10), SolverOptions(transform_mode="nudft"),
                                  truth.phase, callback=lambda rec, th: mins.append(th.derivative.min()))
    assert min(mins) >= -1e-12
    assert np.max(np.abs(dec.a0 + dec.a1 * np.cos(dec.phase.values) + dec.residual - sig.values)) <= 1e-10
    assert np.max(np.abs(np.diff(dec.phase.values))) < np.pi


def test_contraction_default_band(ex1):
    sig, truth = ex1
    theta0 = PhaseFn.linear(256, 10)
    dec = decompose_well_resolved(sig, theta0, SolverOptions(transform_mode="nudft"), truth.phase)
    seq = np.concatenate([[l1_freq_error(theta0, truth.phase)], dec.trace.column("freq_error")])
    floor = 1e-8
    for prev, cur in zip(seq[:-1], seq[1:]):
        if prev <= floor:
            break
        assert cur <= 0.9 * prev


@pytest.mark.xfail(strict=True, reason="a 24-mode correction band is not separated from a carrier "
                                       "with 10 cycles, so the iteration has no contraction there")
def test_contraction_wide_band(ex1):
    sig, truth = ex1
    theta0 = PhaseFn.linear(256, 10)
    dec = decompose_well_resolved(sig, theta0, SolverOptions(M0=24, transform_mode="nudft"), truth.phase)
    seq = np.concatenate([[l1_freq_error(theta0, truth.phase)], dec.trace.column("freq_error")])
    assert np.all(np.diff(seq[:5]) < 0)


def test_determinism(ex1):
    sig, _ = ex1
    runs = [decompose_well_resolved(sig, PhaseFn.linear(256, 10)) for _ in range(2)]
    assert runs[0].trace.records == runs[1].trace.records
    assert np.array_equal(runs[0].imf, runs[1].imf)


def test_default_initial_guess(ex1):
    sig, truth = ex1
    # the envelope modulation puts the largest peak one bin off the mean frequency
    assert abs(initial_phase_guess(sig).cycle_count - 10) <= 1
    dec = decompose_well_resolved(sig)
    assert dec.phase.cycle_count == pytest.approx(10)
    assert np.max(np.abs(dec.imf - truth.imf)) <= 1e-3


def test_not_converged_flag(ex1):
    sig, _ = ex1
    dec = decompose_well_resolved(sig, PhaseFn.linear(256, 10), SolverOptions(max_iter=1))
    assert not dec.converged and dec.iterations == 1


def test_bad_inputs(ex1):
    sig, _ = ex1
    with pytest.raises(InvalidArgumentError):
        decompose_well_resolved(sig, PhaseFn.linear(128, 10))
    with pytest.raises(InvalidArgumentError):
        SolverOptions(transform_mode="spline")
    with pytest.raises(InvalidArgumentError):
        SolverOptions(M0=-1)


def test_peel_single_stage(ex1):
    sig, truth = ex1
    out = peel_imfs(sig, [PhaseFn.linear(256, 10)], SolverOptions(transform_mode="nudft"))
    assert len(out) == 1
    assert np.max(np.abs(out[0].a0 - truth.a0)) <= 1e-8


def test_peel_second_stage_from_recovered_phase_is_empty(ex1):
    sig, _ = ex1
    opts = SolverOptions(transform_mode="nudft")
    first = decompose_well_resolved(sig, PhaseFn.linear(256, 10), opts)
    two = peel_imfs(sig, [PhaseFn.linear(256, 10), first.phase], opts)
    assert len(two) == 2 and two[1].empty
    assert np.linalg.norm(two[1].imf) <= 1e-6


@pytest.mark.xfail(strict=True, reason="in the linear coordinate the mean keeps about 2% of its "
                                       "amplitude near the carrier and the iteration locks onto it")
def test_peel_second_stage_from_linear_phase_is_empty(ex1):
    sig, _ = ex1
    theta0 = PhaseFn.linear(256, 10)
    two = peel_imfs(sig, [theta0, theta0], SolverOptions(transform_mode="nudft"))
    assert np.linalg.norm(two[1].imf) <= 1e-6


def test_peel_zero_signal():
    zero = Signal(TimeGrid(64), np.zeros(64))
    out = peel_imfs(zero, [PhaseFn.linear(64, 4), PhaseFn.linear(64, 8)])
    assert len(out) == 1
    assert np.all(out[0].imf == 0) and np.all(out[0].a0 == 0) and out[0].empty


@settings(max_examples=15, deadline=None)
# carriers of at least 8 cycles keep the one-mode envelope and phase bands separated
@given(st.integers(8, 20), st.floats(0.5, 3), st.floats(-0.3, 0.3))
def test_recovers_random_band_limited_components(L, amp, wiggle):
    n = 128
    t = np.arange(n) / n
    theta = TWO_PI * L * t + wiggle * np.sin(TWO_PI * t)
    # envelope band-limited in the warped coordinate, as in the benchmark examples
    a1 = amp + 0.2 * np.cos(theta / L)
    sig = Signal(TimeGrid(n), 0.5 + a1 * np.cos(theta))
    dec = decompose_well_resolved(sig, PhaseFn.linear(n, L), SolverOptions(transform_mode="nudft"))
    assert np.max(np.abs(dec.imf - a1 * np.cos(theta))) <= 1e-6
    assert phase_error(dec.phase.values, theta) <= 1e-6
