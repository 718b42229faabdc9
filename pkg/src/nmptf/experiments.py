"""Experiment configuration, orchestration and report files.

A configuration is a flat ``key = value`` text file. Every field has a
default; the report echoes the full configuration in the same format so a
report header can be fed back as a config file.
"""

from __future__ import annotations

import csv
import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .errors import InputFileError, InvalidArgumentError, NonUniformGridError, ParseError
from .model import (PhaseFn, Signal, TimeGrid, example_components, gen_example_signal,
                    restrict, subsample_random)
from .probe import estimate_delta_s, full_grid_matrix, mutual_coherence
from .solver import Decomposition, SolverOptions, decompose_well_resolved
from .sparse import (SparseOptions, decompose_sparse, phase_error, run_trial,
                     sparse_default_options, trial_seeds)

KINDS = ("example1", "example2", "example3", "decompose-file", "rip-probe", "success-sweep")
RIP_PHASES = ("linear", "example1", "example2")

# grid size and sample count used when the config leaves them unset
_EXAMPLE_GRID = {1: 256, 2: 4096, 3: 4096}
_EXAMPLE_SAMPLES = {2: 120, 3: 120}
_THRESHOLDS = {2: 1e-2, 3: 5e-2}


@dataclass
class ExperimentConfig:
    """All knobs of one run. ``None`` means "use the documented default".

    Defaults: ``grid`` is 256 for example 1 and 4096 for the sparse examples;
    ``samples`` 120; the solver settings follow :class:`SolverOptions` for
    uniform data and :func:`sparse_default_options` for samples;
    ``threshold`` is 1e-2 for example 2 and 5e-2 for example 3; ``trials``
    is 100 for sweeps and 200 random supports for RIP probes.
    """

    kind: str = "example1"
    example: int = 1
    input: Optional[str] = None
    grid: Optional[int] = None
    samples: Optional[int] = None
    trials: Optional[int] = None
    seed: int = 0
    workers: int = 1
    M0: int = 2
    eps0: Optional[float] = None
    max_iter: Optional[int] = None
    transform_mode: str = "nudft"
    n_basis: Optional[int] = None
    bp_tol: Optional[float] = None
    threshold: Optional[float] = None
    rip_phase: str = "linear"
    sparsity: int = 2
    output: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"kind must be one of {', '.join(KINDS)}")
        if self.example not in (1, 2, 3):
            raise InvalidArgumentError("example must be 1, 2 or 3")
        if self.kind == "decompose-file" and not self.input:
            raise InvalidArgumentError("decompose-file needs an input path")
        if self.rip_phase not in RIP_PHASES:
            raise InvalidArgumentError(f"rip_phase must be one of {', '.join(RIP_PHASES)}")
        for name in ("grid", "samples", "n_basis", "max_iter", "trials"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise InvalidArgumentError(f"{name} must be positive")
        for name in ("workers", "sparsity"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be positive")
        for name in ("eps0", "bp_tol", "threshold"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise InvalidArgumentError(f"{name} must be positive")
        # surfaces a bad M0 / transform_mode here rather than mid-run
        SolverOptions(M0=self.M0, transform_mode=self.transform_mode)

    # -- text form ---------------------------------------------------------
    @classmethod
    def from_mapping(cls, items: Dict[str, str]) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in items.items():
            if key not in known:
                raise ParseError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(known[key], raw)
        return cls(**kwargs)

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        return cls.from_mapping(_parse_pairs(text))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputFileError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        return cls.parse(text)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **overrides)

    def dump(self) -> str:
        return "".join(f"{f.name} = {_fmt(getattr(self, f.name))}\n" for f in fields(self))


def _parse_pairs(text: str) -> Dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _coerce(f, raw: str):
    typ = str(f.type)
    if raw.lower() == "none":
        if "Optional" not in typ:
            raise ParseError(f"{f.name} cannot be none")
        return None
    try:
        if "int" in typ:
            return int(raw)
        if "float" in typ:
            return float(raw)
    except ValueError:
        raise ParseError(f"{f.name}: cannot parse {raw!r}") from None
    return raw


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- signal files -----------------------------------------------------------

def load_signal_csv(path) -> Signal:
    """Read a ``t,f`` CSV sampled on the uniform grid ``t_j = j/n``."""
    p = Path(path)
    try:
        with p.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if rows and [c.strip().lower() for c in rows[0]] == ["t", "f"]:
        rows = rows[1:]
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least two data rows")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != 2:
        raise ParseError(f"{path}: expected two columns t,f")
    t, f = data[:, 0], data[:, 1]
    n = t.size
    h = 1.0 / n
    dev = np.max(np.abs(t - np.arange(n) * h)) / h
    if dev > 1e-9:
        raise NonUniformGridError(
            f"{path}: times deviate from the grid j/{n} by {dev:.3g} of a spacing")
    return Signal(TimeGrid(n), f)


def save_signal_csv(signal: Signal, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "f"])
        for t, f in zip(signal.times, signal.values):
            w.writerow([repr(float(t)), repr(float(f))])


# -- reports ----------------------------------------------------------------

@dataclass
class ExperimentReport:
    config: ExperimentConfig
    metrics: Dict[str, object] = field(default_factory=dict)
    tables: Dict[str, Tuple[List[str], np.ndarray]] = field(default_factory=dict)
    timings: Dict[str, object] = field(default_factory=dict)
    version: str = __version__

    def text(self) -> str:
        lines = [f"# nmptf {self.version}", "[config]", self.config.dump().rstrip("\n"),
                 "[metrics]"]
        lines += [f"{k} = {_fmt(v)}" for k, v in self.metrics.items()]
        lines.append("[timing]")
        lines += [f"{k} = {_fmt(v)}" for k, v in self.timings.items()]
        return "\n".join(lines) + "\n"


def read_report_config(text: str) -> ExperimentConfig:
    """Recover the configuration echoed at the top of a report."""
    block = text.split("[config]", 1)[1].split("[metrics]", 1)[0]
    return ExperimentConfig.parse(block)


def write_report(report: ExperimentReport, path) -> List[Path]:
    """Write ``path`` plus one ``<stem>_<table>.csv`` per table; returns the files written."""
    p = Path(path)
    written = [p]
    try:
        p.write_text(report.text())
        for name, (header, rows) in report.tables.items():
            tp = p.with_name(f"{p.stem}_{name}.csv")
            with tp.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                for row in np.asarray(rows, dtype=float):
                    w.writerow([repr(float(v)) for v in row])
            written.append(tp)
    except OSError as exc:
        raise InputFileError(f"cannot write report {path}: {exc.strerror or exc}") from exc
    return written


# -- orchestration ----------------------------------------------------------

def _solver_options(cfg: ExperimentConfig, sparse: bool) -> SolverOptions:
    base = sparse_default_options() if sparse else SolverOptions(transform_mode=cfg.transform_mode)
    return dataclasses.replace(
        base, M0=cfg.M0, eps0=cfg.eps0,
        max_iter=cfg.max_iter if cfg.max_iter is not None else base.max_iter)


def _sparse_options(cfg: ExperimentConfig) -> SparseOptions:
    return SparseOptions(n_basis=cfg.n_basis, bp_tol=cfg.bp_tol)


def _trace_table(dec: Decomposition):
    tr = dec.trace
    cols = ["iteration", "beta", "step_norm", "residual_norm", "cycle_count"]
    data = [tr.column(c) for c in cols]
    if tr.records and tr.records[0].freq_error is not None:
        cols.append("freq_error")
        data.append(tr.column("freq_error"))
    return cols, np.column_stack(data) if tr.records else np.empty((0, len(cols)))


def _aligned(phase, ref):
    d = phase - ref
    return d - 2 * np.pi * np.round(np.mean(d) / (2 * np.pi))


def _truth_metrics(report, dec: Decomposition, truth, t):
    e_imf = dec.imf - truth.imf
    e_phase = _aligned(dec.phase.values, truth.phase.values)
    e_a0 = dec.a0 - truth.a0
    e_a1 = dec.a1 - truth.a1
    report.metrics.update(
        max_imf_error=float(np.max(np.abs(e_imf))),
        max_phase_error=float(np.max(np.abs(e_phase))),
        max_a0_error=float(np.max(np.abs(e_a0))),
        max_a1_error=float(np.max(np.abs(e_a1))),
        iterations=dec.iterations,
        converged=dec.converged,
    )
    report.tables["errors"] = (["t", "imf_error", "phase_error", "a0_error", "a1_error"],
                               np.column_stack([t, e_imf, e_phase, e_a0, e_a1]))
    report.tables["trace"] = _trace_table(dec)


def _run_example(cfg: ExperimentConfig, example_id: int, report: ExperimentReport):
    n = cfg.grid or _EXAMPLE_GRID[example_id]
    grid = TimeGrid(n)
    noise_seed, sample_seed = trial_seeds(cfg.seed)
    signal, truth = gen_example_signal(example_id, grid, noise_seed)
    theta0 = PhaseFn.linear(n, round(truth.phase.cycle_count))
    if example_id == 1:
        dec = decompose_well_resolved(signal, theta0, _solver_options(cfg, False), truth.phase)
    else:
        ns = cfg.samples or _EXAMPLE_SAMPLES[example_id]
        scatter = subsample_random(grid, ns, sample_seed)
        sp = _sparse_options(cfg)
        if truth.noise_sigma > 0 and sp.bp_tol is None:
            sp = dataclasses.replace(sp, bp_tol=truth.noise_sigma * np.sqrt(ns))
        dec = decompose_sparse(restrict(signal, scatter), theta0,
                               _solver_options(cfg, True), sp, truth.phase)
        report.metrics["samples"] = ns
        report.metrics["relative_phase_error"] = phase_error(
            dec.phase.values, truth.phase.values) / (2 * np.pi)
    report.metrics["grid"] = n
    _truth_metrics(report, dec, truth, grid.points)


def _run_decompose_file(cfg: ExperimentConfig, report: ExperimentReport):
    signal = load_signal_csv(cfg.input)
    dec = decompose_well_resolved(signal, None, _solver_options(cfg, False))
    report.metrics.update(grid=len(signal), cycle_count=dec.phase.cycle_count,
                          iterations=dec.iterations, converged=dec.converged,
                          residual_norm=float(np.linalg.norm(dec.residual)))
    report.tables["components"] = (
        ["t", "a0", "a1", "phase", "imf", "residual"],
        np.column_stack([signal.times, dec.a0, dec.a1, dec.phase.values, dec.imf, dec.residual]))
    report.tables["trace"] = _trace_table(dec)


def _sweep_one(args):
    example_id, ns, seed, threshold, n, opts, sp = args
    return run_trial(example_id, ns, seed, threshold, n, opts, sp)


def _run_sweep(cfg: ExperimentConfig, report: ExperimentReport):
    ex = cfg.example
    if ex == 1:
        raise InvalidArgumentError("success sweeps use the sparse examples 2 and 3")
    ns = cfg.samples or _EXAMPLE_SAMPLES[ex]
    threshold = cfg.threshold or _THRESHOLDS[ex]
    n = cfg.grid or _EXAMPLE_GRID[ex]
    jobs = [(ex, ns, cfg.seed + i, threshold, n, _solver_options(cfg, True), _sparse_options(cfg))
            for i in range(cfg.trials or 100)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    rate = sum(r.success for r in results) / len(results)
    report.metrics.update(example=ex, samples=ns, threshold=threshold, trials=len(results),
                          success_rate=rate)
    report.tables["trials"] = (
        ["seed", "phase_error", "relative_phase_error", "imf_error", "a0_error", "a1_error",
         "iterations", "success"],
        np.array([[r.seed, r.phase_error, r.relative_phase_error, r.imf_error, r.a0_error,
                   r.a1_error, r.iterations, r.success] for r in results]))


def _rip_phase(name: str, n: int) -> PhaseFn:
    if name == "linear":
        return PhaseFn.linear(n, 1)
    _, _, theta, dtheta = example_components(1 if name == "example1" else 2, np.arange(n) / n)
    return PhaseFn(theta, dtheta)


def _run_rip(cfg: ExperimentConfig, report: ExperimentReport):
    nb = cfg.n_basis or 32
    nf = cfg.grid or nb
    if nb > nf:
        raise InvalidArgumentError("rip-probe needs grid >= n_basis")
    U = full_grid_matrix(_rip_phase(cfg.rip_phase, nf), nb)
    est = estimate_delta_s(U, cfg.sparsity, cfg.trials or 200, cfg.seed)
    report.metrics.update(n_basis=nb, grid=nf, mutual_coherence=mutual_coherence(U),
                          coherence_target=1.0 / (16 * nb), sparsity=est.S,
                          delta_lower=est.delta_lower, delta_trials=est.trials,
                          delta_exhaustive=est.exhaustive)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    cfg.validate()
    report = ExperimentReport(cfg)
    start = time.perf_counter()
    if cfg.kind.startswith("example"):
        _run_example(cfg, int(cfg.kind[-1]), report)
    elif cfg.kind == "decompose-file":
        _run_decompose_file(cfg, report)
    elif cfg.kind == "success-sweep":
        _run_sweep(cfg, report)
    else:
        _run_rip(cfg, report)
    report.timings["wall_seconds"] = time.perf_counter() - start
    report.timings["mode"] = "parallel" if cfg.workers > 1 else "single-thread"
    if cfg.output:
        write_report(report, cfg.output)
    return report
