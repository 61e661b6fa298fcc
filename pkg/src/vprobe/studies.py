"""Multi-run virtual experiments: stiffness along the mass and sample-to-sample scatter."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis import Trace, VariationReport, compare_samples, correct_calibration, correct_compliance, fit_line, placement_envelope
from .contact import PlacementSpec, SolverConfig
from .instrument import InstrumentModel, MeasurementTrace, run_virtual_measurement
from .mechanics import DeviceSpec, StylusSpec, linear_stiffness_at

# placement draws are truncated here, and the envelope spans the same band
ENVELOPE_SIGMAS = 2.0
# allowance for load-cell noise in a pairwise difference of two readings
NOISE_SIGMAS = 5.0


def run_seed(master: int, index: int) -> np.random.Generator:
    """Independent generator for run ``index`` of a batch seeded with ``master``."""
    return np.random.default_rng(np.random.SeedSequence([master, index]))


@dataclass(frozen=True)
class PositionRow:
    x_s: float
    k_analytic: float
    k_measured: float
    k_raw: float
    n_points: int


def stiffness_vs_position(
    device: DeviceSpec,
    stylus: StylusSpec,
    positions,
    instrument: InstrumentModel,
    z_grid,
    fit_window: tuple[float, float],
    seed: int = 0,
    analytic_device: DeviceSpec | None = None,
    cfg: SolverConfig = SolverConfig(),
) -> list[PositionRow]:
    """Fitted stiffness of virtual measurements at each position next to the closed form.

    ``device`` is what the virtual instrument probes; ``analytic_device`` (default
    the same) is what the closed form assumes. The known calibration bias and
    rig stiffness are corrected for, as an experimenter would.
    """
    ref = analytic_device if analytic_device is not None else device
    cell = instrument.load_cell
    k_app = instrument.apparatus.stiffness
    rows = []
    for i, x in enumerate(positions):
        mt = run_virtual_measurement(device, stylus, PlacementSpec(x), 0.0, instrument, z_grid, run_seed(seed, i), cfg)
        z = mt.z_cmd
        eps = 1e-9 * fit_window[1]
        mask = (z >= fit_window[0] - eps) & (z <= fit_window[1] + eps)
        F = correct_calibration(mt.F_readout[mask], cell.calibration_bias)
        k_raw, _, _, _ = fit_line(z[mask], F)
        k = correct_compliance(k_raw, k_app)
        rows.append(PositionRow(float(x), linear_stiffness_at(ref, x), k, k_raw, int(mask.sum())))
    return rows


def _truncated_normal(rng: np.random.Generator, std: float) -> float:
    if std == 0:
        return 0.0
    while True:
        e = rng.normal(0.0, std)
        if abs(e) <= ENVELOPE_SIGMAS * std:
            return float(e)


def _one_run(args) -> tuple[int, float, MeasurementTrace]:
    device, stylus, x_s, std, instrument, grid, master, index, cfg = args
    rng = run_seed(master, index)
    err = _truncated_normal(rng, std)
    mt = run_virtual_measurement(device, stylus, PlacementSpec(x_s), err, instrument, grid, rng, cfg)
    mt.metadata.update(seed=master, run_index=index)
    return index, err, mt


@dataclass
class MonteCarloResult:
    placement_errors: list[float]
    traces: list[MeasurementTrace]
    report: VariationReport
    z: np.ndarray
    curves: list[np.ndarray]


def montecarlo_envelope(device, stylus, x_s, std, instrument: InstrumentModel, z_max, cfg=SolverConfig()) -> float:
    """Force scatter expected from placement alone, widened by the readout noise."""
    step = 1e-6
    grid = np.arange(int(math.ceil((z_max + instrument.actuator.cyclic_amplitude) / step)) + 1) * step
    band = placement_envelope(device, stylus, x_s, ENVELOPE_SIGMAS * std, grid, cfg)
    cell = instrument.load_cell
    noise = NOISE_SIGMAS * math.sqrt(2.0) * cell.estimate_std
    return band * (1 + abs(cell.calibration_bias)) + noise


def run_montecarlo(
    device: DeviceSpec,
    stylus: StylusSpec,
    x_s: float,
    placement_error_std: float,
    instrument: InstrumentModel,
    z_grid,
    n_runs: int,
    seed: int = 0,
    workers: int = 1,
    cfg: SolverConfig = SolverConfig(),
) -> MonteCarloResult:
    """Virtual measurements of identical devices with random placement and noise.

    Runs may execute in parallel; results are ordered by run index.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    grid = np.asarray(z_grid, dtype=float)
    jobs = [(device, stylus, x_s, placement_error_std, instrument, grid, seed, i, cfg) for i in range(n_runs)]
    if workers > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    errors = [r[1] for r in results]
    traces = [r[2] for r in results]
    sliding = [Trace.from_measurement(t).sliding_prefix() for t in traces]
    envelope = montecarlo_envelope(device, stylus, x_s, placement_error_std, instrument, float(grid[-1]), cfg)
    report = compare_samples(sliding, envelope)
    lo, hi = report.z_range
    zc = grid[(grid >= lo) & (grid <= hi)]
    curves = [np.interp(zc, t.z, t.F) for t in sliding]
    return MonteCarloResult(errors, traces, report, zc, curves)
