"""Error model of the probe apparatus: load cell, z-actuator and rig compliance.

A virtual measurement chains the channels per commanded step:
actuator position error, series split of the displacement between rig and
device, the device force from the contact model, then a biased, averaged,
noisy load-cell reading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .contact import ContactMode, PlacementSpec, SolverConfig, SolverError, contact_path
from .mechanics import DeviceSpec, StylusSpec


class RangeError(ValueError):
    """Force outside the load-cell range."""


class InstrumentError(RuntimeError):
    pass


@dataclass(frozen=True)
class LoadCellModel:
    noise_std_single: float = 1e-3
    sample_rate: float = 2e4
    avg_window: float = 3.0
    calibration_bias: float = 0.025
    range_max: float = 0.25

    def __post_init__(self):
        if self.noise_std_single < 0:
            raise ValueError("noise_std_single must be >= 0")
        if not self.sample_rate > 0 or not self.avg_window > 0:
            raise ValueError("sample_rate and avg_window must be > 0")
        if not self.range_max > 0:
            raise ValueError("range_max must be > 0")
        if not 1 + self.calibration_bias > 0:
            raise ValueError("calibration_bias must be > -1")
        if self.n_samples < 1:
            raise ValueError("sample_rate * avg_window must round to at least one sample")

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.avg_window))

    @property
    def estimate_std(self) -> float:
        return self.noise_std_single / math.sqrt(self.n_samples)


@dataclass(frozen=True)
class ActuatorModel:
    step_size: float = 1e-7
    cyclic_amplitude: float = 1e-6
    cyclic_period: float = 10e-6
    cyclic_phase: float = 0.0

    def __post_init__(self):
        if self.cyclic_amplitude < 0:
            raise ValueError("cyclic_amplitude must be >= 0")
        if not self.cyclic_period > 0:
            raise ValueError("cyclic_period must be > 0")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")


@dataclass(frozen=True)
class ApparatusModel:
    stiffness: float = 4635.0

    def __post_init__(self):
        if not self.stiffness > 0:
            raise ValueError("apparatus stiffness must be > 0")


@dataclass(frozen=True)
class InstrumentModel:
    load_cell: LoadCellModel = field(default_factory=LoadCellModel)
    actuator: ActuatorModel = field(default_factory=ActuatorModel)
    apparatus: ApparatusModel = field(default_factory=ApparatusModel)

    @classmethod
    def ideal(cls) -> "InstrumentModel":
        """Every error channel switched off."""
        return cls(
            LoadCellModel(noise_std_single=0.0, calibration_bias=0.0, range_max=math.inf),
            ActuatorModel(cyclic_amplitude=0.0),
            ApparatusModel(math.inf),
        )

    def to_dict(self) -> dict:
        def clean(d):
            return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}

        return {
            "load_cell": clean(self.load_cell.__dict__),
            "actuator": clean(self.actuator.__dict__),
            "apparatus": clean(self.apparatus.__dict__),
        }


def read_force(true_force: float, cell: LoadCellModel, rng: np.random.Generator) -> tuple[float, float]:
    """Averaged load-cell reading of ``true_force``.

    Returns the mean of ``cell.n_samples`` Gaussian samples centred on the
    biased force, and the standard deviation of that mean.
    """
    if abs(true_force) > cell.range_max:
        raise RangeError(f"force {true_force:.6g} N exceeds the load-cell range of {cell.range_max:.6g} N")
    biased = (1.0 + cell.calibration_bias) * true_force
    if cell.noise_std_single == 0:
        return biased, 0.0
    samples = rng.normal(biased, cell.noise_std_single, cell.n_samples)
    return float(samples.mean()), cell.estimate_std


def actual_position(z_cmd: float, act: ActuatorModel) -> float:
    if z_cmd < 0:
        raise ValueError(f"commanded position must be >= 0, got {z_cmd}")
    if act.cyclic_amplitude == 0:
        return z_cmd
    return z_cmd + act.cyclic_amplitude * math.sin(2 * math.pi * z_cmd / act.cyclic_period + act.cyclic_phase)


def deflection_partition(
    z_actual: float,
    k_dut_local: float | Callable[[float], float],
    app: ApparatusModel,
    tol: float = 1e-13,
    max_iter: int = 100,
) -> tuple[float, float]:
    """Split the actuator travel between the rig and the device in series.

    ``k_dut_local`` is either a linear device stiffness (``inf`` for a rigid
    target) or a callable giving the device force at a device deflection.
    Returns ``(z_dut, F)`` with ``z_actual = z_dut + F / k_app``.
    """
    k_app = app.stiffness
    if callable(k_dut_local):
        force_at = k_dut_local
    elif math.isinf(k_dut_local):
        return 0.0, k_app * z_actual
    else:
        k = float(k_dut_local)
        force_at = lambda z: k * z
    if math.isinf(k_app):
        return z_actual, force_at(z_actual)
    z_dut = z_actual
    F = force_at(z_dut)
    for _ in range(max_iter):
        z_new = z_actual - F / k_app
        F = force_at(z_new)
        if abs(z_new - z_dut) <= tol:
            return z_new, F
        z_dut = z_new
    raise InstrumentError(f"series compliance split did not converge in {max_iter} iterations at z={z_actual:.6e} m")


@dataclass(frozen=True)
class MeasurementRecord:
    z_cmd: float
    z_actual: float
    z_dut: float
    F_readout: float
    F_readout_std: float
    mode: str = ""


@dataclass
class MeasurementTrace:
    records: list[MeasurementRecord] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def z_cmd(self) -> np.ndarray:
        return self.column("z_cmd")

    @property
    def F_readout(self) -> np.ndarray:
        return self.column("F_readout")


class _DeviceForce:
    """Measured (vertical) force of the device versus its deflection, with a fracture latch."""

    def __init__(self, device, stylus, placement, cfg):
        self.path = contact_path(device, stylus, placement)
        self.sigma_f = device.material.fracture_strength
        self.cfg = cfg
        self.broken = False
        self.guess = None
        self._last = None

    def state(self, z: float):
        if self.broken or z <= 0:
            return None
        if self._last is not None and self._last[0] == z:
            return self._last[1]
        i = self.path.locate(z)
        guess = self.guess if self.guess is not None and self.guess[0] == i else None
        st = self.path.solve(z, self.cfg, None if guess is None else guess[1], i)
        self._last = (z, st)
        return st

    def __call__(self, z: float) -> float:
        st = self.state(z)
        return 0.0 if st is None else st.F_z

    def accept(self, z: float) -> str:
        st = self.state(z)
        if self.broken:
            return ContactMode.FRACTURED.value
        if st is None:
            return ContactMode.NO_CONTACT.value
        self.guess = (self.path.locate(z), st.param)
        if st.sigma_root >= self.sigma_f:
            self.broken = True
            return ContactMode.FRACTURED.value
        return st.mode.value


def measure_force_curve(
    force_at: Callable[[float], float] | float,
    instrument: InstrumentModel,
    z_cmd_grid,
    seed: int | np.random.Generator | None = 0,
    accept: Callable[[float], str] | None = None,
    metadata: dict | None = None,
) -> MeasurementTrace:
    """Run the instrument chain against an arbitrary device force law."""
    z_cmd = np.asarray(z_cmd_grid, dtype=float)
    if z_cmd.size and (z_cmd[0] < 0 or np.any(np.diff(z_cmd) <= 0)):
        raise ValueError("z_cmd_grid must be strictly increasing and start at >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    trace = MeasurementTrace(metadata=dict(metadata or {}))
    for i, zc in enumerate(z_cmd):
        try:
            z_act = actual_position(float(zc), instrument.actuator)
            z_dut, F = deflection_partition(max(z_act, 0.0), force_at, instrument.apparatus)
            mode = ""
            if accept is not None:
                mode = accept(z_dut)
                if mode == ContactMode.FRACTURED.value:
                    z_dut, F = max(z_act, 0.0), 0.0
            est, std = read_force(F, instrument.load_cell, rng)
        except SolverError as exc:
            raise SolverError(f"step {i}: {exc}", float(zc), exc.residual) from exc
        except (RangeError, InstrumentError) as exc:
            raise type(exc)(f"step {i} (z_cmd={zc:.6e} m): {exc}") from exc
        trace.records.append(MeasurementRecord(float(zc), z_act, z_dut, est, std, mode))
    return trace


def run_virtual_measurement(
    device: DeviceSpec,
    stylus: StylusSpec,
    placement: PlacementSpec,
    placement_error: float,
    instrument: InstrumentModel,
    z_cmd_grid,
    seed: int | np.random.Generator | None = 0,
    cfg: SolverConfig = SolverConfig(),
) -> MeasurementTrace:
    """Virtual force-deflection measurement of a device with the stylus misplaced by ``placement_error``."""
    actual = PlacementSpec(placement.x_s + placement_error)
    force = _DeviceForce(device, stylus, actual, cfg)
    meta = {
        "device": device.name,
        "x_s": placement.x_s,
        "placement_error": placement_error,
        "seed": seed if isinstance(seed, int) else None,
        "instrument": instrument.to_dict(),
    }
    return measure_force_curve(force, instrument, z_cmd_grid, seed, accept=force.accept, metadata=meta)


def estimate_apparatus_stiffness(
    instrument: InstrumentModel,
    z_grid,
    seed: int | np.random.Generator | None = 0,
) -> float:
    """Rig stiffness from pushing on a rigid, non-deflecting target.

    The readout is corrected for the known calibration bias, then the force
    is fitted against the commanded displacement.
    """
    from .analysis import correct_calibration, fit_line

    trace = measure_force_curve(math.inf, instrument, z_grid, seed)
    F = correct_calibration(trace.F_readout, instrument.load_cell.calibration_bias)
    slope, _, _, _ = fit_line(trace.z_cmd, F)
    return slope


def with_channels(
    instrument: InstrumentModel,
    noise: bool = True,
    bias: bool = True,
    cyclic: bool = True,
    compliance: bool = True,
) -> InstrumentModel:
    """Copy of ``instrument`` with selected error channels switched off."""
    cell = instrument.load_cell
    if not noise:
        cell = replace(cell, noise_std_single=0.0)
    if not bias:
        cell = replace(cell, calibration_bias=0.0)
    act = instrument.actuator if cyclic else replace(instrument.actuator, cyclic_amplitude=0.0)
    app = instrument.apparatus if compliance else ApparatusModel(math.inf)
    return InstrumentModel(cell, act, app)
