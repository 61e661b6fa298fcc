"""JSON run configuration shared by the CLI commands.

Lengths are in metres and forces in newtons, like the library. Unknown keys
are rejected so typos surface as errors instead of silently using defaults.
See ``docs/config.md`` for the schema.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any

import numpy as np

from .contact import PlacementSpec, SolverConfig, contact_path
from .instrument import ActuatorModel, ApparatusModel, InstrumentModel, LoadCellModel
from .mechanics import (
    MATERIALS,
    DeviceSpec,
    SpecError,
    StylusSpec,
    device_from_dict,
    stylus_from_dict,
)
from .presets import DEFAULT_STYLUS, load_preset

CONFIG_FORMAT = "vprobe-config v1"
DEFAULT_STEP = 1e-6
# simulate runs this far past flank onset so the stiffening and the break are visible
DEFAULT_PAST_FLANK = 0.2
DEFAULT_FIT_WINDOW = (5e-6, 50e-6)
DEFAULT_POSITIONS = 10

_TOP_KEYS = {
    "format", "device", "stylus", "placement", "instrument", "z_grid", "seed",
    "solver", "outputs", "positions", "fit_window", "montecarlo",
}
_OUTPUT_KEYS = {"trace", "events", "plot", "report", "positions", "variation"}


class ConfigError(ValueError):
    """Invalid configuration; the message names the field path and, when known, the line."""


@dataclass(frozen=True)
class GridSpec:
    start: float = 0.0
    stop: float | None = None
    step: float = DEFAULT_STEP

    def build(self, default_stop: float) -> np.ndarray:
        stop = self.stop if self.stop is not None else default_stop
        if not stop > self.start:
            raise ConfigError(f"z_grid: stop ({stop:.6e} m) must exceed start ({self.start:.6e} m)")
        n = int(math.floor((stop - self.start) / self.step + 1e-9))
        return self.start + np.arange(n + 1) * self.step


@dataclass(frozen=True)
class MonteCarloSpec:
    n_runs: int = 6
    placement_error_std: float = 10e-6
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    device: DeviceSpec
    stylus: StylusSpec = DEFAULT_STYLUS
    placement: PlacementSpec | None = None
    placement_error: float = 0.0
    instrument: InstrumentModel = field(default_factory=InstrumentModel)
    z_grid: GridSpec = field(default_factory=GridSpec)
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    outputs: dict = field(default_factory=dict)
    positions: tuple[float, ...] | None = None
    fit_window: tuple[float, float] = DEFAULT_FIT_WINDOW
    montecarlo: MonteCarloSpec = field(default_factory=MonteCarloSpec)

    @property
    def x_s(self) -> float:
        return self.effective_placement().x_s

    def effective_placement(self) -> PlacementSpec:
        return self.placement if self.placement is not None else PlacementSpec.at_cosym(self.device)

    def sim_grid(self) -> np.ndarray:
        path = contact_path(self.device, self.stylus, self.effective_placement())
        onset = path.landmarks()["flank_onset"]
        default_stop = min(onset * (1 + DEFAULT_PAST_FLANK), path.z_limit * (1 - 1e-9))
        return self.z_grid.build(default_stop)

    def sliding_grid(self) -> np.ndarray:
        """Grid that stops before the nominal placement leaves the sliding regime."""
        path = contact_path(self.device, self.stylus, self.effective_placement())
        marks = path.landmarks()
        end = marks["slide_off"] if marks["slide_off"] is not None else marks["flank_onset"]
        return self.z_grid.build(0.9 * end)

    def position_list(self) -> list[float]:
        if self.positions is not None:
            return list(self.positions)
        Lm = self.device.mass.length
        return [Lm * (i + 0.5) / DEFAULT_POSITIONS for i in range(DEFAULT_POSITIONS)]


def _line_of(text: str | None, key: str) -> str:
    if not text:
        return ""
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    if not m:
        return ""
    return f" (line {text.count(chr(10), 0, m.start()) + 1})"


class _Ctx:
    def __init__(self, text: str | None):
        self.text = text

    def fail(self, path: str, msg: str):
        key = path.rsplit(".", 1)[-1].split("[")[0]
        raise ConfigError(f"{path}{_line_of(self.text, key)}: {msg}")

    def obj(self, data, path: str, allowed: set[str]) -> dict:
        if not isinstance(data, dict):
            self.fail(path, f"expected an object, got {type(data).__name__}")
        unknown = sorted(set(data) - allowed)
        if unknown:
            self.fail(f"{path}.{unknown[0]}", f"unknown field (allowed: {', '.join(sorted(allowed))})")
        return data

    def num(self, data: dict, key: str, path: str, default=None, positive=False, nonneg=False, nullable=False):
        if key not in data:
            return default
        v = data[key]
        p = f"{path}.{key}"
        if v is None and nullable:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(p, f"expected a finite number, got {v!r}")
        if positive and not v > 0:
            self.fail(p, f"must be > 0, got {v!r}")
        if nonneg and v < 0:
            self.fail(p, f"must be >= 0, got {v!r}")
        return float(v)

    def integer(self, data: dict, key: str, path: str, default: int, minimum: int = 0) -> int:
        if key not in data:
            return default
        v = data[key]
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            self.fail(f"{path}.{key}", f"expected an integer >= {minimum}, got {v!r}")
        return v


def _device(ctx: _Ctx, data) -> DeviceSpec:
    if isinstance(data, str):
        try:
            return load_preset(data)
        except SpecError as exc:
            ctx.fail("device", str(exc))
    if isinstance(data, dict) and "preset" in data:
        ctx.obj(data, "device", {"preset", "support_rot_compliance", "fracture_strength"})
        if not isinstance(data["preset"], str):
            ctx.fail("device.preset", "expected a preset name")
        dev = _device(ctx, data["preset"])
        c_s = ctx.num(data, "support_rot_compliance", "device", dev.support_rot_compliance, nonneg=True)
        sf = ctx.num(data, "fracture_strength", "device", dev.material.fracture_strength, positive=True)
        return replace(dev, support_rot_compliance=c_s, material=replace(dev.material, fracture_strength=sf))
    try:
        return device_from_dict(data, "device")
    except (SpecError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _stylus(ctx: _Ctx, data) -> StylusSpec:
    if data is None:
        return DEFAULT_STYLUS
    ctx.obj(data, "stylus", {"tip_radius", "cone_half_angle", "material"})
    doc = dict(data)
    doc.setdefault("tip_radius", DEFAULT_STYLUS.tip_radius)
    doc.setdefault("cone_half_angle", DEFAULT_STYLUS.cone_half_angle)
    mat = doc.get("material")
    if isinstance(mat, str):
        if mat.lower() not in MATERIALS:
            ctx.fail("stylus.material", f"unknown material {mat!r}; known: {', '.join(sorted(MATERIALS))}")
        doc["material"] = MATERIALS[mat.lower()].__dict__
    try:
        return stylus_from_dict(doc, "stylus")
    except (SpecError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _instrument(ctx: _Ctx, data) -> tuple[InstrumentModel, float]:
    if data is None:
        return InstrumentModel(), 0.0
    if data == "ideal":
        return InstrumentModel.ideal(), 0.0
    ctx.obj(data, "instrument", {"load_cell", "actuator", "apparatus", "placement_error"})
    parts = {}
    for key, cls in (("load_cell", LoadCellModel), ("actuator", ActuatorModel), ("apparatus", ApparatusModel)):
        sub = data.get(key, {})
        path = f"instrument.{key}"
        ctx.obj(sub, path, {f.name for f in fields(cls)})
        kw = {}
        for f in fields(cls):
            nullable = f.name in ("range_max", "stiffness")
            v = ctx.num(sub, f.name, path, nullable=nullable)
            if f.name in sub:
                kw[f.name] = math.inf if v is None else v
        try:
            parts[key] = cls(**kw)
        except ValueError as exc:
            ctx.fail(path, str(exc))
    err = ctx.num(data, "placement_error", "instrument", 0.0)
    return InstrumentModel(parts["load_cell"], parts["actuator"], parts["apparatus"]), err


def config_from_dict(data: Any, text: str | None = None) -> RunConfig:
    ctx = _Ctx(text)
    ctx.obj(data, "config", _TOP_KEYS)
    fmt = data.get("format", CONFIG_FORMAT)
    if fmt != CONFIG_FORMAT:
        ctx.fail("format", f"unsupported config format {fmt!r}; expected {CONFIG_FORMAT!r}")
    if "device" not in data:
        raise ConfigError("device: missing required field")
    device = _device(ctx, data["device"])
    stylus = _stylus(ctx, data.get("stylus"))

    placement = None
    if "placement" in data:
        pl = ctx.obj(data["placement"], "placement", {"x_s", "offset_from_cosym"})
        if len(pl) != 1:
            ctx.fail("placement", "give exactly one of x_s or offset_from_cosym")
        x_s = ctx.num(pl, "x_s", "placement")
        if x_s is None:
            x_s = device.cosym + ctx.num(pl, "offset_from_cosym", "placement")
        if not 0 <= x_s <= device.mass.length:
            ctx.fail("placement", f"stylus position {x_s:.6e} m lies outside the mass [0, {device.mass.length:.6e}] m")
        placement = PlacementSpec(x_s)

    instrument, placement_error = _instrument(ctx, data.get("instrument"))

    g = ctx.obj(data.get("z_grid", {}), "z_grid", {"start", "stop", "step"})
    grid = GridSpec(
        ctx.num(g, "start", "z_grid", 0.0, nonneg=True),
        ctx.num(g, "stop", "z_grid", None, positive=True),
        ctx.num(g, "step", "z_grid", DEFAULT_STEP, positive=True),
    )
    if grid.stop is not None and not grid.stop > grid.start:
        ctx.fail("z_grid.stop", "must exceed z_grid.start")

    seed = ctx.integer(data, "seed", "config", 0)

    s = ctx.obj(data.get("solver", {}), "solver", {f.name for f in fields(SolverConfig)})
    kw = {}
    for key in ("tolerance", "event_resolution"):
        if key in s:
            kw[key] = ctx.num(s, key, "solver", positive=True)
    if "max_iterations" in s:
        kw["max_iterations"] = ctx.integer(s, "max_iterations", "solver", 200, 1)
    if "continuation" in s:
        if not isinstance(s["continuation"], bool):
            ctx.fail("solver.continuation", "expected true or false")
        kw["continuation"] = s["continuation"]
    solver = SolverConfig(**kw)

    outputs = ctx.obj(data.get("outputs", {}), "outputs", _OUTPUT_KEYS)
    for k, v in outputs.items():
        if not isinstance(v, str) or not v:
            ctx.fail(f"outputs.{k}", "expected a file path")

    positions = None
    if "positions" in data:
        pos = data["positions"]
        if not isinstance(pos, list) or not pos:
            ctx.fail("positions", "expected a non-empty list of stylus positions in m")
        vals = []
        for i, v in enumerate(pos):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 <= v <= device.mass.length:
                ctx.fail(f"positions[{i}]", f"expected a position within the mass, got {v!r}")
            vals.append(float(v))
        positions = tuple(vals)

    fit_window = DEFAULT_FIT_WINDOW
    if "fit_window" in data:
        fw = data["fit_window"]
        ok = isinstance(fw, list) and len(fw) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in fw)
        if not ok or not fw[1] > fw[0]:
            ctx.fail("fit_window", "expected [z_lo, z_hi] in m with z_hi > z_lo")
        fit_window = (float(fw[0]), float(fw[1]))

    m = ctx.obj(data.get("montecarlo", {}), "montecarlo", {f.name for f in fields(MonteCarloSpec)})
    mc = MonteCarloSpec(
        ctx.integer(m, "n_runs", "montecarlo", 6, 1),
        ctx.num(m, "placement_error_std", "montecarlo", 10e-6, nonneg=True),
        ctx.integer(m, "workers", "montecarlo", 1, 1),
    )
    return RunConfig(
        device, stylus, placement, placement_error, instrument, grid, seed, solver,
        dict(outputs), positions, fit_window, mc,
    )


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return config_from_dict(data, text)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    except (SpecError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))
