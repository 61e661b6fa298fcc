"""Named device presets and the calibrations that produced them.

Presets are JSON device documents. Built-in ones ship in ``presets/``;
directories listed in ``VPROBE_PRESET_PATH`` (os.pathsep separated) are
searched first.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import replace
from importlib import resources
from pathlib import Path

from scipy.optimize import brentq

from .contact import PlacementSpec, SolverConfig, contact_path
from .mechanics import (
    DIAMOND,
    SILICON,
    BeamSpec,
    DeviceSpec,
    MaterialProps,
    ProofMassSpec,
    SpecError,
    StylusSpec,
    device_from_dict,
    linear_stiffness_at,
)

PRESET_PATH_ENV = "VPROBE_PRESET_PATH"

# Diamond stylus with an 18 um spherical tip; the cone angle is a model choice.
DEFAULT_STYLUS = StylusSpec(tip_radius=18e-6, cone_half_angle=math.radians(27.5), material=DIAMOND)

# Clamp compliance that softens REF-CANTILEVER by a few percent at the centre.
SUPPORT_COMPLIANCE_EXAMPLE = 5.0e3


def reference_geometry(thickness: float, fracture_strength: float = SILICON.fracture_strength, name: str = "") -> DeviceSpec:
    material = MaterialProps(SILICON.youngs_modulus, SILICON.poisson_ratio, fracture_strength)
    return DeviceSpec(
        beam=BeamSpec(500e-6, 200e-6, thickness, youngs_modulus=material.youngs_modulus),
        mass=ProofMassSpec(1000e-6, 300e-6),
        material=material,
        name=name,
    )


def calibrate_thickness(template: DeviceSpec, target_stiffness: float) -> float:
    """Beam thickness giving ``target_stiffness`` at the mass centre.

    Stiffness scales with thickness cubed, so the solve is one-dimensional
    and monotone.
    """

    def k_err(h):
        beam = replace(template.beam, thickness=h)
        return linear_stiffness_at(replace(template, beam=beam), template.cosym) - target_stiffness

    return brentq(k_err, 1e-8, template.beam.length * 0.2, xtol=1e-20, rtol=1e-15, maxiter=500)


def calibrate_fracture_strength(
    device: DeviceSpec,
    stylus: StylusSpec,
    placement: PlacementSpec,
    target_force: float,
    cfg: SolverConfig = SolverConfig(),
) -> float:
    """Root stress reached when the measured force first equals ``target_force``."""
    probe = replace(device, material=replace(device.material, fracture_strength=1e30))
    path = contact_path(probe, stylus, placement)
    slide = path.branches[0]
    f = lambda z: path.solve(z, cfg).F_z - target_force
    # first crossing on the rising part of the sliding branch
    zs = [slide.z_hi * i / 400 for i in range(1, 401)]
    z_prev = 0.0
    for z in zs:
        if f(z) >= 0:
            z_star = brentq(f, z_prev, z, xtol=1e-15, rtol=1e-15)
            return path.solve(z_star, cfg).sigma_root
        z_prev = z
    raise ValueError(f"force {target_force} N is never reached while sliding")


def _builtin_dir() -> Path:
    return Path(str(resources.files("vprobe") / "presets"))


def preset_dirs() -> list[Path]:
    dirs = [Path(p) for p in os.environ.get(PRESET_PATH_ENV, "").split(os.pathsep) if p]
    dirs.append(_builtin_dir())
    return dirs


def available_presets() -> list[str]:
    names = set()
    for d in preset_dirs():
        if d.is_dir():
            names.update(p.stem for p in d.glob("*.json"))
    return sorted(names)


def load_preset(name: str) -> DeviceSpec:
    for d in preset_dirs():
        path = d / f"{name}.json"
        if path.is_file():
            with open(path, encoding="utf-8") as fh:
                try:
                    data = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise SpecError(f"preset {name} ({path}): invalid JSON at line {exc.lineno}: {exc.msg}") from None
            return device_from_dict(data, f"preset {name}")
    raise SpecError(f"unknown device preset {name!r}; available: {', '.join(available_presets())}")
