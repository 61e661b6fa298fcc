"""Closed-form mechanics of a cantilever/proof-mass device and a spherical stylus.

All quantities are SI. The beam runs from the clamp (x = 0) to its tip
(x = L); the rigid proof mass is attached at the tip and extends a further
``mass.length`` outward. Load-point offsets ``d`` are measured along the mass
from the beam tip.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Any

SLENDERNESS_LIMIT = 0.2


class ModelValidityWarning(UserWarning):
    """Geometry lies outside the range where slender-beam theory is trusted."""


class SpecError(ValueError):
    """Invalid device, stylus or material description."""


class DomainError(ValueError):
    """Argument outside the domain of a mechanics formula."""


@dataclass(frozen=True)
class MaterialProps:
    youngs_modulus: float
    poisson_ratio: float
    fracture_strength: float = 1.0e9

    def __post_init__(self):
        if not self.youngs_modulus > 0:
            raise SpecError(f"youngs_modulus must be > 0, got {self.youngs_modulus}")
        if not 0 <= self.poisson_ratio < 0.5:
            raise SpecError(f"poisson_ratio must lie in [0, 0.5), got {self.poisson_ratio}")
        if not self.fracture_strength > 0:
            raise SpecError(f"fracture_strength must be > 0, got {self.fracture_strength}")


SILICON = MaterialProps(youngs_modulus=169e9, poisson_ratio=0.28, fracture_strength=1.0e9)
DIAMOND = MaterialProps(youngs_modulus=1141e9, poisson_ratio=0.07, fracture_strength=2.8e9)
SAPPHIRE = MaterialProps(youngs_modulus=345e9, poisson_ratio=0.29, fracture_strength=0.4e9)
TUNGSTEN_CARBIDE = MaterialProps(youngs_modulus=600e9, poisson_ratio=0.22, fracture_strength=0.5e9)

MATERIALS = {
    "silicon": SILICON,
    "diamond": DIAMOND,
    "sapphire": SAPPHIRE,
    "tungsten_carbide": TUNGSTEN_CARBIDE,
}


@dataclass(frozen=True)
class BeamSpec:
    length: float
    width: float
    thickness: float
    youngs_modulus: float = field(default=SILICON.youngs_modulus, repr=False)

    def __post_init__(self):
        for name in ("length", "width", "thickness", "youngs_modulus"):
            if not getattr(self, name) > 0:
                raise SpecError(f"beam {name} must be > 0, got {getattr(self, name)}")
        if self.thickness / self.length > SLENDERNESS_LIMIT:
            warnings.warn(
                f"beam thickness/length = {self.thickness / self.length:.3g} exceeds "
                f"{SLENDERNESS_LIMIT}; Euler-Bernoulli results are approximate",
                ModelValidityWarning,
                stacklevel=3,
            )

    @property
    def second_moment(self) -> float:
        return self.width * self.thickness**3 / 12.0

    @property
    def flexural_rigidity(self) -> float:
        return self.youngs_modulus * self.second_moment


@dataclass(frozen=True)
class ProofMassSpec:
    length: float
    thickness: float

    def __post_init__(self):
        if not self.length > 0:
            raise SpecError(f"proof mass length must be > 0, got {self.length}")
        if not self.thickness > 0:
            raise SpecError(f"proof mass thickness must be > 0, got {self.thickness}")


@dataclass(frozen=True)
class StylusSpec:
    tip_radius: float
    cone_half_angle: float
    material: MaterialProps = DIAMOND

    def __post_init__(self):
        if not self.tip_radius > 0:
            raise SpecError(f"tip_radius must be > 0, got {self.tip_radius}")
        if not 0 < self.cone_half_angle < math.pi / 2:
            raise SpecError(f"cone_half_angle must lie in (0, pi/2), got {self.cone_half_angle}")

    @property
    def flank_tilt(self) -> float:
        """Surface tilt at which the mass becomes parallel to the cone flank."""
        return math.pi / 2 - self.cone_half_angle


@dataclass(frozen=True)
class DeviceSpec:
    beam: BeamSpec
    mass: ProofMassSpec
    material: MaterialProps = SILICON
    support_rot_compliance: float = 0.0
    nominal_center_stiffness: float | None = None
    name: str = ""

    def __post_init__(self):
        if not self.support_rot_compliance >= 0:
            raise SpecError(
                f"support_rot_compliance must be >= 0, got {self.support_rot_compliance}"
            )
        if self.beam.youngs_modulus != self.material.youngs_modulus:
            # the beam carries E for EI; keep the two in sync
            object.__setattr__(
                self,
                "beam",
                BeamSpec(
                    self.beam.length,
                    self.beam.width,
                    self.beam.thickness,
                    youngs_modulus=self.material.youngs_modulus,
                ),
            )

    @property
    def cosym(self) -> float:
        """Centre of symmetry of the mass top surface, measured from the beam tip."""
        return self.mass.length / 2.0


def tip_compliance(beam: BeamSpec, c_s: float = 0.0) -> tuple[float, float, float]:
    """Entries (c_QQ, c_QM, c_MM) of the symmetric 2x2 tip compliance matrix."""
    L = beam.length
    EI = beam.flexural_rigidity
    c_qq = L**3 / (3 * EI) + c_s * L * L
    c_qm = L**2 / (2 * EI) + c_s * L
    c_mm = L / EI + c_s
    return c_qq, c_qm, c_mm


def beam_tip_response(beam: BeamSpec, Q: float, M: float, c_s: float = 0.0) -> tuple[float, float]:
    """Tip deflection and rotation under a transverse tip force and tip moment.

    Parameters
    ----------
    beam : BeamSpec
    Q : float
        Transverse force at the tip (N), positive in the deflection direction.
    M : float
        Moment at the tip (N m), positive when it rotates the tip the same way Q does.
    c_s : float
        Rotational compliance of the clamp (rad/(N m)).

    Returns
    -------
    delta, theta : float
        Tip deflection (m) and tip rotation (rad).
    """
    c_qq, c_qm, c_mm = tip_compliance(beam, c_s)
    return c_qq * Q + c_qm * M, c_qm * Q + c_mm * M


def linear_stiffness_at(device: DeviceSpec, d: float) -> float:
    """Small-deflection stiffness for a vertical point load at offset ``d`` on the mass."""
    Lm = device.mass.length
    if not 0 <= d <= Lm:
        raise DomainError(f"load offset d={d} outside [0, {Lm}]")
    L = device.beam.length
    EI = device.beam.flexural_rigidity
    c_s = device.support_rot_compliance
    compliance = (L**3 / 3 + d * L**2 + L * d**2) / EI + c_s * (L + d) ** 2
    return 1.0 / compliance


def effective_modulus(mat_1: MaterialProps, mat_2: MaterialProps) -> float:
    return 1.0 / (
        (1 - mat_1.poisson_ratio**2) / mat_1.youngs_modulus
        + (1 - mat_2.poisson_ratio**2) / mat_2.youngs_modulus
    )


def hertz_peak_pressure(F: float, R: float, mat_tip: MaterialProps, mat_substrate: MaterialProps) -> float:
    """Peak Hertz pressure under a sphere of radius ``R`` pressed onto a flat with force ``F``."""
    if F < 0:
        raise DomainError(f"contact force must be >= 0, got {F}")
    if not R > 0:
        raise DomainError(f"sphere radius must be > 0, got {R}")
    e_star = effective_modulus(mat_tip, mat_substrate)
    return (6 * F * e_star**2 / (math.pi**3 * R**2)) ** (1.0 / 3.0)


def hertz_contact_radius(F: float, R: float, mat_tip: MaterialProps, mat_substrate: MaterialProps) -> float:
    if F < 0:
        raise DomainError(f"contact force must be >= 0, got {F}")
    if not R > 0:
        raise DomainError(f"sphere radius must be > 0, got {R}")
    e_star = effective_modulus(mat_tip, mat_substrate)
    return (3 * F * R / (4 * e_star)) ** (1.0 / 3.0)


def root_bending_stress(beam: BeamSpec, M_root: float) -> float:
    """Peak bending stress at the clamp for a root moment ``M_root``."""
    return abs(M_root) * (beam.thickness / 2) / beam.second_moment


def is_fractured(stress: float, material: MaterialProps) -> bool:
    return stress >= material.fracture_strength


# --- JSON documents ---------------------------------------------------------


def _strict(cls, data: Any, where: str) -> dict:
    if not isinstance(data, dict):
        raise SpecError(f"{where}: expected an object, got {type(data).__name__}")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise SpecError(f"{where}: unknown field(s) {', '.join(unknown)}")
    return data


def _number(data: dict, key: str, where: str, required: bool = True, default=None):
    if key not in data:
        if required:
            raise SpecError(f"{where}.{key}: missing required field")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def material_from_dict(data: Any, where: str = "material") -> MaterialProps:
    _strict(MaterialProps, data, where)
    try:
        return MaterialProps(
            youngs_modulus=_number(data, "youngs_modulus", where),
            poisson_ratio=_number(data, "poisson_ratio", where),
            fracture_strength=_number(data, "fracture_strength", where, False, 1.0e9),
        )
    except SpecError as exc:
        raise SpecError(f"{where}: {exc}") from None


def stylus_from_dict(data: Any, where: str = "stylus") -> StylusSpec:
    _strict(StylusSpec, data, where)
    material = DIAMOND
    if "material" in data:
        material = material_from_dict(data["material"], f"{where}.material")
    try:
        return StylusSpec(
            tip_radius=_number(data, "tip_radius", where),
            cone_half_angle=_number(data, "cone_half_angle", where),
            material=material,
        )
    except SpecError as exc:
        raise SpecError(f"{where}: {exc}") from None


def device_from_dict(data: Any, where: str = "device") -> DeviceSpec:
    _strict(DeviceSpec, data, where)
    for key in ("beam", "mass"):
        if key not in data:
            raise SpecError(f"{where}.{key}: missing required field")
    beam_d = data["beam"]
    mass_d = data["mass"]
    if not isinstance(beam_d, dict) or set(beam_d) - {"length", "width", "thickness"}:
        if isinstance(beam_d, dict):
            extra = sorted(set(beam_d) - {"length", "width", "thickness"})
            raise SpecError(f"{where}.beam: unknown field(s) {', '.join(extra)}")
        raise SpecError(f"{where}.beam: expected an object")
    _strict(ProofMassSpec, mass_d, f"{where}.mass")
    material = SILICON
    if "material" in data:
        material = material_from_dict(data["material"], f"{where}.material")
    name = data.get("name", "")
    if not isinstance(name, str):
        raise SpecError(f"{where}.name: expected a string")
    try:
        beam = BeamSpec(
            length=_number(beam_d, "length", f"{where}.beam"),
            width=_number(beam_d, "width", f"{where}.beam"),
            thickness=_number(beam_d, "thickness", f"{where}.beam"),
            youngs_modulus=material.youngs_modulus,
        )
        mass = ProofMassSpec(
            length=_number(mass_d, "length", f"{where}.mass"),
            thickness=_number(mass_d, "thickness", f"{where}.mass"),
        )
        return DeviceSpec(
            beam=beam,
            mass=mass,
            material=material,
            support_rot_compliance=_number(data, "support_rot_compliance", where, False, 0.0),
            nominal_center_stiffness=_number(data, "nominal_center_stiffness", where, False, None),
            name=name,
        )
    except SpecError as exc:
        raise SpecError(f"{where}: {exc}") from None


def material_to_dict(mat: MaterialProps) -> dict:
    return asdict(mat)


def stylus_to_dict(stylus: StylusSpec) -> dict:
    return {
        "tip_radius": stylus.tip_radius,
        "cone_half_angle": stylus.cone_half_angle,
        "material": material_to_dict(stylus.material),
    }


def device_to_dict(device: DeviceSpec) -> dict:
    out = {
        "name": device.name,
        "beam": {
            "length": device.beam.length,
            "width": device.beam.width,
            "thickness": device.beam.thickness,
        },
        "mass": {"length": device.mass.length, "thickness": device.mass.thickness},
        "material": material_to_dict(device.material),
        "support_rot_compliance": device.support_rot_compliance,
    }
    if device.nominal_center_stiffness is not None:
        out["nominal_center_stiffness"] = device.nominal_center_stiffness
    return out
