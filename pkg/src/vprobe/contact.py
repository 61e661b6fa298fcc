"""Quasi-static stylus/proof-mass contact: equilibrium solve, mode classification, events.

Kinematics are exact for the rigid mass and the sphere-capped cone; the beam is
a linear Euler-Bernoulli spring at its tip. Contact is frictionless, so the
force is normal to whichever surface carries it. The mass top surface passes
through the beam tip, which keeps its horizontal position.

An equilibrium path is a chain of branches (see ``_pykernels``): the sphere
sliding on the surface, then (if it reaches the outer edge first) the sphere
and later the cone flank riding on the corner, then the surface lying flush
against the cone flank. The fracture predicate is checked on top of that.
"""

from __future__ import annotations

import enum
import functools
import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .mechanics import DeviceSpec, StylusSpec, root_bending_stress, tip_compliance

# below this the flank branch would need an infinite force
_BEAM_LOAD_LIMIT = 1e-6


class ContactMode(str, enum.Enum):
    NO_CONTACT = "NoContact"
    SURFACE_SLIDING = "SurfaceSliding"
    EDGE_CONTACT = "EdgeContact"
    FLANK_CONTACT = "FlankContact"
    FRACTURED = "Fractured"


class EventKind(str, enum.Enum):
    SLIDE_OFF = "SlideOff"
    EDGE_CONTACT_BEGIN = "EdgeContactBegin"
    FLANK_CONTACT_BEGIN = "FlankContactBegin"
    FRACTURE = "Fracture"


_BRANCH_MODE = {
    K.SLIDE: ContactMode.SURFACE_SLIDING,
    K.EDGE: ContactMode.EDGE_CONTACT,
    K.CORNER_FLANK: ContactMode.EDGE_CONTACT,
    K.FLANK: ContactMode.FLANK_CONTACT,
}


class SolverError(RuntimeError):
    def __init__(self, message: str, z_act: float, residual: float = float("nan")):
        super().__init__(f"{message} (z_act={z_act:.6e} m, residual={residual:.3e} N)")
        self.z_act = z_act
        self.residual = residual


class NoContact(Exception):
    """The sphere cannot be tangent to the mass surface in the given configuration."""


@dataclass(frozen=True)
class PlacementSpec:
    x_s: float

    def __post_init__(self):
        if not math.isfinite(self.x_s) or self.x_s < 0:
            raise ValueError(f"stylus position x_s must be >= 0, got {self.x_s}")

    @classmethod
    def at_cosym(cls, device: DeviceSpec, offset: float = 0.0) -> "PlacementSpec":
        return cls(device.cosym + offset)


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-9
    max_iterations: int = 200
    continuation: bool = True
    event_resolution: float = 1e-8

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("solver tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("solver max_iterations must be >= 1")
        if not self.event_resolution > 0:
            raise ValueError("event_resolution must be > 0")


@dataclass(frozen=True)
class EquilibriumState:
    z_act: float
    theta: float
    delta: float
    s: float
    F: float
    F_z: float
    F_x: float
    M_root: float
    sigma_root: float
    mode: ContactMode
    phi: float = 0.0
    load_on_beam: bool = False
    residual: float = 0.0
    branch: int = field(default=-1, repr=False)
    param: float = field(default=0.0, repr=False)

    @classmethod
    def zero(cls, z_act: float = 0.0, mode: ContactMode = ContactMode.NO_CONTACT) -> "EquilibriumState":
        return cls(z_act, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, mode)

    def to_dict(self) -> dict:
        return {
            "z_act": self.z_act,
            "theta": self.theta,
            "delta": self.delta,
            "s": self.s,
            "F": self.F,
            "F_z": self.F_z,
            "F_x": self.F_x,
            "M_root": self.M_root,
            "sigma_root": self.sigma_root,
            "mode": self.mode.value,
            "phi": self.phi,
            "load_on_beam": self.load_on_beam,
        }


@dataclass(frozen=True)
class Event:
    kind: EventKind
    z_act: float
    F_z: float

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "z_act": self.z_act, "F_z": self.F_z}


@dataclass
class SimTrace:
    states: list[EquilibriumState] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    @property
    def z(self) -> np.ndarray:
        return np.array([s.z_act for s in self.states])

    @property
    def F_z(self) -> np.ndarray:
        return np.array([s.F_z for s in self.states])

    @property
    def modes(self) -> list[ContactMode]:
        return [s.mode for s in self.states]

    def event_kinds(self) -> list[EventKind]:
        return [e.kind for e in self.events]

    def first_event(self, kind: EventKind) -> Event | None:
        for e in self.events:
            if e.kind == kind:
                return e
        return None

    def events_json(self, meta: dict | None = None) -> str:
        doc = {
            "format": "stylus-events v1",
            "meta": meta or {},
            "events": [e.to_dict() for e in self.events],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class Branch:
    kind: int
    p_lo: float
    p_hi: float
    z_lo: float
    z_hi: float

    @property
    def mode(self) -> ContactMode:
        return _BRANCH_MODE[self.kind]


def sliding_arm(theta: float, x_s: float, R: float) -> float:
    """Contact point along the mass for the sphere tangent to the tilted surface."""
    return x_s / math.cos(theta) - R * math.tan(theta)


def contact_point(
    theta: float,
    delta: float | None,
    x_s: float,
    stylus: StylusSpec,
    z_act: float | None = None,
    geometry=None,
    tol: float = 1e-9,
) -> tuple[float, float]:
    """Sphere/plane tangency on the tilted mass surface.

    Returns ``(s, tangency_offset)``: the contact point measured along the mass
    from the beam tip, and the horizontal distance by which the contact point
    sits inward of the stylus axis (``R sin(theta)``). When ``delta`` and
    ``z_act`` are given the tangency condition is checked; ``geometry`` (a
    ProofMassSpec) additionally bounds ``s`` by the outer edge.
    """
    R = stylus.tip_radius
    if not 0 <= theta < math.pi / 2:
        raise NoContact(f"surface tilt {theta} outside [0, pi/2)")
    if delta is not None and z_act is not None:
        gap = x_s * math.sin(theta) + (R - z_act + delta) * math.cos(theta) - R
        if abs(gap) > tol * max(R, abs(z_act)):
            raise NoContact(f"sphere is not tangent to the surface (gap {gap:.3e} m)")
    s = sliding_arm(theta, x_s, R)
    if geometry is not None and s > geometry.length:
        raise NoContact(f"tangency point s={s:.6e} m lies beyond the outer edge")
    return s, R * math.sin(theta)


def edge_contact_angle(theta: float, x_s: float, mass_length: float, tip_radius: float) -> float:
    """Angle from vertical of the contact normal when the mass corner touches the sphere."""
    return K.edge_angle(theta, x_s, mass_length, tip_radius)


class ContactPath:
    """Branch table of the equilibrium path for one device, stylus and placement."""

    def __init__(self, device: DeviceSpec, stylus: StylusSpec, placement: PlacementSpec):
        self.device = device
        self.stylus = stylus
        self.placement = placement
        beam = device.beam
        c_s = device.support_rot_compliance
        c_qq, c_qm, c_mm = tip_compliance(beam, c_s)
        x_s = placement.x_s
        Lm = device.mass.length
        R = stylus.tip_radius
        theta_f = stylus.flank_tilt
        self.prm = (c_qq, c_qm, c_mm, beam.length, beam.flexural_rigidity, c_s, x_s, Lm, R, theta_f)
        self.theta_flank = theta_f
        self.theta_slide_off = self._slide_off_tilt(x_s, Lm, R)

        branches = []
        slides_off = self.theta_slide_off is not None and self.theta_slide_off < theta_f
        theta_end = self.theta_slide_off if slides_off else theta_f
        branches.append(self._branch(K.SLIDE, 0.0, theta_end))
        if slides_off:
            branches.append(self._branch(K.EDGE, self.theta_slide_off, theta_f))
            theta_corner = math.acos((x_s - R * math.sin(theta_f)) / Lm)
            branches.append(self._branch(K.CORNER_FLANK, theta_corner, theta_f))
            q_onset = Lm
        else:
            q_onset = sliding_arm(theta_f, x_s, R)
        q_min = -beam.length * (1 - _BEAM_LOAD_LIMIT)
        branches.append(self._branch(K.FLANK, -q_onset, -q_min))
        self.branches = branches
        self._z_hi = [b.z_hi for b in branches]
        self.slides_off = slides_off

    @staticmethod
    def _slide_off_tilt(x_s: float, Lm: float, R: float) -> float | None:
        # s(theta) dips (rolling) until sin(theta) = R/x_s, then grows without bound
        if x_s <= R:
            return None
        t_min = math.asin(R / x_s)
        f = lambda t: sliding_arm(t, x_s, R) - Lm
        if f(t_min) >= 0:
            return t_min
        hi = math.pi / 2 - 1e-12
        if f(hi) <= 0:
            return None
        return brentq(f, t_min, hi, xtol=1e-15, rtol=1e-15, maxiter=200)

    def _branch(self, kind: int, p_lo: float, p_hi: float) -> Branch:
        z_lo = K.branch_depth(kind, p_lo, self.prm)
        z_hi = K.branch_depth(kind, p_hi, self.prm)
        return Branch(kind, p_lo, p_hi, z_lo, z_hi)

    @property
    def z_limit(self) -> float:
        """Largest stylus depth the model can represent."""
        return self.branches[-1].z_hi

    def landmarks(self) -> dict[str, float | None]:
        """Stylus depths where the branch structure changes."""
        out: dict[str, float | None] = {"slide_off": None, "flank_onset": None}
        for b in self.branches:
            if b.kind == K.EDGE:
                out["slide_off"] = b.z_lo
            if b.kind == K.FLANK:
                out["flank_onset"] = b.z_lo
        out["model_limit"] = self.z_limit
        return out

    def locate(self, z: float) -> int:
        """Index of the branch containing stylus depth ``z`` (> 0)."""
        i = bisect_left(self._z_hi, z)
        if i >= len(self.branches):
            raise SolverError("stylus depth beyond the model range", z)
        return i

    def make_state(self, kind: int, p: float, z: float, residual: float = 0.0) -> EquilibriumState:
        theta, phi, arm, g_theta, g_delta, zoff = K.branch_terms(kind, p, self.prm)
        F = theta / g_theta
        delta = F * g_delta
        c = math.cos(phi)
        L = self.device.beam.length
        if kind == K.FLANK and arm < 0:
            M_root = F * c * (L + arm)
        else:
            M_root = F * (L * c + arm)
        s = self.device.mass.length if kind in (K.EDGE, K.CORNER_FLANK) else arm
        return EquilibriumState(
            z_act=z,
            theta=theta,
            delta=delta,
            s=s,
            F=F,
            F_z=F * c,
            F_x=F * math.sin(phi),
            M_root=M_root,
            sigma_root=root_bending_stress(self.device.beam, M_root),
            mode=_BRANCH_MODE[kind],
            phi=phi,
            load_on_beam=kind == K.FLANK and arm < 0,
            residual=residual,
            branch=kind,
            param=p,
        )

    def solve(self, z: float, cfg: SolverConfig, guess: float | None = None, index: int | None = None) -> EquilibriumState:
        """Geometric equilibrium at depth ``z`` ignoring the fracture predicate."""
        if z <= 0:
            return EquilibriumState.zero(z)
        i = self.locate(z) if index is None else index
        b = self.branches[i]
        if guess is None or not cfg.continuation:
            guess = 0.5 * (b.p_lo + b.p_hi)
        p, r, _, ok = K.solve_branch(b.kind, z, b.p_lo, b.p_hi, guess, self.prm, cfg.tolerance, cfg.max_iterations)
        if not ok:
            raise SolverError("equilibrium solve did not converge", z, r)
        return self.make_state(b.kind, p, z, r)


@functools.lru_cache(maxsize=256)
def contact_path(device: DeviceSpec, stylus: StylusSpec, placement: PlacementSpec) -> ContactPath:
    return ContactPath(device, stylus, placement)


def _fractured(state: EquilibriumState, device: DeviceSpec) -> bool:
    return state.sigma_root >= device.material.fracture_strength


def solve_equilibrium(
    device: DeviceSpec,
    stylus: StylusSpec,
    placement: PlacementSpec,
    z_act: float,
    prev: EquilibriumState | None = None,
    cfg: SolverConfig = SolverConfig(),
) -> EquilibriumState:
    """Equilibrium state for a prescribed stylus depth ``z_act``.

    A state whose root stress reaches the fracture strength is reported as
    ``Fractured`` with zero forces: the broken structure carries no load.
    """
    if not z_act >= 0:
        raise ValueError(f"z_act must be >= 0, got {z_act}")
    if z_act == 0:
        return EquilibriumState.zero(0.0)
    path = contact_path(device, stylus, placement)
    i = path.locate(z_act)
    guess = None
    if prev is not None and prev.branch == path.branches[i].kind:
        guess = prev.param
    state = path.solve(z_act, cfg, guess, i)
    if _fractured(state, device):
        return EquilibriumState.zero(z_act, ContactMode.FRACTURED)
    return state


def _restricted_solve(path: ContactPath, kinds: tuple[int, ...], z_act: float, cfg: SolverConfig, what: str):
    idx = [i for i, b in enumerate(path.branches) if b.kind in kinds]
    if not idx:
        raise ValueError(f"{what} does not occur for this placement")
    lo = path.branches[idx[0]].z_lo
    hi = path.branches[idx[-1]].z_hi
    if not lo <= z_act <= hi:
        raise ValueError(f"{what} spans z_act in [{lo:.6e}, {hi:.6e}] m; got {z_act:.6e}")
    i = path.locate(z_act) if z_act > lo else idx[0]
    return path.solve(z_act, cfg, None, i)


def edge_contact_state(
    device: DeviceSpec,
    stylus: StylusSpec,
    placement: PlacementSpec,
    z_act: float,
    cfg: SolverConfig = SolverConfig(),
) -> EquilibriumState:
    """Equilibrium with the mass outer corner touching the stylus (after slide-off)."""
    path = contact_path(device, stylus, placement)
    return _restricted_solve(path, (K.EDGE, K.CORNER_FLANK), z_act, cfg, "edge contact")


def flank_contact_state(
    device: DeviceSpec,
    stylus: StylusSpec,
    placement: PlacementSpec,
    z_act: float,
    cfg: SolverConfig = SolverConfig(),
) -> EquilibriumState:
    """Equilibrium with the mass surface lying flush against the cone flank."""
    path = contact_path(device, stylus, placement)
    return _restricted_solve(path, (K.FLANK,), z_act, cfg, "flank contact")


def _bisect_event(pred, z_lo: float, z_hi: float, resolution: float) -> float:
    """Smallest depth (to ``resolution``) in (z_lo, z_hi] where ``pred`` holds."""
    while z_hi - z_lo > resolution:
        mid = 0.5 * (z_lo + z_hi)
        if pred(mid):
            z_hi = mid
        else:
            z_lo = mid
    return z_hi


_ENTRY_EVENTS = {
    K.EDGE: (EventKind.SLIDE_OFF, EventKind.EDGE_CONTACT_BEGIN),
    K.FLANK: (EventKind.FLANK_CONTACT_BEGIN,),
}


def run_sweep(
    device: DeviceSpec,
    stylus: StylusSpec,
    placement: PlacementSpec,
    z_grid,
    cfg: SolverConfig = SolverConfig(),
) -> SimTrace:
    """Quasi-static sweep over the stylus depths in ``z_grid``.

    One state per grid point up to and including the first fractured one.
    Mode changes between grid points are located by bisection to
    ``cfg.event_resolution`` and recorded as events.
    """
    z = np.asarray(z_grid, dtype=float)
    if z.size == 0:
        return SimTrace()
    if z.ndim != 1 or not np.all(np.isfinite(z)):
        raise ValueError("z_grid must be a 1-D sequence of finite depths")
    if z[0] < 0 or np.any(np.diff(z) <= 0):
        raise ValueError("z_grid must be strictly increasing and start at >= 0")

    path = contact_path(device, stylus, placement)
    positive = z > 0
    in_range = z <= path.z_limit
    solvable = positive & in_range
    idx = np.searchsorted(path._z_hi, z[solvable], side="left")
    kinds = np.array([path.branches[i].kind for i in idx], dtype=np.int64)
    los = np.array([path.branches[i].p_lo for i in idx])
    his = np.array([path.branches[i].p_hi for i in idx])
    if cfg.continuation:
        ps, rs, _, ok = K.solve_sequence(kinds, los, his, z[solvable], path.prm, cfg.tolerance, cfg.max_iterations)
    else:
        out = [
            K.solve_branch(int(k), float(zz), float(a), float(b), 0.5 * (a + b), path.prm, cfg.tolerance, cfg.max_iterations)
            for k, zz, a, b in zip(kinds, z[solvable], los, his)
        ]
        ps = np.array([o[0] for o in out])
        rs = np.array([o[1] for o in out])
        ok = np.array([o[3] for o in out], dtype=bool)

    trace = SimTrace()
    sigma_f = device.material.fracture_strength
    j = 0
    prev_state: EquilibriumState | None = None
    for zi, pos, rng in zip(z, positive, in_range):
        zi = float(zi)
        if not pos:
            state = EquilibriumState.zero(zi)
        elif not rng:
            raise SolverError("stylus depth beyond the model range", zi)
        else:
            if not ok[j]:
                raise SolverError("equilibrium solve did not converge", zi, float(rs[j]))
            state = path.make_state(int(kinds[j]), float(ps[j]), zi, float(rs[j]))
            j += 1
        if prev_state is not None:
            _record_transitions(path, cfg, prev_state, state, trace.events)
        if state.sigma_root >= sigma_f:
            z_lo = prev_state.z_act if prev_state is not None else 0.0
            z_ev = _bisect_event(
                lambda zz: path.solve(zz, cfg).sigma_root >= sigma_f, z_lo, zi, cfg.event_resolution
            )
            trace.events.append(Event(EventKind.FRACTURE, z_ev, path.solve(z_ev, cfg).F_z))
            trace.states.append(EquilibriumState.zero(zi, ContactMode.FRACTURED))
            break
        trace.states.append(state)
        prev_state = state
    return trace


def _record_transitions(path: ContactPath, cfg: SolverConfig, a: EquilibriumState, b: EquilibriumState, events: list):
    if b.branch < 0:
        return
    i_a = path.locate(a.z_act) if a.z_act > 0 else 0
    i_b = path.locate(b.z_act)
    for k in range(i_a + 1, i_b + 1):
        kind = path.branches[k].kind
        if kind not in _ENTRY_EVENTS:
            continue
        z_ev = _bisect_event(lambda zz: path.locate(zz) >= k, a.z_act, b.z_act, cfg.event_resolution)
        fz = path.solve(z_ev, cfg).F_z
        for ev in _ENTRY_EVENTS[kind]:
            events.append(Event(ev, z_ev, fz))


def sweep_grid(path: ContactPath, step: float, past_flank: float = 0.05, stop: float | None = None) -> np.ndarray:
    """Uniform depth grid from 0 that runs a little past flank-contact onset."""
    if stop is None:
        onset = path.landmarks()["flank_onset"]
        stop = min(onset * (1 + past_flank), path.z_limit * (1 - 1e-9))
    n = int(math.floor(stop / step + 1e-9))
    return np.arange(n + 1) * step
