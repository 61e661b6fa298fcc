"""Instrument-agnostic analysis of force-deflection traces."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .contact import ContactMode, PlacementSpec, SimTrace, SolverConfig, run_sweep
from .mechanics import DeviceSpec, DomainError, StylusSpec

LINEAR_TOLERANCE = 0.03
LINEAR_RUN = 3
LOW_Z_FRACTION = 0.05
COLLAPSE_FRACTION = 0.8
MIN_OVERLAP = 0.5
FIT_WINDOW = (5e-6, 50e-6)

_CONTACT_LABELS = {ContactMode.EDGE_CONTACT.value, ContactMode.FLANK_CONTACT.value, ContactMode.FRACTURED.value}


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class Trace:
    """Force-deflection record in SI units, ordered by strictly increasing ``z``."""

    z: np.ndarray
    F: np.ndarray
    std: np.ndarray | None = None
    modes: tuple[str, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        F = np.asarray(self.F, dtype=float)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "F", F)
        if z.ndim != 1 or z.shape != F.shape:
            raise AnalysisError("z and F must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(F))):
            raise AnalysisError("trace contains non-finite values")
        if np.any(np.diff(z) <= 0):
            raise AnalysisError("trace z values must be strictly increasing")
        if self.std is not None:
            std = np.asarray(self.std, dtype=float)
            if std.shape != z.shape or not np.all(np.isfinite(std)):
                raise AnalysisError("std must be finite and match z")
            object.__setattr__(self, "std", std)
        if self.modes is not None:
            modes = tuple(self.modes)
            if len(modes) != len(z):
                raise AnalysisError("mode labels must match z")
            object.__setattr__(self, "modes", modes)

    def __len__(self):
        return len(self.z)

    @classmethod
    def from_sim(cls, sim: SimTrace, meta: dict | None = None) -> "Trace":
        return cls(sim.z, sim.F_z, None, tuple(m.value for m in sim.modes), dict(meta or {}))

    @classmethod
    def from_measurement(cls, mt, meta: dict | None = None) -> "Trace":
        modes = tuple(r.mode for r in mt.records)
        return cls(
            mt.z_cmd,
            mt.F_readout,
            mt.column("F_readout_std"),
            modes if all(modes) else None,
            dict(meta if meta is not None else mt.metadata),
        )

    def select(self, mask) -> "Trace":
        mask = np.asarray(mask, dtype=bool)
        return Trace(
            self.z[mask],
            self.F[mask],
            None if self.std is None else self.std[mask],
            None if self.modes is None else tuple(m for m, k in zip(self.modes, mask) if k),
            self.meta,
        )

    def sliding_prefix(self) -> "Trace":
        """Leading part of a labelled trace before the stylus leaves the mass surface."""
        if self.modes is None:
            return self
        n = len(self)
        for i, m in enumerate(self.modes):
            if m not in (ContactMode.NO_CONTACT.value, ContactMode.SURFACE_SLIDING.value):
                n = i
                break
        return self.select(np.arange(len(self)) < n)


@dataclass(frozen=True)
class StiffnessFit:
    k: float
    intercept: float
    z_lo: float
    z_hi: float
    residual_std: float
    n_points: int
    k_stderr: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fit_line(z, F) -> tuple[float, float, float, float]:
    """Ordinary least squares ``F = k z + b``; returns (k, b, residual std, std error of k)."""
    z = np.asarray(z, dtype=float)
    F = np.asarray(F, dtype=float)
    n = len(z)
    if n < 3:
        raise AnalysisError(f"need at least 3 points for a line fit, got {n}")
    zm = z.mean()
    dz = z - zm
    sxx = float(dz @ dz)
    if sxx == 0 or not sxx > 1e-30 * max(1.0, zm * zm) * n:
        raise AnalysisError("degenerate fit: all z values are equal")
    k = float(dz @ (F - F.mean())) / sxx
    b = float(F.mean() - k * zm)
    res = F - (k * z + b)
    dof = n - 2
    resid_std = math.sqrt(float(res @ res) / dof) if dof > 0 else 0.0
    return k, b, resid_std, resid_std / math.sqrt(sxx)


def fit_stiffness(trace: Trace, z_lo: float, z_hi: float) -> StiffnessFit:
    # endpoints are inclusive up to rounding of the grid
    eps = 1e-9 * max(abs(z_lo), abs(z_hi))
    mask = (trace.z >= z_lo - eps) & (trace.z <= z_hi + eps)
    n = int(mask.sum())
    if n < 3:
        raise AnalysisError(f"only {n} points in fit range [{z_lo:.3e}, {z_hi:.3e}] m; need 3")
    k, b, rs, se = fit_line(trace.z[mask], trace.F[mask])
    return StiffnessFit(k, b, float(trace.z[mask][0]), float(trace.z[mask][-1]), rs, n, se)


def correct_calibration(F, bias: float):
    if not 1 + bias > 0:
        raise DomainError(f"calibration bias must be > -1, got {bias}")
    return F / (1 + bias)


def series_stiffness(k: float, k_app: float) -> float:
    """Apparent stiffness of a device measured through a rig of stiffness ``k_app``."""
    if math.isinf(k_app):
        return k
    return 1.0 / (1.0 / k + 1.0 / k_app)


def correct_compliance(k_meas: float, k_app: float) -> float:
    """Remove the rig compliance from a measured stiffness."""
    if math.isinf(k_app):
        return k_meas
    if not 0 < k_meas < k_app:
        raise AnalysisError(
            f"measured stiffness {k_meas:.6g} N/m must lie in (0, {k_app:.6g}) N/m for the series correction"
        )
    return 1.0 / (1.0 / k_meas - 1.0 / k_app)


@dataclass(frozen=True)
class RegimeSegmentation:
    linear_end_z: float
    fz_max: tuple[float, float]
    slide_off_bump: tuple[float, float] | None
    fracture: tuple[float, float] | None
    labels: tuple[str, ...]
    contact_start_z: float | None = None

    def regimes_in_order(self) -> list[str]:
        return [k for k, _ in itertools.groupby(self.labels)]

    def to_dict(self) -> dict:
        return {
            "linear_end_z": self.linear_end_z,
            "fz_max": list(self.fz_max),
            "slide_off_bump": None if self.slide_off_bump is None else list(self.slide_off_bump),
            "fracture": None if self.fracture is None else list(self.fracture),
            "contact_start_z": self.contact_start_z,
            "regimes": self.regimes_in_order(),
            "labels": list(self.labels),
        }


def _linear_end(trace: Trace, end: int, lin_tol: float) -> int:
    z, F = trace.z[:end], trace.F[:end]
    span = z[-1] - z[0]
    low = np.flatnonzero(z <= z[0] + LOW_Z_FRACTION * span)
    if len(low) < 3:
        low = np.arange(min(3, len(z)))
    k, b, _, _ = fit_line(z[low], F[low])
    pred = k * z + b
    floor = 0.01 * np.max(np.abs(F))
    allowance = lin_tol * np.abs(pred)
    if trace.std is not None:
        allowance = allowance + 3 * trace.std[:end]
    exceed = (np.abs(F - pred) > allowance) & (np.abs(pred) >= floor)
    run = 0
    for i, e in enumerate(exceed):
        run = run + 1 if e else 0
        if run == LINEAR_RUN:
            return max(i - LINEAR_RUN, 0)
    return end - 1


def _prominence(trace: Trace, end: int) -> float:
    peak = float(np.max(np.abs(trace.F[:end]))) if end else 0.0
    prom = 0.01 * peak
    if trace.std is not None and end:
        prom = max(prom, 5 * float(np.median(trace.std[:end])))
    return prom


def segment_regimes(trace: Trace, lin_tol: float = LINEAR_TOLERANCE) -> RegimeSegmentation:
    """Split a force-deflection trace into linear, geometric and contact regimes.

    Mode labels, when present, locate the contact regime and fracture exactly;
    otherwise both are found from the force shape alone.
    """
    n = len(trace)
    if n < 10:
        raise AnalysisError(f"need at least 10 points to segment a trace, got {n}")
    z, F = trace.z, trace.F
    labels = trace.modes

    # fracture: first labelled point, else a terminal collapse of the force
    frac_idx = None
    if labels is not None:
        hits = [i for i, m in enumerate(labels) if m == ContactMode.FRACTURED.value]
        frac_idx = hits[0] if hits else None
    else:
        running = np.maximum.accumulate(F)
        collapsed = (running > 0) & (F < (1 - COLLAPSE_FRACTION) * running)
        for i in np.flatnonzero(collapsed):
            if np.all(collapsed[i:]):
                frac_idx = int(i)
                break
    end = frac_idx if frac_idx is not None else n
    if end < 3:
        raise AnalysisError("trace collapses before any usable data")

    contact_idx = None
    bump = None
    lin_limit = end
    if labels is not None:
        hits = [i for i, m in enumerate(labels[:end]) if m in _CONTACT_LABELS]
        contact_idx = hits[0] if hits else None
        if contact_idx is not None:
            lin_limit = max(contact_idx, min(3, end))
    lin_end = _linear_end(trace, lin_limit, lin_tol)
    prom = _prominence(trace, end)

    if labels is not None:
        edge = [i for i, m in enumerate(labels[:end]) if m == ContactMode.EDGE_CONTACT.value]
        geo_end = contact_idx if contact_idx is not None else end
        i_max = lin_end + int(np.argmax(F[lin_end:geo_end])) if geo_end > lin_end else lin_end
        if edge:
            j = edge[int(np.argmin(F[edge]))]
            bump = (float(z[j]), float(F[j]))
    else:
        peaks, _ = find_peaks(F[lin_end:end], prominence=prom) if prom > 0 else (np.array([], int), None)
        if len(peaks):
            i_max = lin_end + int(peaks[0])
            troughs, _ = find_peaks(-F[i_max:end], prominence=prom) if prom > 0 else (np.array([], int), None)
            if len(troughs):
                contact_idx = i_max + int(troughs[0])
                bump = (float(z[contact_idx]), float(F[contact_idx]))
        else:
            i_max = lin_end + int(np.argmax(F[lin_end:end]))

    lin_end = min(lin_end, i_max)
    if contact_idx is not None and contact_idx < i_max:
        contact_idx = i_max
    regime = []
    for i in range(n):
        if i <= lin_end:
            regime.append("linear")
        elif contact_idx is None or i < contact_idx:
            regime.append("geometric")
        else:
            regime.append("contact")
    if frac_idx is not None:
        # points after the break belong to the contact regime that ended in it
        for i in range(frac_idx, n):
            regime[i] = "contact" if regime[i] != "linear" else regime[i]

    fracture = None
    if frac_idx is not None:
        f_before = float(np.max(F[:frac_idx])) if frac_idx > 0 else 0.0
        fracture = (float(z[frac_idx]), float(F[frac_idx - 1]) if frac_idx > 0 else f_before)
    return RegimeSegmentation(
        linear_end_z=float(z[lin_end]),
        fz_max=(float(z[i_max]), float(F[i_max])),
        slide_off_bump=bump,
        fracture=fracture,
        labels=tuple(regime),
        contact_start_z=None if contact_idx is None else float(z[contact_idx]),
    )


def _sliding_forces(device, stylus, x_s, z_grid, cfg):
    sim = run_sweep(device, stylus, PlacementSpec(x_s), z_grid, cfg)
    ok = [m in (ContactMode.NO_CONTACT, ContactMode.SURFACE_SLIDING) for m in sim.modes]
    n = len(ok)
    for i, good in enumerate(ok):
        if not good:
            n = i
            break
    return sim.F_z[:n]


def placement_sensitivity(
    device: DeviceSpec,
    stylus: StylusSpec,
    base_x_s: float,
    deltas,
    z_grid,
    cfg: SolverConfig = SolverConfig(),
) -> list[float]:
    """Largest force change at matched depth caused by each placement offset.

    Only depths where both sweeps still have the stylus on the mass surface
    are compared.
    """
    base = _sliding_forces(device, stylus, base_x_s, z_grid, cfg)
    out = []
    for d in deltas:
        other = _sliding_forces(device, stylus, base_x_s + d, z_grid, cfg)
        m = min(len(base), len(other))
        out.append(float(np.max(np.abs(other[:m] - base[:m]))) if m else 0.0)
    return out


def placement_envelope(
    device: DeviceSpec,
    stylus: StylusSpec,
    base_x_s: float,
    half_width: float,
    z_grid,
    cfg: SolverConfig = SolverConfig(),
) -> float:
    """Width of the force band swept out by placements within ``base_x_s +/- half_width``."""
    curves = [_sliding_forces(device, stylus, base_x_s + d, z_grid, cfg) for d in (-half_width, 0.0, half_width)]
    m = min(len(c) for c in curves)
    if m == 0:
        return 0.0
    stack = np.vstack([c[:m] for c in curves])
    return float(np.max(stack.max(axis=0) - stack.min(axis=0)))


@dataclass(frozen=True)
class VariationReport:
    fits: list[StiffnessFit | None]
    max_deviation: float
    envelope: float
    within_envelope: bool
    pairwise: list[list[float]] = field(default_factory=list)
    z_range: tuple[float, float] = (0.0, 0.0)

    def to_dict(self) -> dict:
        return {
            "fits": [None if f is None else f.to_dict() for f in self.fits],
            "max_deviation": self.max_deviation,
            "envelope": self.envelope,
            "within_envelope": self.within_envelope,
            "pairwise": self.pairwise,
            "z_range": list(self.z_range),
        }


def compare_samples(traces: list[Trace], envelope: float, fit_window: tuple[float, float] = FIT_WINDOW) -> VariationReport:
    """Pairwise force deviation of several traces on their common depth range."""
    if not envelope >= 0:
        raise AnalysisError("envelope must be >= 0")
    if len(traces) < 1:
        raise AnalysisError("no traces to compare")
    lo = max(float(t.z[0]) for t in traces)
    hi = min(float(t.z[-1]) for t in traces)
    shortest = min(float(t.z[-1] - t.z[0]) for t in traces)
    if not hi > lo or (shortest > 0 and (hi - lo) < MIN_OVERLAP * shortest):
        raise AnalysisError("traces do not share at least half of their depth range")
    ref = traces[0]
    zc = ref.z[(ref.z >= lo) & (ref.z <= hi)]
    curves = [np.interp(zc, t.z, t.F) for t in traces]
    m = len(traces)
    pairwise = [[0.0] * m for _ in range(m)]
    worst = 0.0
    for i, j in itertools.combinations(range(m), 2):
        d = float(np.max(np.abs(curves[i] - curves[j])))
        pairwise[i][j] = pairwise[j][i] = d
        worst = max(worst, d)
    fits = []
    for t in traces:
        try:
            fits.append(fit_stiffness(t, *fit_window))
        except AnalysisError:
            fits.append(None)
    return VariationReport(fits, worst, envelope, worst <= envelope, pairwise, (lo, hi))


REPORT_FORMAT = "stylus-analysis v1"


@dataclass(frozen=True)
class AnalysisReport:
    fit: StiffnessFit
    k_corrected: float
    segmentation: RegimeSegmentation | None
    corrections: dict
    events: list = field(default_factory=list)
    sensitivity: list = field(default_factory=list)
    variation: VariationReport | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "fits": [dict(self.fit.to_dict(), k_corrected=self.k_corrected)],
            "corrections": self.corrections,
            "segmentation": None if self.segmentation is None else self.segmentation.to_dict(),
            "events": list(self.events),
            "sensitivity": list(self.sensitivity),
            "variation": None if self.variation is None else self.variation.to_dict(),
            "warnings": list(self.warnings),
        }


def analyze_trace(
    trace: Trace,
    fit_window: tuple[float, float] = FIT_WINDOW,
    calibration_bias: float | None = None,
    apparatus_stiffness: float | None = None,
    events: list | None = None,
    lin_tol: float = LINEAR_TOLERANCE,
) -> AnalysisReport:
    """Fit and segment one trace after any requested corrections.

    The calibration correction rescales the forces before anything else; the
    apparatus correction is applied to the fitted stiffness.
    """
    warnings = []
    corrections = {"calibration_bias": calibration_bias, "apparatus_stiffness": apparatus_stiffness}
    if calibration_bias is not None:
        F = correct_calibration(trace.F, calibration_bias)
        std = None if trace.std is None else correct_calibration(trace.std, calibration_bias)
        trace = Trace(trace.z, F, std, trace.modes, trace.meta)
    fit = fit_stiffness(trace, *fit_window)
    k = fit.k
    if apparatus_stiffness is not None:
        k = correct_compliance(k, apparatus_stiffness)
    seg = None
    if len(trace) >= 10:
        seg = segment_regimes(trace, lin_tol)
    else:
        warnings.append(f"only {len(trace)} points; segmentation skipped")
    return AnalysisReport(fit, k, seg, corrections, list(events or []), [], None, warnings)
