"""Static SVG figures. Axes follow the usual force-deflection conventions (um, uN)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .traceio import UM, UN, atomic_write_text  # noqa: E402

# fixed hash salt and no date stamp keep the SVG byte-stable
matplotlib.rcParams["svg.hashsalt"] = "vprobe"
_SVG_META = {"Date": None, "Creator": "vprobe"}


def _save(fig, path) -> None:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata=_SVG_META)
    plt.close(fig)
    atomic_write_text(path, buf.getvalue())


def force_curve(path, z, F, events=(), title: str = "Force readout versus deflection") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([v * UM for v in z], [v * UN for v in F], lw=1.2, color="k")
    for ev in events:
        ax.axvline(ev.z_act * UM, ls=":", lw=0.8, color="tab:red")
        ax.annotate(ev.kind.value, (ev.z_act * UM, ev.F_z * UN), fontsize=7, rotation=90, va="bottom")
    ax.set_xlabel("Deflection z [um]")
    ax.set_ylabel("Force F_z [uN]")
    ax.set_title(title)
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    _save(fig, path)


def annotated_analysis(path, trace, seg, fit=None) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    colours = {"linear": "tab:blue", "geometric": "tab:orange", "contact": "tab:green"}
    labels = seg.labels
    for name, colour in colours.items():
        idx = [i for i, lab in enumerate(labels) if lab == name]
        if idx:
            ax.plot(trace.z[idx] * UM, trace.F[idx] * UN, ".", ms=2, color=colour, label=name)
    if fit is not None:
        zs = [fit.z_lo, fit.z_hi]
        ax.plot([z * UM for z in zs], [(fit.k * z + fit.intercept) * UN for z in zs], "k-", lw=1.5,
                label=f"fit k = {fit.k:.3f} N/m")
    ax.plot([seg.fz_max[0] * UM], [seg.fz_max[1] * UN], "rv", label="F_z max")
    if seg.fracture is not None:
        ax.plot([seg.fracture[0] * UM], [seg.fracture[1] * UN], "kx", label="fracture")
    ax.set_xlabel("Deflection z [um]")
    ax.set_ylabel("Force F_z [uN]")
    ax.legend(fontsize=7)
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    _save(fig, path)


def stiffness_vs_position(path, positions, analytic, measured) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    x = [p * UM for p in positions]
    ax.plot(x, analytic, "k-", label="analytic")
    ax.plot(x, measured, "o", mfc="none", color="tab:blue", label="virtual measurement")
    ax.set_xlabel("Position along proof mass [um]")
    ax.set_ylabel("Spring constant k [N/m]")
    ax.set_title("Spring constant versus position along proof mass")
    ax.legend(fontsize=8)
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    _save(fig, path)


def variation(path, z, curves) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, F in enumerate(curves):
        ax.plot([v * UM for v in z], [v * UN for v in F], lw=0.9, label=f"sample {i}")
    ax.set_xlabel("Deflection z [um]")
    ax.set_ylabel("Force F_z [uN]")
    ax.set_title("Sample to sample variations")
    ax.legend(fontsize=7)
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    _save(fig, path)
