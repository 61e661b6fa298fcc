"""Versioned CSV trace files and JSON sidecars.

Files carry micrometres and micronewtons; everything in memory is SI. All
unit conversion for file I/O happens here.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import Trace
from .contact import ContactMode, SimTrace

TRACE_HEADER = "# stylus-trace v1"
META_PREFIX = "# meta: "
COLUMNS = ("z_cmd_um", "z_dut_um", "force_uN", "force_std_uN", "mode")
UM = 1e6
UN = 1e6
_DIGITS = 6
_MODES = {m.value for m in ContactMode}


class TraceFormatError(ValueError):
    """Malformed trace file; the message names the offending line."""


@dataclass
class TraceTable:
    """Rows of a trace file in SI units. ``std`` and ``mode`` entries may be None."""

    z_cmd: list[float] = field(default_factory=list)
    z_dut: list[float] = field(default_factory=list)
    force: list[float] = field(default_factory=list)
    std: list[float | None] = field(default_factory=list)
    mode: list[str | None] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.z_cmd)

    def append(self, z_cmd, z_dut, force, std=None, mode=None):
        self.z_cmd.append(float(z_cmd))
        self.z_dut.append(float(z_dut))
        self.force.append(float(force))
        self.std.append(None if std is None else float(std))
        self.mode.append(mode or None)

    def to_trace(self) -> Trace:
        """Analysis view keyed on the commanded position."""
        std = None if any(s is None for s in self.std) else np.array(self.std)
        modes = None if any(m is None for m in self.mode) else tuple(self.mode)
        return Trace(np.array(self.z_cmd), np.array(self.force), std, modes, dict(self.meta))


def from_sim(sim: SimTrace, meta: dict | None = None) -> TraceTable:
    t = TraceTable(meta=dict(meta or {}))
    for s in sim.states:
        t.append(s.z_act, s.z_act, s.F_z, None, s.mode.value)
    return t


def from_measurement(mt, meta: dict | None = None) -> TraceTable:
    t = TraceTable(meta=dict(meta if meta is not None else mt.metadata))
    for r in mt.records:
        t.append(r.z_cmd, r.z_dut, r.F_readout, r.F_readout_std, r.mode or None)
    return t


def _fmt(x: float, scale: float) -> str:
    v = round(x * scale, _DIGITS)
    if v == 0:
        v = 0.0  # no "-0.000000"
    return f"{v:.{_DIGITS}f}"


def format_trace(table: TraceTable) -> str:
    lines = [TRACE_HEADER, META_PREFIX + json.dumps(table.meta, sort_keys=True, separators=(",", ":"), allow_nan=False)]
    lines.append(",".join(COLUMNS))
    for zc, zd, f, s, m in zip(table.z_cmd, table.z_dut, table.force, table.std, table.mode):
        cells = [_fmt(zc, UM), _fmt(zd, UM), _fmt(f, UN), "" if s is None else _fmt(s, UN), m or ""]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _num(cell: str, what: str, lineno: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise TraceFormatError(f"line {lineno}: {what} {cell!r} is not a number") from None
    if not math.isfinite(v):
        raise TraceFormatError(f"line {lineno}: {what} must be finite")
    return v


def parse_trace(text: str, source: str = "<trace>") -> TraceTable:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != TRACE_HEADER:
        raise TraceFormatError(f"{source}: line 1: expected version header {TRACE_HEADER!r}")
    if len(lines) < 3:
        raise TraceFormatError(f"{source}: truncated file, expected meta and column header lines")
    if not lines[1].startswith(META_PREFIX):
        raise TraceFormatError(f"{source}: line 2: expected '{META_PREFIX.strip()} <json>'")
    try:
        meta = json.loads(lines[1][len(META_PREFIX):])
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"{source}: line 2: invalid meta JSON: {exc.msg}") from None
    if not isinstance(meta, dict):
        raise TraceFormatError(f"{source}: line 2: meta must be a JSON object")
    header = lines[2].rstrip("\r").split(",")
    if tuple(header) != COLUMNS[: len(header)] or len(header) < 3:
        raise TraceFormatError(f"{source}: line 3: expected columns {','.join(COLUMNS)}")
    ncol = len(header)
    table = TraceTable(meta=meta)
    for lineno, line in enumerate(lines[3:], start=4):
        line = line.rstrip("\r")
        cells = line.split(",")
        if len(cells) != ncol:
            raise TraceFormatError(f"{source}: line {lineno}: expected {ncol} columns, found {len(cells)}")
        zc = _num(cells[0], "z_cmd_um", lineno) / UM
        zd = _num(cells[1], "z_dut_um", lineno) / UM
        f = _num(cells[2], "force_uN", lineno) / UN
        std = None
        if ncol > 3 and cells[3] != "":
            std = _num(cells[3], "force_std_uN", lineno) / UN
            if std < 0:
                raise TraceFormatError(f"{source}: line {lineno}: force_std_uN must be >= 0")
        mode = None
        if ncol > 4 and cells[4] != "":
            if cells[4] not in _MODES:
                raise TraceFormatError(f"{source}: line {lineno}: unknown mode {cells[4]!r}")
            mode = cells[4]
        if table.z_cmd and not zc > table.z_cmd[-1]:
            raise TraceFormatError(f"{source}: line {lineno}: z_cmd_um must be strictly increasing")
        table.append(zc, zd, f, std, mode)
    return table


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace(path, table: TraceTable) -> None:
    atomic_write_text(path, format_trace(table))


def read_trace(path) -> TraceTable:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise TraceFormatError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    return parse_trace(text, str(path))


def write_json(path, doc: dict) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
