import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vprobe.config import ConfigError, load_config, parse_config
from vprobe.contact import run_sweep
from vprobe.presets import PRESET_PATH_ENV, available_presets, load_preset
from vprobe.mechanics import SpecError, device_to_dict
from vprobe.traceio import (
    TRACE_HEADER,
    TraceFormatError,
    TraceTable,
    format_trace,
    from_sim,
    parse_trace,
    read_trace,
    write_trace,
)


def small_table():
    t = TraceTable(meta={"device": "X", "seed": 1})
    t.append(0.0, 0.0, 0.0, None, "NoContact")
    t.append(1e-6, 0.9e-6, 1.0e-5, 4.08e-6, "SurfaceSliding")
    t.append(2e-6, 1.8e-6, -2.5e-7, 4.08e-6, "SurfaceSliding")
    return t


# --- trace files ---------------------------------------------------------------


def test_format_header_and_units():
    text = format_trace(small_table())
    lines = text.split("\n")
    assert lines[0] == TRACE_HEADER
    assert lines[1] == '# meta: {"device":"X","seed":1}'
    assert lines[2] == "z_cmd_um,z_dut_um,force_uN,force_std_uN,mode"
    assert lines[3] == "0.000000,0.000000,0.000000,,NoContact"
    assert lines[4] == "1.000000,0.900000,10.000000,4.080000,SurfaceSliding"
    assert lines[5] == "2.000000,1.800000,-0.250000,4.080000,SurfaceSliding"
    assert text.endswith("\n") and "\r" not in text


def test_negative_zero_is_not_written():
    t = TraceTable()
    t.append(0.0, 0.0, -1e-15)
    assert ",-0.000000," not in format_trace(t)


def test_round_trip_byte_identical(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(p1, small_table())
    write_trace(p2, read_trace(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_simulated_round_trip(ref, stylus, cosym, tmp_path):
    sim = run_sweep(ref, stylus, cosym, np.arange(0, 1400) * 1e-6)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(p1, from_sim(sim, {"k": 1}))
    t = read_trace(p1)
    write_trace(p2, t)
    assert p1.read_bytes() == p2.read_bytes()
    np.testing.assert_allclose(t.force, sim.F_z, rtol=0, atol=1e-12)
    assert t.to_trace().modes[-1] == "Fractured"


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=1, max_size=20))
def test_round_trip_property(forces):
    t = TraceTable()
    for i, f in enumerate(forces):
        t.append(i * 1e-6, i * 1e-6, f, None, None)
    text = format_trace(t)
    assert format_trace(parse_trace(text)) == text


@pytest.mark.parametrize(
    "text,where",
    [
        ("", "line 1"),
        ("# stylus-trace v2\n", "line 1"),
        (TRACE_HEADER + "\n", "truncated"),
        (TRACE_HEADER + "\nmeta\nz_cmd_um\n", "line 2"),
        (TRACE_HEADER + "\n# meta: {bad\nz_cmd_um,z_dut_um,force_uN\n", "line 2"),
        (TRACE_HEADER + "\n# meta: []\nz_cmd_um,z_dut_um,force_uN\n", "line 2"),
        (TRACE_HEADER + "\n# meta: {}\nz,F\n", "line 3"),
        (TRACE_HEADER + "\n# meta: {}\nz_cmd_um,z_dut_um,force_uN\n1,1,1\n2,2\n", "line 5"),
        (TRACE_HEADER + "\n# meta: {}\nz_cmd_um,z_dut_um,force_uN\n1,1,abc\n", "line 4"),
        (TRACE_HEADER + "\n# meta: {}\nz_cmd_um,z_dut_um,force_uN\n1,1,inf\n", "line 4"),
        (TRACE_HEADER + "\n# meta: {}\nz_cmd_um,z_dut_um,force_uN\n2,2,1\n1,1,1\n", "line 5"),
        (TRACE_HEADER + "\n# meta: {}\nz_cmd_um,z_dut_um,force_uN,force_std_uN,mode\n1,1,1,,Wobbling\n", "line 4"),
        (TRACE_HEADER + "\n# meta: {}\nz_cmd_um,z_dut_um,force_uN,force_std_uN\n1,1,1,-1\n", "line 4"),
    ],
)
def test_malformed_files_name_the_line(text, where):
    with pytest.raises(TraceFormatError, match=where):
        parse_trace(text)


def test_optional_columns_absent():
    text = TRACE_HEADER + "\n# meta: {}\nz_cmd_um,z_dut_um,force_uN\n0,0,0\n1,1,10\n"
    t = parse_trace(text)
    tr = t.to_trace()
    assert tr.std is None and tr.modes is None
    assert tr.F[1] == pytest.approx(10e-6)


def test_atomic_write_leaves_no_temp(tmp_path):
    write_trace(tmp_path / "x.csv", small_table())
    assert [p.name for p in tmp_path.iterdir()] == ["x.csv"]


def test_non_utf8(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_bytes(b"\xff\xfe")
    with pytest.raises(TraceFormatError, match="UTF-8"):
        read_trace(p)


# --- presets -------------------------------------------------------------------


def test_presets_available():
    assert {"REF-CANTILEVER", "REF-STIFF"} <= set(available_presets())
    with pytest.raises(SpecError, match="unknown device preset"):
        load_preset("NOPE")


def test_preset_search_path(tmp_path, monkeypatch, ref):
    doc = device_to_dict(ref)
    doc["name"] = "MINE"
    (tmp_path / "MINE.json").write_text(json.dumps(doc))
    (tmp_path / "BROKEN.json").write_text("{\n  oops")
    monkeypatch.setenv(PRESET_PATH_ENV, str(tmp_path))
    assert load_preset("MINE").name == "MINE"
    assert "MINE" in available_presets()
    with pytest.raises(SpecError, match="line 2"):
        load_preset("BROKEN")


def test_calibration_script_is_current():
    import subprocess
    import sys
    from pathlib import Path

    script = Path(__file__).resolve().parents[1] / "scripts" / "calibrate_presets.py"
    res = subprocess.run([sys.executable, str(script), "--check"], capture_output=True, text=True)
    assert res.returncode == 0, res.stdout + res.stderr


# --- run config ----------------------------------------------------------------


def test_minimal_config(ref):
    cfg = parse_config('{"device": "REF-CANTILEVER"}')
    assert cfg.device == ref
    assert cfg.x_s == ref.cosym
    assert cfg.seed == 0
    grid = cfg.sim_grid()
    assert grid[0] == 0 and np.allclose(np.diff(grid), 1e-6)


def test_full_config(tmp_path):
    doc = {
        "format": "vprobe-config v1",
        "device": {"preset": "REF-CANTILEVER", "support_rot_compliance": 100.0},
        "stylus": {"tip_radius": 10e-6, "material": "diamond"},
        "placement": {"offset_from_cosym": -50e-6},
        "instrument": {
            "load_cell": {"noise_std_single": 0.0, "range_max": None},
            "actuator": {"cyclic_period": 20e-6},
            "apparatus": {"stiffness": None},
            "placement_error": 1e-6,
        },
        "z_grid": {"start": 0.0, "stop": 100e-6, "step": 2e-6},
        "seed": 7,
        "solver": {"tolerance": 1e-10, "max_iterations": 50, "continuation": False},
        "outputs": {"trace": "t.csv"},
        "positions": [100e-6, 200e-6],
        "fit_window": [5e-6, 40e-6],
        "montecarlo": {"n_runs": 3, "placement_error_std": 5e-6, "workers": 2},
    }
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc, indent=2))
    cfg = load_config(p)
    assert cfg.device.support_rot_compliance == 100.0
    assert cfg.stylus.tip_radius == 10e-6
    assert cfg.x_s == pytest.approx(450e-6)
    assert math.isinf(cfg.instrument.load_cell.range_max)
    assert math.isinf(cfg.instrument.apparatus.stiffness)
    assert cfg.instrument.actuator.cyclic_period == 20e-6
    assert cfg.placement_error == 1e-6
    assert len(cfg.sim_grid()) == 51
    assert cfg.solver.max_iterations == 50 and not cfg.solver.continuation
    assert cfg.position_list() == [100e-6, 200e-6]
    assert cfg.montecarlo.n_runs == 3


def test_ideal_instrument_shorthand():
    cfg = parse_config('{"device": "REF-CANTILEVER", "instrument": "ideal"}')
    assert cfg.instrument.load_cell.noise_std_single == 0


@pytest.mark.parametrize(
    "text,needle",
    [
        ('{"device": "REF-CANTILEVER",\n "colour": 1}', "config.colour (line 2)"),
        ('{"device": "NOPE"}', "unknown device preset"),
        ("{}", "device: missing"),
        ('{"device": "REF-CANTILEVER", "format": "v0"}', "format"),
        ('{"device": "REF-CANTILEVER",\n "z_grid": {"step": -1}}', "z_grid.step (line 2)"),
        ('{"device": "REF-CANTILEVER", "z_grid": {"start": 5e-6, "stop": 1e-6}}', "z_grid.stop"),
        ('{"device": "REF-CANTILEVER", "seed": 1.5}', "config.seed"),
        ('{"device": "REF-CANTILEVER", "placement": {"x_s": 2.0}}', "outside the mass"),
        ('{"device": "REF-CANTILEVER", "placement": {}}', "exactly one"),
        ('{"device": "REF-CANTILEVER", "instrument": {"load_cell": {"bias": 1}}}', "instrument.load_cell.bias"),
        ('{"device": "REF-CANTILEVER", "instrument": {"apparatus": {"stiffness": -1}}}', "instrument.apparatus"),
        ('{"device": "REF-CANTILEVER", "stylus": {"material": "cheese"}}', "stylus.material"),
        ('{"device": "REF-CANTILEVER", "stylus": {"cone_half_angle": 2.0}}', "cone_half_angle"),
        ('{"device": "REF-CANTILEVER", "positions": [1.0]}', "positions[0]"),
        ('{"device": "REF-CANTILEVER", "fit_window": [5e-5, 5e-6]}', "fit_window"),
        ('{"device": "REF-CANTILEVER", "solver": {"tolerance": 0}}', "solver.tolerance"),
        ('{"device": "REF-CANTILEVER", "outputs": {"trace": 3}}', "outputs.trace"),
        ('{"device": {"beam": {}}}', "device"),
        ('{"device": "REF-CANTILEVER",\n\n "seed": }', "line 3"),
    ],
)
def test_config_diagnostics(text, needle):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert needle in str(info.value)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "none.json")
