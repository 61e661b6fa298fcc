import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from scipy.integrate import trapezoid
from hypothesis import strategies as st

import vprobe.contact as contact_mod
from conftest import devices, random_device
from oracles import brute_force_equilibrium, stiffness_matrix, strain_energy
from vprobe import _pykernels
from vprobe.contact import (
    ContactMode,
    EventKind,
    NoContact,
    PlacementSpec,
    SolverConfig,
    SolverError,
    contact_path,
    contact_point,
    edge_contact_angle,
    edge_contact_state,
    flank_contact_state,
    run_sweep,
    sliding_arm,
    solve_equilibrium,
    sweep_grid,
)
from vprobe.mechanics import StylusSpec, linear_stiffness_at
from vprobe.presets import DEFAULT_STYLUS

_ORDER = {
    ContactMode.NO_CONTACT: 0,
    ContactMode.SURFACE_SLIDING: 1,
    ContactMode.EDGE_CONTACT: 2,
    ContactMode.FLANK_CONTACT: 3,
    ContactMode.FRACTURED: 4,
}


def unbreakable(dev):
    return replace(dev, material=replace(dev.material, fracture_strength=1e30))


@pytest.fixture(scope="module")
def ref_sweep(ref, stylus, cosym):
    path = contact_path(ref, stylus, cosym)
    return run_sweep(ref, stylus, cosym, sweep_grid(path, 1e-6, 0.2))


# --- contact geometry ------------------------------------------------------


def test_contact_point_flat():
    s, off = contact_point(0.0, 0.0, 400e-6, DEFAULT_STYLUS)
    assert s == 400e-6 and off == 0.0


def test_contact_point_offset_at_30_degrees():
    _, off = contact_point(math.radians(30), None, 400e-6, DEFAULT_STYLUS)
    assert off == pytest.approx(9e-6, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, math.pi / 2, exclude_max=True), st.floats(0, 2e-3))
def test_tangency_offset_bounded_by_radius(theta, x_s):
    _, off = contact_point(theta, None, x_s, DEFAULT_STYLUS)
    assert 0 <= off <= DEFAULT_STYLUS.tip_radius


def test_contact_point_checks_tangency(ref, stylus, cosym):
    st_ = solve_equilibrium(ref, stylus, cosym, 200e-6)
    s, _ = contact_point(st_.theta, st_.delta, cosym.x_s, stylus, 200e-6, ref.mass)
    assert s == pytest.approx(st_.s, rel=1e-12)
    with pytest.raises(NoContact):
        contact_point(st_.theta, st_.delta + 1e-6, cosym.x_s, stylus, 200e-6)
    with pytest.raises(NoContact):
        contact_point(1.2, None, cosym.x_s, stylus, geometry=ref.mass)
    with pytest.raises(NoContact):
        contact_point(math.pi / 2, None, cosym.x_s, stylus)


def test_edge_angle_vertical_under_axis(ref):
    Lm = ref.mass.length
    assert edge_contact_angle(0.0, Lm, Lm, 18e-6) == pytest.approx(0.0, abs=1e-15)


def test_placement_validation(ref):
    with pytest.raises(ValueError):
        PlacementSpec(-1e-6)
    assert PlacementSpec.at_cosym(ref, -50e-6).x_s == pytest.approx(450e-6)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)


# --- single-step equilibrium -----------------------------------------------


def test_zero_depth_is_no_contact(ref, stylus, cosym):
    s = solve_equilibrium(ref, stylus, cosym, 0.0)
    assert s.mode is ContactMode.NO_CONTACT and s.F == 0 and s.F_z == 0
    with pytest.raises(ValueError):
        solve_equilibrium(ref, stylus, cosym, -1e-6)


def test_small_deflection_matches_linear_stiffness(ref, stylus, cosym):
    s = solve_equilibrium(ref, stylus, cosym, 5e-6)
    assert s.F_z == pytest.approx(linear_stiffness_at(ref, ref.cosym) * 5e-6, rel=0.01)


def test_sliding_force_components(ref, stylus, cosym):
    for z in (50e-6, 300e-6, 900e-6):
        s = solve_equilibrium(ref, stylus, cosym, z)
        assert s.mode is ContactMode.SURFACE_SLIDING
        assert s.F > 0
        assert s.F_z == pytest.approx(s.F * math.cos(s.theta), rel=1e-10)
        assert s.F_x == pytest.approx(s.F * math.sin(s.theta), rel=1e-10)
        assert 0 <= s.s <= ref.mass.length
        assert abs(s.residual) < SolverConfig().tolerance


def test_equilibrium_satisfies_beam_compliance(ref, stylus, cosym):
    # tip response under the contact load reproduces the solved (delta, theta)
    from vprobe.mechanics import beam_tip_response

    s = solve_equilibrium(ref, stylus, cosym, 400e-6)
    Q = s.F * math.cos(s.phi)
    M = s.F * s.s
    d, t = beam_tip_response(ref.beam, Q, M)
    assert d == pytest.approx(s.delta, rel=1e-8)
    assert t == pytest.approx(s.theta, rel=1e-8)


def test_prev_state_continuation_gives_same_answer(ref, stylus, cosym):
    a = solve_equilibrium(ref, stylus, cosym, 400e-6)
    b = solve_equilibrium(ref, stylus, cosym, 401e-6, prev=a)
    c = solve_equilibrium(ref, stylus, cosym, 401e-6)
    assert b.F_z == pytest.approx(c.F_z, abs=SolverConfig().tolerance)


def test_fractured_state_carries_no_load(stiff, stylus):
    pl = PlacementSpec.at_cosym(stiff)
    s = solve_equilibrium(stiff, stylus, pl, 200e-6)
    assert s.mode is ContactMode.FRACTURED and s.F_z == 0


def test_beyond_model_range(ref, stylus, cosym):
    path = contact_path(ref, stylus, cosym)
    with pytest.raises(SolverError) as info:
        solve_equilibrium(ref, stylus, cosym, path.z_limit * 1.01)
    assert info.value.z_act == pytest.approx(path.z_limit * 1.01)


def test_nonconvergence_reports_residual(ref, stylus, cosym):
    with pytest.raises(SolverError) as info:
        solve_equilibrium(ref, stylus, cosym, 700e-6, cfg=SolverConfig(tolerance=1e-30, max_iterations=2))
    assert math.isfinite(info.value.residual)


# --- branch continuity and special states ----------------------------------


def test_slide_off_continuity(ref, stylus, cosym):
    path = contact_path(ref, stylus, cosym)
    z_so = path.landmarks()["slide_off"]
    last = solve_equilibrium(ref, stylus, cosym, z_so * (1 - 1e-9))
    edge = edge_contact_state(ref, stylus, cosym, z_so)
    assert edge.mode is ContactMode.EDGE_CONTACT
    assert edge.F_z == pytest.approx(last.F_z, rel=0.05)
    assert edge.s == ref.mass.length


def test_edge_state_outside_range(ref, stylus, cosym):
    with pytest.raises(ValueError):
        edge_contact_state(ref, stylus, cosym, 100e-6)
    with pytest.raises(ValueError):
        edge_contact_state(ref, stylus, PlacementSpec.at_cosym(ref, -50e-6), 1000e-6)


def test_flank_onset_load_point_is_tangency_point(ref, stylus):
    pl = PlacementSpec.at_cosym(ref, -50e-6)
    path = contact_path(ref, stylus, pl)
    z_on = path.landmarks()["flank_onset"]
    s = flank_contact_state(ref, stylus, pl, z_on)
    assert s.mode is ContactMode.FLANK_CONTACT
    assert s.theta == pytest.approx(stylus.flank_tilt, rel=1e-12)
    assert s.s == pytest.approx(sliding_arm(stylus.flank_tilt, pl.x_s, stylus.tip_radius), rel=1e-6)


def test_flank_load_moves_onto_beam(ref, stylus, cosym):
    dev = unbreakable(ref)
    path = contact_path(dev, stylus, cosym)
    z_on = path.landmarks()["flank_onset"]
    early = flank_contact_state(dev, stylus, cosym, z_on + 5e-6)
    late = flank_contact_state(dev, stylus, cosym, path.z_limit * 0.99)
    assert early.s > late.s
    assert not early.load_on_beam
    assert late.load_on_beam and late.s < 0


# --- sweeps ----------------------------------------------------------------


def test_empty_grid():
    from vprobe.presets import load_preset

    ref = load_preset("REF-CANTILEVER")
    tr = run_sweep(ref, DEFAULT_STYLUS, PlacementSpec.at_cosym(ref), [])
    assert len(tr) == 0 and tr.events == []


def test_grid_validation(ref, stylus, cosym):
    with pytest.raises(ValueError):
        run_sweep(ref, stylus, cosym, [0, 2e-6, 1e-6])
    with pytest.raises(ValueError):
        run_sweep(ref, stylus, cosym, [-1e-6, 1e-6])
    with pytest.raises(SolverError):
        run_sweep(ref, stylus, cosym, [1e-6, 1.0])


def test_ref_event_order_without_fracture(ref, stylus, cosym):
    dev = unbreakable(ref)
    path = contact_path(dev, stylus, cosym)
    tr = run_sweep(dev, stylus, cosym, sweep_grid(path, 2e-6, 0.1))
    assert tr.event_kinds() == [EventKind.SLIDE_OFF, EventKind.EDGE_CONTACT_BEGIN, EventKind.FLANK_CONTACT_BEGIN]


def test_offset_placement_never_slides_off(ref, stylus):
    pl = PlacementSpec.at_cosym(ref, -50e-6)
    path = contact_path(ref, stylus, pl)
    tr = run_sweep(ref, stylus, pl, sweep_grid(path, 2e-6, 0.1))
    kinds = tr.event_kinds()
    assert EventKind.SLIDE_OFF not in kinds
    assert EventKind.FLANK_CONTACT_BEGIN in kinds
    assert ContactMode.EDGE_CONTACT not in tr.modes


def test_interior_maximum_before_slide_off(ref_sweep):
    so = ref_sweep.first_event(EventKind.SLIDE_OFF)
    z, F = ref_sweep.z, ref_sweep.F_z
    pre = z < so.z_act
    i = int(np.argmax(F[pre]))
    assert 0 < i < pre.sum() - 1
    assert F[pre][-1] < F[pre][i]


def test_flank_stiffening(ref_sweep):
    fl = ref_sweep.first_event(EventKind.FLANK_CONTACT_BEGIN)
    z, F = ref_sweep.z, ref_sweep.F_z
    before = (z > fl.z_act - 10e-6) & (z < fl.z_act)
    after = (z > fl.z_act) & (z < fl.z_act + 10e-6)
    k_before = np.polyfit(z[before], F[before], 1)[0]
    k_after = np.polyfit(z[after], F[after], 1)[0]
    assert k_after >= 5 * abs(k_before)


def test_sweep_invariants(ref_sweep, ref):
    z = ref_sweep.z
    assert np.all(np.diff(z) > 0)
    kinds = ref_sweep.event_kinds()
    assert kinds.count(EventKind.FRACTURE) <= 1
    if EventKind.FRACTURE in kinds:
        assert kinds[-1] is EventKind.FRACTURE
        assert ref_sweep.modes[-1] is ContactMode.FRACTURED
        assert ContactMode.FRACTURED not in ref_sweep.modes[:-1]
    for ev in ref_sweep.events:
        assert z[0] <= ev.z_act <= z[-1]


def test_events_refined_to_resolution(ref, stylus, cosym):
    path = contact_path(ref, stylus, cosym)
    tr = run_sweep(unbreakable(ref), stylus, cosym, sweep_grid(path, 5e-6, 0.05))
    so = tr.first_event(EventKind.SLIDE_OFF)
    assert so.z_act == pytest.approx(path.landmarks()["slide_off"], abs=SolverConfig().event_resolution)


def test_determinism(ref, stylus, cosym):
    grid = np.arange(0, 1300) * 1e-6
    a = run_sweep(ref, stylus, cosym, grid)
    b = run_sweep(ref, stylus, cosym, grid)
    assert a.states == b.states and a.events == b.events


def test_no_continuation_matches(ref, stylus, cosym):
    grid = np.arange(0, 1300, 7) * 1e-6
    a = run_sweep(ref, stylus, cosym, grid)
    b = run_sweep(ref, stylus, cosym, grid, SolverConfig(continuation=False))
    np.testing.assert_allclose(a.F_z, b.F_z, rtol=0, atol=SolverConfig().tolerance)


def _check_sweep_properties(dev, stylus, pl, n=300):
    path = contact_path(dev, stylus, pl)
    grid = np.linspace(0, path.z_limit * 0.999, n)
    tr = run_sweep(dev, stylus, pl, grid)
    ranks = [_ORDER[m] for m in tr.modes]
    assert ranks == sorted(ranks)
    if ContactMode.EDGE_CONTACT in tr.modes:
        assert EventKind.SLIDE_OFF in tr.event_kinds()
    live = [s for s in tr.states if s.mode is not ContactMode.FRACTURED]
    th = [s.theta for s in live]
    assert all(b >= a - 1e-12 for a, b in zip(th, th[1:]))
    R = stylus.tip_radius
    sl = [s for s in live if s.mode is ContactMode.SURFACE_SLIDING and math.sin(s.theta) >= R / pl.x_s]
    assert all(b.s >= a.s - 1e-15 for a, b in zip(sl, sl[1:]))
    for s in live:
        assert s.F >= 0
    return tr


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(devices(), st.floats(0.05, 0.95), st.floats(math.radians(15), math.radians(60)))
def test_sweep_properties_random(dev, frac, alpha):
    stylus = StylusSpec(18e-6, alpha)
    pl = PlacementSpec(frac * dev.mass.length)
    _check_sweep_properties(dev, stylus, pl)


def test_sweep_properties_reference(ref, stylus):
    for off in (-300e-6, -50e-6, 0.0, 200e-6):
        _check_sweep_properties(ref, stylus, PlacementSpec.at_cosym(ref, off))


def test_small_deflection_random_devices():
    rng = np.random.default_rng(3)
    for _ in range(30):
        dev = random_device(rng)
        x_s = rng.uniform(0.1, 0.9) * dev.mass.length
        pl = PlacementSpec(x_s)
        k = linear_stiffness_at(dev, x_s)
        for z in np.linspace(0.002, 0.02, 5) * dev.beam.length:
            s = solve_equilibrium(dev, DEFAULT_STYLUS, pl, z)
            assert abs(s.F_z - k * z) <= 0.02 * k * z


# --- oracles ---------------------------------------------------------------


def _energy_case(rng):
    dev = random_device(rng)
    pl = PlacementSpec(rng.uniform(0.2, 0.9) * dev.mass.length)
    path = contact_path(dev, DEFAULT_STYLUS, pl)
    z_end = path.branches[0].z_hi * rng.uniform(0.3, 0.99)
    return dev, pl, z_end


def test_work_equals_stored_energy():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        dev, pl, z_end = _energy_case(rng)
        grid = np.linspace(0, z_end, 4001)
        tr = run_sweep(dev, DEFAULT_STYLUS, pl, grid)
        assert set(tr.modes[1:]) == {ContactMode.SURFACE_SLIDING}
        work = trapezoid(tr.F_z, tr.z)
        end = tr.states[-1]
        K = stiffness_matrix(dev.beam.length, dev.beam.flexural_rigidity, dev.support_rot_compliance)
        assert work == pytest.approx(strain_energy(end.delta, end.theta, K), rel=0.01)


def test_brute_force_energy_minimum():
    rng = np.random.default_rng(99)
    for _ in range(20):
        dev, pl, z_end = _energy_case(rng)
        z = z_end * rng.uniform(0.1, 1.0)
        K = stiffness_matrix(dev.beam.length, dev.beam.flexural_rigidity, dev.support_rot_compliance)
        theta, delta, Fz = brute_force_equilibrium(z, pl.x_s, DEFAULT_STYLUS.tip_radius, K, 1.4)
        s = solve_equilibrium(dev, DEFAULT_STYLUS, pl, z)
        assert s.F_z == pytest.approx(Fz, rel=0.005)
        assert s.theta == pytest.approx(theta, rel=0.005, abs=1e-9)


# --- compiled kernel vs pure Python -----------------------------------------


def test_backends_agree(ref, stylus, monkeypatch):
    ck = pytest.importorskip("vprobe._ckernels")
    for off in (0.0, -50e-6):
        pl = PlacementSpec.at_cosym(ref, off)
        grid = sweep_grid(contact_path(ref, stylus, pl), 1e-6, 0.2)
        results = {}
        for mod in (ck, _pykernels):
            monkeypatch.setattr(contact_mod, "K", mod)
            contact_path.cache_clear()
            results[mod.BACKEND] = run_sweep(ref, stylus, pl, grid)
        contact_path.cache_clear()
        a, b = results["cython"], results["python"]
        assert len(a) == len(b)
        np.testing.assert_allclose(a.F_z, b.F_z, rtol=1e-12, atol=1e-18)
        np.testing.assert_allclose([s.theta for s in a.states], [s.theta for s in b.states], rtol=1e-12, atol=1e-18)
        assert a.event_kinds() == b.event_kinds()
        for ea, eb in zip(a.events, b.events):
            assert ea.z_act == pytest.approx(eb.z_act, abs=2e-8)


def test_kernel_terms_agree():
    ck = pytest.importorskip("vprobe._ckernels")
    prm = (1.0, 0.5, 0.3, 5e-4, 3e-9, 0.0, 5e-4, 1e-3, 18e-6, 1.09)
    for kind, p in ((0, 0.3), (1, 1.0), (2, 1.0), (3, -3e-4), (3, 2e-4)):
        np.testing.assert_allclose(ck.branch_terms(kind, p, prm), _pykernels.branch_terms(kind, p, prm), rtol=1e-14)
