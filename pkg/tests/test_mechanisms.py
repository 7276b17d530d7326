import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ground_scene, isotropic, scene_of
from railchan import SPEED_OF_LIGHT
from railchan.raytracer import (
    Receiver,
    TraceConfig,
    Transmitter,
    free_space_loss,
    snapshot,
    trace_diffraction,
    trace_direct,
    trace_reflections,
    trace_scattering,
    trace_transmission,
)
from railchan.raytracer.mechanisms import _Ctx, _geom, _reflection_candidates
from railchan.scene import TABLE_MATERIALS, Material, Surface, box_faces, box_wedges

F = 22.6e9


def point_tx(pos, power=0.0):
    return Transmitter(isotropic(), power, position=tuple(map(float, pos)))


def iso_rx(pos):
    return Receiver(tuple(map(float, pos)), isotropic())


def total_field(mpcs):
    return sum((m.field for m in mpcs), np.zeros(3, complex))


def plate(center, size, material, normal_axis=2, thickness=0.1, obj="plate", tag="wall"):
    half = np.zeros(3) + size / 2
    half[normal_axis] = thickness / 2
    surfs, _ = box_faces(np.subtract(center, half), np.add(center, half), material, tag, obj)
    return surfs


# --- direct -------------------------------------------------------------------------

def test_direct_free_space_is_friis():
    m = trace_direct(scene_of([]), point_tx((0, 0, 10)), iso_rx((100, 0, 10)), F)
    assert m.power == pytest.approx(-free_space_loss(100.0, F), abs=1e-9)
    assert m.chain == ("direct",) and m.is_direct


def test_direct_delay_at_300_m():
    m = trace_direct(scene_of([]), point_tx((0, 0, 10)), iso_rx((300, 0, 10)), F)
    assert m.delay * 1e6 == pytest.approx(1.0007, abs=5e-5)
    assert m.delay == pytest.approx(300.0 / SPEED_OF_LIGHT, abs=1e-15)


def test_direct_under_bridge_is_blocked(hsr_scene):
    bs = hsr_scene.endpoints.bs
    rx = iso_rx((30.0, 0.0, hsr_scene.endpoints.true_height))
    assert trace_direct(hsr_scene, point_tx(bs), rx, F) is None


# --- reflection ---------------------------------------------------------------------

def test_ground_reflection_point_and_length():
    tx, rx = point_tx((0, 0, 26)), iso_rx((100, 0, 4.7))
    refl = trace_reflections(ground_scene(), tx, rx, F)
    assert len(refl) == 1
    m = refl[0]
    assert m.length == pytest.approx(math.hypot(100, 26 + 4.7), abs=1e-9)
    assert m.length == pytest.approx(104.61, abs=0.005)
    # The arrival elevation fixes where the ray left the ground.
    x_hit = 100 - 4.7 / math.tan(math.radians(-m.eoa_el))
    assert x_hit == pytest.approx(84.69, abs=0.005)


def test_surface_behind_both_terminals_gives_nothing():
    wall = Surface(np.array([[-50, 20, 30.0], [150, 20, 30], [150, 20, 0], [-50, 20, 0]]),
                   TABLE_MATERIALS["brick"], "building", "wall")
    # Normal points +y (away from the terminals at y=0).
    assert wall.normal[1] > 0
    assert trace_reflections(scene_of([wall]), point_tx((0, 0, 10)), iso_rx((100, 0, 5)), F) == []


def _bounce_residuals(scene, tx_pos, rx_pos):
    tx, rx = point_tx(tx_pos), iso_rx(rx_pos)
    ctx = _Ctx(scene, tx, rx, F)
    g = _geom(ctx.place)
    worst = 0.0
    for ids, pts in _reflection_candidates(ctx, g, 2):
        nodes = [ctx.T] + list(pts) + [ctx.R]
        for a, sid in enumerate(ids):
            d_in = nodes[a + 1] - nodes[a]
            d_out = nodes[a + 2] - nodes[a + 1]
            d_in, d_out = d_in / np.linalg.norm(d_in), d_out / np.linalg.norm(d_out)
            n = g.normals[sid]
            mirrored = d_in - 2 * (d_in @ n) * n
            cos = np.clip(mirrored @ d_out, -1.0, 1.0)
            worst = max(worst, math.atan2(np.linalg.norm(np.cross(mirrored, d_out)), cos))
    return worst


@settings(max_examples=25, deadline=None)
@given(tx=st.tuples(st.floats(-100, 0), st.floats(-11, -5), st.floats(5, 30)),
       rx=st.tuples(st.floats(0, 500), st.floats(-1, 1), st.floats(1, 6)))
def test_specular_law_holds_on_every_bounce(hsr_scene, tx, rx):
    assert _bounce_residuals(hsr_scene, tx, rx) < 1e-9


@settings(max_examples=25, deadline=None)
@given(x=st.floats(0, 500), z=st.floats(1, 8))
def test_reflection_never_shorter_than_los(hsr_scene, x, z):
    bs = hsr_scene.endpoints.bs
    los = math.dist(bs, (x, 0, z))
    for m in trace_reflections(hsr_scene, point_tx(bs), iso_rx((x, 0, z)), F):
        assert m.length >= los - 1e-9
        assert abs(m.delay - m.length / SPEED_OF_LIGHT) < 1e-12


def test_max_order_validated():
    with pytest.raises(ValueError):
        trace_reflections(ground_scene(), point_tx((0, 0, 5)), iso_rx((10, 0, 5)), F, max_order=3)


# --- diffraction --------------------------------------------------------------------

def test_no_wedges_no_diffraction():
    assert trace_diffraction(ground_scene(), point_tx((0, 0, 26)), iso_rx((100, 0, 4.7)), F) == []


def test_bridge_shadow_has_weaker_diffraction(hsr_scene):
    bs = hsr_scene.endpoints.bs
    rx_pos = (30.0, 0.0, hsr_scene.endpoints.true_height)
    diff = trace_diffraction(hsr_scene, point_tx(bs), iso_rx(rx_pos), F)
    assert diff
    free = -free_space_loss(math.dist(bs, rx_pos), F)
    assert max(m.power for m in diff) < free


def wedge_scene():
    """One metal block; its far top edge casts the shadow boundary."""
    lo, hi = (0.0, -50.0, -20.0), (20.0, 50.0, 0.0)
    faces, keys = box_faces(lo, hi, TABLE_MATERIALS["metal"], "bridge", "block")
    return scene_of(faces, box_wedges(lo, hi, keys, 0))


WEDGE_TX = (-10.0, 0.0, 3.0)
ISB_Z = -4.0  # tx -> (20, 0, 0) extended to x = 60


def _los_plus_diffraction(scene, z):
    tx, rx = point_tx(WEDGE_TX), iso_rx((60.0, 0.0, z))
    parts = trace_diffraction(scene, tx, rx, F)
    d = trace_direct(scene, tx, rx, F)
    if d is not None:
        parts.append(d)
    e = total_field(parts)
    return 10 * math.log10(float(np.vdot(e, e).real))


def test_utd_continuity_across_shadow_boundary():
    scene = wedge_scene()
    lit = _los_plus_diffraction(scene, ISB_Z + 1e-4)
    dark = _los_plus_diffraction(scene, ISB_Z - 1e-4)
    assert abs(lit - dark) < 1.0
    zs = np.linspace(ISB_Z - 3, ISB_Z + 3, 301)
    levels = np.array([_los_plus_diffraction(scene, z) for z in zs])
    assert np.max(np.abs(np.diff(levels))) < 1.0


def test_shadow_boundary_is_where_los_switches():
    scene = wedge_scene()
    tx = point_tx(WEDGE_TX)
    assert trace_direct(scene, tx, iso_rx((60, 0, ISB_Z + 1e-3)), F) is not None
    assert trace_direct(scene, tx, iso_rx((60, 0, ISB_Z - 1e-3)), F) is None


# --- scattering ---------------------------------------------------------------------

def scatter_setup(material, off_deg):
    """1 m^2 plate at the origin, Tx at 45 deg, Rx rotated off specular."""
    surf = Surface(np.array([[-0.5, -0.5, 0], [0.5, -0.5, 0], [0.5, 0.5, 0], [-0.5, 0.5, 0.0]]),
                   material, "ground", "plate")
    r = 20.0
    t = math.radians(45)
    tx = point_tx((-r * math.sin(t), 0, r * math.cos(t)))
    a = math.radians(45 + off_deg)
    rx = iso_rx((r * math.sin(a), 0, r * math.cos(a)))
    return scene_of([surf]), tx, rx


def test_zero_scatter_coefficient_emits_nothing():
    mat = Material("dull", 5.0, 0.01, 0.0, 10.0)
    scene, tx, rx = scatter_setup(mat, 0)
    assert trace_scattering(scene, tx, rx, F) == []


def test_scatter_lobe_peaks_at_specular():
    mat = Material("rough", 5.0, 0.01, 0.2, 10.0)
    spec = trace_scattering(*scatter_setup(mat, 0), F)
    off = trace_scattering(*scatter_setup(mat, 30), F)
    assert len(spec) == len(off) == 1
    assert spec[0].power > off[0].power
    assert spec[0].chain[0].startswith("scat:0#")


def test_sharper_lobe_gives_less_power_off_specular():
    broad = Material("broad", 5.4745, 0.0021, 0.2, 5.0)
    sharp = Material("sharp", 5.4745, 0.0021, 0.2, 109.0)
    p_broad = trace_scattering(*scatter_setup(broad, 30), F)[0].power
    p_sharp = trace_scattering(*scatter_setup(sharp, 30), F)[0].power
    assert p_sharp < p_broad


def test_scatter_power_scales_with_s_squared():
    a = trace_scattering(*scatter_setup(Material("a", 5.0, 0.01, 0.1, 10.0), 10), F)[0]
    b = trace_scattering(*scatter_setup(Material("b", 5.0, 0.01, 0.2, 10.0), 10), F)[0]
    assert b.power - a.power == pytest.approx(20 * math.log10(2), abs=1e-9)


def test_bad_tile_size_rejected():
    scene, tx, rx = scatter_setup(TABLE_MATERIALS["brick"], 0)
    with pytest.raises(ValueError):
        trace_scattering(scene, tx, rx, F, tile_m2=0.0)


# --- transmission -------------------------------------------------------------------

def test_metal_slab_blocks_transmission():
    scene = scene_of(plate((50, 0, 5), 10.0, TABLE_MATERIALS["metal"], normal_axis=0))
    tx, rx = point_tx((0, 0, 5)), iso_rx((100, 0, 5))
    assert trace_direct(scene, tx, rx, F) is None
    assert trace_transmission(scene, tx, rx, F) == []


def test_glass_slab_loses_more_than_brick():
    tx, rx = point_tx((0, 0, 5)), iso_rx((100, 0, 5))
    out = {}
    for name in ("glass", "brick"):
        # 1 cm: at 10 cm the glass is opaque to double precision.
        scene = scene_of(plate((50, 0, 5), 10.0, TABLE_MATERIALS[name], normal_axis=0,
                               thickness=0.01))
        (m,) = trace_transmission(scene, tx, rx, F)
        out[name] = m.power
        assert len(m.chain) == 1 and m.chain[0].startswith("trans:")
    assert out["glass"] < out["brick"] < -free_space_loss(100.0, F)


def test_transmission_not_duplicated_in_snapshot():
    tx, rx = point_tx((0, 0, 5)), iso_rx((100, 0, 5))
    ms = snapshot(scene_of([]), tx, rx, F)
    assert [m.chain for m in ms] == [("direct",)]


# --- snapshot -----------------------------------------------------------------------

def test_ground_only_snapshot_is_enumerable():
    tx, rx = point_tx((0, 0, 26)), iso_rx((100, 0, 4.7))
    ms = snapshot(ground_scene(half=150.0), tx, rx, F, TraceConfig(tile_m2=25.0))
    kinds = [m.chain[0].split(":")[0] for m in ms]
    assert kinds.count("direct") == 1
    assert kinds.count("refl") == 1
    assert set(kinds) <= {"direct", "refl", "scat"}
    assert not ms.los_blocked


def test_direct_only_config_matches_trace_direct(hsr_scene):
    bs = hsr_scene.endpoints.bs
    tx, rx = point_tx(bs), iso_rx((200, 0, 4.7))
    cfg = TraceConfig(reflection=False, diffraction=False, scattering=False, transmission=False)
    ms = snapshot(hsr_scene, tx, rx, F, cfg)
    assert ms.mpcs == (trace_direct(hsr_scene, tx, rx, F),)


@pytest.mark.parametrize("x", [10.0, 30.0, 150.0, 333.3])
def test_snapshot_cutoff_order_and_unique_chains(hsr_scene, x):
    bs = hsr_scene.endpoints.bs
    rx = iso_rx((x, 0, 4.7))
    ms = snapshot(hsr_scene, point_tx(bs), rx, F, TraceConfig(cutoff_db=40.0))
    powers = [m.power for m in ms]
    assert powers == sorted(powers, reverse=True)
    assert min(powers) >= powers[0] - 40.0
    sigs = [m.signature for m in ms]
    assert len(sigs) == len(set(sigs))
    for m in ms:
        assert abs(m.delay - m.length / SPEED_OF_LIGHT) < 1e-12


def test_snapshot_deterministic(hsr_scene):
    bs = hsr_scene.endpoints.bs
    a = snapshot(hsr_scene, point_tx(bs), iso_rx((77.7, 0, 4.7)), F)
    b = snapshot(hsr_scene, point_tx(bs), iso_rx((77.7, 0, 4.7)), F)
    assert [(m.power, m.delay, m.chain) for m in a] == [(m.power, m.delay, m.chain) for m in b]


def test_plane_wave_direct_uses_nominal_distance():
    d = 37_469_300.0
    tx = Transmitter(isotropic(), 0.0, direction=(0, 1, 1), distance=d)
    m = trace_direct(scene_of([]), tx, iso_rx((0, 0, 0)), F)
    assert m.power == pytest.approx(-free_space_loss(d, F), abs=1e-9)
    assert m.eoa_el == pytest.approx(45.0)
    assert m.aoa_az == pytest.approx(90.0)


def test_transmitter_validation():
    with pytest.raises(ValueError):
        Transmitter(isotropic(), 0.0)
    with pytest.raises(ValueError):
        Transmitter(isotropic(), 0.0, position=(0, 0, 0), direction=(0, 0, 1))
    with pytest.raises(ValueError):
        Transmitter(isotropic(), 0.0, direction=(0, 0, 1))
