"""Procedural construction of the high-speed-railway scene.

Frame: x along the track, z up, origin at the trajectory start on the
track centreline. The default layout keeps the channel-relevant features
of the reference environment: a 26 m brick cutting wall carrying the base
station, two crossing bridges over [20, 40] m and [60, 90] m, pylon pairs
at 150/250/350/450 m, a metallic noise barrier, buildings and trees, and a
metal train body behind the receive antennas.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    TABLE_MATERIALS,
    Material,
    SceneError,
    Surface,
    Trajectory,
    box_faces,
    box_wedges,
)
from .world import Endpoints, Scene

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectSpec:
    """One named scene object.

    ``shape`` is ``"box"`` (axis-aligned, ``lo``/``hi`` corners) or
    ``"polygon"`` (a single convex face given by ``vertices``).
    """

    name: str
    shape: str
    material: str
    tag: str
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None
    vertices: Optional[tuple] = None


@dataclass(frozen=True)
class ScenarioConfig:
    """Dimensions of the procedural railway scene (metres, degrees)."""

    track_length: float = 500.0
    sample_count: int = 1441
    speed_kmh: float = 300.0
    ground_x: tuple = (-130.0, 560.0)
    ground_y: tuple = (-12.0, 60.0)
    wall_y: float = -12.0
    wall_thickness: float = 4.0
    wall_height: float = 26.0
    bridges: tuple = ((20.0, 40.0), (60.0, 90.0))
    bridge_clearance: float = 6.0
    bridge_thickness: float = 1.5
    pylons: tuple = (150.0, 250.0, 350.0, 450.0)
    pylon_size: float = 1.0
    pylon_offset: float = 2.5
    pylon_height: float = 8.0
    barrier: tuple = (180.0, 480.0)
    barrier_y: float = 7.0
    barrier_height: float = 3.0
    barrier_thickness: float = 0.2
    buildings: tuple = (
        (110.0, 140.0, 18.0, 32.0, 14.0),
        (300.0, 340.0, 20.0, 34.0, 12.0),
    )
    trees: tuple = ((240.0, 10.0), (400.0, 11.0))
    tree_size: float = 3.0
    tree_height: float = 7.0
    train_length: float = 25.0
    train_width: float = 3.4
    train_height: float = 4.5
    train_gap: float = 0.5
    bs_position: tuple = (-95.0, -11.5, 26.0)
    true_height: float = 4.7
    saue_height: float = 5.2
    satellite_elevation_deg: float = 45.0
    satellite_azimuth_deg: float = 90.0
    satellite_distance: float = 37_469_300.0
    extra_objects: tuple = ()
    materials: dict = field(default_factory=dict)


def _material(name: str, table) -> Material:
    try:
        return table[name]
    except KeyError:
        raise SceneError(f"unknown material {name!r}") from None


def default_objects(cfg: ScenarioConfig) -> list:
    """The object list for ``cfg`` (static geometry only, no train)."""
    objs = []
    gx, gy = cfg.ground_x, cfg.ground_y
    objs.append(ObjectSpec("ground", "polygon", "concrete", "ground",
                           vertices=((gx[0], gy[0], 0.0), (gx[1], gy[0], 0.0),
                                     (gx[1], gy[1], 0.0), (gx[0], gy[1], 0.0))))
    objs.append(ObjectSpec("steep_wall", "box", "brick", "wall",
                           lo=(gx[0], cfg.wall_y - cfg.wall_thickness, 0.0),
                           hi=(gx[1], cfg.wall_y, cfg.wall_height)))
    for i, (a, b) in enumerate(cfg.bridges):
        objs.append(ObjectSpec(f"bridge_{i}", "box", "concrete", "bridge",
                               lo=(a, cfg.wall_y, cfg.bridge_clearance),
                               hi=(b, gy[1], cfg.bridge_clearance + cfg.bridge_thickness)))
    h = cfg.pylon_size / 2
    for i, x in enumerate(cfg.pylons):
        for side, sgn in (("l", 1), ("r", -1)):
            yc = sgn * cfg.pylon_offset
            objs.append(ObjectSpec(f"pylon_{i}{side}", "box", "metal", "pylon",
                                   lo=(x - h, yc - h, 0.0), hi=(x + h, yc + h, cfg.pylon_height)))
    if cfg.barrier:
        objs.append(ObjectSpec("noise_barrier", "box", "metal", "noise-barrier",
                               lo=(cfg.barrier[0], cfg.barrier_y, 0.0),
                               hi=(cfg.barrier[1], cfg.barrier_y + cfg.barrier_thickness,
                                   cfg.barrier_height)))
    for i, (x0, x1, y0, y1, hgt) in enumerate(cfg.buildings):
        objs.append(ObjectSpec(f"building_{i}", "box", "marble", "building",
                               lo=(x0, y0, 0.0), hi=(x1, y1, hgt)))
    for i, (x, y) in enumerate(cfg.trees):
        objs.append(ObjectSpec(f"tree_{i}", "box", "wood", "tree",
                               lo=(x, y, 0.0), hi=(x + cfg.tree_size, y + cfg.tree_size,
                                                   cfg.tree_height)))
    objs.extend(cfg.extra_objects)
    return objs


def _check_overlaps(objs: Sequence[ObjectSpec]):
    boxes = [o for o in objs if o.shape == "box"]
    for i, a in enumerate(boxes):
        for b in boxes[i + 1:]:
            lo = np.maximum(a.lo, b.lo)
            hi = np.minimum(a.hi, b.hi)
            if np.all(hi - lo > 1e-9):
                raise SceneError(f"overlapping solids: {a.name!r} and {b.name!r} "
                                 f"share the region {tuple(lo)}..{tuple(hi)}")


def build_objects(objs: Sequence[ObjectSpec], materials):
    """Surfaces and wedges for a list of object specs."""
    _check_overlaps(objs)
    surfaces, wedges, names = [], [], []
    for o in objs:
        mat = _material(o.material, materials)
        if o.shape == "box":
            on_ground = o.lo[2] <= 0.0
            faces, keys = box_faces(o.lo, o.hi, mat, o.tag, o.name, skip_bottom=on_ground)
            # Glass facade on the track-facing side of buildings.
            if o.tag == "building" and "glass" in materials:
                faces = [Surface(f.vertices, materials["glass"], o.tag, o.name)
                         if k == (1, -1) else f for f, k in zip(faces, keys)]
            wedges.extend(box_wedges(o.lo, o.hi, keys, len(surfaces), skip_bottom=on_ground))
            surfaces.extend(faces)
            names.extend([o.name] * len(faces))
        elif o.shape == "polygon":
            surfaces.append(Surface(np.array(o.vertices, float), mat, o.tag, o.name))
            names.append(o.name)
        else:
            raise SceneError(f"{o.name}: unknown shape {o.shape!r}")
    return surfaces, wedges, names


def build_hsr_scenario(config: Optional[ScenarioConfig] = None) -> Scene:
    """Build the railway scene described by ``config`` (defaults if None).

    Raises:
        SceneError: On non-positive dimensions, overlapping solids or an
            unknown material name.
    """
    cfg = config or ScenarioConfig()
    for name in ("track_length", "wall_height", "bridge_clearance", "bridge_thickness",
                 "pylon_size", "pylon_height", "train_length", "train_width", "train_height"):
        if getattr(cfg, name) <= 0:
            raise SceneError(f"{name} must be positive")
    materials = dict(TABLE_MATERIALS)
    materials.update(cfg.materials)
    objs = default_objects(cfg)
    surfaces, wedges, names = build_objects(objs, materials)

    metal = _material("metal", materials)
    lo = (cfg.train_gap, -cfg.train_width / 2, 0.0)
    hi = (cfg.train_gap + cfg.train_length, cfg.train_width / 2, cfg.train_height)
    vehicle, keys = box_faces(lo, hi, metal, "train", "train", skip_bottom=True)
    vwedges = box_wedges(lo, hi, keys, 0, skip_bottom=True)

    traj = Trajectory((0.0, 0.0, 0.0), (cfg.track_length, 0.0, 0.0), cfg.sample_count,
                      cfg.speed_kmh / 3.6)
    ends = Endpoints(tuple(cfg.bs_position), cfg.true_height, cfg.saue_height,
                     cfg.satellite_elevation_deg, cfg.satellite_azimuth_deg,
                     cfg.satellite_distance)
    log.debug("scene: %d surfaces, %d wedges", len(surfaces), len(wedges))
    return Scene(surfaces, wedges, traj, ends, vehicle, vwedges, tuple(names))


def parse_objects(entries) -> tuple:
    """Object specs from the ``objects`` list of a scene file."""
    out = []
    for e in entries or ():
        shape = e.get("shape", "box")
        if shape == "box":
            if "min" in e:
                lo, hi = tuple(e["min"]), tuple(e["max"])
            else:
                pos = np.asarray(e["position"], float)
                size = np.asarray(e["size"], float)
                if np.any(size <= 0):
                    raise SceneError(f"{e.get('name')}: dimensions must be positive")
                lo = (pos[0] - size[0] / 2, pos[1] - size[1] / 2, pos[2])
                hi = (pos[0] + size[0] / 2, pos[1] + size[1] / 2, pos[2] + size[2])
            out.append(ObjectSpec(e["name"], "box", e["material"], e.get("tag", "furniture"),
                                  lo=tuple(map(float, lo)), hi=tuple(map(float, hi))))
        else:
            out.append(ObjectSpec(e["name"], shape, e["material"], e.get("tag", "furniture"),
                                  vertices=tuple(tuple(map(float, v)) for v in e["vertices"])))
    return tuple(out)


def parse_materials(entries) -> dict:
    out = {}
    for name, m in (entries or {}).items():
        out[name] = Material(name, float(m["eps_r_real"]), float(m["loss_tangent"]),
                             float(m["scatter_coeff"]), float(m["scatter_exponent"]))
    return out


_TUPLE_FIELDS = {"ground_x", "ground_y", "bridges", "pylons", "barrier", "buildings", "trees",
                 "bs_position"}


def scenario_from_mapping(data) -> ScenarioConfig:
    """ScenarioConfig from a parsed scene file (``scenario``, ``materials``, ``objects``)."""
    data = data or {}
    params = dict(data.get("scenario") or {})
    known = set(ScenarioConfig.__dataclass_fields__)
    unknown = set(params) - known
    if unknown:
        raise SceneError(f"unknown scenario keys: {sorted(unknown)}")
    for k in list(params):
        if k in _TUPLE_FIELDS and params[k] is not None:
            params[k] = _tupleize(params[k])
    cfg = ScenarioConfig(**params)
    return replace(cfg, materials=parse_materials(data.get("materials")),
                   extra_objects=parse_objects(data.get("objects")))


def _tupleize(v):
    if isinstance(v, (list, tuple)):
        return tuple(_tupleize(x) for x in v)
    return float(v)
