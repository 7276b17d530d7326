"""The immutable scene and its nearest-hit query."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import bvh as _bvh
from .geometry import SceneError, Surface, Trajectory, Wedge

#: Hits closer than this to the ray origin are ignored (the origin surface).
MIN_HIT_DISTANCE = 1e-9


class Hit(NamedTuple):
    surface: int
    point: np.ndarray
    distance: float


@dataclass(frozen=True)
class Endpoints:
    """Terminal placement.

    ``bs`` is the base-station antenna position. Train antennas sit at
    ``trajectory sample + (0, 0, height)``. The satellite is a far source in
    the direction ``satellite_direction`` (unit vector pointing from the
    scene to the satellite) at ``satellite_distance`` metres.
    """

    bs: tuple
    true_height: float
    saue_height: float
    satellite_elevation_deg: float
    satellite_azimuth_deg: float
    satellite_distance: float

    @property
    def satellite_direction(self) -> np.ndarray:
        el = np.radians(self.satellite_elevation_deg)
        az = np.radians(self.satellite_azimuth_deg)
        return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


@dataclass(frozen=True, eq=False)
class Scene:
    """Static world geometry plus the train body that moves with the receiver.

    ``vehicle`` surfaces and ``vehicle_wedges`` are given for a train whose
    rear reference point is at the origin; :meth:`vehicle_at` places them.
    Vehicle wedge face indices refer to ``vehicle``.
    """

    surfaces: tuple
    wedges: tuple
    trajectory: Trajectory
    endpoints: Endpoints
    vehicle: tuple = ()
    vehicle_wedges: tuple = ()
    names: tuple = ()
    _geom: tuple = field(init=False, repr=False)
    _bvh: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        object.__setattr__(self, "wedges", tuple(self.wedges))
        object.__setattr__(self, "vehicle", tuple(self.vehicle))
        object.__setattr__(self, "vehicle_wedges", tuple(self.vehicle_wedges))
        for w in self.wedges:
            if not (0 <= w.face0 < len(self.surfaces) and 0 <= w.face_n < len(self.surfaces)):
                raise SceneError("wedge references an unknown face")
        geom = _bvh.pack_polygons(self.surfaces)
        tree = _bvh.build_bvh(self.surfaces) if self.surfaces else _empty_bvh()
        for a in geom + tree:
            a.setflags(write=False)
        object.__setattr__(self, "_geom", geom)
        object.__setattr__(self, "_bvh", tree)

    @property
    def static_count(self) -> int:
        return len(self.surfaces)

    def vehicle_at(self, position) -> "Placement":
        """Scene view with the train rear reference at ``position``."""
        return Placement(self, np.asarray(position, float))

    def surface(self, index: int, placement: Optional["Placement"] = None) -> Surface:
        if index < len(self.surfaces):
            return self.surfaces[index]
        if placement is None:
            raise IndexError(index)
        return placement.surfaces[index - len(self.surfaces)]


class Placement:
    """A scene snapshot: static geometry plus the train at one position.

    With ``position=None`` the train is absent.
    """

    def __init__(self, scene: Scene, position=None):
        self.scene = scene
        base = scene.static_count
        if position is None:
            self.position = None
            self.surfaces, self.wedges = (), ()
        else:
            self.position = np.asarray(position, float)
            self.surfaces = tuple(s.translated(self.position) for s in scene.vehicle)
            self.wedges = tuple(w.translated(self.position, base) for w in scene.vehicle_wedges)
        self.dyn = _bvh.pack_polygons(self.surfaces) if self.surfaces else _empty_geom()

    @property
    def all_surfaces(self):
        return self.scene.surfaces + self.surfaces

    @property
    def all_wedges(self):
        return self.scene.wedges + self.wedges

    def surface(self, index: int) -> Surface:
        return self.scene.surface(index, self)

    def blocked(self, p0, p1, excl=None, eps: float = 1e-6) -> np.ndarray:
        """Vectorised segment occlusion test, see :func:`bvh.segments_blocked`."""
        p0 = np.ascontiguousarray(np.atleast_2d(p0), dtype=float)
        p1 = np.ascontiguousarray(np.atleast_2d(p1), dtype=float)
        if excl is None:
            excl = np.full((len(p0), 2), -1, dtype=np.int64)
        else:
            excl = np.ascontiguousarray(excl, dtype=np.int64).reshape(len(p0), 2)
        return _bvh.segments_blocked(p0, p1, excl, eps, self.scene._bvh, self.scene._geom, self.dyn)

    def all_crossings(self, p0, p1):
        """Every polygon crossing on segment p0->p1 as sorted ``(t, index)`` pairs."""
        p0 = np.asarray(p0, float)
        d = np.asarray(p1, float) - p0
        out = []
        for geom, base in ((self.scene._geom, 0), (self.dyn, self.scene.static_count)):
            normals, offsets = geom[0], geom[1]
            for s in range(len(offsets)):
                t = _bvh._poly_t(s, p0[0], p0[1], p0[2], d[0], d[1], d[2], *geom)
                if 1e-9 < t < 1 - 1e-9:
                    out.append((t, s + base))
        out.sort()
        return out


def _empty_geom():
    return (np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3, 3)), np.zeros((0, 3, 3)),
            np.zeros(0, dtype=np.int64))


def _empty_bvh():
    z = np.zeros(1, dtype=np.int64)
    return (np.zeros((1, 3)), np.zeros((1, 3)), np.full(1, -1, dtype=np.int64),
            np.full(1, -1, dtype=np.int64), z.copy(), z.copy(), np.zeros(0, dtype=np.int64))


def first_hit(scene, origin, direction, vehicle_position=None) -> Optional[Hit]:
    """Nearest surface hit along a ray.

    Args:
        scene: A :class:`Scene` or a :class:`Placement`.
        origin: Ray origin, metres.
        direction: Ray direction; need not be normalised.
        vehicle_position: Optional train placement when ``scene`` is a Scene.

    Returns:
        The hit, or None. Hits closer than 1e-9 m to the origin are ignored.

    Raises:
        SceneError: If the direction is zero or not finite.
    """
    d = np.asarray(direction, float)
    norm = np.linalg.norm(d)
    if not np.isfinite(norm) or norm == 0:
        raise SceneError("degenerate ray direction")
    d = d / norm
    o = np.asarray(origin, float)
    if isinstance(scene, Placement):
        place = scene
    elif vehicle_position is not None:
        place = scene.vehicle_at(vehicle_position)
    else:
        place = None
    base = scene.scene if isinstance(scene, Placement) else scene
    dyn = place.dyn if place is not None else _empty_geom()
    idx, t = _bvh.nearest_hit(o, d, MIN_HIT_DISTANCE, np.inf, -1, -1, base._bvh, base._geom, dyn)
    if idx < 0:
        return None
    return Hit(int(idx), o + t * d, float(t))
