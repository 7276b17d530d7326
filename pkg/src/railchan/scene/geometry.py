"""Scene primitives: materials, planar surfaces, wedges and the train trajectory."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Coplanarity tolerance for polygon vertices, metres.
PLANAR_TOL = 1e-6


class SceneError(ValueError):
    """Raised for invalid scene geometry or configuration."""


@dataclass(frozen=True)
class Material:
    """Electromagnetic and diffuse-scattering parameters of a surface material.

    Attributes:
        name: Material identifier.
        eps_r_real: Real part of the relative permittivity.
        loss_tangent: Loss tangent; the complex permittivity is
            ``eps_r_real * (1 - 1j * loss_tangent)``.
        scatter_coeff: Scattering coefficient S of the directive model.
        scatter_exponent: Lobe exponent alpha of the directive model.
    """

    name: str
    eps_r_real: float
    loss_tangent: float
    scatter_coeff: float
    scatter_exponent: float

    def __post_init__(self):
        if self.eps_r_real < 1:
            raise SceneError(f"{self.name}: eps_r_real must be >= 1")
        if self.loss_tangent < 0:
            raise SceneError(f"{self.name}: loss_tangent must be >= 0")
        if not 0 <= self.scatter_coeff <= 1:
            raise SceneError(f"{self.name}: scatter_coeff must lie in [0, 1]")
        if self.scatter_exponent < 1:
            raise SceneError(f"{self.name}: scatter_exponent must be >= 1")

    @property
    def permittivity(self) -> complex:
        return self.eps_r_real * (1.0 - 1j * self.loss_tangent)


# EM parameters at 22.6 GHz: (eps_r', tan delta, S, alpha).
TABLE_MATERIALS = {
    "marble": Material("marble", 3.0045, 0.2828, 0.0022, 15.3747),
    "glass": Material("glass", 1.0538, 23.9211, 0.0025, 5.5106),
    "brick": Material("brick", 1.9155, 0.0568, 0.0019, 49.5724),
    "metal": Material("metal", 1.0, 1e7, 0.0026, 17.7691),
    "wood": Material("wood", 6.6, 0.9394, 0.0086, 13.1404),
    "concrete": Material("concrete", 5.4745, 0.0021, 0.0011, 109.0),
}

OBJECT_TAGS = frozenset(
    {"building", "bridge", "pylon", "noise-barrier", "ground", "train", "wall", "tree", "furniture"}
)


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise SceneError("zero-length vector")
    return v / n


@dataclass(frozen=True, eq=False)
class Surface:
    """A planar convex polygon with a single material.

    The outward normal follows the right-hand rule over the vertex order.
    ``obj`` names the solid the face belongs to; faces of one closed solid
    share it, which is how slab thickness is recovered for transmission.
    """

    vertices: np.ndarray
    material: Material
    object_tag: str
    obj: str = ""
    normal: np.ndarray = field(init=False, repr=False)
    offset: float = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 3:
            raise SceneError("surface needs at least 3 vertices in 3D")
        if self.object_tag not in OBJECT_TAGS:
            raise SceneError(f"unknown object tag {self.object_tag!r}")
        # Newell's method is robust for any simple polygon.
        n = np.zeros(3)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            n += np.cross(a, b)
        area2 = np.linalg.norm(n)
        if area2 < 1e-12:
            raise SceneError("degenerate polygon, normal undefined")
        n /= area2
        off = float(n @ v.mean(axis=0))
        if np.max(np.abs(v @ n - off)) > PLANAR_TOL:
            raise SceneError("polygon vertices are not coplanar")
        for i in range(len(v)):
            e = v[(i + 1) % len(v)] - v[i]
            w = v[(i + 2) % len(v)] - v[(i + 1) % len(v)]
            if np.cross(e, w) @ n < -1e-12:
                raise SceneError("only convex polygons are supported")
        v.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", off)

    @property
    def area(self) -> float:
        v = self.vertices
        s = np.zeros(3)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            s += np.cross(a, b)
        return 0.5 * float(np.linalg.norm(s))

    def translated(self, delta) -> "Surface":
        return Surface(self.vertices + np.asarray(delta, float), self.material, self.object_tag, self.obj)


@dataclass(frozen=True, eq=False)
class Wedge:
    """A straight diffracting edge between two planar faces.

    ``face0`` and ``face_n`` index into the owning surface list. The
    exterior (free-space) angle is measured from face 0 through the
    outward side of face 0.
    """

    start: np.ndarray
    end: np.ndarray
    face0: int
    face_n: int
    exterior_angle: float
    tangent0: np.ndarray = field(repr=False, default=None)
    normal0: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        a = np.asarray(self.start, float)
        b = np.asarray(self.end, float)
        if np.linalg.norm(b - a) < 1e-9:
            raise SceneError("wedge edge has zero length")
        if not 0 < self.exterior_angle < 2 * math.pi:
            raise SceneError("wedge exterior angle must lie in (0, 2*pi)")
        object.__setattr__(self, "start", a)
        object.__setattr__(self, "end", b)
        if self.tangent0 is not None:
            object.__setattr__(self, "tangent0", _unit(np.asarray(self.tangent0, float)))
            object.__setattr__(self, "normal0", _unit(np.asarray(self.normal0, float)))

    @property
    def direction(self) -> np.ndarray:
        return _unit(self.end - self.start)

    @property
    def n(self) -> float:
        """UTD wedge parameter: exterior angle over pi."""
        return self.exterior_angle / math.pi

    def translated(self, delta, offset: int = 0) -> "Wedge":
        d = np.asarray(delta, float)
        return Wedge(self.start + d, self.end + d, self.face0 + offset, self.face_n + offset,
                     self.exterior_angle, self.tangent0, self.normal0)


@dataclass(frozen=True)
class Trajectory:
    """Straight train path sampled uniformly from ``start`` to ``end``."""

    start: tuple
    end: tuple
    sample_count: int
    speed: float = 300 / 3.6

    def __post_init__(self):
        if self.sample_count < 2:
            raise SceneError("trajectory needs at least 2 samples")
        object.__setattr__(self, "start", tuple(float(c) for c in self.start))
        object.__setattr__(self, "end", tuple(float(c) for c in self.end))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.end, self.start)))

    @property
    def spacing(self) -> float:
        return self.length / (self.sample_count - 1)


def sample_trajectory(traj: Trajectory) -> np.ndarray:
    """Uniformly spaced positions along the trajectory, shape (sample_count, 3).

    The first sample is exactly ``start`` and the last exactly ``end``.
    """
    if traj.sample_count < 2:
        raise SceneError("trajectory needs at least 2 samples")
    a = np.asarray(traj.start)
    b = np.asarray(traj.end)
    f = np.linspace(0.0, 1.0, traj.sample_count)[:, None]
    pts = a + f * (b - a)
    pts[0] = a
    pts[-1] = b
    return pts


def box_faces(lo, hi, material: Material, tag: str, obj: str, skip_bottom: bool = False):
    """Outward-facing rectangles of an axis-aligned box.

    Returns ``(surfaces, face_keys)`` where keys are ``(axis, side)`` with
    side -1 for the low face and +1 for the high face.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if np.any(hi <= lo):
        raise SceneError(f"{obj}: box needs positive dimensions")
    surfaces, keys = [], []
    for axis in range(3):
        u, w = (axis + 1) % 3, (axis + 2) % 3
        for side in (-1, 1):
            if skip_bottom and axis == 2 and side == -1:
                continue
            c = hi[axis] if side > 0 else lo[axis]
            quad = []
            for a, b in ((lo[u], lo[w]), (hi[u], lo[w]), (hi[u], hi[w]), (lo[u], hi[w])):
                p = np.empty(3)
                p[axis], p[u], p[w] = c, a, b
                quad.append(p)
            # (u, w, axis) is right-handed, so this order points along +axis.
            if side < 0:
                quad = quad[::-1]
            surfaces.append(Surface(np.array(quad), material, tag, obj))
            keys.append((axis, side))
    return surfaces, keys


def box_wedges(lo, hi, keys, base_index: int, skip_bottom: bool = False):
    """The 90-degree edges of a box whose faces start at ``base_index``."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    index = {k: base_index + i for i, k in enumerate(keys)}
    wedges = []
    for axis in range(3):
        # Edges run along ``axis``; the two faces meeting there are normal
        # to the other two axes.
        u, w = (axis + 1) % 3, (axis + 2) % 3
        for su in (-1, 1):
            for sw in (-1, 1):
                if skip_bottom and ((u == 2 and su == -1) or (w == 2 and sw == -1)):
                    continue
                a = np.empty(3)
                b = np.empty(3)
                a[axis], b[axis] = lo[axis], hi[axis]
                a[u] = b[u] = hi[u] if su > 0 else lo[u]
                a[w] = b[w] = hi[w] if sw > 0 else lo[w]
                n0 = np.zeros(3)
                n0[u] = su
                t0 = np.zeros(3)
                t0[w] = -sw  # along face u, pointing away from the edge
                wedges.append(Wedge(a, b, index[(u, su)], index[(w, sw)], 1.5 * math.pi, t0, n0))
    return wedges
