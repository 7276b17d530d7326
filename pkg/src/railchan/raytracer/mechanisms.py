"""Multipath component generation: direct, image-method reflection, UTD
diffraction, directive scattering and slab transmission.

Every mechanism returns :class:`Mpc` objects with antenna gains and
transmit power applied. Fields are carried as complex 3-vectors scaled so
that ``|E|^2`` is the received power in mW; powers are reported in dBm.
A transmitter is either a point source or a far source seen as a plane
wave (``Transmitter.direction``), whose spreading loss is fixed at its
nominal distance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import SPEED_OF_LIGHT
from ..antenna import AntennaPattern, gain
from ..scene import Placement, Scene
from . import em
from .em import _norm_table

log = logging.getLogger(__name__)

#: Length of the segment standing in for "from here to the far source".
FAR = 1.0e5
_TINY = 1e-12


@dataclass(frozen=True)
class Transmitter:
    """Transmit side of a link. Exactly one of ``position``/``direction`` is set.

    ``direction`` is the unit vector from the scene toward a far source at
    ``distance`` metres; path lengths are then measured from the plane
    through ``reference`` normal to it, offset by ``distance``.
    """

    pattern: AntennaPattern
    power_dbm: float
    position: Optional[tuple] = None
    direction: Optional[tuple] = None
    distance: float = 0.0
    reference: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if (self.position is None) == (self.direction is None):
            raise ValueError("set exactly one of position or direction")
        if self.direction is not None:
            u = np.asarray(self.direction, float)
            object.__setattr__(self, "direction", tuple(u / np.linalg.norm(u)))
            if self.distance <= 0:
                raise ValueError("plane-wave source needs a positive distance")

    @property
    def plane_wave(self) -> bool:
        return self.position is None


@dataclass(frozen=True)
class Receiver:
    position: tuple
    pattern: AntennaPattern


@dataclass(frozen=True)
class Mpc:
    """One multipath component.

    Angles are in degrees: azimuth in (-180, 180], elevation in [-90, 90].
    ``chain`` lists the interactions, ``("direct",)`` for line of sight.
    """

    power: float
    delay: float
    aoa_az: float
    aod_az: float
    eoa_el: float
    eod_el: float
    chain: tuple
    length: float = field(default=0.0, compare=False)
    field: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @property
    def is_direct(self) -> bool:
        return self.chain == ("direct",)

    @property
    def signature(self) -> str:
        return ";".join(self.chain)


def az_el(v):
    """Azimuth in (-180, 180] and elevation in [-90, 90] of a direction, degrees."""
    v = np.asarray(v, float)
    az = math.degrees(math.atan2(v[1], v[0]))
    if az <= -180.0:
        az = 180.0
    el = math.degrees(math.atan2(v[2], math.hypot(v[0], v[1])))
    return az, el


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def vertical_polarization(d):
    """Unit E direction of a vertically polarised wave travelling along ``d``."""
    d = np.asarray(d, float)
    e = np.array([0.0, 0.0, 1.0]) - d[2] * d
    n = np.linalg.norm(e)
    if n < 1e-9:
        e = np.array([1.0, 0.0, 0.0]) - d[0] * d
        n = np.linalg.norm(e)
    return e / n


def _vertical_rows(d):
    """:func:`vertical_polarization` for each row of ``d``."""
    e = np.zeros_like(d)
    e[:, 2] = 1.0
    e -= d[:, 2:3] * d
    n = np.linalg.norm(e, axis=1)
    bad = n < 1e-9
    if np.any(bad):
        x = np.zeros((bad.sum(), 3))
        x[:, 0] = 1.0
        e[bad] = x - d[bad, 0:1] * d[bad]
        n[bad] = np.linalg.norm(e[bad], axis=1)
    return e / n[:, None]


def _place(scene) -> Placement:
    return scene if isinstance(scene, Placement) else Placement(scene)


class _Geom:
    """Static + vehicle surfaces of a placement as flat arrays."""

    def __init__(self, place: Placement):
        surfs = place.all_surfaces
        self.surfaces = surfs
        self.normals = np.array([s.normal for s in surfs]).reshape(-1, 3)
        self.offsets = np.array([s.offset for s in surfs])
        sg, dg = place.scene._geom, place.dyn
        k = max(sg[2].shape[1], dg[2].shape[1]) if len(surfs) else 3
        self.verts = np.zeros((len(surfs), k, 3))
        self.enorms = np.zeros((len(surfs), k, 3))
        ns = len(sg[1])
        self.verts[:ns, : sg[2].shape[1]] = sg[2]
        self.enorms[:ns, : sg[3].shape[1]] = sg[3]
        self.verts[ns:, : dg[2].shape[1]] = dg[2]
        self.enorms[ns:, : dg[3].shape[1]] = dg[3]
        self.eps = np.array([s.material.permittivity for s in surfs], dtype=complex)

    def inside(self, p, idx):
        """Whether points ``p`` (M, 3) lie inside polygons ``idx`` (M,)."""
        rel = p[:, None, :] - self.verts[idx]
        m = np.einsum("mkc,mkc->mk", self.enorms[idx], rel)
        return np.all(m >= -1e-9, axis=1)


def _geom(place: Placement) -> _Geom:
    g = getattr(place, "_rt_geom", None)
    if g is None:
        g = _Geom(place)
        place._rt_geom = g
    return g


class _Ctx:
    """Per-call constants for one Tx/Rx pair."""

    def __init__(self, scene, tx: Transmitter, rx: Receiver, f: float):
        if f <= 0:
            raise em.PropagationError("frequency must be positive")
        self.place = _place(scene)
        self.tx = tx
        self.rx = rx
        self.R = np.asarray(rx.position, float)
        self.lam = SPEED_OF_LIGHT / f
        self.k = 2 * math.pi / self.lam
        if tx.plane_wave:
            self.u = np.asarray(tx.direction, float)
            self.ref = np.asarray(tx.reference, float)
            self.T = None
        else:
            self.T = np.asarray(tx.position, float)
        self.p_mw = 10.0 ** (tx.power_dbm / 10.0)

    def incident_length(self, p):
        """Source-to-point path length (vectorised over rows of ``p``)."""
        if self.T is None:
            return self.tx.distance - (np.asarray(p) - self.ref) @ self.u
        return np.linalg.norm(np.asarray(p) - self.T, axis=-1)

    def departure(self, p):
        if self.T is None:
            return np.broadcast_to(-self.u, np.shape(p)).copy()
        return _unit(np.asarray(p) - self.T)

    def source_segment(self, p):
        """Far endpoint for the occlusion test of the incident leg to ``p``."""
        if self.T is None:
            return np.asarray(p) + FAR * self.u
        return np.broadcast_to(self.T, np.shape(p)).copy()

    def phase(self, length):
        return np.exp(-1j * np.mod(self.k * length, 2 * math.pi))

    def finish(self, e_iso, length, dep, arr, chain) -> Optional[Mpc]:
        """Apply antenna gains and transmit power to an isotropic-link field.

        ``dep`` is the departure direction at the Tx, ``arr`` the propagation
        direction at the Rx (pointing into the Rx).
        """
        gt = gain(self.tx.pattern, dep)
        gr = gain(self.rx.pattern, -np.asarray(arr))
        scale = math.sqrt(self.p_mw * 10.0 ** ((gt + gr) / 10.0))
        e = np.asarray(e_iso, complex) * scale
        p = float(np.vdot(e, e).real)
        if not p > 0:
            return None
        aoa = az_el(-np.asarray(arr))
        aod = az_el(dep)
        return Mpc(10.0 * math.log10(p), float(length) / SPEED_OF_LIGHT, aoa[0], aod[0],
                   aoa[1], aod[1], tuple(chain), float(length), e)


# --- direct ---------------------------------------------------------------------------

def los_blocked(scene, tx: Transmitter, rx: Receiver) -> bool:
    ctx = _Ctx(scene, tx, rx, 1.0)
    return bool(ctx.place.blocked(ctx.source_segment(ctx.R), ctx.R)[0])


def trace_direct(scene, tx: Transmitter, rx: Receiver, f: float) -> Optional[Mpc]:
    """Line-of-sight component, or None when the Tx-Rx segment is occluded."""
    ctx = _Ctx(scene, tx, rx, f)
    R = ctx.R
    if ctx.place.blocked(ctx.source_segment(R), R)[0]:
        return None
    length = float(ctx.incident_length(R))
    d = ctx.departure(R)
    spread = ctx.tx.distance if ctx.T is None else length
    e = vertical_polarization(d) * (ctx.lam / (4 * math.pi * spread)) * ctx.phase(length)
    return ctx.finish(e, length, d, d, ("direct",))


# --- reflection ----------------------------------------------------------------------

def reflect_field(e, d_in, d_out, normal, eps):
    """Apply Fresnel reflection to field vector ``e`` at one bounce."""
    cos_i = float(-(d_in @ normal))
    s = np.cross(d_in, normal)
    ns = np.linalg.norm(s)
    if ns < 1e-12:
        # Normal incidence: any tangent is a valid perpendicular axis.
        s = np.cross(normal, [1.0, 0.0, 0.0])
        if np.linalg.norm(s) < 1e-6:
            s = np.cross(normal, [0.0, 1.0, 0.0])
        ns = np.linalg.norm(s)
    s = s / ns
    p_in = np.cross(s, d_in)
    p_out = np.cross(s, d_out)
    c = em.fresnel_coefficients(eps, min(max(cos_i, 0.0), 1.0))
    return c.r_perp * (e @ s) * s + c.r_par * (e @ p_in) * p_out


def _mirror_points(p, n, off):
    return p - 2.0 * ((p * n).sum(-1) - off)[..., None] * n


def _mirror_dirs(d, n):
    return d - 2.0 * (d * n).sum(-1)[..., None] * n


def _reflection_candidates(ctx: _Ctx, g: _Geom, max_order: int):
    """Geometrically valid specular chains as ``(surface ids, points)``."""
    R = ctx.R
    N, off = g.normals, g.offsets
    n_s = len(off)
    out = []
    if n_s == 0:
        return out
    s_r = N @ R - off
    if ctx.T is None:
        u = ctx.u
        s_src = N @ u  # > 0: the far source illuminates the front side
        src_ok = s_src > 1e-12
    else:
        s_src = N @ ctx.T - off
        src_ok = s_src > 1e-9
    rx_ok = s_r > 1e-9

    idx = np.nonzero(src_ok & rx_ok)[0]
    if len(idx):
        if ctx.T is None:
            t = s_r[idx] / s_src[idx]
            img = _mirror_dirs(u, N[idx])
            P = R + t[:, None] * img
        else:
            img = _mirror_points(ctx.T, N[idx], off[idx])
            t = s_r[idx] / (s_r[idx] + s_src[idx])
            P = R + t[:, None] * (img - R)
        ok = g.inside(P, idx)
        for i, p in zip(idx[ok], P[ok]):
            out.append(((int(i),), (p,)))

    if max_order < 2:
        return out
    ii, jj = np.nonzero(src_ok[:, None] & rx_ok[None, :])
    keep = ii != jj
    ii, jj = ii[keep], jj[keep]
    if not len(ii):
        return out
    Ni, Nj = N[ii], N[jj]
    if ctx.T is None:
        ui = _mirror_dirs(u, Ni)
        s_img = (ui * Nj).sum(-1)  # first image seen from surface j
        ok = s_img > 1e-12
        ii, jj, Ni, Nj, ui, s_img = ii[ok], jj[ok], Ni[ok], Nj[ok], ui[ok], s_img[ok]
        uij = _mirror_dirs(ui, Nj)
        Pj = R + (s_r[jj] / s_img)[:, None] * uij
    else:
        Ti = _mirror_points(ctx.T, Ni, off[ii])
        s_img = (Ti * Nj).sum(-1) - off[jj]
        ok = s_img > 1e-9
        ii, jj, Ni, Nj, Ti, s_img = ii[ok], jj[ok], Ni[ok], Nj[ok], Ti[ok], s_img[ok]
        Tij = _mirror_points(Ti, Nj, off[jj])
        Pj = R + (s_r[jj] / (s_r[jj] + s_img))[:, None] * (Tij - R)
    ok = g.inside(Pj, jj)
    s_pj = (Pj * Ni).sum(-1) - off[ii]
    ok &= s_pj > 1e-9
    ii, jj, Pj, s_pj = ii[ok], jj[ok], Pj[ok], s_pj[ok]
    if ctx.T is None:
        ui = _mirror_dirs(u, N[ii])
        Pi = Pj + (s_pj / s_src[ii])[:, None] * ui
    else:
        Ti = _mirror_points(ctx.T, N[ii], off[ii])
        Pi = Pj + (s_pj / (s_pj + s_src[ii]))[:, None] * (Ti - Pj)
    ok = g.inside(Pi, ii)
    if len(ii):
        ok &= ((Pi * N[jj]).sum(-1) - off[jj]) > 1e-9
    for i, j, pi_, pj_ in zip(ii[ok], jj[ok], Pi[ok], Pj[ok]):
        out.append(((int(i), int(j)), (pi_, pj_)))
    return out


def trace_reflections(scene, tx: Transmitter, rx: Receiver, f: float, max_order: int = 2):
    """Specular reflections up to ``max_order`` bounces by the image method.

    Candidate chains are found geometrically for all surfaces at once, then
    every leg is checked for occlusion.
    """
    if max_order not in (1, 2):
        raise ValueError("max_order must be 1 or 2")
    ctx = _Ctx(scene, tx, rx, f)
    g = _geom(ctx.place)
    cands = _reflection_candidates(ctx, g, max_order)
    if not cands:
        return []
    p0, p1, excl, owner = [], [], [], []
    for c, (ids, pts) in enumerate(cands):
        nodes = [ctx.source_segment(pts[0])] + list(pts) + [ctx.R]
        sids = [-1] + list(ids) + [-1]
        for a in range(len(nodes) - 1):
            p0.append(nodes[a])
            p1.append(nodes[a + 1])
            excl.append((sids[a], sids[a + 1]))
            owner.append(c)
    blocked = ctx.place.blocked(np.array(p0), np.array(p1), np.array(excl))
    bad = np.zeros(len(cands), dtype=bool)
    np.logical_or.at(bad, np.array(owner), blocked)
    out = []
    for c in np.nonzero(~bad)[0]:
        ids, pts = cands[c]
        mpc = _reflection_mpc(ctx, g, ids, pts)
        if mpc is not None:
            out.append(mpc)
    return out


def _reflection_mpc(ctx: _Ctx, g: _Geom, ids, pts):
    first = pts[0]
    length = float(ctx.incident_length(first))
    dep = ctx.departure(first)
    d = dep
    e = vertical_polarization(dep).astype(complex)
    nodes = list(pts) + [ctx.R]
    for a, sid in enumerate(ids):
        seg = nodes[a + 1] - nodes[a]
        seg_len = np.linalg.norm(seg)
        d_out = seg / seg_len
        e = reflect_field(e, d, d_out, g.normals[sid], g.eps[sid])
        d = d_out
        length += seg_len
    spread = ctx.tx.distance if ctx.T is None else length
    e = e * (ctx.lam / (4 * math.pi * spread)) * ctx.phase(length)
    return ctx.finish(e, length, dep, d, tuple(f"refl:{i}" for i in ids))


# --- diffraction ---------------------------------------------------------------------

def _wedge_arrays(place: Placement):
    cached = getattr(place, "_rt_wedges", None)
    if cached is not None:
        return cached
    wedges = place.all_wedges
    if not wedges:
        place._rt_wedges = None
        return None
    t0 = np.array([w.tangent0 for w in wedges])
    n0 = np.array([w.normal0 for w in wedges])
    e = np.cross(t0, n0)
    starts = np.array([w.start for w in wedges])
    ends = np.array([w.end for w in wedges])
    fwd = ((ends - starts) * e).sum(-1) > 0
    origin = np.where(fwd[:, None], starts, ends)
    length = np.linalg.norm(ends - starts, axis=1)
    arrs = dict(t0=t0, n0=n0, e=e, origin=origin, length=length,
                n=np.array([w.n for w in wedges]),
                f0=np.array([w.face0 for w in wedges]), fn=np.array([w.face_n for w in wedges]))
    place._rt_wedges = arrs
    return arrs


def _angle_from_face0(v, t0, n0):
    return np.mod(np.arctan2((v * n0).sum(-1), (v * t0).sum(-1)), 2 * math.pi)


def trace_diffraction(scene, tx: Transmitter, rx: Receiver, f: float):
    """Single-edge UTD diffraction over every wedge visible from both ends.

    The diffraction point satisfies the equal-angle (Keller cone) condition,
    which is the stationary point of the total path length along the edge.
    """
    ctx = _Ctx(scene, tx, rx, f)
    w = _wedge_arrays(ctx.place)
    if w is None:
        return []
    g = _geom(ctx.place)
    R = ctx.R
    e, A = w["e"], w["origin"]
    vr = R - A
    zr = (vr * e).sum(-1)
    rho_r_v = vr - zr[:, None] * e
    rho_r = np.linalg.norm(rho_r_v, axis=1)
    if ctx.T is None:
        s_in = -ctx.u
        c = e @ s_in
        sin_b = np.sqrt(np.maximum(1.0 - c * c, 0.0))
        ok = (sin_b > 1e-6) & (rho_r > 1e-9)
        zq = zr - c * rho_r / np.where(ok, sin_b, 1.0)
        rho_t_v = ctx.u - (e @ ctx.u)[:, None] * e
    else:
        vt = ctx.T - A
        zt = (vt * e).sum(-1)
        rho_t_v = vt - zt[:, None] * e
        rho_t = np.linalg.norm(rho_t_v, axis=1)
        ok = (rho_t > 1e-9) & (rho_r > 1e-9)
        zq = zt + (zr - zt) * rho_t / np.where(ok, rho_t + rho_r, 1.0)
    ok &= (zq >= 0.0) & (zq <= w["length"])
    phi_p = _angle_from_face0(rho_t_v, w["t0"], w["n0"])
    phi = _angle_from_face0(rho_r_v, w["t0"], w["n0"])
    wedge_top = w["n"] * math.pi
    ok &= (phi_p > 1e-9) & (phi_p < wedge_top - 1e-9) & (phi > 1e-9) & (phi < wedge_top - 1e-9)
    idx = np.nonzero(ok)[0]
    if not len(idx):
        return []
    Q = A[idx] + zq[idx, None] * e[idx]
    excl = np.stack([w["f0"][idx], w["fn"][idx]], axis=1)
    b1 = ctx.place.blocked(ctx.source_segment(Q), Q, excl)
    b2 = ctx.place.blocked(Q, np.broadcast_to(R, Q.shape).copy(), excl)
    vis = ~(b1 | b2)
    idx, Q = idx[vis], Q[vis]
    if not len(idx):
        return []

    s_vec = R - Q
    s = np.linalg.norm(s_vec, axis=1)
    s_hat = s_vec / s[:, None]
    ew = e[idx]
    if ctx.T is None:
        sp_hat = np.tile(-ctx.u, (len(Q), 1))
        sin_b0 = np.linalg.norm(np.cross(sp_hat, ew), axis=1)
        L = s * sin_b0 ** 2
        spread = 1.0 / np.sqrt(s)
        inc_len = ctx.incident_length(Q)
        inc_amp = np.full(len(idx), ctx.lam / (4 * math.pi * ctx.tx.distance))
    else:
        sp_vec = Q - ctx.T
        sp = np.linalg.norm(sp_vec, axis=1)
        sp_hat = sp_vec / sp[:, None]
        sin_b0 = np.linalg.norm(np.cross(sp_hat, ew), axis=1)
        L = s * sp * sin_b0 ** 2 / (s + sp)
        spread = np.sqrt(sp / (s * (s + sp)))
        inc_len = sp
        inc_amp = ctx.lam / (4 * math.pi * sp)
    n = w["n"][idx]
    ph_p, ph = phi_p[idx], phi[idx]
    eps0 = g.eps[w["f0"][idx]]
    epsn = g.eps[w["fn"][idx]]
    c0 = em.fresnel_coefficients(eps0, np.clip(np.sin(ph_p), 0.0, 1.0))
    cn = em.fresnel_coefficients(epsn, np.clip(np.sin(n * math.pi - ph), 0.0, 1.0))
    d_soft, d_hard = em.utd_coefficients(n, ph, ph_p, np.arcsin(np.clip(sin_b0, 0, 1)), L, ctx.k,
                                         r0=(c0.r_perp, c0.r_par), rn=(cn.r_perp, cn.r_par))
    e_in = _vertical_rows(sp_hat)
    phi_hat_p = _unit(-np.cross(ew, sp_hat))
    beta_hat_p = np.cross(phi_hat_p, sp_hat)
    phi_hat = _unit(np.cross(ew, s_hat))
    beta_hat = np.cross(phi_hat, s_hat)
    comp_b = d_soft * (e_in * beta_hat_p).sum(-1)
    comp_p = d_hard * (e_in * phi_hat_p).sum(-1)
    length = inc_len + s
    scale = inc_amp * spread * ctx.phase(length)
    ed = -(comp_b[:, None] * beta_hat + comp_p[:, None] * phi_hat) * scale[:, None]
    out = []
    for a in range(len(idx)):
        mpc = ctx.finish(ed[a], length[a], sp_hat[a], s_hat[a], (f"diff:{int(idx[a])}",))
        if mpc is not None:
            out.append(mpc)
    return out


# --- scattering ----------------------------------------------------------------------

def _tile_surface(surf, side: float):
    v = surf.vertices
    if len(v) == 4 and np.allclose(v[0] + (v[2] - v[1]), v[3], atol=1e-9):
        e1, e2 = v[1] - v[0], v[3] - v[0]
        n1 = max(1, math.ceil(np.linalg.norm(e1) / side - 1e-9))
        n2 = max(1, math.ceil(np.linalg.norm(e2) / side - 1e-9))
        a = (np.arange(n1) + 0.5) / n1
        b = (np.arange(n2) + 0.5) / n2
        centers = v[0] + a[:, None, None] * e1 + b[None, :, None] * e2
        centers = centers.reshape(-1, 3)
        area = np.full(len(centers), surf.area / (n1 * n2))
        return centers, area
    # General convex polygon: square cells whose centres fall inside.
    n = surf.normal
    ax = v[1] - v[0]
    ax /= np.linalg.norm(ax)
    ay = np.cross(n, ax)
    loc = (v - v[0]) @ np.stack([ax, ay]).T
    xs = np.arange(loc[:, 0].min() + side / 2, loc[:, 0].max(), side)
    ys = np.arange(loc[:, 1].min() + side / 2, loc[:, 1].max(), side)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = v[0] + gx.reshape(-1, 1) * ax + gy.reshape(-1, 1) * ay
    k = len(v)
    inside = np.ones(len(pts), dtype=bool)
    for j in range(k):
        m = np.cross(n, v[(j + 1) % k] - v[j])
        inside &= (pts - v[j]) @ m >= -1e-9
    pts = pts[inside]
    return pts, np.full(len(pts), side * side)


_GROUP = 64


def _tiles_for(surfaces, side: float, base: int = 0):
    """Tile arrays for ``surfaces`` grouped per surface.

    Each group records its surface index, tile range and bounding box so
    whole surfaces can be rejected before any per-tile work.
    """
    centers, area, tile, groups = [], [], [], []
    start = 0
    for i, s in enumerate(surfaces):
        m = s.material
        if m.scatter_coeff <= 0:
            continue
        c, a = _tile_surface(s, side)
        if not len(c):
            continue
        centers.append(c)
        area.append(a)
        tile.append(np.arange(len(c)))
        # The power model uses tile centres, so the bbox of the centres is
        # enough for a valid distance bound.
        for k in range(0, len(c), _GROUP):
            cc = c[k:k + _GROUP]
            groups.append((base + i, start + k, start + k + len(cc), cc.min(axis=0),
                           cc.max(axis=0), s.normal, m.scatter_coeff, m.scatter_exponent,
                           a[k:k + _GROUP].max()))
        start += len(c)
    if not groups:
        return None
    sid, g0, g1, lo, hi, nrm, sc, al, amax = zip(*groups)
    return dict(center=np.concatenate(centers), area=np.concatenate(area),
                tile=np.concatenate(tile), g_sid=np.array(sid), g_start=np.array(g0),
                g_end=np.array(g1), g_lo=np.array(lo), g_hi=np.array(hi), g_normal=np.array(nrm),
                g_s=np.array(sc), g_alpha=np.array(al), g_amax=np.array(amax),
                g_fmin=np.array([_norm_table(float(a)).min() for a in al]))


def scene_tiles(scene: Scene, tile_m2: float):
    """Static and vehicle scattering tiles of ``scene`` (cached per tile size)."""
    cache = scene.__dict__.setdefault("_tile_cache", {})
    if tile_m2 not in cache:
        side = math.sqrt(tile_m2)
        cache[tile_m2] = (_tiles_for(scene.surfaces, side),
                          _tiles_for(scene.vehicle, side, base=len(scene.surfaces)))
    return cache[tile_m2]


def _groups(place: Placement, tile_m2: float):
    """``(tiles, shift)`` pairs to scan; ``shift`` translates vehicle tiles."""
    static, veh = scene_tiles(place.scene, tile_m2)
    out = []
    if static is not None:
        out.append((static, np.zeros(3)))
    if veh is not None and place.position is not None:
        out.append((veh, place.position))
    return out


def _box_distance(p, lo, hi):
    gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
    return np.linalg.norm(gap, axis=-1)


def _gain_bound(pattern: AntennaPattern, origin, lo, hi):
    """Upper bound (dBi) of the gain toward any point of boxes ``lo``..``hi``."""
    centre = 0.5 * (lo + hi)
    radius = 0.5 * np.linalg.norm(hi - lo, axis=1)
    v = centre - origin
    dist = np.linalg.norm(v, axis=1)
    cos_c = (v @ np.asarray(pattern.boresight)) / np.maximum(dist, 1e-12)
    ang = np.arccos(np.clip(cos_c, -1.0, 1.0))
    spread = np.where(dist > radius, np.arcsin(np.minimum(radius / np.maximum(dist, 1e-12), 1.0)),
                      math.pi)
    off = np.degrees(np.maximum(ang - spread, 0.0))
    return np.maximum(pattern.max_gain - 12.0 * (off / pattern.beamwidth_3db) ** 2,
                      pattern.sidelobe_floor)


def trace_scattering(scene, tx: Transmitter, rx: Receiver, f: float, tile_m2: float = 1.0,
                     threshold_dbm: Optional[float] = None, cutoff_db: float = 60.0):
    """Directive diffuse scattering, one component per visible surface tile.

    Received power of a tile::

        Pt Gt Gr (lambda / 4 pi)^2 S^2 A cos(theta_i) lobe(psi) / (F r_i^2 r_s^2)

    where ``lobe = ((1 + cos psi) / 2)^alpha`` with psi measured from the
    specular direction and F normalises the lobe over the hemisphere. For a
    plane-wave source ``r_i`` is the nominal source distance.

    Tiles whose unoccluded power is below ``threshold_dbm`` are skipped
    before the visibility test; occlusion only lowers power, so this never
    drops a component that would survive that threshold. Visible tiles are
    consumed strongest first and the threshold is raised to ``cutoff_db``
    below the strongest visible tile.
    """
    if tile_m2 <= 0:
        raise ValueError("tile size must be positive")
    ctx = _Ctx(scene, tx, rx, f)
    thr = 0.0 if threshold_dbm is None else 10.0 ** (threshold_dbm / 10.0)
    R = ctx.R
    k2 = (ctx.lam / (4 * math.pi)) ** 2

    parts = []
    for tiles, shift in _groups(ctx.place, tile_m2):
        lo, hi = tiles["g_lo"] + shift, tiles["g_hi"] + shift
        nrm = tiles["g_normal"]
        rx_front = (nrm * (R - lo)).sum(-1) > 1e-9
        if ctx.T is None:
            src_front = nrm @ ctx.u > 1e-9
            r_i2 = np.full(len(lo), ctx.tx.distance ** 2)
        else:
            src_front = (nrm * (ctx.T - lo)).sum(-1) > 1e-9
            r_i2 = _box_distance(ctx.T, lo, hi) ** 2
        keep = rx_front & src_front
        if thr > 0:
            r_s2 = _box_distance(R, lo, hi) ** 2
            g_db = _gain_bound(rx.pattern, R, lo, hi)
            if ctx.T is None:
                g_db = g_db + gain(tx.pattern, -ctx.u)
            else:
                g_db = g_db + _gain_bound(tx.pattern, ctx.T, lo, hi)
            with np.errstate(divide="ignore"):
                bound = ctx.p_mw * 10.0 ** (g_db / 10.0) * k2 * tiles["g_s"] ** 2 * tiles["g_amax"] / (tiles["g_fmin"] * r_i2 * r_s2)
            keep &= bound >= thr
        for gi in np.nonzero(keep)[0]:
            a, b = tiles["g_start"][gi], tiles["g_end"][gi]
            parts.append((tiles, shift, gi, a, b))
    if not parts:
        return []
    log.debug("scattering: %d tile groups pass the bound", len(parts))

    C = np.concatenate([t["center"][a:b] + sh for t, sh, _, a, b in parts])
    area = np.concatenate([t["area"][a:b] for t, _, _, a, b in parts])
    tile_id = np.concatenate([t["tile"][a:b] for t, _, _, a, b in parts])
    sizes = [b - a for *_, a, b in parts]
    sid = np.repeat([t["g_sid"][gi] for t, _, gi, _, _ in parts], sizes)
    N = np.repeat(np.array([t["g_normal"][gi] for t, _, gi, _, _ in parts]), sizes, axis=0)
    s_coef = np.repeat([t["g_s"][gi] for t, _, gi, _, _ in parts], sizes)
    alpha = np.repeat([t["g_alpha"][gi] for t, _, gi, _, _ in parts], sizes)

    if ctx.T is None:
        d_in = np.broadcast_to(-ctx.u, C.shape)
        r_i2 = np.full(len(C), ctx.tx.distance ** 2)
    else:
        v_in = C - ctx.T
        r_i = np.linalg.norm(v_in, axis=1)
        d_in = v_in / r_i[:, None]
        r_i2 = r_i ** 2
    cos_i = -(d_in * N).sum(-1)
    v_s = R - C
    r_s = np.linalg.norm(v_s, axis=1)
    front = (cos_i > 1e-9) & ((v_s * N).sum(-1) > 1e-9) & (r_s > 1e-6)
    idx = np.nonzero(front)[0]
    if not len(idx):
        return []
    C, area, tile_id, sid, N = C[idx], area[idx], tile_id[idx], sid[idx], N[idx]
    s_coef, alpha, d_in, cos_i, r_i2, r_s = s_coef[idx], alpha[idx], d_in[idx], cos_i[idx], r_i2[idx], r_s[idx]
    d_s = v_s[idx] / r_s[:, None]
    spec = d_in - 2 * (d_in * N).sum(-1)[:, None] * N
    cos_psi = (d_s * spec).sum(-1)
    theta_i = np.arccos(np.clip(cos_i, 0.0, 1.0))
    norm = np.empty(len(idx))
    for a in np.unique(alpha):
        sel = alpha == a
        norm[sel] = em.scattering_normalization(a, theta_i[sel])
    lobe = em.scattering_lobe(cos_psi, alpha)
    iso = k2 * s_coef ** 2 * area * cos_i * lobe / (norm * r_i2 * r_s ** 2)
    gt = gain(ctx.tx.pattern, d_in)
    gr = gain(ctx.rx.pattern, -d_s)
    p_mw = ctx.p_mw * 10.0 ** ((gt + gr) / 10.0) * iso

    order = np.argsort(-p_mw, kind="stable")
    order = order[p_mw[order] > thr]
    cut = 10.0 ** (-cutoff_db / 10.0)
    visible = []
    chunk = 256
    for start in range(0, len(order), chunk):
        sel = order[start:start + chunk]
        sel = sel[p_mw[sel] >= thr]
        if not len(sel):
            break
        c = C[sel]
        ex = np.stack([sid[sel], np.full(len(sel), -1)], axis=1)
        b = ctx.place.blocked(ctx.source_segment(c), c, ex)
        b |= ctx.place.blocked(c, np.broadcast_to(R, c.shape).copy(), ex)
        for k in sel[~b]:
            visible.append(k)
            thr = max(thr, p_mw[k] * cut)

    out = []
    for k in visible:
        if p_mw[k] < thr:
            continue
        length = float(ctx.incident_length(C[k]) + r_s[k])
        e = vertical_polarization(d_s[k]) * math.sqrt(iso[k]) * ctx.phase(length)
        mpc = ctx.finish(e, length, d_in[k], d_s[k], (f"scat:{int(sid[k])}#{int(tile_id[k])}",))
        if mpc is not None:
            out.append(mpc)
    return out


# --- transmission --------------------------------------------------------------------

def trace_transmission(scene, tx: Transmitter, rx: Receiver, f: float):
    """Line-of-sight path through penetrable solids when the direct path is blocked.

    Each solid crossed costs the Fresnel power transmission of its entry and
    exit interfaces plus absorption over its thickness. Conductors absorb
    essentially everything, so paths through metal fall to zero power and
    are dropped.
    """
    ctx = _Ctx(scene, tx, rx, f)
    R = ctx.R
    p0 = ctx.source_segment(R)
    crossings = ctx.place.all_crossings(p0, R)
    if not crossings:
        return []
    g = _geom(ctx.place)
    seg = R - p0
    seg_len = float(np.linalg.norm(seg))
    d = seg / seg_len
    e = vertical_polarization(ctx.departure(R)).astype(complex)
    open_slabs = {}
    slabs = []
    for t, s in crossings:
        surf = g.surfaces[s]
        entering = d @ surf.normal < 0
        key = surf.obj or f"#{s}"
        if entering and key not in open_slabs:
            open_slabs[key] = (t, s)
        elif not entering and key in open_slabs:
            t_in, s_in = open_slabs.pop(key)
            slabs.append((s_in, (t - t_in) * seg_len))
        else:
            slabs.append((s, 0.0))
    slabs.extend((s, 0.0) for _, s in open_slabs.values())
    for s, thick in slabs:
        surf = g.surfaces[s]
        n = surf.normal
        cos_i = min(abs(float(d @ n)), 1.0)
        eps = surf.material.permittivity
        c = em.fresnel_coefficients(eps, cos_i)
        sv = np.cross(d, n)
        if np.linalg.norm(sv) < 1e-12:
            sv = np.cross(n, [1.0, 0.0, 0.0])
            if np.linalg.norm(sv) < 1e-6:
                sv = np.cross(n, [0.0, 1.0, 0.0])
        sv /= np.linalg.norm(sv)
        pv = np.cross(sv, d)
        t_perp = float(em.transmitted_power_fraction(c.r_perp))
        t_par = float(em.transmitted_power_fraction(c.r_par))
        absorb = float(em.slab_power_factor(eps, cos_i, thick * cos_i, ctx.k))
        # Entry and exit interfaces see the same incidence angle.
        e = (t_perp * (e @ sv) * sv + t_par * (e @ pv) * pv) * math.sqrt(absorb)
    if float(np.vdot(e, e).real) < 1e-30:
        return []
    length = float(ctx.incident_length(R))
    spread = ctx.tx.distance if ctx.T is None else length
    e = e * (ctx.lam / (4 * math.pi * spread)) * ctx.phase(length)
    dep = ctx.departure(R)
    mpc = ctx.finish(e, length, dep, d if ctx.T is not None else dep,
                     tuple(f"trans:{s}" for s, _ in slabs))
    return [mpc] if mpc is not None else []
