"""Interaction coefficients: Friis loss, Fresnel, UTD wedge diffraction and
the directive diffuse-scattering lobe."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.special

from .. import SPEED_OF_LIGHT

PARALLEL = "parallel"
PERPENDICULAR = "perpendicular"


class PropagationError(ValueError):
    pass


def wavelength(f: float) -> float:
    return SPEED_OF_LIGHT / f


def free_space_loss(d: float, f: float) -> float:
    """Friis free-space path loss in dB, ``20 log10(4 pi d f / c)``."""
    if not (d > 0 and f > 0):
        raise PropagationError("distance and frequency must be positive")
    return 20.0 * math.log10(4.0 * math.pi * d * f / SPEED_OF_LIGHT)


class FresnelCoefficients(NamedTuple):
    """Complex field coefficients for one interface.

    ``r_perp``/``t_perp`` act on the E component normal to the plane of
    incidence; ``r_par``/``t_par`` on the in-plane component, with the sign
    convention that a perfect conductor gives ``r_par = +1``.
    """

    r_perp: complex
    r_par: complex
    t_perp: complex
    t_par: complex


def _kz(eps, cos_i):
    sin2 = 1.0 - cos_i * cos_i
    return np.sqrt(eps - sin2 + 0j)


def fresnel_coefficients(eps, cos_i):
    """Vectorised Fresnel coefficients for relative permittivity ``eps``.

    ``cos_i`` is the cosine of the incidence angle (from the normal).
    """
    cos_i = np.asarray(cos_i, dtype=float)
    root = _kz(eps, cos_i)
    d_perp = cos_i + root
    d_par = eps * cos_i + root
    # Both vanish only for eps == 1 at grazing incidence, where the limit is
    # "no interface".
    void = (d_perp == 0) | (d_par == 0)
    if np.any(void):
        d_perp = np.where(void, 1.0, d_perp)
        d_par = np.where(void, 1.0, d_par)
    r_perp = np.where(void, 0.0, (cos_i - root) / d_perp)
    r_par = np.where(void, 0.0, (eps * cos_i - root) / d_par)
    t_perp = np.where(void, 1.0, 2 * cos_i / d_perp)
    t_par = np.where(void, 1.0, 2 * np.sqrt(eps + 0j) * cos_i / d_par)
    if r_perp.ndim == 0:
        return FresnelCoefficients(complex(r_perp), complex(r_par), complex(t_perp), complex(t_par))
    return FresnelCoefficients(r_perp, r_par, t_perp, t_par)


def fresnel(material, incidence_angle: float, polarization: str, f: float):
    """Reflection and transmission coefficients for one polarization.

    Args:
        material: Half-space material; permittivity ``eps' (1 - j tan d)``.
        incidence_angle: Angle from the surface normal, radians, in [0, pi/2).
        polarization: ``"parallel"`` or ``"perpendicular"`` to the plane of
            incidence.
        f: Frequency in Hz. The material model is frequency-flat, so it
            only has to be positive.

    Returns:
        ``(reflection, transmission)`` complex field coefficients.
    """
    if not 0 <= incidence_angle < math.pi / 2:
        raise PropagationError("incidence angle must lie in [0, pi/2)")
    if f <= 0:
        raise PropagationError("frequency must be positive")
    c = fresnel_coefficients(material.permittivity, math.cos(incidence_angle))
    if polarization == PERPENDICULAR:
        return complex(c.r_perp), complex(c.t_perp)
    if polarization == PARALLEL:
        return complex(c.r_par), complex(c.t_par)
    raise PropagationError(f"unknown polarization {polarization!r}")


def transmitted_power_fraction(r) -> np.ndarray:
    """Fraction of incident power crossing the interface, ``1 - |r|^2``.

    Flux continuity across a planar interface makes this exact even for a
    lossy second medium; absorption inside the medium is applied separately.
    """
    return 1.0 - np.abs(r) ** 2


def slab_power_factor(eps, cos_i, thickness, k0) -> np.ndarray:
    """Power surviving absorption across a slab ``thickness`` metres thick
    (measured along the normal) for free-space wavenumber ``k0``."""
    return np.exp(-2.0 * k0 * np.abs(np.imag(_kz(eps, cos_i))) * thickness)


# --- UTD ------------------------------------------------------------------

def transition_function(x):
    """Kouyoumjian-Pathak transition function F(X) for X >= 0.

    ``F(X) = 2j sqrt(X) exp(jX) int_{sqrt X}^inf exp(-j t^2) dt``.
    """
    x = np.asarray(x, dtype=float)
    sx = np.sqrt(x)
    s, c = scipy.special.fresnel(sx * math.sqrt(2.0 / math.pi))
    tail = math.sqrt(math.pi / 2.0) * ((0.5 - c) - 1j * (0.5 - s))
    return 2j * sx * np.exp(1j * x) * tail


_EPS_BOUNDARY = 1e-8


def _cot_f(sign, beta, n, kl):
    """``cot((pi + sign*beta) / 2n) * F(kL a^sign(beta))`` with the
    shadow-boundary singularity resolved analytically."""
    big_n = np.round((beta + sign * math.pi) / (2 * math.pi * n))
    a = 2.0 * np.cos((2 * math.pi * n * big_n - beta) / 2.0) ** 2
    eps = math.pi + sign * beta - sign * 2 * math.pi * n * big_n
    near = np.abs(eps) < _EPS_BOUNDARY
    safe_eps = np.where(near, 1.0, eps)
    out = (1.0 / np.tan(safe_eps / (2 * n))) * transition_function(kl * a)
    sgn = np.where(eps >= 0, 1.0, -1.0)
    limit = n * np.exp(1j * math.pi / 4) * (
        np.sqrt(2 * math.pi * kl) * sgn - 2 * kl * eps * np.exp(1j * math.pi / 4))
    return np.where(near, limit, out)


def utd_coefficients(n, phi, phi_p, beta0, length_param, k,
                     r0=(-1.0, 1.0), rn=(-1.0, 1.0)):
    """Soft and hard UTD wedge coefficients (Luebbers heuristic form).

    Args:
        n: Wedge parameter, exterior angle / pi.
        phi, phi_p: Observation and incidence angles from face 0, radians.
        beta0: Angle between the incident ray and the edge.
        length_param: Distance parameter L (metres).
        k: Wavenumber.
        r0, rn: ``(perpendicular, parallel)`` reflection coefficients of the
            0-face and n-face. The defaults are the perfect-conductor values.

    Returns:
        ``(d_soft, d_hard)`` complex coefficients.
    """
    kl = k * length_param
    d1 = _cot_f(+1, phi - phi_p, n, kl)
    d2 = _cot_f(-1, phi - phi_p, n, kl)
    d3 = _cot_f(+1, phi + phi_p, n, kl)
    d4 = _cot_f(-1, phi + phi_p, n, kl)
    pref = -np.exp(-1j * math.pi / 4) / (2 * n * math.sqrt(2 * math.pi * k) * np.sin(beta0))
    d_soft = pref * (d1 + d2 + r0[0] * d4 + rn[0] * d3)
    d_hard = pref * (d1 + d2 + r0[1] * d4 + rn[1] * d3)
    return d_soft, d_hard


# --- directive scattering -----------------------------------------------------

def scattering_lobe(cos_psi, alpha):
    """Directive lobe ``((1 + cos psi) / 2) ** alpha``."""
    base = np.clip((1.0 + np.asarray(cos_psi, dtype=float)) / 2.0, 0.0, 1.0)
    return base ** alpha


_NORM_GRID = np.radians(np.arange(0.0, 90.0 + 1e-9, 1.0))


@lru_cache(maxsize=64)
def _norm_table(alpha: float) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(256)
    theta = (nodes + 1.0) * (math.pi / 4.0)
    wt = weights * (math.pi / 4.0) * np.sin(theta)
    phi = np.linspace(0.0, 2 * math.pi, 512, endpoint=False)
    dphi = 2 * math.pi / len(phi)
    st, ct = np.sin(theta)[:, None], np.cos(theta)[:, None]
    cp = np.cos(phi)[None, :]
    out = np.empty(len(_NORM_GRID))
    for i, ti in enumerate(_NORM_GRID):
        cos_psi = math.sin(ti) * st * cp + math.cos(ti) * ct
        out[i] = float(wt @ scattering_lobe(cos_psi, alpha).sum(axis=1)) * dphi
    out.setflags(write=False)
    return out


def scattering_normalization(alpha: float, theta_i) -> np.ndarray:
    """Solid-angle integral of the lobe over the outer hemisphere.

    With the specular direction at ``theta_i`` from the normal this is the
    divisor that makes the scattered pattern carry exactly S^2 of the
    intercepted power.
    """
    return np.interp(np.asarray(theta_i, dtype=float), _NORM_GRID, _norm_table(float(alpha)))
