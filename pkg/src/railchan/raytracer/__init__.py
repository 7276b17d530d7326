"""Deterministic ray tracing over a :class:`~railchan.scene.Scene`."""

from .em import (
    PARALLEL,
    PERPENDICULAR,
    FresnelCoefficients,
    PropagationError,
    free_space_loss,
    fresnel,
    fresnel_coefficients,
    scattering_lobe,
    scattering_normalization,
    slab_power_factor,
    transition_function,
    transmitted_power_fraction,
    utd_coefficients,
    wavelength,
)
from .mechanisms import (
    Mpc,
    Receiver,
    Transmitter,
    az_el,
    los_blocked,
    reflect_field,
    scene_tiles,
    trace_diffraction,
    trace_direct,
    trace_reflections,
    trace_scattering,
    trace_transmission,
    vertical_polarization,
)
from .snapshot import MpcSet, TraceConfig, snapshot

__all__ = [name for name in dir() if not name.startswith("_")]
