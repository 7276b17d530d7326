"""Scene geometry, materials, trajectory and ray queries."""

from .builder import (
    ObjectSpec,
    ScenarioConfig,
    build_hsr_scenario,
    build_objects,
    scenario_from_mapping,
)
from .geometry import (
    TABLE_MATERIALS,
    Material,
    SceneError,
    Surface,
    Trajectory,
    Wedge,
    box_faces,
    box_wedges,
    sample_trajectory,
)
from .world import Endpoints, Hit, Placement, Scene, first_hit

__all__ = [
    "Endpoints",
    "Hit",
    "Material",
    "ObjectSpec",
    "Placement",
    "ScenarioConfig",
    "Scene",
    "SceneError",
    "Surface",
    "TABLE_MATERIALS",
    "Trajectory",
    "Wedge",
    "box_faces",
    "box_wedges",
    "build_hsr_scenario",
    "build_objects",
    "first_hit",
    "sample_trajectory",
    "scenario_from_mapping",
]
