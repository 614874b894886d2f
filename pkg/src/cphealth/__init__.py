"""Compressive population health toolkit.

Measure spatiotemporal correlation in region x disease x year morbidity
data, pick a small set of regions to survey, and infer the rest.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DiseaseMatrix,
    HealthCube,
    ObservationMask,
    Region,
    RegionCatalog,
    assemble_cube,
    slice_disease,
    validate_cube,
)

__all__ = [
    "DiseaseMatrix", "HealthCube", "ObservationMask", "Region", "RegionCatalog",
    "assemble_cube", "slice_disease", "validate_cube", "__version__",
]
