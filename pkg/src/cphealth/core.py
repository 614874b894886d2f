"""Shared domain types: region catalog, morbidity cube, observation mask.

All types are immutable once built. Arrays are copied on construction and
flagged read-only, so instances can be handed to worker processes or threads
without defensive copies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeMismatch, UnknownDisease


def _frozen(arr, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Region:
    region_id: str
    name: str
    lat: float
    lon: float


@dataclass(frozen=True)
class RegionCatalog:
    """Ordered regions; list position is the canonical region index."""

    regions: tuple[Region, ...]

    def __init__(self, regions: Sequence[Region]):
        object.__setattr__(self, "regions", tuple(regions))

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def ids(self) -> list[str]:
        return [r.region_id for r in self.regions]

    @property
    def coords(self) -> np.ndarray:
        """(N, 2) array of (lat, lon) in degrees."""
        return np.array([[r.lat, r.lon] for r in self.regions], dtype=float).reshape(-1, 2)

    def index_of(self, region_id: str) -> int:
        for k, r in enumerate(self.regions):
            if r.region_id == region_id:
                return k
        raise KeyError(region_id)

    def subset(self, indices) -> "RegionCatalog":
        return RegionCatalog([self.regions[i] for i in indices])

    def violations(self) -> list[str]:
        out = []
        seen = set()
        for r in self.regions:
            if not r.region_id:
                out.append("empty region id")
            elif r.region_id in seen:
                out.append(f"duplicate region id {r.region_id!r}")
            seen.add(r.region_id)
            if not -90.0 <= r.lat <= 90.0:
                out.append(f"latitude out of range for {r.region_id!r}: {r.lat}")
            if not -180.0 <= r.lon <= 180.0:
                out.append(f"longitude out of range for {r.region_id!r}: {r.lon}")
        return out


@dataclass(frozen=True)
class HealthCube:
    """Morbidity rates indexed (region, disease, year).

    Stored values at unobserved positions are arbitrary (often NaN) and are
    only meaningful through an :class:`ObservationMask`.
    """

    values: np.ndarray
    diseases: tuple[str, ...]
    years: tuple[int, ...]

    def __init__(self, values, diseases: Sequence[str], years: Sequence[int]):
        values = _frozen(values, np.float64)
        diseases = tuple(str(d) for d in diseases)
        years = tuple(int(y) for y in years)
        if values.ndim != 3:
            raise ShapeMismatch(f"values must be 3-way, got ndim={values.ndim}")
        if values.shape[1:] != (len(diseases), len(years)):
            raise ShapeMismatch(
                f"values shape {values.shape} does not match "
                f"{len(diseases)} diseases x {len(years)} years"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "diseases", diseases)
        object.__setattr__(self, "years", years)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def n_regions(self) -> int:
        return self.values.shape[0]

    def disease_index(self, disease: str) -> int:
        try:
            return self.diseases.index(disease)
        except ValueError:
            raise UnknownDisease(disease) from None

    def year_index(self, year: int) -> int:
        try:
            return self.years.index(int(year))
        except ValueError:
            raise KeyError(year) from None

    def take_years(self, year_indices) -> "HealthCube":
        idx = list(year_indices)
        return HealthCube(self.values[:, :, idx], self.diseases, [self.years[k] for k in idx])

    def take_regions(self, region_indices) -> "HealthCube":
        idx = list(region_indices)
        return HealthCube(self.values[idx], self.diseases, self.years)

    def with_values(self, values) -> "HealthCube":
        return HealthCube(values, self.diseases, self.years)


@dataclass(frozen=True, eq=False)
class ObservationMask:
    """Boolean mask, True where a value is observed."""

    mask: np.ndarray
    _counts: np.ndarray = field(repr=False)

    def __init__(self, mask, shape=None):
        mask = _frozen(mask, bool)
        if mask.ndim != 3:
            raise ShapeMismatch(f"mask must be 3-way, got ndim={mask.ndim}")
        if shape is not None and tuple(mask.shape) != tuple(shape):
            raise ShapeMismatch(f"mask shape {mask.shape} != cube shape {tuple(shape)}")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "_counts", _frozen(mask.sum(axis=0), np.int64))

    @classmethod
    def full(cls, cube: HealthCube) -> "ObservationMask":
        return cls(np.ones(cube.shape, dtype=bool))

    @classmethod
    def for_cube(cls, cube: HealthCube, mask) -> "ObservationMask":
        return cls(mask, shape=cube.shape)

    @property
    def shape(self):
        return self.mask.shape

    def observed_count(self, disease_index: int, year_index: int) -> int:
        """Observed regions in one (disease, year) slice."""
        return int(self._counts[disease_index, year_index])

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    def take_years(self, year_indices) -> "ObservationMask":
        return ObservationMask(self.mask[:, :, list(year_indices)])

    def take_regions(self, region_indices) -> "ObservationMask":
        return ObservationMask(self.mask[list(region_indices)])

    def __eq__(self, other):
        if not isinstance(other, ObservationMask):
            return NotImplemented
        return self.mask.shape == other.mask.shape and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self):
        return hash((self.mask.shape, self.mask.tobytes()))


@dataclass(frozen=True, eq=False)
class DiseaseMatrix:
    """Region x year plane of a single disease."""

    values: np.ndarray
    mask: np.ndarray
    disease: str = ""
    years: tuple[int, ...] = ()

    def __init__(self, values, mask, disease: str = "", years: Sequence[int] = ()):
        values = _frozen(values, np.float64)
        mask = _frozen(mask, bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise ShapeMismatch(f"values {values.shape} and mask {mask.shape} must be equal 2-way shapes")
        if years and len(years) != values.shape[1]:
            raise ShapeMismatch("years length does not match matrix columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "disease", disease)
        object.__setattr__(self, "years", tuple(int(y) for y in years))

    @property
    def shape(self):
        return self.values.shape


def slice_disease(cube: HealthCube, mask: ObservationMask, disease: str) -> DiseaseMatrix:
    d = cube.disease_index(disease)
    if mask.shape != cube.shape:
        raise ShapeMismatch(f"mask shape {mask.shape} != cube shape {cube.shape}")
    return DiseaseMatrix(cube.values[:, d, :], mask.mask[:, d, :], disease, cube.years)


def assemble_cube(matrices: Sequence[DiseaseMatrix]) -> tuple[HealthCube, ObservationMask]:
    """Inverse of slicing every disease: stack matrices back into a cube."""
    if not matrices:
        raise ShapeMismatch("need at least one disease matrix")
    shapes = {m.shape for m in matrices}
    if len(shapes) != 1:
        raise ShapeMismatch(f"inconsistent matrix shapes {sorted(shapes)}")
    years = matrices[0].years or tuple(range(matrices[0].shape[1]))
    values = np.stack([m.values for m in matrices], axis=1)
    mask = np.stack([m.mask for m in matrices], axis=1)
    cube = HealthCube(values, [m.disease for m in matrices], years)
    return cube, ObservationMask(mask)


def validate_cube(cube: HealthCube, catalog: RegionCatalog, mask: ObservationMask | None = None) -> list[str]:
    """Return human-readable invariant violations; empty when the data is sound.

    Range checks only look at observed entries (all entries when no mask is
    given, skipping NaN placeholders).
    """
    report = list(catalog.violations())
    if cube.n_regions != len(catalog):
        report.append(f"shape mismatch: cube has {cube.n_regions} regions, catalog has {len(catalog)}")
    if mask is not None and mask.shape != cube.shape:
        report.append(f"shape mismatch: mask {mask.shape} vs cube {cube.shape}")
        mask = None
    if len(set(cube.diseases)) != len(cube.diseases):
        report.append("duplicate disease code")
    for a, b in zip(cube.years, cube.years[1:]):
        if b <= a:
            report.append(f"years not strictly increasing: {a} then {b}")
            break

    present = mask.mask if mask is not None else ~np.isnan(cube.values)
    with np.errstate(invalid="ignore"):
        bad = present & ~((cube.values >= 0.0) & (cube.values <= 1.0))
    ids = catalog.ids if len(catalog) == cube.n_regions else None
    for i, d, y in zip(*np.nonzero(bad)):
        rid = ids[i] if ids is not None else str(i)
        report.append(
            f"rate out of range at ({rid}, {cube.diseases[d]}, {cube.years[y]}): {cube.values[i, d, y]!r}"
        )
    return report
