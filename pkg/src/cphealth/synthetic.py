"""Desk-scale synthetic morbidity data with spatial and temporal structure.

Regions are scattered in a square box. Each disease's rate is a base rate
plus a smooth spatial field (a mixture of Gaussian bumps of the given length
scale), plus a field of the same kind whose weights follow an AR(1) process
over years, plus i.i.d. noise. Diseases share part of their spatial pattern.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .core import HealthCube, ObservationMask, Region, RegionCatalog
from .errors import DegenerateSynthetic

KM_PER_DEG_LAT = 111.32


@dataclass(frozen=True)
class SyntheticSpec:
    n_regions: int = 100
    n_diseases: int = 5
    n_years: int = 10
    length_scale_km: float = 10.0
    rho: float = 0.9
    noise: float = 0.002
    # None: evenly spaced from 0.02 to 0.15
    base_rates: tuple[float, ...] | None = None
    # None: 0.25 * base rate
    amplitudes: tuple[float, ...] | None = None
    seed: int = 0
    start_year: int = 2009
    box_km: float = 50.0
    shared: float = 0.5
    origin: tuple[float, float] = (51.5, -0.12)

    def __post_init__(self):
        if min(self.n_regions, self.n_diseases, self.n_years) < 1:
            raise ValueError("dimensions must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.noise < 0 or self.length_scale_km <= 0 or self.box_km <= 0:
            raise ValueError("noise must be >= 0 and length scale/box positive")
        for name in ("base_rates", "amplitudes"):
            v = getattr(self, name)
            if v is not None:
                if len(v) != self.n_diseases:
                    raise ValueError(f"{name} needs one value per disease")
                object.__setattr__(self, name, tuple(float(x) for x in v))

    def resolved_base_rates(self) -> np.ndarray:
        if self.base_rates is not None:
            return np.asarray(self.base_rates)
        if self.n_diseases == 1:
            return np.array([0.085])
        return np.linspace(0.02, 0.15, self.n_diseases)

    def resolved_amplitudes(self) -> np.ndarray:
        if self.amplitudes is not None:
            return np.asarray(self.amplitudes)
        return 0.25 * self.resolved_base_rates()

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("base_rates", "amplitudes", "origin"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d


def _to_latlon(xy_km, origin):
    lat0, lon0 = origin
    lat = lat0 + xy_km[:, 1] / KM_PER_DEG_LAT
    lon = lon0 + xy_km[:, 0] / (KM_PER_DEG_LAT * math.cos(math.radians(lat0)))
    return lat, lon


def generate_synthetic(spec: SyntheticSpec) -> tuple[HealthCube, ObservationMask, RegionCatalog]:
    rng = np.random.default_rng(spec.seed)
    N, D, T = spec.n_regions, spec.n_diseases, spec.n_years
    ell = spec.length_scale_km

    xy = rng.uniform(0.0, spec.box_km, size=(N, 2))
    n_centers = int(min(400, max(4, math.ceil(2.0 * (spec.box_km / ell) ** 2))))
    centers = rng.uniform(-ell, spec.box_km + ell, size=(n_centers, 2))
    d2 = ((xy[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    phi = np.exp(-d2 / (2.0 * ell ** 2))
    # per-region std of phi @ z for z ~ N(0, I), averaged over regions
    phi /= np.sqrt((phi ** 2).sum(axis=1).mean())

    common = rng.normal(size=n_centers)
    a = math.sqrt(spec.shared)
    b = math.sqrt(1.0 - spec.shared)
    innov = math.sqrt(1.0 - spec.rho ** 2)
    base = spec.resolved_base_rates()
    amp = spec.resolved_amplitudes()

    values = np.empty((N, D, T))
    for d in range(D):
        static = phi @ (a * common + b * rng.normal(size=n_centers))
        u = rng.normal(size=n_centers)
        for t in range(T):
            if t > 0:
                u = spec.rho * u + innov * rng.normal(size=n_centers)
            field = (static + phi @ u) / math.sqrt(2.0)
            values[:, d, t] = base[d] + amp[d] * field + spec.noise * rng.normal(size=N)
    if np.all((values <= 0.0) | (values >= 1.0)):
        warnings.warn("every synthetic rate was clamped", DegenerateSynthetic, stacklevel=2)
    values = np.clip(values, 0.0, 1.0)

    lat, lon = _to_latlon(xy, spec.origin)
    width = len(str(N))
    catalog = RegionCatalog([
        Region(f"R{i:0{width}d}", f"Region {i}", float(lat[i]), float(lon[i])) for i in range(N)
    ])
    diseases = [f"D{k + 1}" for k in range(D)]
    years = list(range(spec.start_year, spec.start_year + T))
    cube = HealthCube(values, diseases, years)
    return cube, ObservationMask.full(cube), catalog
