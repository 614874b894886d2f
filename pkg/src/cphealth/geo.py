"""Great-circle distances, distance-binned region pairs and neighbor orderings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RegionCatalog
from .errors import InsufficientRegions, InvalidCoordinate

EARTH_RADIUS_KM = 6371.0


def _check_coords(lat, lon):
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
        raise InvalidCoordinate("non-finite coordinate")
    if np.any(np.abs(lat) > 90.0):
        raise InvalidCoordinate(f"latitude outside [-90, 90]: {lat[np.abs(lat) > 90.0].ravel()[0]}")
    if np.any(np.abs(lon) > 180.0):
        raise InvalidCoordinate(f"longitude outside [-180, 180]: {lon[np.abs(lon) > 180.0].ravel()[0]}")
    return lat, lon


def _haversine(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dphi / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def great_circle_km(a, b) -> float:
    """Haversine distance in km between two ``(lat, lon)`` points."""
    lat1, lon1 = _check_coords(a[0], a[1])
    lat2, lon2 = _check_coords(b[0], b[1])
    # order-independent evaluation keeps d(a, b) == d(b, a) bit-for-bit
    if (float(lat1), float(lon1)) > (float(lat2), float(lon2)):
        lat1, lon1, lat2, lon2 = lat2, lon2, lat1, lon1
    return float(_haversine(lat1, lon1, lat2, lon2))


def distance_matrix(catalog: RegionCatalog) -> np.ndarray:
    """Symmetric (N, N) matrix of great-circle distances with a zero diagonal."""
    coords = catalog.coords
    lat, lon = _check_coords(coords[:, 0], coords[:, 1])
    d = _haversine(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    d = np.triu(d, 1)
    d = d + d.T
    return d


@dataclass(frozen=True)
class PairGroupSet:
    """Region pairs binned by distance.

    ``groups[k]`` is an (n_k, 2) array of index pairs ``(i, j)`` with ``i > j``
    whose distance lies in ``[k * bin_width, (k + 1) * bin_width)``.
    """

    groups: tuple[np.ndarray, ...]
    distances: tuple[np.ndarray, ...]
    bin_width: float
    dropped: int

    @property
    def M(self) -> int:
        return len(self.groups)

    @property
    def counts(self) -> list[int]:
        return [len(g) for g in self.groups]

    def upper_edges(self) -> list[float]:
        return [(k + 1) * self.bin_width for k in range(self.M)]


def build_pair_groups(catalog: RegionCatalog, bin_width: float = 1.0, M: int = 53, dist=None) -> PairGroupSet:
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if M < 1:
        raise ValueError("M must be at least 1")
    n = len(catalog)
    if n < 2:
        raise InsufficientRegions(f"need at least 2 regions, got {n}")
    if dist is None:
        dist = distance_matrix(catalog)
    i, j = np.tril_indices(n, k=-1)
    d = dist[i, j]
    bins = np.floor(d / bin_width).astype(np.int64)
    keep = bins < M
    groups, dists = [], []
    for k in range(M):
        sel = keep & (bins == k)
        groups.append(np.column_stack([i[sel], j[sel]]).astype(np.int64).reshape(-1, 2))
        dists.append(d[sel])
    return PairGroupSet(tuple(groups), tuple(dists), float(bin_width), int((~keep).sum()))


def nearest_neighbors(dist: np.ndarray) -> np.ndarray:
    """Per-region ordering of all other regions, nearest first.

    Returns an (N, N-1) integer array. Ties are broken by region index.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    out = np.empty((n, max(n - 1, 0)), dtype=np.int64)
    idx = np.arange(n)
    for i in range(n):
        others = idx[idx != i]
        order = np.lexsort((others, dist[i, others]))
        out[i] = others[order]
    return out


def check_distance_matrix(dist: np.ndarray, tol: float = 1e-9) -> list[str]:
    problems = []
    if not np.allclose(np.diag(dist), 0.0, atol=0.0):
        problems.append("non-zero diagonal")
    if not np.array_equal(dist, dist.T):
        problems.append("not symmetric")
    if np.any(dist < 0):
        problems.append("negative distance")
    # d[i, k] <= d[i, j] + d[j, k] for all triples
    viol = dist[:, None, :] > dist[:, :, None] + dist[None, :, :] + tol
    if np.any(viol):
        problems.append("triangle inequality violated")
    return problems
