"""Difference indicators between morbidity vectors and the spatial/temporal
correlation analyses built on them.

Every indicator accepts either two 1-D vectors or two equally shaped stacks of
vectors ``(..., m)``; the last axis is the series axis and the result has the
leading shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DiseaseMatrix
from .errors import DegenerateSeries, EmptyAnalysis, PairShapeError
from .geo import PairGroupSet

INDICATORS = ("AD", "ED", "CDDTW", "PD")

# cap on elements of one DTW cost table batch
_DTW_CHUNK_ELEMS = 4_000_000


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise PairShapeError(f"series shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 0 or a.shape[-1] < 1:
        raise PairShapeError("series must have length >= 1")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise PairShapeError("series contain non-finite values")
    return a, b


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def arithmetic_difference(a, b):
    """Mean absolute difference."""
    a, b = _pair(a, b)
    return _scalar(np.abs(a - b).sum(axis=-1) / a.shape[-1])


def euclidean_difference(a, b):
    """Euclidean norm of the difference divided by the length ``m`` (not sqrt(m))."""
    a, b = _pair(a, b)
    return _scalar(np.sqrt(((a - b) ** 2).sum(axis=-1)) / a.shape[-1])


def _dtw_table_last(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """C(m, m) of the absolute-difference DTW recurrence for (batch, m) inputs.

    Works on a padded (m+1)x(m+1) table with an infinite border and C[0,0]=0,
    which reproduces the usual boundary (first row/column accumulate along
    their only predecessor). Cells are filled one anti-diagonal at a time so
    each step is vectorised over the whole diagonal and the batch.
    """
    batch, m = a.shape
    out = np.empty(batch)
    step = max(1, _DTW_CHUNK_ELEMS // ((m + 1) ** 2))
    for lo in range(0, batch, step):
        aa, bb = a[lo:lo + step], b[lo:lo + step]
        cost = np.abs(aa[:, :, None] - bb[:, None, :])
        C = np.full((aa.shape[0], m + 1, m + 1), np.inf)
        C[:, 0, 0] = 0.0
        for s in range(2, 2 * m + 1):
            ii = np.arange(max(1, s - m), min(m, s - 1) + 1)
            jj = s - ii
            best = np.minimum(np.minimum(C[:, ii - 1, jj - 1], C[:, ii - 1, jj]), C[:, ii, jj - 1])
            C[:, ii, jj] = cost[:, ii - 1, jj - 1] + best
        out[lo:lo + step] = C[:, m, m]
    return out


def cddtw(a, b):
    """Length-normalised cumulative DTW cost ``C(m, m) / m``."""
    a, b = _pair(a, b)
    lead = a.shape[:-1]
    m = a.shape[-1]
    c = _dtw_table_last(a.reshape(-1, m), b.reshape(-1, m))
    return _scalar((c / m).reshape(lead))


def _pearson_raw(a, b):
    da = a - a.mean(axis=-1, keepdims=True)
    db = b - b.mean(axis=-1, keepdims=True)
    sa = np.sqrt((da * da).sum(axis=-1))
    sb = np.sqrt((db * db).sum(axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (da * db).sum(axis=-1) / (sa * sb)
    r = np.clip(r, -1.0, 1.0)
    degenerate = (sa == 0) | (sb == 0)
    return np.where(degenerate, np.nan, 1.0 - r), degenerate


def pearson_distance(a, b):
    """``1 - r`` with ``r`` the sample Pearson correlation; lies in [0, 2].

    Raises DegenerateSeries if either vector is constant.
    """
    a, b = _pair(a, b)
    pd, degenerate = _pearson_raw(a, b)
    if np.any(degenerate):
        raise DegenerateSeries("Pearson distance undefined for a constant vector")
    return _scalar(pd)


def pearson_distance_or_nan(a, b):
    """Like :func:`pearson_distance` but NaN where a vector is constant."""
    a, b = _pair(a, b)
    return _scalar(_pearson_raw(a, b)[0])


_BATCH_FUNCS = {
    "AD": arithmetic_difference,
    "ED": euclidean_difference,
    "CDDTW": cddtw,
    "PD": pearson_distance_or_nan,
}


def indicator(name: str, a, b):
    return _BATCH_FUNCS[name](a, b)


def _complete_rows(matrix: DiseaseMatrix):
    full = matrix.mask.all(axis=1)
    return np.nonzero(full)[0], np.nonzero(~full)[0]


@dataclass
class SpatialCorrelationProfile:
    """One value per (distance group, indicator), plus pair counts.

    Empty groups and groups with no defined Pearson distance hold NaN.
    """

    upper_km: np.ndarray
    values: dict[str, np.ndarray]
    pair_counts: np.ndarray
    pd_undefined: np.ndarray
    excluded_regions: list[int] = field(default_factory=list)

    @property
    def empty_groups(self) -> list[int]:
        return [k for k, c in enumerate(self.pair_counts) if c == 0]

    def records(self, normalize: bool = False) -> list[dict]:
        vals = {k: (minmax(v) if normalize else v) for k, v in self.values.items()}
        rows = []
        for g in range(len(self.pair_counts)):
            for ind in INDICATORS:
                rows.append({
                    "group_km": float(self.upper_km[g]),
                    "indicator": ind,
                    "value": float(vals[ind][g]),
                    "pair_count": int(self.pair_counts[g]),
                })
        return rows


def spatial_profile(matrix: DiseaseMatrix, groups: PairGroupSet) -> SpatialCorrelationProfile:
    """Mean of each per-pair indicator over the pairs of every distance group.

    Each pair compares the two regions' year series. Regions with any missing
    year are left out together with all their pairs.
    """
    keep, excluded = _complete_rows(matrix)
    usable = np.zeros(matrix.shape[0], dtype=bool)
    usable[keep] = True
    V = matrix.values
    M = groups.M
    values = {k: np.full(M, np.nan) for k in INDICATORS}
    counts = np.zeros(M, dtype=np.int64)
    pd_undefined = np.zeros(M, dtype=np.int64)
    for g, pairs in enumerate(groups.groups):
        if len(pairs):
            pairs = pairs[usable[pairs[:, 0]] & usable[pairs[:, 1]]]
        counts[g] = len(pairs)
        if not len(pairs):
            continue
        A, B = V[pairs[:, 0]], V[pairs[:, 1]]
        values["AD"][g] = np.mean(arithmetic_difference(A, B))
        values["ED"][g] = np.mean(euclidean_difference(A, B))
        values["CDDTW"][g] = np.mean(cddtw(A, B))
        pd = np.atleast_1d(pearson_distance_or_nan(A, B))
        ok = np.isfinite(pd)
        pd_undefined[g] = int((~ok).sum())
        if ok.any():
            values["PD"][g] = pd[ok].mean()
    if counts.sum() == 0:
        raise EmptyAnalysis("every distance group is empty")
    return SpatialCorrelationProfile(
        np.asarray(groups.upper_edges()), values, counts, pd_undefined, excluded.tolist()
    )


@dataclass
class TemporalCorrelationGrid:
    years: tuple[int, ...]
    values: dict[str, np.ndarray]
    excluded_regions: list[int] = field(default_factory=list)

    def records(self, normalize: bool = False) -> list[dict]:
        vals = {k: (minmax(v) if normalize else v) for k, v in self.values.items()}
        rows = []
        for a, ya in enumerate(self.years):
            for b, yb in enumerate(self.years):
                for ind in INDICATORS:
                    rows.append({"year_a": ya, "year_b": yb, "indicator": ind, "value": float(vals[ind][a, b])})
        return rows


def temporal_grid(matrix: DiseaseMatrix) -> TemporalCorrelationGrid:
    """Indicator between every pair of year columns (vectors indexed by region)."""
    T = matrix.shape[1]
    if T < 2:
        raise EmptyAnalysis("temporal analysis needs at least two years")
    keep, excluded = _complete_rows(matrix)
    if len(keep) == 0:
        raise EmptyAnalysis("no region is observed in every year")
    V = matrix.values[keep]
    ia, ib = np.triu_indices(T, k=1)
    A, B = V[:, ia].T, V[:, ib].T
    values = {}
    for ind in INDICATORS:
        grid = np.zeros((T, T))
        grid[ia, ib] = indicator(ind, A, B)
        grid = grid + grid.T
        if ind == "PD":
            const = np.ptp(V, axis=0) == 0
            np.fill_diagonal(grid, np.where(const, np.nan, 0.0))
            grid[const, :] = np.nan
            grid[:, const] = np.nan
        values[ind] = grid
    years = matrix.years or tuple(range(T))
    return TemporalCorrelationGrid(tuple(years), values, excluded.tolist())


def minmax(values) -> np.ndarray:
    """Rescale finite entries to [0, 1]; NaN stays NaN, a flat input maps to 0."""
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    out = np.full(v.shape, np.nan)
    if not finite.any():
        return out
    lo, hi = v[finite].min(), v[finite].max()
    out[finite] = 0.0 if hi == lo else (v[finite] - lo) / (hi - lo)
    return out
