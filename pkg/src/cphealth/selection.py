"""Offline choice of the regions to survey directly.

Every strategy scores all regions from historical data and keeps the
top-scoring share, ties going to the lower region index, so a larger budget
always contains the selection of a smaller one.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .completion import CompleterConfig
from .core import HealthCube, ObservationMask
from .errors import CommitteeTooSmall, InsufficientHistory, InvalidProportion, SelectionDegenerate


@dataclass
class SelectionResult:
    selected: np.ndarray
    scores: np.ndarray
    method: str
    proportion: float
    flags: Counter = field(default_factory=Counter)

    def mask(self, n: int | None = None) -> np.ndarray:
        out = np.zeros(len(self.scores) if n is None else n, dtype=bool)
        out[self.selected] = True
        return out


def selection_size(n: int, proportion: float) -> int:
    """``round(proportion * n)`` with halves rounded up, clamped to [1, n]."""
    _check_proportion(proportion)
    return min(n, max(1, int(math.floor(proportion * n + 0.5))))


def _check_proportion(p):
    if not (0.0 < p <= 1.0):
        raise InvalidProportion(f"proportion must lie in (0, 1], got {p}")


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    order = np.lexsort((np.arange(len(scores)), -np.asarray(scores, dtype=float)))
    return np.sort(order[:k])


def _result(scores, method, proportion, flags=None) -> SelectionResult:
    scores = np.asarray(scores, dtype=float)
    k = selection_size(len(scores), proportion)
    return SelectionResult(top_k(scores, k), scores, method, float(proportion), Counter(flags or {}))


def select_random(n: int, proportion: float, seed: int) -> SelectionResult:
    """Uniform sample without replacement (top-k of i.i.d. uniform scores)."""
    _check_proportion(proportion)
    rng = np.random.default_rng([int(seed), 7031])
    return _result(rng.random(n), "random", proportion)


def dispersion_coefficients(values: np.ndarray, neighbors: np.ndarray, m: int = 5):
    """Neighborhood dispersion for each region of one value vector.

    The neighborhood is the region plus its ``2m`` nearest regions. Returns
    the coefficients and a mask of regions whose neighborhood mean is zero
    (coefficient undefined, reported as NaN).
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    width = min(2 * m, n - 1)
    nb = np.column_stack([np.arange(n), np.asarray(neighbors)[:, :width]]) if width > 0 else np.arange(n)[:, None]
    V = values[nb]
    mean = V.mean(axis=1)
    spread = np.sqrt(((V - mean[:, None]) ** 2).sum(axis=1))
    undefined = mean == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        dc = np.where(undefined, np.nan, spread / mean)
    return dc, undefined


def select_rmdc(history: HealthCube, mask: ObservationMask, neighbors, proportion: float, m: int = 5) -> SelectionResult:
    """Regions with the largest mean dispersion coefficient over diseases,
    each disease using its most recent fully observed historical year."""
    _check_proportion(proportion)
    n, dd, _ = history.shape
    flags: Counter = Counter()
    total = np.zeros(n)
    terms = np.zeros(n)
    for d in range(dd):
        full_years = np.nonzero(mask.mask[:, d, :].all(axis=0))[0]
        if len(full_years) == 0:
            flags["rmdc_disease_without_full_year"] += 1
            continue
        y = full_years[-1]
        dc, undefined = dispersion_coefficients(history.values[:, d, y], neighbors, m)
        flags["rmdc_zero_mean_skipped"] += int(undefined.sum())
        ok = ~undefined
        total[ok] += dc[ok]
        terms[ok] += 1
    if flags["rmdc_disease_without_full_year"] == dd:
        raise InsufficientHistory("no disease has a fully observed historical year")
    if not terms.any():
        raise SelectionDegenerate("every dispersion coefficient was undefined")
    scores = np.where(terms > 0, total / np.maximum(terms, 1), 0.0)
    return _result(scores, "rmdc", proportion, +flags)


def qcb_scores(history: HealthCube, mask: ObservationMask, committee, neighbors,
               config: CompleterConfig | None = None):
    """Mean committee disagreement per region.

    For every historical year each region's entries are hidden in turn and
    predicted by every member; the population variance of the members'
    predictions is averaged over diseases, then over years.
    """
    if len(committee) < 2:
        raise CommitteeTooSmall(f"committee needs at least 2 members, got {len(committee)}")
    n, dd, T = history.shape
    if T < 2:
        raise InsufficientHistory("query-by-committee needs at least two historical years")
    config = config or CompleterConfig()
    flags: Counter = Counter()
    per_year = np.full((n, T), np.nan)
    for y in range(T):
        preds = []
        for member in committee:
            try:
                p, f = member.predict_loo(history, mask, y, neighbors, config)
                flags.update(f)
            except Exception:  # a failing member is excluded, not fatal
                p = np.full((n, dd), np.nan)
                flags[f"member_failed:{getattr(member, 'name', type(member).__name__)}"] += 1
            preds.append(np.where(np.isfinite(p), p, np.nan))
        P = np.stack(preds)  # member, region, disease
        have = np.isfinite(P)
        count = have.sum(axis=0)
        flags["member_missing_entry"] += int(((count > 0) & (count < len(committee)) & mask.mask[:, :, y]).sum())
        usable = count >= 2
        Pz = np.where(have, P, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = Pz.sum(axis=0) / count
            var = np.where(have, (P - mean) ** 2, 0.0).sum(axis=0) / count
        var = np.where(usable, var, np.nan)
        with np.errstate(invalid="ignore"):
            rows_ok = usable.any(axis=1)
            per_year[rows_ok, y] = np.nanmean(var[rows_ok], axis=1)
    defined = np.isfinite(per_year)
    scores = np.where(defined.any(axis=1), np.nansum(per_year, axis=1) / np.maximum(defined.sum(axis=1), 1), 0.0)
    flags["region_without_score"] += int((~defined.any(axis=1)).sum())
    return scores, +flags


def select_qcb(history: HealthCube, mask: ObservationMask, committee, neighbors, proportion: float,
               seed: int = 0, config: CompleterConfig | None = None) -> SelectionResult:
    _check_proportion(proportion)
    config = (config or CompleterConfig()).replace(rng_seed=int(seed))
    scores, flags = qcb_scores(history, mask, committee, neighbors, config)
    return _result(scores, "qcb", proportion, flags)
