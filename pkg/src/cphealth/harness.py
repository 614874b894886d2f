"""Experiment orchestration: select survey regions from history, hide the
rest of the target year, complete, and score.

Grid cells are independent and can run in worker processes; records are
merged in a fixed order so the report does not depend on scheduling.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .completion import CompleterConfig, get_completer
from .core import HealthCube, ObservationMask, RegionCatalog
from .errors import InsufficientHistory, InvalidConfig, InvalidProportion
from .geo import distance_matrix, nearest_neighbors
from .selection import select_qcb, select_random, select_rmdc, qcb_scores, selection_size, top_k

DEFAULT_PROPORTIONS = tuple(round(0.1 * k, 1) for k in range(1, 10))
ALL_COMPLETERS = ("ucf", "icf", "blend", "nmf", "hotd")
SELECTION_METHODS = ("random", "rmdc", "qcb")
RECORD_FIELDS = ("target_year", "selection_method", "completer", "proportion", "seed",
                 "disease", "rmse", "mae", "n_scored", "flags")


@dataclass(frozen=True)
class ExperimentSpec:
    target_year: int
    proportions: tuple[float, ...] = DEFAULT_PROPORTIONS
    selection_methods: tuple[str, ...] = ("random",)
    completers: tuple[str, ...] = ALL_COMPLETERS
    seeds: tuple[int, ...] = (0,)
    completer_config: CompleterConfig = field(default_factory=CompleterConfig)
    longitudinal: bool = False
    committee: tuple[str, ...] = ("ucf", "icf")
    rmdc_half_width: int = 5

    def __post_init__(self):
        for name in ("proportions", "selection_methods", "completers", "seeds", "committee"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for p in self.proportions:
            if not 0.0 < p <= 1.0:
                raise InvalidProportion(f"proportion must lie in (0, 1], got {p}")
        for m in self.selection_methods:
            if m not in SELECTION_METHODS:
                raise InvalidConfig(f"unknown selection method {m!r}")
        for c in self.completers + self.committee:
            get_completer(c)

    def to_dict(self) -> dict:
        return {
            "target_year": self.target_year,
            "proportions": list(self.proportions),
            "selection_methods": list(self.selection_methods),
            "completers": list(self.completers),
            "seeds": list(self.seeds),
            "completer_config": self.completer_config.to_dict(),
            "longitudinal": self.longitudinal,
            "committee": list(self.committee),
            "rmdc_half_width": self.rmdc_half_width,
        }


@dataclass
class ExperimentReport:
    records: list[dict]
    provenance: dict

    def select(self, **criteria) -> list[dict]:
        return [r for r in self.records if all(r[k] == v for k, v in criteria.items())]

    def mean_mae(self, **criteria) -> float:
        vals = [r["mae"] for r in self.select(**criteria) if r["mae"] is not None]
        return float(np.mean(vals)) if vals else math.nan


def rmse(truth, pred) -> float | None:
    e = np.asarray(truth, float) - np.asarray(pred, float)
    return float(np.sqrt(np.mean(e * e))) if e.size else None


def mae(truth, pred) -> float | None:
    e = np.asarray(truth, float) - np.asarray(pred, float)
    return float(np.mean(np.abs(e))) if e.size else None


def _flag_text(flags: Counter) -> str:
    return ";".join(f"{k}={flags[k]}" for k in sorted(flags) if flags[k])


class _Selector:
    """Selection for one (method, seed) over one history; scores are shared
    across proportions since they do not depend on the budget."""

    def __init__(self, method, seed, history, hmask, neighbors, spec: ExperimentSpec):
        self.method, self.seed = method, seed
        self.history, self.hmask, self.neighbors, self.spec = history, hmask, neighbors, spec
        self._scores = None
        self._flags: Counter = Counter()

    def select(self, proportion):
        n = self.history.n_regions
        if self.method == "random":
            # one draw per (seed, proportion) so each budget is its own sample
            r = select_random(n, proportion, seed=self.seed * 1000 + int(round(proportion * 1000)))
            return r.selected, r.flags
        if self.method == "rmdc":
            r = select_rmdc(self.history, self.hmask, self.neighbors, proportion, self.spec.rmdc_half_width)
            return r.selected, r.flags
        if self._scores is None:
            committee = [get_completer(c) for c in self.spec.committee]
            config = self.spec.completer_config.replace(rng_seed=int(self.seed))
            self._scores, self._flags = qcb_scores(self.history, self.hmask, committee, self.neighbors, config)
        return top_k(self._scores, selection_size(n, proportion)), self._flags


def _score(cube, native, target_idx, hidden_rows, pred_array, diseases):
    """Per-disease and pooled metrics over hidden entries with ground truth."""
    out = []
    truth_ok = native[:, :, target_idx] & hidden_rows[:, None]
    y = cube.values[:, :, target_idx]
    p = pred_array[:, :, target_idx]
    for d, code in enumerate(diseases):
        sel = truth_ok[:, d]
        out.append((code, rmse(y[sel, d], p[sel, d]), mae(y[sel, d], p[sel, d]), int(sel.sum())))
    out.append(("ALL", rmse(y[truth_ok], p[truth_ok]), mae(y[truth_ok], p[truth_ok]), int(truth_ok.sum())))
    return out


def _run_unit(args):
    """All proportions and completers for one (selection method, seed)."""
    cube, native, neighbors, spec, method, seed = args
    config = spec.completer_config.replace(rng_seed=int(seed))
    t0 = cube.year_index(spec.target_year)
    target_years = range(t0, len(cube.years)) if spec.longitudinal else [t0]
    records = []
    completers = [get_completer(c) for c in spec.completers]
    first = _Selector(method, seed, cube.take_years(range(t0)), ObservationMask(native[:, :, :t0]), neighbors, spec)
    for proportion in spec.proportions:
        for comp in completers:
            values = np.array(cube.values)
            known = np.array(native)
            for t in target_years:
                hist_idx = list(range(t))
                if t == t0:
                    selector = first
                else:
                    history = cube.with_values(values).take_years(hist_idx)
                    selector = _Selector(method, seed, history, ObservationMask(known[:, :, hist_idx]), neighbors, spec)
                selected, sel_flags = selector.select(proportion)
                hidden_rows = np.ones(cube.n_regions, dtype=bool)
                hidden_rows[selected] = False

                work_idx = hist_idx + [t]
                work = cube.with_values(values).take_years(work_idx)
                wmask = known[:, :, work_idx].copy()
                wmask[hidden_rows, :, -1] = False
                targets = np.zeros(work.shape, dtype=bool)
                targets[hidden_rows, :, -1] = True
                flags = Counter(sel_flags)
                if targets.any():
                    pred = comp.predict(work, ObservationMask(wmask), targets, neighbors, config)
                    flags.update(pred.flags)
                    pred_full = np.full(cube.shape, np.nan)
                    pred_full[:, :, work_idx] = pred.as_array(work.shape)
                else:
                    pred_full = np.full(cube.shape, np.nan)
                for disease, r, m, n in _score(cube, native, t, hidden_rows, pred_full, cube.diseases):
                    records.append({
                        "target_year": cube.years[t],
                        "selection_method": method,
                        "completer": comp.name,
                        "proportion": float(proportion),
                        "seed": int(seed),
                        "disease": disease,
                        "rmse": r,
                        "mae": m,
                        "n_scored": n,
                        "flags": _flag_text(flags),
                    })
                if spec.longitudinal:
                    # completed values become history for the next target year
                    fill = hidden_rows[:, None] & np.isfinite(pred_full[:, :, t])
                    values[:, :, t] = np.where(fill, pred_full[:, :, t], values[:, :, t])
                    known[:, :, t] |= fill
    return records


def _sort_key(r):
    return (r["selection_method"], r["seed"], r["proportion"], r["completer"], r["target_year"],
            r["disease"] == "ALL", r["disease"])


def run_experiment(cube: HealthCube, mask: ObservationMask, catalog: RegionCatalog, spec: ExperimentSpec,
                   workers: int = 1) -> ExperimentReport:
    if spec.target_year not in cube.years:
        raise InvalidConfig(f"target year {spec.target_year} not in data years {list(cube.years)}")
    t0 = cube.year_index(spec.target_year)
    if t0 < 1:
        raise InsufficientHistory(f"no year before target year {spec.target_year}")
    if len(catalog) != cube.n_regions:
        raise InvalidConfig("catalog and cube disagree on region count")
    neighbors = nearest_neighbors(distance_matrix(catalog))
    units = [(cube, mask.mask, neighbors, spec, method, seed)
             for method in spec.selection_methods for seed in spec.seeds]
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_run_unit, units))
    else:
        chunks = [_run_unit(u) for u in units]
    records = sorted((r for c in chunks for r in c), key=_sort_key)
    provenance = {
        "toolkit": "cphealth",
        "version": __version__,
        "experiment": spec.to_dict(),
        "data": {"regions": cube.n_regions, "diseases": list(cube.diseases), "years": list(cube.years)},
    }
    return ExperimentReport(records, provenance)
