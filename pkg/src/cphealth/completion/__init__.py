"""Missing-entry completion algorithms behind one cube-level interface.

UCF, ICF, the blend and NMF work on one disease matrix at a time; HOTD
factorises the whole (region, disease, year) cube jointly.
"""

from __future__ import annotations

import warnings
from collections import Counter

import numpy as np

from ..core import DiseaseMatrix, HealthCube, ObservationMask
from ..errors import ConvergenceWarning, InvalidConfig, InvalidInput
from .base import CompleterConfig, Completer, Prediction, matrix_prediction, resolve_targets
from .cf import blend_predict, blend_weights_from_history, fit_blend_weights, icf_predict, ucf_predict
from .nmf import masked_nmf, nmf_predict
from .tucker import fit_tucker, tucker_loss, tucker_loss_grad

__all__ = [
    "COMPLETERS", "Completer", "CompleterConfig", "Prediction", "get_completer",
    "ucf_predict", "icf_predict", "blend_predict", "nmf_predict", "hotd_predict",
    "fit_blend_weights", "masked_nmf", "fit_tucker", "tucker_loss", "tucker_loss_grad",
]


def _matrices(cube: HealthCube, mask: ObservationMask, targets: np.ndarray):
    for d, code in enumerate(cube.diseases):
        m = DiseaseMatrix(cube.values[:, d, :], mask.mask[:, d, :], code, cube.years)
        yield d, m, targets[:, d, :]


def _history_for(matrix: DiseaseMatrix, targets: np.ndarray) -> DiseaseMatrix:
    """Years before the first target year; the whole matrix (targets hidden)
    when every year holds a target."""
    cols = np.nonzero(targets.any(axis=0))[0]
    first = cols[0] if len(cols) else matrix.shape[1]
    if first >= 1:
        return DiseaseMatrix(matrix.values[:, :first], matrix.mask[:, :first])
    return DiseaseMatrix(matrix.values, matrix.mask & ~targets)


class _PerDisease(Completer):
    def _one(self, matrix, history, targets, d, neighbors, config, leave_one_out) -> Prediction:
        raise NotImplementedError

    def predict(self, cube, mask, targets=None, neighbors=None, config=None):
        config = config or CompleterConfig()
        targets = resolve_targets(mask.mask, targets)
        parts = []
        for d, m, t in _matrices(cube, mask, targets):
            if t.any():
                parts.append(self._one(m, _history_for(m, t), t, d, neighbors, config, False))
        return Prediction.concat(parts)


class UCF(_PerDisease):
    name = "ucf"

    def _one(self, matrix, history, targets, d, neighbors, config, leave_one_out):
        return ucf_predict(matrix, neighbors, config, targets, d, leave_one_out)

    def predict_loo(self, cube, mask, year_index, neighbors=None, config=None):
        return _fast_loo(self, cube, mask, year_index, neighbors, config)


class ICF(UCF):
    name = "icf"

    def _one(self, matrix, history, targets, d, neighbors, config, leave_one_out):
        return icf_predict(matrix, neighbors, config, targets, d, leave_one_out)


class Blend(UCF):
    name = "blend"

    def _one(self, matrix, history, targets, d, neighbors, config, leave_one_out):
        return blend_predict(matrix, history, neighbors, config, targets, d, leave_one_out)


def _fast_loo(completer: _PerDisease, cube, mask, year_index, neighbors, config):
    """Leave-one-out for window methods.

    A UCF/ICF prediction only reads the window around its own entry and never
    the entry itself, so hiding one region-year and predicting it equals
    predicting it in place with every other entry left visible.
    """
    config = config or CompleterConfig()
    n, dd, _ = cube.shape
    out = np.full((n, dd), np.nan)
    flags: Counter = Counter()
    for d, m, _t in _matrices(cube, mask, np.zeros(cube.shape, dtype=bool)):
        t = np.zeros(m.shape, dtype=bool)
        t[:, year_index] = m.mask[:, year_index]
        if not t.any():
            continue
        history = DiseaseMatrix(m.values, m.mask)
        p = completer._one(m, history, t, d, neighbors, config, True)
        flags.update(p.flags)
        out[p.index[:, 0], d] = p.values
    return out, flags


class NMF(_PerDisease):
    name = "nmf"

    def _one(self, matrix, history, targets, d, neighbors, config, leave_one_out):
        n, m = matrix.shape
        r = config.nmf_rank
        flags = Counter()
        if r >= min(n, m):
            r = max(1, min(n, m) - 1)
            flags["nmf_rank_clamped"] += 1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            p = nmf_predict(matrix, config.replace(nmf_rank=r), targets, d)
        p.flags.update(flags)
        return p


def hotd_predict(cube: HealthCube, mask: ObservationMask, config: CompleterConfig | None = None,
                 targets=None) -> Prediction:
    """Tucker completion of the whole cube; predictions are the clamped
    reconstruction at the target entries."""
    config = config or CompleterConfig()
    targets = resolve_targets(mask.mask, targets)
    O = mask.mask & ~targets
    if np.any(cube.values[O] < 0):
        raise InvalidInput("negative entry in HOTD input")
    ranks = config.resolved_tucker_ranks(cube.shape)
    fit = fit_tucker(cube.values, O, ranks, config.tucker_lambda, config.tucker_iters,
                     config.tucker_tol, seed=[config.rng_seed, 17])
    flags = Counter()
    if not fit.converged:
        flags["hotd_iteration_cap"] += 1
    R = fit.factors.reconstruct()
    idx = np.argwhere(targets)
    values = np.clip(R[tuple(idx.T)], 0.0, 1.0)
    return Prediction(idx, values, flags, {"hotd_loss": fit.losses[-1], "hotd_ranks": list(ranks)})


class HOTD(Completer):
    name = "hotd"

    def predict(self, cube, mask, targets=None, neighbors=None, config=None):
        return hotd_predict(cube, mask, config, targets)


COMPLETERS: dict[str, type[Completer]] = {c.name: c for c in (UCF, ICF, Blend, NMF, HOTD)}


def get_completer(name: str) -> Completer:
    try:
        return COMPLETERS[name]()
    except KeyError:
        raise InvalidConfig(f"unknown completer {name!r}; choose from {sorted(COMPLETERS)}") from None
