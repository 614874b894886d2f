"""Neighborhood collaborative filtering on a region x year matrix.

UCF treats regions as users and years as items: a missing rate is the
similarity-weighted mean of nearby regions in the same year. ICF swaps the
roles and averages the region's own values in neighboring years. The blend
combines both with least-squares weights fitted on held-out history.

The window around a target ``(i, j)`` spans the ``w`` years centred on ``j``
(truncated at the matrix edge) and the target region plus its ``w - 1``
nearest regions that are observed in year ``j``.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from ..core import DiseaseMatrix
from .base import CompleterConfig, Prediction, fallback_value, matrix_prediction, resolve_targets


def _window_cols(j: int, h: int, T: int) -> np.ndarray:
    cols = np.arange(max(0, j - h), min(T, j + h + 1))
    return cols[cols != j]


def _window_neighbors(order_i: np.ndarray, observed_col: np.ndarray, count: int) -> np.ndarray:
    return order_i[observed_col[order_i]][:count]


def _similarity(ss: np.ndarray, n: np.ndarray, cap: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        sim = 1.0 / np.sqrt(ss / n)
    return np.minimum(sim, cap)


def _ucf_entry(V, O, i, j, nbrs, cols, cap):
    if len(nbrs) == 0 or len(cols) == 0:
        return None
    both = O[i, cols][None, :] & O[np.ix_(nbrs, cols)]
    nt = both.sum(axis=1)
    ok = nt > 0
    if not ok.any():
        return None
    diff = np.where(both, V[i, cols][None, :] - V[np.ix_(nbrs, cols)], 0.0)
    ss = (diff ** 2).sum(axis=1)
    sim = _similarity(ss[ok], nt[ok], cap)
    return float((V[nbrs[ok], j] * sim).sum() / sim.sum())


def _icf_entry(V, O, i, j, nbrs, cols, cap):
    cols = cols[O[i, cols]]
    if len(cols) == 0:
        return None
    rows = np.concatenate([[i], nbrs]).astype(np.int64)
    at_j = O[rows, j].copy()
    at_j[0] = False  # the target itself
    both = at_j[:, None] & O[np.ix_(rows, cols)]
    ns = both.sum(axis=0)
    ok = ns > 0
    if not ok.any():
        return None
    diff = np.where(both, V[rows, j][:, None] - V[np.ix_(rows, cols)], 0.0)
    ss = (diff ** 2).sum(axis=0)
    sim = _similarity(ss[ok], ns[ok], cap)
    return float((V[i, cols[ok]] * sim).sum() / sim.sum())


def _run_cf(entry_fn, flag, matrix, neighbors, config, targets, disease_index, leave_one_out):
    config = config or CompleterConfig()
    V = matrix.values
    targets = resolve_targets(matrix.mask, targets)
    # in leave-one-out mode every target is hidden only from its own prediction
    O = matrix.mask.copy() if leave_one_out else matrix.mask & ~targets
    neighbors = np.asarray(neighbors)
    T = V.shape[1]
    h = (config.window_size - 1) // 2
    k = config.window_size - 1
    rows, cols = np.nonzero(targets)
    out = np.empty(len(rows))
    flags: Counter = Counter()
    for t, (i, j) in enumerate(zip(rows, cols)):
        saved = O[i, j]
        O[i, j] = False
        nbrs = _window_neighbors(neighbors[i], O[:, j], k)
        v = entry_fn(V, O, i, j, nbrs, _window_cols(j, h, T), config.similarity_cap)
        if v is None:
            v = fallback_value(V, O, i, j)
            flags[flag] += 1
        O[i, j] = saved
        out[t] = v
    return matrix_prediction(rows, cols, out, disease_index, flags)


def ucf_predict(matrix: DiseaseMatrix, neighbors, config: CompleterConfig | None = None, targets=None,
                disease_index: int = 0, leave_one_out: bool = False) -> Prediction:
    """Spatial collaborative filtering.

    Neighbor weight is ``1 / sqrt(mean squared difference)`` over the window
    years both rows observe; the prediction is the weighted mean of the
    neighbors' values in the target year. Entries without any usable neighbor
    fall back to the row/column/global observed mean and are counted in
    ``flags['ucf_fallback']``.
    """
    return _run_cf(_ucf_entry, "ucf_fallback", matrix, neighbors, config, targets, disease_index, leave_one_out)


def icf_predict(matrix: DiseaseMatrix, neighbors, config: CompleterConfig | None = None, targets=None,
                disease_index: int = 0, leave_one_out: bool = False) -> Prediction:
    """Temporal collaborative filtering: weighted mean of the target region's
    own values in the other window years, weights from year-column similarity
    over the window regions."""
    return _run_cf(_icf_entry, "icf_fallback", matrix, neighbors, config, targets, disease_index, leave_one_out)


def fit_blend_weights(icf_pred, ucf_pred, truth) -> tuple[float, float]:
    """No-intercept least squares of ``truth`` on ``[icf, ucf]``.

    A rank-deficient design (identical predictors) gets the minimum-norm
    solution, which splits the weight evenly.
    """
    X = np.column_stack([np.asarray(icf_pred, float), np.asarray(ucf_pred, float)])
    coef, *_ = np.linalg.lstsq(X, np.asarray(truth, float), rcond=None)
    return float(coef[0]), float(coef[1])


MIN_BLEND_FIT = 10


def blend_weights_from_history(history: DiseaseMatrix, neighbors, config: CompleterConfig,
                               disease_index: int = 0) -> tuple[tuple[float, float], bool]:
    """Fit (icf_weight, ucf_weight) by hiding a random share of the observed
    history and regressing the truth on both predictions.

    Returns the weights and whether the equal-weight fallback was used.
    """
    obs_r, obs_c = np.nonzero(history.mask)
    n_hold = int(round(config.blend_holdout * len(obs_r)))
    if n_hold < MIN_BLEND_FIT:
        return (0.5, 0.5), True
    rng = np.random.default_rng([config.rng_seed, disease_index, 9])
    pick = np.sort(rng.choice(len(obs_r), size=n_hold, replace=False))
    hold = np.zeros(history.shape, dtype=bool)
    hold[obs_r[pick], obs_c[pick]] = True
    hidden = DiseaseMatrix(history.values, history.mask & ~hold)
    u = ucf_predict(hidden, neighbors, config, hold)
    t = icf_predict(hidden, neighbors, config, hold)
    truth = history.values[u.index[:, 0], u.index[:, 2]]
    return fit_blend_weights(t.values, u.values, truth), False


def blend_predict(matrix: DiseaseMatrix, history: DiseaseMatrix, neighbors, config: CompleterConfig | None = None,
                  targets=None, disease_index: int = 0, leave_one_out: bool = False) -> Prediction:
    """``icf_weight * ICF + ucf_weight * UCF`` with weights fitted on ``history``
    (or taken from ``config.blend_weights``)."""
    config = config or CompleterConfig()
    flags: Counter = Counter()
    if config.blend_weights is not None:
        lam = config.blend_weights
    else:
        lam, equal = blend_weights_from_history(history, neighbors, config, disease_index)
        if equal:
            flags["blend_equal_weights"] += 1
    u = ucf_predict(matrix, neighbors, config, targets, disease_index, leave_one_out)
    t = icf_predict(matrix, neighbors, config, targets, disease_index, leave_one_out)
    flags.update(u.flags)
    flags.update(t.flags)
    values = lam[0] * t.values + lam[1] * u.values
    info = {"blend_weights": {int(disease_index): [lam[0], lam[1]]}}
    return matrix_prediction(u.index[:, 0], u.index[:, 2], values, disease_index, flags, info)
