"""Non-negative matrix factorization fitted on observed entries only."""

from __future__ import annotations

import warnings

import numpy as np

from ..core import DiseaseMatrix
from ..errors import ConvergenceWarning, InvalidConfig, InvalidInput
from .base import CompleterConfig, Prediction, matrix_prediction, resolve_targets

_EPS = 1e-15


def masked_objective(V, O, W, H) -> float:
    R = np.where(O, V - W @ H, 0.0)
    return 0.5 * float((R * R).sum())


def masked_nmf(V, O, rank: int, iters: int = 500, tol: float = 1e-6, seed: int = 0):
    """Fit ``V ~ W @ H`` over the entries where ``O`` is True.

    Lee-Seung multiplicative updates with the residual weighted by the mask,
    so unobserved entries never enter the objective. Stops after ``iters``
    updates or once the relative objective decrease drops below ``tol``.

    Returns ``(W, H, objective_history, converged)``.
    """
    V = np.where(O, np.asarray(V, dtype=float), 0.0)
    n, m = V.shape
    rng = np.random.default_rng(seed)
    mean = V[O].mean() if O.any() else 0.0
    scale = np.sqrt(max(mean, _EPS) / rank)
    W = rng.uniform(_EPS, 1.0, size=(n, rank)) * scale
    H = rng.uniform(_EPS, 1.0, size=(rank, m)) * scale
    Of = O.astype(float)
    MV = Of * V
    history = [masked_objective(V, O, W, H)]
    converged = False
    for _ in range(iters):
        W *= (MV @ H.T) / ((Of * (W @ H)) @ H.T + _EPS)
        H *= (W.T @ MV) / (W.T @ (Of * (W @ H)) + _EPS)
        f = masked_objective(V, O, W, H)
        prev = history[-1]
        history.append(f)
        if f == 0.0 or (prev > 0 and (prev - f) / prev < tol):
            converged = True
            break
    return W, H, history, converged


def nmf_predict(matrix: DiseaseMatrix, config: CompleterConfig | None = None, targets=None,
                disease_index: int = 0) -> Prediction:
    config = config or CompleterConfig()
    targets = resolve_targets(matrix.mask, targets)
    O = matrix.mask & ~targets
    n, m = matrix.shape
    r = config.nmf_rank
    if r >= min(n, m):
        raise InvalidConfig(f"nmf_rank {r} must be < min(n, m) = {min(n, m)}")
    if np.any(matrix.values[O] < 0):
        raise InvalidInput("negative entry in NMF input")
    W, H, hist, converged = masked_nmf(matrix.values, O, r, config.nmf_iters, config.nmf_tol,
                                       seed=[config.rng_seed, disease_index])
    flags = {}
    if not converged:
        warnings.warn(f"NMF stopped at the iteration cap ({config.nmf_iters})", ConvergenceWarning, stacklevel=2)
        flags["nmf_not_converged"] = 1
    rows, cols = np.nonzero(targets)
    fit = W @ H
    return matrix_prediction(rows, cols, fit[rows, cols], disease_index, flags,
                             {"nmf_objective": {int(disease_index): hist[-1]}})
