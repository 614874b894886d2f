"""Masked Tucker decomposition with L2 regularisation.

Model: ``X ~ G x1 A x2 B x3 C`` for a (regions, diseases, years) tensor.
Loss over observed entries ``M``::

    0.5 * ||M * (X - G x1 A x2 B x3 C)||^2
        + 0.5 * lam * (||G||^2 + ||A||^2 + ||B||^2 + ||C||^2)

The optimiser cycles over the blocks A, B, C, G taking one gradient step on
each. The loss is quadratic along a block's gradient direction, so the trial
step starts at that quadratic's minimiser and is halved until the Armijo
condition holds. After every sweep each factor column and the matching
core slice are rescaled to equal norms: the reconstruction is unchanged and
the penalty can only drop, which keeps the blocks on comparable scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError

_ARMIJO = 1e-4
_MAX_NONFINITE = 5
BLOCKS = ("A", "B", "C", "G")


@dataclass
class TuckerFactors:
    G: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return reconstruct(self.G, self.A, self.B, self.C)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.G.ravel(), self.A.ravel(), self.B.ravel(), self.C.ravel()])

    def unflat(self, vec) -> "TuckerFactors":
        parts, k = [], 0
        for arr in (self.G, self.A, self.B, self.C):
            parts.append(np.asarray(vec[k:k + arr.size], dtype=float).reshape(arr.shape))
            k += arr.size
        return TuckerFactors(*parts)

    def replace(self, name: str, value) -> "TuckerFactors":
        parts = {"G": self.G, "A": self.A, "B": self.B, "C": self.C}
        parts[name] = value
        return TuckerFactors(**parts)


def reconstruct(G, A, B, C) -> np.ndarray:
    T = np.tensordot(A, G, axes=(1, 0))  # i q r
    T = np.tensordot(T, B, axes=(1, 1))  # i r j
    return np.tensordot(T, C, axes=(1, 1))  # i j k


def _block_grad(name, E, f: TuckerFactors, lam: float) -> np.ndarray:
    G, A, B, C = f.G, f.A, f.B, f.C
    if name == "A":
        EBC = np.tensordot(np.tensordot(E, B, axes=(1, 0)), C, axes=(1, 0))  # i q r
        return np.tensordot(EBC, G, axes=([1, 2], [1, 2])) + lam * A
    if name == "B":
        EAC = np.tensordot(np.tensordot(E, A, axes=(0, 0)), C, axes=(1, 0))  # j p r
        return np.tensordot(EAC, G, axes=([1, 2], [0, 2])) + lam * B
    if name == "C":
        EAB = np.tensordot(np.tensordot(E, A, axes=(0, 0)), B, axes=(0, 0))  # k p q
        return np.tensordot(EAB, G, axes=([1, 2], [0, 1])) + lam * C
    EBC = np.tensordot(np.tensordot(E, B, axes=(1, 0)), C, axes=(1, 0))
    return np.tensordot(A, EBC, axes=(0, 0)) + lam * G


def _reg(f: TuckerFactors) -> float:
    return sum(float((a * a).sum()) for a in (f.G, f.A, f.B, f.C))


def tucker_loss(f: TuckerFactors, X, M, lam: float) -> float:
    E = np.where(M, f.reconstruct() - X, 0.0)
    return 0.5 * float((E * E).sum()) + 0.5 * lam * _reg(f)


def tucker_loss_grad(f: TuckerFactors, X, M, lam: float):
    """Loss and its gradient with respect to (G, A, B, C)."""
    E = np.where(M, f.reconstruct() - X, 0.0)
    loss = 0.5 * float((E * E).sum()) + 0.5 * lam * _reg(f)
    grads = {name: _block_grad(name, E, f, lam) for name in BLOCKS}
    return loss, TuckerFactors(**grads)


def init_factors(shape, ranks, seed) -> TuckerFactors:
    rng = np.random.default_rng(seed)
    n, d, t = shape
    r1, r2, r3 = ranks
    G = rng.uniform(-0.5, 0.5, size=(r1, r2, r3))
    A = rng.uniform(-0.5, 0.5, size=(n, r1)) / np.sqrt(r1)
    B = rng.uniform(-0.5, 0.5, size=(d, r2)) / np.sqrt(r2)
    C = rng.uniform(-0.5, 0.5, size=(t, r3)) / np.sqrt(r3)
    return TuckerFactors(G, A, B, C)


@dataclass
class TuckerFit:
    factors: TuckerFactors
    losses: list
    converged: bool


def _step_block(name, f: TuckerFactors, E, Mf, lam, loss):
    """One backtracking gradient step on a single block.

    Returns the updated factors, residual and loss (unchanged if no step
    could be accepted).
    """
    g = _block_grad(name, E, f, lam)
    gg = float((g * g).sum())
    if gg == 0.0:
        return f, E, loss
    # residual is linear in each block: E(t) = E - t * M * R(g)
    dE = Mf * reconstruct(*(g if b == name else getattr(f, b) for b in ("G", "A", "B", "C")))
    curv = float((dE * dE).sum()) + lam * gg
    old = getattr(f, name)
    step = gg / curv if curv > 0 else 1.0
    reg_rest = _reg(f) - float((old * old).sum())
    nonfinite = 0
    while step > 0:
        new_block = old - step * g
        new_E = E - step * dE
        new = 0.5 * float((new_E * new_E).sum()) + 0.5 * lam * (reg_rest + float((new_block * new_block).sum()))
        if not np.isfinite(new):
            nonfinite += 1
            if nonfinite > _MAX_NONFINITE:
                raise DivergenceError("Tucker loss stayed non-finite after repeated step halving")
            step *= 0.5
            continue
        if new <= loss - _ARMIJO * step * gg:
            return f.replace(name, new_block), new_E, new
        step *= 0.5
        if step < 1e-30:
            break
    return f, E, loss


def rebalance(f: TuckerFactors) -> TuckerFactors:
    """Rescale factor columns against core slices so their norms match."""
    G = f.G.copy()
    factors = [f.A.copy(), f.B.copy(), f.C.copy()]
    for mode, F in enumerate(factors):
        cn = np.linalg.norm(F, axis=0)
        gn = np.linalg.norm(np.moveaxis(G, mode, 0).reshape(G.shape[mode], -1), axis=1)
        ok = (cn > 0) & (gn > 0)
        s = np.ones_like(cn)
        s[ok] = np.sqrt(gn[ok] / cn[ok])
        F *= s
        shape = [1, 1, 1]
        shape[mode] = -1
        G /= s.reshape(shape)
    return TuckerFactors(G, *factors)


def fit_tucker(X, M, ranks, lam: float = 1e-3, iters: int = 1000, tol: float = 1e-9, seed=0,
               init: TuckerFactors | None = None) -> TuckerFit:
    """Minimise the masked Tucker loss; ``losses`` holds one value per sweep
    over the four blocks and is non-increasing."""
    M = np.asarray(M, dtype=bool)
    X = np.where(M, np.asarray(X, dtype=float), 0.0)
    Mf = M.astype(float)
    f = init if init is not None else init_factors(X.shape, ranks, seed)
    E = Mf * (f.reconstruct() - X)
    loss = 0.5 * float((E * E).sum()) + 0.5 * lam * _reg(f)
    if not np.isfinite(loss):
        raise DivergenceError("initial Tucker loss is not finite")
    losses = [loss]
    converged = False
    for _ in range(iters):
        prev = loss
        for name in BLOCKS:
            f, E, loss = _step_block(name, f, E, Mf, lam, loss)
        if lam > 0:
            f = rebalance(f)
            loss = min(loss, 0.5 * float((E * E).sum()) + 0.5 * lam * _reg(f))
        losses.append(loss)
        if loss == 0.0 or prev - loss <= tol * prev:
            converged = True
            break
    return TuckerFit(f, losses, converged)
