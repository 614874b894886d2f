"""Shared pieces of the completers: configuration, prediction container and
the common cube-level interface."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from ..core import HealthCube, ObservationMask
from ..errors import InvalidConfig


@dataclass(frozen=True)
class CompleterConfig:
    window_size: int = 5
    # fixed (icf_weight, ucf_weight); None means fit by least squares
    blend_weights: tuple[float, float] | None = None
    blend_holdout: float = 0.2
    nmf_rank: int = 4
    nmf_iters: int = 500
    nmf_tol: float = 1e-6
    # None means (8, min(D, 6), min(T, 4)), each capped by its dimension
    tucker_ranks: tuple[int, int, int] | None = None
    tucker_lambda: float = 1e-3
    tucker_iters: int = 1000
    tucker_tol: float = 1e-9
    similarity_cap: float = 1e12
    rng_seed: int = 0

    def __post_init__(self):
        w = self.window_size
        if w < 3 or w % 2 == 0:
            raise InvalidConfig(f"window_size must be odd and >= 3, got {w}")
        if self.nmf_rank < 1:
            raise InvalidConfig("nmf_rank must be >= 1")
        if self.nmf_iters < 1 or self.tucker_iters < 1:
            raise InvalidConfig("iteration caps must be >= 1")
        if self.tucker_lambda < 0:
            raise InvalidConfig("tucker_lambda must be >= 0")
        if not 0.0 < self.blend_holdout < 1.0:
            raise InvalidConfig("blend_holdout must lie in (0, 1)")
        if self.tucker_ranks is not None:
            if len(self.tucker_ranks) != 3 or min(self.tucker_ranks) < 1:
                raise InvalidConfig("tucker_ranks must be three positive integers")
            object.__setattr__(self, "tucker_ranks", tuple(int(r) for r in self.tucker_ranks))
        if self.blend_weights is not None:
            object.__setattr__(self, "blend_weights", tuple(float(x) for x in self.blend_weights))

    def resolved_tucker_ranks(self, shape) -> tuple[int, int, int]:
        n, d, t = shape
        if self.tucker_ranks is None:
            return (min(8, n), min(d, 6), min(t, 4))
        ranks = self.tucker_ranks
        if any(r > s for r, s in zip(ranks, shape)):
            raise InvalidConfig(f"tucker_ranks {ranks} exceed tensor shape {tuple(shape)}")
        return ranks

    def replace(self, **changes) -> "CompleterConfig":
        return CompleterConfig(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("blend_weights", "tucker_ranks"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d


@dataclass
class Prediction:
    """Predicted rates for a set of entries.

    ``index`` rows are ``(region, disease, year)`` positions in the cube the
    prediction was made for (disease is 0 for single-matrix predictions).
    """

    index: np.ndarray
    values: np.ndarray
    flags: Counter = field(default_factory=Counter)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = np.asarray(self.index, dtype=np.int64).reshape(-1, 3)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(self.index) != len(self.values):
            raise ValueError("index and values lengths differ")

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self, shape) -> np.ndarray:
        out = np.full(shape, np.nan)
        if len(self.index):
            out[tuple(self.index.T)] = self.values
        return out

    def entries(self, cube: HealthCube, region_ids=None) -> list[dict]:
        rows = []
        for (i, d, y), v in zip(self.index, self.values):
            rows.append({
                "region": region_ids[i] if region_ids is not None else int(i),
                "disease": cube.diseases[d],
                "year": cube.years[y],
                "predicted": float(v),
            })
        return rows

    @staticmethod
    def concat(parts: list["Prediction"]) -> "Prediction":
        flags: Counter = Counter()
        info: dict = {}
        for p in parts:
            flags.update(p.flags)
            info.update(p.info)
        if not parts:
            return Prediction(np.zeros((0, 3), dtype=np.int64), np.zeros(0), flags, info)
        index = np.concatenate([p.index for p in parts])
        values = np.concatenate([p.values for p in parts])
        order = np.lexsort(index.T[::-1])
        return Prediction(index[order], values[order], flags, info)


def matrix_prediction(rows, cols, values, disease_index=0, flags=None, info=None) -> Prediction:
    rows = np.asarray(rows, dtype=np.int64)
    idx = np.column_stack([rows, np.full(len(rows), disease_index, dtype=np.int64), np.asarray(cols, dtype=np.int64)])
    return Prediction(idx, np.clip(np.asarray(values, dtype=float), 0.0, 1.0), Counter(flags or {}), dict(info or {}))


def resolve_targets(mask: np.ndarray, targets) -> np.ndarray:
    if targets is None:
        return ~mask
    targets = np.asarray(targets, dtype=bool)
    if targets.shape != mask.shape:
        raise ValueError(f"targets shape {targets.shape} != mask shape {mask.shape}")
    return targets


def fallback_value(values: np.ndarray, observed: np.ndarray, i: int, j: int) -> float:
    """Observed mean of the row, else of the column, else of everything."""
    row = observed[i]
    if row.any():
        return float(values[i, row].mean())
    col = observed[:, j]
    if col.any():
        return float(values[col, j].mean())
    if observed.any():
        return float(values[observed].mean())
    return 0.0


class Completer:
    """Cube-level completion algorithm.

    ``predict`` returns predictions for exactly the ``targets`` entries
    (default: every unobserved entry). Target entries are never read.
    """

    name = "completer"

    def predict(self, cube: HealthCube, mask: ObservationMask, targets=None, neighbors=None,
                config: CompleterConfig | None = None) -> Prediction:
        raise NotImplementedError

    def predict_loo(self, cube: HealthCube, mask: ObservationMask, year_index: int, neighbors=None,
                    config: CompleterConfig | None = None) -> tuple[np.ndarray, Counter]:
        """Predict each region's observed entries of one year with that
        region-year hidden (all its diseases at once).

        Returns an (N, D) array (NaN where nothing was predicted) and flags.
        """
        n, dd, _ = cube.shape
        out = np.full((n, dd), np.nan)
        flags: Counter = Counter()
        for i in range(n):
            t = np.zeros(cube.shape, dtype=bool)
            t[i, :, year_index] = mask.mask[i, :, year_index]
            if not t.any():
                continue
            m2 = ObservationMask(mask.mask & ~t)
            pred = self.predict(cube, m2, t, neighbors, config)
            flags.update(pred.flags)
            out[pred.index[:, 0], pred.index[:, 1]] = pred.values
        return out, flags

    def __repr__(self):
        return f"{type(self).__name__}()"
