"""Lee and Frost despeckling filters used as baselines.

Window moments are population moments (divide by the window size) taken
from exact integer sums; borders are edge-replicated like the stack filter.
Outputs are rounded half up and clamped to ``{0, ..., M}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .image import QuantizedImage, Window, window_values


@dataclass(frozen=True)
class LeeParams:
    window: Window = Window(3, 3)
    looks: float = 1.0

    def __post_init__(self):
        if not self.looks >= 1:
            raise DomainError(f"looks must be >= 1, got {self.looks}")


@dataclass(frozen=True)
class FrostParams:
    window: Window = Window(3, 3)
    damping: float = 2.0

    def __post_init__(self):
        if not self.damping > 0:
            raise DomainError(f"damping must be positive, got {self.damping}")


def _local_stats(img: QuantizedImage, window: Window):
    vals = window_values(img.pixels, window).astype(np.int64)
    n = window.size
    s1 = vals.sum(axis=-1)
    s2 = (vals * vals).sum(axis=-1)
    mean = s1 / n
    var = (n * s2 - s1 * s1) / (n * n)  # numerator is an exact integer
    with np.errstate(divide="ignore", invalid="ignore"):
        cz2 = np.where(s1 > 0, var / (mean * mean), 0.0)
    return vals, mean, cz2


def _finish(values: np.ndarray, levels: int) -> QuantizedImage:
    out = np.clip(np.floor(values + 0.5), 0, levels)
    return QuantizedImage(out.astype(np.int64), levels)


def lee_gain(cz2: np.ndarray, looks: float) -> np.ndarray:
    """Lee weighting ``k = max(0, 1 - Cu^2 / Cz^2)`` with ``Cu^2 = 1/L``."""
    cu2 = 1.0 / looks
    with np.errstate(divide="ignore"):
        k = 1.0 - cu2 / cz2
    return np.where(cz2 > 0, np.maximum(k, 0.0), 0.0)


def lee(img: QuantizedImage, p: LeeParams = LeeParams()) -> QuantizedImage:
    """Local-statistics Lee filter: ``mean + k (z - mean)``."""
    _, mean, cz2 = _local_stats(img, p.window)
    k = lee_gain(cz2, p.looks)
    out = mean + k * (img.pixels - mean)
    out[mean == 0] = 0.0
    return _finish(out, img.levels)


def frost(img: QuantizedImage, p: FrostParams = FrostParams()) -> QuantizedImage:
    """Frost filter: weights ``exp(-D * Cz^2 * d)``, ``d`` the Euclidean
    distance of each window sample to the centre."""
    vals, mean, cz2 = _local_stats(img, p.window)
    dist = np.array([np.hypot(dr, dc) for dr, dc in p.window.offsets()])
    w = np.exp(-p.damping * cz2[..., None] * dist)
    out = (w * vals).sum(axis=-1) / w.sum(axis=-1)
    out[mean == 0] = 0.0
    return _finish(out, img.levels)
