"""Universal image quality index Q and Laplacian correlation index beta."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .image import QuantizedImage


@dataclass(frozen=True)
class QualityReport:
    q: float
    beta: float
    q_windows: int
    q_skipped: int


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, QuantizedImage) else np.asarray(img)


def _window_sums(a: np.ndarray, win: int) -> np.ndarray:
    """Sum over every ``win x win`` window (valid positions), exact for ints."""
    c = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=a.dtype)
    c[1:, 1:] = a.cumsum(0).cumsum(1)
    return c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]


def q_map(x, y, win: int = 8) -> np.ndarray:
    """Local Q of every sliding window; NaN where a factor's denominator is 0."""
    x = _pixels(x).astype(np.int64)
    y = _pixels(y).astype(np.int64)
    if x.shape != y.shape:
        raise DomainError(f"image shapes differ: {x.shape} vs {y.shape}")
    if win < 2 or x.shape[0] < win or x.shape[1] < win:
        raise DomainError(f"image {x.shape} smaller than the {win}x{win} window")
    n = win * win
    sx, sy = _window_sums(x, win), _window_sums(y, win)
    sxx, syy, sxy = _window_sums(x * x, win), _window_sums(y * y, win), _window_sums(x * y, win)
    # n^2 times the (co)variances; the normalisation cancels in Q
    vx = n * sxx - sx * sx
    vy = n * syy - sy * sy
    cxy = n * sxy - sx * sy
    ok = (vx > 0) & (vy > 0) & ((sx > 0) | (sy > 0))
    q = np.full(sx.shape, np.nan)
    num = 4.0 * cxy[ok].astype(float) * sx[ok].astype(float) * sy[ok].astype(float)
    den = (vx[ok] + vy[ok]).astype(float) * (sx[ok].astype(float) ** 2 + sy[ok].astype(float) ** 2)
    q[ok] = np.clip(num / den, -1.0, 1.0)
    return q


def q_index_report(x, y, win: int = 8) -> tuple[float, int, int]:
    qs = q_map(x, y, win)
    valid = qs[~np.isnan(qs)]
    if valid.size == 0:
        raise DomainError("no window has a defined Q index")
    return float(np.clip(valid.mean(), -1.0, 1.0)), int(valid.size), int(qs.size - valid.size)


def q_index(x, y, win: int = 8) -> float:
    """Universal quality index averaged over all ``win x win`` windows.

    Windows where either image is flat, or both means vanish, are skipped.
    """
    return q_index_report(x, y, win)[0]


def laplacian(img) -> np.ndarray:
    """4-neighbour Laplacian with replicated borders."""
    a = _pixels(img).astype(np.int64)
    if a.shape[0] < 3 or a.shape[1] < 3:
        raise DomainError(f"Laplacian needs at least 3x3 pixels, got {a.shape}")
    p = np.pad(a, 1, mode="edge")
    return p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4 * a


def beta_index(x, y) -> float:
    """Pearson correlation between the Laplacians of two images."""
    lx, ly = laplacian(x), laplacian(y)
    if lx.shape != ly.shape:
        raise DomainError(f"image shapes differ: {lx.shape} vs {ly.shape}")
    dx = lx - lx.mean()
    dy = ly - ly.mean()
    vx, vy = float((dx * dx).sum()), float((dy * dy).sum())
    if vx == 0 or vy == 0:
        raise DomainError("beta index undefined: a Laplacian has zero variance")
    return float(np.clip((dx * dy).sum() / np.sqrt(vx * vy), -1.0, 1.0))


def assess(x, y, win: int = 8) -> QualityReport:
    q, used, skipped = q_index_report(x, y, win)
    return QualityReport(q=q, beta=beta_index(x, y), q_windows=used, q_skipped=skipped)
