"""Gaussian maximum-likelihood classification of single-band images."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .image import QuantizedImage, RegionOfInterest


class FitError(DomainError):
    pass


@dataclass(frozen=True, eq=False)
class ClassModel:
    means: np.ndarray
    variances: np.ndarray
    log_priors: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        variances = np.asarray(self.variances, dtype=float)
        priors = np.asarray(self.log_priors, dtype=float)
        if means.size < 2 or means.shape != variances.shape or priors.shape != means.shape:
            raise DomainError("a class model needs >= 2 classes with matching parameters")
        if np.any(variances <= 0):
            raise DomainError("class variances must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "log_priors", priors)

    @property
    def n_classes(self) -> int:
        return self.means.size

    def scores(self, z) -> np.ndarray:
        """Log-likelihood (plus log-prior) of each class, class axis last."""
        z = np.asarray(z, dtype=float)[..., None]
        return (self.log_priors - 0.5 * np.log(self.variances)
                - (z - self.means) ** 2 / (2.0 * self.variances))


def _values(img) -> np.ndarray:
    return img.pixels if isinstance(img, QuantizedImage) else np.asarray(img)


def fit(img, class_rois: Sequence) -> ClassModel:
    """Sample mean and unbiased variance of each class's training pixels.

    ``class_rois[c]`` is a :class:`RegionOfInterest` or boolean mask.
    """
    values = _values(img)
    if len(class_rois) < 2:
        raise DomainError("need at least two classes")
    means, variances = [], []
    for c, roi in enumerate(class_rois):
        mask = roi.mask(values.shape) if isinstance(roi, RegionOfInterest) else np.asarray(roi, bool)
        z = values[mask].astype(float)
        if z.size < 2:
            raise FitError(f"class {c}: training region has fewer than 2 pixels")
        var = z.var(ddof=1)
        if var <= 0:
            raise FitError(f"class {c}: training pixels are all identical")
        means.append(z.mean())
        variances.append(var)
    k = len(means)
    return ClassModel(np.array(means), np.array(variances), np.zeros(k))


def classify(img, model: ClassModel) -> np.ndarray:
    """Per-pixel most likely class; ties go to the lowest class index."""
    values = _values(img)
    if isinstance(img, QuantizedImage):
        lut = np.argmax(model.scores(np.arange(img.levels + 1)), axis=-1)
        return lut[values]
    return np.argmax(model.scores(values), axis=-1)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns assigned classes."""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    def recall_percent(self) -> np.ndarray:
        """Percentage of each true class that was classified correctly."""
        totals = self.counts.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(totals > 0, 100.0 * np.diag(self.counts) / totals, np.nan)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        k = self.n_classes
        w.writerow(["true\\assigned", *range(k), "total", "percent_correct"])
        for i, pct in enumerate(self.recall_percent()):
            w.writerow([i, *self.counts[i].tolist(), int(self.counts[i].sum()), f"{pct:.2f}"])
        return buf.getvalue()


def confusion(labels, truth, mask=None, n_classes: int | None = None) -> ConfusionMatrix:
    labels = np.asarray(labels, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if labels.shape != truth.shape:
        raise DomainError(f"label shapes differ: {labels.shape} vs {truth.shape}")
    if mask is None:
        mask = np.ones(labels.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != labels.shape:
        raise DomainError(f"mask shape {mask.shape} differs from {labels.shape}")
    if not mask.any():
        raise DomainError("confusion mask is empty")
    t, a = truth[mask], labels[mask]
    k = n_classes or int(max(t.max(), a.max())) + 1
    counts = np.bincount(t * k + a, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts)
