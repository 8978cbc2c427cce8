"""Seeded Monte Carlo studies: quality indexes and classification accuracy.

Both studies are deterministic functions of their config. Replication
``r`` of contrast ``c`` draws from the stream ``(seed, c, r)``, so results
do not depend on execution order or on the number of worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gmlc
from .classic import FrostParams, LeeParams, frost, lee
from .errors import DomainError
from .image import QuantizedImage, RegionOfInterest, Window, labels_to_image, write_pgm
from .quality import beta_index, q_index
from .speckle import G0Params, PhantomSpec, generate_phantom
from .stackfilter import Statistic, apply, train

QUALITY_HEADER = ["replication", "contrast", "filter", "Q", "beta"]
AGGREGATE_HEADER = ["contrast", "filter", "n", "beta_mean", "beta_std", "Q_mean", "Q_std"]
CLASSIF_HEADER = ["filter", "iterations", "class", "correct", "total", "percent"]


def _parse_contrast(c) -> tuple[float, float]:
    if isinstance(c, str):
        parts = c.split(":")
        if len(parts) != 2:
            raise DomainError(f"contrast {c!r} is not of the form 'a:b'")
        c = parts
    a, b = (float(v) for v in c)
    if a <= 0 or b <= 0:
        raise DomainError(f"contrast terms must be positive: {c}")
    return a, b


def contrast_label(c: tuple[float, float]) -> str:
    return ":".join(f"{v:g}" for v in c)


def _rects(items) -> RegionOfInterest:
    return RegionOfInterest.from_json(list(items))


def _from_dict(cls, data: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise DomainError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def _fmt(v: float) -> str:
    return repr(float(v))


@dataclass
class QualityMcConfig:
    """Contrast sweep comparing the stack filter and Lee on Q and beta.

    The desk defaults (200 replications of 64x64) differ from the
    1000-replication protocol only in scale.
    """

    replications: int = 200
    size: int = 64
    looks: float = 1.0
    alpha_left: float = -10.0
    alpha_right: float = -10.0
    contrasts: list = field(default_factory=lambda: [(10, 1), (10, 2), (10, 4), (10, 8)])
    filters: list = field(default_factory=lambda: ["stack", "lee"])
    window: str = "3x3"
    stat: str = "mean"
    rois: list | None = None
    lee_window: str = "3x3"
    frost_damping: float = 2.0
    q_window: int = 8
    levels: int = 255
    clip_quantile: float = 0.995
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.replications < 2:
            raise DomainError(f"need at least 2 replications, got {self.replications}")
        if not self.contrasts:
            raise DomainError("contrast list is empty")
        self.contrasts = [_parse_contrast(c) for c in self.contrasts]
        unknown = set(self.filters) - {"stack", "lee", "frost"}
        if unknown or not self.filters:
            raise DomainError(f"bad filter roster {self.filters}")
        Window.parse(self.window)
        Window.parse(self.lee_window)
        Statistic.parse(self.stat)

    def training_roi(self) -> RegionOfInterest:
        """Two squares per region, clear of the border and of each other."""
        if self.rois is not None:
            return _rects(self.rois)
        s = self.size
        q, w = s // 8, s // 4
        return RegionOfInterest(((q, q, w, w), (q, 5 * q, w, w),
                                 (5 * q, q, w, w), (5 * q, 5 * q, w, w)))

    def phantom_spec(self, ci: int, rep: int) -> PhantomSpec:
        return PhantomSpec(
            width=self.size, height=self.size,
            left=G0Params.unit_mean(self.alpha_left, self.looks),
            right=G0Params.unit_mean(self.alpha_right, self.looks),
            contrast=self.contrasts[ci], seed=self.seed, stream=(ci, rep),
            levels=self.levels, clip_quantile=self.clip_quantile,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "QualityMcConfig":
        return _from_dict(cls, data)

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["contrasts"] = [contrast_label(c) for c in self.contrasts]
        return json.dumps(d, indent=2)


@dataclass(frozen=True)
class QualityRow:
    replication: int
    contrast: str
    filter: str
    q: float
    beta: float


def _filtered(cfg, name: str, img: QuantizedImage, roi: RegionOfInterest) -> QuantizedImage:
    if name == "stack":
        f = train(img, roi, cfg.stat, Window.parse(cfg.window))
        return apply(img, f)
    if name == "lee":
        return lee(img, LeeParams(Window.parse(cfg.lee_window), cfg.looks))
    return frost(img, FrostParams(Window.parse(cfg.lee_window), cfg.frost_damping))


def _quality_replication(args) -> list[QualityRow]:
    cfg, ci, rep = args
    ph = generate_phantom(cfg.phantom_spec(ci, rep))
    roi = cfg.training_roi()
    label = contrast_label(cfg.contrasts[ci])
    rows = []
    for name in cfg.filters:
        out = _filtered(cfg, name, ph.image, roi)
        rows.append(QualityRow(rep, label, name, q_index(ph.reference, out, cfg.q_window),
                               beta_index(ph.reference, out)))
    return rows


@dataclass
class QualityMcResult:
    rows: list

    def aggregate(self) -> list[dict]:
        groups: dict[tuple[str, str], list[QualityRow]] = {}
        for r in self.rows:
            groups.setdefault((r.contrast, r.filter), []).append(r)
        out = []
        for (contrast, name), rs in groups.items():
            qs = [r.q for r in rs]
            bs = [r.beta for r in rs]
            out.append({
                "contrast": contrast, "filter": name, "n": len(rs),
                "beta_mean": statistics.fmean(bs), "beta_std": statistics.stdev(bs),
                "Q_mean": statistics.fmean(qs), "Q_std": statistics.stdev(qs),
            })
        return out

    def summary(self, contrast: str, name: str) -> dict:
        for a in self.aggregate():
            if a["contrast"] == contrast and a["filter"] == name:
                return a
        raise KeyError((contrast, name))

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(QUALITY_HEADER)
        for r in self.rows:
            w.writerow([r.replication, r.contrast, r.filter, _fmt(r.q), _fmt(r.beta)])
        return buf.getvalue()

    def aggregate_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(AGGREGATE_HEADER)
        for a in self.aggregate():
            w.writerow([a["contrast"], a["filter"], a["n"]]
                       + [_fmt(a[k]) for k in AGGREGATE_HEADER[3:]])
        return buf.getvalue()


def read_quality_rows(text: str) -> QualityMcResult:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != QUALITY_HEADER:
        raise DomainError(f"unexpected quality CSV header {reader.fieldnames}")
    return QualityMcResult([QualityRow(int(r["replication"]), r["contrast"], r["filter"],
                                       float(r["Q"]), float(r["beta"])) for r in reader])


def run_quality_mc(cfg: QualityMcConfig) -> QualityMcResult:
    tasks = [(cfg, ci, rep) for ci in range(len(cfg.contrasts)) for rep in range(cfg.replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(_quality_replication, tasks, chunksize=16))
    else:
        chunks = [_quality_replication(t) for t in tasks]
    return QualityMcResult([row for chunk in chunks for row in chunk])


def dump_quality_exemplar(cfg: QualityMcConfig, out_dir: str | os.PathLike) -> list[Path]:
    """PGMs of replication 0 for every contrast: noisy, reference, filtered."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for ci, c in enumerate(cfg.contrasts):
        ph = generate_phantom(cfg.phantom_spec(ci, 0))
        tag = contrast_label(c).replace(":", "-")
        images = {"noisy": ph.image, "reference": ph.reference}
        for name in cfg.filters:
            images[name] = _filtered(cfg, name, ph.image, cfg.training_roi())
        for name, img in images.items():
            path = out_dir / f"exemplar_{tag}_{name}.pgm"
            write_pgm(img, path)
            written.append(path)
    return written


# --- classification ------------------------------------------------------------

@dataclass
class ClassifExpConfig:
    """Two-region phantom classified by GMLC after each filter.

    ``train_rois[c]`` lists the rectangles of class ``c`` used both to train
    the stack filter and to fit the classifier. Accuracy is measured on
    ``eval_rois`` or, by default, on every pixel outside the training
    rectangles.
    """

    size: int = 128
    alpha_left: float = -1.5
    alpha_right: float = -10.0
    looks: float = 1.0
    levels: int = 255
    clip_quantile: float = 0.995
    iterations: list = field(default_factory=lambda: [1, 22, 95])
    baselines: list = field(default_factory=lambda: ["frost", "lee"])
    window: str = "3x3"
    stat: str = "mean"
    train_rois: list | None = None
    eval_rois: list | None = None
    lee_window: str = "3x3"
    frost_damping: float = 2.0
    retrain_each_iteration: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.iterations or any(int(k) < 1 for k in self.iterations):
            raise DomainError(f"iteration counts must be >= 1, got {self.iterations}")
        self.iterations = sorted({int(k) for k in self.iterations})
        if set(self.baselines) - {"frost", "lee"}:
            raise DomainError(f"bad baseline roster {self.baselines}")
        Window.parse(self.window)
        Statistic.parse(self.stat)

    def class_rois(self) -> list[RegionOfInterest]:
        if self.train_rois is not None:
            return [_rects(rs) for rs in self.train_rois]
        s = self.size
        a, w, b = s // 16, 5 * s // 16, 10 * s // 16
        return [RegionOfInterest(((a, a, w, w), (a, b, w, w))),
                RegionOfInterest(((b, a, w, w), (b, b, w, w)))]

    def eval_mask(self) -> np.ndarray:
        shape = (self.size, self.size)
        if self.eval_rois is not None:
            mask = np.zeros(shape, dtype=bool)
            for rs in self.eval_rois:
                mask |= _rects(rs).mask(shape)
        else:
            mask = np.ones(shape, dtype=bool)
            for roi in self.class_rois():
                mask &= ~roi.mask(shape)
        for roi in self.class_rois():
            if np.any(mask & roi.mask(shape)):
                raise DomainError("evaluation pixels overlap the training rectangles")
        return mask

    def phantom_spec(self) -> PhantomSpec:
        return PhantomSpec(
            width=self.size, height=self.size,
            left=G0Params.unit_mean(self.alpha_left, self.looks),
            right=G0Params.unit_mean(self.alpha_right, self.looks),
            seed=self.seed, levels=self.levels, clip_quantile=self.clip_quantile,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifExpConfig":
        return _from_dict(cls, data)


@dataclass
class ClassifResult:
    rows: list
    label_maps: dict
    truth: np.ndarray
    border: int

    def percent(self, name: str, iterations: int = 0) -> np.ndarray:
        vals = [r["percent"] for r in self.rows
                if r["filter"] == name and r["iterations"] == iterations]
        if not vals:
            raise KeyError((name, iterations))
        return np.array(vals)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CLASSIF_HEADER)
        for r in self.rows:
            w.writerow([r["filter"], r["iterations"], r["class"], r["correct"], r["total"],
                        f"{r['percent']:.4f}"])
        return buf.getvalue()


def border_offset(labels: np.ndarray, border: int) -> float:
    """Mean over rows of the distance between the best step split of the
    label row (0 left, 1 right) and the true border column."""
    labels = np.asarray(labels)
    h, w = labels.shape
    ones_left = np.concatenate([np.zeros((h, 1), np.int64), np.cumsum(labels == 1, axis=1)], axis=1)
    zeros_right = np.concatenate(
        [np.cumsum((labels == 0)[:, ::-1], axis=1)[:, ::-1], np.zeros((h, 1), np.int64)], axis=1)
    split = np.argmin(ones_left + zeros_right, axis=1)
    return float(np.mean(np.abs(split - border)))


def stack_iterates(img: QuantizedImage, roi: RegionOfInterest, stat, window: Window,
                   k: int, retrain: bool = False):
    """Yield ``(i, image)`` for ``i = 1..k``; optionally retrain before each pass."""
    f = train(img, roi, stat, window)
    for i in range(1, k + 1):
        if retrain and i > 1:
            f = train(img, roi, stat, window)
        img = apply(img, f)
        yield i, img


def run_classification_exp(cfg: ClassifExpConfig) -> ClassifResult:
    spec = cfg.phantom_spec()
    ph = generate_phantom(spec)
    class_rois = cfg.class_rois()
    roi = RegionOfInterest(tuple(r for c in class_rois for r in c))
    mask = cfg.eval_mask()
    n_classes = len(class_rois)

    images: list[tuple[str, int, QuantizedImage]] = [("none", 0, ph.image)]
    for name in cfg.baselines:
        if name == "lee":
            images.append(("lee", 1, lee(ph.image, LeeParams(Window.parse(cfg.lee_window), cfg.looks))))
        else:
            images.append(("frost", 1, frost(ph.image, FrostParams(Window.parse(cfg.lee_window),
                                                                     cfg.frost_damping))))
    wanted = set(cfg.iterations)
    for i, img in stack_iterates(ph.image, roi, cfg.stat, Window.parse(cfg.window),
                                 max(wanted), cfg.retrain_each_iteration):
        if i in wanted:
            images.append(("stack", i, img))

    rows, maps = [], {}
    for name, k, img in images:
        model = gmlc.fit(img, class_rois)
        labels = gmlc.classify(img, model)
        maps[(name, k)] = labels
        cm = gmlc.confusion(labels, ph.labels, mask, n_classes)
        pct = cm.recall_percent()
        for c in range(n_classes):
            rows.append({"filter": name, "iterations": k, "class": c,
                         "correct": int(cm.counts[c, c]), "total": int(cm.counts[c].sum()),
                         "percent": float(pct[c])})
    return ClassifResult(rows, maps, ph.labels, spec.border)


def dump_classification_maps(result: ClassifResult, out_dir: str | os.PathLike) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (name, k), labels in result.label_maps.items():
        path = out_dir / f"labels_{name}_{k}.pgm"
        write_pgm(labels_to_image(labels), path)
        written.append(path)
    return written


def load_config(cls, path_or_data):
    if isinstance(path_or_data, dict):
        return cls.from_dict(path_or_data)
    with open(path_or_data) as fh:
        return cls.from_dict(json.load(fh))
