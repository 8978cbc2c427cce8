"""G0 intensity speckle model and two-region phantoms.

Returns are simulated as ``Z = X * Y`` with backscatter ``X = 1/W``,
``W ~ Gamma(shape=-alpha, rate=gamma)`` and unit-mean speckle
``Y ~ Gamma(shape=L, rate=L)``.

Reproducibility: every stream is a :class:`numpy.random.Philox` generator
keyed by ``SeedSequence([seed, *stream])``; Gamma variates come from the
Marsaglia-Tsang squeeze method implemented here (with the
``U**(1/a)`` boost for shapes below one), drawing its normals with
``Generator.standard_normal`` and its uniforms with ``Generator.random``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DomainError
from .image import QuantizedImage

DEFAULT_CLIP_QUANTILE = 0.995


@dataclass(frozen=True)
class G0Params:
    alpha: float
    gamma: float
    looks: float = 1.0

    def __post_init__(self):
        if not self.alpha < 0:
            raise DomainError(f"roughness alpha must be negative, got {self.alpha}")
        if not self.gamma > 0:
            raise DomainError(f"scale gamma must be positive, got {self.gamma}")
        if not self.looks >= 1:
            raise DomainError(f"number of looks must be >= 1, got {self.looks}")

    @classmethod
    def unit_mean(cls, alpha: float, looks: float = 1.0) -> "G0Params":
        return cls(alpha, gamma_star(alpha, looks), looks)

    @property
    def mean(self) -> float:
        if self.alpha >= -1:
            return math.inf
        return self.gamma / (-self.alpha - 1)


def g0_pdf(z, p: G0Params):
    """Density of the G0 intensity law; ``z`` may be an array."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("G0 density is defined for z > 0 only")
    a, g, L = p.alpha, p.gamma, p.looks
    log_c = L * math.log(L) + gammaln(L - a) - a * math.log(g) - gammaln(L) - gammaln(-a)
    out = np.exp(log_c + (L - 1) * np.log(z) - (L - a) * np.log(g + L * z))
    return out if out.ndim else float(out)


def gamma_star(alpha: float, looks: float = 1.0) -> float:
    """Scale giving the G0 law unit mean; independent of the number of looks."""
    if not alpha < -1:
        raise DomainError(f"the G0 mean is finite only for alpha < -1, got {alpha}")
    return -alpha - 1.0


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent reproducible stream keyed by ``(seed, *stream)``."""
    key = [int(seed), *(int(s) for s in stream)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def standard_gamma(shape: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Gamma(shape, 1) variates by Marsaglia-Tsang rejection."""
    if not shape > 0:
        raise DomainError(f"gamma shape must be positive, got {shape}")
    boost = shape < 1
    a = shape + 1.0 if boost else float(shape)
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size, dtype=float)
    filled = 0
    while filled < size:
        need = size - filled
        x = rng.standard_normal(need)
        u = rng.random(need)
        v = (1.0 + c * x) ** 3
        ok = v > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            accept = ok & (np.log(u) < 0.5 * x * x + d - d * v + d * np.log(np.where(ok, v, 1.0)))
        got = d * v[accept]
        out[filled:filled + got.size] = got
        filled += got.size
    if boost:
        out *= rng.random(size) ** (1.0 / shape)
    return out


def sample_g0(p: G0Params, size, rng: np.random.Generator) -> np.ndarray:
    """Draw G0 intensities of the given shape."""
    n = int(np.prod(size))
    backscatter = p.gamma / standard_gamma(-p.alpha, n, rng)
    speckle = standard_gamma(p.looks, n, rng) / p.looks
    return (backscatter * speckle).reshape(size)


def clip_level(values, q: float = DEFAULT_CLIP_QUANTILE) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("cannot quantize an empty image")
    if not 0.9 < q <= 1:
        raise DomainError(f"clip quantile must lie in (0.9, 1], got {q}")
    return float(np.quantile(values, q))


def quantize_with(values, levels: int, top: float) -> QuantizedImage:
    """Map ``[0, top]`` linearly onto ``[0, levels]``, clip, round half up."""
    values = np.asarray(values, dtype=float)
    if top <= 0:
        return QuantizedImage(np.zeros(values.shape, np.int64), levels)
    scaled = np.floor(values * (levels / top) + 0.5)
    return QuantizedImage(np.clip(scaled, 0, levels).astype(np.int64), levels)


def quantize(values, levels: int = 255, q: float = DEFAULT_CLIP_QUANTILE) -> QuantizedImage:
    """Quantize a real image, clipping everything above its ``q``-quantile."""
    return quantize_with(values, levels, clip_level(values, q))


@dataclass(frozen=True)
class PhantomSpec:
    """Two G0 regions separated by a vertical border.

    ``contrast`` is the ratio of the two regions' theoretical means
    (left : right) before quantization; ``None`` keeps the laws as given.
    """

    width: int = 128
    height: int = 128
    left: G0Params = field(default_factory=lambda: G0Params.unit_mean(-1.5))
    right: G0Params = field(default_factory=lambda: G0Params.unit_mean(-10.0))
    border: int | None = None
    contrast: tuple[float, float] | None = None
    seed: int = 0
    stream: tuple[int, ...] = ()
    levels: int = 255
    clip_quantile: float = DEFAULT_CLIP_QUANTILE

    def __post_init__(self):
        if self.width < 2 or self.height < 1:
            raise DomainError(f"phantom too small: {self.width}x{self.height}")
        border = self.width // 2 if self.border is None else int(self.border)
        if not 0 < border < self.width:
            raise DomainError(f"border column {border} not strictly inside width {self.width}")
        object.__setattr__(self, "border", border)
        object.__setattr__(self, "stream", tuple(int(s) for s in self.stream))
        if self.contrast is not None:
            a, b = (float(v) for v in self.contrast)
            if a <= 0 or b <= 0:
                raise DomainError(f"contrast terms must be positive, got {self.contrast}")
            object.__setattr__(self, "contrast", (a, b))

    def region_means(self) -> tuple[float, float]:
        """Theoretical mean intensity of the left and right regions."""
        if self.contrast is None:
            return self.left.mean, self.right.mean
        return self.contrast

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "PhantomSpec":
        data = dict(data)
        for side in ("left", "right"):
            if side in data and isinstance(data[side], dict):
                d = dict(data[side])
                if "gamma" not in d or d["gamma"] is None:
                    d["gamma"] = gamma_star(d["alpha"], d.get("looks", 1.0))
                data[side] = G0Params(**d)
        if data.get("contrast") is not None:
            c = data["contrast"]
            if isinstance(c, str):
                c = [float(v) for v in c.split(":")]
            data["contrast"] = tuple(c)
        return cls(**data)


@dataclass(frozen=True, eq=False)
class Phantom:
    image: QuantizedImage
    labels: np.ndarray
    reference: QuantizedImage
    intensity: np.ndarray
    scale_top: float


def generate_phantom(spec: PhantomSpec) -> Phantom:
    """Sample a two-region phantom.

    Returns the quantized noisy image, the label map (0 left, 1 right), the
    noiseless reference (region means quantized with the same map) and the
    real-valued intensities.
    """
    rng = make_rng(spec.seed, *spec.stream)
    h, w, b = spec.height, spec.width, spec.border
    means = spec.region_means()
    field_ = np.empty((h, w), dtype=float)
    for (lo, hi), law, target in (((0, b), spec.left, means[0]), ((b, w), spec.right, means[1])):
        z = sample_g0(law, (h, hi - lo), rng)
        if spec.contrast is not None:
            if not math.isfinite(law.mean):
                raise DomainError("contrast scaling needs alpha < -1 on both sides")
            z *= target / law.mean
        field_[:, lo:hi] = z
    labels = np.zeros((h, w), dtype=np.int64)
    labels[:, b:] = 1
    top = clip_level(field_, spec.clip_quantile)
    truth = np.where(labels == 0, means[0], means[1])
    return Phantom(
        image=quantize_with(field_, spec.levels, top),
        labels=labels,
        reference=quantize_with(truth, spec.levels, top),
        intensity=field_,
        scale_top=top,
    )
