"""Stack filters defined by positive (monotone) Boolean functions.

A filter is stored as its truth table over window patterns (see
:mod:`sarstack.image` for the pattern bit order). Training fits the
truth table to (noisy, desired) pairs by exact minimisation of the
threshold-decomposed absolute error, solved as a minimum-weight closure
on the Boolean lattice with a max-flow/min-cut.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from .errors import ContractViolation, DomainError, FormatError
from .image import (
    QuantizedImage,
    RegionOfInterest,
    Window,
    pattern_weights,
    window_values,
)

FILTER_MAGIC = "STACKF 1"
_INT32_MAX = np.iinfo(np.int32).max


def is_monotone(tt) -> bool:
    """True iff raising any single input bit never lowers the output."""
    tt = np.asarray(tt).astype(bool).ravel()
    size = tt.size
    if size == 0 or size & (size - 1):
        raise DomainError(f"truth table length {size} is not a power of two")
    n = size.bit_length() - 1
    for j in range(n):
        pairs = tt.reshape(-1, 2, 1 << j)
        if np.any(pairs[:, 0, :] & ~pairs[:, 1, :]):
            return False
    return True


@dataclass(frozen=True, eq=False)
class PositiveBooleanFunction:
    """Monotone Boolean function over the samples of a window."""

    window: Window
    table: np.ndarray

    def __post_init__(self):
        tt = np.asarray(self.table).astype(bool).ravel()
        if tt.size != 1 << self.window.size:
            raise DomainError(
                f"truth table has {tt.size} entries, window {self.window} needs {1 << self.window.size}"
            )
        if not is_monotone(tt):
            raise ContractViolation("truth table is not monotone (stacking property violated)")
        tt = tt.copy()
        tt.setflags(write=False)
        object.__setattr__(self, "table", tt)

    @property
    def n(self) -> int:
        return self.window.size

    def __call__(self, pattern):
        return self.table[pattern]

    def __eq__(self, other):
        if not isinstance(other, PositiveBooleanFunction):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.table, other.table)

    __hash__ = None

    @classmethod
    def majority(cls, window: Window = Window()) -> "PositiveBooleanFunction":
        """Majority vote; its stack filter is the window median."""
        n = window.size
        counts = np.zeros(1 << n, dtype=np.int64)
        p = np.arange(1 << n, dtype=np.int64)
        for j in range(n):
            counts += (p >> j) & 1
        return cls(window, counts > n // 2)

    @classmethod
    def projection(cls, window: Window = Window(), index: int | None = None) -> "PositiveBooleanFunction":
        """Output one window sample; the centre sample gives the identity filter."""
        if index is None:
            index = window.center_index
        p = np.arange(1 << window.size, dtype=np.int64)
        return cls(window, ((p >> index) & 1).astype(bool))

    @classmethod
    def from_dnf(cls, window: Window, terms: Sequence[int]) -> "PositiveBooleanFunction":
        return cls(window, dnf_table(terms, window.size))


def dnf_table(terms: Sequence[int], n: int) -> np.ndarray:
    """Evaluate an OR of AND-terms (each term a pattern index) on all inputs."""
    p = np.arange(1 << n, dtype=np.int64)
    tt = np.zeros(1 << n, dtype=bool)
    for t in terms:
        tt |= (p & t) == t
    return tt


def to_dnf(f: PositiveBooleanFunction) -> list[int]:
    """Minimal true patterns of ``f``, ascending; they form its positive DNF."""
    tt = f.table
    p = np.arange(tt.size, dtype=np.int64)
    minimal = tt.copy()
    for j in range(f.n):
        has = ((p >> j) & 1).astype(bool)
        below = tt[p[has] ^ (1 << j)]
        minimal[p[has]] &= ~below
    return [int(v) for v in np.flatnonzero(minimal)]


# --- application ---------------------------------------------------------------

def _flat_values(img: QuantizedImage, window: Window) -> np.ndarray:
    return window_values(img.pixels, window).reshape(-1, window.size)


def apply(img: QuantizedImage, f: PositiveBooleanFunction) -> QuantizedImage:
    """Stack filter output ``sum_m f(T^m X)``.

    By the stacking property ``f(T^m X)`` is non-increasing in ``m``, so the
    output level is found per pixel by binary search over ``0..M``.
    """
    vals = _flat_values(img, f.window)
    weights = pattern_weights(f.n)
    lo = np.zeros(vals.shape[0], dtype=np.int64)
    hi = np.full(vals.shape[0], img.levels, dtype=np.int64)
    active = lo < hi
    while active.any():
        idx = np.flatnonzero(active)
        mid = (lo[idx] + hi[idx] + 1) // 2
        patterns = (vals[idx] >= mid[:, None]).astype(np.int64) @ weights
        on = f.table[patterns]
        lo[idx] = np.where(on, mid, lo[idx])
        hi[idx] = np.where(on, hi[idx], mid - 1)
        active = lo < hi
    return QuantizedImage(lo.reshape(img.shape), img.levels)


def apply_naive(img: QuantizedImage, f: PositiveBooleanFunction) -> QuantizedImage:
    """Literal threshold-sum evaluation, one Boolean evaluation per level."""
    vals = _flat_values(img, f.window)
    weights = pattern_weights(f.n)
    out = np.zeros(vals.shape[0], dtype=np.int64)
    for m in range(1, img.levels + 1):
        out += f.table[(vals >= m).astype(np.int64) @ weights]
    return QuantizedImage(out.reshape(img.shape), img.levels)


def iter_apply(img: QuantizedImage, f: PositiveBooleanFunction, k: int) -> Iterator[QuantizedImage]:
    """Yield each of the ``k`` successive filter applications."""
    if k < 1:
        raise DomainError(f"iteration count must be >= 1, got {k}")
    for _ in range(k):
        img = apply(img, f)
        yield img


def iterate(img: QuantizedImage, f: PositiveBooleanFunction, k: int) -> QuantizedImage:
    out = img
    for out in iter_apply(img, f, k):
        pass
    return out


# --- training ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrainingCosts:
    """Per-pattern error counts.

    ``c1[p]`` counts (pixel, threshold) events with observed pattern ``p``
    and desired bit 1, i.e. the cost of setting ``f(p) = 0``; ``c0[p]`` is
    the same for desired bit 0.
    """

    window: Window
    c0: np.ndarray
    c1: np.ndarray

    def __post_init__(self):
        size = 1 << self.window.size
        for name in ("c0", "c1"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.shape != (size,):
                raise DomainError(f"{name} must have {size} entries, got shape {arr.shape}")
            if np.any(arr < 0):
                raise DomainError(f"{name} has negative entries")
            object.__setattr__(self, name, arr)

    def cost(self, table) -> int:
        """Total training error of a truth table."""
        tt = np.asarray(table).astype(bool)
        return int(self.c0[tt].sum() + self.c1[~tt].sum())

    def total(self) -> int:
        return int(self.c0.sum() + self.c1.sum())

    def __add__(self, other: "TrainingCosts") -> "TrainingCosts":
        if self.window != other.window:
            raise DomainError("cannot merge costs of different windows")
        return TrainingCosts(self.window, self.c0 + other.c0, self.c1 + other.c1)


def _as_mask(roi, shape) -> np.ndarray:
    if isinstance(roi, RegionOfInterest):
        return roi.mask(shape)
    mask = np.asarray(roi, dtype=bool)
    if mask.shape != tuple(shape):
        raise DomainError(f"ROI mask shape {mask.shape} differs from image shape {shape}")
    if not mask.any():
        raise DomainError("region of interest is empty")
    return mask


def accumulate_costs(noisy: QuantizedImage, desired: QuantizedImage, roi,
                     window: Window = Window()) -> TrainingCosts:
    """Count, over ROI pixels and thresholds ``1..M``, each observed pattern
    together with the desired bit.

    Between consecutive sorted window samples the thresholded pattern is
    constant, so each pixel contributes at most ``n + 1`` runs of
    thresholds instead of ``M`` single events.
    """
    if noisy.shape != desired.shape:
        raise DomainError(f"image shapes differ: {noisy.shape} vs {desired.shape}")
    if noisy.levels != desired.levels:
        raise DomainError(f"levels differ: {noisy.levels} vs {desired.levels}")
    mask = _as_mask(roi, noisy.shape)
    n, levels = window.size, noisy.levels
    vals = window_values(noisy.pixels, window)[mask].astype(np.int64)
    d = desired.pixels[mask].astype(np.int64)[:, None]

    s = np.sort(vals, axis=1)
    lower = np.concatenate([np.zeros((len(s), 1), np.int64), s], axis=1)
    upper = np.concatenate([s, np.full((len(s), 1), levels, np.int64)], axis=1)
    # run k covers thresholds (lower_k, upper_k]; its pattern is {j : vals_j >= upper_k}
    weights = pattern_weights(n)
    patterns = (vals[:, None, :] >= s[:, :, None]).astype(np.int64) @ weights
    patterns = np.concatenate([patterns, np.zeros((len(s), 1), np.int64)], axis=1)
    ones = np.clip(np.minimum(upper, d) - lower, 0, None)
    zeros = (upper - lower) - ones

    size = 1 << n
    c1 = np.bincount(patterns.ravel(), weights=ones.ravel(), minlength=size)
    c0 = np.bincount(patterns.ravel(), weights=zeros.ravel(), minlength=size)
    return TrainingCosts(window, np.rint(c0).astype(np.int64), np.rint(c1).astype(np.int64))


def _hasse_edges(n: int) -> tuple[np.ndarray, np.ndarray]:
    p = np.arange(1 << n, dtype=np.int64)
    tails, heads = [], []
    for j in range(n):
        lower = p[((p >> j) & 1) == 0]
        tails.append(lower)
        heads.append(lower | (1 << j))
    return np.concatenate(tails), np.concatenate(heads)


def _closure_scipy(gain: np.ndarray, n: int, inf: int) -> np.ndarray:
    size = gain.size
    src, snk = size, size + 1
    tails, heads = _hasse_edges(n)
    pos = np.flatnonzero(gain > 0)
    neg = np.flatnonzero(gain < 0)
    rows = np.concatenate([tails, np.full(pos.size, src), neg])
    cols = np.concatenate([heads, pos, np.full(neg.size, snk)])
    caps = np.concatenate([np.full(tails.size, inf), gain[pos], -gain[neg]]).astype(np.int32)
    graph = csr_matrix((caps, (rows, cols)), shape=(size + 2, size + 2))
    flow = maximum_flow(graph, src, snk, method="dinic").flow
    residual = (graph - flow).tocsr()
    residual.data = (residual.data > 0).astype(np.int8)
    residual.eliminate_zeros()
    reached = breadth_first_order(residual, src, directed=True, return_predecessors=False)
    selected = np.zeros(size, dtype=bool)
    selected[reached[reached < size]] = True
    return selected


def _residual_reachable(nx, g, source):
    res = nx.algorithms.flow.preflow_push(g, source, "t")
    seen, stack = {source}, [source]
    while stack:
        u = stack.pop()
        for v, attr in res[u].items():
            if v not in seen and attr["capacity"] - attr["flow"] > 0:
                seen.add(v)
                stack.append(v)
    return seen


def _closure_networkx(gain: np.ndarray, n: int) -> np.ndarray:
    import networkx as nx

    size = gain.size
    g = nx.DiGraph()
    g.add_nodes_from(range(size))
    tails, heads = _hasse_edges(n)
    g.add_edges_from(zip(tails.tolist(), heads.tolist()))  # no capacity => infinite
    for p in np.flatnonzero(gain > 0).tolist():
        g.add_edge("s", p, capacity=int(gain[p]))
    for p in np.flatnonzero(gain < 0).tolist():
        g.add_edge(p, "t", capacity=int(-gain[p]))
    g.add_node("s")
    g.add_node("t")
    # nx.minimum_cut returns the source side of *some* minimum cut; the
    # minimal one is what is reachable in the residual network
    reachable = _residual_reachable(nx, g, "s")
    selected = np.zeros(size, dtype=bool)
    selected[[v for v in reachable if v != "s"]] = True
    return selected


def max_weight_closure(gain: np.ndarray, n: int, backend: str = "auto") -> np.ndarray:
    """Smallest up-set of ``{0,1}^n`` maximising the summed ``gain``.

    Project-selection reduction: a pattern in the set forces all its
    single-bit supersets in. The source side reachable in the residual graph
    of a maximum flow is the unique minimal optimal closure.
    """
    gain = np.asarray(gain, dtype=np.int64)
    inf = int(gain[gain > 0].sum()) + 1
    if backend == "auto":
        backend = "scipy" if max(inf, int(-gain[gain < 0].sum())) <= _INT32_MAX else "networkx"
    if backend == "scipy":
        if inf > _INT32_MAX:
            raise DomainError("costs too large for the int32 max-flow backend")
        return _closure_scipy(gain, n, inf)
    if backend == "networkx":
        return _closure_networkx(gain, n)
    raise DomainError(f"unknown max-flow backend {backend!r}")


def fit_monotone(costs: TrainingCosts, backend: str = "auto") -> PositiveBooleanFunction:
    """Exact minimum-error positive Boolean function for the given costs.

    Among all optimal functions the pointwise-smallest is returned.
    """
    selected = max_weight_closure(costs.c1 - costs.c0, costs.window.size, backend)
    return PositiveBooleanFunction(costs.window, selected)


# --- desired images ------------------------------------------------------------

STAT_KINDS = ("mean", "median", "lower-quartile", "upper-quartile", "constant")
_QUANTILES = {
    "median": Fraction(1, 2),
    "lower-quartile": Fraction(1, 4),
    "upper-quartile": Fraction(3, 4),
}


@dataclass(frozen=True)
class Statistic:
    """Target value assigned to a training region."""

    kind: str = "mean"
    value: int | None = None

    def __post_init__(self):
        if self.kind not in STAT_KINDS:
            raise DomainError(f"unknown statistic {self.kind!r}; choose from {STAT_KINDS}")
        if self.kind == "constant" and (self.value is None or self.value < 0):
            raise DomainError("constant statistic needs a non-negative value")

    @classmethod
    def parse(cls, text) -> "Statistic":
        """``mean``, ``median``, ``lower-quartile``, ``upper-quartile``,
        ``constant:<v>`` or a bare integer."""
        if isinstance(text, Statistic):
            return text
        if isinstance(text, int):
            return cls("constant", text)
        text = str(text).strip().lower().replace("_", "-")
        if text.startswith("constant:"):
            return cls("constant", int(text.split(":", 1)[1]))
        if text.lstrip("-").isdigit():
            return cls("constant", int(text))
        return cls(text)

    def __str__(self):
        return f"constant:{self.value}" if self.kind == "constant" else self.kind

    def evaluate(self, values: np.ndarray, levels: int) -> int:
        values = np.asarray(values, dtype=np.int64).ravel()
        if values.size == 0:
            raise DomainError("statistic of an empty region")
        if self.kind == "constant":
            if self.value > levels:
                raise DomainError(f"constant {self.value} exceeds levels {levels}")
            return int(self.value)
        count = values.size
        if self.kind == "mean":
            # round half up, exact in integers
            return int((2 * int(values.sum()) + count) // (2 * count))
        q = _QUANTILES[self.kind]
        # nearest rank to the interpolated position (count - 1) * q, ties upward
        idx = ((count - 1) * 2 * q.numerator + q.denominator) // (2 * q.denominator)
        return int(np.partition(values, idx)[idx])


def make_desired(noisy: QuantizedImage, roi: RegionOfInterest,
                 default: Statistic | str = "mean") -> QuantizedImage:
    """Piecewise-constant target: each ROI rectangle gets its statistic.

    A rectangle's own ``stat`` overrides ``default``. Pixels outside the ROI
    keep their noisy value and are not used in training.
    """
    default = Statistic.parse(default)
    roi.validate(noisy.shape)
    out = noisy.pixels.copy()
    for rect in roi:
        stat = Statistic.parse(rect.stat) if rect.stat else default
        sl = rect.slices()
        out[sl] = stat.evaluate(noisy.pixels[sl], noisy.levels)
    return QuantizedImage(out, noisy.levels)


def train(noisy: QuantizedImage, roi: RegionOfInterest, default: Statistic | str = "mean",
          window: Window = Window()) -> PositiveBooleanFunction:
    """Fit a stack filter mapping the ROI samples onto their target statistics."""
    desired = make_desired(noisy, roi, default)
    return fit_monotone(accumulate_costs(noisy, desired, roi, window))


# --- filter files --------------------------------------------------------------

def dumps_filter(f: PositiveBooleanFunction, levels: int = 255) -> str:
    packed = np.packbits(f.table.astype(np.uint8), bitorder="little")
    value = int.from_bytes(packed.tobytes(), "little")
    digits = max(1, f.table.size // 4)
    return (f"{FILTER_MAGIC}\nwindow {f.window.rows} {f.window.cols}\n"
            f"levels {levels}\n{value:0{digits}x}\n")


def loads_filter(text: str) -> tuple[PositiveBooleanFunction, int]:
    """Parse a filter file; returns the function and its recorded level count."""
    lines = text.strip().splitlines()
    if len(lines) != 4 or lines[0].strip() != FILTER_MAGIC:
        raise FormatError(f"not a {FILTER_MAGIC!r} filter file")
    head = lines[1].split()
    lev = lines[2].split()
    if len(head) != 3 or head[0] != "window" or len(lev) != 2 or lev[0] != "levels":
        raise FormatError("malformed filter header")
    try:
        window = Window(int(head[1]), int(head[2]))
        levels = int(lev[1])
        value = int(lines[3].strip(), 16)
    except ValueError as exc:
        raise FormatError(f"malformed filter file: {exc}") from None
    size = 1 << window.size
    if value >> size:
        raise FormatError("truth table has more bits than the window allows")
    raw = value.to_bytes(max(1, size // 8), "little")
    bits = np.unpackbits(np.frombuffer(raw, np.uint8), bitorder="little")[:size]
    return PositiveBooleanFunction(window, bits), levels


def write_filter(f: PositiveBooleanFunction, path: str | os.PathLike, levels: int = 255) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_filter(f, levels))


def read_filter(path: str | os.PathLike) -> tuple[PositiveBooleanFunction, int]:
    with open(path) as fh:
        return loads_filter(fh.read())
