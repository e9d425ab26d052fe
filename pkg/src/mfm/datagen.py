"""Ground-truth data generators, nested-subset series, count-data
preprocessing, and empirical hyperparameters.

All generators are univariate mixtures (Normal or Laplace components, plus
epsilon-contamination of one mixture by another) and are deterministic given
(spec, n, seed). Normal draws use the generator's standard_normal (ziggurat);
Laplace draws use the inverse CDF applied to one uniform per point, so a
generator is reproducible from the documented PCG64 stream alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Component",
    "MixtureSpec",
    "ContaminationSpec",
    "DatasetSeries",
    "sample_mixture",
    "contaminate",
    "nested_series",
    "log2_standardize",
    "empirical_hyperparams",
    "load_matrix",
    "save_matrix",
]

_FAMILIES = ("normal", "laplace")


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Component:
    """One univariate mixture component; scale is the SD (normal) or b (laplace)."""

    family: str
    loc: float
    scale: float

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}, expected {_FAMILIES}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.family == "normal":
            return self.loc + self.scale * rng.standard_normal(n)
        u = rng.random(n)
        q = u - 0.5
        return self.loc - self.scale * np.sign(q) * np.log1p(-2.0 * np.abs(q))

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        if self.family == "normal":
            return -0.5 * math.log(2.0 * math.pi) - math.log(self.scale) - 0.5 * z * z
        return -math.log(2.0 * self.scale) - np.abs(z)

    def cdf(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        if self.family == "normal":
            return np.array([0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in np.atleast_1d(z)])
        z = np.atleast_1d(z)
        return np.where(z < 0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-z))


@dataclass(frozen=True)
class MixtureSpec:
    """Finite mixture ground truth: components plus mixing weights."""

    components: tuple[Component, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        if len(comps) < 1:
            raise ValueError("mixture needs at least one component")
        if len(comps) != len(w):
            raise ValueError("weights and components length mismatch")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        parts = np.stack([c.logpdf(x) for c in self.components])
        logw = np.log(np.asarray(self.weights))[:, None]
        mx = np.max(parts + logw, axis=0)
        return mx + np.log(np.sum(np.exp(parts + logw - mx), axis=0))

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        acc = np.zeros_like(x)
        for w, comp in zip(self.weights, self.components):
            acc += w * comp.cdf(x)
        return acc

    def draw(self, n: int, rng) -> np.ndarray:
        """Values only, as an n x 1 matrix (density-protocol adapter)."""
        return sample_mixture(self, n, rng)[0]


@dataclass(frozen=True)
class ContaminationSpec:
    """(1 - eps) * base + eps * contaminant."""

    base: MixtureSpec
    contaminant: MixtureSpec
    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must be in [0, 1], got {self.eps}")

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if self.eps == 0.0:
            return self.base.logpdf(x)
        if self.eps == 1.0:
            return self.contaminant.logpdf(x)
        a = math.log1p(-self.eps) + self.base.logpdf(x)
        b = math.log(self.eps) + self.contaminant.logpdf(x)
        mx = np.maximum(a, b)
        return mx + np.log(np.exp(a - mx) + np.exp(b - mx))

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return (1.0 - self.eps) * self.base.cdf(x) + self.eps * self.contaminant.cdf(x)

    def draw(self, n: int, rng) -> np.ndarray:
        return contaminate(self, n, rng)[0]


def sample_mixture(spec: MixtureSpec, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """n draws as an n x 1 matrix plus component labels."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = _as_rng(rng)
    cumw = np.cumsum(np.asarray(spec.weights))
    labels = np.searchsorted(cumw, rng.random(n), side="right")
    labels = np.minimum(labels, len(spec.components) - 1)  # guard u == 1.0 edge
    values = np.zeros(n)
    for j, comp in enumerate(spec.components):
        mask = labels == j
        cnt = int(mask.sum())
        if cnt:
            values[mask] = comp.draw(cnt, rng)
    return values.reshape(-1, 1), labels.astype(np.int64)


def contaminate(cs: ContaminationSpec, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """n draws as an n x 1 matrix plus flags (1 = from the contaminant)."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = _as_rng(rng)
    flags = rng.random(n) < cs.eps
    values = np.zeros(n)
    n_base = int((~flags).sum())
    if n_base:
        values[~flags] = sample_mixture(cs.base, n_base, rng)[0][:, 0]
    n_cont = int(flags.sum())
    if n_cont:
        # Component.draw gives (n,), MixtureSpec.draw gives (n, 1); accept both
        values[flags] = np.asarray(cs.contaminant.draw(n_cont, rng)).reshape(-1)
    return values.reshape(-1, 1), flags.astype(np.int64)


@dataclass(frozen=True)
class DatasetSeries:
    """Nested datasets: each smaller set is literally a prefix of the next."""

    full: np.ndarray
    sizes: tuple[int, ...]
    labels: np.ndarray | None = None

    def prefix(self, n: int) -> np.ndarray:
        if n not in self.sizes:
            raise ValueError(f"size {n} is not one of {self.sizes}")
        return self.full[:n]


def nested_series(matrix: np.ndarray, sizes, labels=None) -> DatasetSeries:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-D")
    sizes = tuple(int(s) for s in sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("sizes must be positive")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sizes must be strictly ascending, got {sizes}")
    if sizes[-1] > matrix.shape[0]:
        raise ValueError(f"largest size {sizes[-1]} exceeds {matrix.shape[0]} rows")
    full = matrix[: sizes[-1]]
    lab = None if labels is None else np.asarray(labels)[: sizes[-1]]
    return DatasetSeries(full=full, sizes=sizes, labels=lab)


def log2_standardize(counts: np.ndarray) -> np.ndarray:
    """log2(1 + x) entrywise, then per-column center and scale to unit SD.

    SD is the population (divide-by-N) standard deviation. Columns that are
    constant after the transform have no scale and are rejected.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 2:
        raise ValueError("counts must be a 2-D matrix")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    x = np.log2(1.0 + counts)
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    dead = np.nonzero(sd == 0.0)[0]
    if dead.size:
        raise ValueError(f"column {int(dead[0])} has zero variance after log transform")
    return (x - mu) / sd


def empirical_hyperparams(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per dimension: m = midrange, kappa = 1 / range^2."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] < 2:
        raise ValueError("need at least two rows")
    hi = data.max(axis=0)
    lo = data.min(axis=0)
    rng_ = hi - lo
    dead = np.nonzero(rng_ == 0.0)[0]
    if dead.size:
        raise ValueError(f"dimension {int(dead[0])} has zero range")
    m = 0.5 * (hi + lo)
    kappa = rng_ ** -2.0
    return m, kappa


def load_matrix(path, fmt: str = "csv") -> np.ndarray:
    """Read a numeric CSV matrix; fmt 'csv' (no header) or 'csv-header'."""
    if fmt not in ("csv", "csv-header"):
        raise ValueError(f"unknown format {fmt!r}")
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if fmt == "csv-header" and lineno == 1:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ValueError(
                    f"line {lineno}: expected {width} columns, found {len(cells)}"
                )
            parsed = []
            for col, cell in enumerate(cells, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"line {lineno}, column {col}: could not parse {cell.strip()!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ValueError(f"no data rows in {path}")
    return np.asarray(rows, dtype=float)


def save_matrix(path, matrix: np.ndarray, header: list[str] | None = None) -> None:
    """Write a matrix as CSV (LF, UTF-8, shortest round-trip float repr)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            if len(header) != matrix.shape[1]:
                raise ValueError("header width does not match matrix")
            fh.write(",".join(header) + "\n")
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
