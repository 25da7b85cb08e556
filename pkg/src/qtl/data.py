"""Datasets: synthetic generation, feature files, stratified splits, angle scaling.

Feature file format (UTF-8, ``#`` lines are comments)::

    classes=<C>,features=<F>
    label,f1,...,fF
    ...
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    """Malformed feature file or invalid dataset contents."""


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if x.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError("labels must be 1-D with one entry per row")
        if self.class_count < 1:
            raise ValueError("class_count must be positive")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def rows(self):
        return list(zip(self.features, self.labels))

    def subset(self, index) -> "Dataset":
        return Dataset(self.features[index], self.labels[index], self.class_count)


@dataclass(frozen=True)
class SplitSpec:
    train_count: int
    test_count: int
    seed: int = 0

    def __post_init__(self):
        if self.train_count < 1 or self.test_count < 1:
            raise ValueError("train and test counts must be positive")


DEFAULT_SEPARATION = 1.0


def gen_synthetic(n: int = 100, dim: int = 3, sigma: float = 0.5,
                  separation: float = DEFAULT_SEPARATION, seed: int = 0) -> Dataset:
    """Balanced two-class Gaussian data.

    Class ``c`` is drawn from a normal with standard deviation ``sigma`` and
    mean ``(-1)**c * separation`` along the first axis (zero elsewhere).
    """
    if n < 2 or n % 2:
        raise ValueError(f"n must be a positive even number, got {n}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if dim < 1:
        raise ValueError("dim must be positive")
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n // 2)
    means = np.zeros((n, dim))
    means[:, 0] = np.where(labels == 0, separation, -separation)
    x = means + rng.normal(0.0, sigma, size=(n, dim))
    order = rng.permutation(n)
    return Dataset(x[order], labels[order], 2)


def save_features(dataset: Dataset, path, comments=()) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(f"classes={dataset.class_count},features={dataset.feature_dim}")
    for x, y in zip(dataset.features, dataset.labels):
        lines.append(",".join([str(int(y))] + [repr(float(v)) for v in x]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_header(line: str, lineno: int) -> tuple[int, int]:
    try:
        fields = dict(part.split("=", 1) for part in line.split(","))
        classes, features = int(fields["classes"]), int(fields["features"])
    except (ValueError, KeyError) as exc:
        raise DataFormatError(f"line {lineno}: bad header {line!r}") from exc
    if classes < 1 or features < 1:
        raise DataFormatError(f"line {lineno}: classes and features must be positive")
    return classes, features


def load_features(path: str | os.PathLike) -> Dataset:
    header = None
    xs, ys = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = _parse_header(line, lineno)
                continue
            classes, width = header
            parts = line.split(",")
            if len(parts) != width + 1:
                raise DataFormatError(f"line {lineno}: expected {width + 1} fields, got {len(parts)}")
            try:
                label = int(parts[0])
                row = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise DataFormatError(f"line {lineno}: {exc}") from exc
            if not 0 <= label < classes:
                raise DataFormatError(f"line {lineno}: label {label} outside [0, {classes})")
            if not np.all(np.isfinite(row)):
                raise DataFormatError(f"line {lineno}: non-finite feature value")
            xs.append(row)
            ys.append(label)
    if header is None:
        raise DataFormatError(f"{path}: no header line")
    if not ys:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(np.array(xs, dtype=float), np.array(ys, dtype=int), header[0])


@dataclass(frozen=True, eq=False)
class AngleScaler:
    """Per-feature affine map onto ``[lo, hi]``, fitted on a training split.

    Constant features map to the midpoint; values outside the fitted range
    are clamped.
    """

    minimum: np.ndarray
    maximum: np.ndarray
    lo: float = 0.0
    hi: float = np.pi

    @classmethod
    def fit(cls, dataset: Dataset, lo: float = 0.0, hi: float = np.pi) -> "AngleScaler":
        if len(dataset) == 0:
            raise ValueError("cannot fit a scaler on an empty dataset")
        return cls(dataset.features.min(axis=0), dataset.features.max(axis=0), lo, hi)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        unit = np.where(span > 0, (x - self.minimum) / safe, 0.5)
        return self.lo + (self.hi - self.lo) * np.clip(unit, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist(),
                "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: dict) -> "AngleScaler":
        return cls(np.array(d["minimum"], dtype=float), np.array(d["maximum"], dtype=float),
                   float(d["lo"]), float(d["hi"]))


def rescale_to_angles(dataset: Dataset, lo: float = 0.0, hi: float = np.pi,
                      scaler: AngleScaler | None = None) -> Dataset:
    """Min-max map each feature onto ``[lo, hi]``.

    Pass the scaler fitted on the training split to rescale test data.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if scaler is None:
        scaler = AngleScaler.fit(dataset, lo, hi)
    return Dataset(scaler.transform(dataset.features), dataset.labels, dataset.class_count)


def _allocate(counts: np.ndarray, total: int) -> np.ndarray:
    # largest-remainder apportionment of `total` across classes
    exact = counts * total / counts.sum()
    alloc = np.floor(exact).astype(int)
    remainder = exact - alloc
    for c in np.argsort(-remainder, kind="stable")[: total - alloc.sum()]:
        alloc[c] += 1
    return alloc


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified random partition into train and test parts."""
    n = len(dataset)
    if spec.train_count + spec.test_count != n:
        raise ValueError(f"split counts {spec.train_count}+{spec.test_count} != dataset size {n}")
    classes, counts = np.unique(dataset.labels, return_counts=True)
    train_alloc = _allocate(counts, spec.train_count)
    # every present class must appear on both sides
    for c, k in zip(classes, counts):
        if k < 2:
            raise ValueError(f"class {c} has {k} row(s); stratification needs at least 2")
    train_alloc = np.clip(train_alloc, 1, counts - 1)
    ideal = counts * spec.train_count / n
    while (excess := train_alloc.sum() - spec.train_count) != 0:
        room = (train_alloc > 1) if excess > 0 else (train_alloc < counts - 1)
        if not room.any():
            raise ValueError("cannot stratify with the requested counts")
        deviation = np.where(room, train_alloc - ideal, np.nan)
        c = np.nanargmax(deviation) if excess > 0 else np.nanargmin(deviation)
        train_alloc[c] += -1 if excess > 0 else 1

    rng = np.random.default_rng(spec.seed)
    train_idx, test_idx = [], []
    for c, a in zip(classes, train_alloc):
        members = rng.permutation(np.flatnonzero(dataset.labels == c))
        train_idx.append(members[:a])
        test_idx.append(members[a:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return dataset.subset(train_idx), dataset.subset(test_idx)


def split_fraction(dataset: Dataset, train_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(dataset)
    train = min(max(int(round(train_fraction * n)), 1), n - 1)
    return split(dataset, SplitSpec(train, n - train, seed))
