"""Quantized datasets: CSV ingestion and seeded synthetic clusters."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .noise import QuantizedPoint

__all__ = ["Dataset", "DatasetError", "load_dataset", "save_dataset", "synth_dataset"]


class DatasetError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Dataset:
    levels: np.ndarray  # (n, d) ints in 0..q
    labels: np.ndarray  # (n,) ints in 0..num_classes-1
    q: int
    num_classes: int
    provenance: str = ""

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if levels.ndim != 2 or labels.shape != (levels.shape[0],):
            raise DatasetError(f"bad shapes {levels.shape} / {labels.shape}")
        if levels.size and (levels.min() < 0 or levels.max() > self.q):
            raise DatasetError(f"levels outside 0..{self.q}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise DatasetError(f"labels outside 0..{self.num_classes - 1}")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.levels.shape[0]

    @property
    def d(self) -> int:
        return self.levels.shape[1]

    def point(self, i: int) -> QuantizedPoint:
        return QuantizedPoint(tuple(self.levels[i]), self.q)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.levels[idx], self.labels[idx], self.q, self.num_classes, self.provenance)


def load_dataset(path, q: int, num_classes: int | None = None) -> Dataset:
    """Read a CSV with a header row, integer feature columns and a final label column."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError(f"{path} is empty")
        if len(header) < 2:
            raise DatasetError("need at least one feature column and a label column", 1)
        width = len(header)
        rows, labels = [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise DatasetError(f"expected {width} fields, got {len(row)}", line)
            try:
                vals = [int(t) for t in row]
            except ValueError:
                raise DatasetError(f"non-integer field in {row}", line) from None
            feats, label = vals[:-1], vals[-1]
            bad = [a for a in feats if not 0 <= a <= q]
            if bad:
                raise DatasetError(f"level {bad[0]} outside 0..{q}", line)
            if label < 0 or (num_classes is not None and label >= num_classes):
                raise DatasetError(f"unknown label {label}", line)
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise DatasetError(f"{path} has no data rows")
    k = num_classes if num_classes is not None else max(labels) + 1
    return Dataset(np.array(rows), np.array(labels), q, k, provenance=str(path))


def dataset_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i}" for i in range(ds.d)] + ["label"])
    for row, label in zip(ds.levels, ds.labels):
        w.writerow([int(a) for a in row] + [int(label)])
    return buf.getvalue()


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(dataset_csv(ds))


def synth_dataset(seed: int, d: int, q: int, classes: int, n_per_class: int,
                  separation: float, spread: float = 0.15) -> Dataset:
    """Gaussian clusters around ``0.5 + separation * u_c`` (``u_c`` uniform in ``[-1/2, 1/2]^d``),
    clipped to ``[0, 1]`` and rounded to the grid."""
    if min(d, q, classes, n_per_class) < 1 or separation < 0:
        raise ValueError("synth_dataset parameters must be positive")
    rng = np.random.default_rng(seed)
    centers = 0.5 + separation * rng.uniform(-0.5, 0.5, size=(classes, d))
    pts = centers[:, None, :] + spread * rng.standard_normal((classes, n_per_class, d))
    levels = np.rint(np.clip(pts, 0.0, 1.0) * q).astype(np.int64).reshape(-1, d)
    labels = np.repeat(np.arange(classes), n_per_class)
    prov = f"synth(seed={seed}, d={d}, q={q}, classes={classes}, n={n_per_class}, sep={separation!r})"
    return Dataset(levels, labels, q, classes, provenance=prov)
