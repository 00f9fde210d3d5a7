"""Base classifiers, desk-scale training, and the canonical model file."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .certify import first_argmax
from .data import Dataset
from .noise import (
    ConfigError,
    NoiseKind,
    NoiseModel,
    SplitSpec,
    make_offset_vector,
    sample_noisy,
)

__all__ = [
    "TableClassifier",
    "LinearSoftmaxClassifier",
    "ModelFileError",
    "train_linear",
    "save_model",
    "load_model",
    "write_model",
    "read_model",
]

FORMAT_VERSION = 1
MAGIC = "dssn-model"


@dataclass
class TableClassifier:
    """Lookup table over every noisy input reachable on a ``q``-grid.

    Noisy coordinates are multiples of ``1/(4q)``, so the table is a dense
    array with ``4q + 1`` entries per axis.
    """

    q: int
    d: int
    num_classes: int
    table: np.ndarray
    noise: NoiseModel | None = None

    MAX_ENTRIES = 10**6

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.int64)
        if self.table.shape != (4 * self.q + 1,) * self.d:
            raise ValueError(f"table shape {self.table.shape} does not match q={self.q}, d={self.d}")

    @classmethod
    def random(cls, q: int, d: int, num_classes: int, seed: int, noise: NoiseModel | None = None):
        if (4 * q + 1) ** d > cls.MAX_ENTRIES:
            raise ValueError(f"table with {(4 * q + 1) ** d} entries exceeds budget")
        rng = np.random.default_rng(seed)
        return cls(q, d, num_classes, rng.integers(0, num_classes, size=(4 * q + 1,) * d), noise)

    @classmethod
    def from_function(cls, q: int, d: int, num_classes: int, fn, noise: NoiseModel | None = None):
        """Tabulate ``fn(numerators)`` where ``numerators`` are the ``x~ * 4q`` integers."""
        grid = np.indices((4 * q + 1,) * d).reshape(d, -1).T
        labels = np.array([fn(tuple(int(a) for a in row)) for row in grid])
        return cls(q, d, num_classes, labels.reshape((4 * q + 1,) * d), noise)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        num = np.rint(np.asarray(X, dtype=float) * (4 * self.q)).astype(np.int64)
        if num.min() < 0 or num.max() > 4 * self.q:
            raise ValueError("input outside [0, 1]")
        return self.table[tuple(num.T)]


@dataclass
class LinearSoftmaxClassifier:
    weights: np.ndarray  # (classes, d)
    bias: np.ndarray  # (classes,)
    noise: NoiseModel | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    def logits(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights.T + self.bias

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return first_argmax(self.logits(X), axis=1)


def cosine_lr(lr0: float, step: int, total: int) -> float:
    return 0.5 * lr0 * (1 + math.cos(math.pi * step / total))


def train_linear(dataset: Dataset, noise: NoiseModel, epochs: int = 30, lr: float = 0.5,
                 batch_size: int = 64, seed: int = 0) -> LinearSoftmaxClassifier:
    """Softmax regression by minibatch SGD on noisy copies of the data.

    Every sample gets fresh noise each epoch (for DSSN: its own random base
    split). Cosine annealing from ``lr``. Deterministic given ``seed``.
    """
    spec = noise.spec
    if spec is None:
        raise ConfigError("training needs a SplitSpec (attach one even for additive noise)")
    if dataset.d != spec.d or dataset.q != spec.q:
        raise ValueError(f"dataset has (d, q)=({dataset.d}, {dataset.q}), "
                         f"noise spec has ({spec.d}, {spec.q})")
    k, d = dataset.num_classes, dataset.d
    W = np.zeros((k, d))
    b = np.zeros(k)
    rng = np.random.default_rng(seed)
    n = len(dataset)
    steps_per_epoch = math.ceil(n / batch_size)
    total = max(epochs * steps_per_epoch, 1)
    onehot = np.eye(k)[dataset.labels]
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            sel = order[start:start + batch_size]
            X = sample_noisy(dataset.levels[sel], noise, rng)
            z = X @ W.T + b
            z -= z.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            g = (p - onehot[sel]) / len(sel)
            eta = cosine_lr(lr, step, total)
            W -= eta * (g.T @ X)
            b -= eta * g.sum(axis=0)
            step += 1
    meta = {
        "batch_size": str(batch_size),
        "epochs": str(epochs),
        "lr": repr(float(lr)),
        "lr_schedule": "cosine",
        "train_seed": str(seed),
        "train_size": str(n),
        "data": dataset.provenance,
    }
    return LinearSoftmaxClassifier(W, b, noise, meta)


# --- model files -------------------------------------------------------------
#
# Layout: a magic line, then one record per field, in a fixed order:
#   <key>:<byte length of value>:<value>\n
# Floats are written with repr(), which round-trips exactly, so
# load -> save reproduces the original bytes.


class ModelFileError(ValueError):
    pass


def _fmt_floats(a: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(a))


def _fmt_ints(a) -> str:
    return " ".join(str(int(x)) for x in np.ravel(a))


def _lam_text(noise: NoiseModel) -> str:
    if noise.kind is NoiseKind.UNIFORM_ADDITIVE and noise.lam_continuous is not None:
        return repr(float(noise.lam_continuous))
    return str(noise.spec.lam)


def _records(model) -> list[tuple[str, str]]:
    noise = model.noise
    if noise is None or noise.spec is None:
        raise ModelFileError("a model file needs the noise spec the model is used with")
    spec = noise.spec
    if isinstance(model, LinearSoftmaxClassifier):
        kind = "linear"
    elif isinstance(model, TableClassifier):
        kind = "table"
    else:
        raise ModelFileError(f"cannot serialize {type(model).__name__}")
    recs = [
        ("format_version", str(FORMAT_VERSION)),
        ("kind", kind),
        ("d", str(spec.d)),
        ("q", str(spec.q)),
        ("L", str(spec.L)),
        ("generator_id", spec.generator_id),
        ("seed", str(spec.seed)),
        ("v", _fmt_ints(spec.v)),
        ("noise", noise.kind.value),
        ("lambda", _lam_text(noise)),
        ("num_classes", str(model.num_classes)),
    ]
    if kind == "linear":
        recs += [("weights", _fmt_floats(model.weights)), ("bias", _fmt_floats(model.bias))]
        meta = model.metadata
    else:
        recs += [("table", _fmt_ints(model.table))]
        meta = {}
    recs += [(f"meta.{k}", str(meta[k])) for k in sorted(meta)]
    return recs


def save_model(model) -> bytes:
    out = [MAGIC, "\n"]
    for key, value in _records(model):
        if ":" in key or "\n" in key:
            raise ModelFileError(f"bad key {key!r}")
        out.append(f"{key}:{len(value.encode())}:{value}\n")
    return "".join(out).encode()


def _parse(data: bytes) -> list[tuple[str, str]]:
    head = (MAGIC + "\n").encode()
    if not data.startswith(head):
        raise ModelFileError("not a model file (bad magic line)")
    pos = len(head)
    recs = []
    while pos < len(data):
        c1 = data.find(b":", pos)
        c2 = data.find(b":", c1 + 1) if c1 >= 0 else -1
        if c1 < 0 or c2 < 0:
            raise ModelFileError(f"malformed record at byte {pos}")
        try:
            key = data[pos:c1].decode()
            n = int(data[c1 + 1:c2])
        except ValueError:  # includes UnicodeDecodeError
            raise ModelFileError(f"malformed record header at byte {pos}") from None
        end = c2 + 1 + n
        if n < 0 or data[end:end + 1] != b"\n":
            raise ModelFileError(f"field {key!r} is truncated or mis-sized")
        try:
            recs.append((key, data[c2 + 1:end].decode()))
        except UnicodeDecodeError:
            raise ModelFileError(f"field {key!r} is not valid UTF-8") from None
        pos = end + 1
    return recs


def load_model(data: bytes):
    """Parse a model file, regenerating ``v`` from its generator and seed to check it."""
    fields = _parse(data)
    rec = dict(fields)
    if len(rec) != len(fields):
        raise ModelFileError("duplicate field")
    try:
        version = int(rec["format_version"])
    except (KeyError, ValueError):
        raise ModelFileError("missing format_version") from None
    if version != FORMAT_VERSION:
        raise ModelFileError(f"format_version {version} not supported (expected {FORMAT_VERSION})")
    try:
        d, q, L, seed = (int(rec[k]) for k in ("d", "q", "L", "seed"))
        v = tuple(int(t) for t in rec["v"].split())
        gen = rec["generator_id"]
        k = int(rec["num_classes"])
        kind = NoiseKind(rec["noise"])
    except (KeyError, ValueError) as err:
        raise ModelFileError(f"missing or malformed field: {err}") from None
    if len(v) != d or k < 1:
        raise ModelFileError(f"v has {len(v)} entries for d={d}, num_classes={k}")
    try:
        expected = make_offset_vector(gen, seed, d, L)
    except ConfigError as err:
        raise ModelFileError(f"{err}; this file was written by a build with a different "
                             "offset generator and cannot be certified here") from None
    if v != expected:
        raise ModelFileError(f"stored offset vector does not match generator {gen!r} with seed {seed}")
    try:
        spec = SplitSpec(L=L, q=q, v=v, generator_id=gen, seed=seed)
        if kind is NoiseKind.UNIFORM_ADDITIVE:
            noise = NoiseModel(kind, spec, float(rec["lambda"]))
        else:
            if Fraction(rec["lambda"]) != spec.lam:
                raise ModelFileError(f"lambda {rec['lambda']} disagrees with L/(2q) = {spec.lam}")
            noise = NoiseModel(kind, spec)
    except (KeyError, ValueError, ZeroDivisionError) as err:
        if isinstance(err, ModelFileError):
            raise
        raise ModelFileError(f"bad noise specification: {err}") from None
    meta = {key[5:]: val for key, val in fields if key.startswith("meta.")}
    if rec.get("kind") == "linear":
        try:
            W = np.array([float(t) for t in rec["weights"].split()]).reshape(k, d)
            b = np.array([float(t) for t in rec["bias"].split()])
        except (KeyError, ValueError) as err:
            raise ModelFileError(f"bad linear parameters: {err}") from None
        if b.shape != (k,):
            raise ModelFileError("bias length does not match num_classes")
        model = LinearSoftmaxClassifier(W, b, noise, meta)
    elif rec.get("kind") == "table":
        try:
            t = np.array([int(a) for a in rec["table"].split()]).reshape((4 * q + 1,) * d)
        except (KeyError, ValueError) as err:
            raise ModelFileError(f"bad table: {err}") from None
        if t.min() < 0 or t.max() >= k:
            raise ModelFileError("table holds labels outside the class set")
        model = TableClassifier(q, d, k, t, noise)
    else:
        raise ModelFileError(f"unknown classifier kind {rec.get('kind')!r}")
    if [key for key, _ in _records(model)] != [key for key, _ in fields]:
        raise ModelFileError("fields out of canonical order")
    return model


def write_model(model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model))


def read_model(path):
    with open(path, "rb") as fh:
        return load_model(fh.read())
