"""Splitting noise, its quantized derandomization, and the uniform additive baseline.

Quantized quantities are kept as integers throughout:

* an input coordinate ``x_i = a/q`` is stored as its level ``a``;
* a split position ``s_i = (2j + 1)/(2q)`` is stored as its index ``j``;
* the noise scale ``2*lambda = L/q`` is stored as ``L``;
* a noisy coordinate ``x~_i`` is always a midpoint of half-step-delimited
  intervals, so it is stored as the integer numerator of ``x~_i * 4q``.

The real-valued transforms at the bottom work on floats or ``Fraction``s and
serve as the reference formulas the integer path is checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from numbers import Real
from typing import Sequence

import numpy as np

__all__ = [
    "ConfigError",
    "GENERATORS",
    "DEFAULT_GENERATOR",
    "QuantizedPoint",
    "SplitSpec",
    "SplitVector",
    "NoiseKind",
    "NoiseModel",
    "make_offset_vector",
    "enumerate_split_bases",
    "split_value",
    "splits_from_base",
    "noisy_numerators",
    "reachable_numerators",
    "split_transform_simple",
    "split_transform_general",
    "sample_split_independent",
    "uniform_additive_sample",
    "sample_noisy",
    "marginal_map_g",
    "quantize_lambda",
    "sigma_to_lambda",
    "lambda_to_sigma",
]


class ConfigError(ValueError):
    """Bad noise configuration (unknown generator, inconsistent sizes)."""


def _mt19937(seed: int, d: int, L: int) -> np.ndarray:
    return np.random.RandomState(seed).randint(0, L, size=d)


def _pcg64(seed: int, d: int, L: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, L, size=d)


def _zeros(seed: int, d: int, L: int) -> np.ndarray:
    return np.zeros(d, dtype=np.int64)


# Versioned ids: changing what an id produces would silently invalidate every
# stored model, so a new algorithm gets a new id instead.
GENERATORS = {
    "mt19937-v1": _mt19937,
    "pcg64-v1": _pcg64,
    "zeros-v1": _zeros,
}
DEFAULT_GENERATOR = "mt19937-v1"


def make_offset_vector(generator_id: str, seed: int, d: int, L: int) -> tuple[int, ...]:
    """Offset vector ``v`` (integer offsets mod ``L``), a pure function of its inputs."""
    if L < 1 or d < 1:
        raise ConfigError(f"need L >= 1 and d >= 1, got L={L}, d={d}")
    try:
        gen = GENERATORS[generator_id]
    except KeyError:
        known = ", ".join(sorted(GENERATORS))
        raise ConfigError(f"unknown generator_id {generator_id!r} (known: {known})") from None
    return tuple(int(a) for a in gen(int(seed), int(d), int(L)))


@dataclass(frozen=True)
class QuantizedPoint:
    """A point of ``[0,1]_(q)^d`` stored as integer levels."""

    levels: tuple[int, ...]
    q: int

    def __post_init__(self):
        levels = tuple(int(a) for a in self.levels)
        object.__setattr__(self, "levels", levels)
        if self.q < 1:
            raise ValueError(f"q must be positive, got {self.q}")
        if not levels:
            raise ValueError("empty point")
        bad = [a for a in levels if not 0 <= a <= self.q]
        if bad:
            raise ValueError(f"levels out of range 0..{self.q}: {bad[:5]}")

    @property
    def d(self) -> int:
        return len(self.levels)

    def values(self) -> list[Fraction]:
        return [Fraction(a, self.q) for a in self.levels]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=np.int64)

    def l1_levels(self, other: "QuantizedPoint") -> int:
        """``q * ||self - other||_1`` as an integer."""
        return sum(abs(a - b) for a, b in zip(self.levels, other.levels))


@dataclass(frozen=True)
class SplitSpec:
    L: int
    q: int
    v: tuple[int, ...]
    generator_id: str = DEFAULT_GENERATOR
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(int(a) for a in self.v))
        if self.L < 1 or self.q < 1:
            raise ConfigError(f"need L >= 1 and q >= 1, got L={self.L}, q={self.q}")
        if any(not 0 <= a < self.L for a in self.v):
            raise ConfigError(f"offsets must lie in 0..{self.L - 1}")

    @classmethod
    def generate(cls, q: int, L: int, d: int, seed: int = 0,
                 generator_id: str = DEFAULT_GENERATOR) -> "SplitSpec":
        return cls(L=L, q=q, v=make_offset_vector(generator_id, seed, d, L),
                   generator_id=generator_id, seed=seed)

    @classmethod
    def zero_offsets(cls, q: int, L: int, d: int) -> "SplitSpec":
        """All splits equal (``v = 0``); kept for the degenerate-split analysis."""
        return cls.generate(q, L, d, seed=0, generator_id="zeros-v1")

    @property
    def d(self) -> int:
        return len(self.v)

    @property
    def lam(self) -> Fraction:
        return Fraction(self.L, 2 * self.q)

    def offsets(self) -> np.ndarray:
        return np.asarray(self.v, dtype=np.int64)


@dataclass(frozen=True)
class SplitVector:
    idx: tuple[int, ...]
    q: int
    L: int

    def values(self) -> list[Fraction]:
        return [split_value(j, self.q) for j in self.idx]


class NoiseKind(str, Enum):
    DSSN = "dssn"
    INDEPENDENT_SSN = "independent-ssn"
    UNIFORM_ADDITIVE = "uniform-additive"


@dataclass(frozen=True)
class NoiseModel:
    """Which smoothing distribution to draw from.

    Splitting kinds carry a :class:`SplitSpec`; the additive baseline carries
    a continuous ``lam`` (a spec may still be attached for bookkeeping).
    """

    kind: NoiseKind
    spec: SplitSpec | None = None
    lam_continuous: float | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.kind is NoiseKind.UNIFORM_ADDITIVE:
            if self.lam_continuous is None and self.spec is None:
                raise ConfigError("uniform additive noise needs lambda")
        elif self.spec is None:
            raise ConfigError(f"{self.kind.value} noise needs a SplitSpec")

    @property
    def lam(self) -> Fraction | float:
        if self.kind is NoiseKind.UNIFORM_ADDITIVE and self.lam_continuous is not None:
            return self.lam_continuous
        return self.spec.lam


def enumerate_split_bases(L: int) -> list[int]:
    if L < 1:
        raise ValueError(f"L must be positive, got {L}")
    return list(range(L))


def split_value(j: int, q: int) -> Fraction:
    """Half-step split position encoded by index ``j``: ``(2j+1)/(2q)``."""
    return Fraction(2 * j + 1, 2 * q)


def splits_from_base(base_index: int, spec: SplitSpec) -> SplitVector:
    if not 0 <= base_index < spec.L:
        raise IndexError(f"base index {base_index} outside 0..{spec.L - 1}")
    idx = tuple((base_index + a) % spec.L for a in spec.v)
    return SplitVector(idx=idx, q=spec.q, L=spec.L)


def noisy_numerators(levels, idx, q: int, L: int) -> np.ndarray:
    """Integer form of the general splitting transform.

    Returns ``x~ * 4q`` for levels ``a`` (``x = a/q``) and split indices
    ``j`` (``s = (2j+1)/(2q)``), broadcasting ``levels`` against ``idx``.
    Working in half-steps, ``x -> 2a``, ``s -> 2j+1`` and ``2*lambda -> 2L``.
    """
    X = 2 * np.asarray(levels, dtype=np.int64)
    S = 2 * np.asarray(idx, dtype=np.int64) + 1
    P = 2 * L
    k = -((S - X) // P)  # ceil((X - S) / P)
    upper = np.minimum(P * k + S, 2 * q)
    lower = np.maximum(P * (k - 1) + S, 0)
    return upper + lower


def reachable_numerators(q: int, L: int) -> np.ndarray:
    """Sorted set of ``x~ * 4q`` values any coordinate can take."""
    a = np.arange(q + 1)[:, None]
    j = np.arange(L)[None, :]
    return np.unique(noisy_numerators(a, j, q, L))


def split_transform_simple(x: Sequence[Real], s: Sequence[Real], lam=None) -> np.ndarray:
    """``x~_i = (min(s_i, 1) + [x_i > s_i]) / 2``; valid only for ``lambda >= 1/2``."""
    if lam is not None and lam < Fraction(1, 2):
        raise ValueError("the two-interval transform needs lambda >= 0.5; "
                         "use split_transform_general")
    return np.array([(min(si, 1) + (1 if xi > si else 0)) / 2 for xi, si in zip(x, s)])


def split_transform_general(x: Sequence[Real], s: Sequence[Real], lam) -> np.ndarray:
    """Midpoint of the piece of ``[0,1]`` containing ``x_i`` when cut at ``s_i + 2*lam*n``."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    w = 2 * lam
    out = []
    for xi, si in zip(x, s):
        k = math.ceil((xi - si) / w)
        out.append((min(w * k + si, 1) + max(w * (k - 1) + si, 0)) / 2)
    return np.array(out)


def sample_split_independent(rng: np.random.Generator, d: int, lam, q: int | None = None):
    """Independent splits: quantized half-steps when ``q`` is given, else continuous."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if q is None:
        return rng.uniform(0.0, 2 * float(lam), size=d)
    L = 2 * Fraction(lam) * q
    if L.denominator != 1:
        raise ValueError(f"2*lambda*q = {L} is not an integer")
    return SplitVector(idx=tuple(int(j) for j in rng.integers(0, int(L), size=d)), q=q, L=int(L))


def uniform_additive_sample(rng: np.random.Generator, x, lam) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    lam = float(lam)
    return x + rng.uniform(-lam, lam, size=x.shape)


def sample_noisy(levels: np.ndarray, model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """One noisy copy per row of ``levels`` (shape ``(m, d)``), as floats.

    DSSN draws a single base split per row; independent SSN draws every
    coordinate's split separately; the additive baseline adds ``U(-lam, lam)``.
    """
    levels = np.asarray(levels, dtype=np.int64)
    m, d = levels.shape
    if model.kind is NoiseKind.UNIFORM_ADDITIVE:
        q = model.spec.q if model.spec is not None else None
        if q is None:
            raise ConfigError("uniform additive sampling of levels needs q (attach a spec)")
        lam = float(model.lam)
        return levels / q + rng.uniform(-lam, lam, size=(m, d))
    spec = model.spec
    if d != spec.d:
        raise ValueError(f"inputs have d={d}, spec has d={spec.d}")
    if model.kind is NoiseKind.DSSN:
        bases = rng.integers(0, spec.L, size=m)
        idx = (bases[:, None] + spec.offsets()[None, :]) % spec.L
    else:
        idx = rng.integers(0, spec.L, size=(m, d))
    return noisy_numerators(levels, idx, spec.q, spec.L) / (4 * spec.q)


def marginal_map_g(z, lam):
    """Map an additive-noise sample ``x_i + eps_i`` onto the matching splitting value."""
    if lam < Fraction(1, 2):
        raise ValueError("the marginal correspondence needs lambda >= 0.5")
    if z <= 1 - lam:
        return (z + lam) / 2
    if z < lam:
        return Fraction(1, 2) if isinstance(z, Fraction) else 0.5
    return (z - lam + 1) / 2


def quantize_lambda(lam, q: int) -> Fraction:
    """Largest ``L/(2q) <= lam``; float inputs within 1e-9 of a grid value snap to it."""
    if lam <= 0 or q < 1:
        raise ValueError(f"need lambda > 0 and q >= 1, got {lam}, {q}")
    if isinstance(lam, (int, Fraction)):
        L = math.floor(2 * Fraction(lam) * q)
    else:
        t = 2.0 * float(lam) * q
        r = round(t)
        L = r if abs(t - r) <= 1e-9 * max(1.0, abs(t)) else math.floor(t)
    if L == 0:
        raise ValueError(f"lambda={lam} is below one split step for q={q}")
    return Fraction(L, 2 * q)


def sigma_to_lambda(sigma: float) -> float:
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return sigma * math.sqrt(3)


def lambda_to_sigma(lam: float) -> float:
    return float(lam) / math.sqrt(3)
