"""Smoothed prediction and l1 certificates, exact (DSSN) and Monte Carlo."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Protocol

import numpy as np
from scipy.stats import binom

from .noise import (
    NoiseKind,
    NoiseModel,
    QuantizedPoint,
    SplitSpec,
    noisy_numerators,
    sample_noisy,
)

__all__ = [
    "BaseClassifier",
    "ClassifierError",
    "SmoothedScores",
    "Certificate",
    "first_argmax",
    "dssn_inputs",
    "smooth_exact_dssn",
    "smooth_monte_carlo",
    "predict",
    "certify_exact",
    "certify_randomized",
    "lower_confidence_bound",
]

DEFAULT_N0 = 64
DEFAULT_N = 100_000
DEFAULT_ALPHA = 0.001


class BaseClassifier(Protocol):
    """Hard classifier over class indices ``0..num_classes-1``.

    Class index order is the lexicographic order used for tie-breaking.
    """

    num_classes: int

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        """Labels for each row of ``X`` (noisy inputs, shape ``(m, d)``)."""
        ...


class ClassifierError(RuntimeError):
    def __init__(self, base_index: int, cause: BaseException):
        super().__init__(f"base classifier failed at base index {base_index}: {cause!r}")
        self.base_index = base_index


def first_argmax(values, axis=None):
    """Index of the largest entry, lowest index on ties.

    This is the single tie rule shared by smoothed prediction and by the
    base classifiers' own logits.
    """
    if axis is None:
        return int(np.argmax(np.asarray(values)))
    return np.argmax(np.asarray(values), axis=axis)


@dataclass(frozen=True)
class SmoothedScores:
    kind: str  # "exact" | "montecarlo"
    counts: tuple[int, ...]
    total: int

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if sum(self.counts) != self.total:
            raise ValueError(f"counts sum to {sum(self.counts)}, expected {self.total}")
        if any(c < 0 for c in self.counts):
            raise ValueError("negative count")

    @property
    def num_classes(self) -> int:
        return len(self.counts)

    def probabilities(self) -> list[Fraction]:
        return [Fraction(c, self.total) for c in self.counts]


@dataclass(frozen=True)
class Certificate:
    predicted_class: int
    radius: Fraction | float | None
    kind: str  # "exact" | "probabilistic"
    abstained: bool = False
    eval_count: int = 0
    alpha: float | None = None
    gap_counts: tuple[int, int] | None = None  # (k_A, k_B) for exact certificates

    def __post_init__(self):
        if self.abstained and self.radius is not None:
            raise ValueError("an abstaining certificate has no radius")


def _count_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"classifier returned a label outside 0..{num_classes - 1}")
    return np.bincount(labels.astype(np.int64), minlength=num_classes)


def dssn_inputs(x: QuantizedPoint, spec: SplitSpec) -> np.ndarray:
    """Numerators (over ``4q``) of the ``L`` noisy inputs, one row per base index."""
    if x.d != spec.d or x.q != spec.q:
        raise ValueError(f"point has (d, q)=({x.d}, {x.q}), spec has ({spec.d}, {spec.q})")
    idx = (np.arange(spec.L)[:, None] + spec.offsets()[None, :]) % spec.L
    return noisy_numerators(x.as_array()[None, :], idx, spec.q, spec.L)


def _classify_rows(classifier: BaseClassifier, X: np.ndarray) -> np.ndarray:
    try:
        return np.asarray(classifier.predict_batch(X))
    except Exception:
        pass
    # locate the failing row so the error names a base index
    for b in range(X.shape[0]):
        try:
            classifier.predict_batch(X[b:b + 1])
        except Exception as err:
            raise ClassifierError(b, err) from err
    return np.asarray(classifier.predict_batch(X))


def smooth_exact_dssn(classifier: BaseClassifier, x: QuantizedPoint, spec: SplitSpec) -> SmoothedScores:
    """Exact vote counts over all ``L`` values of the base split."""
    X = dssn_inputs(x, spec) / (4 * spec.q)
    labels = _classify_rows(classifier, X)
    counts = _count_labels(labels, classifier.num_classes)
    return SmoothedScores("exact", tuple(counts), spec.L)


def _noisy_batch(x: QuantizedPoint, model: NoiseModel, m: int, rng: np.random.Generator) -> np.ndarray:
    if model.kind is NoiseKind.UNIFORM_ADDITIVE and model.spec is None:
        lam = float(model.lam)
        return (x.as_array() / x.q)[None, :] + rng.uniform(-lam, lam, size=(m, x.d))
    spec = model.spec
    if x.d != spec.d or x.q != spec.q:
        raise ValueError(f"point has (d, q)=({x.d}, {x.q}), spec has ({spec.d}, {spec.q})")
    return sample_noisy(np.broadcast_to(x.as_array(), (m, x.d)), model, rng)


def smooth_monte_carlo(classifier: BaseClassifier, x: QuantizedPoint, model: NoiseModel, n: int,
                       rng: np.random.Generator, batch_size: int = 20_000) -> SmoothedScores:
    """Vote counts from ``n`` random noisy copies of ``x``.

    DSSN noise here means sampling the base split at random, which is how
    training draws it and how the exact enumeration is cross-checked.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    counts = np.zeros(classifier.num_classes, dtype=np.int64)
    remaining = n
    while remaining:
        m = min(batch_size, remaining)
        labels = classifier.predict_batch(_noisy_batch(x, model, m, rng))
        counts += _count_labels(labels, classifier.num_classes)
        remaining -= m
    return SmoothedScores("montecarlo", tuple(counts), n)


def predict(scores: SmoothedScores) -> int:
    return first_argmax(scores.counts)


def certify_exact(scores: SmoothedScores, q: int, gap: str = "multiclass") -> Certificate:
    """Exact certificate from DSSN counts, valid up to and including the radius.

    With ``k_A`` the winning count and ``k_c`` any other, a perturbation of
    ``l1`` size ``D/q`` changes at most ``D`` of the ``L`` votes, so the margin
    shrinks by at most ``2D``. The prediction survives when the margin stays
    positive, or reaches zero against a class that sorts after ``A``. That
    gives ``radius = min_c (k_A - k_c - [c < A]) / (2q)``.

    ``gap="one-vs-all"`` replaces the runner-up count by ``L - k_A``.
    """
    if scores.kind != "exact":
        raise ValueError("certify_exact needs exact scores")
    counts = scores.counts
    a = predict(scores)
    k_a = counts[a]
    if gap == "multiclass":
        others = [(counts[c], c) for c in range(len(counts)) if c != a]
        if not others:
            margin = k_a
            k_b = 0
        else:
            margin = min(k_a - k_c - (1 if c < a else 0) for k_c, c in others)
            k_b = max(k for k, _ in others)
    elif gap == "one-vs-all":
        k_b = scores.total - k_a
        # the pooled remainder may belong to a class that sorts before A
        margin = max(k_a - k_b - (1 if a > 0 else 0), 0)
    else:
        raise ValueError(f"unknown gap rule {gap!r}")
    return Certificate(
        predicted_class=a,
        radius=Fraction(margin, 2 * q),
        kind="exact",
        eval_count=scores.total,
        gap_counts=(k_a, k_b),
    )


def lower_confidence_bound(k: int, n: int, alpha: float, tol: float = 1e-12) -> float:
    """One-sided exact binomial lower bound on ``p`` given ``k`` successes of ``n``.

    Returns the ``p`` at which ``Pr[Bin(n, p) >= k] = alpha``, found by
    bisection (the tail is increasing in ``p``).
    """
    if not 0 <= k <= n or n < 1:
        raise ValueError(f"need 0 <= k <= n, n >= 1; got k={k}, n={n}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if k == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binom.sf(k - 1, n, mid) < alpha:
            lo = mid
        else:
            hi = mid
    return lo


def certify_randomized(classifier: BaseClassifier, x: QuantizedPoint, model: NoiseModel,
                       n0: int = DEFAULT_N0, n: int = DEFAULT_N, alpha: float = DEFAULT_ALPHA,
                       rng: np.random.Generator | None = None) -> Certificate:
    """Two-stage Monte Carlo certificate that holds with probability ``1 - alpha``.

    The top class is guessed from ``n0`` draws; ``n`` fresh draws then bound
    its probability from below, and every other class is bounded by the
    complement. Abstains unless the bound exceeds one half.
    """
    if n0 < 1 or n < 1:
        raise ValueError("n0 and n must be positive")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    rng = np.random.default_rng() if rng is None else rng
    guess = predict(smooth_monte_carlo(classifier, x, model, n0, rng))
    k = smooth_monte_carlo(classifier, x, model, n, rng).counts[guess]
    p_lower = lower_confidence_bound(k, n, alpha)
    if p_lower <= 0.5:
        return Certificate(guess, None, "probabilistic", abstained=True,
                           eval_count=n0 + n, alpha=alpha)
    radius = float(model.lam) * (2 * p_lower - 1)
    return Certificate(guess, radius, "probabilistic", eval_count=n0 + n, alpha=alpha)

