"""Brute-force checks of the smoothing guarantees on small quantized domains.

Everything here is exact: probabilities are ``Fraction``s or integer counts
over a known total, and verdicts are integer comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .certify import BaseClassifier, SmoothedScores, certify_exact, first_argmax
from .models import TableClassifier
from .noise import (
    QuantizedPoint,
    SplitSpec,
    marginal_map_g,
    noisy_numerators,
    split_transform_general,
    split_transform_simple,
    split_value,
)

__all__ = [
    "BudgetExceeded",
    "GridReport",
    "grid_points",
    "exact_smoothed_value",
    "grid_counts",
    "verify_lipschitz_grid",
    "verify_prediction_stability",
    "proposition1_counterexample",
    "check_flip_probability",
    "check_union_bound",
    "check_marginal_pushforward",
    "check_degenerate_equal_splits",
    "check_transform_agreement",
    "random_table_sweep",
]

DEFAULT_BUDGET = 10**6
JOINTS = ("correlated", "independent")


class BudgetExceeded(RuntimeError):
    def __init__(self, what: str, required: int, budget: int):
        super().__init__(f"{what} needs {required} evaluations, budget is {budget}")
        self.required = required
        self.budget = budget


def grid_points(q: int, d: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """All ``(q+1)^d`` level vectors, lexicographic order."""
    n = (q + 1) ** d
    if n > budget:
        raise BudgetExceeded("grid", n, budget)
    return np.indices((q + 1,) * d).reshape(d, -1).T.astype(np.int64)


def _split_rows(spec: SplitSpec, joint: str, budget: int) -> np.ndarray:
    """Split-index vectors enumerated by ``joint``, one row each."""
    if joint == "correlated":
        return (np.arange(spec.L)[:, None] + spec.offsets()[None, :]) % spec.L
    if joint == "independent":
        n = spec.L ** spec.d
        if n > budget:
            raise BudgetExceeded("independent enumeration", n, budget)
        return np.indices((spec.L,) * spec.d).reshape(spec.d, -1).T
    raise ValueError(f"joint must be one of {JOINTS}, got {joint!r}")


def grid_counts(classifier: BaseClassifier, points: np.ndarray, spec: SplitSpec,
                joint: str = "correlated", budget: int = DEFAULT_BUDGET) -> tuple[np.ndarray, int]:
    """Vote counts per point and class, plus the common total."""
    rows = _split_rows(spec, joint, budget)
    counts = np.zeros((len(points), classifier.num_classes), dtype=np.int64)
    chunk = max(1, 200_000 // len(rows))
    for start in range(0, len(points), chunk):
        pts = points[start:start + chunk]
        num = noisy_numerators(pts[:, None, :], rows[None, :, :], spec.q, spec.L)
        labels = np.asarray(classifier.predict_batch(num.reshape(-1, spec.d) / (4 * spec.q)))
        labels = labels.reshape(len(pts), len(rows))
        for c in range(classifier.num_classes):
            counts[start:start + len(pts), c] = (labels == c).sum(axis=1)
    return counts, len(rows)


def exact_smoothed_value(classifier: BaseClassifier, x: QuantizedPoint, spec: SplitSpec,
                         joint: str = "correlated", budget: int = DEFAULT_BUDGET) -> list[Fraction]:
    counts, total = grid_counts(classifier, x.as_array()[None, :], spec, joint, budget)
    return [Fraction(int(c), total) for c in counts[0]]


@dataclass
class GridReport:
    max_violation_ratio: Fraction
    witness_pair: tuple[tuple[int, ...], tuple[int, ...]] | None
    witness_class: int | None
    pairs_checked: int
    holds: bool  # every pair satisfies |p(x) - p(x')| <= ||x - x'||_1 / (2 lambda)

    def summary(self) -> str:
        return (f"pairs={self.pairs_checked} max_ratio={self.max_violation_ratio} "
                f"({float(self.max_violation_ratio):.6f}) holds={self.holds}")


def verify_lipschitz_grid(classifier: BaseClassifier, spec: SplitSpec, joint: str = "correlated",
                          budget: int = DEFAULT_BUDGET) -> GridReport:
    """Largest ``|p_c(x) - p_c(x')| * 2 lambda / ||x - x'||_1`` over all grid pairs and classes.

    With ``p = k/T`` and levels ``a``: ``ratio = |dk| * L / (T * ||da||_1)``.
    """
    pts = grid_points(spec.q, spec.d, budget)
    counts, total = grid_counts(classifier, pts, spec, joint, budget)
    n = len(pts)
    best = Fraction(0)
    witness = None
    holds = True
    for i in range(n - 1):
        dk = np.abs(counts[i + 1:] - counts[i]).max(axis=1)
        dist = np.abs(pts[i + 1:] - pts[i]).sum(axis=1)
        if np.any(dk * spec.L > total * dist):
            holds = False
        approx = dk / dist
        top = approx.max()
        if top == 0:
            continue
        for j in np.flatnonzero(approx >= top * (1 - 1e-9)):
            r = Fraction(int(dk[j]) * spec.L, total * int(dist[j]))
            if r > best:
                best = r
                jj = i + 1 + int(j)
                c = int(np.argmax(np.abs(counts[jj] - counts[i])))
                witness = ((tuple(int(a) for a in pts[i]), tuple(int(a) for a in pts[jj])), c)
    return GridReport(
        max_violation_ratio=best,
        witness_pair=witness[0] if witness else None,
        witness_class=witness[1] if witness else None,
        pairs_checked=n * (n - 1) // 2,
        holds=holds,
    )


@dataclass
class StabilityReport:
    points: int
    neighbours_checked: int
    violations: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations


def _plain_margin(counts) -> int:
    a = first_argmax(counts)
    rest = [k for c, k in enumerate(counts) if c != a]
    return int(counts[a] - max(rest)) if rest else int(counts[a])


def verify_prediction_stability(classifier: BaseClassifier, spec: SplitSpec,
                                budget: int = DEFAULT_BUDGET, plain_gap: bool = False) -> StabilityReport:
    """Check every certificate on the grid against every grid point inside its radius.

    ``plain_gap=True`` uses the uncorrected ``(k_A - k_B)/(2q)`` radius
    instead of :func:`certify_exact`, to expose the boundary-tie failures
    that correction prevents.
    """
    pts = grid_points(spec.q, spec.d, budget)
    counts, total = grid_counts(classifier, pts, spec, "correlated", budget)
    preds = first_argmax(counts, axis=1)
    report = StabilityReport(points=len(pts), neighbours_checked=0)
    for i in range(len(pts)):
        if plain_gap:
            margin = _plain_margin(counts[i])
        else:
            cert = certify_exact(SmoothedScores("exact", tuple(counts[i]), total), spec.q)
            margin = int(cert.radius * 2 * spec.q)
        dist = np.abs(pts - pts[i]).sum(axis=1)
        inside = np.flatnonzero(2 * dist <= margin)
        report.neighbours_checked += len(inside)
        for j in inside[preds[inside] != preds[i]]:
            report.violations.append((tuple(int(a) for a in pts[i]), tuple(int(a) for a in pts[j]),
                                      int(preds[i]), int(preds[j])))
    return report


# --- additive-noise counterexample ------------------------------------------------


def _interval_prob(coef: Fraction, rhs: Fraction, lam: Fraction) -> Fraction:
    """``Pr[coef * e > rhs]`` for ``e ~ U(-lam, lam)``."""
    if coef == 0:
        return Fraction(1) if rhs < 0 else Fraction(0)
    t = rhs / coef
    if coef > 0:  # e > t
        lo, hi = max(t, -lam), lam
    else:  # e < t
        lo, hi = -lam, min(t, lam)
    return max(hi - lo, Fraction(0)) / (2 * lam)


def _diff_tail(c: Fraction) -> Fraction:
    """``Pr[e1 - e2 > c]`` for independent ``e1, e2 ~ U(-1/2, 1/2)`` (triangular on ``(-1, 1)``)."""
    if c >= 1:
        return Fraction(0)
    if c <= -1:
        return Fraction(1)
    if c >= 0:
        return (1 - c) ** 2 / 2
    return 1 - (1 + c) ** 2 / 2


@dataclass
class CounterexampleReport:
    p_x: Fraction
    p_x_prime: Fraction
    l1: Fraction
    ratio: Fraction  # |p(x) - p(x')| * 2 lambda / ||delta||_1
    lipschitz_bound_violated: bool
    independent_p_x: Fraction
    independent_p_x_prime: Fraction


def proposition1_counterexample() -> CounterexampleReport:
    """Fully correlated additive noise breaks the 1/(2 lambda) bound.

    Classifier ``f(z) = [z1 > 0.4 + z2]``, noise ``e1 = e2 ~ U(-1/2, 1/2)``,
    points ``x = (0.8, 0.2)`` and ``x' = (0.6, 0.4)``. Along the correlated
    line ``z1 - z2`` is constant, so each expectation is an interval length.
    The same points under independent noise are reported for contrast.
    """
    lam = Fraction(1, 2)
    w = (Fraction(1), Fraction(-1))
    b = Fraction(2, 5)
    x = (Fraction(4, 5), Fraction(1, 5))
    xp = (Fraction(3, 5), Fraction(2, 5))

    def p_corr(pt):
        # w . (pt + e * 1) > b  <=>  (w . 1) e > b - w . pt
        return _interval_prob(sum(w), b - sum(wi * xi for wi, xi in zip(w, pt)), lam)

    def p_indep(pt):
        return _diff_tail(b - (pt[0] - pt[1]))

    p_x, p_xp = p_corr(x), p_corr(xp)
    l1 = sum(abs(a - c) for a, c in zip(x, xp))
    ratio = abs(p_x - p_xp) * 2 * lam / l1
    return CounterexampleReport(p_x, p_xp, l1, ratio, ratio > 1, p_indep(x), p_indep(xp))


# --- per-coordinate and structural checks ------------------------------------------


@dataclass
class FlipReport:
    per_coordinate: list[Fraction]
    expected: list[Fraction]
    vector_fraction: Fraction
    union_bound: Fraction

    @property
    def exact(self) -> bool:
        return self.per_coordinate == self.expected

    @property
    def bound_holds(self) -> bool:
        return self.vector_fraction <= self.union_bound


def check_flip_probability(x: QuantizedPoint, xp: QuantizedPoint, spec: SplitSpec) -> FlipReport:
    """Fraction of split values that separate ``x_i`` from ``x'_i``, coordinate by coordinate.

    Expected: ``min(q|delta_i|, L)/L``, which is ``|delta_i|/(2 lambda)`` below saturation.
    """
    if x.q != xp.q or x.d != xp.d or x.q != spec.q or x.d != spec.d:
        raise ValueError("points and spec must share (d, q)")
    j = np.arange(spec.L)
    per, exp = [], []
    for a, b in zip(x.levels, xp.levels):
        diff = noisy_numerators(a, j, spec.q, spec.L) != noisy_numerators(b, j, spec.q, spec.L)
        per.append(Fraction(int(diff.sum()), spec.L))
        exp.append(Fraction(min(abs(a - b), spec.L), spec.L))
    rows = (j[:, None] + spec.offsets()[None, :]) % spec.L
    nx = noisy_numerators(x.as_array()[None, :], rows, spec.q, spec.L)
    nxp = noisy_numerators(xp.as_array()[None, :], rows, spec.q, spec.L)
    vec = Fraction(int(np.any(nx != nxp, axis=1).sum()), spec.L)
    bound = min(Fraction(x.l1_levels(xp), spec.L), Fraction(1))
    return FlipReport(per, exp, vec, bound)


def check_union_bound(spec: SplitSpec, budget: int = DEFAULT_BUDGET) -> tuple[bool, int]:
    """For every grid pair, bases with ``x~ != x~'`` number at most ``q ||delta||_1``.

    Returns the verdict and the number of pairs checked.
    """
    pts = grid_points(spec.q, spec.d, budget)
    rows = (np.arange(spec.L)[:, None] + spec.offsets()[None, :]) % spec.L
    num = noisy_numerators(pts[:, None, :], rows[None, :, :], spec.q, spec.L)  # (n, L, d)
    ok = True
    for i in range(len(pts) - 1):
        differ = np.any(num[i + 1:] != num[i], axis=2).sum(axis=1)
        dist = np.abs(pts[i + 1:] - pts[i]).sum(axis=1)
        ok &= bool(np.all(differ <= dist))
    return ok, len(pts) * (len(pts) - 1) // 2


def check_marginal_pushforward(q: int, lam=Fraction(1, 2)) -> bool:
    """At ``lambda = 1/2``, ``g(x_i + eps_i)`` and ``x~_i`` have identical distributions.

    Additive offsets run over the ``q`` half-steps inside ``(-1/2, 1/2)``;
    splits over the ``L = q`` half-step positions. Both multisets are compared
    for every level.
    """
    lam = Fraction(lam)
    if lam != Fraction(1, 2):
        raise ValueError("the affine correspondence only holds at lambda = 1/2")
    offsets = [Fraction(2 * k + 1, 2 * q) - lam for k in range(q)]
    splits = [split_value(j, q) for j in range(q)]
    for a in range(q + 1):
        x = Fraction(a, q)
        additive = sorted(marginal_map_g(x + e, lam) for e in offsets)
        splitting = sorted(split_transform_simple([x] * q, splits, lam))
        if additive != splitting:
            return False
    return True


@dataclass
class DegenerateReport:
    degenerate_bases: int
    expected: int  # L - q
    fraction: Fraction
    expressivity_holds: bool | None  # None when no classifier was given


def check_degenerate_equal_splits(spec: SplitSpec, classifier: BaseClassifier | None = None,
                                  budget: int = DEFAULT_BUDGET) -> DegenerateReport:
    """Count base splits that push every coordinate past 1 (so ``x~ = 1/2``).

    With ``v = 0`` there are exactly ``L - q`` of them and the smoothed score
    is that constant share of ``f(1/2)`` plus at most ``q/L``; with other
    offsets the count can only be smaller.
    """
    if spec.L < spec.q:
        raise ValueError("degenerate splits need lambda >= 1/2")
    rows = (np.arange(spec.L)[:, None] + spec.offsets()[None, :]) % spec.L
    degenerate = int(np.all(rows >= spec.q, axis=1).sum())
    holds = None
    if classifier is not None:
        if any(spec.v):
            raise ValueError("the expressivity bound is stated for v = 0")
        pts = grid_points(spec.q, spec.d, budget)
        counts, total = grid_counts(classifier, pts, spec, "correlated", budget)
        centre = int(classifier.predict_batch(np.full((1, spec.d), 0.5))[0])
        const = np.zeros(classifier.num_classes, dtype=np.int64)
        const[centre] = degenerate
        # |k_c / L - const_c / L| <= q / L
        holds = bool(np.all(np.abs(counts - const[None, :]) <= spec.q))
    return DegenerateReport(degenerate, spec.L - spec.q, Fraction(degenerate, spec.L), holds)


def check_transform_agreement(q: int, lam) -> bool:
    """Two-interval and ceiling transforms agree on every (level, split) pair,
    and both agree with the integer path."""
    lam = Fraction(lam)
    L = 2 * lam * q
    if L.denominator != 1:
        raise ValueError(f"2*lambda*q = {L} is not an integer")
    L = int(L)
    levels = [Fraction(a, q) for a in range(q + 1)]
    for j in range(L):
        s = split_value(j, q)
        general = split_transform_general(levels, [s] * len(levels), lam)
        integer = noisy_numerators(np.arange(q + 1), j, q, L)
        if any(Fraction(int(n), 4 * q) != g for n, g in zip(integer, general)):
            return False
        if lam >= Fraction(1, 2):
            simple = split_transform_simple(levels, [s] * len(levels), lam)
            if any(g != t for g, t in zip(general, simple)):
                return False
    return True


def random_table_sweep(q: int, L: int, d: int, trials: int, seed: int, num_classes: int = 3,
                       joint: str = "correlated") -> list[tuple[int, GridReport]]:
    """Seeded random table classifiers checked on the whole grid; returns ``(seed, report)``."""
    spec = SplitSpec.generate(q, L, d, seed=seed)
    out = []
    for t in range(trials):
        table_seed = seed * 100_003 + t
        clf = TableClassifier.random(q, d, num_classes, table_seed)
        out.append((table_seed, verify_lipschitz_grid(clf, spec, joint)))
    return out
