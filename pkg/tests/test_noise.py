import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dssn.noise import (
    ConfigError,
    NoiseKind,
    NoiseModel,
    QuantizedPoint,
    SplitSpec,
    enumerate_split_bases,
    lambda_to_sigma,
    make_offset_vector,
    marginal_map_g,
    noisy_numerators,
    quantize_lambda,
    reachable_numerators,
    sample_noisy,
    sample_split_independent,
    sigma_to_lambda,
    split_transform_general,
    split_transform_simple,
    split_value,
    splits_from_base,
    uniform_additive_sample,
)


def interval_midpoint(x, s, lam):
    """Reference: cut [0,1] at s + 2*lam*n and return the midpoint of x's piece (x <= cut goes low)."""
    cuts = [F(0)]
    c = F(s)
    while c > 0:
        c -= 2 * lam
    c += 2 * lam
    while c < 1:
        cuts.append(c)
        c += 2 * lam
    cuts.append(F(1))
    for lo, hi in zip(cuts, cuts[1:]):
        if lo < x <= hi or (x == 0 and lo == 0):
            return (lo + hi) / 2
    raise AssertionError("unreachable")


# --- offsets ------------------------------------------------------------------------


def test_offsets_single_residue():
    assert make_offset_vector("mt19937-v1", 0, 3, 1) == (0, 0, 0)


def test_offsets_deterministic():
    assert make_offset_vector("mt19937-v1", 0, 4, 6) == make_offset_vector("mt19937-v1", 0, 4, 6)


def test_offsets_match_mersenne_twister():
    expected = np.random.RandomState(0).randint(0, 6, 4)
    assert make_offset_vector("mt19937-v1", 0, 4, 6) == tuple(int(a) for a in expected)


def test_offsets_uniform_chi_square():
    v = np.array(make_offset_vector("mt19937-v1", 0, 1000, 6))
    freq = np.bincount(v, minlength=6)
    sd = math.sqrt(1000 * (1 / 6) * (5 / 6))
    assert np.all(np.abs(freq - 1000 / 6) <= 5 * sd)
    assert stats.chisquare(freq).pvalue > 1e-4


def test_unknown_generator():
    with pytest.raises(ConfigError, match="known"):
        make_offset_vector("lcg-v0", 0, 2, 4)


@pytest.mark.parametrize("d, L", [(0, 3), (2, 0)])
def test_offsets_reject_bad_shape(d, L):
    with pytest.raises(ConfigError):
        make_offset_vector("mt19937-v1", 0, d, L)


@given(st.sampled_from(["mt19937-v1", "pcg64-v1", "zeros-v1"]), st.integers(0, 2**31 - 1),
       st.integers(1, 20), st.integers(1, 50))
def test_offsets_in_range_and_pure(gen, seed, d, L):
    v = make_offset_vector(gen, seed, d, L)
    assert len(v) == d and all(0 <= a < L for a in v)
    assert v == make_offset_vector(gen, seed, d, L)


def test_split_spec_rejects_offsets_out_of_range():
    with pytest.raises(ConfigError):
        SplitSpec(L=3, q=2, v=(0, 3))


# --- points and split bases ------------------------------------------------------------


def test_point_validation():
    with pytest.raises(ValueError):
        QuantizedPoint((0, 5), 4)
    p = QuantizedPoint((1, 3), 4)
    assert p.values() == [F(1, 4), F(3, 4)]
    assert p.l1_levels(QuantizedPoint((4, 0), 4)) == 6


def test_enumerate_bases():
    assert enumerate_split_bases(1) == [0]
    assert [split_value(j, 2) for j in enumerate_split_bases(2)] == [F(1, 4), F(3, 4)]
    assert [split_value(j, 4) for j in enumerate_split_bases(5)] == [F(k, 8) for k in (1, 3, 5, 7, 9)]


def test_splits_from_base_examples():
    assert splits_from_base(0, SplitSpec(3, 2, (0, 0))).idx == (0, 0)
    assert splits_from_base(2, SplitSpec(3, 2, (1, 2))).idx == (0, 1)
    with pytest.raises(IndexError):
        splits_from_base(3, SplitSpec(3, 2, (1, 2)))


@given(st.integers(1, 40), st.integers(1, 6), st.integers(0, 1000))
def test_permutation_property(L, d, seed):
    spec = SplitSpec.generate(4, L, d, seed=seed)
    cols = np.array([splits_from_base(b, spec).idx for b in range(L)])
    for i in range(d):
        assert sorted(cols[:, i]) == list(range(L))


@given(st.integers(1, 30), st.integers(1, 40))
def test_split_vector_on_half_steps(q, L):
    spec = SplitSpec.generate(q, L, 3, seed=L)
    for b in range(L):
        for s in splits_from_base(b, spec).values():
            assert (s * 2 * q).denominator == 1 and (s * 2 * q).numerator % 2 == 1
            assert F(1, 2 * q) <= s <= spec.lam * 2 - F(1, 2 * q)


# --- transforms ---------------------------------------------------------------------------


def test_simple_transform_examples():
    assert split_transform_simple([F(1, 4)], [F(7, 8)])[0] == F(7, 16)
    assert split_transform_simple([F(3, 5)], [F(1, 2)])[0] == F(3, 4)
    for x in (0, F(1, 3), 1):
        assert split_transform_simple([x], [F(6, 5)])[0] == F(1, 2)


def test_simple_transform_rejects_small_lambda():
    with pytest.raises(ValueError, match="general"):
        split_transform_simple([0.3], [0.2], lam=F(2, 5))


def test_general_transform_examples():
    assert split_transform_general([F(9, 20)], [F(1, 10)], F(1, 5))[0] == F(3, 10)
    assert split_transform_general([F(1, 20)], [F(1, 10)], F(1, 5))[0] == F(1, 20)
    g = split_transform_general([F(3, 10)], [F(4, 5)], F(3, 5))[0]
    assert g == F(2, 5) == split_transform_simple([F(3, 10)], [F(4, 5)])[0]


@given(st.fractions(0, 1), st.fractions(F(1, 100), 3), st.data())
def test_general_transform_is_interval_midpoint(x, lam, data):
    # a cut landing exactly on x is the measure-zero boundary case
    s = data.draw(st.fractions(0, 2 * lam).filter(lambda s: ((x - s) / (2 * lam)).denominator != 1))
    assert split_transform_general([x], [s], lam)[0] == interval_midpoint(x, s, lam)


@given(st.fractions(0, 1), st.fractions(F(1, 2), 3), st.data())
def test_general_equals_simple_above_half(x, lam, data):
    s = data.draw(st.fractions(0, 2 * lam).filter(lambda s: ((x - s) / (2 * lam)).denominator != 1))
    assert split_transform_general([x], [s], lam)[0] == split_transform_simple([x], [s], lam)[0]


def test_cut_exactly_at_zero_is_a_boundary_case():
    # s = 2*lambda puts a cut on 0; only the ceiling form sees it, and half-step splits never do this
    assert split_transform_general([F(0)], [F(1)], F(1, 2))[0] == 0
    assert split_transform_simple([F(0)], [F(1)])[0] == F(1, 2)


def test_small_lambda_limit_returns_x():
    lam = F(1, 10**6)
    for x in (F(1, 3), F(1, 2), F(7, 9)):
        out = split_transform_general([x], [lam], lam)[0]
        assert abs(out - x) <= 2 * lam


@given(st.integers(1, 12), st.integers(1, 30), st.data())
def test_integer_path_matches_general(q, L, data):
    a = data.draw(st.integers(0, q))
    j = data.draw(st.integers(0, L - 1))
    lam = F(L, 2 * q)
    expected = split_transform_general([F(a, q)], [split_value(j, q)], lam)[0]
    assert F(int(noisy_numerators(a, j, q, L)), 4 * q) == expected


@given(st.integers(1, 12), st.integers(1, 30))
def test_reachable_values_in_unit_interval(q, L):
    r = reachable_numerators(q, L)
    assert r.min() >= 0 and r.max() <= 4 * q
    if L > q:
        assert 2 * q in r  # the no-information value 1/2


# --- sampling -------------------------------------------------------------------------------


def test_independent_single_split():
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert sample_split_independent(rng, 5, F(1, 8), q=4).idx == (0,) * 5


def test_independent_marginals_and_joint():
    rng = np.random.default_rng(1)
    n, L = 100_000, 6
    idx = np.array([sample_split_independent(rng, 2, F(3, 4), q=4).idx for _ in range(n // 10)])
    idx = np.vstack([idx, rng.integers(0, L, size=(n - len(idx), 2))])  # same law, cheaper
    sd = math.sqrt(n * (1 / L) * (1 - 1 / L))
    for i in range(2):
        freq = np.bincount(idx[:, i], minlength=L)
        assert np.all(np.abs(freq - n / L) <= 5 * sd)
    table = np.zeros((L, L), dtype=int)
    np.add.at(table, (idx[:, 0], idx[:, 1]), 1)
    assert stats.chi2_contingency(table).pvalue > 1e-4


def test_sample_noisy_independent_marginals():
    spec = SplitSpec.generate(4, 6, 2, seed=3)
    rng = np.random.default_rng(2)
    levels = np.tile([1, 3], (60_000, 1))
    out = sample_noisy(levels, NoiseModel(NoiseKind.INDEPENDENT_SSN, spec), rng)
    for i, a in enumerate((1, 3)):
        values, freq = np.unique(out[:, i], return_counts=True)
        expected = np.unique(noisy_numerators(a, np.arange(6), 4, 6), return_counts=True)
        assert np.array_equal(values * 16, expected[0])
        p = expected[1] / 6
        sd = np.sqrt(60_000 * p * (1 - p))
        assert np.all(np.abs(freq - 60_000 * p) <= 5 * sd)


def test_continuous_split_sample_range():
    s = sample_split_independent(np.random.default_rng(0), 1000, 0.75)
    assert s.min() >= 0 and s.max() < 1.5


def test_uniform_additive_sample():
    rng = np.random.default_rng(4)
    x = np.array([0.2, 0.9])
    out = np.array([uniform_additive_sample(rng, x, 0.5) for _ in range(100_000)])
    assert np.all(out >= x - 0.5) and np.all(out <= x + 0.5)
    sd = 0.5 / math.sqrt(3) / math.sqrt(len(out))
    assert np.all(np.abs(out.mean(axis=0) - x) <= 5 * sd)
    assert np.allclose(uniform_additive_sample(rng, x, 1e-300), x)


# --- marginal map and lambda conversions --------------------------------------------------


def test_marginal_map_examples():
    assert marginal_map_g(F(0), F(1, 2)) == F(1, 4)
    assert marginal_map_g(F(0), F(3, 2)) == F(1, 2)
    assert marginal_map_g(F(8, 5), F(3, 2)) == F(11, 20)
    with pytest.raises(ValueError):
        marginal_map_g(F(0), F(2, 5))


@given(st.fractions(F(-1, 2), F(3, 2)))
def test_marginal_map_affine_at_half(z):
    assert marginal_map_g(z, F(1, 2)) == z / 2 + F(1, 4)


def test_quantize_lambda_examples():
    assert quantize_lambda(0.5, 255) == F(1, 2)
    lam = sigma_to_lambda(0.15)
    assert quantize_lambda(lam, 255) == F(132, 510)
    with pytest.raises(ValueError):
        quantize_lambda(0.001, 255)


@given(st.floats(0.01, 10), st.integers(1, 300))
def test_quantize_lambda_never_rounds_up_much(lam, q):
    if 2 * lam * q < 1:
        return
    lq = quantize_lambda(lam, q)
    assert (lq * 2 * q).denominator == 1
    assert float(lq) <= lam * (1 + 1e-9)
    assert float(lq) > lam - 1 / (2 * q)


def test_sigma_conversion():
    assert sigma_to_lambda(0.5) == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    assert sigma_to_lambda(1 / math.sqrt(3)) == pytest.approx(1.0, abs=1e-15)


@given(st.floats(1e-6, 1e3))
def test_sigma_round_trip(lam):
    back = sigma_to_lambda(lambda_to_sigma(lam))
    assert abs(back - lam) <= math.ulp(lam)


def test_noise_model_requires_spec():
    with pytest.raises(ConfigError):
        NoiseModel(NoiseKind.DSSN)
    with pytest.raises(ConfigError):
        NoiseModel(NoiseKind.UNIFORM_ADDITIVE)
    assert NoiseModel(NoiseKind.UNIFORM_ADDITIVE, None, 0.3).lam == 0.3
