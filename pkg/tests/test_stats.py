import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from exobench.stats import (
    AllZeroDifferences,
    DegenerateMatrix,
    EmptySet,
    InvalidP,
    TooFewPairs,
    adjust_family,
    benjamini_hochberg,
    describe,
    effect_band,
    effect_size_r,
    friedman_test,
    hodges_lehmann_ci,
    paired_comparison,
    walsh_averages,
    wilcoxon_signed_rank,
)
from support import (EIGHT_OFF, EIGHT_ON, bh_adjust_oracle,
                     exact_wilcoxon_p, hodges_lehmann_oracle)


# ---------------------------------------------------------------------------
# Exact Wilcoxon against independent enumeration


def test_all_positive_n8_p_is_exact():
    res = wilcoxon_signed_rank(EIGHT_ON, EIGHT_OFF)
    assert res.method == "exact"
    assert res.p_value == 0.0078125  # 2 / 2^8, no tolerance
    assert res.w_plus == 36.0
    assert res.w_minus == 0.0


def test_single_smallest_rank_flip_doubles_p():
    # flip the sign of the pair with the smallest |difference|
    diffs = np.array(EIGHT_ON) - np.array(EIGHT_OFF)
    k = int(np.argmin(np.abs(diffs)))
    y = list(EIGHT_OFF)
    y[k] = EIGHT_ON[k] + (y[k] - EIGHT_ON[k]) * -1.0
    res = wilcoxon_signed_rank(EIGHT_ON, y)
    assert res.p_value == 0.015625  # 4 / 2^8


def test_exact_p_matches_enumeration_on_fixture():
    assert wilcoxon_signed_rank(EIGHT_ON, EIGHT_OFF).p_value == \
        pytest.approx(exact_wilcoxon_p(EIGHT_ON, EIGHT_OFF), abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(min_value=-6, max_value=6), min_size=4,
                max_size=11))
def test_exact_p_matches_enumeration(diffs):
    # integer-valued differences force frequent ties and zeros
    d = np.asarray(diffs, dtype=float)
    if np.count_nonzero(d) < 2:
        return
    x = d
    y = np.zeros_like(d)
    res = wilcoxon_signed_rank(x, y, mode="exact")
    assert res.p_value == pytest.approx(exact_wilcoxon_p(x, y), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-50, max_value=50,
                          allow_nan=False).filter(lambda v: abs(v) > 1e-6),
                min_size=3, max_size=10))
def test_negation_symmetry(diffs):
    x = np.asarray(diffs)
    y = np.zeros_like(x)
    fwd = wilcoxon_signed_rank(x, y)
    rev = wilcoxon_signed_rank(y, x)
    assert fwd.p_value == pytest.approx(rev.p_value, abs=1e-12)
    assert fwd.z == pytest.approx(-rev.z, abs=1e-12)
    assert fwd.w_plus == rev.w_minus


def test_zero_differences_dropped_and_counted():
    x = [1.0, 2.0, 3.0, 4.0, 4.0]
    y = [1.0, 1.0, 1.0, 1.0, 4.0]
    res = wilcoxon_signed_rank(x, y)
    assert res.n_used == 3
    assert res.n_zeros_dropped == 2


def test_all_zero_differences_raises():
    with pytest.raises(AllZeroDifferences):
        wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])


def test_single_nonzero_difference_raises():
    with pytest.raises(TooFewPairs):
        wilcoxon_signed_rank([1.0, 2.0], [1.0, 3.0])


def test_normal_mode_matches_z():
    res = wilcoxon_signed_rank(EIGHT_ON, EIGHT_OFF, mode="normal")
    assert res.method == "normal"
    assert res.p_value == pytest.approx(2 * sps.norm.sf(abs(res.z)), rel=1e-12)


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank(EIGHT_ON, EIGHT_OFF, mode="bootstrap")


# ---------------------------------------------------------------------------
# Z statistic and effect size anchors


def test_z_anchor_n8_all_positive():
    # W+ = 36, mean 18, sd sqrt(51); Z = 18 / sqrt(51)
    res = wilcoxon_signed_rank(EIGHT_ON, EIGHT_OFF)
    assert res.z == pytest.approx(18.0 / math.sqrt(51.0), abs=1e-12)
    assert res.z == pytest.approx(2.5205, abs=5e-5)


def test_effect_size_total_observations():
    eff = effect_size_r(2.5205, 8)
    assert eff.n_effective == 16
    assert eff.r == pytest.approx(2.5205 / 4.0, abs=1e-12)
    assert eff.r == pytest.approx(0.630, abs=0.005)
    assert eff.band == "large"


def test_effect_size_pairs_convention():
    eff = effect_size_r(2.0, 8, convention="pairs")
    assert eff.n_effective == 8
    assert eff.r == pytest.approx(2.0 / math.sqrt(8.0))


def test_effect_band_edges():
    assert effect_band(0.05) == "negligible"
    assert effect_band(0.1) == "small"
    assert effect_band(0.3) == "medium"
    assert effect_band(0.5) == "large"
    assert effect_band(-0.7) == "large"


def test_effect_size_rejects_bad_inputs():
    with pytest.raises(ValueError):
        effect_size_r(1.0, 0)
    with pytest.raises(ValueError):
        effect_size_r(1.0, 8, convention="median")


# ---------------------------------------------------------------------------
# Benjamini-Hochberg


def test_bh_two_small_one_large():
    adj = benjamini_hochberg([0.0078125, 0.0078125, 0.2])
    assert adj[0] == pytest.approx(0.01171875, abs=1e-4)
    assert adj[1] == pytest.approx(0.01171875, abs=1e-4)
    assert adj[2] == pytest.approx(0.2, abs=1e-12)


def test_bh_smallest_of_three_moderate():
    adj = benjamini_hochberg([0.0078125, 0.35, 0.6])
    assert adj[0] == pytest.approx(0.0234375, abs=1e-4)


def test_bh_smallest_of_three_with_large_companions():
    adj = benjamini_hochberg([0.015625, 0.5, 0.8])
    assert adj[0] == pytest.approx(0.046875, abs=1e-4)


def test_bh_single_p_unchanged():
    assert benjamini_hochberg([0.04])[0] == pytest.approx(0.04)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                min_size=1, max_size=12))
def test_bh_matches_oracle_and_invariants(p):
    adj = benjamini_hochberg(p)
    assert np.allclose(adj, bh_adjust_oracle(p), atol=1e-12)
    assert ((adj >= np.asarray(p) - 1e-12) & (adj <= 1.0 + 1e-12)).all()
    # adjustment preserves the ordering of the raw p-values
    order = np.argsort(p, kind="stable")
    assert (np.diff(adj[order]) >= -1e-12).all()


def test_bh_rejects_bad_p():
    with pytest.raises(InvalidP):
        benjamini_hochberg([])
    with pytest.raises(InvalidP):
        benjamini_hochberg([0.2, 1.4])
    with pytest.raises(InvalidP):
        benjamini_hochberg([0.2, float("nan")])


# ---------------------------------------------------------------------------
# Friedman


def test_friedman_perfect_ordering_is_16():
    block = [[1.0, 2.0, 3.0]] * 8
    res = friedman_test(np.asarray(block) + np.arange(8)[:, None] * 10)
    assert res.statistic == pytest.approx(16.0, abs=1e-12)
    assert res.df == 2
    assert res.p_value == pytest.approx(math.exp(-8.0), rel=1e-9)


def test_friedman_chi2_df2_survival_is_exp_half():
    for chi2 in (13.0, 12.3, 12.0, 10.3, 9.8, 6.3, 5.4):
        assert sps.chi2.sf(chi2, 2) == pytest.approx(math.exp(-chi2 / 2),
                                                     rel=1e-9)


def test_friedman_matches_scipy_when_untied():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.normal(size=(6, 4))
        ours = friedman_test(x)
        ref_stat, ref_p = sps.friedmanchisquare(*x.T)
        assert ours.statistic == pytest.approx(ref_stat, rel=1e-9)
        assert ours.p_value == pytest.approx(ref_p, rel=1e-9)
        assert ours.tie_correction == pytest.approx(1.0)


def test_friedman_tie_correction_hand_example():
    # ranks per row: (1.5, 1.5, 3), (1, 2, 3), (1, 2.5, 2.5)
    # raw = 25/6, C = 5/6, corrected statistic exactly 5
    block = [[5.0, 5.0, 8.0], [3.0, 4.0, 9.0], [6.0, 7.0, 7.0]]
    res = friedman_test(block)
    assert res.statistic == pytest.approx(5.0, abs=1e-12)
    assert res.tie_correction == pytest.approx(5.0 / 6.0, abs=1e-12)
    assert res.p_value == pytest.approx(math.exp(-2.5), rel=1e-9)


def test_friedman_all_tied_block_is_null_result():
    res = friedman_test([[2.0, 2.0, 2.0]] * 4)
    assert res.statistic == 0.0
    assert res.p_value == 1.0


def test_friedman_mean_ranks():
    res = friedman_test([[1.0, 2.0, 3.0]] * 5)
    assert res.mean_ranks == (1.0, 2.0, 3.0)


def test_friedman_shape_validation():
    with pytest.raises(DegenerateMatrix):
        friedman_test([1.0, 2.0, 3.0])
    with pytest.raises(DegenerateMatrix):
        friedman_test([[1.0, 2.0], [2.0, 1.0]])  # k = 2
    with pytest.raises(DegenerateMatrix):
        friedman_test([[1.0, 2.0, 3.0]])  # n = 1
    with pytest.raises(DegenerateMatrix):
        friedman_test([[1.0, 2.0, float("inf")], [1.0, 2.0, 3.0]])


# ---------------------------------------------------------------------------
# Hodges-Lehmann


def test_walsh_averages_count_and_content():
    w = walsh_averages([1.0, 3.0])
    assert list(w) == [1.0, 2.0, 3.0]


def test_hl_point_and_ci_against_oracle():
    diffs = np.array(EIGHT_ON) - np.array(EIGHT_OFF)
    res = hodges_lehmann_ci(diffs)
    point, lo, hi = hodges_lehmann_oracle(diffs)
    assert res.point == pytest.approx(point, abs=1e-12)
    assert res.ci_low == pytest.approx(lo, abs=1e-12)
    assert res.ci_high == pytest.approx(hi, abs=1e-12)
    assert not res.low_power
    assert lo <= point <= hi


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-100, max_value=100, allow_nan=False),
                min_size=6, max_size=10),
       st.sampled_from([0.90, 0.95]))
def test_hl_matches_oracle(diffs, confidence):
    res = hodges_lehmann_ci(diffs, confidence)
    point, lo, hi = hodges_lehmann_oracle(diffs, confidence)
    assert res.point == pytest.approx(point, abs=1e-9)
    assert res.ci_low == pytest.approx(lo, abs=1e-9)
    assert res.ci_high == pytest.approx(hi, abs=1e-9)


def test_hl_small_n_flags_low_power():
    res = hodges_lehmann_ci([1.0, 2.0, 3.0])
    assert res.low_power
    assert res.ci_low == 1.0 and res.ci_high == 3.0


def test_hl_validation():
    with pytest.raises(TooFewPairs):
        hodges_lehmann_ci([])
    with pytest.raises(ValueError):
        hodges_lehmann_ci([1.0, 2.0], confidence=1.0)


# ---------------------------------------------------------------------------
# Composite records


def test_paired_comparison_fields():
    res = paired_comparison(EIGHT_ON, EIGHT_OFF, label="on vs off")
    assert res.label == "on vs off"
    assert res.n_pairs == 8
    assert res.p_raw == 0.0078125
    assert res.p_fdr is None
    assert res.effect_r == pytest.approx(0.630, abs=0.005)
    assert res.median_delta > 0
    assert res.ci_low <= res.median_delta <= res.ci_high
    assert res.method == "exact"


def test_adjust_family_fills_p_fdr():
    fam = [
        paired_comparison(EIGHT_ON, EIGHT_OFF, label="a"),
        paired_comparison(EIGHT_OFF, EIGHT_ON, label="b"),
    ]
    adjusted = adjust_family(fam)
    raws = [r.p_raw for r in adjusted]
    assert [r.p_fdr for r in adjusted] == \
        pytest.approx(list(bh_adjust_oracle(raws)))
    assert adjust_family([]) == []


def test_describe_quartiles():
    d = describe([1.0, 2.0, 3.0, 4.0])
    assert d.n == 4
    assert d.median == 2.5
    assert d.q1 == 1.75 and d.q3 == 3.25
    assert d.iqr == pytest.approx(1.5)
    assert d.minimum == 1.0 and d.maximum == 4.0
    with pytest.raises(EmptySet):
        describe([])
