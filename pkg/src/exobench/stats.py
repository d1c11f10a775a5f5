"""Paired nonparametric tests for small within-subject condition studies.

Friedman with tie correction, exact-by-default Wilcoxon signed-rank,
Benjamini-Hochberg step-up adjustment, Z-based effect sizes, and
Hodges-Lehmann shift estimates with exact-rank confidence intervals.
Exact p-values come from the full signed-rank null distribution, built by
dynamic programming, which stays cheap through n = 25.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as sps

EXACT_N_MAX = 25


class EmptySet(ValueError):
    pass


class DegenerateMatrix(ValueError):
    pass


class AllZeroDifferences(ValueError):
    pass


class TooFewPairs(ValueError):
    pass


class InvalidP(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Descriptives:
    n: int
    mean: float
    sd: float
    median: float
    q1: float
    q3: float
    iqr: float
    minimum: float
    maximum: float
    quartile_method: str = "linear_interpolation"


def describe(values) -> Descriptives:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) == 0:
        raise EmptySet("describe expects a non-empty 1-D array")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return Descriptives(
        n=len(v),
        mean=float(np.mean(v)),
        sd=float(np.std(v, ddof=1)) if len(v) > 1 else 0.0,
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        iqr=float(q3 - q1),
        minimum=float(np.min(v)),
        maximum=float(np.max(v)),
    )


@dataclass(frozen=True, slots=True)
class FriedmanResult:
    statistic: float
    df: int
    p_value: float
    n_subjects: int
    n_conditions: int
    mean_ranks: tuple[float, ...]
    tie_correction: float


def chi2_survival(statistic: float, df: int) -> float:
    """Upper-tail probability of the chi-square reference distribution."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if statistic < 0:
        raise ValueError("statistic must be non-negative")
    return float(sps.chi2.sf(statistic, df))


def friedman_test(data) -> FriedmanResult:
    """Friedman chi-square over an (n subjects x k conditions) block.

    Within-subject average ranks; the raw statistic
    12/(n k (k+1)) * sum(R_j^2) - 3 n (k+1) is divided by the tie
    correction C = 1 - sum(t^3 - t) / (n k (k^2 - 1)).  A block where
    every subject is fully tied carries no ordering information and comes
    back as statistic 0, p 1 rather than an error.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise DegenerateMatrix("expected a 2-D subjects-by-conditions array")
    n, k = x.shape
    if n < 2 or k < 3:
        raise DegenerateMatrix(f"need >= 2 subjects and >= 3 conditions, got {n} x {k}")
    if not np.isfinite(x).all():
        raise DegenerateMatrix("non-finite measurement in block")
    ranks = np.vstack([sps.rankdata(row) for row in x])
    col_sums = ranks.sum(axis=0)
    stat = 12.0 / (n * k * (k + 1)) * float(np.sum(col_sums ** 2)) - 3.0 * n * (k + 1)
    tie_sum = 0.0
    for row in x:
        _, counts = np.unique(row, return_counts=True)
        tie_sum += float(np.sum(counts ** 3 - counts))
    correction = 1.0 - tie_sum / (n * k * (k * k - 1))
    if correction <= 0:
        stat_c = 0.0
        p = 1.0
    else:
        stat_c = stat / correction
        p = chi2_survival(stat_c, k - 1)
    return FriedmanResult(
        statistic=float(stat_c),
        df=k - 1,
        p_value=p,
        n_subjects=n,
        n_conditions=k,
        mean_ranks=tuple(float(c) / n for c in col_sums),
        tie_correction=float(correction),
    )


def _signed_rank_counts(doubled_ranks) -> np.ndarray:
    """Subset-sum counts over doubled ranks; index = 2 * W+, value = #subsets."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in doubled_ranks:
        # copy: the slices overlap and the sum must use pre-update values
        counts[r:] += counts[:-r].copy()
    return counts


@dataclass(frozen=True, slots=True)
class WilcoxonResult:
    w_plus: float
    w_minus: float
    n_used: int
    n_zeros_dropped: int
    z: float
    p_value: float
    method: str  # "exact" or "normal"


def wilcoxon_signed_rank(x, y, mode: str = "auto") -> WilcoxonResult:
    """Two-sided paired signed-rank test.

    Zero differences are dropped (and counted); tied absolute differences
    get average ranks.  mode "auto" enumerates the exact null whenever
    n <= 25 and falls back to the normal approximation above; "exact" and
    "normal" force the choice.  The approximation is
    Z = (W+ - n(n+1)/4) / sqrt(n(n+1)(2n+1)/24) with no continuity
    correction; Z is reported in every mode so effect sizes are always
    available.
    """
    if mode not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown mode {mode!r}")
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("x and y must be 1-D and paired")
    d = a - b
    if not np.isfinite(d).all():
        raise ValueError("non-finite difference")
    nz = d[d != 0]
    n_zeros = len(d) - len(nz)
    n = len(nz)
    if n == 0:
        raise AllZeroDifferences("every paired difference is zero")
    if n < 2:
        raise TooFewPairs(f"only {n} non-zero difference")
    ranks = sps.rankdata(np.abs(nz))
    w_plus = float(ranks[nz > 0].sum())
    w_minus = float(ranks[nz < 0].sum())
    mean_w = n * (n + 1) / 4.0
    sd_w = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0)
    z = (w_plus - mean_w) / sd_w
    use_exact = n <= EXACT_N_MAX if mode == "auto" else mode == "exact"
    if use_exact:
        if n > EXACT_N_MAX:
            raise ValueError(f"exact mode supported up to n = {EXACT_N_MAX}")
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _signed_rank_counts(doubled)
        denom = 2.0 ** n
        w2 = int(round(2 * w_plus))
        p_le = counts[: w2 + 1].sum() / denom
        p_ge = counts[w2:].sum() / denom
        p = min(1.0, 2.0 * min(p_le, p_ge))
        method = "exact"
    else:
        p = float(2.0 * sps.norm.sf(abs(z)))
        method = "normal"
    return WilcoxonResult(w_plus, w_minus, n, n_zeros, float(z), float(p), method)


@dataclass(frozen=True, slots=True)
class EffectSize:
    r: float
    band: str
    n_effective: int
    convention: str


def effect_size_r(z: float, n_pairs: int,
                  convention: str = "total_observations") -> EffectSize:
    """r = |Z| / sqrt(N).

    Under "total_observations" (default) N counts both members of every
    pair, N = 2 * n_pairs; under "pairs" N = n_pairs.  Bands: small at
    0.1, medium at 0.3, large at 0.5 and above.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    if convention == "total_observations":
        n_eff = 2 * n_pairs
    elif convention == "pairs":
        n_eff = n_pairs
    else:
        raise ValueError(f"unknown convention {convention!r}")
    r = abs(z) / math.sqrt(n_eff)
    return EffectSize(r=r, band=effect_band(r), n_effective=n_eff,
                      convention=convention)


def effect_band(r: float) -> str:
    r = abs(r)
    if r < 0.1:
        return "negligible"
    if r < 0.3:
        return "small"
    if r < 0.5:
        return "medium"
    return "large"


def benjamini_hochberg(p_values) -> np.ndarray:
    """Step-up FDR adjustment; returns adjusted p-values in input order.

    adjusted_(i) = min over j >= i of p_(j) * m / j on the ascending order
    statistic, capped at 1.
    """
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1 or len(p) == 0:
        raise InvalidP("expected a non-empty 1-D array of p-values")
    if not np.isfinite(p).all() or ((p < 0) | (p > 1)).any():
        raise InvalidP("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 1.0
    for i in range(m - 1, -1, -1):
        rank = i + 1
        running = min(running, p[order[i]] * m / rank)
        adjusted[order[i]] = running
    return adjusted


@dataclass(frozen=True, slots=True)
class HodgesLehmann:
    point: float
    ci_low: float
    ci_high: float
    confidence: float
    achieved_confidence: float
    low_power: bool


def walsh_averages(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    n = len(d)
    pairs = [(d[i] + d[j]) / 2.0 for i in range(n) for j in range(i, n)]
    return np.sort(np.array(pairs))


def hodges_lehmann_ci(differences, confidence: float = 0.95) -> HodgesLehmann:
    """Median of Walsh averages with the exact signed-rank interval.

    The interval takes the (c+1)-th smallest and largest Walsh average
    where c is the largest signed-rank value with P(W <= c) <= alpha/2
    under the untied exact null.  When not even c = 0 qualifies (n < 6 at
    95%), the full data range is returned flagged low_power.
    """
    d = np.asarray(differences, dtype=float)
    if d.ndim != 1 or len(d) == 0:
        raise TooFewPairs("no differences")
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    n = len(d)
    if n > EXACT_N_MAX:
        raise ValueError(f"exact interval supported up to n = {EXACT_N_MAX}")
    walsh = walsh_averages(d)
    point = float(np.median(walsh))
    alpha = 1.0 - confidence
    counts = _signed_rank_counts([2 * r for r in range(1, n + 1)])
    denom = 2.0 ** n

    def cdf_at(c: int) -> float:
        return counts[: 2 * c + 1].sum() / denom

    c = -1
    while cdf_at(c + 1) <= alpha / 2.0:
        c += 1
    m = len(walsh)
    if c < 0:
        return HodgesLehmann(point, float(walsh[0]), float(walsh[-1]),
                             confidence, float(1.0 - 2.0 / denom), True)
    # Interval is (W_(c+1), W_(M-c)) in 1-based order statistics.
    lo = float(walsh[c])
    hi = float(walsh[m - c - 1])
    achieved = 1.0 - 2.0 * cdf_at(c)
    return HodgesLehmann(point, lo, hi, confidence, float(achieved), False)


@dataclass(frozen=True, slots=True)
class TestResult:
    """One paired comparison, fully reported."""

    label: str
    n_pairs: int
    w_plus: float
    z: float
    p_raw: float
    p_fdr: float | None
    effect_r: float
    effect_band: str
    median_delta: float
    ci_low: float
    ci_high: float
    ci_low_power: bool
    n_zeros_dropped: int
    method: str


def paired_comparison(x, y, label: str = "") -> TestResult:
    """Wilcoxon + Hodges-Lehmann + effect size in one record; p_fdr is
    filled in later once the whole comparison family is known."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    res = wilcoxon_signed_rank(a, b)
    eff = effect_size_r(res.z, len(a))
    hl = hodges_lehmann_ci(a - b)
    return TestResult(
        label=label,
        n_pairs=len(a),
        w_plus=res.w_plus,
        z=res.z,
        p_raw=res.p_value,
        p_fdr=None,
        effect_r=eff.r,
        effect_band=eff.band,
        median_delta=hl.point,
        ci_low=hl.ci_low,
        ci_high=hl.ci_high,
        ci_low_power=hl.low_power,
        n_zeros_dropped=res.n_zeros_dropped,
        method=res.method,
    )


def adjust_family(results: list[TestResult]) -> list[TestResult]:
    """Apply BH across one family of comparisons, returning updated records."""
    if not results:
        return []
    adjusted = benjamini_hochberg([r.p_raw for r in results])
    return [replace(r, p_fdr=float(p)) for r, p in zip(results, adjusted)]
