"""Paired significance testing for per-query metric values.

The comparison pipeline checks the normality of the per-query differences
with the Shapiro-Wilk test (the AS R94 approximation, valid for sample sizes
3 through 5000).  Normal-looking differences get a one-sided paired t-test,
anything else a one-sided Wilcoxon signed-rank test with zero differences
discarded and tied absolute differences sharing average ranks.  Families of
comparisons are corrected with the Holm-Bonferroni step-down rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import groupby

import numpy as np
from scipy.special import ndtr, ndtri, stdtr

from .metrics import MetricResult


class DegenerateSampleError(ValueError):
    """The sample has no variation, so the requested test is undefined."""


class MismatchedQueriesError(ValueError):
    """The two results cover different query sets."""


@dataclass(frozen=True)
class PairedSample:
    """Two aligned lists of per-query values; index i refers to the same query."""

    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self) -> None:
        a = tuple(float(v) for v in self.a)
        b = tuple(float(v) for v in self.b)
        if len(a) != len(b):
            raise ValueError(f"samples differ in length: {len(a)} vs {len(b)}")
        if len(a) < 3:
            raise ValueError("paired samples need at least 3 observations")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def differences(self) -> np.ndarray:
        return np.asarray(self.a) - np.asarray(self.b)


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    p_value: float
    test_used: str
    significant: bool


# polynomial coefficients of the AS R94 weight and p-value approximations,
# in ascending powers
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)


def _polyval_ascending(coeffs, x: float) -> float:
    return sum(c * x**i for i, c in enumerate(coeffs))


def shapiro_wilk(sample) -> tuple[float, float]:
    """Shapiro-Wilk W and p-value for 3 <= n <= 5000 observations."""
    y = np.sort(np.asarray(sample, dtype=np.float64))
    n = y.size
    if n < 3 or n > 5000:
        raise ValueError(f"sample size {n} outside the supported range [3, 5000]")
    if y[0] == y[-1]:
        raise DegenerateSampleError("all values identical, W is undefined")

    # Blom normal scores and the Royston weight corrections
    m = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    m_sq = float(np.sum(m * m))
    weights = np.empty(n)
    if n == 3:
        weights[0], weights[1], weights[2] = -math.sqrt(0.5), 0.0, math.sqrt(0.5)
    else:
        rsn = 1.0 / math.sqrt(n)
        w_last = _polyval_ascending(_C1, rsn) + m[-1] / math.sqrt(m_sq)
        weights[-1], weights[0] = w_last, -w_last
        if n > 5:
            w_last2 = _polyval_ascending(_C2, rsn) + m[-2] / math.sqrt(m_sq)
            weights[-2], weights[1] = w_last2, -w_last2
            tail = 2
            phi = (m_sq - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (
                1 - 2 * w_last**2 - 2 * w_last2**2
            )
        else:
            tail = 1
            phi = (m_sq - 2 * m[-1] ** 2) / (1 - 2 * w_last**2)
        weights[tail : n - tail] = m[tail : n - tail] / math.sqrt(phi)

    w_stat = float(np.sum(weights * y)) ** 2 / float(np.sum((y - y.mean()) ** 2))
    w_stat = min(w_stat, 1.0)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w_stat)) - math.asin(math.sqrt(0.75)))
        return w_stat, min(max(p, 0.0), 1.0)
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        mu = 0.5440 - 0.39978 * n + 0.025054 * n**2 - 0.0006714 * n**3
        sigma = math.exp(1.3822 - 0.77857 * n + 0.062767 * n**2 - 0.0020322 * n**3)
        z = (-math.log(gamma - math.log1p(-w_stat)) - mu) / sigma
    else:
        log_n = math.log(n)
        mu = -1.5861 - 0.31082 * log_n - 0.083751 * log_n**2 + 0.0038915 * log_n**3
        sigma = math.exp(-0.4803 - 0.082676 * log_n + 0.0030302 * log_n**2)
        z = (math.log1p(-w_stat) - mu) / sigma
    return w_stat, float(1.0 - ndtr(z))


def paired_t_test(
    sample: PairedSample, alternative: str = "two_sided", alpha: float = 0.05
) -> TestOutcome:
    """Paired Student t-test on the differences a - b."""
    if alternative not in ("two_sided", "greater"):
        raise ValueError(f"unknown alternative {alternative!r}")
    diffs = sample.differences()
    n = diffs.size
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        raise DegenerateSampleError("differences have zero variance")
    t = float(diffs.mean()) / (sd / math.sqrt(n))
    df = n - 1
    if alternative == "greater":
        p = float(stdtr(df, -t))
    else:
        p = float(2.0 * stdtr(df, -abs(t)))
    return TestOutcome(statistic=t, p_value=min(p, 1.0), test_used="t_test", significant=p < alpha)


def _signed_ranks(diffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks of |d| for the nonzero differences, plus their signs."""
    nonzero = diffs[diffs != 0.0]
    if nonzero.size == 0:
        raise DegenerateSampleError("all differences are zero")
    magnitudes = np.abs(nonzero)
    order = np.argsort(magnitudes, kind="stable")
    ranks = np.empty(nonzero.size)
    position = 1
    for _, group in groupby(order, key=lambda i: magnitudes[i]):
        members = list(group)
        mean_rank = position + (len(members) - 1) / 2.0
        for i in members:
            ranks[i] = mean_rank
        position += len(members)
    return ranks, np.sign(nonzero)


def _exact_upper_tail(ranks: np.ndarray, observed: float) -> float:
    """P(W+ >= observed) over all equally likely sign assignments of ranks.

    Counts are convolved over doubled ranks so tied (half-integer) average
    ranks stay exact integers.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total - r, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
    # average ranks are multiples of 0.5, so 2*observed is an exact integer
    threshold = int(round(2 * observed))
    tail = sum(counts[threshold:])
    return tail / float(2 ** len(doubled))


def wilcoxon_signed_rank(
    sample: PairedSample, alternative: str = "greater", alpha: float = 0.05
) -> TestOutcome:
    """One-sided Wilcoxon signed-rank test that a - b is positive.

    Zero differences are discarded; ties share average ranks.  The exact
    null distribution is used for up to 20 nonzero differences, a normal
    approximation with continuity and tie corrections beyond that.
    """
    if alternative != "greater":
        raise ValueError("only the 'greater' alternative is supported")
    ranks, signs = _signed_ranks(sample.differences())
    w_plus = float(np.sum(ranks[signs > 0]))
    n = ranks.size
    if n <= 20:
        p = _exact_upper_tail(ranks, w_plus)
    else:
        mean = n * (n + 1) / 4.0
        variance = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        variance -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        z = (w_plus - 0.5 - mean) / math.sqrt(variance)
        p = float(1.0 - ndtr(z))
    return TestOutcome(
        statistic=w_plus, p_value=min(p, 1.0), test_used="wilcoxon", significant=p < alpha
    )


def holm_bonferroni(p_values, alpha: float) -> list[bool]:
    """Step-down rejection decisions, reported in input order."""
    ps = [float(p) for p in p_values]
    if any(not 0.0 <= p <= 1.0 for p in ps):
        raise ValueError("p-values must lie in [0, 1]")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    m = len(ps)
    decisions = [False] * m
    order = sorted(range(m), key=lambda i: ps[i])
    for step, i in enumerate(order):
        if ps[i] <= alpha / (m - step):
            decisions[i] = True
        else:
            break
    return decisions


def compare_systems(
    baseline: MetricResult, treatment: MetricResult, alpha: float = 0.05
) -> TestOutcome:
    """Is the treatment better than the baseline on the shared query set?

    Runs Shapiro-Wilk on the per-query differences; when normality is not
    rejected at ``alpha`` the one-sided paired t-test decides, otherwise the
    one-sided Wilcoxon.
    """
    base_queries = baseline.query_ids()
    if base_queries != treatment.query_ids():
        raise MismatchedQueriesError("baseline and treatment cover different query sets")
    sample = PairedSample(
        a=tuple(treatment.per_query[q] for q in base_queries),
        b=tuple(baseline.per_query[q] for q in base_queries),
    )
    diffs = sample.differences()
    if np.all(diffs == diffs[0]):
        raise DegenerateSampleError("per-query differences are constant")
    _, normality_p = shapiro_wilk(diffs)
    if normality_p > alpha:
        return paired_t_test(sample, alternative="greater", alpha=alpha)
    return wilcoxon_signed_rank(sample, alternative="greater", alpha=alpha)
