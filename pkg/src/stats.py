"""
Statistical primitives used by the analyses: exact and approximate
signed-rank tests, sign-flip permutation tests, t-tests and correlations.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

try:
    from .exceptions import DataValidationError, DegenerateInputError
except ImportError:
    from exceptions import DataValidationError, DegenerateInputError

logger = logging.getLogger(__name__)

ALTERNATIVES = ("two_sided", "greater", "less")

# Tolerance when comparing enumerated statistics against the observed one.
_TOL = 1e-9

MC_CHUNK_SIZE = 1000


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n_effective: int
    alternative: str
    note: str = ""

    __test__ = False  # not a pytest class

    def to_dict(self):
        return {
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "method": self.method,
            "n_effective": self.n_effective,
            "alternative": self.alternative,
            "note": self.note,
        }


def _check_alternative(alternative):
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")


def _combine_tails(p_greater, p_less, alternative):
    if alternative == "greater":
        return min(1.0, p_greater)
    if alternative == "less":
        return min(1.0, p_less)
    return min(1.0, 2.0 * min(p_greater, p_less))


def _as_array(values, name="values"):
    arr = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise DataValidationError(f"{name} contains non-finite entries")
    return arr


def wilcoxon_signed_rank(d, alternative="two_sided", exact_cutoff=12):
    """Wilcoxon signed-rank test on paired differences.

    Zeros are dropped and tied magnitudes get mid-ranks. Up to exact_cutoff
    non-zero differences the null distribution of W+ is enumerated over every
    sign assignment; above it a tie-corrected normal approximation with a 0.5
    continuity correction is used.

    Args:
        d: Paired differences
        alternative: "two_sided", "greater" (median > 0) or "less"
        exact_cutoff: Largest n for exhaustive enumeration

    Returns:
        TestResult: statistic is W+ (sum of ranks of positive differences)
    """
    _check_alternative(alternative)
    arr = _as_array(d, "differences")
    nonzero = arr[arr != 0]
    n = len(nonzero)
    if n == 0:
        raise DegenerateInputError("All differences are zero; signed-rank test undefined")

    ranks = sps.rankdata(np.abs(nonzero))
    w_plus = float(ranks[nonzero > 0].sum())
    dropped = len(arr) - n
    note = f"zeros dropped ({dropped}), ties mid-ranked"

    if n <= exact_cutoff:
        signs = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
        null = signs @ ranks
        p_greater = float(np.mean(null >= w_plus - _TOL))
        p_less = float(np.mean(null <= w_plus + _TOL))
        p_value = _combine_tails(p_greater, p_less, alternative)
        return TestResult(w_plus, p_value, "exact", n, alternative, note)

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    sd = np.sqrt(variance)

    if alternative == "greater":
        p_value = float(sps.norm.sf((w_plus - mean - 0.5) / sd))
    elif alternative == "less":
        p_value = float(sps.norm.cdf((w_plus - mean + 0.5) / sd))
    else:
        z = (abs(w_plus - mean) - 0.5) / sd
        p_value = min(1.0, float(2.0 * sps.norm.sf(z)))
    return TestResult(w_plus, p_value, "normal_approx", n, alternative, note + ", continuity corrected")


def _signed_sums(values):
    sums = np.zeros(1)
    for x in values:
        sums = np.concatenate([sums + x, sums - x])
    return sums


def _exact_sign_flip(arr, alternative):
    # Meet in the middle: every signed total is a + b with a from the first
    # half's signed sums and b from the second half's.
    n = len(arr)
    half = n // 2
    left = _signed_sums(arr[:half])
    right = np.sort(_signed_sums(arr[half:]))
    observed = float(arr.sum())
    tol = _TOL * max(1.0, float(np.abs(arr).sum()))
    total = float(2 ** n)

    at_least = len(right) - np.searchsorted(right, observed - left - tol, side="left")
    at_most = np.searchsorted(right, observed - left + tol, side="right")
    p_greater = float(at_least.sum()) / total
    p_less = float(at_most.sum()) / total
    return _combine_tails(p_greater, p_less, alternative)


def _monte_carlo_sign_flip(arr, alternative, n_perm, rng_seed):
    n = len(arr)
    observed = float(arr.mean())
    tol = _TOL * max(1.0, float(np.abs(arr).mean()))
    chunks = -(-n_perm // MC_CHUNK_SIZE)
    streams = np.random.SeedSequence(rng_seed).spawn(chunks)

    greater = less = 0
    remaining = n_perm
    for stream in streams:
        size = min(MC_CHUNK_SIZE, remaining)
        rng = np.random.default_rng(stream)
        signs = rng.integers(0, 2, size=(size, n)) * 2 - 1
        means = (signs * arr).mean(axis=1)
        greater += int(np.count_nonzero(means >= observed - tol))
        less += int(np.count_nonzero(means <= observed + tol))
        remaining -= size

    # add-one: the observed assignment counts as one draw of the null
    p_greater = (1 + greater) / (n_perm + 1)
    p_less = (1 + less) / (n_perm + 1)
    return _combine_tails(p_greater, p_less, alternative)


def permutation_sign_test(d, n_perm=10000, rng_seed=0, alternative="greater", exact_cutoff=20, method="auto"):
    """Sign-flip permutation test on the mean of d.

    Args:
        d: Values (typically paired differences)
        n_perm: Number of random sign assignments for the Monte-Carlo method
        rng_seed: Seed of the Monte-Carlo streams
        alternative: "greater" (default), "less" or "two_sided"
        exact_cutoff: Largest n for exhaustive enumeration under method "auto"
        method: "auto", "exact" or "monte_carlo"

    Returns:
        TestResult: statistic is mean(d)
    """
    _check_alternative(alternative)
    if n_perm < 1:
        raise ValueError(f"n_perm must be at least 1, got {n_perm}")
    if method not in ("auto", "exact", "monte_carlo"):
        raise ValueError(f"Unknown permutation method {method!r}")
    arr = _as_array(d)
    n = len(arr)
    if n == 0:
        raise DegenerateInputError("Permutation test needs at least one value")

    if method == "exact" or (method == "auto" and n <= exact_cutoff):
        p_value = _exact_sign_flip(arr, alternative)
        return TestResult(float(arr.mean()), p_value, "exact", n, alternative, f"all {2 ** n} sign assignments")

    p_value = _monte_carlo_sign_flip(arr, alternative, n_perm, rng_seed)
    return TestResult(
        float(arr.mean()),
        p_value,
        "monte_carlo",
        n,
        alternative,
        f"{n_perm} random sign assignments, seed {rng_seed}, add-one p-value",
    )


def _scipy_alternative(alternative):
    return "two-sided" if alternative == "two_sided" else alternative


def welch_t_test(a, b, alternative="two_sided"):
    """Two-sample t-test with unequal variances (Welch-Satterthwaite df)."""
    _check_alternative(alternative)
    a = _as_array(a, "a")
    b = _as_array(b, "b")
    if len(a) < 2 or len(b) < 2:
        raise DegenerateInputError("Welch test needs at least two values per group")
    if np.var(a, ddof=1) + np.var(b, ddof=1) == 0:
        raise DegenerateInputError("Welch test undefined: both groups have zero variance")

    result = sps.ttest_ind(a, b, equal_var=False, alternative=_scipy_alternative(alternative))
    return TestResult(float(result.statistic), float(result.pvalue), "t_distribution", len(a) + len(b), alternative, "welch")


def paired_t_test(before, after, alternative="two_sided"):
    """Paired t-test on before - after.

    "greater" tests whether before exceeds after on average.
    """
    _check_alternative(alternative)
    before = _as_array(before, "before")
    after = _as_array(after, "after")
    if len(before) != len(after):
        raise DataValidationError("Paired samples differ in length")
    if len(before) < 2:
        raise DegenerateInputError("Paired t-test needs at least two pairs")
    if np.ptp(before - after) == 0:
        raise DegenerateInputError("Paired t-test undefined: differences have zero variance")

    result = sps.ttest_rel(before, after, alternative=_scipy_alternative(alternative))
    return TestResult(float(result.statistic), float(result.pvalue), "t_distribution", len(before), alternative, "paired")


def pearson_r(x, y):
    x = _as_array(x, "x")
    y = _as_array(y, "y")
    if len(x) != len(y):
        raise DataValidationError("Correlation inputs differ in length")
    if len(x) < 2:
        raise DegenerateInputError("Correlation needs at least two points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInputError("Correlation undefined for constant input")
    r = sps.pearsonr(x, y)[0]
    return float(np.clip(r, -1.0, 1.0))


def cosine_similarity(u, v):
    """Cosine of the angle between two vectors (EmbeddingVector or sequences)."""
    u = _as_array(getattr(u, "values", u), "u")
    v = _as_array(getattr(v, "values", v), "v")
    if len(u) != len(v):
        raise DataValidationError(f"Vector dimensions differ ({len(u)} vs {len(v)})")
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0 or norm_v == 0:
        raise DegenerateInputError("Cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (norm_u * norm_v), -1.0, 1.0))


def describe(values):
    """Mean, median, quartiles (linear interpolation), min and max."""
    arr = _as_array(values)
    if len(arr) == 0:
        raise DegenerateInputError("Cannot describe an empty sample")
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    return {
        "n": int(len(arr)),
        "mean": float(arr.mean()),
        "median": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(arr.min()),
        "max": float(arr.max()),
    }
