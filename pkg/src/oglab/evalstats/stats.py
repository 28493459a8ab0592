"""Score normalisation, Welch's t-test from summary statistics, IQM, bootstrap
intervals and performance profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigurationError, NumericError

SIGNIFICANCE_LEVEL = 0.05


# -- normalisation -------------------------------------------------------------------

@dataclass(frozen=True)
class NormalizationBounds:
    s_random: float
    s_expert: float

    def __post_init__(self):
        if not (math.isfinite(self.s_random) and math.isfinite(self.s_expert)):
            raise ConfigurationError("normalisation bounds must be finite")
        if self.s_expert == self.s_random:
            raise ConfigurationError(f"degenerate normalisation bounds: expert == random == {self.s_random}")


def normalize(score: float, bounds: NormalizationBounds) -> float:
    """100 * (S - S_random) / (S_expert - S_random)."""
    return 100.0 * (score - bounds.s_random) / (bounds.s_expert - bounds.s_random)


def denormalize(value: float, bounds: NormalizationBounds) -> float:
    return bounds.s_random + value * (bounds.s_expert - bounds.s_random) / 100.0


def normalize_by_reference(score: float, reference_best: float) -> float:
    """Ratio to the best published score for the same dataset (sign preserved)."""
    if reference_best == 0 or not math.isfinite(reference_best):
        raise ConfigurationError(f"reference score must be finite and non-zero, got {reference_best}")
    return score / reference_best


# -- Student-t tail via the regularised incomplete beta --------------------------------

_CF_MAX_ITER = 10_000
_CF_EPS = 1e-16
_TINY = 1e-300


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ConfigurationError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ConfigurationError(f"betainc needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fast below the mean of the beta distribution; swap otherwise
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for a Student-t variable with ``df`` degrees of freedom."""
    if not df > 0:
        raise ConfigurationError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    if t == 0:
        return 1.0
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t * t))))


# -- Welch's test ----------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryStat:
    """Mean and sample standard deviation of a metric over ``n`` seeds."""

    mean: float
    std: float
    n: int
    label: str = ""
    source: str = "ours"  # "ours" | "literature"

    def __post_init__(self):
        if not math.isfinite(self.mean) or not math.isfinite(self.std) or self.std < 0:
            raise ConfigurationError(f"invalid summary statistic mean={self.mean} std={self.std}")
        if self.n < 1:
            raise ConfigurationError(f"sample size must be >= 1, got {self.n}")
        if self.source not in ("ours", "literature"):
            raise ConfigurationError(f"unknown source {self.source!r}")

    @classmethod
    def from_values(cls, values: Sequence[float], label: str = "", ddof: int = 0) -> SummaryStat:
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            raise ConfigurationError("no values to summarise")
        std = float(arr.std(ddof=ddof)) if arr.size > ddof else 0.0
        return cls(float(arr.mean()), std, int(arr.size), label)


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float

    @property
    def significant(self) -> bool:
        return self.p < SIGNIFICANCE_LEVEL


def welch_test(a: SummaryStat, b: SummaryStat) -> WelchResult:
    """Two-sided heteroscedastic t-test from summary statistics.

    With zero variance on both sides the statistic is undefined; equal means
    give p = 1 and unequal means p = 0, with df = n_a + n_b - 2 in both cases.
    """
    if a.n < 2 or b.n < 2:
        raise ConfigurationError(f"Welch's test needs n >= 2 on both sides, got {a.n} and {b.n}")
    va, vb = a.std ** 2 / a.n, b.std ** 2 / b.n
    se2 = va + vb
    diff = a.mean - b.mean
    if se2 == 0.0:
        df = float(a.n + b.n - 2)
        if diff == 0.0:
            return WelchResult(0.0, df, 1.0)
        return WelchResult(math.copysign(math.inf, diff), df, 0.0)
    t = diff / math.sqrt(se2)
    df = se2 * se2 / (va * va / (a.n - 1) + vb * vb / (b.n - 1))
    return WelchResult(t, df, student_t_two_sided_p(t, df))


# -- robust aggregates -----------------------------------------------------------------

def iqm(values: Sequence[float]) -> float:
    """Mean after dropping floor(n/4) values from each end."""
    arr = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if arr.size == 0:
        raise ConfigurationError("iqm of an empty sequence")
    k = arr.size // 4
    return float(arr[k:arr.size - k].mean())


STATISTICS: dict[str, Callable[[np.ndarray], float]] = {
    "mean": lambda v: float(np.mean(v)),
    "median": lambda v: float(np.median(v)),
    "iqm": iqm,
}


def bootstrap_ci(values: Sequence[float], statistic: str = "mean", resamples: int = 2000,
                 confidence: float = 0.95, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for ``statistic`` over ``values``."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size < 2:
        raise ConfigurationError("bootstrap needs at least two values")
    if statistic not in STATISTICS:
        raise ConfigurationError(f"unknown statistic {statistic!r}; known: {sorted(STATISTICS)}")
    if not 0.0 < confidence < 1.0 or resamples < 1:
        raise ConfigurationError("confidence must lie in (0, 1) and resamples >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(resamples, arr.size))
    fn = STATISTICS[statistic]
    stats = np.array([fn(arr[row]) for row in idx])
    tail = 100.0 * (1.0 - confidence) / 2.0
    lo, hi = np.percentile(stats, [tail, 100.0 - tail])
    return float(lo), float(hi)


@dataclass(frozen=True)
class ProfileCurve:
    taus: tuple[float, ...]
    fractions: tuple[float, ...]

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.taus, self.fractions))


def performance_profile(scores: Sequence[float], taus: Sequence[float]) -> ProfileCurve:
    """Fraction of scores strictly above each threshold tau."""
    arr = np.asarray(scores, dtype=np.float64).ravel()
    t = np.asarray(taus, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ConfigurationError("performance profile of no scores")
    if np.any(np.diff(t) < 0):
        raise ConfigurationError("taus must be ascending")
    fractions = (arr[None, :] > t[:, None]).mean(axis=1)
    return ProfileCurve(tuple(float(x) for x in t), tuple(float(f) for f in fractions))
