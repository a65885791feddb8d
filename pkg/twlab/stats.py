"""
Deterministic statistics used by the convergence checks: normal CDF, Kolmogorov-Smirnov
distances and critical values, moment estimates with confidence intervals, and the TestReport
record every check produces.
"""

import math
from typing import Callable, NamedTuple, Sequence, Tuple

import numpy as np
from scipy import stats as scipy_stats
from scipy.special import kolmogi, ndtr

MIN_CI_SAMPLE = 30


class StatsError(Exception):
    pass


class SampleTooSmall(StatsError):
    pass


class TestReport(NamedTuple):
    statistic_name: str
    value: float
    threshold: float
    sample_sizes: Tuple[int, ...]
    verdict: str
    provenance: dict

    @property
    def passed(self) -> bool:
        return self.verdict == 'pass'

    def to_record(self) -> dict:
        record = {
            'statistic_name': self.statistic_name,
            'value': self.value,
            'threshold': self.threshold,
            'sample_sizes': list(self.sample_sizes),
            'verdict': self.verdict,
        }
        for key, value in self.provenance.items():
            record['provenance.' + key] = value
        return record


def distance_report(name: str, value: float, threshold: float, sample_sizes: Sequence[int],
                    provenance: dict=None) -> TestReport:
    """A report for a distance-type statistic: it passes iff value <= threshold."""
    return TestReport(statistic_name=name, value=float(value), threshold=float(threshold),
                      sample_sizes=tuple(int(n) for n in sample_sizes),
                      verdict='pass' if value <= threshold else 'fail',
                      provenance=dict(provenance or {}))


def normal_cdf(x, mean: float=0.0, variance: float=1.0):
    if variance <= 0:
        raise ValueError("variance must be positive, got {!r}".format(variance))

    result = ndtr((np.asarray(x, dtype=float) - mean) / math.sqrt(variance))
    return float(result) if np.ndim(result) == 0 else result


def _sorted(sample) -> np.ndarray:
    sample = np.asarray(sample, dtype=float)
    if len(sample) == 0:
        raise ValueError("sample must not be empty")
    return np.sort(sample, kind='stable')


def ks_one_sample(sample: Sequence[float], cdf: Callable) -> float:
    """
    D_N = max over order statistics of max(i/N - F(x_(i)), F(x_(i)) - (i-1)/N).
    """
    return float(scipy_stats.kstest(_sorted(sample), cdf, method='asymp').statistic)


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> float:
    """Largest distance between the two empirical CDFs."""
    return float(scipy_stats.ks_2samp(_sorted(a), _sorted(b), method='asymp').statistic)


def ks_critical_one(alpha: float, n: int) -> float:
    """Asymptotic critical value of the one-sample statistic, c(alpha) / sqrt(n)."""
    return float(kolmogi(alpha)) / math.sqrt(n)


def ks_critical_two(alpha: float, n1: int, n2: int) -> float:
    return float(kolmogi(alpha)) * math.sqrt((n1 + n2) / (n1 * n2))


def moment_ci(sample: Sequence[float], k: int, central: bool=False, sigmas: float=3.0) -> Tuple[float, float]:
    """
    k-th sample moment (about the sample mean if `central`) and the half width of its
    `sigmas`-sigma confidence interval, from the sample variance of the k-th powers.
    """
    sample = np.asarray(sample, dtype=float)
    n = len(sample)
    if n < MIN_CI_SAMPLE:
        raise SampleTooSmall("need at least {} values for a confidence interval, got {}".format(MIN_CI_SAMPLE, n))

    base = sample - math.fsum(sample) / n if central else sample
    powers = base ** k

    estimate = math.fsum(powers) / n
    halfwidth = sigmas * float(np.std(powers, ddof=1)) / math.sqrt(n)
    return estimate, halfwidth


def sample_correlation(a: Sequence[float], b: Sequence[float]) -> float:
    return float(np.corrcoef(np.asarray(a, dtype=float), np.asarray(b, dtype=float))[0, 1])


def binomial_halfwidth(p: float, n: int, sigmas: float=3.0) -> float:
    return sigmas * math.sqrt(p * (1.0 - p) / n)


def mean_check(name: str, sample: Sequence[float], target: float, sigma: float=None, sigmas: float=3.0,
               provenance: dict=None) -> TestReport:
    """
    Passes iff the sample mean lies within `sigmas` standard errors of target. The standard
    deviation `sigma` defaults to the sample standard deviation.
    """
    sample = np.asarray(sample, dtype=float)
    n = len(sample)
    if sigma is None:
        sigma = float(np.std(sample, ddof=1))

    estimate = math.fsum(sample) / n
    provenance = dict(provenance or {}, estimate=estimate, target=target)
    return distance_report(name, abs(estimate - target), sigmas * sigma / math.sqrt(n), [n], provenance)


def ks_normal_check(name: str, sample: Sequence[float], mean: float, variance: float, threshold: float,
                    provenance: dict=None) -> TestReport:
    def cdf(x):
        return normal_cdf(x, mean, variance)

    provenance = dict(provenance or {}, reference_mean=mean, reference_variance=variance)
    return distance_report(name, ks_one_sample(sample, cdf), threshold, [len(sample)], provenance)


def ks_two_sample_check(name: str, a: Sequence[float], b: Sequence[float], alpha: float, slack: float,
                        provenance: dict=None) -> TestReport:
    threshold = slack * ks_critical_two(alpha, len(a), len(b))
    provenance = dict(provenance or {}, alpha=alpha, slack=slack)
    return distance_report(name, ks_two_sample(a, b), threshold, [len(a), len(b)], provenance)


def jitter(sample: Sequence[float], width: float, rng: np.random.Generator) -> np.ndarray:
    """
    Spreads a lattice-valued sample uniformly over cells of the given width centred on the lattice
    points, so it can be compared with a continuous law. A width of None or 0 leaves it unchanged.
    """
    sample = np.asarray(sample, dtype=float)
    if not width:
        return sample.copy()
    return sample + (rng.random(len(sample)) - 0.5) * width


def ks_lattice_check(name: str, sample: Sequence[float], width: float, rng: np.random.Generator, mean: float,
                     variance: float, threshold: float, provenance: dict=None) -> TestReport:
    """
    ks_normal_check on the jittered sample. The distance of the sample as drawn is kept in the
    provenance as `unsmoothed_statistic`.
    """
    def cdf(x):
        return normal_cdf(x, mean, variance)

    provenance = dict(provenance or {}, lattice_jitter=width, unsmoothed_statistic=ks_one_sample(sample, cdf))
    return ks_normal_check(name, jitter(sample, width, rng), mean, variance, threshold, provenance)
