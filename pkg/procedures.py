"""
Procedures module
Exceedance counting, ladder bin counts and the step-down rejection rule
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TestCounts:
    """N at t_1 and bin counts N_i over [t_i, t_{i-1})"""
    __test__ = False

    N: int
    bins: tuple
    cumulative_counts: tuple

    def cumulative(self, i):
        """N^(i) = N_1 + ... + N_i"""
        return self.cumulative_counts[i - 1]


@dataclass(frozen=True)
class RejectionResult:
    k_star: int
    rejected: frozenset
    order: tuple = ()


def _thresholds(ladder):
    return tuple(getattr(ladder, 'thresholds', ladder))


def count_exceedances(series, t):
    """Number of strict exceedances X_i > t"""
    return int(np.count_nonzero(np.asarray(series) > t))


def exceedance_indices(series, t):
    """Sorted 0-based indices with X_i > t"""
    return np.flatnonzero(np.asarray(series) > t)


def bin_counts(series, ladder):
    """N_i = #{t_i <= X_j < t_{i-1}}, t_0 = inf"""
    x = np.asarray(series)
    thresholds = _thresholds(ladder)
    at_least = [int(np.count_nonzero(x >= t)) for t in thresholds]
    bins = tuple(b - a for a, b in zip([0] + at_least[:-1], at_least))
    return TestCounts(count_exceedances(x, thresholds[0]), bins, tuple(at_least))


def stepdown_reject(series, ladder):
    """Reject the k largest where the i-th largest exceeds t_i for every i <= k"""
    x = np.asarray(series, dtype=float)
    thresholds = np.asarray(_thresholds(ladder), dtype=float)
    k = min(len(thresholds), x.size)
    # descending by value, ties by lower index first
    order = np.lexsort((np.arange(x.size), -x))[:k]
    passed = x[order] > thresholds[:k]
    k_star = int(np.cumprod(passed).sum()) if k else 0
    chosen = tuple(int(i) for i in order[:k_star])
    return RejectionResult(k_star, frozenset(chosen), chosen)


def bh_event_holds(series, ladder):
    """N^(i) >= i for every i up to the ladder length"""
    x = np.asarray(series)
    return all(count_exceedances(x, t) >= i for i, t in enumerate(_thresholds(ladder), start=1))

