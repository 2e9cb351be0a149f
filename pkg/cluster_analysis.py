"""
Cluster analysis module
Window statistic M, run-based clusters, clustering proportion and Poisson
diagnostics for exceedance point processes
"""

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from distributions import as_generator
from errors import ParameterError, WindowRangeError

logger = logging.getLogger(__name__)


@dataclass
class ClusterHistogram:
    """Occurrences of window counts M recorded at exceedances"""
    counts: Counter = field(default_factory=Counter)
    series_scanned: int = 0
    values_scanned: int = 0
    overlapping_records: int = 0

    @property
    def total(self):
        return sum(self.counts.values())

    @property
    def empty(self):
        return self.total == 0

    def pmf(self):
        total = self.total
        if not total:
            return {}
        return {size: n / total for size, n in sorted(self.counts.items())}

    def merge(self, other):
        return ClusterHistogram(self.counts + other.counts,
                                self.series_scanned + other.series_scanned,
                                self.values_scanned + other.values_scanned,
                                self.overlapping_records + other.overlapping_records)

    def metadata(self):
        return {
            'records': self.total,
            'series_scanned': self.series_scanned,
            'values_scanned': self.values_scanned,
            'overlapping_records': self.overlapping_records,
            'note': 'records at nearby exceedances share window values and are not independent',
            'empty': self.empty,
        }


def window_count(series, i0, r, x):
    """Exceedances of x among X_j with |j - i0| <= r"""
    x_arr = np.asarray(series)
    if r < 0 or i0 - r < 0 or i0 + r >= x_arr.size:
        raise WindowRangeError(f'window [{i0 - r}, {i0 + r}] outside series of length {x_arr.size}')
    return int(np.count_nonzero(x_arr[i0 - r:i0 + r + 1] > x))


def run_clusters(indices, gap):
    """Sizes of maximal runs whose consecutive index gaps are <= gap"""
    idx = np.asarray(indices)
    if idx.size == 0:
        return []
    if gap < 1:
        raise ParameterError('gap must be positive')
    breaks = np.flatnonzero(np.diff(idx) > gap)
    edges = np.concatenate([[0], breaks + 1, [idx.size]])
    return [int(v) for v in np.diff(edges)]


def window_counts_at_exceedances(series, x, r):
    """M at every exceedance whose window fits in the series"""
    above = np.asarray(series) > x
    cum = np.concatenate([[0], np.cumsum(above)])
    idx = np.flatnonzero(above)
    idx = idx[(idx >= r) & (idx < above.size - r)]
    return idx, cum[idx + r + 1] - cum[idx - r]


def _scan(generator, x, r, stream, index):
    series = np.asarray(generator(as_generator(stream.child(index))))
    idx, counts = window_counts_at_exceedances(series, x, r)
    overlap = int(np.count_nonzero(np.diff(idx) <= 2 * r)) if idx.size > 1 else 0
    return ClusterHistogram(Counter(int(c) for c in counts), 1, series.size, overlap)


def conditional_window_histogram(generator, x, r, budget, stream, threads=1):
    """Law of M given X_0 > x, scanned over `budget` generated series"""
    if budget < 1:
        raise ParameterError('budget must be at least 1')
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda i: _scan(generator, x, r, stream, i), range(budget)))
    hist = ClusterHistogram()
    for part in parts:
        hist = hist.merge(part)
    if hist.empty:
        logger.warning('no exceedances of x=%g in %d series', x, budget)
    return hist


def total_variation(histogram, pmf):
    """Total-variation distance between an empirical and a reference pmf"""
    emp = histogram.pmf() if isinstance(histogram, ClusterHistogram) else dict(histogram)
    ref = pmf.as_dict() if hasattr(pmf, 'as_dict') else dict(pmf)
    support = set(emp) | set(ref)
    return 0.5 * sum(abs(emp.get(q, 0.0) - ref.get(q, 0.0)) for q in support)


def clustering_proportion(n_samples):
    """#{N > 1} / #{N > 0}, None when no replicate rejected"""
    n = np.asarray(n_samples)
    positive = int(np.count_nonzero(n > 0))
    if positive == 0:
        return None
    return int(np.count_nonzero(n > 1)) / positive


def dispersion_index(n_samples):
    """Unbiased sample variance over sample mean"""
    n = np.asarray(n_samples, dtype=float)
    if n.size < 2:
        raise ParameterError('dispersion index needs at least two samples')
    mean = n.mean()
    if mean == 0:
        return None
    return float(n.var(ddof=1) / mean)


def spacing_uniformity(indices, nu):
    """KS distance of positions (i + 1) / nu from the uniform law"""
    idx = np.asarray(indices)
    if idx.size == 0:
        return None
    if idx.min() < 0 or idx.max() >= nu:
        raise ParameterError('indices must lie in [0, nu)')
    return float(stats.kstest((idx + 1) / nu, 'uniform').statistic)


def pooled_spacing_pvalue(index_lists, nu):
    """KS p-value of pooled exceedance positions against uniformity"""
    pooled = [(np.asarray(idx) + 1) / nu for idx in index_lists if len(idx)]
    if not pooled:
        return None
    return float(stats.kstest(np.concatenate(pooled), 'uniform').pvalue)
