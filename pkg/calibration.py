"""
Calibration module
Critical values t and ladders t_1 > ... > t_k with P0(X > t_i) = i * beta / nu,
analytically from a known marginal or by brute-force Monte Carlo
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from config import MC_CHUNK_SIZE
from distributions import as_generator, density, quantile_survival, survival
from errors import CalibrationError, DomainError, InsufficientTailMassError

logger = logging.getLogger(__name__)

MIN_TAIL_SAMPLES = 100
CONVENTIONS = ('beta-over-nu', 'sidak')


def beta_from_alpha(alpha):
    """beta = -log(1 - alpha)"""
    if not 0 < alpha < 1:
        raise DomainError(f'alpha must lie in (0, 1), got {alpha!r}')
    return -math.log1p(-alpha)


@dataclass(frozen=True)
class AnalyticMarginal:
    """Null marginal equal to scale * eps for a known error model"""
    model: object
    scale: float = 1.0

    def quantile(self, s):
        return self.scale * np.asarray(quantile_survival(self.model, s))

    def survival(self, x):
        return survival(self.model, np.asarray(x) / self.scale)

    def density(self, x):
        return density(self.model, np.asarray(x) / self.scale) / self.scale

    def quantile_se(self, s, budget):
        """Asymptotic sd of the empirical (1 - s)-quantile of `budget` draws"""
        return math.sqrt(s * (1.0 - s) / budget) / float(self.density(self.quantile(s)))


@dataclass(frozen=True)
class SamplerMarginal:
    """Null marginal known only through a sampler(rng, size) -> ndarray"""
    sampler: object
    budget: int
    stream: object
    chunk_size: int = MC_CHUNK_SIZE
    threads: int = 1


@dataclass(frozen=True)
class ThresholdLadder:
    thresholds: tuple
    levels: tuple
    se: tuple
    beta: float
    alpha: float
    nu: int
    method: str
    convention: str = 'beta-over-nu'
    budget: int = None
    seed: int = None

    def __post_init__(self):
        if not self.thresholds:
            raise CalibrationError('ladder needs at least one threshold')
        if any(b >= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise CalibrationError(f'thresholds are not strictly decreasing: {self.thresholds}')

    @property
    def k(self):
        return len(self.thresholds)

    @property
    def t1(self):
        return self.thresholds[0]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        for name in ('thresholds', 'levels', 'se'):
            data[name] = tuple(data[name])
        return cls(**data)


def ladder_levels(alpha, nu, k, convention='beta-over-nu'):
    """Target survival probabilities of t_1..t_k"""
    if k < 1:
        raise DomainError('k must be at least 1')
    if convention not in CONVENTIONS:
        raise DomainError(f'convention must be one of {CONVENTIONS}')
    beta = beta_from_alpha(alpha)
    if k * beta / nu >= 1:
        raise DomainError(f'k * beta / nu = {k * beta / nu:.4g} must be below 1')
    levels = [i * beta / nu for i in range(1, k + 1)]
    if convention == 'sidak':
        # conventional per-test level for t_1, stated with alpha
        levels[0] = -math.expm1(math.log1p(-alpha) / nu)
    return levels


def _chunk_top(sampler, stream, index, size, keep):
    rng = as_generator(stream.child(index))
    values = np.asarray(sampler(rng, size), dtype=float).ravel()
    if values.size > keep:
        values = np.partition(values, values.size - keep)[values.size - keep:]
    return values


def mc_marginal_quantiles(sampler, levels, budget, stream, chunk_size=MC_CHUNK_SIZE, threads=1):
    """Type-7 upper quantiles of `budget` draws with order-statistic standard errors"""
    levels = [float(s) for s in levels]
    if not levels or any(not 0 < s < 1 for s in levels):
        raise DomainError('survival levels must lie in (0, 1)')
    if budget * min(levels) < MIN_TAIL_SAMPLES:
        raise InsufficientTailMassError(
            f'budget {budget} gives {budget * min(levels):.1f} expected tail samples '
            f'(need {MIN_TAIL_SAMPLES})')
    n = int(budget)
    plan = []
    for s in levels:
        h = (n - 1) * (1.0 - s)
        lo = int(math.floor(h))
        d = n - 1 - lo
        w = max(1, min(int(math.sqrt(n * s)), d))
        plan.append((s, h - lo, d, w))
    keep = min(n, max(d + w for _, _, d, w in plan) + 2)

    chunks = [(j, min(chunk_size, n - j * chunk_size)) for j in range(math.ceil(n / chunk_size))]
    logger.debug('MC quantile: budget=%d chunks=%d keep=%d threads=%d', n, len(chunks), keep, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        tops = list(pool.map(lambda c: _chunk_top(sampler, stream, c[0], c[1], keep), chunks))
    merged = np.concatenate(tops)
    if merged.size > keep:
        merged = np.partition(merged, merged.size - keep)[merged.size - keep:]
    desc = np.sort(merged)[::-1]

    results = []
    for s, frac, d, w in plan:
        # desc[d] is the ascending order statistic at floor(h), desc[d - 1] the next one up
        base = desc[d]
        above = desc[d - 1] if d >= 1 else base
        t = base + frac * (above - base)
        spacing = desc[d - w] - desc[min(d + w, desc.size - 1)]
        if spacing > 0:
            dens = 2.0 * w / (n * spacing)
            se = math.sqrt(s * (1.0 - s) / n) / dens
        else:
            se = 0.0
        results.append((float(t), float(se)))
    return results


def mc_marginal_quantile(sampler, s, budget, stream, chunk_size=MC_CHUNK_SIZE, threads=1):
    """(t, se) for a single survival level"""
    return mc_marginal_quantiles(sampler, [s], budget, stream, chunk_size, threads)[0]


def threshold_ladder(marginal, alpha, nu, k=1, convention='beta-over-nu'):
    """Calibrate t_1 > ... > t_k against an analytic or sampled marginal"""
    levels = ladder_levels(alpha, nu, k, convention)
    beta = beta_from_alpha(alpha)
    if isinstance(marginal, AnalyticMarginal):
        thresholds = [float(v) for v in np.atleast_1d(marginal.quantile(levels))]
        return ThresholdLadder(tuple(thresholds), tuple(levels), tuple(0.0 for _ in levels),
                               beta, alpha, nu, 'analytic', convention)
    if isinstance(marginal, SamplerMarginal):
        pairs = mc_marginal_quantiles(marginal.sampler, levels, marginal.budget, marginal.stream,
                                      marginal.chunk_size, marginal.threads)
        return ThresholdLadder(tuple(t for t, _ in pairs), tuple(levels), tuple(se for _, se in pairs),
                               beta, alpha, nu, 'monte-carlo', convention,
                               budget=marginal.budget, seed=marginal.stream.master_seed)
    raise TypeError(f'unsupported marginal source {marginal!r}')


def ladder_cache_key(**parts):
    """Canonical text key for the calibration cache"""
    return json.dumps(parts, sort_keys=True, default=str)
