"""
Limit laws module
Reference values for the exceedance counts: Poisson and compound Poisson
tails, the step-down limit probability, cluster-size pmf under Pareto tails,
the large-deviation rate and the Gaussian-window cluster law
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from config import MC_CHUNK_SIZE
from distributions import as_generator
from errors import DomainError, NumericalError, ParameterError
from process_models import sample_window_conditional

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ClusterSizePmf:
    """P(M_0 = q) for q = 1..m"""
    probabilities: tuple

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probabilities)
        if not probs or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ParameterError(f'not a pmf on 1..m: {probs}')
        object.__setattr__(self, 'probabilities', probs)

    @classmethod
    def from_dict(cls, mapping):
        m = max(int(q) for q in mapping)
        return cls(tuple(float(mapping.get(q, mapping.get(str(q), 0.0))) for q in range(1, m + 1)))

    @property
    def m(self):
        return len(self.probabilities)

    @property
    def mu(self):
        return sum(q * p for q, p in enumerate(self.probabilities, start=1))

    def as_dict(self):
        return {q: p for q, p in enumerate(self.probabilities, start=1) if p > 0}


DEGENERATE_PMF = ClusterSizePmf((1.0,))


def _check_beta_k(beta, k):
    if not beta > 0:
        raise DomainError('beta must be positive')
    if k < 1:
        raise DomainError('k must be at least 1')


def poisson_tail(beta, k):
    """P(Q >= k) for Q ~ Poisson(beta)"""
    _check_beta_k(beta, k)
    return float(stats.poisson.sf(k - 1, beta))


def poisson_clustering_ratio(beta):
    """P(N > 1) / P(N > 0) when N ~ Poisson(beta)"""
    return poisson_tail(beta, 2) / poisson_tail(beta, 1)


def _capped_poisson(beta, k):
    inc = np.empty(k + 1)
    inc[:k] = stats.poisson.pmf(np.arange(k), beta)
    inc[k] = stats.poisson.sf(k - 1, beta)
    return inc


def _stepdown_dp(increment, k):
    """P(S_i >= i for i <= k) where S_i sums i i.i.d. increments capped at k"""
    state = np.zeros(k + 1)
    state[0] = 1.0
    for i in range(1, k + 1):
        full = np.convolve(state, increment)
        state = full[:k + 1].copy()
        state[k] = full[k:].sum()
        state[:i] = 0.0
    return float(min(1.0, max(0.0, state.sum())))


def fdr_limit_prob(beta, k):
    """P(Q_1 + ... + Q_i >= i for 1 <= i <= k), Q_j i.i.d. Poisson(beta)"""
    _check_beta_k(beta, k)
    return _stepdown_dp(_capped_poisson(beta, k), k)


def cluster_size_pmf(weights, rho):
    """p_q = (theta_(q)^rho - theta_(q+1)^rho) / theta_(1)^rho"""
    if not rho > 0:
        raise DomainError('rho must be positive')
    values = weights.values if hasattr(weights, 'values') else tuple(weights)
    if any(v < 0 for v in values):
        raise DomainError('cluster-size law requires nonnegative weights')
    ranked = sorted((v for v in values if v > 0), reverse=True)
    if not ranked:
        raise DomainError('at least one weight must be positive')
    powered = [v ** rho for v in ranked] + [0.0]
    probs = tuple((powered[q] - powered[q + 1]) / powered[0] for q in range(len(ranked)))
    return ClusterSizePmf(probs)


def compound_pmf(beta, pmf, upto):
    """P(S = s) for s < upto, S = sum_{i <= Q} M_i, Q ~ Poisson(beta / mu)"""
    lam = beta / pmf.mu
    jumps = np.concatenate([[0.0], pmf.probabilities])
    f = np.zeros(max(upto, 1))
    f[0] = math.exp(-lam)
    # Panjer recursion for the compound Poisson law
    for s in range(1, upto):
        j = np.arange(1, min(s, pmf.m) + 1)
        f[s] = lam / s * np.sum(j * jumps[j] * f[s - j])
    return f[:upto]


def _capped_compound(beta, pmf, k):
    f = compound_pmf(beta, pmf, k)
    inc = np.empty(k + 1)
    inc[:k] = f
    inc[k] = max(0.0, -math.expm1(-beta / pmf.mu) - f[1:].sum())
    if abs(inc.sum() - 1.0) > SUM_TOLERANCE:
        raise NumericalError(f'compound increment mass {inc.sum()!r} deviates from 1')
    return inc


def compound_tail(beta, pmf, k):
    """P(sum_{i <= Q} M_i >= k), the clustered replacement of the Poisson tail"""
    _check_beta_k(beta, k)
    return float(_capped_compound(beta, pmf, k)[k])


def compound_fdr_prob(beta, pmf, k):
    """Step-down limit probability with compound-Poisson bin increments"""
    _check_beta_k(beta, k)
    return _stepdown_dp(_capped_compound(beta, pmf, k), k)


def ld_rate(weights, gamma):
    """(sum theta_k^{gamma/(gamma-1)})^{-(gamma-1)}"""
    if not gamma > 1:
        raise DomainError('the rate formula requires gamma > 1')
    values = weights.values if hasattr(weights, 'values') else tuple(weights)
    if any(v < 0 for v in values):
        raise DomainError('rate formula requires nonnegative weights')
    positive = [v for v in values if v > 0]
    if not positive:
        raise DomainError('at least one weight must be positive')
    power = gamma / (gamma - 1)
    return sum(v ** power for v in positive) ** (-(gamma - 1))


def window_delta(d, t):
    """delta matching sqrt(delta) * t = d"""
    return (d / t) ** 2


def _chunks(budget, chunk_size):
    return [(j, min(chunk_size, budget - j * chunk_size)) for j in range(math.ceil(budget / chunk_size))]


def _reference_chunk(model, d, stream, index, size):
    rng = as_generator(stream.child(index))
    eigval, eigvec = np.linalg.eigh(model.sigma1)
    factor = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
    z = rng.exponential(1.0, size)
    gauss = rng.standard_normal((size, 2 * model.r)) @ factor.T
    cc = np.concatenate([[0.0], model.c])
    levels = d * cc[np.abs(model.neighbor_offsets())]
    above = gauss > levels[None, :] - z[:, None] / d
    return np.bincount(above.sum(axis=1), minlength=2 * model.r + 1)


def window_reference_pi(model, d, budget, stream, chunk_size=MC_CHUNK_SIZE, threads=1):
    """Monte Carlo pi_k^0 for k = 0..2r with standard errors"""
    if not d > 0:
        raise DomainError('d must be positive')
    with ThreadPoolExecutor(max_workers=threads) as pool:
        tallies = list(pool.map(lambda c: _reference_chunk(model, d, stream, c[0], c[1]),
                                _chunks(budget, chunk_size)))
    counts = np.sum(tallies, axis=0)
    pi = counts / budget
    return pi, np.sqrt(pi * (1.0 - pi) / budget)


def _empirical_chunk(model, t, stream, index, size):
    _, neighbors = sample_window_conditional(model, t, stream.child(index), size)
    return np.bincount((neighbors > t).sum(axis=1), minlength=2 * model.r + 1)


def window_empirical_pi(model, t, budget, stream, chunk_size=MC_CHUNK_SIZE, threads=1):
    """Fraction of conditional windows with exactly k neighbours above t"""
    with ThreadPoolExecutor(max_workers=threads) as pool:
        tallies = list(pool.map(lambda c: _empirical_chunk(model, t, stream, c[0], c[1]),
                                _chunks(budget, chunk_size)))
    counts = np.sum(tallies, axis=0)
    return counts / counts.sum()
