"""
Process models module
Generates the dependent statistic streams: finite moving averages, grouped
replicate data with mean and t-statistics, and the highly correlated
Gaussian window used for the near-unit-correlation regime
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from distributions import as_generator, draw
from errors import DegenerateSampleError, ModelError, ParameterError

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-10


@dataclass(frozen=True)
class WeightProfile:
    """Finite-support weights theta_k; X_i = sum_k theta_k * eps_{i+k}"""
    offsets: tuple
    values: tuple

    def __post_init__(self):
        offsets = tuple(int(k) for k in self.offsets)
        values = tuple(float(v) for v in self.values)
        if len(offsets) != len(values):
            raise ParameterError('offsets and values must have the same length')
        if not offsets:
            raise ParameterError('weight profile is empty')
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ParameterError('offsets must be strictly increasing')
        if not any(values):
            raise ParameterError('at least one weight must be nonzero')
        if not all(math.isfinite(v) for v in values):
            raise ParameterError('weights must be finite')
        object.__setattr__(self, 'offsets', offsets)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_values(cls, values, start=0):
        return cls(tuple(range(start, start + len(values))), tuple(values))

    @classmethod
    def from_dict(cls, mapping):
        items = sorted((int(k), float(v)) for k, v in mapping.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    def as_dict(self):
        return dict(zip(self.offsets, self.values))

    @property
    def k_min(self):
        return self.offsets[0]

    @property
    def k_max(self):
        return self.offsets[-1]

    @property
    def span(self):
        """Number of offsets between the extreme weights, inclusive"""
        return self.k_max - self.k_min + 1

    def dense(self):
        """Weights on the contiguous range k_min..k_max"""
        out = np.zeros(self.span)
        for k, v in zip(self.offsets, self.values):
            out[k - self.k_min] = v
        return out

    def nonzero_values(self):
        return [v for v in self.values if v != 0]

    def sum_of_squares(self):
        return sum(v * v for v in self.values)

    def scaled(self, factor):
        return WeightProfile(self.offsets, tuple(v * factor for v in self.values))


def equal_weights(r):
    """r equal nonzero weights on offsets 0..r-1"""
    if r < 1:
        raise ParameterError('r must be at least 1')
    return WeightProfile.from_values([1.0] * r)


def _moving_sum(eps, dense, nu):
    """Sum over m of dense[m] * eps[..., i + m] for i < nu"""
    out = np.zeros(eps.shape[:-1] + (nu,))
    for m, w in enumerate(dense):
        if w != 0:
            out += w * eps[..., m:m + nu]
    return out


def generate_ma(weights, model, nu, stream):
    """One stationary moving-average series of length nu"""
    return generate_ma_batch(weights, model, nu, 1, stream)[0]


def generate_ma_batch(weights, model, nu, batch, stream):
    """`batch` independent series drawn from one stream, shape (batch, nu)"""
    if nu < 1:
        raise ParameterError('nu must be at least 1')
    # eps covers the extended range 1 + k_min .. nu + k_max
    length = nu + weights.span - 1
    eps = draw(model, stream, (batch, length))
    return _moving_sum(eps, weights.dense(), nu)


def autocovariance(weights, err_var, lag):
    """err_var * sum_k theta_k * theta_{k + lag}"""
    lag = abs(int(lag))
    table = weights.as_dict()
    return err_var * sum(v * table.get(k + lag, 0.0) for k, v in table.items())


@dataclass
class GroupData:
    """nu x n replicate matrix; rows are tests, columns are replicates"""
    values: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        if self.values.ndim != 2:
            raise ParameterError('group values must be a nu x n matrix')
        if self.values.shape[0] < 1 or self.values.shape[1] < 2:
            raise ParameterError('need nu >= 1 tests and n >= 2 replicates')
        if self.means.shape != (self.values.shape[0],):
            raise ParameterError('means must have one entry per test')

    @property
    def nu(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]


def generate_groups(weights, model, nu, n, mu, stream):
    """V_ij = mu_i + sum_k theta_k eps'_{i+k,j}; columns are independent"""
    mu = np.asarray(mu, dtype=float)
    if n < 2:
        raise ParameterError('n must be at least 2')
    if mu.shape != (nu,):
        raise ParameterError(f'mu must have length nu={nu}')
    length = nu + weights.span - 1
    eps = draw(model, stream, (n, length))
    values = _moving_sum(eps, weights.dense(), nu).T + mu[:, None]
    return GroupData(values, mu)


def group_mean_stats(data):
    """X_i = n^{-1/2} sum_j V_ij"""
    return data.values.sum(axis=1) / math.sqrt(data.n)


def t_statistics(values):
    """Divisor-n t-statistic along the last axis"""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    mean = values.mean(axis=-1)
    var = values.var(axis=-1)
    degenerate = ~(var > 0)
    if np.any(degenerate):
        row = int(np.flatnonzero(degenerate.ravel())[0])
        raise DegenerateSampleError(row)
    return math.sqrt(n) * mean / np.sqrt(var)


def group_t_stats(data):
    """Y_i of the studentised-mean model, variance with divisor n"""
    return t_statistics(data.values)


def generate_t_stat_batch(weights, model, nu, n, batch, stream):
    """`batch` series of null t-statistics, shape (batch, nu)"""
    length = nu + weights.span - 1
    eps = draw(model, stream, (batch, n, length))
    values = _moving_sum(eps, weights.dense(), nu)
    return t_statistics(np.swapaxes(values, 1, 2))


def ar_truncated_weights(r, a, delta):
    """theta_{-k} = c * prod_{j<=k} rho_j with rho_k = 1 - a_k * delta, k <= r"""
    a = [float(v) for v in a]
    if len(a) != r:
        raise ParameterError(f'expected {r} coefficients a_k, got {len(a)}')
    if delta < 0 or any(v < 0 for v in a):
        raise ParameterError('delta and a_k must be nonnegative')
    rho = [1.0] + [1.0 - v * delta for v in a]
    if any(p < 0 for p in rho):
        raise ParameterError(f'delta={delta} makes some rho_k negative')
    products = np.cumprod(rho)
    c = 1.0 / math.sqrt(float(np.sum(products ** 2)))
    # offsets -r..0 hold theta_{-r}..theta_0
    return WeightProfile(tuple(range(-r, 1)), tuple(c * products[::-1]))


def c_coefficients(a, count=None):
    """c_j = (r+1)^{-1} sum_{k=0..r} (a_{k+1} + ... + a_{k+j}), a_m = 0 beyond r"""
    r = len(a)
    count = 2 * r if count is None else count
    padded = np.zeros(2 * r + count + 1)
    padded[1:r + 1] = a
    cum = np.cumsum(padded)
    out = []
    for j in range(1, count + 1):
        out.append(sum(cum[k + j] - cum[k] for k in range(r + 1)) / (r + 1))
    return tuple(out)


@dataclass
class GaussianWindowModel:
    """Window X_{-r..r} with cov(X_i, X_j) = 1 - c_{|i-j|} * delta"""
    r: int
    c: tuple
    delta: float
    sigma1: np.ndarray = field(init=False, repr=False)
    window_cov: np.ndarray = field(init=False, repr=False)
    cond_mean: np.ndarray = field(init=False, repr=False)
    cond_factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.c = tuple(float(v) for v in self.c)
        if self.r < 1:
            raise ModelError('window radius must be at least 1')
        if len(self.c) != 2 * self.r:
            raise ModelError(f'need {2 * self.r} coefficients c_1..c_2r, got {len(self.c)}')
        if any(v < 0 for v in self.c):
            raise ModelError('coefficients c_j must be nonnegative')
        if not self.delta > 0:
            raise ModelError('delta must be positive')
        idx = self.neighbor_offsets()
        cc = np.concatenate([[0.0], self.c])
        diff = np.abs(idx[:, None] - idx[None, :])
        self.sigma1 = cc[np.abs(idx)][:, None] + cc[np.abs(idx)][None, :] - cc[diff]
        if np.linalg.eigvalsh(self.sigma1).min() < -PSD_TOLERANCE:
            raise ModelError('Sigma1 is not positive semidefinite')

        full = np.concatenate([idx, [0]])
        self.window_cov = 1.0 - cc[np.abs(full[:, None] - full[None, :])] * self.delta
        if self.window_cov.min() < -1.0:
            raise ModelError('window covariances fall below -1; reduce delta')
        self.cond_mean = 1.0 - cc[np.abs(idx)] * self.delta
        # exact conditional covariance; equals delta * Sigma1 to first order
        cond_cov = self.window_cov[:-1, :-1] - np.outer(self.cond_mean, self.cond_mean)
        eigval, eigvec = np.linalg.eigh(cond_cov)
        if eigval.min() < -PSD_TOLERANCE:
            raise ModelError('window covariance is not positive semidefinite for this delta')
        self.cond_factor = eigvec * np.sqrt(np.clip(eigval, 0.0, None))

    def neighbor_offsets(self):
        return np.concatenate([np.arange(-self.r, 0), np.arange(1, self.r + 1)])


def build_window_model(r, c, delta):
    return GaussianWindowModel(r, tuple(c), delta)


def sample_window_conditional(model, t, stream, size=None):
    """X_0 ~ N(0,1) truncated to (t, inf), then neighbours | X_0"""
    rng = as_generator(stream)
    count = 1 if size is None else int(size)
    tail = stats.norm.sf(t)
    u = rng.random(count)
    # inversion in the upper tail keeps precision for large t
    if tail < 0.5:
        x0 = stats.norm.isf((1.0 - u) * tail)
    else:
        x0 = stats.norm.ppf(1.0 - tail + u * tail)
    z = rng.standard_normal((count, 2 * model.r))
    neighbors = x0[:, None] * model.cond_mean[None, :] + z @ model.cond_factor.T
    if size is None:
        return float(x0[0]), neighbors[0]
    return x0, neighbors
