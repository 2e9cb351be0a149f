"""
Distributions module
Disturbance laws for the moving-average null models: exact survival and
quantile functions, seeded sampling and variance normalisation
"""

import hashlib
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from errors import (DomainError, InfiniteVarianceError, ParameterError,
                    UnsupportedOperationError)

logger = logging.getLogger(__name__)


def _require_positive(**params):
    for name, value in params.items():
        if not (value > 0) or not math.isfinite(value):
            raise ParameterError(f'{name} must be a positive finite number, got {value!r}')


@dataclass(frozen=True)
class Gaussian:
    sd: float = 1.0

    def __post_init__(self):
        _require_positive(sd=self.sd)


@dataclass(frozen=True)
class StudentT:
    df: float
    scale: float = 1.0

    def __post_init__(self):
        _require_positive(df=self.df, scale=self.scale)


@dataclass(frozen=True)
class WeibullTail:
    """Survival exp(-rate_c * x**gamma) on x >= 0"""
    gamma: float
    rate_c: float = 1.0

    def __post_init__(self):
        _require_positive(gamma=self.gamma, rate_c=self.rate_c)


@dataclass(frozen=True)
class Pareto:
    """Survival (x / xmin)**(-rho) for x >= xmin"""
    rho: float
    xmin: float = 1.0

    def __post_init__(self):
        _require_positive(rho=self.rho, xmin=self.xmin)


@dataclass(frozen=True)
class Deterministic:
    """Test stub: draws replay the given values in order"""
    values: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ParameterError('Deterministic stub needs at least one value')
        object.__setattr__(self, 'values', values)


ERROR_MODELS = (Gaussian, StudentT, WeibullTail, Pareto, Deterministic)


@dataclass(frozen=True)
class RandomStream:
    """(master_seed, stream_index) fully determines the draw sequence"""
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise ParameterError('master_seed must be a 64-bit unsigned integer')
        if self.stream_index < 0:
            raise ParameterError('stream_index must be nonnegative')

    def generator(self):
        """Fresh numpy Generator positioned at the start of this stream"""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.default_rng(seq)

    def child(self, index):
        """Sub-stream used for chunked or per-series work"""
        return RandomStream(self.master_seed, derive_stream_index(('child', self.stream_index), index))


def derive_stream_index(key, i):
    """Stable 63-bit stream index from a hashable key and a replicate number"""
    digest = hashlib.blake2b(repr((key, int(i))).encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'big') >> 1


def as_generator(stream):
    """Accept a RandomStream or an existing numpy Generator"""
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, RandomStream):
        return stream.generator()
    raise TypeError(f'Expected RandomStream or numpy Generator, got {type(stream).__name__}')


def survival(model, x):
    """P(eps > x)"""
    x = np.asarray(x, dtype=float)
    if isinstance(model, Gaussian):
        out = stats.norm.sf(x, scale=model.sd)
    elif isinstance(model, StudentT):
        out = stats.t.sf(x, model.df, scale=model.scale)
    elif isinstance(model, WeibullTail):
        pos = np.maximum(x, 0.0)
        out = np.where(x < 0, 1.0, np.exp(-model.rate_c * pos ** model.gamma))
    elif isinstance(model, Pareto):
        ratio = np.maximum(x, model.xmin) / model.xmin
        out = np.where(x < model.xmin, 1.0, ratio ** (-model.rho))
    elif isinstance(model, Deterministic):
        raise UnsupportedOperationError('survival is not defined for the deterministic stub')
    else:
        raise TypeError(f'Unknown error model {model!r}')
    return float(out) if out.ndim == 0 else out


def quantile_survival(model, s):
    """x with survival(model, x) == s"""
    if isinstance(model, Deterministic):
        raise UnsupportedOperationError('quantile is not defined for the deterministic stub')
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr > 0)) or np.any(~(s_arr < 1)):
        raise DomainError(f'survival level must lie in (0, 1), got {s!r}')
    if isinstance(model, Gaussian):
        out = stats.norm.isf(s_arr, scale=model.sd)
    elif isinstance(model, StudentT):
        out = stats.t.isf(s_arr, model.df, scale=model.scale)
    elif isinstance(model, WeibullTail):
        out = (-np.log(s_arr) / model.rate_c) ** (1.0 / model.gamma)
    elif isinstance(model, Pareto):
        out = model.xmin * s_arr ** (-1.0 / model.rho)
    else:
        raise TypeError(f'Unknown error model {model!r}')
    return float(out) if out.ndim == 0 else out


def density(model, x):
    """Density of eps at x"""
    x = np.asarray(x, dtype=float)
    if isinstance(model, Gaussian):
        out = stats.norm.pdf(x, scale=model.sd)
    elif isinstance(model, StudentT):
        out = stats.t.pdf(x, model.df, scale=model.scale)
    elif isinstance(model, WeibullTail):
        pos = np.maximum(x, 0.0)
        g, c = model.gamma, model.rate_c
        with np.errstate(divide='ignore'):
            out = np.where(x <= 0, 0.0, c * g * pos ** (g - 1) * np.exp(-c * pos ** g))
    elif isinstance(model, Pareto):
        pos = np.maximum(x, model.xmin)
        out = np.where(x < model.xmin, 0.0,
                       model.rho * model.xmin ** model.rho * pos ** (-model.rho - 1))
    else:
        raise UnsupportedOperationError(f'density is not defined for {type(model).__name__}')
    return float(out) if out.ndim == 0 else out


def draw(model, stream, size=None):
    """I.i.d. draws; the last axis of `size` is the time axis for the stub"""
    if isinstance(model, Deterministic):
        return _replay(model, size)
    rng = as_generator(stream)
    if isinstance(model, Gaussian):
        return rng.normal(0.0, model.sd, size)
    if isinstance(model, StudentT):
        return rng.standard_t(model.df, size) * model.scale
    if isinstance(model, WeibullTail):
        return rng.weibull(model.gamma, size) * model.rate_c ** (-1.0 / model.gamma)
    if isinstance(model, Pareto):
        # numpy's pareto is the Lomax law, shifted by one it has xmin = 1
        return (rng.pareto(model.rho, size) + 1.0) * model.xmin
    raise TypeError(f'Unknown error model {model!r}')


def _replay(model, size):
    values = np.asarray(model.values)
    if size is None:
        return float(values[0])
    shape = (size,) if np.isscalar(size) else tuple(size)
    length = shape[-1]
    if length > len(values):
        raise ParameterError(f'Deterministic stub holds {len(values)} values, {length} requested')
    return np.broadcast_to(values[:length], shape).copy()


def variance(model):
    """Var(eps)"""
    if isinstance(model, Gaussian):
        return model.sd ** 2
    if isinstance(model, StudentT):
        if model.df <= 2:
            raise InfiniteVarianceError(f'Student t with df={model.df} has infinite variance')
        return model.scale ** 2 * model.df / (model.df - 2)
    if isinstance(model, WeibullTail):
        g = model.gamma
        raw = special.gamma(1 + 2 / g) - special.gamma(1 + 1 / g) ** 2
        return model.rate_c ** (-2.0 / g) * raw
    if isinstance(model, Pareto):
        rho = model.rho
        if rho <= 2:
            raise InfiniteVarianceError(f'Pareto with rho={rho} has infinite variance')
        return model.xmin ** 2 * rho / ((rho - 1) ** 2 * (rho - 2))
    raise UnsupportedOperationError(f'variance is not defined for {type(model).__name__}')


def unit_variance_scale(weights, model):
    """Rescale weights so that Var(sum theta_k eps_k) == 1"""
    var = variance(model)
    total = var * weights.sum_of_squares()
    if total <= 0:
        raise ParameterError('weights must contain a nonzero value')
    return weights.scaled(1.0 / math.sqrt(total))


def describe(model):
    """Short label used in CSV rows and metadata"""
    if isinstance(model, Gaussian):
        return f'gaussian(sd={model.sd:g})'
    if isinstance(model, StudentT):
        return f't(df={model.df:g},scale={model.scale:g})'
    if isinstance(model, WeibullTail):
        return f'weibull-tail(gamma={model.gamma:g},C={model.rate_c:g})'
    if isinstance(model, Pareto):
        return f'pareto(rho={model.rho:g},xmin={model.xmin:g})'
    return f'deterministic(len={len(model.values)})'


def parse_error_model(text):
    """'gaussian', 't:3', 'weibull:0.5[:C]' or 'pareto:2[:xmin]'"""
    name, *params = [part.strip() for part in text.split(':')]
    try:
        values = [float(p) for p in params]
    except ValueError as exc:
        raise ParameterError(f'invalid error model {text!r}') from exc
    builders = {'gaussian': Gaussian, 'normal': Gaussian, 't': StudentT, 'weibull': WeibullTail,
                'pareto': Pareto}
    if name.lower() not in builders:
        raise ParameterError(f'unknown error model {name!r}')
    try:
        return builders[name.lower()](*values)
    except TypeError as exc:
        raise ParameterError(f'wrong number of parameters in {text!r}') from exc


def error_model_for_df(df):
    """Student t disturbances for finite df, Gaussian for df = inf"""
    if df is None or math.isinf(df):
        return Gaussian(1.0)
    return StudentT(df)
