"""
Configuration module
Constants, presets, logging setup and JSON loading of experiment specs
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields

from errors import ConfigError

# Database configuration
DATABASE = os.environ.get('MTLAB_DATABASE', 'mtlab.db')

# Defaults labelled as choices in emitted metadata
DEFAULT_DF_GRID = (3.0, 4.0, 6.0, 10.0, 20.0, math.inf)
DEFAULT_R_GRID = (1, 3, 10, 50)
FULL_NU_GRID = (500, 1000, 2000, 5000, 10000)
REDUCED_NU_GRID = (500, 2000, 10000)
DEFAULT_ALPHA = 0.05
DEFAULT_MC_BUDGET = 200_000_000
MC_CHUNK_SIZE = 1 << 20
MODEL2_GROUP_SIZE = 10

PRESETS = {
    'full': {'repetitions': 10_000, 'nu': FULL_NU_GRID, 'calibration_budget': DEFAULT_MC_BUDGET},
    'reduced': {'repetitions': 2_000, 'nu': REDUCED_NU_GRID, 'calibration_budget': 20_000_000},
}

MODELS = ('model1', 'model2')
CALIBRATION_METHODS = ('auto', 'analytic', 'monte-carlo')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(verbose=False):
    """Install a single stream handler on the root logger"""
    level = logging.DEBUG if verbose else logging.INFO
    root = logging.getLogger()
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    root.setLevel(level)


@dataclass
class ExperimentSpec:
    """One grid of (nu, r, df) cells for Model 1 or Model 2"""
    model: str = 'model1'
    nu: list = field(default_factory=lambda: list(REDUCED_NU_GRID))
    r: list = field(default_factory=lambda: list(DEFAULT_R_GRID))
    df: list = field(default_factory=lambda: list(DEFAULT_DF_GRID))
    alpha: float = DEFAULT_ALPHA
    repetitions: int = 10_000
    n: int = MODEL2_GROUP_SIZE
    weights: list = None
    calibration_method: str = 'auto'
    calibration_budget: int = DEFAULT_MC_BUDGET
    master_seed: int = 20090101
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError(f'model must be one of {MODELS}, got {self.model!r}')
        if not 0 < self.alpha < 1:
            raise ConfigError('alpha must lie in (0, 1)')
        if self.repetitions < 1:
            raise ConfigError('repetitions must be at least 1')
        if self.n < 2:
            raise ConfigError('n must be at least 2')
        if any(v < 1 for v in self.nu):
            raise ConfigError('nu values must be positive')
        if self.weights is not None:
            if not self.weights or not any(self.weights):
                raise ConfigError('weights must contain a nonzero value')
            if self.r and list(self.r) != [len(self.weights)]:
                raise ConfigError('r must be omitted or equal to [len(weights)] when weights are given')
            self.r = [len(self.weights)]
        if any(v < 1 for v in self.r):
            raise ConfigError('r values must be at least 1')
        if any(not v > 0 for v in self.df):
            raise ConfigError('df values must be positive (use "inf" for Gaussian errors)')
        if self.calibration_method not in CALIBRATION_METHODS:
            raise ConfigError(f'calibration_method must be one of {CALIBRATION_METHODS}')
        if self.calibration_budget < 1:
            raise ConfigError('calibration_budget must be positive')
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError('master_seed must be a 64-bit unsigned integer')
        if self.threads < 1:
            raise ConfigError('threads must be at least 1')

    def to_json(self):
        data = asdict(self)
        data['df'] = [_encode_df(v) for v in self.df]
        return data


def _encode_df(value):
    return 'inf' if math.isinf(value) else value


def _parse_df(value):
    if isinstance(value, str):
        if value.strip().lower() in ('inf', 'infinity', '∞'):
            return math.inf
        raise ConfigError(f'df entry {value!r} is not a number or "inf"')
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f'df entry {value!r} is not a number or "inf"')
    return float(value)


_INT_LIST_FIELDS = ('nu', 'r')
_INT_FIELDS = ('repetitions', 'n', 'calibration_budget', 'master_seed', 'threads')


def spec_from_dict(data):
    """Build an ExperimentSpec, rejecting unknown keys"""
    if not isinstance(data, dict):
        raise ConfigError('config must be a JSON object')
    known = {f.name for f in fields(ExperimentSpec)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f'unknown config keys: {", ".join(unknown)}')
    kwargs = dict(data)
    try:
        for name in _INT_LIST_FIELDS:
            if name in kwargs:
                kwargs[name] = [_as_int(v, name) for v in kwargs[name]]
        for name in _INT_FIELDS:
            if name in kwargs:
                kwargs[name] = _as_int(kwargs[name], name)
        if 'df' in kwargs:
            kwargs['df'] = [_parse_df(v) for v in kwargs['df']]
        if 'alpha' in kwargs:
            kwargs['alpha'] = float(kwargs['alpha'])
        if kwargs.get('weights') is not None:
            kwargs['weights'] = [float(v) for v in kwargs['weights']]
            kwargs.setdefault('r', [len(kwargs['weights'])])
    except (TypeError, ValueError, OverflowError) as exc:
        raise ConfigError(f'malformed config value: {exc}') from exc
    return ExperimentSpec(**kwargs)


def _as_int(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise ConfigError(f'{name} must hold integers, got {value!r}')
    return int(value)


def load_spec(path):
    """Read one JSON document mirroring ExperimentSpec"""
    try:
        with open(path, encoding='utf-8') as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f'cannot read config {path}: {exc}') from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f'config {path} is not valid JSON: {exc}') from exc
    return spec_from_dict(data)


def preset_spec(which, preset, master_seed=20090101, threads=1):
    """Grid reproducing one of the two simulation figures"""
    if which not in ('fig1', 'fig2'):
        raise ConfigError(f'unknown figure {which!r}')
    if preset not in PRESETS:
        raise ConfigError(f'unknown preset {preset!r}')
    settings = PRESETS[preset]
    return ExperimentSpec(
        model='model1' if which == 'fig1' else 'model2',
        nu=list(settings['nu']),
        r=list(DEFAULT_R_GRID),
        df=list(DEFAULT_DF_GRID),
        alpha=DEFAULT_ALPHA,
        repetitions=settings['repetitions'],
        calibration_budget=settings['calibration_budget'],
        master_seed=master_seed,
        threads=threads,
    )
