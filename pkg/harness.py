"""
Experiment harness module
Runs config-driven grids of Model 1 / Model 2 cells, reproduces the two
simulation figures and hosts the verification suites behind the CLI
"""

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

import plotting
from calibration import (AnalyticMarginal, SamplerMarginal, beta_from_alpha, ladder_cache_key,
                         mc_marginal_quantile, threshold_ladder)
from cluster_analysis import (clustering_proportion, conditional_window_histogram, dispersion_index,
                              pooled_spacing_pvalue, run_clusters, total_variation)
from config import DEFAULT_DF_GRID, MC_CHUNK_SIZE, PRESETS, ExperimentSpec, preset_spec
from distributions import (Gaussian, Pareto, RandomStream, StudentT, WeibullTail, derive_stream_index,
                           describe, draw, error_model_for_df, unit_variance_scale)
from errors import CalibrationError, LabError, OutputError
from limit_laws import (cluster_size_pmf, compound_tail, fdr_limit_prob, poisson_clustering_ratio,
                        poisson_tail, window_empirical_pi, window_reference_pi, window_delta)
from procedures import bh_event_holds, count_exceedances, exceedance_indices, stepdown_reject
from process_models import (WeightProfile, build_window_model, equal_weights, generate_ma,
                            generate_t_stat_batch, t_statistics)

logger = logging.getLogger(__name__)


@dataclass
class ResultRow:
    model: str
    nu: int
    r: int
    df: float
    threshold: float
    threshold_se: float
    repetitions: int
    n_positive: int
    n_multiple: int
    clustering_proportion: float
    fwer: float
    dispersion_index: float
    mean_cluster_size: float
    wall_time: float = 0.0

    def sort_key(self):
        return (self.model, self.nu, self.r, self.df)

    def to_dict(self):
        return asdict(self)


@dataclass
class FailedCell:
    model: str
    nu: int
    r: int
    df: float
    reason: str


@dataclass
class GridResult:
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)


@dataclass
class CellOutcome:
    """Per-replicate counts of one cell"""
    counts: np.ndarray
    clusters: int
    clustered_exceedances: int
    indices: list = None


def df_label(df):
    return 'inf' if math.isinf(df) else f'{df:g}'


class CalibrationCache:
    """In-process ladder cache, optionally backed by the sqlite store"""

    def __init__(self, store=None):
        self.store = store
        self.entries = {}

    def get(self, key):
        if key in self.entries:
            logger.debug('calibration cache hit %s', key)
            return self.entries[key]
        if self.store is not None:
            ladder = self.store.fetch_calibration(key)
            if ladder is not None:
                logger.debug('calibration store hit %s', key)
                self.entries[key] = ladder
            return ladder
        return None

    def put(self, key, ladder):
        self.entries[key] = ladder
        if self.store is not None:
            self.store.store_calibration(key, ladder)


def cell_weights(spec, r, model):
    """Weights of one cell scaled so that var(X_i) = 1"""
    base = WeightProfile.from_values(spec.weights) if spec.weights else equal_weights(r)
    return unit_variance_scale(base, model)


def sum_sampler(weights, model):
    """Draws of sum_k theta_k eps_k"""
    theta = np.asarray(weights.nonzero_values())

    def sampler(rng, size):
        return draw(model, rng, (size, theta.size)) @ theta
    return sampler


def t_stat_sampler(weights, model, n):
    """Draws of a single null t-statistic built from n grouped replicates"""
    theta = np.asarray(weights.nonzero_values())

    def sampler(rng, size):
        values = draw(model, rng, (size, n, theta.size)) @ theta
        return t_statistics(values)
    return sampler


def cell_marginal(spec, weights, model, stream):
    """Analytic marginal when one exists and is allowed, otherwise Monte Carlo"""
    analytic = None
    nonzero = weights.nonzero_values()
    if spec.model == 'model1':
        if isinstance(model, Gaussian):
            analytic = AnalyticMarginal(Gaussian(model.sd * math.sqrt(weights.sum_of_squares())))
        elif len(nonzero) == 1:
            analytic = AnalyticMarginal(model, abs(nonzero[0]))
        sampler = sum_sampler(weights, model)
        cost = len(nonzero)
    else:
        if isinstance(model, Gaussian):
            # divisor-n t-statistic of Gaussian data is sqrt(n/(n-1)) * t_{n-1}
            analytic = AnalyticMarginal(StudentT(spec.n - 1, math.sqrt(spec.n / (spec.n - 1))))
        sampler = t_stat_sampler(weights, model, spec.n)
        cost = len(nonzero) * spec.n
    method = spec.calibration_method
    if method == 'analytic' and analytic is None:
        raise CalibrationError('no analytic marginal for this cell; use monte-carlo calibration')
    if analytic is not None and method != 'monte-carlo':
        return analytic
    chunk = max(1024, MC_CHUNK_SIZE // cost)
    return SamplerMarginal(sampler, spec.calibration_budget, stream, chunk, spec.threads)


def calibrate_cell(spec, nu, r, df, weights, model, cache):
    key = ladder_cache_key(model=spec.model, n=spec.n, weights=weights.values, df=df_label(df), nu=nu,
                           alpha=spec.alpha, method=spec.calibration_method,
                           budget=spec.calibration_budget, seed=spec.master_seed)
    ladder = cache.get(key)
    if ladder is None:
        stream = RandomStream(spec.master_seed,
                              derive_stream_index(('calibration', spec.model, nu, r, df_label(df)), 0))
        ladder = threshold_ladder(cell_marginal(spec, weights, model, stream), spec.alpha, nu, 1)
        cache.put(key, ladder)
    return ladder


def _replicate(spec, cell_key, i, weights, model, nu, t, gap, keep_indices):
    rng = RandomStream(spec.master_seed, derive_stream_index(cell_key, i)).generator()
    if spec.model == 'model1':
        series = generate_ma(weights, model, nu, rng)
    else:
        series = generate_t_stat_batch(weights, model, nu, spec.n, 1, rng)[0]
    idx = exceedance_indices(series, t)
    sizes = run_clusters(idx, gap)
    return idx.size, len(sizes), idx if keep_indices else None


def simulate_cell(spec, nu, r, df, weights, model, t, keep_indices=False):
    """Run all replicates of one cell; order-independent in the thread count"""
    cell_key = (spec.model, spec.n, nu, r, df_label(df))
    gap = weights.span

    def work(i):
        return _replicate(spec, cell_key, i, weights, model, nu, t, gap, keep_indices)
    with ThreadPoolExecutor(max_workers=spec.threads) as pool:
        results = list(pool.map(work, range(spec.repetitions)))
    counts = np.array([n for n, _, _ in results], dtype=np.int64)
    clusters = sum(c for _, c, _ in results)
    indices = [idx for _, _, idx in results] if keep_indices else None
    return CellOutcome(counts, clusters, int(counts.sum()), indices)


def summarize_cell(spec, nu, r, df, ladder, outcome, wall_time):
    counts = outcome.counts
    return ResultRow(
        model=spec.model, nu=nu, r=r, df=df,
        threshold=ladder.t1, threshold_se=ladder.se[0], repetitions=spec.repetitions,
        n_positive=int(np.count_nonzero(counts > 0)), n_multiple=int(np.count_nonzero(counts > 1)),
        clustering_proportion=clustering_proportion(counts),
        fwer=float(np.count_nonzero(counts > 0) / counts.size),
        dispersion_index=dispersion_index(counts) if counts.size > 1 else None,
        mean_cluster_size=(outcome.clustered_exceedances / outcome.clusters) if outcome.clusters else None,
        wall_time=wall_time,
    )


def run_cell(spec, nu, r, df, cache=None, keep_indices=False):
    """Calibrate and simulate one (nu, r, df) cell"""
    cache = cache or CalibrationCache()
    started = time.perf_counter()
    model = error_model_for_df(df)
    weights = cell_weights(spec, r, model)
    ladder = calibrate_cell(spec, nu, r, df, weights, model, cache)
    outcome = simulate_cell(spec, nu, r, df, weights, model, ladder.t1, keep_indices)
    row = summarize_cell(spec, nu, r, df, ladder, outcome, time.perf_counter() - started)
    return row, outcome


def run_grid(spec, store=None, cache=None):
    """One row per (nu, r, df) cell; failed cells are logged and reported"""
    cache = cache or CalibrationCache(store)
    result = GridResult()
    cells = sorted((nu, r, df) for nu in spec.nu for r in spec.r for df in spec.df)
    for nu, r, df in cells:
        logger.info('cell %s nu=%d r=%d df=%s', spec.model, nu, r, df_label(df))
        try:
            row, _ = run_cell(spec, nu, r, df, cache)
        except LabError as exc:
            logger.warning('cell nu=%d r=%d df=%s failed: %s', nu, r, df_label(df), exc)
            result.failures.append(FailedCell(spec.model, nu, r, df, str(exc)))
            continue
        result.rows.append(row)
    result.rows.sort(key=ResultRow.sort_key)
    return result


def grid_metadata(spec, result):
    return {
        'spec': spec.to_json(),
        'choices': {
            'df_grid': [df_label(v) for v in DEFAULT_DF_GRID],
            'presets': {k: {kk: list(vv) if isinstance(vv, tuple) else vv for kk, vv in v.items()}
                        for k, v in PRESETS.items()},
            'cluster_gap': 'span of the weight support',
            'equal_weights': 'nonzero weights on offsets 0..r-1',
        },
        'failures': [asdict(f) | {'df': df_label(f.df)} for f in result.failures],
        'wall_time': {f'{r.nu}/{r.r}/{df_label(r.df)}': r.wall_time for r in result.rows},
    }


def write_grid_outputs(spec, result, out_dir, stem='results'):
    """CSV of all rows plus a metadata JSON"""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OutputError(out_dir, exc.strerror or str(exc)) from exc
    csv_path = os.path.join(out_dir, f'{stem}.csv')
    plotting.write_rows_csv(result.rows, csv_path)
    meta_path = os.path.join(out_dir, f'{stem}.meta.json')
    plotting.write_json(grid_metadata(spec, result), meta_path)
    return [csv_path, meta_path]


PANEL_LETTERS = 'abcd'


def reproduce_figure(which, preset, out_dir, master_seed=20090101, threads=1, store=None):
    """CSV + SVG per panel, panels (a)-(d) being r = 1, 3, 10, 50"""
    spec = preset_spec(which, preset, master_seed, threads)
    result = run_grid(spec, store)
    if store is not None:
        store.save_run(spec, result.rows, result.failures)
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OutputError(out_dir, exc.strerror or str(exc)) from exc
    written = []
    for letter, r in zip(PANEL_LETTERS, spec.r):
        rows = [row for row in result.rows if row.r == r]
        stem = os.path.join(out_dir, f'{which}{letter}_r{r}')
        plotting.write_rows_csv(rows, stem + '.csv')
        title = f'{"Model 1" if which == "fig1" else "Model 2 (n = %d)" % spec.n}, r = {r}'
        plotting.panel_svg(rows, stem + '.svg', title)
        written += [stem + '.csv', stem + '.svg']
    meta = os.path.join(out_dir, f'{which}.meta.json')
    plotting.write_json(grid_metadata(spec, result), meta)
    written.append(meta)
    return written


# Verification suites


def _check(name, value, passed, expected):
    return {'name': name, 'value': value, 'expected': expected, 'passed': bool(passed)}


def _report(name, checks, **extra):
    return {'suite': name, 'passed': all(c['passed'] for c in checks), 'checks': checks, **extra}


def verify_independence(repetitions=10_000, nu=10_000, seed=1, threads=1):
    """Poisson baseline: rates of N >= 1 and N > 1, dispersion, spacing uniformity"""
    spec = ExperimentSpec(model='model1', nu=[nu], r=[1], df=[math.inf], repetitions=repetitions,
                          master_seed=seed, threads=threads)
    row, outcome = run_cell(spec, nu, 1, math.inf, keep_indices=True)
    beta = beta_from_alpha(spec.alpha)
    multiple = row.n_multiple / repetitions
    pvalue = pooled_spacing_pvalue(outcome.indices, nu)
    checks = [
        _check('unconditional P(N>1)', multiple, 0.0005 <= multiple <= 0.0025, '[0.0005, 0.0025]'),
        _check('FWER', row.fwer, 0.044 <= row.fwer <= 0.056, '[0.044, 0.056]'),
        _check('clustering proportion', row.clustering_proportion,
               row.clustering_proportion is not None and 0.015 <= row.clustering_proportion <= 0.036,
               f'[0.015, 0.036] around {poisson_clustering_ratio(beta):.5f}'),
        _check('dispersion index', row.dispersion_index,
               row.dispersion_index is not None and 0.90 <= row.dispersion_index <= 1.10, '[0.90, 1.10]'),
        _check('pooled spacing KS p-value', pvalue, pvalue is not None and pvalue >= 0.01, '>= 0.01'),
    ]
    return _report('independence', checks, row=row.to_dict())


def verify_light_tails(repetitions=2_000, nus=(500, 2000, 10_000), seed=2, threads=1,
                       calibration_budget=20_000_000):
    """Clustering smaller for Gaussian than for t_3 errors, and nonincreasing in nu"""
    spec = ExperimentSpec(model='model1', nu=list(nus), r=[3], df=[3.0, math.inf], repetitions=repetitions,
                          master_seed=seed, threads=threads, calibration_budget=calibration_budget)
    result = run_grid(spec)
    table = {(row.nu, row.df): row.clustering_proportion or 0.0 for row in result.rows}
    checks = []
    for nu in nus:
        heavy, light = table.get((nu, 3.0)), table.get((nu, math.inf))
        checks.append(_check(f'nu={nu}: df=inf below df=3', [light, heavy],
                             heavy is not None and light is not None and light < heavy, 'light < heavy'))
    gauss_rows = [row for row in result.rows if math.isinf(row.df)]
    gauss = [row.clustering_proportion or 0.0 for row in gauss_rows]
    se = [math.sqrt(max(p * (1 - p), 1e-4) / max(1, row.n_positive)) for p, row in zip(gauss, gauss_rows)]
    # two standard errors of slack between consecutive nu
    ok = all(b <= a + 2 * math.hypot(sa, sb) for a, b, sa, sb in zip(gauss, gauss[1:], se, se[1:]))
    checks.append(_check('df=inf nonincreasing in nu', gauss, ok, 'nonincreasing within 2 SE'))
    return _report('light-tails', checks)


def _marginal_level(weights, model, s, budget, seed, threads):
    stream = RandomStream(seed, derive_stream_index(('level', weights.values, describe(model), s), 0))
    chunk = max(1024, MC_CHUNK_SIZE // len(weights.nonzero_values()))
    t, _ = mc_marginal_quantile(sum_sampler(weights, model), s, budget, stream, chunk, threads)
    return t


def _histogram(weights, model, x, series_length, series_count, seed, threads):
    r = weights.span - 1
    stream = RandomStream(seed, derive_stream_index(('scan', weights.values, describe(model), x), 0))
    return conditional_window_histogram(lambda rng: generate_ma(weights, model, series_length, rng),
                                        x, max(r, 1), series_count, stream, threads)


def verify_heavy_ties(levels=(1e-4, 1e-5), series_length=1_000_000, series_count=40, seed=3,
                      threads=1, level_budget=50_000_000):
    """Weibull gamma=0.5 with two tied maximal weights: M concentrates on 2"""
    weights = WeightProfile.from_values([1.0, 1.0])
    model = WeibullTail(0.5, 1.0)
    shares = []
    for s in levels:
        x = _marginal_level(weights, model, s, level_budget, seed, threads)
        hist = _histogram(weights, model, x, series_length, series_count, seed, threads)
        shares.append(hist.pmf().get(2, 0.0))
    checks = [
        _check(f'P(M=2) at survival {levels[0]:g}', shares[0], shares[0] >= 0.8, '>= 0.8'),
        _check('P(M=2) increases with the level', shares, shares[-1] >= shares[0], 'nondecreasing'),
    ]
    return _report('heavy-ties', checks)


def verify_heavy_unique(level=1e-5, series_length=1_000_000, series_count=40, seed=4, threads=1,
                        level_budget=50_000_000):
    """Weibull gamma=0.5 with a unique maximal weight: no clustering"""
    weights = WeightProfile.from_values([1.0, 0.5])
    model = WeibullTail(0.5, 1.0)
    x = _marginal_level(weights, model, level, level_budget, seed, threads)
    share = _histogram(weights, model, x, series_length, series_count, seed, threads).pmf().get(1, 0.0)
    return _report('heavy-unique', [_check(f'P(M=1) at survival {level:g}', share, share >= 0.9, '>= 0.9')])


PARETO_WEIGHTS = (2.0, 1.0)


def verify_pareto_clusters(level=1e-5, series_length=1_000_000, series_count=250, seed=5, threads=1,
                           level_budget=100_000_000):
    """Empirical M_1 law against p_q = (theta_(q)^rho - theta_(q+1)^rho) / theta_(1)^rho"""
    weights = WeightProfile.from_values(PARETO_WEIGHTS)
    model = Pareto(2.0)
    x = _marginal_level(weights, model, level, level_budget, seed, threads)
    hist = _histogram(weights, model, x, series_length, series_count, seed, threads)
    reference = cluster_size_pmf(weights, model.rho)
    tv = total_variation(hist, reference)
    checks = [
        _check('conditional records', hist.total, hist.total >= 2000, '>= 2000'),
        _check('total variation to p_q', tv, tv <= 0.05, '<= 0.05'),
    ]
    return _report('pareto-clusters', checks, pmf=hist.pmf(), reference=reference.as_dict(),
                   metadata=hist.metadata())


def verify_compound(repetitions=20_000, nu=10_000, seed=6, threads=1, calibration_budget=200_000_000):
    """P0(N >= k) under Pareto disturbances against the compound Poisson tail"""
    weights = WeightProfile.from_values(PARETO_WEIGHTS)
    model = Pareto(2.0)
    beta = beta_from_alpha(0.05)
    stream = RandomStream(seed, derive_stream_index(('compound-calibration', nu), 0))
    t, _ = mc_marginal_quantile(sum_sampler(weights, model), beta / nu, calibration_budget, stream,
                                MC_CHUNK_SIZE // 2, threads)

    def work(i):
        rng = RandomStream(seed, derive_stream_index(('compound', nu), i)).generator()
        return count_exceedances(generate_ma(weights, model, nu, rng), t)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        counts = np.array(list(pool.map(work, range(repetitions))))
    pmf = cluster_size_pmf(weights, model.rho)
    checks, poisson_misses = [], 0
    for k in range(1, 5):
        p_hat = float(np.mean(counts >= k))
        se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / repetitions)
        ref = compound_tail(beta, pmf, k)
        checks.append(_check(f'P(N>={k}) vs compound tail', [p_hat, ref], abs(p_hat - ref) <= 3 * se + 1e-12,
                             'within 3 SE'))
        if abs(p_hat - poisson_tail(beta, k)) > 3 * se:
            poisson_misses += 1
    checks.append(_check('plain Poisson tail rejected for some k', poisson_misses, poisson_misses >= 1, '>= 1'))
    return _report('compound', checks)


def verify_fdr(repetitions=50_000, nu=10_000, seed=7, threads=1):
    """Step-down limit probabilities: dominance by beta, exact k=2 value and Monte Carlo agreement"""
    beta = beta_from_alpha(0.05)
    values = [fdr_limit_prob(beta, k) for k in range(1, 21)]
    exact_k2 = poisson_tail(beta, 2) + beta * math.exp(-beta) * (1 - math.exp(-beta))
    checks = [
        _check('dominated by beta for k <= 20', max(values), max(values) <= beta, f'<= {beta:.7f}'),
        _check('k=2 exact value', values[1], abs(values[1] - exact_k2) <= 1e-6, f'{exact_k2:.7f}'),
    ]
    spec = ExperimentSpec(model='model1', nu=[nu], r=[1], df=[math.inf], repetitions=repetitions,
                          master_seed=seed, threads=threads)
    ladder = threshold_ladder(AnalyticMarginal(Gaussian(1.0)), spec.alpha, nu, 3)

    def work(i):
        rng = RandomStream(seed, derive_stream_index(('fdr', nu), i)).generator()
        series = rng.standard_normal(nu)
        events = [bh_event_holds(series, ladder.thresholds[:k]) for k in (1, 2, 3)]
        return [stepdown_reject(series, ladder).k_star] + events
    with ThreadPoolExecutor(max_workers=threads) as pool:
        outcomes = np.array(list(pool.map(work, range(repetitions))), dtype=int)
    k_star, events = outcomes[:, 0], outcomes[:, 1:].astype(bool)
    # rejecting the top k forces N^(i) >= i for i <= k
    violations = int(sum(np.count_nonzero((k_star >= k) & ~events[:, k - 1]) for k in (1, 2, 3)))
    checks.append(_check('step-down rejections satisfy the count event', violations, violations == 0, '0'))
    for k in (1, 2, 3):
        p_hat = float(np.mean(k_star >= k))
        se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / repetitions)
        ref = fdr_limit_prob(beta, k)
        checks.append(_check(f'top-{k} rejection vs limit', [p_hat, ref], abs(p_hat - ref) <= 3 * se + 1e-4,
                             'within 3 SE'))
    return _report('fdr', checks)


def verify_gaussian_window(d=1.0, nu=10_000, draws=1_000_000, reference_draws=10_000_000, seed=8, threads=1):
    """Conditional window counts against the limiting pi_k^0"""
    beta = beta_from_alpha(0.05)
    t = float(AnalyticMarginal(Gaussian(1.0)).quantile(beta / nu))
    model = build_window_model(1, (0.5, 0.5), window_delta(d, t))
    empirical = window_empirical_pi(model, t, draws, RandomStream(seed, 1), threads=threads)
    reference, _ = window_reference_pi(model, d, reference_draws, RandomStream(seed, 2), threads=threads)
    gaps = np.abs(empirical - reference)
    degenerate = build_window_model(1, (0.0, 0.0), window_delta(d, t))
    flat = window_empirical_pi(degenerate, t, 10_000, RandomStream(seed, 3))
    checks = [_check(f'|pi_{k} - pi_{k}^0|', [float(empirical[k]), float(reference[k])], gaps[k] <= 0.05,
                     '<= 0.05') for k in range(3)]
    checks.append(_check('c = 0 gives pi_2r = 1', float(flat[-1]), flat[-1] == 1.0, '1'))
    return _report('gaussian-window', checks, t=t, delta=window_delta(d, t))


SUITES = {
    'independence': verify_independence,
    'light-tails': verify_light_tails,
    'heavy-ties': verify_heavy_ties,
    'heavy-unique': verify_heavy_unique,
    'pareto-clusters': verify_pareto_clusters,
    'compound': verify_compound,
    'fdr': verify_fdr,
    'gaussian-window': verify_gaussian_window,
}


def run_suites(names, seed=None, threads=1):
    reports = []
    for name in names:
        kwargs = {'threads': threads}
        if seed is not None:
            kwargs['seed'] = seed
        logger.info('verification suite %s', name)
        reports.append(SUITES[name](**kwargs))
    return reports


def dump_report(reports):
    return json.dumps(reports, indent=2, default=str)
