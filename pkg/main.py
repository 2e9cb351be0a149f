"""
Command-line entry point
calibrate, run, clusters, limits, reproduce, verify and serve subcommands
"""

import argparse
import json
import logging
import math
import sys

import config
import harness
from calibration import AnalyticMarginal, beta_from_alpha, mc_marginal_quantile, threshold_ladder
from cluster_analysis import conditional_window_histogram, total_variation
from database import ResultStore
from distributions import Pareto, RandomStream, describe, error_model_for_df, parse_error_model
from errors import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, LabError, ParameterError, exit_code_for
from limit_laws import (ClusterSizePmf, cluster_size_pmf, compound_fdr_prob, compound_tail, fdr_limit_prob,
                        ld_rate, poisson_tail, window_empirical_pi, window_reference_pi, window_delta)
from process_models import WeightProfile, build_window_model, generate_ma

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError as exc:
        raise ParameterError(f'expected comma-separated numbers, got {text!r}') from exc


def _df(text):
    return math.inf if text.strip().lower() in ('inf', 'infinity') else float(text)


def _print(data):
    print(json.dumps(data, indent=2, sort_keys=True, default=str))


def cmd_calibrate(args):
    spec = config.ExperimentSpec(model=args.model, nu=[args.nu], r=[args.r], df=[args.df], alpha=args.alpha,
                                 n=args.n, calibration_method=args.method, calibration_budget=args.budget,
                                 master_seed=args.seed, threads=args.threads, repetitions=1)
    model = error_model_for_df(args.df)
    weights = harness.cell_weights(spec, args.r, model)
    stream = RandomStream(args.seed, 0)
    marginal = harness.cell_marginal(spec, weights, model, stream)
    ladder = threshold_ladder(marginal, args.alpha, args.nu, args.k, args.convention)
    _print({'error_model': describe(model), 'weights': weights.values, **ladder.to_dict()})
    return EXIT_OK


def cmd_run(args):
    spec = config.load_spec(args.config)
    if args.threads is not None:
        spec.threads = args.threads
    if args.seed is not None:
        spec.master_seed = args.seed
    spec.validate()
    store = None if args.no_store else ResultStore(args.database)
    result = harness.run_grid(spec, store)
    if store is not None:
        run_id = store.save_run(spec, result.rows, result.failures)
        logger.info('stored run %s', run_id)
    for path in harness.write_grid_outputs(spec, result, args.out):
        print(path)
    return EXIT_OK


def cmd_clusters(args):
    model = parse_error_model(args.error)
    weights = WeightProfile.from_values(_floats(args.weights))
    radius = args.radius if args.radius is not None else weights.span - 1
    x = args.x
    if x is None:
        x, _ = mc_marginal_quantile(harness.sum_sampler(weights, model), args.level, args.level_budget,
                                    RandomStream(args.seed, 1), threads=args.threads)
    hist = conditional_window_histogram(lambda rng: generate_ma(weights, model, args.series_length, rng),
                                        x, max(radius, 1), args.series_count, RandomStream(args.seed, 2),
                                        args.threads)
    report = {'error_model': describe(model), 'weights': weights.values, 'x': x,
              'pmf': {str(q): p for q, p in hist.pmf().items()}, 'metadata': hist.metadata()}
    if isinstance(model, Pareto) and all(v >= 0 for v in weights.values):
        reference = cluster_size_pmf(weights, model.rho)
        report['reference'] = {str(q): p for q, p in reference.as_dict().items()}
        report['total_variation'] = total_variation(hist, reference) if not hist.empty else None
    _print(report)
    return EXIT_OK


def _pmf_arg(args):
    if args.pmf:
        try:
            pairs = dict(item.split(':') for item in args.pmf.split(','))
            return ClusterSizePmf.from_dict({int(q): float(p) for q, p in pairs.items()})
        except ValueError as exc:
            raise ParameterError(f'invalid pmf {args.pmf!r}, expected q:p pairs') from exc
    return cluster_size_pmf(WeightProfile.from_values(_floats(args.weights)), args.rho)


def cmd_limits(args):
    beta = args.beta if args.beta is not None else beta_from_alpha(args.alpha)
    which = args.which
    if which == 'poisson-tail':
        out = {'value': poisson_tail(beta, args.k)}
    elif which == 'fdr-limit':
        out = {'value': fdr_limit_prob(beta, args.k)}
    elif which == 'cluster-pmf':
        pmf = cluster_size_pmf(WeightProfile.from_values(_floats(args.weights)), args.rho)
        out = {'pmf': {str(q): p for q, p in pmf.as_dict().items()}, 'mu': pmf.mu}
    elif which == 'compound-tail':
        out = {'value': compound_tail(beta, _pmf_arg(args), args.k)}
    elif which == 'compound-fdr':
        out = {'value': compound_fdr_prob(beta, _pmf_arg(args), args.k)}
    elif which == 'rate':
        out = {'value': ld_rate(WeightProfile.from_values(_floats(args.weights)), args.gamma)}
    else:
        c = _floats(args.c)
        t = args.t if args.t is not None else float(AnalyticMarginal(error_model_for_df(math.inf)).quantile(
            beta / args.nu))
        model = build_window_model(len(c) // 2, c, window_delta(args.d, t))
        reference, se = window_reference_pi(model, args.d, args.budget, RandomStream(args.seed, 1),
                                           threads=args.threads)
        empirical = window_empirical_pi(model, t, args.budget, RandomStream(args.seed, 2), threads=args.threads)
        out = {'t': t, 'delta': model.delta, 'reference': reference.tolist(), 'reference_se': se.tolist(),
               'empirical': empirical.tolist()}
    _print({'limit': which, 'beta': beta, 'k': args.k, **out})
    return EXIT_OK


def cmd_reproduce(args):
    store = None if args.no_store else ResultStore(args.database)
    for path in harness.reproduce_figure(args.figure, args.preset, args.out, args.seed, args.threads, store):
        print(path)
    return EXIT_OK


def cmd_verify(args):
    names = list(harness.SUITES) if args.suite == 'all' else [args.suite]
    reports = harness.run_suites(names, args.seed, args.threads)
    print(harness.dump_report(reports))
    return EXIT_OK if all(r['passed'] for r in reports) else EXIT_RUNTIME


def cmd_serve(args):
    from app import create_app
    from database import init_db
    init_db(args.database)
    create_app(args.database).run(host=args.host, port=args.port)
    return EXIT_OK


def build_parser():
    parser = Parser(prog='mtlab', description='Multiple testing under moving-average dependence')
    parser.add_argument('-v', '--verbose', action='store_true')
    parser.add_argument('--database', default=config.DATABASE)
    sub = parser.add_subparsers(dest='command', required=True, parser_class=Parser)

    p = sub.add_parser('calibrate', help='critical values for one cell')
    p.add_argument('--model', choices=config.MODELS, default='model1')
    p.add_argument('--nu', type=int, default=10_000)
    p.add_argument('--r', type=int, default=1)
    p.add_argument('--df', type=_df, default=math.inf)
    p.add_argument('--n', type=int, default=config.MODEL2_GROUP_SIZE)
    p.add_argument('--alpha', type=float, default=config.DEFAULT_ALPHA)
    p.add_argument('--k', type=int, default=1)
    p.add_argument('--convention', choices=('beta-over-nu', 'sidak'), default='beta-over-nu')
    p.add_argument('--method', choices=config.CALIBRATION_METHODS, default='auto')
    p.add_argument('--budget', type=int, default=config.DEFAULT_MC_BUDGET)
    p.add_argument('--seed', type=int, default=1)
    p.add_argument('--threads', type=int, default=1)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser('run', help='run a grid from a JSON config')
    p.add_argument('--config', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--threads', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--no-store', action='store_true')
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('clusters', help='conditional window-count histogram')
    p.add_argument('--error', default='pareto:2')
    p.add_argument('--weights', default='2,1')
    p.add_argument('--radius', type=int)
    p.add_argument('--x', type=float)
    p.add_argument('--level', type=float, default=1e-4)
    p.add_argument('--level-budget', type=int, default=10_000_000)
    p.add_argument('--series-length', type=int, default=1_000_000)
    p.add_argument('--series-count', type=int, default=20)
    p.add_argument('--seed', type=int, default=1)
    p.add_argument('--threads', type=int, default=1)
    p.set_defaults(func=cmd_clusters)

    p = sub.add_parser('limits', help='reference limit values')
    p.add_argument('which', choices=('poisson-tail', 'fdr-limit', 'cluster-pmf', 'compound-tail',
                                     'compound-fdr', 'rate', 'thm36', 'window'))
    p.add_argument('--beta', type=float)
    p.add_argument('--alpha', type=float, default=config.DEFAULT_ALPHA)
    p.add_argument('--k', type=int, default=1)
    p.add_argument('--weights', default='1')
    p.add_argument('--rho', type=float, default=2.0)
    p.add_argument('--pmf')
    p.add_argument('--gamma', type=float, default=2.0)
    p.add_argument('--c', default='0.5,0.5')
    p.add_argument('--d', type=float, default=1.0)
    p.add_argument('--t', type=float)
    p.add_argument('--nu', type=int, default=10_000)
    p.add_argument('--budget', type=int, default=1_000_000)
    p.add_argument('--seed', type=int, default=1)
    p.add_argument('--threads', type=int, default=1)
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser('reproduce', help='reproduce a simulation figure')
    p.add_argument('figure', choices=('fig1', 'fig2'))
    p.add_argument('--preset', choices=tuple(config.PRESETS), default='reduced')
    p.add_argument('--out', default='figures')
    p.add_argument('--seed', type=int, default=20090101)
    p.add_argument('--threads', type=int, default=1)
    p.add_argument('--no-store', action='store_true')
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser('verify', help='run verification suites')
    p.add_argument('suite', choices=tuple(harness.SUITES) + ('all',))
    p.add_argument('--seed', type=int)
    p.add_argument('--threads', type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser('serve', help='serve stored runs as JSON')
    p.add_argument('--host', default='127.0.0.1')
    p.add_argument('--port', type=int, default=8080)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_USAGE
    config.configure_logging(args.verbose)
    try:
        return args.func(args)
    except (LabError, OSError) as exc:
        logger.error('%s', exc)
        return exit_code_for(exc)


if __name__ == '__main__':
    sys.exit(main())
