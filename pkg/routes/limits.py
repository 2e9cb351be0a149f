"""
Limit routes module
JSON calculators for the Poisson and compound-Poisson reference values
"""

from flask import Blueprint, jsonify, request

from calibration import beta_from_alpha
from errors import LabError
from limit_laws import (ClusterSizePmf, cluster_size_pmf, compound_fdr_prob, compound_tail, fdr_limit_prob,
                        ld_rate, poisson_tail)
from process_models import WeightProfile

limits_bp = Blueprint('limits', __name__, url_prefix='/limits')


def _beta():
    """beta from ?beta= or from ?alpha= (default alpha 0.05)"""
    return _number('beta') if 'beta' in request.args else beta_from_alpha(_number('alpha', 0.05))


def _number(name, default=None, cast=float):
    text = request.args.get(name)
    if text is None:
        return default
    try:
        return cast(text)
    except ValueError as exc:
        raise LabError(f'{name} must be a number, got {text!r}') from exc


def _weights():
    text = request.args.get('weights', '')
    try:
        return WeightProfile.from_values([float(v) for v in text.split(',') if v.strip()])
    except ValueError as exc:
        raise LabError(f'invalid weights {text!r}: {exc}') from exc


def _pmf():
    """pmf from ?pmf=1:0.75,2:0.25 or from ?weights=&rho="""
    text = request.args.get('pmf', '').strip()
    if text:
        try:
            pairs = dict(item.split(':') for item in text.split(','))
            return ClusterSizePmf.from_dict({int(q): float(p) for q, p in pairs.items()})
        except ValueError as exc:
            raise LabError(f'invalid pmf {text!r}') from exc
    return cluster_size_pmf(_weights(), _number('rho', 2.0))


@limits_bp.errorhandler(LabError)
def lab_error(exc):
    return jsonify({'error': str(exc)}), 400


@limits_bp.route('/poisson-tail')
def poisson_tail_view():
    """P(N >= k) under the Poisson limit"""
    beta, k = _beta(), _number('k', 1, int)
    return jsonify({'beta': beta, 'k': k, 'value': poisson_tail(beta, k)})


@limits_bp.route('/fdr-limit')
def fdr_limit_view():
    """Probability that the top k nulls are all rejected"""
    beta, k = _beta(), _number('k', 1, int)
    return jsonify({'beta': beta, 'k': k, 'value': fdr_limit_prob(beta, k)})


@limits_bp.route('/cluster-pmf')
def cluster_pmf_view():
    """Cluster-size law for nonnegative weights under Pareto tails"""
    pmf = cluster_size_pmf(_weights(), _number('rho', 2.0))
    return jsonify({'pmf': {str(q): p for q, p in pmf.as_dict().items()}, 'mu': pmf.mu})


@limits_bp.route('/compound-tail')
def compound_tail_view():
    beta, k, pmf = _beta(), _number('k', 1, int), _pmf()
    return jsonify({'beta': beta, 'k': k, 'mu': pmf.mu, 'value': compound_tail(beta, pmf, k)})


@limits_bp.route('/compound-fdr')
def compound_fdr_view():
    beta, k, pmf = _beta(), _number('k', 1, int), _pmf()
    return jsonify({'beta': beta, 'k': k, 'mu': pmf.mu, 'value': compound_fdr_prob(beta, pmf, k)})


@limits_bp.route('/rate')
def rate_view():
    """Large-deviation rate of sum theta_k eps_k for gamma > 1"""
    gamma = _number('gamma', 2.0)
    return jsonify({'gamma': gamma, 'value': ld_rate(_weights(), gamma)})
