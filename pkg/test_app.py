"""
Tests for the JSON API
"""

import math

import pytest

from app import create_app
from config import ExperimentSpec
from database import ResultStore
from test_database import make_row


@pytest.fixture
def client(tmp_path):
    path = str(tmp_path / 'api.db')
    store = ResultStore(path)
    spec = ExperimentSpec(nu=[500], r=[1, 3], df=[math.inf], repetitions=100)
    store.save_run(spec, [make_row(1), make_row(3)], [])
    app = create_app(path)
    app.config['TESTING'] = True
    return app.test_client()


def test_index_lists_endpoints(client):
    data = client.get('/').get_json()
    assert data['runs'] == '/runs/'


def test_runs_listing(client):
    data = client.get('/runs/').get_json()
    assert data['total_count'] == 1
    assert data['runs'][0]['run_id'] == 'RUN1'
    assert not data['has_next']


def test_runs_since_filter(client):
    assert client.get('/runs/?since=2000-01-01T00:00:00').get_json()['total_count'] == 1
    assert client.get('/runs/?since=2999-01-01').get_json()['total_count'] == 0
    assert client.get('/runs/?since=yesterday').status_code == 400


def test_run_detail(client):
    data = client.get('/runs/RUN1').get_json()
    assert [row['r'] for row in data['rows']] == [1, 3]
    assert data['failures'] == []
    assert client.get('/runs/RUN9').status_code == 404


def test_limit_endpoints(client):
    assert client.get('/limits/poisson-tail?alpha=0.05&k=1').get_json()['value'] == pytest.approx(0.05)
    fdr = client.get('/limits/fdr-limit?alpha=0.05&k=2').get_json()['value']
    assert fdr == pytest.approx(0.0037078, abs=5e-8)
    pmf = client.get('/limits/cluster-pmf?weights=2,1&rho=2').get_json()
    assert pmf['pmf'] == pytest.approx({'1': 0.75, '2': 0.25})
    tail = client.get('/limits/compound-tail?alpha=0.05&k=1&pmf=1:0.75,2:0.25').get_json()
    assert tail['value'] == pytest.approx(0.040204, abs=5e-7)
    assert client.get('/limits/rate?weights=1,1&gamma=2').get_json()['value'] == pytest.approx(0.5)


def test_limit_errors_return_400(client):
    assert client.get('/limits/poisson-tail?k=0').status_code == 400
    assert client.get('/limits/rate?weights=1,x').status_code == 400
    assert client.get('/limits/compound-fdr?pmf=1:0.5').status_code == 400


def test_unparseable_beta_is_rejected(client):
    response = client.get('/limits/poisson-tail?beta=abc&k=1')
    assert response.status_code == 400
    assert 'beta' in response.get_json()['error']
    assert client.get('/limits/fdr-limit?alpha=lots').status_code == 400
    assert client.get('/limits/fdr-limit?k=two').status_code == 400
    explicit = client.get(f'/limits/poisson-tail?beta={-math.log(0.95)}&k=1').get_json()
    assert explicit['value'] == pytest.approx(0.05)
