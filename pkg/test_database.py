"""
Tests for run persistence and the calibration cache table
"""

import math

import pytest

from calibration import AnalyticMarginal, threshold_ladder
from config import ExperimentSpec
from database import ResultStore, get_db_connection, init_db, next_run_id
from distributions import Gaussian
from harness import FailedCell, ResultRow


def make_row(r=1, df=math.inf):
    return ResultRow(model='model1', nu=500, r=r, df=df, threshold=3.5, threshold_se=0.0, repetitions=100,
                     n_positive=5, n_multiple=0, clustering_proportion=0.0, fwer=0.05, dispersion_index=None,
                     mean_cluster_size=1.0, wall_time=0.25)


@pytest.fixture
def store(tmp_path):
    return ResultStore(str(tmp_path / 'lab.db'))


def test_run_ids_increment(store):
    spec = ExperimentSpec(nu=[500], r=[1], df=[math.inf], repetitions=100)
    assert store.save_run(spec, [make_row()], []) == 'RUN1'
    assert store.save_run(spec, [], []) == 'RUN2'
    conn = get_db_connection(store.db_path)
    assert next_run_id(conn) == 'RUN3'
    conn.close()


def test_rows_and_failures_are_stored(store):
    spec = ExperimentSpec(nu=[500], r=[1], df=[2.0, math.inf], repetitions=100)
    run_id = store.save_run(spec, [make_row()], [FailedCell('model1', 500, 1, 2.0, 'infinite variance')])
    conn = get_db_connection(store.db_path)
    run = conn.execute('SELECT * FROM runs WHERE run_id = ?', (run_id,)).fetchone()
    row = conn.execute('SELECT * FROM result_rows WHERE run_id = ?', (run_id,)).fetchone()
    failure = conn.execute('SELECT * FROM failed_cells WHERE run_id = ?', (run_id,)).fetchone()
    conn.close()
    assert run['row_count'] == 1 and run['failure_count'] == 1
    assert row['df'] == 'inf'
    assert row['dispersion_index'] is None
    assert row['wall_time'] == 0.25
    assert failure['df'] == '2.0'


def test_calibration_round_trip(store):
    ladder = threshold_ladder(AnalyticMarginal(Gaussian()), 0.05, 500, 2)
    assert store.fetch_calibration('key') is None
    store.store_calibration('key', ladder)
    assert store.fetch_calibration('key') == ladder


def test_init_db_is_idempotent(tmp_path):
    path = str(tmp_path / 'again.db')
    init_db(path)
    init_db(path)
    conn = get_db_connection(path)
    tables = {r['name'] for r in conn.execute("SELECT name FROM sqlite_master WHERE type='table'")}
    conn.close()
    assert {'runs', 'result_rows', 'failed_cells', 'calibration_cache'} <= tables
