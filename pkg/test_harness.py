"""
Tests for grid runs, figure output and verification suites
"""

import json
import math
import os

import pytest
from scipy import stats

import harness
import plotting
from config import ExperimentSpec
from database import ResultStore

BETA = -math.log(0.95)


def small_spec(**overrides):
    settings = dict(model='model1', nu=[200], r=[1, 3], df=[math.inf], repetitions=200, master_seed=1)
    settings.update(overrides)
    return ExperimentSpec(**settings)


def test_gaussian_cells_use_analytic_thresholds():
    result = harness.run_grid(small_spec())
    assert [row.r for row in result.rows] == [1, 3]
    assert not result.failures
    for row in result.rows:
        assert row.threshold == pytest.approx(stats.norm.isf(BETA / 200))
        assert row.threshold_se == 0.0
        assert row.repetitions == 200
        assert row.n_multiple <= row.n_positive <= 200
        assert 0.0 <= row.fwer <= 1.0


def test_model2_gaussian_threshold():
    spec = small_spec(model='model2', r=[1], n=10)
    row = harness.run_grid(spec).rows[0]
    expected = math.sqrt(10 / 9) * stats.t.isf(BETA / 200, 9)
    assert row.threshold == pytest.approx(expected)


def test_infinite_variance_cell_is_reported_as_failure():
    result = harness.run_grid(small_spec(r=[1], df=[2.0, math.inf]))
    assert len(result.rows) == 1
    assert len(result.failures) == 1
    failure = result.failures[0]
    assert failure.df == 2.0
    assert 'infinite variance' in failure.reason


def test_empty_grid_writes_header_only(tmp_path):
    spec = small_spec(nu=[])
    result = harness.run_grid(spec)
    assert result.rows == [] and result.failures == []
    csv_path, meta_path = harness.write_grid_outputs(spec, result, str(tmp_path))
    with open(csv_path, encoding='utf-8') as fh:
        assert fh.read() == ','.join(plotting.CSV_COLUMNS) + '\n'
    assert os.path.exists(meta_path)


def test_csv_identical_across_thread_counts(tmp_path):
    spec_kwargs = dict(nu=[100], r=[3], df=[6.0], repetitions=100, calibration_budget=400_000)
    outputs = []
    for threads in (1, 3):
        spec = small_spec(threads=threads, **spec_kwargs)
        result = harness.run_grid(spec)
        csv_path, _ = harness.write_grid_outputs(spec, result, str(tmp_path / f'threads{threads}'))
        with open(csv_path, 'rb') as fh:
            outputs.append(fh.read())
    assert outputs[0] == outputs[1]
    assert len(outputs[0].splitlines()) == 2


def test_monte_carlo_cell_reports_standard_error():
    spec = small_spec(nu=[100], r=[3], df=[6.0], repetitions=50, calibration_budget=400_000)
    row, _ = harness.run_cell(spec, 100, 3, 6.0)
    assert row.threshold_se > 0


def test_metadata_keeps_wall_time_out_of_csv(tmp_path):
    spec = small_spec(r=[1])
    result = harness.run_grid(spec)
    csv_path, meta_path = harness.write_grid_outputs(spec, result, str(tmp_path))
    with open(csv_path, encoding='utf-8') as fh:
        assert 'wall_time' not in fh.readline()
    with open(meta_path, encoding='utf-8') as fh:
        meta = json.load(fh)
    assert '200/1/inf' in meta['wall_time']
    assert meta['spec']['df'] == ['inf']


def test_run_cell_keeps_indices():
    spec = small_spec(r=[1], repetitions=30)
    row, outcome = harness.run_cell(spec, 200, 1, math.inf, keep_indices=True)
    assert len(outcome.indices) == 30
    assert sum(len(idx) for idx in outcome.indices) == int(outcome.counts.sum())
    assert row.n_positive == sum(1 for idx in outcome.indices if len(idx))


def test_calibration_cache_reuses_stored_ladders(tmp_path):
    store = ResultStore(str(tmp_path / 'lab.db'))
    spec = small_spec(nu=[100], r=[3], df=[6.0], repetitions=20, calibration_budget=400_000)
    first = harness.run_grid(spec, store).rows[0]
    cache = harness.CalibrationCache(store)
    second = harness.run_grid(spec, cache=cache).rows[0]
    assert second.threshold == first.threshold
    assert len(cache.entries) == 1


def test_same_seed_same_rows():
    a = harness.run_grid(small_spec(r=[3], repetitions=100)).rows[0]
    b = harness.run_grid(small_spec(r=[3], repetitions=100)).rows[0]
    c = harness.run_grid(small_spec(r=[3], repetitions=100, master_seed=2)).rows[0]
    assert (a.n_positive, a.n_multiple) == (b.n_positive, b.n_multiple)
    assert a.threshold == c.threshold


@pytest.mark.slow
def test_reproduce_reduced_figure(tmp_path):
    written = harness.reproduce_figure('fig1', 'reduced', str(tmp_path), threads=4)
    names = sorted(os.path.basename(p) for p in written)
    assert 'fig1a_r1.csv' in names and 'fig1d_r50.svg' in names
    rows = plotting.read_rows_csv(str(tmp_path / 'fig1b_r3.csv'))
    assert len(rows) == 3 * 6


@pytest.mark.slow
def test_independence_suite():
    report = harness.verify_independence(threads=4)
    assert report['passed'], report


@pytest.mark.slow
def test_fdr_suite():
    report = harness.verify_fdr(threads=4)
    assert report['passed'], report


@pytest.mark.slow
def test_pareto_cluster_suite():
    report = harness.verify_pareto_clusters(threads=4)
    assert report['passed'], report


@pytest.mark.slow
def test_gaussian_window_suite():
    report = harness.verify_gaussian_window(threads=4)
    assert report['passed'], report


def test_fdr_report_cross_checks_count_event():
    report = harness.verify_fdr(repetitions=300, nu=200, seed=11)
    check = next(c for c in report['checks'] if c['name'] == 'step-down rejections satisfy the count event')
    assert check['passed'] and check['value'] == 0


@pytest.mark.slow
def test_light_tail_suite():
    report = harness.verify_light_tails(threads=4)
    assert report['passed'], report


@pytest.mark.slow
def test_heavy_ties_suite():
    report = harness.verify_heavy_ties(threads=4)
    assert report['passed'], report


@pytest.mark.slow
def test_heavy_unique_suite():
    report = harness.verify_heavy_unique(threads=4)
    assert report['passed'], report


@pytest.mark.slow
def test_compound_suite():
    report = harness.verify_compound(threads=4)
    assert report['passed'], report


def test_fwer_matches_finite_nu_independence():
    row = harness.run_grid(small_spec(nu=[50], r=[1], repetitions=20_000)).rows[0]
    expected = 1 - (1 - BETA / 50) ** 50
    se = math.sqrt(expected * (1 - expected) / 20_000)
    assert row.fwer == pytest.approx(expected, abs=4 * se)
