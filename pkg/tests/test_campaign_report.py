#!/usr/bin/env python3
"""
Tests for campaigns, solver comparisons, report files and the command line.
"""

import json
import math

import pandas as pd
import pytest

from src.analysis.campaign import (BASELINE, ERROR, GBD, INCENTIVE, MIP, SGBD, CampaignConfig, RunRecord,
                                   comparison_table, compare_solvers, run_campaign)
from src.core import main as cli
from src.reporting.report_builder import (CONVERGENCE_COLUMNS, COST_COLUMNS, SCALABILITY_COLUMNS,
                                          TIMING_COLUMNS, _dominance_violations, _trend_checks, build_report,
                                          emit_report, load_records, save_records)
from src.utils.progress_tracker import create_progress_tracker, get_progress
from src.utils.run_logger import RunLogger


def _tiny_config(**overrides):
    settings = dict(seeds=[1], sizes=[3], delta_bar_grid=[1.0], gamma2_grid=[1.5], n_stations=0, xi=12)
    settings.update(overrides)
    return CampaignConfig(**settings)


def _record(mode, objective, seed=1, delta_bar=1.0, gamma2=1.5, iterations=0, **extra):
    return RunRecord(scenario_id=f"s{seed}", seed=seed, size=5, delta_bar=delta_bar, gamma2=gamma2, mode=mode,
                     status='optimal', objective=objective, gap=0.0, iterations=iterations, **extra)


def test_config_validation():
    with pytest.raises(ValueError):
        _tiny_config(sizes=[2]).validate()
    with pytest.raises(ValueError):
        _tiny_config(sizes=[3], n_stations=2).validate()
    with pytest.raises(ValueError):
        _tiny_config(backend='cplex').validate()
    with pytest.raises(ValueError):
        _tiny_config(delta_bar_grid=[]).validate()
    assert _tiny_config(delta_bar_grid=[0.5, 1.0], gamma2_grid=[1.5, 2.5]).cells()[1] == (1, 3, 0.5, 2.5)


def test_cells_share_arrivals():
    config = _tiny_config(sizes=[5], delta_bar_grid=[0.5, 1.5], n_stations=1)
    narrow = config.scenario(1, 5, 0.5, 1.5)
    wide = config.scenario(1, 5, 1.5, 2.5)
    assert [c.t_L for c in narrow.customers] == [c.t_L for c in wide.customers]
    assert len(narrow.customers) == 2 and len(narrow.stations) == 1
    assert wide.customers[0].inconvenience.gammas == (0.0, 2.5)
    assert all(c.base_window == config.window_width for c in wide.customers)


def test_campaign_cell_yields_baseline_and_incentive():
    tracker = create_progress_tracker('campaign-test')
    records = run_campaign(_tiny_config(), tracker)
    assert [r.mode for r in records] == [BASELINE, INCENTIVE]
    assert all(r.ok for r in records)
    baseline, incentive = records
    assert incentive.objective <= baseline.objective + 1e-6
    assert sum(incentive.breakdown.values()) == pytest.approx(incentive.objective, abs=1e-6)
    assert get_progress('campaign-test')['percent'] == 90


def test_zero_flexibility_matches_baseline():
    baseline, incentive = run_campaign(_tiny_config(delta_bar_grid=[0.0]))
    assert incentive.objective == pytest.approx(baseline.objective, abs=1e-6)
    assert incentive.fee_saving == pytest.approx(0.0, abs=1e-6)


def test_parallel_campaign_keeps_cell_order():
    config = _tiny_config(seeds=[1, 2], workers=2)
    records = run_campaign(config)
    expected = [(1, BASELINE), (1, INCENTIVE), (2, BASELINE), (2, INCENTIVE)]
    assert [(r.seed, r.mode) for r in records] == expected


def test_report_files_are_reproducible(tmp_path):
    first = emit_report(run_campaign(_tiny_config()), str(tmp_path / 'a'))
    second = emit_report(run_campaign(_tiny_config()), str(tmp_path / 'b'))
    costs = pd.read_csv(first['costs'])
    assert len(costs) == 2
    assert list(costs.columns) == COST_COLUMNS
    for name in ('costs', 'convergence', 'scalability'):
        with open(first[name]) as a, open(second[name]) as b:
            assert a.read() == b.read()
    summary = json.loads(open(first['summary']).read())
    assert summary['metadata']['record_count'] == 2
    assert summary['checks']['incentive_dominance_violations'] == []


def test_wall_times_only_reach_the_timing_table(tmp_path):
    def records(offset):
        return [_record(MIP, -5.0, wall_time=1.0 + offset),
                _record(GBD, -5.0, iterations=4, wall_time=2.0 + offset),
                _record(SGBD, -5.0, iterations=2, wall_time=0.5 + offset)]

    first = emit_report(records(0.0), str(tmp_path / 'a'))
    second = emit_report(records(3.7), str(tmp_path / 'b'))
    for name in ('costs', 'convergence', 'scalability'):
        with open(first[name]) as a, open(second[name]) as b:
            assert a.read() == b.read()
    assert list(pd.read_csv(first['convergence']).columns) == CONVERGENCE_COLUMNS
    assert list(pd.read_csv(first['scalability']).columns) == SCALABILITY_COLUMNS
    timing = pd.read_csv(second['timing'])
    assert list(timing.columns) == TIMING_COLUMNS
    assert timing.set_index('mode').loc[GBD, 'max_wall_time'] == pytest.approx(5.7)


def test_excel_workbook(tmp_path):
    records = [_record(BASELINE, -10.0), _record(INCENTIVE, -12.0)]
    paths = emit_report(records, str(tmp_path), excel=True)
    sheets = pd.read_excel(paths['excel'], sheet_name=None)
    assert set(sheets) == {'Costs', 'Timing', 'Records'}
    assert len(sheets['Costs']) == 2 and len(sheets['Records']) == 2


def test_empty_records_are_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], str(tmp_path))


def test_cost_table_reduction_and_fee_saving():
    customers = [{'customer': 'c1', 'served': True, 'payment': 1.0, 'revenue': 10.0},
                 {'customer': 'c2', 'served': True, 'payment': 0.0, 'revenue': 5.0},
                 {'customer': 'c3', 'served': False, 'payment': 0.0, 'revenue': 7.0}]
    records = [_record(BASELINE, -10.0), _record(INCENTIVE, -12.0, customers=customers)]
    assert records[1].fee_saving == pytest.approx(5.0)
    costs = build_report(records)['costs']
    row = costs[costs['mode'] == INCENTIVE].iloc[0]
    assert row['cost_reduction_pct'] == pytest.approx(20.0)
    assert row['mean_served'] == 2
    assert costs[costs['mode'] == BASELINE].iloc[0]['cost_reduction_pct'] == 0.0


def test_summary_flags_dominance_and_iteration_checks(tmp_path):
    convergence = [{'iteration': 1, 'cut_kind': 'optimality', 'strengthened': True, 'xi': 0.5}]
    records = [
        _record(BASELINE, -10.0), _record(INCENTIVE, -9.0),
        _record(GBD, -10.0, iterations=3), _record(SGBD, -10.0, iterations=5, convergence=convergence),
        RunRecord(scenario_id='s2', seed=2, size=5, delta_bar=1.0, gamma2=1.5, mode=MIP, status=ERROR,
                  error='boom'),
    ]
    paths = emit_report(records, str(tmp_path))
    summary = json.loads(open(paths['summary']).read())
    assert len(summary['checks']['incentive_dominance_violations']) == 1
    assert summary['checks']['sgbd_iterations_le_gbd'] is False
    assert summary['errors'] == [{'scenario_id': 's2', 'mode': MIP, 'error': 'boom'}]
    convergence_table = pd.read_csv(paths['convergence'])
    sgbd = convergence_table[convergence_table['mode'] == SGBD].iloc[0]
    assert sgbd['mean_xi'] == pytest.approx(0.5)


def test_trend_checks():
    records = [_record(INCENTIVE, -10.0, delta_bar=0.5), _record(INCENTIVE, -9.0, delta_bar=1.0),
               _record(BASELINE, -8.0, delta_bar=0.5), _record(BASELINE, -8.0, delta_bar=1.0)]
    checks = _trend_checks(build_report(records)['costs'])
    assert checks['cost_nonincreasing_in_delta_bar'] is False
    assert checks['cost_nondecreasing_in_gamma2'] is True


def test_records_round_trip(tmp_path):
    records = [_record(MIP, -3.5), RunRecord(scenario_id='x', seed=1, size=3, delta_bar=0.5, gamma2=1.5,
                                             mode=GBD, status='time_limit')]
    path = tmp_path / 'records.json'
    save_records(records, str(path))
    assert json.loads(path.read_text())[1]['objective'] is None
    loaded = load_records(str(path))
    assert loaded == records
    assert math.isinf(loaded[1].objective) and not loaded[1].ok


def test_comparison_table_flags():
    records = [_record(MIP, -5.0), _record(GBD, -5.0, iterations=4), _record(SGBD, -5.000001, iterations=2)]
    table = comparison_table(records)
    assert len(table) == 1
    row = table.iloc[0]
    assert bool(row['objectives_agree']) and bool(row['sgbd_le_gbd'])
    assert row['gbd_iterations'] == 4


def test_compare_solvers_on_small_instance():
    table = compare_solvers(_tiny_config())
    assert len(table) == 1
    assert bool(table.iloc[0]['objectives_agree'])
    assert table.iloc[0]['mip_status'] == 'optimal'


@pytest.mark.slow
def test_campaign_trends_on_generated_instances():
    config = CampaignConfig(seeds=[1, 2], sizes=[5, 6], delta_bar_grid=[0.0, 0.5, 1.0],
                            gamma2_grid=[1.5, 2.5], n_stations=1, xi=12, gap=1e-9)
    records = run_campaign(config)
    assert all(r.ok for r in records)
    assert _dominance_violations(records) == []
    checks = _trend_checks(build_report(records)['costs'])
    assert checks == {'cost_nonincreasing_in_delta_bar': True, 'cost_nondecreasing_in_gamma2': True}


@pytest.mark.slow
def test_solvers_agree_on_eleven_nodes():
    config = CampaignConfig(seeds=[1], sizes=[11], delta_bar_grid=[1.0], gamma2_grid=[1.5], n_stations=1,
                            xi=12)
    table = compare_solvers(config)
    assert len(table) == 1
    row = table.iloc[0]
    assert row['mip_status'] == row['gbd_status'] == row['sgbd_status'] == 'optimal'
    assert bool(row['objectives_agree'])


@pytest.fixture
def cli_logger(tmp_path, monkeypatch):
    logger = RunLogger(str(tmp_path / 'logs'))
    monkeypatch.setattr(cli, 'run_logger', logger)
    return logger


def test_cli_generate_solve_and_report(tmp_path, cli_logger):
    scenario_path = str(tmp_path / 'scenario.json')
    assert cli.main(['generate', '--seed', '2', '--customers', '1', '--stations', '0', '--xi', '12',
                     '--output', scenario_path]) == 0
    out = str(tmp_path / 'out')
    assert cli.main(['solve', scenario_path, '--model', 'baseline', '--output', out]) == 0
    assert cli.main(['solve', scenario_path, '--backend', 'sgbd', '--output', out]) == 0
    solution = json.loads(open(f"{out}/gen-s2-c1-st0_incentive_sgbd.json").read())
    assert solution['validation']['ok']
    assert solution['routes'][0][0] == 'd0'
    assert cli.main(['solve', scenario_path, '--model', 'oracle', '--q-step', '1.5', '--output', out]) == 0

    runs = cli_logger.get_runs_summary()
    assert list(runs['command']) == ['generate', 'solve', 'solve', 'solve']
    assert runs['success'].astype(str).str.lower().eq('true').all()


def test_cli_campaign_and_report(tmp_path, cli_logger):
    out = str(tmp_path / 'campaign')
    assert cli.main(['campaign', '--seeds', '1', '--sizes', '3', '--delta-bars', '1.0', '--gamma2s', '1.5',
                     '--stations', '0', '--xi', '12', '--output', out]) == 0
    assert cli.main(['report', f"{out}/records.json", '--output', str(tmp_path / 'again')]) == 0
    with open(f"{out}/costs.csv") as a, open(tmp_path / 'again' / 'costs.csv') as b:
        assert a.read() == b.read()


def test_cli_failure_is_logged(tmp_path, cli_logger):
    assert cli.main(['solve', str(tmp_path / 'missing.json')]) == 1
    runs = cli_logger.get_runs_summary()
    assert str(runs.iloc[-1]['success']).lower() == 'false'
    assert 'missing.json' in runs.iloc[-1]['error_message']
