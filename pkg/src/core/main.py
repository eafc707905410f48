#!/usr/bin/env python3
"""
EV Incentive Router
Command-line orchestration: scenario generation, single solves, campaigns,
solver comparisons and reports.
"""

import argparse
import json
import logging
import math
import os
import sys
from datetime import datetime
from typing import Dict, List, Optional

from config import (BASELINE_WINDOW_WIDTH, DEFAULT_MIP_GAP, DEFAULT_SEEDS, DEFAULT_SIZES, DELTA_BAR_GRID,
                    GAMMA2_GRID, INCONVENIENCE_GAMMA, OUTPUT_DIR, SCENARIO_DIR)
from src.analysis.campaign import (BACKENDS, MIP, CampaignConfig, comparison_table, run_campaign,
                                   run_comparison, solve_with_backend)
from src.benders.driver import GBD, SGBD, BendersState, IterationRecord, write_iteration_log
from src.core.lp_format import write_lp
from src.core.model_builder import (build_baseline, build_single_level, cost_breakdown, customer_outcomes,
                                    route_of)
from src.core.validation import validate_solution
from src.customer.oracle import bilevel_oracle, grid_axis, oracle_table
from src.reporting.report_builder import emit_report, load_records, save_records
from src.scenario.generator import GenConfig, generate_scenario, scenario_from_coordinates
from src.scenario.importers import apply_prices, import_coordinates, load_price_csv
from src.scenario.scenario import load_scenario, save_scenario
from src.solvers.branch_and_bound import MipLimits
from src.utils.progress_tracker import create_progress_tracker
from src.utils.run_logger import run_logger

MODELS = ('incentive', 'baseline', 'oracle')


def _add_limit_args(parser: argparse.ArgumentParser):
    parser.add_argument('--backend', choices=BACKENDS, default=MIP, help='Solver backend')
    parser.add_argument('--time-limit', type=float, default=None, help='Seconds per solve')
    parser.add_argument('--gap', type=float, default=DEFAULT_MIP_GAP, help='Relative gap to stop at')
    parser.add_argument('--node-limit', type=int, default=None, help='Branch-and-bound node cap')
    parser.add_argument('--workers', type=int, default=1, help='Concurrent workers')
    parser.add_argument('--solver-cmd', default=None, help='External solver template with {in} and {out}')


def _add_grid_args(parser: argparse.ArgumentParser):
    parser.add_argument('--seeds', type=int, nargs='+', default=DEFAULT_SEEDS)
    parser.add_argument('--sizes', type=int, nargs='+', default=DEFAULT_SIZES)
    parser.add_argument('--delta-bars', type=float, nargs='+', default=DELTA_BAR_GRID)
    parser.add_argument('--gamma2s', type=float, nargs='+', default=GAMMA2_GRID)
    parser.add_argument('--window', type=float, default=BASELINE_WINDOW_WIDTH, help='Baseline window width (h)')
    parser.add_argument('--stations', type=int, default=1)
    parser.add_argument('--vehicles', type=int, default=1)
    parser.add_argument('--xi', type=int, default=None, help='Override the number of time slots')
    parser.add_argument('--full-scale', action='store_true', help='Full 288 x 5 min grid and usage cost')
    parser.add_argument('--excel', action='store_true', help='Also write report.xlsx')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='ev-incentive-router',
                                     description='EV routing and charging with customer incentives')
    parser.add_argument('--verbose', '-v', action='store_true', help='Log solver progress')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('generate', help='Generate a random scenario')
    gen.add_argument('--seed', type=int, default=1)
    gen.add_argument('--customers', type=int, default=5)
    gen.add_argument('--stations', type=int, default=1)
    gen.add_argument('--vehicles', type=int, default=1)
    gen.add_argument('--delta-bar', type=float, default=1.0)
    gen.add_argument('--gamma2', type=float, default=INCONVENIENCE_GAMMA[1])
    gen.add_argument('--window', type=float, default=0.0, help='Guaranteed base window width (h)')
    gen.add_argument('--xi', type=int, default=None)
    gen.add_argument('--dummies', type=int, default=0, help='Dummy copies per station')
    gen.add_argument('--full-scale', action='store_true')
    gen.add_argument('--coordinates', default=None, help='VRP-REP style coordinate file')
    gen.add_argument('--prices', default=None, help='Price CSV with one column per station')
    gen.add_argument('--output', default=None, help='Scenario JSON path')

    solve = sub.add_parser('solve', help='Solve one scenario')
    solve.add_argument('scenario', help='Scenario JSON path')
    solve.add_argument('--model', choices=MODELS, default='incentive')
    solve.add_argument('--window', type=float, default=BASELINE_WINDOW_WIDTH, help='Baseline window width (h)')
    solve.add_argument('--q-step', type=float, default=0.5, help='Incentive grid step for the oracle')
    solve.add_argument('--lp', default=None, help='Also write the model as an LP file')
    solve.add_argument('--output', default=OUTPUT_DIR)
    _add_limit_args(solve)

    campaign = sub.add_parser('campaign', help='Incentive vs. baseline campaign')
    _add_grid_args(campaign)
    _add_limit_args(campaign)
    campaign.add_argument('--output', default=None)

    compare = sub.add_parser('compare', help='MIP vs. GBD vs. SGBD comparison')
    _add_grid_args(compare)
    _add_limit_args(compare)
    compare.add_argument('--output', default=None)

    report = sub.add_parser('report', help='Rebuild report files from records.json')
    report.add_argument('records', help='records.json written by campaign or compare')
    report.add_argument('--output', default=None)
    report.add_argument('--excel', action='store_true')
    return parser


def _stamp_dir(prefix: str, output: Optional[str]) -> str:
    if output:
        return output
    return os.path.join(OUTPUT_DIR, f"{prefix}_{datetime.now().strftime('%Y%m%d_%H%M%S')}")


def _campaign_config(args) -> CampaignConfig:
    return CampaignConfig(
        seeds=list(args.seeds), sizes=list(args.sizes), delta_bar_grid=list(args.delta_bars),
        gamma2_grid=list(args.gamma2s), window_width=args.window, backend=args.backend,
        time_limit=args.time_limit, gap=args.gap, node_limit=args.node_limit, n_stations=args.stations,
        n_vehicles=args.vehicles, full_scale=args.full_scale, xi=args.xi, workers=args.workers,
        solver_cmd=args.solver_cmd,
    )


def _print_progress(job_id: str, data: Dict):
    if data.get('error'):
        print(f"❌ {data['step']}: {data['error']}")
    else:
        print(f"  [{data['percent']:3d}%] {data['step']}")


def cmd_generate(args, run_id: str) -> int:
    overrides = dict(n_vehicles=args.vehicles, delta_bar=args.delta_bar,
                     gammas=(INCONVENIENCE_GAMMA[0], args.gamma2), base_window=args.window,
                     dummy_count=args.dummies)
    if args.xi is not None:
        overrides['xi'] = args.xi
    params = GenConfig.full_scale(**overrides) if args.full_scale else GenConfig(**overrides)

    if args.coordinates:
        coords = import_coordinates(args.coordinates)
        print(f"📍 Loaded {len(coords)} coordinates from {args.coordinates}")
        scenario = scenario_from_coordinates(coords, args.seed, args.customers, args.stations, params)
    else:
        scenario = generate_scenario(args.seed, args.customers, args.stations, params)
    if args.prices:
        prices = load_price_csv(args.prices, [s.id for s in scenario.stations], scenario.grid.xi)
        scenario = apply_prices(scenario, prices)
        print(f"💶 Applied prices from {args.prices}")

    path = args.output or os.path.join(SCENARIO_DIR, f"{scenario.name}.json")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    save_scenario(scenario, path)
    run_logger.update_run(run_id, scenario=scenario.name, output_files=[path])
    print(f"✅ Scenario {scenario.name} saved: {path}")
    print(f"   {len(scenario.customers)} customers, {len(scenario.stations)} stations, "
          f"{scenario.fleet.K} vehicle(s), {scenario.grid.xi} slots of {scenario.grid.delta_tau:g} h")
    return 0


def _solve_oracle(args, scenario, run_id: str) -> int:
    axes = [grid_axis(c.inconvenience.q_max, args.q_step) for c in scenario.customers]
    limits = MipLimits(time=args.time_limit, gap=args.gap, nodes=args.node_limit, workers=args.workers)
    result = bilevel_oracle(scenario, q_axes=axes, limits=limits)
    os.makedirs(args.output, exist_ok=True)
    table_path = os.path.join(args.output, f"{scenario.name}_oracle.csv")
    oracle_table(result).to_csv(table_path, index=False)
    run_logger.update_run(run_id, objective=result.objective, status='optimal' if math.isfinite(result.objective)
                          else 'infeasible', output_files=[table_path])
    if not math.isfinite(result.objective):
        print("❌ No incentive vector on the grid admits a feasible plan")
        return 1
    print(f"✅ Oracle objective {result.objective:.6f} over {len(result.entries)} candidates")
    for cid in result.q:
        print(f"   {cid}: q={result.q[cid]:g} delta={result.delta[cid]:g}")
    print(f"📊 Candidate table saved: {table_path}")
    return 0


def cmd_solve(args, run_id: str) -> int:
    scenario = load_scenario(args.scenario)
    run_logger.update_run(run_id, scenario=scenario.name, backend=args.backend)
    print(f"📂 Loaded scenario {scenario.name}")
    if args.model == 'oracle':
        return _solve_oracle(args, scenario, run_id)

    model = build_single_level(scenario) if args.model == 'incentive' else build_baseline(scenario, args.window)
    print(f"🧮 Built {args.model} model: {model.num_vars} variables, {model.num_constraints} rows, "
          f"{len(model.binary_indices)} binaries")
    os.makedirs(args.output, exist_ok=True)
    files: List[str] = []
    if args.lp:
        write_lp(model, args.lp)
        files.append(args.lp)

    result, history = solve_with_backend(model, args.backend, time_limit=args.time_limit, gap=args.gap,
                                         node_limit=args.node_limit, workers=args.workers,
                                         solver_cmd=args.solver_cmd)
    iterations = result.node_count if args.backend in (GBD, SGBD) else 0
    run_logger.update_run(run_id, status=result.status, objective=result.objective, gap=result.gap,
                          iterations=iterations, node_count=0 if iterations else result.node_count)
    if not result.has_solution:
        print(f"❌ No solution: {result.status}")
        run_logger.update_run(run_id, output_files=files)
        return 1

    report = validate_solution(model, result.incumbent)
    if not report.ok:
        print(f"⚠️  Solution fails validation: {report.summary()}")

    solution_path = os.path.join(args.output, f"{scenario.name}_{args.model}_{args.backend}.json")
    payload = {
        'scenario': scenario.name,
        'model': args.model,
        'backend': args.backend,
        'status': result.status,
        'objective': result.objective,
        'gap': result.gap if math.isfinite(result.gap) else None,
        'wall_time': result.wall_time,
        'breakdown': cost_breakdown(scenario, model, result.incumbent),
        'customers': customer_outcomes(scenario, model, result.incumbent),
        'routes': [route_of(scenario, model, result.incumbent, k) for k in range(scenario.fleet.K)],
        'validation': report.summary(),
    }
    with open(solution_path, 'w') as f:
        json.dump(payload, f, indent=2, default=str)
    files.append(solution_path)

    if history:
        log_path = os.path.join(args.output, f"{scenario.name}_{args.backend}_iterations.csv")
        state = BendersState(mode=args.backend, records=[IterationRecord(**h) for h in history])
        write_iteration_log(state, log_path)
        files.append(log_path)
    run_logger.update_run(run_id, output_files=files)

    print(f"✅ {result.status}: objective {result.objective:.6f} in {result.wall_time:.2f}s")
    for k, route in enumerate(payload['routes']):
        print(f"   vehicle {k}: {' -> '.join(route)}")
    print(f"📊 Solution saved: {solution_path}")
    return 0


def _write_outputs(records, output_dir: str, excel: bool, run_id: str) -> Dict[str, str]:
    records_path = os.path.join(output_dir, 'records.json')
    save_records(records, records_path)
    paths = emit_report(records, output_dir, excel=excel)
    paths['records'] = records_path
    run_logger.update_run(run_id, records=len(records), output_files=list(paths.values()))
    for name, path in paths.items():
        print(f"📊 {name}: {path}")
    return paths


def cmd_campaign(args, run_id: str) -> int:
    config = _campaign_config(args)
    config.validate()
    print(f"🚀 Campaign over {len(config.cells())} instance cells with backend {config.backend}")
    tracker = create_progress_tracker(run_id, echo=_print_progress)
    records = run_campaign(config, tracker)

    output_dir = _stamp_dir('campaign', args.output)
    tracker.update_progress('writing_report')
    paths = _write_outputs(records, output_dir, args.excel, run_id)
    tracker.complete()

    failed = [r for r in records if not r.ok]
    if failed:
        print(f"⚠️  {len(failed)} of {len(records)} runs failed")
    with open(paths['summary']) as f:
        checks = json.load(f)['checks']
    if checks['incentive_dominance_violations']:
        print(f"❌ Incentive model above baseline on {len(checks['incentive_dominance_violations'])} instance(s)")
        return 1
    if len(failed) == len(records):
        print("❌ Every run failed")
        return 1
    print("✅ Campaign completed")
    return 0


def cmd_compare(args, run_id: str) -> int:
    config = _campaign_config(args)
    config.validate()
    print(f"🚀 Comparing MIP, GBD and SGBD on {len(config.cells())} instances")
    tracker = create_progress_tracker(run_id, echo=_print_progress)
    records = run_comparison(config, tracker)
    table = comparison_table(records)

    output_dir = _stamp_dir('compare', args.output)
    tracker.update_progress('writing_report')
    _write_outputs(records, output_dir, args.excel, run_id)
    table_path = os.path.join(output_dir, 'comparison.csv')
    table.to_csv(table_path, index=False, float_format='%.10g')
    run_logger.update_run(run_id, output_files=[table_path])
    print(f"📊 comparison: {table_path}")
    tracker.complete()

    status = 0
    if table.empty:
        print("❌ No instances compared")
        return 1
    if not table['sgbd_le_gbd'].all():
        print(f"❌ SGBD needed more iterations than GBD on {(~table['sgbd_le_gbd']).sum()} instance(s)")
        status = 1
    if not table['objectives_agree'].all():
        print(f"❌ Solvers disagree on {(~table['objectives_agree']).sum()} instance(s)")
        status = 1
    if status == 0:
        print("✅ All solvers agree; SGBD never needed more iterations than GBD")
    return status


def cmd_report(args, run_id: str) -> int:
    records = load_records(args.records)
    print(f"📂 Loaded {len(records)} records from {args.records}")
    output_dir = args.output or os.path.dirname(os.path.abspath(args.records))
    paths = emit_report(records, output_dir, excel=args.excel)
    run_logger.update_run(run_id, records=len(records), output_files=list(paths.values()))
    for name, path in paths.items():
        print(f"📊 {name}: {path}")
    print("✅ Report written")
    return 0


COMMANDS = {
    'generate': cmd_generate,
    'solve': cmd_solve,
    'campaign': cmd_campaign,
    'compare': cmd_compare,
    'report': cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and record it in the run ledger."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    parameters = {k: v for k, v in vars(args).items() if k != 'command'}
    run_id = run_logger.start_run(command=args.command, parameters=parameters,
                                  backend=getattr(args, 'backend', None))
    try:
        status = COMMANDS[args.command](args, run_id)
    except Exception as e:
        print(f"❌ {args.command} failed: {e}")
        logging.getLogger(__name__).debug("Failure details", exc_info=True)
        run_logger.end_run(run_id, success=False, error_message=str(e))
        return 1
    run_logger.end_run(run_id, success=status == 0,
                       error_message=None if status == 0 else f"{args.command} exited with {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
