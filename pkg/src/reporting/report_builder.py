#!/usr/bin/env python3
"""
Report building utilities for campaign and solver-comparison records.
"""

import json
import math
import os
from datetime import datetime
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from src.analysis.campaign import BASELINE, GBD, INCENTIVE, MIP, SGBD, RunRecord

COST_COLUMNS = ['size', 'delta_bar', 'gamma2', 'mode', 'instances', 'failed', 'mean_objective',
                'cost_reduction_pct', 'mean_fee_saving_pct', 'mean_served', 'mean_charging', 'mean_usage',
                'mean_travel_time', 'mean_incentives']
CONVERGENCE_COLUMNS = ['size', 'mode', 'instances', 'mean_iterations', 'mean_xi', 'min_xi']
SCALABILITY_COLUMNS = ['size', 'mode', 'instances', 'solved', 'mean_gap', 'max_gap']
# wall-clock columns live apart so the other tables are reproducible
TIMING_COLUMNS = ['size', 'mode', 'instances', 'mean_wall_time', 'max_wall_time']

FLOAT_FORMAT = '%.10g'
SOLVED_GAP = 1e-6


def records_frame(records: List[RunRecord]) -> pd.DataFrame:
    """Flat table with one row per record."""
    rows = []
    for r in records:
        row = {
            'scenario_id': r.scenario_id, 'seed': r.seed, 'size': r.size, 'delta_bar': r.delta_bar,
            'gamma2': r.gamma2, 'mode': r.mode, 'status': r.status,
            'objective': r.objective if r.ok else np.nan,
            'gap': r.gap if math.isfinite(r.gap) else np.nan,
            'iterations': r.iterations, 'node_count': r.node_count, 'wall_time': r.wall_time,
            'fee_saving_pct': r.fee_saving,
            'served': sum(1 for c in r.customers if c.get('served')),
            'error': r.error or '',
        }
        for part in ('charging', 'usage', 'travel_time', 'incentives'):
            row[part] = r.breakdown.get(part, np.nan)
        rows.append(row)
    return pd.DataFrame(rows)


def create_cost_table(df: pd.DataFrame) -> pd.DataFrame:
    """Cell means of baseline and incentive runs."""
    runs = df[df['mode'].isin([BASELINE, INCENTIVE])] if not df.empty else df
    if runs.empty:
        return pd.DataFrame(columns=COST_COLUMNS)

    keys = ['size', 'delta_bar', 'gamma2', 'mode']
    grouped = runs.groupby(keys, sort=True)
    table = grouped.agg(
        instances=('seed', 'count'),
        failed=('objective', lambda s: int(s.isna().sum())),
        mean_objective=('objective', 'mean'),
        mean_fee_saving_pct=('fee_saving_pct', 'mean'),
        mean_served=('served', 'mean'),
        mean_charging=('charging', 'mean'),
        mean_usage=('usage', 'mean'),
        mean_travel_time=('travel_time', 'mean'),
        mean_incentives=('incentives', 'mean'),
    ).reset_index()

    baseline = table[table['mode'] == BASELINE].set_index(['size', 'delta_bar', 'gamma2'])['mean_objective']
    reductions = []
    for _, row in table.iterrows():
        key = (row['size'], row['delta_bar'], row['gamma2'])
        if row['mode'] != INCENTIVE or key not in baseline.index:
            reductions.append(0.0)
            continue
        reference = baseline.loc[key]
        if pd.isna(reference) or pd.isna(row['mean_objective']) or abs(reference) < 1e-12:
            reductions.append(0.0)
        else:
            reductions.append(100.0 * (reference - row['mean_objective']) / abs(reference))
    table['cost_reduction_pct'] = reductions
    return table[COST_COLUMNS]


def _xi_values(record: RunRecord) -> List[float]:
    return [float(entry['xi']) for entry in record.convergence
            if entry.get('strengthened') and entry.get('cut_kind') == 'optimality']


def create_convergence_table(records: List[RunRecord]) -> pd.DataFrame:
    """Mean iterations and strengthening gains of GBD and SGBD per size."""
    rows = []
    for r in records:
        if r.mode in (GBD, SGBD) and r.ok:
            xi = _xi_values(r)
            rows.append({'size': r.size, 'mode': r.mode, 'iterations': r.iterations,
                         'mean_xi': float(np.mean(xi)) if xi else np.nan,
                         'min_xi': float(np.min(xi)) if xi else np.nan})
    if not rows:
        return pd.DataFrame(columns=CONVERGENCE_COLUMNS)
    table = pd.DataFrame(rows).groupby(['size', 'mode'], sort=True).agg(
        instances=('iterations', 'count'),
        mean_iterations=('iterations', 'mean'),
        mean_xi=('mean_xi', 'mean'),
        min_xi=('min_xi', 'min'),
    ).reset_index()
    return table[CONVERGENCE_COLUMNS]


def create_scalability_table(df: pd.DataFrame) -> pd.DataFrame:
    """Solved counts and gaps per size for the monolithic and Benders solvers."""
    runs = df[df['mode'].isin([MIP, GBD, SGBD])] if not df.empty else df
    if runs.empty:
        return pd.DataFrame(columns=SCALABILITY_COLUMNS)
    runs = runs.assign(is_solved=runs['gap'].fillna(math.inf) <= SOLVED_GAP)
    table = runs.groupby(['size', 'mode'], sort=True).agg(
        instances=('seed', 'count'),
        solved=('is_solved', 'sum'),
        mean_gap=('gap', 'mean'),
        max_gap=('gap', 'max'),
    ).reset_index()
    table['solved'] = table['solved'].astype(int)
    return table[SCALABILITY_COLUMNS]


def create_timing_table(df: pd.DataFrame) -> pd.DataFrame:
    """Wall-clock solve times per size and mode."""
    if df.empty:
        return pd.DataFrame(columns=TIMING_COLUMNS)
    table = df.groupby(['size', 'mode'], sort=True).agg(
        instances=('seed', 'count'),
        mean_wall_time=('wall_time', 'mean'),
        max_wall_time=('wall_time', 'max'),
    ).reset_index()
    return table[TIMING_COLUMNS]


def build_report(records: List[RunRecord]) -> Dict[str, pd.DataFrame]:
    """
    Build the report tables from run records.

    Returns:
        Dictionary with 'costs', 'convergence', 'scalability', 'timing' and 'records' tables
    """
    df = records_frame(records)
    return {
        'costs': create_cost_table(df),
        'convergence': create_convergence_table(records),
        'scalability': create_scalability_table(df),
        'timing': create_timing_table(df),
        'records': df,
    }


def _trend_checks(costs: pd.DataFrame) -> Dict[str, bool]:
    """Monotone trends of the mean incentive cost over the campaign grid."""
    incentive = costs[costs['mode'] == INCENTIVE]
    checks = {'cost_nonincreasing_in_delta_bar': True, 'cost_nondecreasing_in_gamma2': True}
    for _, group in incentive.groupby(['size', 'gamma2']):
        values = group.sort_values('delta_bar')['mean_objective'].dropna().to_numpy()
        if np.any(np.diff(values) > 1e-6):
            checks['cost_nonincreasing_in_delta_bar'] = False
    for _, group in incentive.groupby(['size', 'delta_bar']):
        values = group.sort_values('gamma2')['mean_objective'].dropna().to_numpy()
        if np.any(np.diff(values) < -1e-6):
            checks['cost_nondecreasing_in_gamma2'] = False
    return checks


def _dominance_violations(records: List[RunRecord]) -> List[Dict[str, Any]]:
    """Instances where the incentive optimum exceeds the baseline optimum."""
    pairs: Dict[tuple, Dict[str, RunRecord]] = {}
    for r in records:
        if r.mode in (BASELINE, INCENTIVE) and r.ok:
            pairs.setdefault(r.cell, {})[r.mode] = r
    violations = []
    for cell, runs in sorted(pairs.items()):
        if BASELINE in runs and INCENTIVE in runs:
            excess = runs[INCENTIVE].objective - runs[BASELINE].objective
            if excess > 1e-6:
                violations.append({'cell': list(cell), 'excess': excess})
    return violations


def _sgbd_iteration_check(records: List[RunRecord]) -> bool:
    runs: Dict[tuple, Dict[str, int]] = {}
    for r in records:
        if r.mode in (GBD, SGBD) and r.ok:
            runs.setdefault(r.cell, {})[r.mode] = r.iterations
    return all(v[SGBD] <= v[GBD] for v in runs.values() if GBD in v and SGBD in v)


def generate_report_metadata(records: List[RunRecord]) -> Dict[str, Any]:
    """
    Generate metadata for the report.
    """
    modes: Dict[str, int] = {}
    for r in records:
        modes[r.mode] = modes.get(r.mode, 0) + 1
    return {
        'generated_at': datetime.now().isoformat(),
        'record_count': len(records),
        'failed_runs': sum(1 for r in records if not r.ok),
        'modes': modes,
        'seeds': sorted({r.seed for r in records}),
        'sizes': sorted({r.size for r in records}),
        'delta_bar_grid': sorted({r.delta_bar for r in records}),
        'gamma2_grid': sorted({r.gamma2 for r in records}),
        'fee_saving_metric': 'mean over served customers of 100 * q * delta / revenue',
    }


def save_excel_report(report_data: Dict[str, pd.DataFrame], output_path: str):
    """
    Save the report tables to an Excel file with one sheet per table.

    Args:
        report_data: Dictionary containing dataframes for different report sections
        output_path: Path where the Excel file should be saved
    """
    os.makedirs(os.path.dirname(output_path) or '.', exist_ok=True)

    sheet_names = {'costs': 'Costs', 'convergence': 'Convergence', 'scalability': 'Scalability',
                   'timing': 'Timing', 'records': 'Records'}
    with pd.ExcelWriter(output_path, engine='openpyxl') as writer:

        for key, sheet_name in sheet_names.items():
            if key in report_data and not report_data[key].empty:
                report_data[key].to_excel(writer, sheet_name=sheet_name, index=False)
        if not writer.sheets:
            pd.DataFrame({'note': ['no records']}).to_excel(writer, sheet_name='Costs', index=False)

        # Auto-adjust column widths
        for sheet_name in writer.sheets:
            worksheet = writer.sheets[sheet_name]
            for column in worksheet.columns:
                column_letter = column[0].column_letter
                max_length = max((len(str(cell.value)) for cell in column if cell.value is not None),
                                 default=0)
                worksheet.column_dimensions[column_letter].width = min(max_length + 2, 50)


def save_records(records: List[RunRecord], path: str):
    """records.json as read back by load_records."""
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w') as f:
        json.dump([r.to_dict() for r in records], f, indent=2)


def load_records(path: str) -> List[RunRecord]:
    with open(path, 'r') as f:
        return [RunRecord.from_dict(item) for item in json.load(f)]


def emit_report(records: List[RunRecord], output_dir: str, excel: bool = False) -> Dict[str, str]:
    """
    Write costs.csv, convergence.csv, scalability.csv, timing.csv and
    summary.json (plus report.xlsx when excel=True) into output_dir. Only
    timing.csv and the summary timestamp change between identical runs.

    Returns the written paths by name.
    """
    if not records:
        raise ValueError("Cannot build a report from an empty record list")
    os.makedirs(output_dir, exist_ok=True)

    tables = build_report(records)
    paths = {}
    for name in ('costs', 'convergence', 'scalability', 'timing'):
        path = os.path.join(output_dir, f"{name}.csv")
        tables[name].to_csv(path, index=False, float_format=FLOAT_FORMAT)
        paths[name] = path

    summary = {
        'metadata': generate_report_metadata(records),
        'checks': {
            **_trend_checks(tables['costs']),
            'incentive_dominance_violations': _dominance_violations(records),
            'sgbd_iterations_le_gbd': _sgbd_iteration_check(records),
        },
        'errors': [{'scenario_id': r.scenario_id, 'mode': r.mode, 'error': r.error}
                   for r in records if r.status == 'error'],
    }
    summary_path = os.path.join(output_dir, 'summary.json')
    with open(summary_path, 'w') as f:
        json.dump(summary, f, indent=2, default=str)
    paths['summary'] = summary_path

    if excel:
        excel_path = os.path.join(output_dir, 'report.xlsx')
        save_excel_report(tables, excel_path)
        paths['excel'] = excel_path
    return paths
