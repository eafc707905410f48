#!/usr/bin/env python3
"""
View and manage EV Incentive Router run logs.
"""

import os
import sys
import argparse
import pandas as pd

# Add the repository root to the Python path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.utils.run_logger import run_logger


def _cell(value, default='N/A'):
    return default if value is None or (isinstance(value, float) and pd.isna(value)) else value


def view_summary():
    """Display a summary of all runs."""
    df = run_logger.get_runs_summary()
    summary = run_logger.get_solver_summary()

    if df.empty:
        print("📊 No runs found in the logs.")
        return

    print("📊 EV Incentive Router Run Summary")
    print("=" * 50)
    print(f"Total Runs: {summary['total_runs']}")
    print(f"Successful Runs: {summary['successful_runs']}")
    print(f"Failed Runs: {summary['failed_runs']}")
    print(f"Success Rate: {(summary['successful_runs'] / summary['total_runs']) * 100:.1f}%")
    print(f"Average Execution Time: {summary['avg_execution_time']:.2f}s")
    print()
    print("🧮 Runs by Command")
    print("-" * 30)
    for command, count in summary['by_command'].items():
        print(f"{command}: {count}")
    if summary['by_backend']:
        print()
        print("⚙️ Runs by Backend")
        print("-" * 30)
        for backend, stats in summary['by_backend'].items():
            print(f"{backend}: {stats['runs']} runs, {stats['avg_execution_time']:.2f}s average")
    print()

    print("📈 Recent Runs")
    print("-" * 30)
    for _, run in df.tail(5).iterrows():
        timestamp = pd.to_datetime(run['timestamp']).strftime('%Y-%m-%d %H:%M')
        status = "✅" if str(run['success']).lower() == 'true' else "❌"
        objective = _cell(run.get('objective'), '')
        print(f"{status} {timestamp} | {run['command']} | {_cell(run.get('scenario'), '-')} | {objective}")


def view_detailed_run(run_id):
    """Display detailed information for a specific run."""
    details = run_logger.get_run_details(run_id)

    if not details:
        print(f"❌ Run {run_id} not found.")
        return

    print(f"📋 Detailed Run Information: {run_id}")
    print("=" * 60)
    print(f"Timestamp: {details['timestamp']}")
    print(f"Command: {details.get('command', 'N/A')}")
    print(f"Scenario: {_cell(details.get('scenario'))}")
    print(f"Backend: {_cell(details.get('backend'))}")
    print()
    print("🔧 Parameters")
    print("-" * 20)
    for key, value in sorted((details.get('parameters') or {}).items()):
        print(f"{key}: {value}")
    print()
    print("🧮 Solver Outcome")
    print("-" * 20)
    print(f"Status: {_cell(details.get('status'))}")
    print(f"Objective: {_cell(details.get('objective'))}")
    print(f"Gap: {_cell(details.get('gap'))}")
    print(f"Iterations: {details.get('iterations', 0)}")
    print(f"Nodes: {details.get('node_count', 0)}")
    print(f"Records: {details.get('records', 0)}")
    print(f"Execution Time: {details.get('execution_time') or 0:.2f} seconds")
    print(f"Success: {'✅' if details.get('success') else '❌'}")
    if details.get('error_message'):
        print(f"Error: {details['error_message']}")
    print()
    print("📁 Generated Files")
    print("-" * 20)
    for path in details.get('output_files') or []:
        print(path)


def list_runs(limit=10):
    """List recent runs with basic information."""
    df = run_logger.get_runs_summary()

    if df.empty:
        print("📊 No runs found in the logs.")
        return

    print("📊 Recent Runs")
    print("=" * 90)
    print(f"{'Run ID':<36} {'Timestamp':<17} {'Command':<9} {'Backend':<9} {'Time (s)':<9} {'Status'}")
    print("-" * 90)

    for _, run in df.tail(limit).iterrows():
        timestamp = pd.to_datetime(run['timestamp']).strftime('%Y-%m-%d %H:%M')
        backend = _cell(run.get('backend'), '-')
        elapsed = run.get('execution_time')
        elapsed = f"{elapsed:.2f}" if not pd.isna(elapsed) else '-'
        status = "✅" if str(run['success']).lower() == 'true' else "❌"
        print(f"{run['run_id']:<36} {timestamp:<17} {run['command']:<9} {backend:<9} {elapsed:<9} {status}")


def main():
    """Main function to handle command line arguments."""
    parser = argparse.ArgumentParser(description='View EV Incentive Router run logs')
    parser.add_argument('--summary', '-s', action='store_true', help='Show summary of all runs')
    parser.add_argument('--list', '-l', action='store_true', help='List recent runs')
    parser.add_argument('--detailed', '-d', help='Show detailed information for a specific run ID')
    parser.add_argument('--limit', type=int, default=10, help='Number of runs to list (default: 10)')
    parser.add_argument('--export', '-e', action='store_true', help='Export a JSON summary of all runs')
    parser.add_argument('--output', '-o', default='run_summary.json', help='Output file for the export')

    args = parser.parse_args()

    if args.summary:
        view_summary()
    elif args.list:
        list_runs(args.limit)
    elif args.detailed:
        view_detailed_run(args.detailed)
    elif args.export:
        run_logger.export_summary_report(args.output)
        print(f"✅ Summary exported to {args.output}")
    else:
        # Default: show summary
        view_summary()


if __name__ == "__main__":
    main()
