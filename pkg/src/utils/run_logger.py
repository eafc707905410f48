#!/usr/bin/env python3
"""
Run logging and tracking for the EV incentive routing toolkit.
Tracks commands, solver settings, objective values and timings.
"""

import os
import json
import csv
import time
import uuid
from datetime import datetime, timezone
from typing import Dict, List, Any, Optional
import pandas as pd
from dataclasses import dataclass, asdict, field

from config import LOG_DIR

RUN_COLUMNS = [
    'run_id', 'timestamp', 'command', 'scenario', 'backend', 'parameters',
    'start_time', 'end_time', 'execution_time', 'status', 'objective', 'gap',
    'iterations', 'node_count', 'records', 'success', 'error_message', 'output_files',
]


@dataclass
class RunMetadata:
    """Metadata for a single invocation of the tool."""
    run_id: str
    timestamp: str
    command: str = ""
    interface_type: str = "cli"
    parameters: Dict[str, Any] = field(default_factory=dict)

    # Problem and solver
    scenario: Optional[str] = None
    backend: Optional[str] = None

    # Performance metrics
    start_time: Optional[float] = None
    end_time: Optional[float] = None
    execution_time: Optional[float] = None

    # Solver outcome
    status: Optional[str] = None
    objective: Optional[float] = None
    gap: Optional[float] = None
    iterations: int = 0
    node_count: int = 0
    records: int = 0

    # Success/failure
    success: bool = False
    error_message: Optional[str] = None

    # Generated files
    output_files: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return asdict(self)

    def finalize(self):
        """Fill in the execution time once the run has ended."""
        if self.start_time and self.end_time:
            self.execution_time = self.end_time - self.start_time


def _json_safe(value):
    """Infinite objectives and gaps are stored as null."""
    if isinstance(value, float) and (value != value or value in (float('inf'), float('-inf'))):
        return None
    return value


class RunLogger:
    """Main logging class for tracking tool runs."""

    def __init__(self, log_dir: Optional[str] = None):
        """Initialize the run logger."""
        if log_dir is None:
            log_dir = LOG_DIR

        self.log_dir = log_dir
        os.makedirs(self.log_dir, exist_ok=True)

        # File paths
        self.runs_file = os.path.join(self.log_dir, 'runs.csv')
        self.detailed_logs_dir = os.path.join(self.log_dir, 'detailed')
        os.makedirs(self.detailed_logs_dir, exist_ok=True)

        self._init_csv_file()

    def _init_csv_file(self):
        """Initialize the CSV file with headers if it doesn't exist."""
        if not os.path.exists(self.runs_file):
            with open(self.runs_file, 'w', newline='') as f:
                writer = csv.writer(f)
                writer.writerow(RUN_COLUMNS)

    def _detail_path(self, run_id: str) -> str:
        return os.path.join(self.detailed_logs_dir, f"{run_id}.json")

    def _write(self, run_id: str, data: Dict[str, Any]):
        with open(self._detail_path(run_id), 'w') as f:
            json.dump({k: _json_safe(v) for k, v in data.items()}, f, indent=2, default=str)

    def start_run(self,
                  command: str,
                  parameters: Optional[Dict[str, Any]] = None,
                  scenario: Optional[str] = None,
                  backend: Optional[str] = None,
                  interface_type: str = "cli") -> str:
        """Start tracking a new run and return the run ID."""
        run_id = str(uuid.uuid4())

        metadata = RunMetadata(
            run_id=run_id,
            timestamp=datetime.now(timezone.utc).isoformat(),
            command=command,
            interface_type=interface_type,
            parameters=dict(parameters or {}),
            scenario=scenario,
            backend=backend,
            start_time=time.time()
        )
        self._write(run_id, metadata.to_dict())
        return run_id

    def update_run(self, run_id: str, **kwargs):
        """Update run metadata with new information."""
        data = self.get_run_details(run_id)
        if data is None:
            return
        files = list(kwargs.pop('output_files', []) or [])
        data.update(kwargs)
        if files:
            data['output_files'] = list(data.get('output_files') or []) + files
        self._write(run_id, data)

    def end_run(self, run_id: str, success: bool = True, error_message: Optional[str] = None):
        """End a run, finalize the metadata and append it to the CSV summary."""
        data = self.get_run_details(run_id)
        if data is None:
            return

        data['end_time'] = time.time()
        data['success'] = success
        if error_message:
            data['error_message'] = error_message
        if data.get('start_time') and data.get('end_time'):
            data['execution_time'] = data['end_time'] - data['start_time']

        self._write(run_id, data)
        self._add_to_csv(data)

    def _add_to_csv(self, data: Dict[str, Any]):
        """Add run data to the CSV summary file."""
        row = []
        for column in RUN_COLUMNS:
            value = data.get(column)
            if column == 'parameters':
                value = json.dumps(value or {}, sort_keys=True, default=str)
            elif column == 'output_files':
                value = ';'.join(value or [])
            elif value is None:
                value = ''
            row.append(value)
        with open(self.runs_file, 'a', newline='') as f:
            csv.writer(f).writerow(row)

    def get_runs_summary(self) -> pd.DataFrame:
        """Get a summary of all runs as a pandas DataFrame."""
        if os.path.exists(self.runs_file):
            df = pd.read_csv(self.runs_file)
            df['timestamp'] = pd.to_datetime(df['timestamp'])
            return df
        else:
            return pd.DataFrame(columns=RUN_COLUMNS)

    def get_run_details(self, run_id: str) -> Optional[Dict[str, Any]]:
        """Get detailed information for a specific run."""
        detailed_file = self._detail_path(run_id)
        if os.path.exists(detailed_file):
            with open(detailed_file, 'r') as f:
                return json.load(f)
        return None

    def get_solver_summary(self) -> Dict[str, Any]:
        """Success counts and mean times across all runs, overall and per backend."""
        df = self.get_runs_summary()
        if df.empty:
            return {
                'total_runs': 0,
                'successful_runs': 0,
                'failed_runs': 0,
                'avg_execution_time': 0.0,
                'by_command': {},
                'by_backend': {},
            }

        success = df['success'].astype(str).str.lower() == 'true'
        summary = {
            'total_runs': len(df),
            'successful_runs': int(success.sum()),
            'failed_runs': int((~success).sum()),
            'avg_execution_time': float(df['execution_time'].mean()),
            'by_command': df['command'].value_counts().to_dict(),
            'by_backend': {},
        }
        backends = df.dropna(subset=['backend'])
        if not backends.empty:
            grouped = backends.groupby('backend')['execution_time'].agg(['count', 'mean'])
            summary['by_backend'] = {
                name: {'runs': int(row['count']), 'avg_execution_time': float(row['mean'])}
                for name, row in grouped.iterrows()
            }
        return summary

    def export_summary_report(self, output_file: str):
        """Export a comprehensive summary report."""
        df = self.get_runs_summary()

        runs_data = []
        for _, row in df.iterrows():
            run_dict = {}
            for col, value in row.items():
                if pd.isna(value):
                    run_dict[col] = None
                elif isinstance(value, pd.Timestamp):
                    run_dict[col] = value.isoformat()
                elif hasattr(value, 'item'):
                    run_dict[col] = value.item()
                else:
                    run_dict[col] = value
            runs_data.append(run_dict)

        report = {
            'generated_at': datetime.now(timezone.utc).isoformat(),
            'solver_summary': self.get_solver_summary(),
            'runs_data': runs_data
        }

        with open(output_file, 'w') as f:
            json.dump(report, f, indent=2, default=str)


# Global logger instance
run_logger = RunLogger()
