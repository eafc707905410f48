#!/usr/bin/env python3
"""
Progress tracking utility for real-time progress updates during campaigns.
"""

from typing import Dict, Any, Optional


class ProgressTracker:
    """Tracks and reports progress during a campaign or solver comparison."""

    def __init__(self, job_id: str, progress_callback=None):
        """Initialize the progress tracker."""
        self.job_id = job_id
        self.progress_callback = progress_callback
        self.current_step = "Initializing..."
        self.current_percent = 0

        # Campaign steps with their progress percentages
        self.steps = {
            'initializing': {'name': 'Initializing campaign...', 'percent': 0},
            'generating': {'name': 'Generating scenarios...', 'percent': 5},
            'solving': {'name': 'Solving instances...', 'percent': 10},
            'aggregating': {'name': 'Aggregating results...', 'percent': 90},
            'writing_report': {'name': 'Writing report files...', 'percent': 95},
            'completed': {'name': 'Campaign completed!', 'percent': 100}
        }

    def update_progress(self, step: str, percent: Optional[int] = None, message: Optional[str] = None):
        """Update progress for a specific step."""
        if step in self.steps:
            step_info = self.steps[step]
            self.current_step = message or step_info['name']
            self.current_percent = percent if percent is not None else step_info['percent']

            if self.progress_callback:
                self.progress_callback(self.job_id, {
                    'step': self.current_step,
                    'percent': self.current_percent,
                    'done': False,
                    'error': None
                })

    def update_solve_progress(self, current_run: int, total_runs: int, label: str = ""):
        """Update progress while solving; the solve phase spans 10% to 90%."""
        solve_percent = 10 + (current_run / max(total_runs, 1)) * 80
        suffix = f" {label}" if label else ""
        self.update_progress('solving', int(solve_percent),
                             f"Solving instances... ({current_run}/{total_runs}){suffix}")

    def complete(self, success: bool = True, error: Optional[str] = None):
        """Mark the campaign as completed."""
        if not self.progress_callback:
            return
        if success:
            self.progress_callback(self.job_id, {
                'step': self.steps['completed']['name'],
                'percent': 100,
                'done': True,
                'error': None
            })
        else:
            self.progress_callback(self.job_id, {
                'step': self.current_step,
                'percent': self.current_percent,
                'done': True,
                'error': error
            })


# Global progress storage
progress_store = {}


def get_progress(job_id: str) -> Dict[str, Any]:
    """Get current progress for a job."""
    return progress_store.get(job_id, {
        'step': 'Initializing...',
        'percent': 0,
        'done': False,
        'error': None
    })


def update_progress(job_id: str, progress_data: Dict[str, Any]):
    """Update progress for a job."""
    progress_store[job_id] = progress_data


def create_progress_tracker(job_id: str, echo=None) -> ProgressTracker:
    """Create a progress tracker that stores updates and optionally echoes them."""
    def progress_callback(job_id: str, data: Dict[str, Any]):
        update_progress(job_id, data)
        if echo is not None:
            echo(job_id, data)

    return ProgressTracker(job_id, progress_callback)
