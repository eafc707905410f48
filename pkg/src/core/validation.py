#!/usr/bin/env python3
"""
Solution checks against a MilpModel.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from config import FEASIBILITY_TOL, INTEGRALITY_TOL
from src.core.model import MilpModel, Solution


@dataclass
class ValidationReport:
    row_violation: Dict[str, float] = field(default_factory=dict)
    bound_violation: float = 0.0
    integrality_residual: float = 0.0
    fractional_vars: List[str] = field(default_factory=list)
    objective_reported: Optional[float] = None
    objective_recomputed: float = 0.0
    tolerance: float = 1e-6

    @property
    def max_violation(self) -> float:
        return max([self.bound_violation] + list(self.row_violation.values()))

    @property
    def objective_error(self) -> float:
        if self.objective_reported is None:
            return 0.0
        return abs(self.objective_reported - self.objective_recomputed)

    @property
    def ok(self) -> bool:
        scale = max(1.0, abs(self.objective_recomputed))
        return (self.max_violation <= self.tolerance
                and self.integrality_residual <= INTEGRALITY_TOL
                and self.objective_error <= self.tolerance * scale)

    def summary(self) -> Dict:
        return {
            'ok': self.ok,
            'max_violation': self.max_violation,
            'worst_family': max(self.row_violation, key=self.row_violation.get) if self.row_violation else None,
            'integrality_residual': self.integrality_residual,
            'objective_error': self.objective_error,
        }


def validate_solution(model: MilpModel, solution: Solution, tol: float = 1e-6) -> ValidationReport:
    """Per-family row violations, bound violations, integrality and objective check."""
    values = np.asarray(solution.values, dtype=float)
    if values.shape != (model.num_vars,):
        raise ValueError(f"Solution has {values.shape[0] if values.ndim else 0} values, "
                         f"model has {model.num_vars} variables")

    report = ValidationReport(tolerance=max(tol, FEASIBILITY_TOL))
    for row in model.constraints:
        violation = row.violation(values)
        report.row_violation[row.family] = max(report.row_violation.get(row.family, 0.0), violation)

    if model.num_vars:
        form = model.standard_form
        below = np.maximum(form.lo - values, 0.0)
        above = np.maximum(values - form.hi, 0.0)
        report.bound_violation = float(max(below.max(), above.max()))

    for j in model.binary_indices:
        residual = abs(values[j] - round(values[j]))
        report.integrality_residual = max(report.integrality_residual, residual)
        if residual > INTEGRALITY_TOL:
            report.fractional_vars.append(model.vars[j].name)

    report.objective_recomputed = model.evaluate_objective(values)
    report.objective_reported = solution.objective
    return report
