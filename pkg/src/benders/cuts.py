#!/usr/bin/env python3
"""
Benders cuts.

Optimality cuts read  Theta >= constant + zeta (X_d - Z_bar),
feasibility cuts read       0 >= constant + upsilon (X_d - Z_bar).

Classic cuts take the constant from the LP subproblem at Z_bar = X_d*.
Strengthened cuts solve the Lagrangian inner problem with Z binary
(mixed-integer) and anchor the cut at its solution; for the same
multipliers they only move the constant up.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from config import STRENGTHEN_GAP
from src.benders.partition import Partition
from src.benders.subproblems import FeasibilityResult, SubproblemResult, copy_system
from src.solvers.branch_and_bound import MipLimits, OPTIMAL, solve_mip
from src.solvers.simplex import INFEASIBLE

logger = logging.getLogger(__name__)

OPTIMALITY = 'optimality'
FEASIBILITY = 'feasibility'


@dataclass
class Cut:
    kind: str
    strengthened: bool
    coefficients: np.ndarray
    constant: float
    z_bar: np.ndarray
    provenance: Dict = field(default_factory=dict)

    def value_at(self, x_d: np.ndarray) -> float:
        """Right-hand side constant + coefficients (x_d - z_bar)."""
        return float(self.constant + self.coefficients @ (np.asarray(x_d, dtype=float) - self.z_bar))

    def violation(self, x_d: np.ndarray, theta: float = 0.0) -> float:
        bound = self.value_at(x_d)
        if self.kind == OPTIMALITY:
            return max(bound - theta, 0.0)
        return max(bound, 0.0)

    def as_row(self):
        """(X_d coefficients, Theta coefficient, sense code, rhs) for the master."""
        shift = float(self.coefficients @ self.z_bar)
        if self.kind == OPTIMALITY:
            # Theta - coef X >= constant - coef z_bar
            return -self.coefficients, 1.0, 1, self.constant - shift
        # coef X <= coef z_bar - constant
        return self.coefficients.copy(), 0.0, -1, shift - self.constant


def optimality_cut(x_star: np.ndarray, sub: SubproblemResult, iteration: int = 0) -> Cut:
    return Cut(kind=OPTIMALITY, strengthened=False, coefficients=sub.zeta.copy(), constant=sub.objective,
               z_bar=np.asarray(x_star, dtype=float).copy(),
               provenance={'iteration': iteration, 'source': 'lp', 'sub_objective': sub.objective, 'xi': 0.0})


def feasibility_cut(x_star: np.ndarray, fsp: FeasibilityResult, iteration: int = 0) -> Cut:
    return Cut(kind=FEASIBILITY, strengthened=False, coefficients=fsp.upsilon.copy(), constant=fsp.slack_sum,
               z_bar=np.asarray(x_star, dtype=float).copy(),
               provenance={'iteration': iteration, 'source': 'lp', 'sub_objective': fsp.slack_sum, 'xi': 0.0})


def _inner_limits(time_budget: Optional[float], workers: int) -> MipLimits:
    return MipLimits(time=time_budget, gap=STRENGTHEN_GAP, workers=workers)


def strengthen_optimality(partition: Partition, x_star: np.ndarray, zeta: np.ndarray, lp_value: float,
                          iteration: int = 0, time_budget: Optional[float] = None, workers: int = 1) -> Cut:
    """
    Solve min c_c X_c - zeta (Z - x_star) over all model rows with Z binary
    and return the cut anchored at the inner solution.

    lp_value is the LP subproblem value at x_star, the inner value with Z
    relaxed. When the inner MIP stops early its best bound is used (never
    below lp_value) with the cut anchored at x_star.
    """
    x_star = np.asarray(x_star, dtype=float)
    rows = np.concatenate([partition.coupled_rows, partition.master_rows])
    system = copy_system(partition, rows)
    c = np.concatenate([partition.c_c, -zeta])
    form = system.form(c, constant=float(zeta @ x_star))

    started = time.perf_counter()
    result = solve_mip(form, integral_vars=system.z_cols, limits=_inner_limits(time_budget, workers))
    elapsed = time.perf_counter() - started

    provenance = {'iteration': iteration, 'lp_value': lp_value, 'inner_status': result.status,
                  'inner_time': elapsed}
    if result.status == OPTIMAL:
        values = result.incumbent.values
        x_c = values[:system.n_c]
        provenance.update(source='mip', sub_objective=result.objective, xi=result.objective - lp_value)
        return Cut(kind=OPTIMALITY, strengthened=True, coefficients=zeta.copy(),
                   constant=float(partition.c_c @ x_c), z_bar=values[system.z_cols].copy(),
                   provenance=provenance)

    # stopped early: only the bound is a safe constant
    bound = result.best_bound if math.isfinite(result.best_bound) else lp_value
    inner = max(bound, lp_value)
    if result.status == INFEASIBLE:
        inner = lp_value
    logger.warning("Inner MIP for the strengthened cut stopped with %s; using bound %.6g", result.status, inner)
    provenance.update(source='mip_bound', sub_objective=inner, xi=inner - lp_value)
    return Cut(kind=OPTIMALITY, strengthened=True, coefficients=zeta.copy(), constant=inner,
               z_bar=x_star.copy(), provenance=provenance)


def strengthen_feasibility(partition: Partition, x_star: np.ndarray, upsilon: np.ndarray, slack_value: float,
                           iteration: int = 0, time_budget: Optional[float] = None, workers: int = 1) -> Cut:
    """
    Solve min sum(S) - upsilon (Z - x_star) with slacks on coupled and master
    rows and Z binary. Falls back to the classic cut when the result does not
    separate x_star.
    """
    x_star = np.asarray(x_star, dtype=float)
    rows = np.concatenate([partition.coupled_rows, partition.master_rows])
    system = copy_system(partition, rows, slack_rows=range(len(rows)))
    c = np.concatenate([np.zeros(system.n_c), -upsilon, np.ones(system.n_slack)])
    form = system.form(c, constant=float(upsilon @ x_star))

    started = time.perf_counter()
    result = solve_mip(form, integral_vars=system.z_cols, limits=_inner_limits(time_budget, workers))
    provenance = {'iteration': iteration, 'lp_value': slack_value, 'inner_status': result.status,
                  'inner_time': time.perf_counter() - started}

    classic = Cut(kind=FEASIBILITY, strengthened=False, coefficients=upsilon.copy(), constant=slack_value,
                  z_bar=x_star.copy(), provenance=dict(provenance, source='lp', sub_objective=slack_value, xi=0.0))

    if result.status == OPTIMAL:
        values = result.incumbent.values
        slack_sum = float(values[system.n_c + system.n_d:].sum())
        cut = Cut(kind=FEASIBILITY, strengthened=True, coefficients=upsilon.copy(), constant=slack_sum,
                  z_bar=values[system.z_cols].copy(),
                  provenance=dict(provenance, source='mip', sub_objective=result.objective,
                                  xi=result.objective - slack_value))
    elif math.isfinite(result.best_bound) and result.best_bound > 0:
        cut = Cut(kind=FEASIBILITY, strengthened=True, coefficients=upsilon.copy(), constant=result.best_bound,
                  z_bar=x_star.copy(),
                  provenance=dict(provenance, source='mip_bound', sub_objective=result.best_bound,
                                  xi=result.best_bound - slack_value))
    else:
        cut = None

    if cut is None or cut.violation(x_star) <= 1e-9:
        logger.warning("Strengthened feasibility cut does not separate the master point; using the classic cut")
        classic.provenance['fallback'] = True
        return classic
    return cut
