#!/usr/bin/env python3
"""
GBD / SGBD convergence loop.

Each iteration solves the master (LP relaxation for the first rounds,
then the binary master), evaluates the master point with the continuous
subproblem or, when that is infeasible, the feasibility subproblem, and
adds one cut. SGBD replaces each classic cut by its strengthened version.
Once an incumbent exists the binary master runs with a cutoff at the
incumbent less the gap, so a master with nothing below it closes the loop.
"""

import csv
import logging
import math
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config import (BENDERS_MAX_ITERATIONS, DEFAULT_MIP_GAP, INTEGRALITY_TOL, LP_RELAXED_ROUNDS,
                    STRENGTHEN_TIME_SHARE)
from src.benders.cuts import (Cut, FEASIBILITY, feasibility_cut, optimality_cut,
                              strengthen_feasibility, strengthen_optimality)
from src.benders.partition import InfeasibleProblemError, Partition
from src.benders.subproblems import solve_feasibility, solve_master, solve_subproblem
from src.core.model import Solution
from src.core.validation import ValidationReport, validate_solution
from src.solvers.branch_and_bound import (GAP_LIMIT, MipLimits, MipSolveResult, OPTIMAL, TIME_LIMIT,
                                          relative_gap)

logger = logging.getLogger(__name__)

GBD = 'gbd'
SGBD = 'sgbd'
ITERATION_LIMIT = 'iteration_limit'

__all__ = ['BendersLimits', 'BendersState', 'IterationRecord', 'InfeasibleProblemError', 'run',
           'write_iteration_log', 'GBD', 'SGBD']


@dataclass
class BendersLimits:
    max_iterations: int = BENDERS_MAX_ITERATIONS
    time: Optional[float] = None
    gap: float = DEFAULT_MIP_GAP
    relaxed_rounds: int = LP_RELAXED_ROUNDS
    inner_share: float = STRENGTHEN_TIME_SHARE
    workers: int = 1


@dataclass
class IterationRecord:
    iteration: int
    lb: float
    ub: float
    gap: float
    cut_kind: str
    strengthened: bool
    xi: float
    wall_time: float
    master_relaxed: bool


@dataclass
class BendersState:
    mode: str = GBD
    iteration: int = 0
    lower_bound: float = -math.inf
    upper_bound: float = math.inf
    incumbent: Optional[Solution] = None
    cuts: List[Cut] = field(default_factory=list)
    records: List[IterationRecord] = field(default_factory=list)
    validation: Optional[ValidationReport] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def gap(self) -> float:
        return relative_gap(self.upper_bound, self.lower_bound)

    def add_cut(self, cut: Cut):
        with self._lock:
            self.cuts.append(cut)

    def raise_lower(self, bound: float):
        self.lower_bound = max(self.lower_bound, bound)

    def offer(self, values: np.ndarray, objective: float) -> bool:
        if objective < self.upper_bound:
            self.upper_bound = objective
            self.incumbent = Solution(values=values, objective=objective)
            return True
        return False


def _is_integral(x: np.ndarray) -> bool:
    return x.size == 0 or float(np.abs(x - np.round(x)).max()) <= INTEGRALITY_TOL


def _remaining(limits: BendersLimits, start: float) -> Optional[float]:
    if limits.time is None:
        return None
    return max(limits.time - (time.perf_counter() - start), 0.0)


def _master_cutoff(state: BendersState, limits: BendersLimits) -> Optional[float]:
    """Binary masters only look for points beating the incumbent by more than the gap."""
    if not math.isfinite(state.upper_bound):
        return None
    return state.upper_bound - limits.gap * max(1.0, abs(state.upper_bound))


def _closed_status(limits: BendersLimits) -> str:
    return OPTIMAL if limits.gap <= DEFAULT_MIP_GAP else GAP_LIMIT


def run(partition: Partition, mode: str = SGBD,
        limits: Optional[BendersLimits] = None) -> Tuple[MipSolveResult, BendersState]:
    """Benders loop in `gbd` (classic cuts) or `sgbd` (strengthened cuts) mode."""
    if mode not in (GBD, SGBD):
        raise ValueError(f"Unknown Benders mode {mode!r}")
    limits = limits or BendersLimits()
    model = partition.model
    state = BendersState(mode=mode)
    start = time.perf_counter()
    relaxed_left = limits.relaxed_rounds
    status = ITERATION_LIMIT

    while state.iteration < limits.max_iterations:
        remaining = _remaining(limits, start)
        if remaining is not None and remaining <= 0.0:
            status = TIME_LIMIT
            break
        state.iteration += 1
        relaxed = relaxed_left > 0
        master = solve_master(partition, state.cuts, relax=relaxed,
                              limits=MipLimits(time=remaining, gap=limits.gap, workers=limits.workers,
                                               cutoff=_master_cutoff(state, limits)))
        if master is None:
            state.iteration -= 1
            status = TIME_LIMIT
            break
        state.raise_lower(master.lower_bound)
        if master.exhausted:
            # every master point is within the gap of the incumbent
            state.iteration -= 1
            status = _closed_status(limits)
            logger.info("%s closed after %d iterations: no master point below %.6g", mode.upper(),
                        state.iteration, master.lower_bound)
            break
        x_star = master.x_d
        inner_budget = None if remaining is None else limits.inner_share * remaining

        sub = solve_subproblem(partition, x_star)
        if sub.feasible:
            if _is_integral(x_star):
                values = partition.assemble(np.round(x_star), sub.x_c)
                if state.offer(values, model.evaluate_objective(values)):
                    logger.debug("Iteration %d: new incumbent %.6f", state.iteration, state.upper_bound)
            if mode == SGBD:
                cut = strengthen_optimality(partition, x_star, sub.zeta, sub.objective, state.iteration,
                                            time_budget=inner_budget, workers=limits.workers)
            else:
                cut = optimality_cut(x_star, sub, state.iteration)
            violation = cut.violation(x_star, master.theta)
        else:
            fsp = solve_feasibility(partition, x_star)
            if mode == SGBD:
                cut = strengthen_feasibility(partition, x_star, fsp.upsilon, fsp.slack_sum, state.iteration,
                                             time_budget=inner_budget, workers=limits.workers)
            else:
                cut = feasibility_cut(x_star, fsp, state.iteration)
            violation = cut.violation(x_star)

        violated = violation > 1e-6 * max(1.0, abs(cut.constant))
        if cut.kind == FEASIBILITY:
            violated = violation > 0.0
        if violated:
            state.add_cut(cut)
        if relaxed:
            relaxed_left = relaxed_left - 1 if violated else 0

        state.records.append(IterationRecord(
            iteration=state.iteration,
            lb=state.lower_bound,
            ub=state.upper_bound,
            gap=state.gap,
            cut_kind=cut.kind,
            strengthened=cut.strengthened,
            xi=float(cut.provenance.get('xi', 0.0)),
            wall_time=time.perf_counter() - start,
            master_relaxed=relaxed,
        ))
        logger.info("%s iteration %d: LB %.6g UB %.6g gap %.2e (%s cut%s)", mode.upper(), state.iteration,
                    state.lower_bound, state.upper_bound, state.gap, cut.kind,
                    ', strengthened' if cut.strengthened else '')

        if state.gap <= limits.gap:
            status = OPTIMAL if state.gap <= DEFAULT_MIP_GAP else GAP_LIMIT
            break
        if not relaxed and not violated and math.isfinite(state.upper_bound):
            # binary master point already priced correctly
            status = _closed_status(limits)
            if status == OPTIMAL:
                state.raise_lower(state.upper_bound)
            break

    if state.incumbent is not None:
        state.validation = validate_solution(model, state.incumbent)
        if not state.validation.ok:
            logger.warning("Benders incumbent fails validation: %s", state.validation.summary())
        state.incumbent.status = status
        state.incumbent.gap = state.gap

    result = MipSolveResult(status=status, incumbent=state.incumbent, best_bound=state.lower_bound,
                            gap=state.gap, node_count=state.iteration, wall_time=time.perf_counter() - start)
    return result, state


def write_iteration_log(state: BendersState, path: str):
    """CSV with one row per Benders iteration."""
    columns = list(IterationRecord.__dataclass_fields__)
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for record in state.records:
            writer.writerow(asdict(record))
