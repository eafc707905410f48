#!/usr/bin/env python3
"""
Master problem and continuous subproblems of the Benders decomposition.

Subproblems work on the column layout [X_c | Z | slacks], where Z is a
copy of the discrete block. Copy rows Z = X_d* sit last, so their duals
are the last n_d entries of the LP dual vector.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.benders.partition import InfeasibleProblemError, Partition
from src.core.model import StandardForm
from src.solvers.branch_and_bound import CUTOFF, MipLimits, solve_mip
from src.solvers.simplex import INFEASIBLE, OPTIMAL, solve_standard_form

logger = logging.getLogger(__name__)

_LE, _EQ, _GE = -1, 0, 1


@dataclass
class MasterResult:
    x_d: Optional[np.ndarray]
    theta: float
    lower_bound: float
    relaxed: bool
    # no binary master point beats limits.cutoff
    exhausted: bool = False


@dataclass
class SubproblemResult:
    feasible: bool
    objective: float
    x_c: Optional[np.ndarray] = None
    z_bar: Optional[np.ndarray] = None
    zeta: Optional[np.ndarray] = None


@dataclass
class FeasibilityResult:
    slack_sum: float
    z_bar: np.ndarray
    upsilon: np.ndarray
    x_c: Optional[np.ndarray] = None


@dataclass
class CopySystem:
    """Arrays of a subproblem over [X_c | Z | slacks] and where each block lives."""
    A: np.ndarray
    sense: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_c: int
    n_d: int
    n_slack: int

    @property
    def z_cols(self) -> np.ndarray:
        return self.n_c + np.arange(self.n_d)

    def form(self, c: np.ndarray, constant: float = 0.0) -> StandardForm:
        return StandardForm(c=c, A=self.A, sense=self.sense, b=self.b, lo=self.lo, hi=self.hi,
                            constant=constant)


def _slack_bound(A: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    magnitude = np.maximum(np.abs(lo), np.abs(hi))
    return np.abs(A) @ magnitude + np.abs(b) + 1.0


def copy_system(partition: Partition, rows: np.ndarray, slack_rows: Sequence[int] = (),
                x_star: Optional[np.ndarray] = None) -> CopySystem:
    """
    Rows of the model over [X_c | Z], optional slack columns on `slack_rows`
    (positions within `rows`), and copy rows Z = x_star when given.
    """
    form = partition.form
    cols = np.concatenate([partition.continuous, partition.discrete])
    A = form.A[np.ix_(rows, cols)] if rows.size else np.zeros((0, cols.size))
    sense = form.sense[rows].copy()
    b = form.b[rows].copy()
    lo = form.lo[cols].copy()
    hi = form.hi[cols].copy()

    slack_rows = list(slack_rows)
    slack_cols = []
    slack_hi = []
    if slack_rows:
        bound = _slack_bound(A, b, lo, hi)
        for r in slack_rows:
            # a x - S <= b, a x + S >= b, a x + S+ - S- = b
            signs = {_LE: (-1.0,), _GE: (1.0,), _EQ: (1.0, -1.0)}[int(sense[r])]
            for sign in signs:
                column = np.zeros(len(rows))
                column[r] = sign
                slack_cols.append(column)
                slack_hi.append(bound[r])
    n_slack = len(slack_cols)
    if n_slack:
        A = np.hstack([A, np.column_stack(slack_cols)])
        lo = np.concatenate([lo, np.zeros(n_slack)])
        hi = np.concatenate([hi, np.array(slack_hi)])

    n_c, n_d = partition.n_continuous, partition.n_discrete
    if x_star is not None:
        copy = np.zeros((n_d, A.shape[1]))
        copy[np.arange(n_d), n_c + np.arange(n_d)] = 1.0
        A = np.vstack([A, copy])
        sense = np.concatenate([sense, np.zeros(n_d, dtype=int)])
        b = np.concatenate([b, np.asarray(x_star, dtype=float)])
    return CopySystem(A=A, sense=sense, b=b, lo=lo, hi=hi, n_c=n_c, n_d=n_d, n_slack=n_slack)


def solve_master(partition: Partition, cuts: Sequence, relax: bool,
                 limits: Optional[MipLimits] = None) -> Optional[MasterResult]:
    """
    min c_d X_d + Theta over the master rows and the cut pool.

    With relax=True the LP relaxation is solved. Raises InfeasibleProblemError
    when no master point exists; returns None when the limits stop the
    binary master before it finds one. Under a cutoff in `limits`, a master
    with no point below it comes back exhausted with the cutoff as bound.
    """
    form = partition.form
    n_d = partition.n_discrete
    rows = partition.master_rows
    D = form.A[np.ix_(rows, partition.discrete)] if rows.size else np.zeros((0, n_d))
    A = np.hstack([D, np.zeros((len(rows), 1))])
    sense = list(form.sense[rows])
    b = list(form.b[rows])

    cut_rows = []
    for cut in cuts:
        coefficients, theta_coef, cut_sense, rhs = cut.as_row()
        cut_rows.append(np.concatenate([coefficients, [theta_coef]]))
        sense.append(cut_sense)
        b.append(rhs)
    if cut_rows:
        A = np.vstack([A, np.array(cut_rows)])

    theta_lo, theta_hi = partition.theta_bounds
    master = StandardForm(
        c=np.concatenate([partition.c_d, [1.0]]),
        A=A,
        sense=np.array(sense, dtype=int),
        b=np.array(b, dtype=float),
        lo=np.concatenate([form.lo[partition.discrete], [theta_lo]]),
        hi=np.concatenate([form.hi[partition.discrete], [theta_hi]]),
        constant=form.constant,
    )

    if relax:
        lp = solve_standard_form(master)
        if lp.status == INFEASIBLE:
            raise InfeasibleProblemError("LP relaxation of the master problem is infeasible")
        x, bound = lp.x, lp.objective
    else:
        mip = solve_mip(master, integral_vars=range(n_d), limits=limits)
        if mip.status == CUTOFF:
            return MasterResult(x_d=None, theta=math.nan, lower_bound=mip.best_bound, relaxed=False,
                                exhausted=True)
        if not mip.has_solution:
            if mip.status == INFEASIBLE:
                raise InfeasibleProblemError("Master problem is infeasible")
            logger.warning("Master stopped with %s before finding an integer point", mip.status)
            return None
        x, bound = mip.incumbent.values, mip.best_bound
    return MasterResult(x_d=np.asarray(x[:n_d], dtype=float), theta=float(x[n_d]),
                        lower_bound=float(bound), relaxed=relax)


def solve_subproblem(partition: Partition, x_star: np.ndarray) -> SubproblemResult:
    """Continuous subproblem with copy rows Z = x_star; duals of the copy rows give zeta."""
    system = copy_system(partition, partition.coupled_rows, x_star=x_star)
    c = np.concatenate([partition.c_c, np.zeros(system.n_d)])
    lp = solve_standard_form(system.form(c))
    if lp.status != OPTIMAL:
        return SubproblemResult(feasible=False, objective=math.inf)
    n_c, n_d = system.n_c, system.n_d
    return SubproblemResult(
        feasible=True,
        objective=lp.objective,
        x_c=lp.x[:n_c].copy(),
        z_bar=np.asarray(x_star, dtype=float).copy(),
        zeta=lp.duals[-n_d:].copy() if n_d else np.zeros(0),
    )


def solve_feasibility(partition: Partition, x_star: np.ndarray) -> FeasibilityResult:
    """Minimum total slack on the coupled rows with Z fixed to x_star; duals of the copy rows give upsilon."""
    rows = partition.coupled_rows
    system = copy_system(partition, rows, slack_rows=range(len(rows)), x_star=x_star)
    c = np.concatenate([np.zeros(system.n_c + system.n_d), np.ones(system.n_slack)])
    lp = solve_standard_form(system.form(c))
    if lp.status != OPTIMAL:
        # only the copy rows can fail, e.g. x_star outside the box
        raise InfeasibleProblemError("Feasibility subproblem has no solution for the given master point")
    n_d = system.n_d
    return FeasibilityResult(
        slack_sum=lp.objective,
        z_bar=np.asarray(x_star, dtype=float).copy(),
        upsilon=lp.duals[-n_d:].copy() if n_d else np.zeros(0),
        x_c=lp.x[:system.n_c].copy(),
    )
