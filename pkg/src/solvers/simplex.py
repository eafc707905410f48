#!/usr/bin/env python3
"""
Bounded-variable revised simplex.

Rows are turned into equalities with one slack per row (bounded on one side
for inequalities, fixed at zero for equalities). Phase 1 minimizes the sum
of artificial variables added to rows whose slack cannot absorb the initial
residual; phase 2 continues from the phase 1 basis. The basis inverse is a
dense LU factorization plus a product-form eta file, refactorized every
REFACTOR_INTERVAL pivots. Dantzig pricing switches to Bland's rule after a
run of BLAND_THRESHOLD degenerate pivots.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from config import BLAND_THRESHOLD, FEASIBILITY_TOL, REFACTOR_INTERVAL
from src.core.model import MilpModel, StandardForm

logger = logging.getLogger(__name__)

OPTIMAL = 'optimal'
INFEASIBLE = 'infeasible'
UNBOUNDED = 'unbounded'

_PIVOT_TOL = 1e-9
_DUAL_TOL = 1e-9
_DEGENERATE_STEP = 1e-12


class NumericalError(RuntimeError):
    """Raised when the simplex cannot produce a trustworthy answer."""


@dataclass
class LpSolveResult:
    status: str
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    objective: float
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    complementarity: float = 0.0
    duality_gap: float = 0.0
    dual_objective: float = 0.0

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


class _BasisFactor:
    """LU of the refactorization basis plus eta updates."""

    def __init__(self, B: np.ndarray):
        self.lu = lu_factor(B, check_finite=False)
        pivots = np.abs(np.diag(self.lu[0]))
        if pivots.size and pivots.min() < 1e-13 * max(1.0, pivots.max()):
            raise NumericalError("Singular basis during refactorization")
        self.etas = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        z = lu_solve(self.lu, v, check_finite=False)
        for r, eta in self.etas:
            zr = z[r]
            if zr != 0.0:
                z += eta * zr
                z[r] = eta[r] * zr
        return z

    def btran(self, c: np.ndarray) -> np.ndarray:
        v = np.array(c, dtype=float)
        for r, eta in reversed(self.etas):
            v[r] = v @ eta
        return lu_solve(self.lu, v, trans=1, check_finite=False)

    def update(self, r: int, w: np.ndarray):
        eta = -w / w[r]
        eta[r] = 1.0 / w[r]
        self.etas.append((r, eta))


class BoundedSimplex:
    """One LP instance in computational form [A | I | artificials]."""

    def __init__(self, form: StandardForm, lo: np.ndarray, hi: np.ndarray,
                 refactor_interval: int = REFACTOR_INTERVAL, bland_threshold: int = BLAND_THRESHOLD,
                 feasibility_tol: float = FEASIBILITY_TOL, max_iterations: Optional[int] = None):
        A = np.asarray(form.A, dtype=float)
        self.m, self.n = A.shape
        m, n = self.m, self.n
        self.b = np.asarray(form.b, dtype=float)
        self.c = np.asarray(form.c, dtype=float)
        self.constant = form.constant
        self.refactor_interval = refactor_interval
        self.bland_threshold = bland_threshold
        self.feasibility_tol = feasibility_tol
        self.max_iterations = max_iterations or 50 * (m + n) + 1000
        self.iterations = 0

        sense = np.asarray(form.sense)
        slack_lo = np.where(sense == 1, -np.inf, 0.0)
        slack_hi = np.where(sense == -1, np.inf, 0.0)

        x_struct = np.array(lo, dtype=float)
        residual = self.b - A @ x_struct
        self.scale = max(1.0, float(np.abs(self.b).max()) if m else 1.0)
        tol = feasibility_tol * self.scale

        fits = (residual >= slack_lo - tol) & (residual <= slack_hi + tol)
        signs = np.where(residual >= 0, 1.0, -1.0)
        self.M = np.hstack([A, np.eye(m), np.diag(signs)])
        self.lo = np.concatenate([lo, slack_lo, np.zeros(m)])
        self.hi = np.concatenate([hi, slack_hi, np.where(fits, 0.0, np.inf)])

        self.x = np.zeros(n + 2 * m)
        self.x[:n] = x_struct
        slack_cols = n + np.arange(m)
        art_cols = n + m + np.arange(m)
        self.x[slack_cols] = np.where(fits, np.clip(residual, slack_lo, slack_hi), 0.0)
        self.x[art_cols] = np.where(fits, 0.0, np.abs(residual))
        self.basis = np.where(fits, slack_cols, art_cols)
        self.artificial_start = n + m

        self.is_basic = np.zeros(n + 2 * m, dtype=bool)
        self.is_basic[self.basis] = True
        self._refactor()

    # Factorization helpers

    def _refactor(self):
        self.factor = _BasisFactor(self.M[:, self.basis])
        self.pivots_since_refactor = 0
        nonbasic = ~self.is_basic
        rhs = self.b - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.factor.ftran(rhs)

    def _pivot(self, r: int, q: int, w: np.ndarray):
        leaving = self.basis[r]
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.factor.update(r, w)
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= self.refactor_interval:
            self._refactor()

    # Main loop

    def _run(self, cost: np.ndarray) -> str:
        degenerate_run = 0
        bland = False
        while True:
            self.iterations += 1
            if self.iterations > self.max_iterations:
                raise NumericalError(f"Simplex iteration limit {self.max_iterations} reached")

            y = self.factor.btran(cost[self.basis])
            d = cost - self.M.T @ y
            can_increase = (~self.is_basic) & (self.x < self.hi - 1e-12) & (d < -_DUAL_TOL)
            can_decrease = (~self.is_basic) & (self.x > self.lo + 1e-12) & (d > _DUAL_TOL)
            eligible = np.flatnonzero(can_increase | can_decrease)
            if eligible.size == 0:
                return OPTIMAL

            q = int(eligible[0]) if bland else int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if d[q] < 0 else -1.0
            w = self.factor.ftran(self.M[:, q])
            delta = -direction * w

            x_b = self.x[self.basis]
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            limits = np.full(self.m, np.inf)
            with np.errstate(divide='ignore', invalid='ignore'):
                down = delta < -_PIVOT_TOL
                up = delta > _PIVOT_TOL
                limits[down] = (x_b[down] - lo_b[down]) / (-delta[down])
                limits[up] = (hi_b[up] - x_b[up]) / delta[up]
            limits = np.maximum(np.nan_to_num(limits, nan=np.inf), 0.0)

            flip = self.hi[q] - self.lo[q]
            step = float(limits.min()) if self.m else np.inf
            if not np.isfinite(step) and not np.isfinite(flip):
                return UNBOUNDED

            if flip <= step:
                self.x[self.basis] = x_b + delta * flip
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                degenerate_run = 0
                continue

            ties = np.flatnonzero(limits <= step + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(w[ties]))])

            leaving = self.basis[r]
            self.x[self.basis] = x_b + delta * step
            self.x[q] += direction * step
            self.x[leaving] = self.lo[leaving] if delta[r] < 0 else self.hi[leaving]

            if step <= _DEGENERATE_STEP:
                degenerate_run += 1
                if not bland and degenerate_run >= self.bland_threshold:
                    logger.debug("Switching to Bland's rule after %d degenerate pivots", degenerate_run)
                    bland = True
            else:
                degenerate_run = 0
            self._pivot(r, q, w)

    def _drive_out_artificials(self):
        """Pivot zero-valued artificials out of the basis where possible."""
        candidates = np.arange(self.artificial_start)
        for r in range(self.m):
            if self.basis[r] < self.artificial_start:
                continue
            unit = np.zeros(self.m)
            unit[r] = 1.0
            rho = self.factor.btran(unit)
            free = candidates[~self.is_basic[candidates]]
            if free.size == 0:
                continue
            alpha = rho @ self.M[:, free]
            best = int(np.argmax(np.abs(alpha)))
            if abs(alpha[best]) <= 1e-7:
                continue  # redundant row
            q = int(free[best])
            w = self.factor.ftran(self.M[:, q])
            self.x[self.basis[r]] = 0.0
            self._pivot(r, q, w)

    def solve(self) -> str:
        if self.m and np.any(self.basis >= self.artificial_start):
            phase1 = np.zeros(self.M.shape[1])
            phase1[self.artificial_start:] = 1.0
            self._run(phase1)
            infeasibility = float(self.x[self.artificial_start:].sum())
            if infeasibility > self.feasibility_tol * self.scale:
                return INFEASIBLE
            self.hi[self.artificial_start:] = 0.0
            self._drive_out_artificials()
            self._refactor()
        self.hi[self.artificial_start:] = 0.0

        cost = np.zeros(self.M.shape[1])
        cost[:self.n] = self.c
        status = self._run(cost)
        self._refactor()
        return status

    def result(self, status: str) -> LpSolveResult:
        n, m = self.n, self.m
        cost = np.zeros(self.M.shape[1])
        cost[:n] = self.c
        if m:
            y = self.factor.btran(cost[self.basis])
        else:
            y = np.zeros(0)
        d = cost - self.M.T @ y
        d[self.is_basic] = 0.0
        x = self.x[:n].copy()

        A = self.M[:, :n]
        slack = self.x[n:n + m]
        row_residual = np.abs(A @ x + slack - self.b) if m else np.zeros(0)
        bound_residual = np.concatenate([
            np.maximum(self.lo[:n + m] - self.x[:n + m], 0.0),
            np.maximum(self.x[:n + m] - self.hi[:n + m], 0.0),
        ])
        primal = float(max(row_residual.max(initial=0.0), bound_residual.max(initial=0.0)))

        nonbasic = ~self.is_basic[:n + m]
        values = self.x[:n + m]
        at_lo = nonbasic & np.isclose(values, self.lo[:n + m], atol=1e-9, rtol=0.0)
        at_hi = nonbasic & np.isclose(values, self.hi[:n + m], atol=1e-9, rtol=0.0)
        fixed = at_lo & at_hi
        wrong = np.zeros(n + m)
        dd = d[:n + m]
        wrong[at_lo & ~fixed] = np.maximum(-dd[at_lo & ~fixed], 0.0)
        wrong[at_hi & ~fixed] = np.maximum(dd[at_hi & ~fixed], 0.0)
        dual = float(wrong.max(initial=0.0))

        gaps = np.minimum(np.abs(values - self.lo[:n + m]), np.abs(self.hi[:n + m] - values))
        complementarity = float((np.abs(dd) * np.nan_to_num(gaps, posinf=0.0)).max(initial=0.0))

        primal_objective = float(self.c @ x) + self.constant
        dual_objective = float(self.b @ y + d[:n] @ x) + self.constant
        return LpSolveResult(
            status=status,
            x=x,
            duals=y,
            reduced_costs=d[:n].copy(),
            objective=primal_objective,
            iterations=self.iterations,
            primal_residual=primal,
            dual_residual=dual,
            complementarity=complementarity,
            duality_gap=abs(primal_objective - dual_objective),
            dual_objective=dual_objective,
        )


def _unconstrained(form: StandardForm, lo: np.ndarray, hi: np.ndarray) -> LpSolveResult:
    x = np.where(form.c >= 0, lo, hi).astype(float)
    objective = float(form.c @ x) + form.constant
    return LpSolveResult(status=OPTIMAL, x=x, duals=np.zeros(0), reduced_costs=form.c.astype(float),
                         objective=objective, dual_objective=objective)


def solve_standard_form(form: StandardForm, lo: Optional[np.ndarray] = None, hi: Optional[np.ndarray] = None,
                        **options) -> LpSolveResult:
    """Solve an LP given as arrays, with optional bound overrides."""
    lo = np.asarray(form.lo if lo is None else lo, dtype=float)
    hi = np.asarray(form.hi if hi is None else hi, dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("All variables need finite bounds")
    n = lo.size
    if np.any(lo > hi + 1e-12):
        return LpSolveResult(status=INFEASIBLE, x=lo.copy(), duals=np.zeros(form.A.shape[0]),
                             reduced_costs=np.zeros(n), objective=np.inf)
    if form.A.shape[0] == 0:
        return _unconstrained(form, lo, hi)

    simplex = BoundedSimplex(form, lo, hi, **options)
    status = simplex.solve()
    result = simplex.result(status)
    if status == OPTIMAL:
        limit = 1e-6 * simplex.scale
        if result.primal_residual > limit:
            raise NumericalError(f"Primal residual {result.primal_residual:.3e} after {result.iterations} iterations")
        if result.dual_residual > 1e-6 or result.duality_gap > 1e-6 * max(1.0, abs(result.objective)):
            logger.warning("LP certificate weak: dual residual %.2e, gap %.2e",
                           result.dual_residual, result.duality_gap)
    elif status == INFEASIBLE:
        result.objective = np.inf
    logger.debug("LP %s in %d iterations, objective %.6g", status, result.iterations, result.objective)
    return result


def solve_lp(model: MilpModel, relax: Optional[Iterable[int]] = None, **options) -> LpSolveResult:
    """
    Solve the LP of a model. Binary variables must be relaxed explicitly
    through `relax`; None relaxes all of them.
    """
    if relax is not None:
        relaxed = set(relax)
        kept = [j for j in model.binary_indices if j not in relaxed]
        if kept:
            raise ValueError(f"solve_lp cannot enforce integrality; binaries {kept[:5]} not relaxed")
    return solve_standard_form(model.standard_form, **options)
