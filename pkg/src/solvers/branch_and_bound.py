#!/usr/bin/env python3
"""
LP-based branch-and-bound for mixed binary programs.

Nodes are kept in a heap ordered by their parent's LP bound (best bound
first, ties by creation order). The branching variable is the most
fractional integral variable, ties broken by the smaller index. Node
evaluation is a pure function of the model arrays and the node bounds, so
batches of nodes may be solved in a thread pool; their results are merged
in node order through a locked incumbent ledger.

A node whose integral variables are within tolerance of integers yields an
incumbent only after its continuous part is re-solved with those variables
fixed. An optional cutoff prunes every node that cannot beat it.
"""

import heapq
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from config import DEFAULT_MIP_GAP, INTEGRALITY_TOL
from src.core.model import MilpModel, Solution, StandardForm
from src.solvers.simplex import INFEASIBLE, NumericalError, UNBOUNDED, solve_standard_form

logger = logging.getLogger(__name__)

OPTIMAL = 'optimal'
GAP_LIMIT = 'gap_limit'
TIME_LIMIT = 'time_limit'
NODE_LIMIT = 'node_limit'
CUTOFF = 'cutoff'


@dataclass
class MipLimits:
    time: Optional[float] = None
    gap: float = DEFAULT_MIP_GAP
    nodes: Optional[int] = None
    workers: int = 1
    # nodes bounded at or above the cutoff are pruned; no solution below it gives CUTOFF
    cutoff: Optional[float] = None


@dataclass
class MipSolveResult:
    status: str
    incumbent: Optional[Solution]
    best_bound: float
    gap: float
    node_count: int
    wall_time: float = 0.0

    @property
    def objective(self) -> float:
        return self.incumbent.objective if self.incumbent is not None else math.inf

    @property
    def has_solution(self) -> bool:
        return self.incumbent is not None


@dataclass(frozen=True)
class BranchNode:
    bound_changes: Tuple[Tuple[int, float, float], ...]
    parent_bound: float
    depth: int
    node_id: int = 0


def relative_gap(upper: float, lower: float) -> float:
    if not math.isfinite(upper):
        return math.inf
    return max(upper - lower, 0.0) / max(1.0, abs(upper))


class IncumbentLedger:
    """Best known solution and bound history, shared by node workers."""

    def __init__(self):
        self._lock = threading.Lock()
        self.values: Optional[np.ndarray] = None
        self.upper = math.inf
        self.lower = -math.inf

    def offer(self, values: np.ndarray, objective: float) -> bool:
        with self._lock:
            if objective < self.upper - 1e-12 * max(1.0, abs(objective)):
                self.values = values
                self.upper = objective
                return True
            return False

    def record_lower(self, bound: float):
        with self._lock:
            slack = 1e-7 * max(1.0, abs(bound))
            if bound < self.lower - slack:
                raise NumericalError(f"Lower bound decreased from {self.lower} to {bound}")
            self.lower = max(self.lower, bound)


def _node_bounds(form: StandardForm, node: BranchNode) -> Tuple[np.ndarray, np.ndarray]:
    lo = form.lo.copy()
    hi = form.hi.copy()
    for j, new_lo, new_hi in node.bound_changes:
        lo[j] = new_lo
        hi[j] = new_hi
    return lo, hi


def evaluate_node(form: StandardForm, node: BranchNode):
    lo, hi = _node_bounds(form, node)
    return solve_standard_form(form, lo, hi)


def _most_fractional(x: np.ndarray, integral: np.ndarray) -> Optional[int]:
    if integral.size == 0:
        return None
    values = x[integral]
    frac = np.abs(values - np.round(values))
    if frac.max() <= INTEGRALITY_TOL:
        return None
    distance = np.minimum(values - np.floor(values), np.ceil(values) - values)
    best = np.flatnonzero(distance >= distance.max() - 1e-12)
    return int(integral[best].min())


def _fix_integral(form: StandardForm, node: BranchNode, lp, integral: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Incumbent from an integral-within-tolerance node: integral variables are
    rounded and fixed, the continuous part is re-solved against them.
    """
    rounded = np.round(lp.x[integral])
    if integral.size == 0 or np.array_equal(rounded, lp.x[integral]):
        return lp.x.copy(), float(lp.objective)
    lo, hi = _node_bounds(form, node)
    lo[integral] = rounded
    hi[integral] = rounded
    fixed = solve_standard_form(form, lo, hi)
    if fixed.status == OPTIMAL:
        values = fixed.x.copy()
        values[integral] = rounded
        return values, float(form.c @ values) + form.constant
    logger.debug("Re-solve with rounded integral values ended %s; keeping the rounded node point",
                 fixed.status)
    values = lp.x.copy()
    values[integral] = rounded
    return values, float(form.c @ values) + form.constant


def solve_mip(model: Union[MilpModel, StandardForm], integral_vars: Optional[Iterable[int]] = None,
              limits: Optional[MipLimits] = None) -> MipSolveResult:
    """Branch-and-bound over the given integral variables."""
    limits = limits or MipLimits()
    start = time.perf_counter()

    if isinstance(model, MilpModel):
        form = model.standard_form
        binaries = set(model.binary_indices)
        integral = sorted(binaries if integral_vars is None else {int(j) for j in integral_vars})
        stray = [j for j in integral if j not in binaries]
        if stray:
            raise ValueError(f"Integral variables must be binary-tagged, got {stray[:5]}")
    else:
        form = model
        integral = sorted(set(() if integral_vars is None else (int(j) for j in integral_vars)))
    integral = np.array(integral, dtype=int)

    ledger = IncumbentLedger()
    heap: List[Tuple[float, int, BranchNode]] = []
    counter = 0
    node_count = 0

    cutoff = math.inf if limits.cutoff is None else float(limits.cutoff)

    def pruned(bound: float) -> bool:
        upper = min(ledger.upper, cutoff)
        return math.isfinite(upper) and bound >= upper - 1e-9 * max(1.0, abs(upper))

    def process(node: BranchNode, lp) -> None:
        nonlocal counter
        if lp.status == UNBOUNDED:
            raise NumericalError("Unbounded node relaxation in a bounded model")
        if lp.status == INFEASIBLE:
            return
        bound = max(lp.objective, node.parent_bound)
        if pruned(bound):
            return
        j = _most_fractional(lp.x, integral)
        if j is None:
            values, objective = _fix_integral(form, node, lp, integral)
            if objective >= cutoff:
                return
            if ledger.offer(values, objective):
                logger.debug("New incumbent %.6f at depth %d", objective, node.depth)
            return
        for new_lo, new_hi in ((form.lo[j], math.floor(lp.x[j])), (math.ceil(lp.x[j]), form.hi[j])):
            counter += 1
            child = BranchNode(bound_changes=node.bound_changes + ((j, float(new_lo), float(new_hi)),),
                               parent_bound=bound, depth=node.depth + 1, node_id=counter)
            heapq.heappush(heap, (bound, counter, child))

    root = BranchNode(bound_changes=(), parent_bound=-math.inf, depth=0, node_id=0)
    root_lp = evaluate_node(form, root)
    node_count = 1
    root_bound = root_lp.objective if root_lp.status != INFEASIBLE else math.inf
    process(root, root_lp)

    status = None
    executor = ThreadPoolExecutor(max_workers=limits.workers) if limits.workers > 1 else None
    try:
        while heap:
            lower = min(heap[0][0], ledger.upper)
            ledger.record_lower(lower)
            if relative_gap(ledger.upper, lower) <= limits.gap:
                status = OPTIMAL if relative_gap(ledger.upper, lower) <= DEFAULT_MIP_GAP else GAP_LIMIT
                break
            if limits.time is not None and time.perf_counter() - start >= limits.time:
                status = TIME_LIMIT
                break
            if limits.nodes is not None and node_count >= limits.nodes:
                status = NODE_LIMIT
                break

            batch = []
            while heap and len(batch) < max(1, limits.workers):
                bound, _, node = heapq.heappop(heap)
                if pruned(bound):
                    continue
                batch.append(node)
            if not batch:
                continue
            if executor is not None:
                results = list(executor.map(lambda nd: evaluate_node(form, nd), batch))
            else:
                results = [evaluate_node(form, nd) for nd in batch]
            for node, lp in sorted(zip(batch, results), key=lambda pair: pair[0].node_id):
                node_count += 1
                process(node, lp)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    wall = time.perf_counter() - start
    incumbent = None
    if ledger.values is not None:
        incumbent = Solution(values=ledger.values, objective=ledger.upper)

    if status is None:
        # tree exhausted
        if incumbent is None and math.isfinite(cutoff) and root_lp.status != INFEASIBLE:
            logger.info("MIP: no solution below the cutoff %.6g, %d nodes, %.2fs", cutoff, node_count, wall)
            return MipSolveResult(status=CUTOFF, incumbent=None, best_bound=cutoff,
                                  gap=math.inf, node_count=node_count, wall_time=wall)
        if incumbent is None:
            return MipSolveResult(status=INFEASIBLE, incumbent=None, best_bound=math.inf,
                                  gap=math.inf, node_count=node_count, wall_time=wall)
        best_bound = ledger.upper
        status = OPTIMAL
    else:
        best_bound = min(heap[0][0], ledger.upper) if heap else ledger.upper
        if status in (TIME_LIMIT, NODE_LIMIT) and not math.isfinite(best_bound):
            best_bound = root_bound

    gap = relative_gap(ledger.upper, best_bound)
    if incumbent is not None:
        incumbent.status = status
        incumbent.gap = gap
    logger.info("MIP %s: objective %.6g, bound %.6g, %d nodes, %.2fs",
                status, ledger.upper, best_bound, node_count, wall)
    return MipSolveResult(status=status, incumbent=incumbent, best_bound=best_bound, gap=gap,
                          node_count=node_count, wall_time=wall)
