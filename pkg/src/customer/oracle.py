#!/usr/bin/env python3
"""
Brute-force bi-level oracle.

For each candidate incentive vector, every customer's set of optimal
responses is an interval [lo, hi] of window extensions. The operator's
routing MILP is solved with the rates fixed and each extension free within
its interval (optimistic tie-breaking). The cheapest candidate is the
bi-level optimum over the grid.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from src.core.model_builder import build_response_model
from src.customer.inconvenience import distinct_responses, response_interval
from src.scenario.scenario import ScenarioSpec
from src.solvers.branch_and_bound import MipLimits, solve_mip

logger = logging.getLogger(__name__)

Interval = Tuple[float, float]
Candidate = Tuple[Dict[str, float], Dict[str, Interval]]


@dataclass
class OracleEntry:
    q: Dict[str, float]
    responses: Dict[str, Interval]
    delta: Dict[str, float]
    objective: float
    status: str


@dataclass
class OracleResult:
    objective: float
    q: Dict[str, float]
    delta: Dict[str, float]
    entries: List[OracleEntry] = field(default_factory=list)

    @property
    def q_vector(self) -> Tuple[float, ...]:
        return tuple(self.q.values())


def _as_mapping(scenario: ScenarioSpec, q) -> Dict[str, float]:
    ids = [c.id for c in scenario.customers]
    if isinstance(q, Mapping):
        return {cid: float(q[cid]) for cid in ids}
    q = list(q)
    if len(q) != len(ids):
        raise ValueError(f"q vector has {len(q)} entries for {len(ids)} customers")
    return dict(zip(ids, (float(v) for v in q)))


def _responses(scenario: ScenarioSpec, q: Dict[str, float]) -> Dict[str, Interval]:
    return {c.id: response_interval(c.inconvenience, q[c.id]) for c in scenario.customers}


def _reduce_grid(scenario: ScenarioSpec, q_grid) -> List[Candidate]:
    """Keep, per distinct response vector, only the componentwise-minimal rate vectors."""
    groups: Dict[Tuple[Interval, ...], List[Dict[str, float]]] = {}
    responses: Dict[Tuple[Interval, ...], Dict[str, Interval]] = {}
    for raw in q_grid:
        q = _as_mapping(scenario, raw)
        response = _responses(scenario, q)
        key = tuple(response.values())
        groups.setdefault(key, []).append(q)
        responses[key] = response

    candidates = []
    for key, members in groups.items():
        for q in members:
            dominated = any(other != q and all(other[c] <= q[c] for c in q) for other in members)
            if not dominated and (q, responses[key]) not in candidates:
                candidates.append((q, responses[key]))
    return candidates


def _as_mapping_axes(scenario: ScenarioSpec, q_axes) -> Dict[str, Sequence[float]]:
    ids = [c.id for c in scenario.customers]
    if isinstance(q_axes, Mapping):
        return {cid: list(q_axes[cid]) for cid in ids}
    q_axes = list(q_axes)
    if len(q_axes) == 1 and len(ids) > 1:
        q_axes = q_axes * len(ids)
    if len(q_axes) != len(ids):
        raise ValueError(f"{len(q_axes)} q axes for {len(ids)} customers")
    return dict(zip(ids, (list(a) for a in q_axes)))


def _axes_candidates(scenario: ScenarioSpec, q_axes) -> List[Candidate]:
    axes = _as_mapping_axes(scenario, q_axes)
    per_customer = [distinct_responses(c.inconvenience, axes[c.id]) for c in scenario.customers]
    ids = [c.id for c in scenario.customers]
    candidates = []
    for combo in itertools.product(*per_customer):
        q = {cid: pair[0] for cid, pair in zip(ids, combo)}
        response = {cid: pair[1] for cid, pair in zip(ids, combo)}
        candidates.append((q, response))
    return candidates


def grid_axis(q_max: float, step: float) -> List[float]:
    """Evenly spaced rates 0, step, ... up to and including q_max."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    count = int(math.floor(q_max / step + 1e-9))
    axis = [round(k * step, 12) for k in range(count + 1)]
    if axis[-1] < q_max - 1e-12:
        axis.append(q_max)
    return axis


def bilevel_oracle(scenario: ScenarioSpec, q_grid: Optional[Sequence] = None, q_axes=None,
                   limits: Optional[MipLimits] = None) -> OracleResult:
    """
    Best operator objective over a grid of incentive vectors.

    q_grid is a list of rate vectors (sequences aligned with
    scenario.customers, or mappings by customer id). q_axes gives one rate
    list per customer and stands for their full product.
    """
    if q_grid is None and q_axes is None:
        raise ValueError("Either q_grid or q_axes is required")
    if q_grid is not None and len(q_grid) == 0:
        raise ValueError("q_grid must not be empty")

    if q_grid is not None:
        candidates = _reduce_grid(scenario, q_grid)
    else:
        candidates = _axes_candidates(scenario, q_axes)
    logger.info("Oracle evaluates %d candidate responses for %s", len(candidates), scenario.name)

    best: Optional[OracleResult] = None
    entries = []
    for q, response in candidates:
        model = build_response_model(scenario, q, response)
        result = solve_mip(model, limits=limits)
        delta = {cid: interval[1] for cid, interval in response.items()}
        if result.has_solution:
            values = result.incumbent.values
            delta = {c.id: float(values[model.find_var('delta', scenario.index_of(c.id))])
                     for c in scenario.customers}
        entries.append(OracleEntry(q=q, responses=response, delta=delta, objective=result.objective,
                                   status=result.status))
        if result.has_solution and (best is None or result.objective < best.objective - 1e-12):
            best = OracleResult(objective=result.objective, q=q, delta=delta)

    if best is None:
        best = OracleResult(objective=math.inf, q={}, delta={})
    best.entries = entries
    return best


def oracle_table(result: OracleResult) -> pd.DataFrame:
    """One row per evaluated candidate, for CSV export."""
    rows = []
    for entry in result.entries:
        row = {'objective': entry.objective, 'status': entry.status}
        row.update({f"q_{cid}": v for cid, v in entry.q.items()})
        row.update({f"delta_lo_{cid}": v[0] for cid, v in entry.responses.items()})
        row.update({f"delta_hi_{cid}": v[1] for cid, v in entry.responses.items()})
        row.update({f"delta_{cid}": v for cid, v in entry.delta.items()})
        rows.append(row)
    return pd.DataFrame(rows)
