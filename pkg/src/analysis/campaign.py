#!/usr/bin/env python3
"""
Experiment campaigns.

A campaign generates one scenario per (seed, size, delta_bar, gamma2) cell
and solves the incentive-free baseline and the single-level incentive
model on it. A solver comparison solves the incentive model of each
instance with the monolithic branch-and-bound, GBD and SGBD.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import pandas as pd

from config import (ARRIVAL_SPREAD_HOURS, BASELINE_WINDOW_WIDTH, DEFAULT_MIP_GAP, DEFAULT_SEEDS,
                    DEFAULT_SIZES, DELTA_BAR_GRID, GAMMA2_GRID, INCONVENIENCE_GAMMA)
from src.benders.driver import GBD, SGBD, BendersLimits, run as run_benders
from src.benders.partition import partition_model
from src.core.model import MilpModel
from src.core.model_builder import build_baseline, build_single_level, cost_breakdown, customer_outcomes
from src.scenario.generator import GenConfig, generate_scenario
from src.scenario.scenario import ScenarioSpec
from src.solvers.branch_and_bound import MipLimits, MipSolveResult, solve_mip
from src.solvers.external import solve_external
from src.utils.progress_tracker import ProgressTracker

logger = logging.getLogger(__name__)

MIP = 'mip'
EXTERNAL = 'external'
BACKENDS = (MIP, EXTERNAL, GBD, SGBD)

BASELINE = 'baseline'
INCENTIVE = 'incentive'
ERROR = 'error'

OBJECTIVE_TOL = 1e-5


@dataclass
class CampaignConfig:
    """Grid of instances and the solver settings applied to each of them."""
    seeds: List[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    sizes: List[int] = field(default_factory=lambda: list(DEFAULT_SIZES))
    delta_bar_grid: List[float] = field(default_factory=lambda: list(DELTA_BAR_GRID))
    gamma2_grid: List[float] = field(default_factory=lambda: list(GAMMA2_GRID))
    window_width: float = BASELINE_WINDOW_WIDTH
    backend: str = MIP
    time_limit: Optional[float] = None
    gap: float = DEFAULT_MIP_GAP
    node_limit: Optional[int] = None
    n_stations: int = 1
    n_vehicles: int = 1
    full_scale: bool = False
    xi: Optional[int] = None
    arrival_spread: float = ARRIVAL_SPREAD_HOURS
    workers: int = 1
    solver_cmd: Optional[str] = None

    def validate(self):
        for name in ('seeds', 'sizes', 'delta_bar_grid', 'gamma2_grid'):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if min(self.sizes) < 3:
            raise ValueError(f"sizes must be >= 3, got {self.sizes}")
        if min(self.sizes) < 2 + self.n_stations:
            raise ValueError(f"size {min(self.sizes)} leaves no room for 2 depot nodes and "
                             f"{self.n_stations} stations")
        if min(self.delta_bar_grid) < 0 or min(self.gamma2_grid) < 0:
            raise ValueError("delta_bar and gamma2 grid values must be >= 0")
        if self.window_width < 0:
            raise ValueError(f"window_width must be >= 0, got {self.window_width}")
        if self.backend not in BACKENDS:
            raise ValueError(f"Unknown backend {self.backend!r}, expected one of {BACKENDS}")
        if self.n_stations < 0 or self.n_vehicles < 1 or self.workers < 1:
            raise ValueError("n_stations must be >= 0, n_vehicles and workers >= 1")

    def cells(self) -> List[Tuple[int, int, float, float]]:
        """(seed, size, delta_bar, gamma2) in deterministic order."""
        return [(seed, size, float(d), float(g)) for seed in self.seeds for size in self.sizes
                for d in self.delta_bar_grid for g in self.gamma2_grid]

    def gen_config(self, delta_bar: float, gamma2: float) -> GenConfig:
        """
        Generator settings of one cell. Arrival times do not depend on the
        cell, so every cell of a seed and size shares coordinates, revenues
        and earliest times.
        """
        overrides: Dict[str, Any] = dict(
            n_vehicles=self.n_vehicles,
            delta_bar=delta_bar,
            gammas=(INCONVENIENCE_GAMMA[0], gamma2),
            base_window=self.window_width,
        )
        if self.xi is not None:
            overrides['xi'] = self.xi
        params = GenConfig.full_scale(**overrides) if self.full_scale else GenConfig(**overrides)
        horizon = params.xi * params.delta_tau
        room = max(horizon - max(self.delta_bar_grid) - self.window_width - 1.0, 0.0)
        params.t_latest = min(self.arrival_spread, room)
        return params

    def scenario(self, seed: int, size: int, delta_bar: float, gamma2: float) -> ScenarioSpec:
        n_customers = size - 2 - self.n_stations
        return generate_scenario(seed, n_customers, self.n_stations, self.gen_config(delta_bar, gamma2))


@dataclass
class RunRecord:
    """One solve of one model on one instance."""
    scenario_id: str
    seed: int
    size: int
    delta_bar: float
    gamma2: float
    mode: str
    status: str = ''
    objective: float = math.inf
    gap: float = math.inf
    iterations: int = 0
    node_count: int = 0
    wall_time: float = 0.0
    breakdown: Dict[str, float] = field(default_factory=dict)
    customers: List[Dict[str, Any]] = field(default_factory=list)
    convergence: List[Dict[str, Any]] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status != ERROR and math.isfinite(self.objective)

    @property
    def fee_saving(self) -> float:
        """Mean incentive payment over served customers, in percent of their list revenue."""
        shares = [100.0 * c['payment'] / c['revenue'] for c in self.customers
                  if c.get('served') and c.get('revenue', 0.0) > 0]
        return sum(shares) / len(shares) if shares else 0.0

    @property
    def cell(self) -> Tuple[int, int, float, float]:
        return self.seed, self.size, self.delta_bar, self.gamma2

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ('objective', 'gap'):
            if not math.isfinite(data[key]):
                data[key] = None
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunRecord':
        values = dict(data)
        for key in ('objective', 'gap'):
            values[key] = math.inf if values.get(key) is None else float(values[key])
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in values.items() if k in known})


def solve_with_backend(model: MilpModel, backend: str = MIP, time_limit: Optional[float] = None,
                       gap: float = DEFAULT_MIP_GAP, node_limit: Optional[int] = None, workers: int = 1,
                       solver_cmd: Optional[str] = None) -> Tuple[MipSolveResult, List[Dict[str, Any]]]:
    """Solve a model with one backend; Benders backends also return their iteration log."""
    if backend == MIP:
        return solve_mip(model, limits=MipLimits(time=time_limit, gap=gap, nodes=node_limit, workers=workers)), []
    if backend == EXTERNAL:
        return solve_external(model, solver_cmd=solver_cmd, time_limit=time_limit), []
    if backend in (GBD, SGBD):
        limits = BendersLimits(time=time_limit, gap=gap, workers=workers)
        result, state = run_benders(partition_model(model), mode=backend, limits=limits)
        return result, [asdict(r) for r in state.records]
    raise ValueError(f"Unknown backend {backend!r}, expected one of {BACKENDS}")


def _record(scenario: ScenarioSpec, cell: Tuple[int, int, float, float], mode: str, model: MilpModel,
            config: CampaignConfig, backend: str) -> RunRecord:
    seed, size, delta_bar, gamma2 = cell
    record = RunRecord(scenario_id=scenario.name, seed=seed, size=size, delta_bar=delta_bar,
                       gamma2=gamma2, mode=mode)
    result, history = solve_with_backend(model, backend, time_limit=config.time_limit, gap=config.gap,
                                         node_limit=config.node_limit, workers=config.workers,
                                         solver_cmd=config.solver_cmd)
    record.status = result.status
    record.gap = result.gap
    record.wall_time = result.wall_time
    record.convergence = history
    if backend in (GBD, SGBD):
        record.iterations = result.node_count
    else:
        record.node_count = result.node_count
    if result.has_solution:
        record.objective = result.objective
        record.breakdown = cost_breakdown(scenario, model, result.incumbent)
        record.customers = customer_outcomes(scenario, model, result.incumbent)
    return record


def _guarded(cell: Tuple[int, int, float, float], mode: str, scenario_id: str,
             solve: Callable[[], RunRecord]) -> RunRecord:
    """Run one solve; failures become error records so the campaign continues."""
    try:
        record = solve()
    except Exception as e:
        logger.warning("Run %s/%s failed: %s", scenario_id, mode, e)
        seed, size, delta_bar, gamma2 = cell
        return RunRecord(scenario_id=scenario_id, seed=seed, size=size, delta_bar=delta_bar, gamma2=gamma2,
                         mode=mode, status=ERROR, error=str(e))
    logger.info("Run %s/%s: %s objective %.6g in %.2fs", scenario_id, mode, record.status,
                record.objective, record.wall_time)
    return record


def _scenario_id(cell: Tuple[int, int, float, float]) -> str:
    seed, size, delta_bar, gamma2 = cell
    return f"s{seed}-n{size}-d{delta_bar:g}-g{gamma2:g}"


def _failed(cell: Tuple[int, int, float, float], modes, error: Exception) -> List[RunRecord]:
    seed, size, delta_bar, gamma2 = cell
    return [RunRecord(scenario_id=_scenario_id(cell), seed=seed, size=size, delta_bar=delta_bar, gamma2=gamma2,
                      mode=mode, status=ERROR, error=str(error)) for mode in modes]


def run_cell(config: CampaignConfig, cell: Tuple[int, int, float, float]) -> List[RunRecord]:
    """Baseline and incentive records of one campaign cell."""
    try:
        scenario = config.scenario(*cell)
    except Exception as e:
        logger.warning("Scenario for cell %s could not be generated: %s", cell, e)
        return _failed(cell, (BASELINE, INCENTIVE), e)

    baseline = _guarded(cell, BASELINE, scenario.name, lambda: _record(
        scenario, cell, BASELINE, build_baseline(scenario, config.window_width), config, config.backend))
    incentive = _guarded(cell, INCENTIVE, scenario.name, lambda: _record(
        scenario, cell, INCENTIVE, build_single_level(scenario), config, config.backend))

    if baseline.ok and incentive.ok and incentive.objective > baseline.objective + 1e-6:
        logger.warning("Incentive model worse than baseline on %s (%.6g > %.6g); check solver limits",
                       scenario.name, incentive.objective, baseline.objective)
    return [baseline, incentive]


def _run_cells(config: CampaignConfig, worker: Callable, tracker: Optional[ProgressTracker]) -> List[RunRecord]:
    cells = config.cells()
    total = len(cells)
    if tracker:
        tracker.update_progress('generating', message=f"Preparing {total} instances...")

    results: Dict[int, List[RunRecord]] = {}
    if config.workers > 1 and total > 1:
        # each cell solves single-threaded; records merge in cell order
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(worker, cell): position for position, cell in enumerate(cells)}
            for done, future in enumerate(futures, start=1):
                results[futures[future]] = future.result()
                if tracker:
                    tracker.update_solve_progress(done, total)
    else:
        for position, cell in enumerate(cells):
            results[position] = worker(cell)
            if tracker:
                tracker.update_solve_progress(position + 1, total, _scenario_id(cell))

    records = [record for position in range(total) for record in results[position]]
    if tracker:
        tracker.update_progress('aggregating')
    return records


def _single_threaded(config: CampaignConfig) -> CampaignConfig:
    if config.workers <= 1:
        return config
    values = asdict(config)
    values['workers'] = 1
    return CampaignConfig(**values)


def run_campaign(config: CampaignConfig, tracker: Optional[ProgressTracker] = None) -> List[RunRecord]:
    """Baseline and incentive records for every cell, ordered by (seed, size, delta_bar, gamma2)."""
    config.validate()
    inner = _single_threaded(config)
    return _run_cells(config, lambda cell: run_cell(inner, cell), tracker)


def compare_cell(config: CampaignConfig, cell: Tuple[int, int, float, float]) -> List[RunRecord]:
    """Incentive model of one instance solved with MIP, GBD and SGBD."""
    try:
        scenario = config.scenario(*cell)
        model = build_single_level(scenario)
    except Exception as e:
        logger.warning("Instance for cell %s could not be built: %s", cell, e)
        return _failed(cell, (MIP, GBD, SGBD), e)
    return [_guarded(cell, mode, scenario.name,
                     lambda mode=mode: _record(scenario, cell, mode, model, config, mode))
            for mode in (MIP, GBD, SGBD)]


def run_comparison(config: CampaignConfig, tracker: Optional[ProgressTracker] = None) -> List[RunRecord]:
    config.validate()
    inner = _single_threaded(config)
    return _run_cells(config, lambda cell: compare_cell(inner, cell), tracker)


def comparison_table(records: List[RunRecord]) -> pd.DataFrame:
    """One row per instance with objectives, iterations and times of each solver."""
    by_cell: Dict[Tuple, Dict[str, RunRecord]] = {}
    for record in records:
        if record.mode in (MIP, GBD, SGBD):
            by_cell.setdefault(record.cell, {})[record.mode] = record

    rows = []
    for cell, runs in by_cell.items():
        seed, size, delta_bar, gamma2 = cell
        row: Dict[str, Any] = {'seed': seed, 'size': size, 'delta_bar': delta_bar, 'gamma2': gamma2}
        for mode in (MIP, GBD, SGBD):
            run = runs.get(mode)
            row[f"{mode}_status"] = run.status if run else None
            row[f"{mode}_objective"] = run.objective if run else math.inf
            row[f"{mode}_time"] = run.wall_time if run else math.nan
            if mode != MIP:
                row[f"{mode}_iterations"] = run.iterations if run else 0
        objectives = [row[f"{m}_objective"] for m in (MIP, GBD, SGBD)]
        finite = all(math.isfinite(v) for v in objectives)
        row['objectives_agree'] = finite and max(objectives) - min(objectives) <= OBJECTIVE_TOL
        row['sgbd_le_gbd'] = row[f"{SGBD}_iterations"] <= row[f"{GBD}_iterations"]
        rows.append(row)
    return pd.DataFrame(rows)


def compare_solvers(config: CampaignConfig, tracker: Optional[ProgressTracker] = None) -> pd.DataFrame:
    """Per-instance MIP / GBD / SGBD comparison table."""
    table = comparison_table(run_comparison(config, tracker))
    failed = table[~table['sgbd_le_gbd']] if not table.empty else table
    if len(failed):
        logger.warning("SGBD needed more iterations than GBD on %d instance(s)", len(failed))
    return table
