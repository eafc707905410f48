#!/usr/bin/env python3
"""
Random scenario generation.

Coordinates are uniform in a square area (or drawn from an imported
coordinate pool), revenues come from a normal distribution truncated at
zero, stations are fast or slow chargers with synthetic time-of-use prices.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import truncnorm

from config import (
    AREA_KM, BATTERY_CAPACITY_KWH, CONSUMPTION_KWH_PER_KM, DESK_SLOT_HOURS, DESK_SLOTS,
    DESK_VEHICLE_USAGE_COST, FAST_CHARGE_KW, FAST_STATION_SHARE, INCONVENIENCE_CHI,
    INCONVENIENCE_GAMMA, INITIAL_SOC_SHARE, FULL_SLOT_HOURS, FULL_SLOTS, REVENUE_MEAN,
    REVENUE_STD, SLOW_CHARGE_KW, SPEED_KMH, VALUE_OF_TIME, VEHICLE_USAGE_COST,
)
from src.customer.inconvenience import InconvenienceModel
from src.scenario.scenario import (
    CustomerSpec, FleetSpec, Node, NodeKind, ScenarioSpec, StationSpec, TimeGrid,
    assemble_scenario,
)


@dataclass
class GenConfig:
    """Parameters for generated scenarios. Defaults are desk scale."""
    n_vehicles: int = 1
    area_km: float = AREA_KM
    xi: int = DESK_SLOTS
    delta_tau: float = DESK_SLOT_HOURS
    E_max: float = BATTERY_CAPACITY_KWH
    initial_soc: float = INITIAL_SOC_SHARE
    phi: float = CONSUMPTION_KWH_PER_KM
    speed: float = SPEED_KMH
    c_v: float = DESK_VEHICLE_USAGE_COST
    omega_T: float = VALUE_OF_TIME
    revenue_mean: float = REVENUE_MEAN
    revenue_std: float = REVENUE_STD
    gammas: Tuple[float, ...] = INCONVENIENCE_GAMMA
    chis: Tuple[float, ...] = INCONVENIENCE_CHI
    delta_bar: float = 1.0
    gamma_jitter: float = 0.0
    base_window: float = 0.0
    fast_share: float = FAST_STATION_SHARE
    fast_kw: float = FAST_CHARGE_KW
    slow_kw: float = SLOW_CHARGE_KW
    price_offpeak: float = 0.12
    price_peak: float = 0.30
    price_noise: float = 0.02
    dummy_count: int = 0
    t_latest: Optional[float] = None
    coordinates: Optional[List[Tuple[str, float, float]]] = field(default=None, repr=False)

    def validate(self):
        if self.n_vehicles < 1:
            raise ValueError(f"n_vehicles must be >= 1, got {self.n_vehicles}")
        if self.xi < 1 or self.delta_tau <= 0:
            raise ValueError(f"Invalid time grid: xi={self.xi}, delta_tau={self.delta_tau}")
        if not 0 <= self.initial_soc <= 1:
            raise ValueError(f"initial_soc must be in [0, 1], got {self.initial_soc}")
        if not 0 <= self.fast_share <= 1:
            raise ValueError(f"fast_share must be in [0, 1], got {self.fast_share}")
        if self.delta_bar < 0 or self.base_window < 0 or self.gamma_jitter < 0:
            raise ValueError("delta_bar, base_window and gamma_jitter must be >= 0")
        if self.area_km <= 0 or self.revenue_std <= 0:
            raise ValueError("area_km and revenue_std must be positive")
        if self.dummy_count < 0:
            raise ValueError(f"dummy_count must be >= 0, got {self.dummy_count}")
        if self.t_latest is not None and not 0 <= self.t_latest <= self.xi * self.delta_tau:
            raise ValueError(f"t_latest must lie within the horizon, got {self.t_latest}")

    @classmethod
    def full_scale(cls, **overrides) -> 'GenConfig':
        """Full 288 x 5 min time grid and the full vehicle usage cost."""
        settings = {"xi": FULL_SLOTS, "delta_tau": FULL_SLOT_HOURS, "c_v": VEHICLE_USAGE_COST}
        settings.update(overrides)
        return cls(**settings)


def revenue_distribution(mean: float, std: float):
    """Normal(mean, std) truncated to [0, inf)."""
    return truncnorm(a=(0.0 - mean) / std, b=np.inf, loc=mean, scale=std)


def time_of_use_prices(rng: np.random.Generator, params: GenConfig) -> Tuple[float, ...]:
    """Off-peak at night, peak between 08:00 and 20:00, plus seeded noise."""
    hours = (np.arange(params.xi) + 0.5) * params.delta_tau
    base = np.where((hours % 24 >= 8) & (hours % 24 < 20), params.price_peak, params.price_offpeak)
    noise = rng.uniform(-params.price_noise, params.price_noise, size=params.xi)
    return tuple(float(p) for p in np.round(np.maximum(base + noise, 0.0), 4))


def generate_scenario(seed: int, n_customers: int, n_stations: int,
                      params: Optional[GenConfig] = None) -> ScenarioSpec:
    """Deterministic random scenario for a seed."""
    params = params or GenConfig()
    if n_customers < 0 or n_stations < 0:
        raise ValueError(f"Counts must be >= 0, got {n_customers} customers, {n_stations} stations")
    params.validate()
    rng = np.random.default_rng(seed)

    if params.coordinates is not None:
        pool = list(params.coordinates)
        needed = 1 + n_customers + n_stations
        if len(pool) < needed:
            raise ValueError(f"Coordinate pool has {len(pool)} points, {needed} needed")
        picks = rng.choice(len(pool), size=needed, replace=False)
        points = [(pool[i][1], pool[i][2]) for i in picks]
    else:
        xy = rng.uniform(0.0, params.area_km, size=(1 + n_customers + n_stations, 2))
        points = [(float(round(x, 3)), float(round(y, 3))) for x, y in xy]

    depot = points[0]
    nodes = [Node('d0', NodeKind.DEPOT_START, depot)]
    customer_ids = [f"c{j + 1}" for j in range(n_customers)]
    station_ids = [f"s{i + 1}" for i in range(n_stations)]
    nodes += [Node(cid, NodeKind.CUSTOMER, points[1 + j]) for j, cid in enumerate(customer_ids)]
    nodes += [Node(sid, NodeKind.STATION, points[1 + n_customers + i]) for i, sid in enumerate(station_ids)]
    nodes.append(Node('dn', NodeKind.DEPOT_END, depot))

    revenues = revenue_distribution(params.revenue_mean, params.revenue_std).rvs(
        size=n_customers, random_state=rng) if n_customers else np.zeros(0)

    horizon = params.xi * params.delta_tau
    latest_start = params.t_latest
    if latest_start is None:
        latest_start = max(horizon - params.delta_bar - params.base_window - 1.0, 0.0)
    earliest = rng.uniform(0.0, latest_start, size=n_customers) if n_customers else np.zeros(0)

    customers = []
    for j, cid in enumerate(customer_ids):
        gammas = list(params.gammas)
        if params.gamma_jitter > 0 and len(gammas) > 1:
            gammas[-1] = gammas[-1] * (1.0 + rng.uniform(-params.gamma_jitter, params.gamma_jitter))
        model = InconvenienceModel(gammas=tuple(gammas), chis=tuple(params.chis), delta_bar=params.delta_bar)
        customers.append(CustomerSpec(
            id=cid,
            t_L=float(round(earliest[j], 3)),
            revenue=float(round(revenues[j], 4)),
            inconvenience=model,
            base_window=params.base_window,
        ))

    stations = []
    for sid in station_ids:
        rate = params.fast_kw if rng.uniform() < params.fast_share else params.slow_kw
        stations.append(StationSpec(id=sid, g=1.0 / rate, prices=time_of_use_prices(rng, params),
                                    dummy_count=params.dummy_count))

    fleet = FleetSpec(K=params.n_vehicles, E_max=params.E_max, E_0=params.E_max * params.initial_soc,
                      phi=params.phi, speed=params.speed, c_v=params.c_v, omega_T=params.omega_T)
    grid = TimeGrid(delta_tau=params.delta_tau, xi=params.xi)
    return assemble_scenario(f"gen-s{seed}-c{n_customers}-st{n_stations}", nodes, customers, stations, fleet, grid)


def scenario_from_coordinates(coords: Sequence[Tuple[str, float, float]], seed: int, n_customers: int,
                              n_stations: int, params: Optional[GenConfig] = None) -> ScenarioSpec:
    """Scenario whose node locations are sampled from an imported coordinate list."""
    params = params or GenConfig()
    pooled = GenConfig(**{**params.__dict__, 'coordinates': list(coords)})
    return generate_scenario(seed, n_customers, n_stations, pooled)
