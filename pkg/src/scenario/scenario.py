#!/usr/bin/env python3
"""
Scenario data for the EV routing and charging problem.

A scenario is the full solver input: nodes (depots, customers, charging
stations and their dummy copies), travel matrices, fleet, customers,
stations with per-slot prices, the time grid and per-family Big-M values.
Scenarios are stored as JSON (see docs/SCENARIO_FORMAT.md).
"""

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from src.customer.inconvenience import InconvenienceModel

SCENARIO_FORMAT_VERSION = 1
_ID_PATTERN = re.compile(r'^[A-Za-z0-9]+$')


class ScenarioParseError(ValueError):
    """Raised when a scenario file cannot be read as the documented format."""


class ScenarioValidationError(ValueError):
    """Raised when scenario data violates an invariant; names the field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NodeKind(str, Enum):
    DEPOT_START = 'depot_start'
    DEPOT_END = 'depot_end'
    CUSTOMER = 'customer'
    STATION = 'station'
    STATION_DUMMY = 'station_dummy'


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    coord: Tuple[float, float]
    parent_station: Optional[str] = None


@dataclass(frozen=True, eq=False)
class TravelMatrices:
    """Distance (km), travel time (h) and energy (kWh) between nodes."""
    d: np.ndarray
    T: np.ndarray
    e: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, TravelMatrices):
            return NotImplemented
        return (np.array_equal(self.d, other.d) and np.array_equal(self.T, other.T)
                and np.array_equal(self.e, other.e))

    __hash__ = None


@dataclass(frozen=True)
class CustomerSpec:
    id: str
    t_L: float
    revenue: float
    inconvenience: InconvenienceModel
    base_window: float = 0.0

    @property
    def delta_bar(self) -> float:
        return self.inconvenience.delta_bar

    @property
    def D(self) -> float:
        """Arc cost contribution of serving this customer (negative revenue)."""
        return -self.revenue


@dataclass(frozen=True)
class StationSpec:
    id: str
    g: float
    prices: Tuple[float, ...]
    dummy_count: int = 0


@dataclass(frozen=True)
class FleetSpec:
    K: int
    E_max: float
    E_0: float
    phi: float
    speed: float
    c_v: float
    omega_T: float


@dataclass(frozen=True)
class TimeGrid:
    delta_tau: float
    xi: int

    @property
    def horizon(self) -> float:
        return self.delta_tau * self.xi


@dataclass(frozen=True)
class BigMPolicy:
    """Big-M constants per constraint family."""
    time: float
    energy: float
    dual: float


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    nodes: Tuple[Node, ...]
    travel: TravelMatrices
    customers: Tuple[CustomerSpec, ...]
    stations: Tuple[StationSpec, ...]
    fleet: FleetSpec
    grid: TimeGrid
    big_m_policy: BigMPolicy
    _index: Dict[str, int] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, '_index', {node.id: i for i, node in enumerate(self.nodes)})

    # Node lookups
    def index_of(self, node_id: str) -> int:
        return self._index[node_id]

    @property
    def depot_start(self) -> int:
        return 0

    @property
    def depot_end(self) -> int:
        return len(self.nodes) - 1

    @property
    def customer_nodes(self) -> List[int]:
        return [i for i, n in enumerate(self.nodes) if n.kind == NodeKind.CUSTOMER]

    @property
    def station_nodes(self) -> List[int]:
        """Charging nodes: stations and their dummies."""
        return [i for i, n in enumerate(self.nodes)
                if n.kind in (NodeKind.STATION, NodeKind.STATION_DUMMY)]

    def customer_at(self, node: int) -> CustomerSpec:
        node_id = self.nodes[node].id
        for customer in self.customers:
            if customer.id == node_id:
                return customer
        raise KeyError(f"Node {node_id} is not a customer")

    def station_at(self, node: int) -> StationSpec:
        """Station spec for a station node or for a dummy (its parent)."""
        n = self.nodes[node]
        station_id = n.parent_station if n.kind == NodeKind.STATION_DUMMY else n.id
        for station in self.stations:
            if station.id == station_id:
                return station
        raise KeyError(f"Node {n.id} is not a charging node")

    def charging_rate_kw(self, node: int) -> float:
        return 1.0 / self.station_at(node).g


def price_at(station: StationSpec, tau: int) -> float:
    """Price ($/kWh) of slot tau, 1-based."""
    if not 1 <= tau <= len(station.prices):
        raise IndexError(f"Slot {tau} out of range 1..{len(station.prices)} for station {station.id}")
    return station.prices[tau - 1]


def build_travel_matrices(nodes: Sequence[Node], fleet: FleetSpec) -> TravelMatrices:
    """Euclidean distances with time and energy derived from speed and consumption."""
    coords = np.array([node.coord for node in nodes], dtype=float).reshape(len(nodes), 2)
    if not np.all(np.isfinite(coords)):
        raise ScenarioValidationError('coord', "coordinates must be finite")
    d = cdist(coords, coords) if len(nodes) else np.zeros((0, 0))
    return TravelMatrices(d=d, T=d / fleet.speed, e=fleet.phi * d)


def compute_big_m(travel: TravelMatrices, stations: Sequence[StationSpec],
                  customers: Sequence[CustomerSpec], fleet: FleetSpec, grid: TimeGrid) -> BigMPolicy:
    """
    Per-family Big-M values.

    time: horizon plus the longest leg and the longest full charge, so a
    relaxed propagation row never cuts a feasible schedule.
    energy: capacity plus the largest single charge (at most E_max).
    dual: 2 * max slope over all customers.
    """
    longest_leg = float(travel.T.max()) if travel.T.size else 0.0
    full_charge = max((s.g * fleet.E_max for s in stations), default=0.0)
    max_gamma = max((max(c.inconvenience.gammas) for c in customers), default=0.0)
    return BigMPolicy(
        time=grid.horizon + longest_leg + full_charge,
        energy=2.0 * fleet.E_max,
        dual=2.0 * max_gamma,
    )


def expand_nodes(base_nodes: Sequence[Node], stations: Sequence[StationSpec]) -> Tuple[Node, ...]:
    """Canonical node order with station dummies placed after their parent."""
    by_kind = {kind: [n for n in base_nodes if n.kind == kind] for kind in NodeKind}
    dummies = {s.id: s.dummy_count for s in stations}

    ordered = list(by_kind[NodeKind.DEPOT_START]) + list(by_kind[NodeKind.CUSTOMER])
    for station in by_kind[NodeKind.STATION]:
        ordered.append(station)
        for m in range(1, dummies.get(station.id, 0) + 1):
            ordered.append(Node(id=f"{station.id}d{m}", kind=NodeKind.STATION_DUMMY,
                                coord=station.coord, parent_station=station.id))
    ordered += list(by_kind[NodeKind.DEPOT_END])
    return tuple(ordered)


def assemble_scenario(name: str, base_nodes: Sequence[Node], customers: Sequence[CustomerSpec],
                      stations: Sequence[StationSpec], fleet: FleetSpec, grid: TimeGrid) -> ScenarioSpec:
    """Expand dummies, derive travel and Big-M data, and validate."""
    _validate_inputs(base_nodes, customers, stations, fleet, grid)
    nodes = expand_nodes(base_nodes, stations)
    travel = build_travel_matrices(nodes, fleet)
    spec = ScenarioSpec(
        name=name,
        nodes=nodes,
        travel=travel,
        customers=tuple(customers),
        stations=tuple(stations),
        fleet=fleet,
        grid=grid,
        big_m_policy=compute_big_m(travel, stations, customers, fleet, grid),
    )
    validate_scenario(spec)
    return spec


def _validate_inputs(base_nodes, customers, stations, fleet: FleetSpec, grid: TimeGrid):
    if grid.xi < 1:
        raise ScenarioValidationError('xi', f"slot count must be >= 1, got {grid.xi}")
    if not grid.delta_tau > 0:
        raise ScenarioValidationError('delta_tau', f"slot length must be positive, got {grid.delta_tau}")

    if fleet.K < 1:
        raise ScenarioValidationError('K', f"fleet needs at least one vehicle, got {fleet.K}")
    for name in ('E_max', 'phi', 'speed', 'c_v', 'omega_T'):
        value = getattr(fleet, name)
        if not (math.isfinite(value) and value > 0):
            raise ScenarioValidationError(name, f"must be positive, got {value}")
    if not 0 <= fleet.E_0 <= fleet.E_max:
        raise ScenarioValidationError('E_0', f"initial energy {fleet.E_0} outside [0, {fleet.E_max}]")

    ids = [n.id for n in base_nodes]
    if len(set(ids)) != len(ids):
        raise ScenarioValidationError('nodes', "node ids must be unique")
    for n in base_nodes:
        if not _ID_PATTERN.match(n.id):
            raise ScenarioValidationError('id', f"node id {n.id!r} must be alphanumeric")
        if n.kind == NodeKind.STATION_DUMMY:
            raise ScenarioValidationError('nodes', "dummy nodes are derived from dummy_count, not listed")
    for kind in (NodeKind.DEPOT_START, NodeKind.DEPOT_END):
        count = sum(1 for n in base_nodes if n.kind == kind)
        if count != 1:
            raise ScenarioValidationError('nodes', f"expected exactly one {kind.value}, found {count}")

    customer_ids = {n.id for n in base_nodes if n.kind == NodeKind.CUSTOMER}
    station_ids = {n.id for n in base_nodes if n.kind == NodeKind.STATION}
    if {c.id for c in customers} != customer_ids or len(customers) != len(customer_ids):
        raise ScenarioValidationError('customers', "customer specs must match customer nodes one to one")
    if {s.id for s in stations} != station_ids or len(stations) != len(station_ids):
        raise ScenarioValidationError('stations', "station specs must match station nodes one to one")

    for c in customers:
        if not 0 <= c.t_L <= grid.horizon:
            raise ScenarioValidationError('t_L', f"customer {c.id} earliest time {c.t_L} outside [0, {grid.horizon}]")
        if c.revenue < 0:
            raise ScenarioValidationError('revenue', f"customer {c.id} revenue must be >= 0")
        if c.base_window < 0:
            raise ScenarioValidationError('base_window', f"customer {c.id} base window must be >= 0")

    for s in stations:
        if not s.g > 0:
            raise ScenarioValidationError('g', f"station {s.id} charging duration must be positive")
        if len(s.prices) != grid.xi:
            raise ScenarioValidationError('prices', f"station {s.id} has {len(s.prices)} prices for {grid.xi} slots")
        if any(p < 0 or not math.isfinite(p) for p in s.prices):
            raise ScenarioValidationError('prices', f"station {s.id} prices must be finite and >= 0")
        if s.dummy_count < 0:
            raise ScenarioValidationError('dummy_count', f"station {s.id} dummy count must be >= 0")


def validate_scenario(spec: ScenarioSpec):
    """Check cross-references and matrix consistency of an assembled scenario."""
    n = len(spec.nodes)
    if spec.nodes[0].kind != NodeKind.DEPOT_START or spec.nodes[-1].kind != NodeKind.DEPOT_END:
        raise ScenarioValidationError('nodes', "node order must start and end at the depots")
    for matrix_name in ('d', 'T', 'e'):
        matrix = getattr(spec.travel, matrix_name)
        if matrix.shape != (n, n):
            raise ScenarioValidationError(matrix_name, f"shape {matrix.shape} does not match {n} nodes")
        if np.any(matrix < 0):
            raise ScenarioValidationError(matrix_name, "entries must be >= 0")
    station_ids = {s.id for s in spec.stations}
    for node in spec.nodes:
        if node.kind == NodeKind.STATION_DUMMY:
            if node.parent_station not in station_ids:
                raise ScenarioValidationError('parent_station', f"dummy {node.id} has unknown parent")
            parent = spec.index_of(node.parent_station)
            if spec.travel.d[parent, spec.index_of(node.id)] != 0.0:
                raise ScenarioValidationError('coord', f"dummy {node.id} must coincide with its parent")


# Serialization

def scenario_to_dict(spec: ScenarioSpec) -> Dict[str, Any]:
    """Documented JSON layout; dummies and derived data are not written."""
    base_nodes = [n for n in spec.nodes if n.kind != NodeKind.STATION_DUMMY]
    return {
        'format_version': SCENARIO_FORMAT_VERSION,
        'name': spec.name,
        'grid': {'delta_tau': spec.grid.delta_tau, 'xi': spec.grid.xi},
        'fleet': {
            'K': spec.fleet.K, 'E_max': spec.fleet.E_max, 'E_0': spec.fleet.E_0,
            'phi': spec.fleet.phi, 'speed': spec.fleet.speed, 'c_v': spec.fleet.c_v,
            'omega_T': spec.fleet.omega_T,
        },
        'nodes': [{'id': n.id, 'kind': n.kind.value, 'x': n.coord[0], 'y': n.coord[1]} for n in base_nodes],
        'customers': [
            {
                'id': c.id, 't_L': c.t_L, 'revenue': c.revenue, 'base_window': c.base_window,
                'delta_bar': c.delta_bar,
                'inconvenience': {'gamma': list(c.inconvenience.gammas), 'chi': list(c.inconvenience.chis)},
            }
            for c in spec.customers
        ],
        'stations': [
            {'id': s.id, 'g': s.g, 'prices': list(s.prices), 'dummy_count': s.dummy_count}
            for s in spec.stations
        ],
    }


def scenario_from_dict(data: Dict[str, Any]) -> ScenarioSpec:
    try:
        grid = TimeGrid(delta_tau=float(data['grid']['delta_tau']), xi=int(data['grid']['xi']))
        f = data['fleet']
        fleet = FleetSpec(K=int(f['K']), E_max=float(f['E_max']), E_0=float(f['E_0']), phi=float(f['phi']),
                          speed=float(f['speed']), c_v=float(f['c_v']), omega_T=float(f['omega_T']))
        nodes = [Node(id=str(n['id']), kind=NodeKind(n['kind']), coord=(float(n['x']), float(n['y'])))
                 for n in data['nodes']]
        stations = [StationSpec(id=str(s['id']), g=float(s['g']), prices=tuple(float(p) for p in s['prices']),
                                dummy_count=int(s.get('dummy_count', 0)))
                    for s in data['stations']]
        raw_customers = data['customers']
        name = str(data.get('name', 'scenario'))
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioParseError(f"Malformed scenario data: {e!r}") from e

    customers = []
    for c in raw_customers:
        try:
            model = InconvenienceModel(gammas=tuple(c['inconvenience']['gamma']),
                                       chis=tuple(c['inconvenience']['chi']),
                                       delta_bar=float(c['delta_bar']))
        except KeyError as e:
            raise ScenarioParseError(f"Malformed customer entry: {e!r}") from e
        except ValueError as e:
            raise ScenarioValidationError('inconvenience', str(e)) from e
        customers.append(CustomerSpec(id=str(c['id']), t_L=float(c['t_L']), revenue=float(c['revenue']),
                                      inconvenience=model, base_window=float(c.get('base_window', 0.0))))

    return assemble_scenario(name, nodes, customers, stations, fleet, grid)


def load_scenario(path: str) -> ScenarioSpec:
    """Read and validate a scenario file."""
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ScenarioParseError(f"{path} must contain a JSON object")
    return scenario_from_dict(data)


def save_scenario(spec: ScenarioSpec, path: str):
    with open(path, 'w') as f:
        json.dump(scenario_to_dict(spec), f, indent=2)


def with_stations(spec: ScenarioSpec, stations: Sequence[StationSpec]) -> ScenarioSpec:
    """Copy of a scenario with replaced station specs, re-validated."""
    base_nodes = [n for n in spec.nodes if n.kind != NodeKind.STATION_DUMMY]
    return assemble_scenario(spec.name, base_nodes, spec.customers, stations, spec.fleet, spec.grid)


def with_customers(spec: ScenarioSpec, customers: Sequence[CustomerSpec]) -> ScenarioSpec:
    base_nodes = [n for n in spec.nodes if n.kind != NodeKind.STATION_DUMMY]
    return assemble_scenario(spec.name, base_nodes, customers, spec.stations, spec.fleet, spec.grid)


def fingerprint(spec: ScenarioSpec) -> str:
    """Short stable digest of the scenario content."""
    payload = json.dumps(scenario_to_dict(spec), sort_keys=True).encode()
    return hashlib.sha1(payload).hexdigest()[:12]
