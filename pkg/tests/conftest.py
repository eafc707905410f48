#!/usr/bin/env python3
"""
Shared fixtures: small hand-checkable scenarios.

The "conflict" scenario has two customers on a line east of the depot,
both wanting service at t = 1.0 with no base window. One vehicle cannot
reach both at the same instant, so serving both needs one window to widen
by the 0.1 h leg between them.
"""

import os
import sys

import pytest

# Add the repository root to the Python path
sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))

from src.customer.inconvenience import InconvenienceModel  # noqa: E402
from src.scenario.scenario import (CustomerSpec, FleetSpec, Node, NodeKind, StationSpec,  # noqa: E402
                                   TimeGrid, assemble_scenario)

GAMMAS = (0.0, 1.5)
CHIS = (0.01, -0.01)


def make_scenario(customers, stations=(), name='test', K=1, E_0=22.5, xi=12, delta_tau=0.5, c_v=10.0,
                  dummy_count=0, price=0.1):
    """
    customers: (id, x, y, t_L, revenue, base_window, delta_bar) tuples.
    stations: (id, x, y) tuples with rate 1/g = 22 kW and a flat price.
    """
    nodes = [Node('d0', NodeKind.DEPOT_START, (0.0, 0.0))]
    specs = []
    for cid, x, y, t_L, revenue, base_window, delta_bar in customers:
        nodes.append(Node(cid, NodeKind.CUSTOMER, (float(x), float(y))))
        specs.append(CustomerSpec(id=cid, t_L=t_L, revenue=revenue, base_window=base_window,
                                  inconvenience=InconvenienceModel(GAMMAS, CHIS, delta_bar)))
    station_specs = []
    for sid, x, y in stations:
        nodes.append(Node(sid, NodeKind.STATION, (float(x), float(y))))
        station_specs.append(StationSpec(id=sid, g=1.0 / 22.0, prices=(price,) * xi, dummy_count=dummy_count))
    nodes.append(Node('dn', NodeKind.DEPOT_END, (0.0, 0.0)))
    fleet = FleetSpec(K=K, E_max=90.0, E_0=E_0, phi=0.24, speed=60.0, c_v=c_v, omega_T=10.0)
    return assemble_scenario(name, nodes, specs, station_specs, fleet, TimeGrid(delta_tau=delta_tau, xi=xi))


CONFLICT_CUSTOMERS = [
    ('c1', 6.0, 0.0, 1.0, 20.0, 0.0, 1.0),
    ('c2', 12.0, 0.0, 1.0, 15.0, 0.0, 1.0),
]


@pytest.fixture
def conflict_scenario():
    """Two conflicting customers plus one unused station (45 binaries in the incentive model)."""
    return make_scenario(CONFLICT_CUSTOMERS, stations=[('s1', 0.0, 6.0)], name='conflict')


@pytest.fixture
def conflict_no_station():
    return make_scenario(CONFLICT_CUSTOMERS, name='conflict-ns')


@pytest.fixture
def single_customer():
    """One customer and no stations: 7 binaries in the incentive model."""
    return make_scenario([CONFLICT_CUSTOMERS[0]], name='single')


@pytest.fixture
def scenario_factory():
    return make_scenario


@pytest.fixture
def stranded_customer():
    """One customer 100 km out: 24 kWh each way against 22.5 kWh on board and no station."""
    return make_scenario([('far', 100.0, 0.0, 2.0, 20.0, 0.0, 1.0)], name='stranded')
