#!/usr/bin/env python3
"""
Tests for scenario assembly, validation, serialization, generation and importers.
"""

import json

import numpy as np
import pytest

from config import REVENUE_MEAN, REVENUE_STD
from src.core.model_builder import build_baseline, route_of
from src.core.validation import validate_solution
from src.customer.inconvenience import InconvenienceModel
from src.scenario.generator import (GenConfig, generate_scenario, revenue_distribution,
                                    scenario_from_coordinates)
from src.solvers.branch_and_bound import OPTIMAL, solve_mip
from src.scenario.importers import apply_prices, import_coordinates, load_price_csv
from src.scenario.scenario import (CustomerSpec, NodeKind, ScenarioParseError, ScenarioValidationError,
                                   StationSpec, fingerprint, load_scenario, price_at, save_scenario,
                                   scenario_from_dict, scenario_to_dict, with_customers, with_stations)


def test_travel_matrices_follow_speed_and_consumption(conflict_scenario):
    s = conflict_scenario
    c1, c2 = s.index_of('c1'), s.index_of('c2')
    assert s.travel.d[s.depot_start, c1] == pytest.approx(6.0)
    assert s.travel.T[c1, c2] == pytest.approx(0.1)
    assert s.travel.e[s.depot_start, c2] == pytest.approx(0.24 * 12.0)
    assert np.allclose(s.travel.d, s.travel.d.T)


def test_node_order_and_lookups(conflict_scenario):
    s = conflict_scenario
    assert [n.id for n in s.nodes] == ['d0', 'c1', 'c2', 's1', 'dn']
    assert s.customer_nodes == [1, 2]
    assert s.station_nodes == [3]
    assert s.customer_at(2).id == 'c2'
    assert s.charging_rate_kw(3) == pytest.approx(22.0)
    with pytest.raises(KeyError):
        s.index_of('nope')


def test_big_m_policy(conflict_scenario):
    policy = conflict_scenario.big_m_policy
    longest = conflict_scenario.travel.T.max()
    assert policy.time == pytest.approx(6.0 + longest + 90.0 / 22.0)
    assert policy.energy == pytest.approx(180.0)
    assert policy.dual == pytest.approx(3.0)


def test_dummy_expansion_places_copies_after_parent(scenario_factory):
    s = scenario_factory([('c1', 6.0, 0.0, 1.0, 20.0, 0.0, 1.0)], stations=[('s1', 0.0, 6.0)], dummy_count=2)
    assert [n.id for n in s.nodes] == ['d0', 'c1', 's1', 's1d1', 's1d2', 'dn']
    dummy = s.nodes[s.index_of('s1d2')]
    assert dummy.kind == NodeKind.STATION_DUMMY
    assert dummy.parent_station == 's1'
    assert s.station_nodes == [2, 3, 4]
    assert s.station_at(4).id == 's1'
    assert s.travel.d[2, 4] == 0.0


def test_price_at_is_one_based(conflict_scenario):
    station = conflict_scenario.stations[0]
    assert price_at(station, 1) == pytest.approx(0.1)
    assert price_at(station, 12) == pytest.approx(0.1)
    with pytest.raises(IndexError):
        price_at(station, 0)
    with pytest.raises(IndexError):
        price_at(station, 13)


@pytest.mark.parametrize("customer, field_name", [
    (('c1', 6.0, 0.0, 7.0, 20.0, 0.0, 1.0), 't_L'),
    (('c1', 6.0, 0.0, 1.0, -1.0, 0.0, 1.0), 'revenue'),
    (('c1', 6.0, 0.0, 1.0, 20.0, -0.5, 1.0), 'base_window'),
    (('c-1', 6.0, 0.0, 1.0, 20.0, 0.0, 1.0), 'id'),
])
def test_invalid_customer_names_field(scenario_factory, customer, field_name):
    with pytest.raises(ScenarioValidationError) as info:
        scenario_factory([customer])
    assert info.value.field == field_name


def test_invalid_fleet_and_grid(scenario_factory):
    customers = [('c1', 6.0, 0.0, 1.0, 20.0, 0.0, 1.0)]
    with pytest.raises(ScenarioValidationError) as info:
        scenario_factory(customers, K=0)
    assert info.value.field == 'K'
    with pytest.raises(ScenarioValidationError) as info:
        scenario_factory(customers, E_0=100.0)
    assert info.value.field == 'E_0'
    with pytest.raises(ScenarioValidationError) as info:
        scenario_factory(customers, xi=0)
    assert info.value.field == 'xi'


def test_station_price_length_must_match_grid(conflict_scenario):
    bad = [StationSpec(id='s1', g=1.0 / 22.0, prices=(0.1,) * 5)]
    with pytest.raises(ScenarioValidationError) as info:
        with_stations(conflict_scenario, bad)
    assert info.value.field == 'prices'


def test_inconvenience_model_rejects_nonconvex():
    with pytest.raises(ValueError):
        InconvenienceModel(gammas=(1.5, 0.0), chis=(0.0, 0.0), delta_bar=1.0)
    with pytest.raises(ValueError):
        InconvenienceModel(gammas=(-1.0,), chis=(0.0,), delta_bar=1.0)
    with pytest.raises(ValueError):
        InconvenienceModel(gammas=(0.0, 1.0), chis=(0.0,), delta_bar=1.0)


def test_save_and_load_reproduce_scenario(tmp_path, scenario_factory):
    s = scenario_factory([('c1', 6.0, 0.0, 1.0, 20.0, 0.25, 1.0)], stations=[('s1', 0.0, 6.0)], dummy_count=1)
    path = tmp_path / 'scenario.json'
    save_scenario(s, str(path))
    loaded = load_scenario(str(path))
    assert loaded == s
    assert fingerprint(loaded) == fingerprint(s)

    data = json.loads(path.read_text())
    assert data['format_version'] == 1
    assert all(n['kind'] != 'station_dummy' for n in data['nodes'])
    assert data['stations'][0]['dummy_count'] == 1


def test_malformed_files_raise_parse_error(tmp_path, conflict_scenario):
    path = tmp_path / 'broken.json'
    path.write_text('{"grid": ')
    with pytest.raises(ScenarioParseError):
        load_scenario(str(path))

    data = scenario_to_dict(conflict_scenario)
    del data['fleet']
    with pytest.raises(ScenarioParseError):
        scenario_from_dict(data)


def test_with_customers_revalidates(conflict_scenario):
    changed = [CustomerSpec(id=c.id, t_L=c.t_L, revenue=c.revenue + 1.0, inconvenience=c.inconvenience)
               for c in conflict_scenario.customers]
    updated = with_customers(conflict_scenario, changed)
    assert updated.customers[0].revenue == pytest.approx(21.0)
    assert updated.customers[0].D == pytest.approx(-21.0)
    assert fingerprint(updated) != fingerprint(conflict_scenario)


def test_generator_is_deterministic_per_seed():
    a = generate_scenario(3, 4, 2)
    b = generate_scenario(3, 4, 2)
    c = generate_scenario(4, 4, 2)
    assert a == b
    assert fingerprint(a) == fingerprint(b)
    assert fingerprint(a) != fingerprint(c)
    assert len(a.customers) == 4 and len(a.stations) == 2
    assert all(len(s.prices) == a.grid.xi for s in a.stations)
    assert all(c.revenue >= 0 for c in a.customers)


def test_generator_arrivals_do_not_depend_on_delta_bar():
    narrow = generate_scenario(7, 3, 1, GenConfig(delta_bar=0.5, t_latest=4.0))
    wide = generate_scenario(7, 3, 1, GenConfig(delta_bar=1.5, t_latest=4.0))
    assert [c.t_L for c in narrow.customers] == [c.t_L for c in wide.customers]
    assert [c.revenue for c in narrow.customers] == [c.revenue for c in wide.customers]
    assert all(c.t_L <= 4.0 for c in narrow.customers)
    assert wide.customers[0].delta_bar == 1.5


def test_full_scale_grid():
    params = GenConfig.full_scale(delta_bar=0.5)
    assert params.xi == 288
    assert params.xi * params.delta_tau == pytest.approx(24.0)
    assert params.c_v == pytest.approx(99.0)
    assert params.delta_bar == 0.5


def test_generator_rejects_bad_settings():
    with pytest.raises(ValueError):
        generate_scenario(1, -1, 0)
    with pytest.raises(ValueError):
        generate_scenario(1, 2, 0, GenConfig(t_latest=100.0))


def test_import_coordinates(tmp_path):
    path = tmp_path / 'coords.txt'
    path.write_text("id x y\n# depot first\nD0 1.0 2.0\nA-1, 3.5, 4.5\n\nB2 5 6\n")
    coords = import_coordinates(str(path))
    assert coords == [('D0', 1.0, 2.0), ('A1', 3.5, 4.5), ('B2', 5.0, 6.0)]

    bad = tmp_path / 'bad.txt'
    bad.write_text("D0 1.0 2.0\nA1 x 3\n")
    with pytest.raises(ValueError):
        import_coordinates(str(bad))


def test_scenario_from_coordinates_uses_pool():
    pool = [(f"p{i}", float(i), float(2 * i)) for i in range(10)]
    s = scenario_from_coordinates(pool, seed=2, n_customers=3, n_stations=1)
    used = {n.coord for n in s.nodes}
    assert used <= {(x, y) for _, x, y in pool}
    with pytest.raises(ValueError):
        scenario_from_coordinates(pool[:3], seed=2, n_customers=3, n_stations=1)


def test_price_csv_import(tmp_path, conflict_scenario):
    path = tmp_path / 'prices.csv'
    rows = ['s1,other'] + [f"{0.05 * (k + 1):.2f},9" for k in range(12)]
    path.write_text('\n'.join(rows) + '\n')
    prices = load_price_csv(str(path), ['s1'], 12)
    assert prices['s1'][0] == pytest.approx(0.05)
    assert prices['s1'][-1] == pytest.approx(0.6)

    updated = apply_prices(conflict_scenario, prices)
    assert price_at(updated.stations[0], 3) == pytest.approx(0.15)

    with pytest.raises(ScenarioValidationError):
        load_price_csv(str(path), ['s2'], 12)
    with pytest.raises(ScenarioValidationError):
        load_price_csv(str(path), ['s1'], 24)


@pytest.mark.parametrize("seed", range(5))
def test_generated_travel_obeys_triangle_inequality(seed):
    s = generate_scenario(seed, 5, 2, GenConfig(dummy_count=1))
    for matrix in (s.travel.d, s.travel.T, s.travel.e):
        # matrix[i, j] <= matrix[i, k] + matrix[k, j] on axes (i, k, j)
        through = matrix[:, :, None] + matrix[None, :, :]
        assert np.all(matrix[:, None, :] <= through + 1e-9)
        assert np.all(np.diag(matrix) == 0.0)


def test_generated_revenues_follow_truncated_normal():
    s = generate_scenario(11, 400, 0)
    revenues = np.array([c.revenue for c in s.customers])
    assert revenues.min() >= 0.0
    expected = revenue_distribution(REVENUE_MEAN, REVENUE_STD).mean()
    assert expected > REVENUE_MEAN
    assert revenues.mean() == pytest.approx(expected, abs=4 * REVENUE_STD / np.sqrt(len(revenues)))
    assert revenues.mean() == pytest.approx(REVENUE_MEAN, abs=1.0)


@pytest.mark.parametrize("dummies", [0, 1, 2])
def test_route_that_must_charge_is_feasible_with_dummies(scenario_factory, dummies):
    # 1 kWh on board cannot reach c1 directly; a 1 km detour to s1 must charge 1.88 kWh
    s = scenario_factory([('c1', 6.0, 0.0, 1.0, 20.0, 0.0, 1.0)], stations=[('s1', 1.0, 0.0)], E_0=1.0,
                         dummy_count=dummies)
    assert len(s.station_nodes) == 1 + dummies
    model = build_baseline(s, 0.0)
    result = solve_mip(model)
    assert result.status == OPTIMAL
    assert validate_solution(model, result.incumbent).ok
    route = route_of(s, model, result.incumbent, 0)
    assert route[0] == 'd0' and route[2:] == ['c1', 'dn']
    assert route[1].startswith('s1')
    # usage 10, travel 12 km at 10/h, one charging slot, charging time 1.88 kWh at 22 kW
    expected = 10.0 + 2.0 + 0.1 * 0.5 * 22.0 + 10.0 * 1.88 / 22.0 - 20.0
    assert result.objective == pytest.approx(expected, abs=1e-5)
