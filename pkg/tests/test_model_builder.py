#!/usr/bin/env python3
"""
Tests for MILP assembly: structure, partition tags and hand-computed optima.
"""

import numpy as np
import pytest

from src.core.model import VarBlock
from src.core.model_builder import (build_arcs, build_baseline, build_operator_model, build_response_model,
                                    build_single_level, cost_breakdown, customer_outcomes, route_of,
                                    served_customers)
from src.core.validation import validate_solution
from src.customer.inconvenience import BestResponse, _certificate, strong_duality_payment
from src.solvers.branch_and_bound import OPTIMAL, solve_mip

INCENTIVE_OPTIMUM = -20.85   # route cost 14, revenue 35, payment 1.5 * 0.1
BASELINE_STRICT = -8.0       # zero-width windows: only c1 fits
BASELINE_WIDE = -21.0        # 0.25 h windows: both served for free


def test_arc_set(conflict_scenario):
    arcs = build_arcs(conflict_scenario)
    assert len(arcs) == 13
    assert (0, 4) in arcs                       # idle vehicle
    assert all(j != 0 for _, j in arcs)
    assert all(i != 4 for i, _ in arcs)
    assert all(i != j for i, j in arcs)


def test_dummy_chain_arcs(scenario_factory):
    s = scenario_factory([('c1', 6.0, 0.0, 1.0, 20.0, 0.0, 1.0)], stations=[('s1', 0.0, 6.0)], dummy_count=2)
    arcs = set(build_arcs(s))
    station, d1, d2 = s.index_of('s1'), s.index_of('s1d1'), s.index_of('s1d2')
    assert (station, d1) in arcs and (d1, d2) in arcs
    assert (d1, station) not in arcs and (station, d2) not in arcs and (d2, d1) not in arcs


def test_single_level_structure(conflict_scenario):
    model = build_single_level(conflict_scenario)
    assert len(model.binary_indices) == 45
    assert len(model.var_indices('x')) == 13
    assert len(model.var_indices('B')) == 12 and len(model.var_indices('Bs')) == 12
    assert len(model.var_indices('psi_seg')) == 4
    assert model.metadata['kind'] == 'single_level'
    for var in model.vars:
        expected = VarBlock.DISCRETE if var.is_binary else VarBlock.CONTINUOUS
        assert var.partition == expected
    families = {row.family for row in model.constraints}
    assert {'flow', 'visit', 'time', 'window', 'soc', 'slot', 'kkt', 'epigraph', 'disjunctive',
            'link_payment'} <= families


def test_single_level_optimum(conflict_scenario):
    model = build_single_level(conflict_scenario)
    result = solve_mip(model)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(INCENTIVE_OPTIMUM, abs=1e-5)
    assert validate_solution(model, result.incumbent).ok

    parts = cost_breakdown(conflict_scenario, model, result.incumbent)
    assert sum(parts.values()) == pytest.approx(result.objective, abs=1e-5)
    assert parts['usage'] == pytest.approx(10.0)
    assert parts['travel_time'] == pytest.approx(4.0)
    assert parts['revenue'] == pytest.approx(-35.0)
    assert parts['incentives'] == pytest.approx(0.15, abs=1e-5)
    assert parts['charging'] == pytest.approx(0.0)

    outcomes = {o['customer']: o for o in customer_outcomes(conflict_scenario, model, result.incumbent)}
    assert outcomes['c1']['served'] and outcomes['c2']['served']
    assert sum(o['payment'] for o in outcomes.values()) == pytest.approx(0.15, abs=1e-5)
    waiting = max(outcomes.values(), key=lambda o: o['delta'])
    assert waiting['delta'] == pytest.approx(0.1, abs=1e-4)
    assert waiting['q'] == pytest.approx(1.5, abs=1e-4)

    route = route_of(conflict_scenario, model, result.incumbent, 0)
    assert route[0] == 'd0' and route[-1] == 'dn'
    assert set(route[1:-1]) == {'c1', 'c2'}


@pytest.mark.parametrize("width, expected", [(0.0, BASELINE_STRICT), (0.25, BASELINE_WIDE)])
def test_baseline_optimum(conflict_scenario, width, expected):
    model = build_baseline(conflict_scenario, width)
    assert model.metadata['kind'] == 'baseline'
    assert not model.var_indices('q')
    result = solve_mip(model)
    assert result.objective == pytest.approx(expected, abs=1e-5)
    served = served_customers(conflict_scenario, model, result.incumbent)
    assert sum(served.values()) == (1 if width == 0.0 else 2)


def test_incentive_never_worse_than_baseline(conflict_scenario):
    incentive = solve_mip(build_single_level(conflict_scenario)).objective
    baseline = solve_mip(build_baseline(conflict_scenario, 0.0)).objective
    assert incentive <= baseline + 1e-6


def test_operator_model_with_fixed_payments(conflict_no_station):
    model = build_operator_model(conflict_no_station, {'c1': 0.0, 'c2': 0.1}, {'c2': 0.15})
    result = solve_mip(model)
    assert result.objective == pytest.approx(INCENTIVE_OPTIMUM, abs=1e-5)
    parts = cost_breakdown(conflict_no_station, model, result.incumbent)
    assert parts['incentives'] == pytest.approx(0.15, abs=1e-5)
    assert sum(parts.values()) == pytest.approx(result.objective, abs=1e-5)


def test_response_model_picks_within_interval(conflict_no_station):
    kink = 0.02 / 1.5
    model = build_response_model(conflict_no_station, {'c1': 0.0, 'c2': 1.5},
                                 {'c1': (0.0, kink), 'c2': (kink, 1.0)})
    result = solve_mip(model)
    assert result.objective == pytest.approx(INCENTIVE_OPTIMUM, abs=1e-5)
    delta = result.incumbent.value_of(model, 'delta', conflict_no_station.index_of('c2'))
    assert delta == pytest.approx(0.1, abs=1e-4)


def test_model_inputs_are_checked(conflict_scenario):
    with pytest.raises(ValueError):
        build_baseline(conflict_scenario, -1.0)
    with pytest.raises(ValueError):
        build_operator_model(conflict_scenario, {'c1': 0.0})
    with pytest.raises(ValueError):
        build_response_model(conflict_scenario, {'c1': 0.0, 'c2': 0.0}, {'c1': (0.0, 0.5), 'c2': (0.0, 2.0)})


def test_breakdown_rejects_wrong_length(conflict_scenario):
    model = build_baseline(conflict_scenario, 0.0)
    result = solve_mip(model)
    result.incumbent.values = np.zeros(3)
    with pytest.raises(ValueError):
        cost_breakdown(conflict_scenario, model, result.incumbent)


def _response_values(model, solution, j, segments):
    def value(family, *subscripts):
        return solution.value_of(model, family, j, *subscripts)

    return {
        'q': value('q'), 'delta': value('delta'), 'u': value('u'), 'sigma': value('sigma'),
        'w': value('incv'), 'eta2': value('eta2'), 'psi1': value('psi1'), 'psi2': value('psi2'),
        'lam': [value('lam', s) for s in range(segments)],
        'psi_seg': [value('psi_seg', s) for s in range(segments)],
    }


def test_embedded_response_is_an_exact_best_response(conflict_no_station):
    scenario = conflict_no_station
    model = build_single_level(scenario)
    result = solve_mip(model)
    assert result.status == OPTIMAL
    served = served_customers(scenario, model, result.incumbent)
    assert all(served.values())
    tol = 1e-6

    for j in scenario.customer_nodes:
        response_model = scenario.customer_at(j).inconvenience
        v = _response_values(model, result.incumbent, j, len(response_model.gammas))
        q, delta = v['q'], v['delta']

        # optimal for the customer at the chosen rate
        candidates = [0.0, response_model.delta_bar] + response_model.breakpoints()
        best = min(response_model.value(d) - q * d for d in candidates)
        assert response_model.value(delta) - q * delta <= best + tol
        assert v['w'] == pytest.approx(response_model.value(delta), abs=tol)

        # multipliers carried by the model satisfy the KKT system
        embedded = BestResponse(delta_star=delta, value=v['w'] - q * delta, u=v['u'], sigma=v['sigma'],
                                lambdas=tuple(v['lam']))
        assert embedded.stationarity_residual(response_model, q) <= tol
        assert embedded.complementarity_residual(response_model) <= tol

        # an analytic certificate at the same point recovers the payment
        u, sigma, lambdas = _certificate(response_model, q, delta)
        analytic = BestResponse(delta_star=delta, value=response_model.value(delta) - q * delta, u=u,
                                sigma=sigma, lambdas=lambdas)
        assert analytic.complementarity_residual(response_model) <= tol
        payment = strong_duality_payment(response_model, q, analytic)
        assert payment == pytest.approx(q * delta, abs=tol)
        assert v['eta2'] == pytest.approx(payment, abs=tol)

        # disjunctions hold exactly at the binary values
        assert v['psi1'] in (0.0, 1.0) and v['psi2'] in (0.0, 1.0)
        if v['psi1'] == 0.0:
            assert delta == pytest.approx(response_model.delta_bar, abs=tol)
        else:
            assert v['u'] <= tol
        if v['psi2'] == 0.0:
            assert delta <= tol
        else:
            assert v['sigma'] <= tol
        for s, (gamma, chi) in enumerate(response_model.segments):
            assert v['psi_seg'][s] in (0.0, 1.0)
            if v['psi_seg'][s] == 1.0:
                assert v['w'] == pytest.approx(gamma * delta + chi, abs=tol)
            else:
                assert v['lam'][s] <= tol
