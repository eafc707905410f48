#!/usr/bin/env python3
"""
MILP assembly for the EV routing and charging problem.

build_single_level embeds every customer's best response (epigraph KKT
system with complementarity binaries) into the operator's routing and
charging model and linearizes the incentive payment through strong
duality. build_operator_model is the same routing and charging model with
fixed windows and fixed per-customer payments; the incentive-free baseline
and the bi-level oracle are built on it.

Variable families and subscripts:

    x[k,i,j]      arc (i,j) used by vehicle k            binary
    t[i]          arrival time at node i                 continuous
    E[k,i]        battery level of vehicle k arriving at i
    r[k,i]        energy charged by vehicle k at charging node i
    B[i,tau]      slot tau booked at charging node i     binary
    Bs[i,tau]     charging block at i starts in slot tau binary
    eta1[k,i,j]   charging time cost on arc (i,j)
    q, delta, u, sigma, incv, eta2, psi1, psi2 [j]   per customer
    lam[j,s], psi_seg[j,s]                           per customer segment

Every segment multiplier lam[j,s] gets its own complementarity binary
psi_seg[j,s] next to psi1 and psi2, so a customer with S segments adds
2 + S binaries. Two two-segment customers, one vehicle and one station
without dummies give 45 binaries; without psi_seg the count would be 41.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import MIN_TRAVEL_TIME
from src.core.model import EQ, GE, LE, MilpModel, ModelAssembler, Solution, VarKind
from src.scenario.scenario import NodeKind, ScenarioSpec, fingerprint, price_at

logger = logging.getLogger(__name__)

SINGLE_LEVEL = 'single_level'
OPERATOR = 'operator'

BINARY = VarKind.BINARY


def build_arcs(scenario: ScenarioSpec) -> List[Tuple[int, int]]:
    """
    Arc set shared by all vehicles.

    No self-loops, nothing enters the start depot, nothing leaves the end
    depot. Within one station family (station plus dummies) only the chain
    station -> d1 -> d2 ... is allowed.
    """
    nodes = scenario.nodes
    start, end = scenario.depot_start, scenario.depot_end
    family = {}
    position = {}
    for i, node in enumerate(nodes):
        if node.kind == NodeKind.STATION:
            family[i], position[i] = node.id, 0
        elif node.kind == NodeKind.STATION_DUMMY:
            family[i] = node.parent_station
            position[i] = int(node.id[len(node.parent_station) + 1:])

    arcs = []
    for i in range(len(nodes)):
        if i == end:
            continue
        for j in range(len(nodes)):
            if j == i or j == start:
                continue
            if i in family and j in family and family[i] == family[j]:
                if position[j] != position[i] + 1:
                    continue
            arcs.append((i, j))
    return arcs


class RoutingModelBuilder:
    """Adds the routing, battery and charging families shared by all model kinds."""

    def __init__(self, scenario: ScenarioSpec, kind: str):
        self.scenario = scenario
        self.kind = kind
        self.asm = ModelAssembler(metadata={
            'scenario': scenario.name,
            'fingerprint': fingerprint(scenario),
            'kind': kind,
        })
        self.arcs = build_arcs(scenario)
        self.vehicles = range(scenario.fleet.K)
        self.customers = scenario.customer_nodes
        self.stations = scenario.station_nodes
        self.start = scenario.depot_start
        self.end = scenario.depot_end
        self.horizon = scenario.grid.horizon

        self.out_arcs: Dict[int, List[int]] = {i: [] for i in range(len(scenario.nodes))}
        self.in_arcs: Dict[int, List[int]] = {i: [] for i in range(len(scenario.nodes))}
        for i, j in self.arcs:
            self.out_arcs[i].append(j)
            self.in_arcs[j].append(i)

    # Variables

    def add_routing_vars(self):
        fleet = self.scenario.fleet
        for k in self.vehicles:
            for i, j in self.arcs:
                self.asm.add_var('x', (k, i, j), BINARY)
        for i in range(len(self.scenario.nodes)):
            hi = 0.0 if i == self.start else self.horizon
            self.asm.add_var('t', (i,), lo=0.0, hi=hi)
        for k in self.vehicles:
            for i in range(len(self.scenario.nodes)):
                self.asm.add_var('E', (k, i), lo=0.0, hi=fleet.E_max)
            for i in self.stations:
                self.asm.add_var('r', (k, i), lo=0.0, hi=fleet.E_max)
        for i in self.stations:
            for tau in range(1, self.scenario.grid.xi + 1):
                self.asm.add_var('B', (i, tau), BINARY)
                self.asm.add_var('Bs', (i, tau), BINARY)
        for k in self.vehicles:
            for i in self.stations:
                g = self.scenario.station_at(i).g
                for j in self.out_arcs[i]:
                    self.asm.add_var('eta1', (k, i, j), lo=0.0, hi=fleet.omega_T * g * fleet.E_max)

    def x(self, k: int, i: int, j: int) -> int:
        return self.asm.var('x', k, i, j)

    def served_terms(self, j: int, coef: float = 1.0) -> List[Tuple[int, float]]:
        return [(self.x(k, i, j), coef) for k in self.vehicles for i in self.in_arcs[j]]

    # Rows

    def add_flow_rows(self):
        for k in self.vehicles:
            self.asm.add_row([(self.x(k, self.start, j), 1.0) for j in self.out_arcs[self.start]],
                             EQ, 1.0, 'flow')
            for h in range(len(self.scenario.nodes)):
                if h in (self.start, self.end):
                    continue
                terms = [(self.x(k, i, h), 1.0) for i in self.in_arcs[h]]
                terms += [(self.x(k, h, j), -1.0) for j in self.out_arcs[h]]
                self.asm.add_row(terms, EQ, 0.0, 'flow')

    def add_visit_rows(self):
        for j in self.customers + self.stations:
            self.asm.add_row(self.served_terms(j), LE, 1.0, 'visit')

    def add_time_rows(self):
        travel = self.scenario.travel
        big_m = self.scenario.big_m_policy.time + MIN_TRAVEL_TIME
        station_set = set(self.stations)
        t = lambda i: self.asm.var('t', i)  # noqa: E731
        for k in self.vehicles:
            for i, j in self.arcs:
                leg = max(float(travel.T[i, j]), MIN_TRAVEL_TIME)
                terms = [(t(j), -1.0), (t(i), 1.0), (self.x(k, i, j), big_m)]
                if i in station_set:
                    g = self.scenario.station_at(i).g
                    terms.append((self.asm.var('r', k, i), g))
                    self.asm.add_row(terms, LE, big_m - leg, 'time_charge')
                else:
                    self.asm.add_row(terms, LE, big_m - leg, 'time')

    def add_energy_rows(self):
        fleet = self.scenario.fleet
        travel = self.scenario.travel
        big_m = self.scenario.big_m_policy.energy
        station_set = set(self.stations)
        for k in self.vehicles:
            self.asm.add_row([(self.asm.var('E', k, self.start), 1.0)], EQ, fleet.E_0, 'soc_init')
            for i, j in self.arcs:
                e = float(travel.e[i, j])
                e_i, e_j, x = self.asm.var('E', k, i), self.asm.var('E', k, j), self.x(k, i, j)
                base = [(e_j, -1.0), (e_i, 1.0)]
                family = 'soc'
                if i in station_set:
                    base.append((self.asm.var('r', k, i), 1.0))
                    family = 'soc_charge'
                self.asm.add_row(base + [(x, big_m - e)], LE, big_m, family)
                self.asm.add_row(base + [(x, -(e + big_m))], GE, -big_m, family)
            for i in self.stations:
                self.asm.add_row([(self.asm.var('E', k, i), 1.0), (self.asm.var('r', k, i), 1.0)],
                                 LE, fleet.E_max, 'charge_cap')

    def add_charging_rows(self):
        grid = self.scenario.grid
        fleet = self.scenario.fleet
        slots = range(1, grid.xi + 1)
        for i in self.stations:
            g = self.scenario.station_at(i).g
            B = lambda tau: self.asm.var('B', i, tau)  # noqa: E731
            Bs = lambda tau: self.asm.var('Bs', i, tau)  # noqa: E731
            for tau in slots:
                terms = [(Bs(tau), 1.0), (B(tau), -1.0)]
                if tau > 1:
                    terms.append((B(tau - 1), 1.0))
                self.asm.add_row(terms, GE, 0.0, 'slot')
            self.asm.add_row([(Bs(tau), 1.0) for tau in slots], LE, 1.0, 'slot')

            for k in self.vehicles:
                r = self.asm.var('r', k, i)
                self.asm.add_row([(r, g)] + [(B(tau), -grid.delta_tau) for tau in slots],
                                 LE, 0.0, 'charge_time')
                self.asm.add_row([(r, 1.0)] + [(self.x(k, i, j), -fleet.E_max) for j in self.out_arcs[i]],
                                 LE, 0.0, 'charge_pin')

            t_i = self.asm.var('t', i)
            self.asm.add_row([(Bs(tau), (tau - 1) * grid.delta_tau) for tau in slots] + [(t_i, -1.0)],
                             LE, 0.0, 'slot_time')
            self.asm.add_row([(t_i, 1.0)] + [(Bs(tau), -(tau * grid.delta_tau - self.horizon)) for tau in slots],
                             LE, self.horizon, 'slot_time')

    def add_charge_cost_links(self):
        fleet = self.scenario.fleet
        for k in self.vehicles:
            for i in self.stations:
                g = self.scenario.station_at(i).g
                big_m = fleet.omega_T * g * fleet.E_max
                for j in self.out_arcs[i]:
                    eta = self.asm.var('eta1', k, i, j)
                    self.asm.add_row([(eta, 1.0), (self.asm.var('r', k, i), -fleet.omega_T * g),
                                      (self.x(k, i, j), -big_m)], GE, -big_m, 'link_charge')
                    self.asm.add_cost(eta, 1.0)

    def add_routing_costs(self, service_payments: Optional[Mapping[int, float]] = None):
        """Charging energy, vehicle usage, travel time, revenue and fixed payments."""
        scenario = self.scenario
        fleet = scenario.fleet
        for i in self.stations:
            station = scenario.station_at(i)
            for tau in range(1, scenario.grid.xi + 1):
                cost = price_at(station, tau) * scenario.grid.delta_tau / station.g
                self.asm.add_cost(self.asm.var('B', i, tau), cost)
        revenue = {j: scenario.customer_at(j).D for j in self.customers}
        payments = service_payments or {}
        for k in self.vehicles:
            for i, j in self.arcs:
                cost = arc_cost(scenario, i, j) + revenue.get(i, 0.0) + payments.get(j, 0.0)
                self.asm.add_cost(self.x(k, i, j), cost)

    def build_routing(self, service_payments: Optional[Mapping[int, float]] = None):
        self.add_routing_vars()
        self.add_flow_rows()
        self.add_visit_rows()
        self.add_time_rows()
        self.add_energy_rows()
        self.add_charging_rows()
        self.add_charge_cost_links()
        self.add_routing_costs(service_payments)

    # Customer side

    def add_fixed_windows(self, window_widths: Mapping[int, float]):
        for j in self.customers:
            customer = self.scenario.customer_at(j)
            t_j = self.asm.var('t', j)
            self.asm.add_row([(t_j, 1.0)], GE, customer.t_L, 'window')
            self.asm.add_row([(t_j, 1.0)], LE, customer.t_L + window_widths[j], 'window')

    def add_priced_flexibility(self, rates: Mapping[int, float], intervals: Mapping[int, Tuple[float, float]]):
        """
        Window extension delta_j chosen within [lo, hi] at a fixed rate q_j,
        paid as q_j * delta_j whenever the customer is served.
        """
        for j in self.customers:
            customer = self.scenario.customer_at(j)
            q = float(rates[j])
            lo, hi = intervals[j]
            delta = self.asm.add_var('delta', (j,), lo=lo, hi=hi)
            t_j = self.asm.var('t', j)
            self.asm.add_row([(t_j, 1.0)], GE, customer.t_L, 'window')
            self.asm.add_row([(t_j, 1.0), (delta, -1.0)], LE, customer.t_L + customer.base_window, 'window')
            if q == 0.0:
                continue
            pay_m = q * hi
            eta2 = self.asm.add_var('eta2', (j,), lo=0.0, hi=pay_m)
            terms = [(eta2, 1.0), (delta, -q)] + self.served_terms(j, -pay_m)
            self.asm.add_row(terms, GE, -pay_m, 'link_payment')
            self.asm.add_cost(eta2, 1.0)

    def add_customer_response(self):
        """Flexible windows, best-response KKT system and the payment link per customer."""
        dual_m = self.scenario.big_m_policy.dual
        for j in self.customers:
            customer = self.scenario.customer_at(j)
            model = customer.inconvenience
            d_bar = model.delta_bar
            q = self.asm.add_var('q', (j,), lo=0.0, hi=model.q_max)
            delta = self.asm.add_var('delta', (j,), lo=0.0, hi=d_bar)
            u = self.asm.add_var('u', (j,), lo=0.0, hi=dual_m)
            sigma = self.asm.add_var('sigma', (j,), lo=0.0, hi=dual_m)
            w = self.asm.add_var('incv', (j,), lo=model.value(0.0), hi=model.value(d_bar))
            pay_m = model.q_max * d_bar
            eta2 = self.asm.add_var('eta2', (j,), lo=0.0, hi=pay_m)
            psi1 = self.asm.add_var('psi1', (j,), BINARY)
            psi2 = self.asm.add_var('psi2', (j,), BINARY)
            lams = [self.asm.add_var('lam', (j, s), lo=0.0, hi=1.0) for s in range(len(model.gammas))]
            psi_seg = [self.asm.add_var('psi_seg', (j, s), BINARY) for s in range(len(model.gammas))]

            t_j = self.asm.var('t', j)
            self.asm.add_row([(t_j, 1.0)], GE, customer.t_L, 'window')
            self.asm.add_row([(t_j, 1.0), (delta, -1.0)], LE, customer.t_L + customer.base_window, 'window')

            self.asm.add_row([(lam, 1.0) for lam in lams], EQ, 1.0, 'kkt')
            self.asm.add_row([(lam, gamma) for lam, gamma in zip(lams, model.gammas)]
                             + [(q, -1.0), (u, 1.0), (sigma, -1.0)], EQ, 0.0, 'kkt')

            for s, (gamma, chi) in enumerate(model.segments):
                self.asm.add_row([(w, 1.0), (delta, -gamma)], GE, chi, 'epigraph')

            self.asm.add_row([(delta, -1.0), (psi1, -d_bar)], LE, -d_bar, 'disjunctive')
            self.asm.add_row([(u, 1.0), (psi1, dual_m)], LE, dual_m, 'disjunctive')
            self.asm.add_row([(delta, 1.0), (psi2, -d_bar)], LE, 0.0, 'disjunctive')
            self.asm.add_row([(sigma, 1.0), (psi2, dual_m)], LE, dual_m, 'disjunctive')
            top = model.value(d_bar)
            for s, (gamma, chi) in enumerate(model.segments):
                seg_m = top - chi
                self.asm.add_row([(w, 1.0), (delta, -gamma), (psi_seg[s], seg_m)], LE, seg_m + chi,
                                 'disjunctive')
                self.asm.add_row([(lams[s], 1.0), (psi_seg[s], -1.0)], LE, 0.0, 'disjunctive')

            # eta2 >= I(delta) + u*delta_bar - sum(chi*lam) when served
            terms = [(eta2, 1.0), (w, -1.0), (u, -d_bar)]
            terms += [(lam, chi) for lam, chi in zip(lams, model.chis)]
            terms += self.served_terms(j, -pay_m)
            self.asm.add_row(terms, GE, -pay_m, 'link_payment')
            self.asm.add_cost(eta2, 1.0)

    def build(self) -> MilpModel:
        model = self.asm.build()
        logger.info("Built %s model for %s: %d vars (%d binary), %d rows", self.kind, self.scenario.name,
                    model.num_vars, len(model.binary_indices), model.num_constraints)
        return model


def arc_cost(scenario: ScenarioSpec, i: int, j: int) -> float:
    """Usage cost on depot departures plus travel time cost; the idle arc is free."""
    start, end = scenario.depot_start, scenario.depot_end
    if i == start and j == end:
        return 0.0
    cost = scenario.fleet.omega_T * float(scenario.travel.T[i, j])
    if i == start:
        cost += scenario.fleet.c_v
    return cost


def build_single_level(scenario: ScenarioSpec) -> MilpModel:
    """Single-level MILP with embedded customer best responses."""
    builder = RoutingModelBuilder(scenario, SINGLE_LEVEL)
    builder.build_routing()
    builder.add_customer_response()
    return builder.build()


def build_operator_model(scenario: ScenarioSpec, window_widths: Mapping[str, float],
                         service_payments: Optional[Mapping[str, float]] = None,
                         kind: str = OPERATOR) -> MilpModel:
    """
    Routing and charging model with fixed windows [t_L, t_L + width] and a
    fixed payment charged whenever a customer is served.

    Widths and payments are keyed by customer id.
    """
    widths = {}
    for j in scenario.customer_nodes:
        cid = scenario.nodes[j].id
        if cid not in window_widths:
            raise ValueError(f"No window width for customer {cid}")
        if window_widths[cid] < 0:
            raise ValueError(f"Window width for customer {cid} must be >= 0, got {window_widths[cid]}")
        widths[j] = float(window_widths[cid])
    payments = {scenario.index_of(cid): float(p) for cid, p in (service_payments or {}).items()}

    builder = RoutingModelBuilder(scenario, kind)
    builder.build_routing(payments)
    builder.add_fixed_windows(widths)
    return builder.build()


def build_response_model(scenario: ScenarioSpec, rates: Mapping[str, float],
                         intervals: Mapping[str, Tuple[float, float]]) -> MilpModel:
    """
    Routing and charging model for fixed incentive rates, with each
    customer's window extension free within the set of its optimal
    responses [lo, hi] (the operator picks among tied responses).

    Rates and intervals are keyed by customer id.
    """
    node_rates, node_intervals = {}, {}
    for j in scenario.customer_nodes:
        customer = scenario.customer_at(j)
        if customer.id not in rates or customer.id not in intervals:
            raise ValueError(f"No rate or response interval for customer {customer.id}")
        lo, hi = (float(v) for v in intervals[customer.id])
        if not 0.0 <= lo <= hi <= customer.delta_bar + 1e-12:
            raise ValueError(f"Response interval [{lo}, {hi}] of customer {customer.id} "
                             f"outside [0, {customer.delta_bar}]")
        if rates[customer.id] < 0:
            raise ValueError(f"Incentive rate of customer {customer.id} must be >= 0")
        node_rates[j] = float(rates[customer.id])
        node_intervals[j] = (lo, min(hi, customer.delta_bar))

    builder = RoutingModelBuilder(scenario, 'response')
    builder.build_routing()
    builder.add_priced_flexibility(node_rates, node_intervals)
    return builder.build()


def build_baseline(scenario: ScenarioSpec, window_width: float) -> MilpModel:
    """Incentive-free model with windows [t_L, t_L + window_width]."""
    if window_width < 0:
        raise ValueError(f"window_width must be >= 0, got {window_width}")
    widths = {c.id: window_width for c in scenario.customers}
    return build_operator_model(scenario, widths, kind='baseline')


# Reading solutions back

def _values(model: MilpModel, solution: Solution) -> np.ndarray:
    values = np.asarray(solution.values, dtype=float)
    if values.shape != (model.num_vars,):
        raise ValueError(f"Solution has {values.shape} values for {model.num_vars} variables")
    return values


def served_customers(scenario: ScenarioSpec, model: MilpModel, solution: Solution) -> Dict[int, bool]:
    values = _values(model, solution)
    arcs = build_arcs(scenario)
    served = {j: 0.0 for j in scenario.customer_nodes}
    for k in range(scenario.fleet.K):
        for i, j in arcs:
            if j in served:
                served[j] += values[model.find_var('x', k, i, j)]
    return {j: bool(v > 0.5) for j, v in served.items()}


def cost_breakdown(scenario: ScenarioSpec, model: MilpModel, solution: Solution) -> Dict[str, float]:
    """
    Objective split into charging, usage, travel_time, charging_time,
    revenue (negative) and incentives. The parts sum to the objective.
    """
    values = _values(model, solution)
    c = model.objective_vector()
    parts = dict.fromkeys(('charging', 'usage', 'travel_time', 'charging_time', 'revenue', 'incentives'), 0.0)
    start, end = scenario.depot_start, scenario.depot_end
    revenue = {j: scenario.customer_at(j).D for j in scenario.customer_nodes}

    for var in model.vars:
        value = values[var.index]
        if var.family in ('B', 'Bs'):
            parts['charging'] += c[var.index] * value
        elif var.family == 'eta1':
            parts['charging_time'] += c[var.index] * value
        elif var.family == 'eta2':
            parts['incentives'] += c[var.index] * value
        elif var.family == 'x':
            _, i, j = var.subscripts
            usage = scenario.fleet.c_v if i == start and j != end else 0.0
            travel = arc_cost(scenario, i, j) - usage
            earned = revenue.get(i, 0.0)
            parts['usage'] += usage * value
            parts['travel_time'] += travel * value
            parts['revenue'] += earned * value
            # fixed service payments of the operator model
            parts['incentives'] += (c[var.index] - usage - travel - earned) * value
        else:
            parts['incentives'] += c[var.index] * value
    return parts


def customer_outcomes(scenario: ScenarioSpec, model: MilpModel, solution: Solution,
                      incentive_rates: Optional[Mapping[str, float]] = None,
                      flexibilities: Optional[Mapping[str, float]] = None) -> List[Dict]:
    """
    Per-customer served flag, incentive rate q, flexibility delta, payment
    q*delta and fee paid (revenue minus payment). For operator models the
    rates and flexibilities are not variables and may be passed in.
    """
    values = _values(model, solution)
    served = served_customers(scenario, model, solution)
    outcomes = []
    for j in scenario.customer_nodes:
        customer = scenario.customer_at(j)
        if model.has_var('q', j):
            q = float(values[model.find_var('q', j)])
        else:
            q = float((incentive_rates or {}).get(customer.id, 0.0))
        if model.has_var('delta', j):
            delta = float(values[model.find_var('delta', j)])
        else:
            delta = float((flexibilities or {}).get(customer.id, 0.0))
        payment = q * delta if served[j] else 0.0
        outcomes.append({
            'customer': customer.id,
            'served': served[j],
            'q': q,
            'delta': delta,
            'payment': payment,
            'revenue': customer.revenue,
            'fee': customer.revenue - payment if served[j] else 0.0,
        })
    return outcomes


def route_of(scenario: ScenarioSpec, model: MilpModel, solution: Solution, vehicle: int) -> List[str]:
    """Node ids visited by one vehicle, depot to depot."""
    values = _values(model, solution)
    successor = {}
    for i, j in build_arcs(scenario):
        if values[model.find_var('x', vehicle, i, j)] > 0.5:
            successor[i] = j
    route = [scenario.depot_start]
    while route[-1] in successor and len(route) <= len(scenario.nodes):
        route.append(successor[route[-1]])
    return [scenario.nodes[i].id for i in route]
