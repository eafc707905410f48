#!/usr/bin/env python3
"""
Tests for the Benders decomposition: partition, cut validity by enumeration
and agreement of GBD and SGBD with the monolithic solver.
"""

import csv
import itertools

import numpy as np
import pytest

from src.benders.cuts import (FEASIBILITY, OPTIMALITY, feasibility_cut, optimality_cut,
                              strengthen_feasibility, strengthen_optimality)
from src.benders.driver import GBD, SGBD, BendersLimits, run, write_iteration_log
from src.benders.partition import partition_model
from src.benders.subproblems import solve_feasibility, solve_master, solve_subproblem
from src.core.model_builder import build_single_level, route_of
from src.core.validation import validate_solution
from src.solvers.branch_and_bound import OPTIMAL, MipLimits, solve_mip


def _feasible_points(partition):
    """Binary master points satisfying the master rows with a feasible subproblem."""
    model = partition.model
    points = []
    for bits in itertools.product((0.0, 1.0), repeat=partition.n_discrete):
        x_d = np.array(bits)
        values = partition.assemble(x_d, np.zeros(partition.n_continuous))
        if any(model.constraints[r].violation(values) > 1e-9 for r in partition.master_rows):
            continue
        sub = solve_subproblem(partition, x_d)
        if sub.feasible:
            points.append((x_d, sub))
    return points


def test_partition_tags(single_customer):
    partition = partition_model(build_single_level(single_customer))
    assert partition.n_discrete == 7
    model = partition.model
    assert all(model.vars[j].is_binary for j in partition.discrete)
    assert not any(model.vars[j].is_binary for j in partition.continuous)
    for r in partition.master_rows:
        assert all(j in set(partition.discrete) for j, _ in model.constraints[r].coefficients)
    assert len(partition.master_rows) + len(partition.coupled_rows) == model.num_constraints
    theta_lo, theta_hi = partition.theta_bounds
    assert theta_lo <= 0.0 <= theta_hi


def test_cuts_never_exceed_subproblem_values(single_customer):
    partition = partition_model(build_single_level(single_customer))
    points = _feasible_points(partition)
    assert points
    for anchor, sub in points:
        classic = optimality_cut(anchor, sub)
        strong = strengthen_optimality(partition, anchor, sub.zeta, sub.objective)
        assert strong.kind == OPTIMALITY and strong.strengthened
        assert strong.provenance['xi'] >= -1e-7
        for x_d, other in points:
            scale = 1e-6 * max(1.0, abs(other.objective))
            assert classic.value_at(x_d) <= other.objective + scale
            assert strong.value_at(x_d) <= other.objective + scale
            assert strong.value_at(x_d) >= classic.value_at(x_d) - scale


def test_relaxed_master_bounds_the_optimum(single_customer):
    model = build_single_level(single_customer)
    partition = partition_model(model)
    master = solve_master(partition, [], relax=True)
    assert master.relaxed
    assert master.lower_bound <= solve_mip(model).objective + 1e-6


@pytest.mark.parametrize("mode", [GBD, SGBD])
def test_single_customer_converges(single_customer, mode):
    model = build_single_level(single_customer)
    expected = solve_mip(model).objective
    result, state = run(partition_model(model), mode=mode)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(expected, abs=1e-5)
    assert expected == pytest.approx(-8.0, abs=1e-6)
    assert validate_solution(model, result.incumbent).ok
    lbs = [r.lb for r in state.records]
    assert all(b >= a - 1e-7 * max(1.0, abs(a)) for a, b in zip(lbs, lbs[1:]))
    assert state.records[-1].lb <= state.records[-1].ub + 1e-6


@pytest.mark.parametrize("mode", [GBD, SGBD])
def test_two_customers_agree_with_mip(conflict_no_station, mode):
    model = build_single_level(conflict_no_station)
    assert len(model.binary_indices) == 15
    result, state = run(partition_model(model), mode=mode, limits=BendersLimits(time=120))
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(-20.85, abs=1e-5)
    assert result.best_bound <= result.objective + 1e-9
    assert state.iteration == len(state.records)
    if mode == SGBD:
        optimality = [r for r in state.records if r.cut_kind == OPTIMALITY and r.strengthened]
        assert all(r.xi >= -1e-7 for r in optimality)


def test_iteration_log(tmp_path, single_customer):
    _, state = run(partition_model(build_single_level(single_customer)), mode=SGBD)
    path = tmp_path / 'iterations.csv'
    write_iteration_log(state, str(path))
    with open(path, newline='') as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0].keys()) == ['iteration', 'lb', 'ub', 'gap', 'cut_kind', 'strengthened', 'xi',
                                    'wall_time', 'master_relaxed']
    assert len(rows) == state.iteration
    assert [int(r['iteration']) for r in rows] == list(range(1, state.iteration + 1))


def test_unknown_mode_is_rejected(single_customer):
    with pytest.raises(ValueError):
        run(partition_model(build_single_level(single_customer)), mode='lbbd')


def test_master_below_converged_optimum_is_exhausted(single_customer):
    partition = partition_model(build_single_level(single_customer))
    result, state = run(partition, mode=SGBD)
    cutoff = result.objective - 1e-3
    master = solve_master(partition, state.cuts, relax=False, limits=MipLimits(cutoff=cutoff))
    assert master.exhausted and master.x_d is None
    assert master.lower_bound == cutoff
    open_master = solve_master(partition, state.cuts, relax=False,
                               limits=MipLimits(cutoff=result.objective + 1.0))
    assert not open_master.exhausted
    assert open_master.lower_bound <= result.objective + 1e-6


def _master_points(partition):
    """Binary points satisfying the master rows, split by subproblem feasibility."""
    model = partition.model
    feasible, infeasible = [], []
    for bits in itertools.product((0.0, 1.0), repeat=partition.n_discrete):
        x_d = np.array(bits)
        values = partition.assemble(x_d, np.zeros(partition.n_continuous))
        if any(model.constraints[r].violation(values) > 1e-9 for r in partition.master_rows):
            continue
        (feasible if solve_subproblem(partition, x_d).feasible else infeasible).append(x_d)
    return feasible, infeasible


def test_feasibility_cuts_separate_and_stay_valid(stranded_customer):
    partition = partition_model(build_single_level(stranded_customer))
    feasible, infeasible = _master_points(partition)
    assert feasible and infeasible
    far = stranded_customer.index_of('far')
    served = [partition.discrete.tolist().index(j) for j in partition.model.var_indices('x')
              if partition.model.vars[j].subscripts[2] == far]
    # every point that drives out to the customer runs out of energy
    assert all(x_d[served].sum() == 0 for x_d in feasible)
    assert any(x_d[served].sum() > 0 for x_d in infeasible)

    for anchor in infeasible:
        fsp = solve_feasibility(partition, anchor)
        assert fsp.slack_sum > 0
        classic = feasibility_cut(anchor, fsp)
        strong = strengthen_feasibility(partition, anchor, fsp.upsilon, fsp.slack_sum)
        scale = 1e-6 * max(1.0, fsp.slack_sum, float(np.abs(fsp.upsilon).sum()))
        for cut in (classic, strong):
            assert cut.kind == FEASIBILITY
            assert cut.violation(anchor) > 0
            for x_d in feasible:
                assert cut.value_at(x_d) <= scale


@pytest.mark.parametrize("mode", [GBD, SGBD])
def test_stranded_customer_is_left_unserved(stranded_customer, mode):
    model = build_single_level(stranded_customer)
    expected = solve_mip(model)
    assert expected.status == OPTIMAL
    assert expected.objective == pytest.approx(0.0, abs=1e-6)
    result, state = run(partition_model(model), mode=mode)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(0.0, abs=1e-5)
    assert validate_solution(model, result.incumbent).ok
    assert route_of(stranded_customer, model, result.incumbent, 0) == ['d0', 'dn']
    assert all(r.lb <= r.ub + 1e-6 for r in state.records)
