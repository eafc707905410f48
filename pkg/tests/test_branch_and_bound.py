#!/usr/bin/env python3
"""
Tests for the branch-and-bound MIP solver against enumeration and scipy's milp.
"""

import itertools
import math

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp

from src.core.model import StandardForm
from src.solvers.branch_and_bound import (CUTOFF, INFEASIBLE, NODE_LIMIT, OPTIMAL, MipLimits, relative_gap,
                                          solve_mip)


def _binary_program(seed, m=4, n=8):
    rng = np.random.default_rng(seed)
    A = rng.integers(-3, 6, size=(m, n)).astype(float)
    b = rng.integers(2, 10, size=m).astype(float)
    c = rng.integers(-9, 4, size=n).astype(float)
    return StandardForm(c=c, A=A, sense=np.full(m, -1), b=b, lo=np.zeros(n), hi=np.ones(n))


def _enumerate(form):
    best = math.inf
    for bits in itertools.product((0.0, 1.0), repeat=form.c.size):
        x = np.array(bits)
        if np.all(form.A @ x <= form.b + 1e-9):
            best = min(best, float(form.c @ x))
    return best


def _mixed_program(seed, m=5, n_bin=6, n_cont=4):
    rng = np.random.default_rng(seed)
    n = n_bin + n_cont
    A = rng.normal(size=(m, n)).round(2)
    x0 = np.concatenate([rng.integers(0, 2, size=n_bin), rng.uniform(0, 2, size=n_cont)])
    b = A @ x0 + rng.uniform(0.0, 1.0, size=m)
    c = rng.normal(size=n).round(2)
    lo = np.zeros(n)
    hi = np.concatenate([np.ones(n_bin), np.full(n_cont, 2.0)])
    return StandardForm(c=c, A=A, sense=np.full(m, -1), b=b, lo=lo, hi=hi), list(range(n_bin))


def _check_against_enumeration(seed):
    form = _binary_program(seed)
    expected = _enumerate(form)
    result = solve_mip(form, integral_vars=range(form.c.size))
    if math.isinf(expected):
        assert result.status == INFEASIBLE
        return
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(expected, abs=1e-7)
    x = result.incumbent.values
    assert np.all(np.abs(x - np.round(x)) <= 1e-9)
    assert np.all(form.A @ x <= form.b + 1e-7)


@pytest.mark.parametrize("seed", range(15))
def test_matches_enumeration(seed):
    _check_against_enumeration(seed)


@pytest.mark.slow
def test_matches_enumeration_many_instances():
    for seed in range(100, 300):
        _check_against_enumeration(seed)


@pytest.mark.parametrize("seed", range(8))
def test_mixed_program_matches_scipy_milp(seed):
    form, integral = _mixed_program(seed)
    integrality = np.zeros(form.c.size)
    integrality[integral] = 1
    ref = milp(form.c, constraints=LinearConstraint(form.A, -np.inf, form.b), integrality=integrality,
               bounds=Bounds(form.lo, form.hi))
    result = solve_mip(form, integral_vars=integral)
    assert ref.status == 0
    assert result.objective == pytest.approx(ref.fun, rel=1e-6, abs=1e-6)


def test_parallel_workers_give_the_same_optimum():
    form = _binary_program(3, m=5, n=10)
    serial = solve_mip(form, integral_vars=range(10))
    parallel = solve_mip(form, integral_vars=range(10), limits=MipLimits(workers=3))
    assert parallel.objective == pytest.approx(serial.objective, abs=1e-9)


def test_node_limit_reports_valid_bound():
    # knapsack whose LP relaxation is fractional
    form = StandardForm(c=-np.array([10.0, 13.0, 7.0, 8.0]), A=np.array([[4.0, 6.0, 3.0, 5.0]]),
                        sense=np.array([-1]), b=np.array([10.0]), lo=np.zeros(4), hi=np.ones(4))
    exact = solve_mip(form, integral_vars=range(4))
    assert exact.objective == pytest.approx(-23.0)
    stopped = solve_mip(form, integral_vars=range(4), limits=MipLimits(nodes=1))
    assert stopped.status == NODE_LIMIT
    assert stopped.best_bound <= exact.objective + 1e-9
    assert stopped.node_count == 1


def test_infeasible_program():
    form = StandardForm(c=np.ones(2), A=np.array([[1.0, 1.0]]), sense=np.array([0]), b=np.array([1.5]),
                        lo=np.zeros(2), hi=np.ones(2))
    result = solve_mip(form, integral_vars=[0, 1])
    assert result.status == INFEASIBLE
    assert not result.has_solution
    assert result.objective == math.inf


def test_relative_gap():
    assert relative_gap(10.0, 10.0) == 0.0
    assert relative_gap(math.inf, 1.0) == math.inf
    assert relative_gap(-20.0, -21.0) == pytest.approx(1.0 / 20.0)
    assert relative_gap(0.5, 0.25) == pytest.approx(0.25)


def _knapsack():
    return StandardForm(c=-np.array([10.0, 13.0, 7.0, 8.0]), A=np.array([[4.0, 6.0, 3.0, 5.0]]),
                        sense=np.array([-1]), b=np.array([10.0]), lo=np.zeros(4), hi=np.ones(4))


def test_integral_vars_as_numpy_array():
    form = _knapsack()
    from_array = solve_mip(form, integral_vars=np.arange(4))
    from_list = solve_mip(form, integral_vars=[0, 1, 2, 3])
    assert from_array.status == OPTIMAL
    assert from_array.objective == pytest.approx(from_list.objective)
    assert solve_mip(form, integral_vars=np.array([], dtype=int)).objective < -23.0


def test_cutoff_prunes_to_better_solutions_only():
    form = _knapsack()
    below = solve_mip(form, integral_vars=range(4), limits=MipLimits(cutoff=-20.0))
    assert below.status == OPTIMAL
    assert below.objective == pytest.approx(-23.0)

    none = solve_mip(form, integral_vars=range(4), limits=MipLimits(cutoff=-23.0))
    assert none.status == CUTOFF
    assert not none.has_solution
    assert none.best_bound == -23.0


def test_near_integral_node_is_resolved_with_fixed_values():
    # LP optimum has x0 = 0.9999995, inside the integrality tolerance; rounding
    # x0 to 1 forces y = 3 and w = 0.5
    form = StandardForm(c=np.array([-10.0, 1.0, 1e-3]),
                        A=np.array([[3.0, -1.0, 0.0], [1e6, 0.0, -1.0]]),
                        sense=np.array([-1, -1]), b=np.array([0.0, 999999.5]),
                        lo=np.zeros(3), hi=np.array([1.0, 10.0, 1.0]))
    result = solve_mip(form, integral_vars=[0])
    assert result.status == OPTIMAL
    x = result.incumbent.values
    assert x[0] == 1.0
    assert x[1] == pytest.approx(3.0, abs=1e-9)
    assert x[2] == pytest.approx(0.5, abs=1e-9)
    assert np.all(form.A @ x <= form.b + 1e-7)
    assert result.objective == pytest.approx(float(form.c @ x), abs=1e-12)
    assert result.objective == pytest.approx(-6.9995, abs=1e-7)
