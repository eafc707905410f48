#!/usr/bin/env python3
"""
Split of a MilpModel into the discrete block X_d and the continuous block
X_c, with rows classified as master-only (discrete coefficients only) or
coupled (any continuous coefficient).
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from src.core.model import MilpModel, VarBlock


class InfeasibleProblemError(RuntimeError):
    """Raised when the master problem has no feasible point."""


@dataclass(frozen=True, eq=False)
class Partition:
    model: MilpModel
    discrete: np.ndarray
    continuous: np.ndarray
    master_rows: np.ndarray
    coupled_rows: np.ndarray

    @property
    def n_discrete(self) -> int:
        return int(self.discrete.size)

    @property
    def n_continuous(self) -> int:
        return int(self.continuous.size)

    @cached_property
    def form(self):
        return self.model.standard_form

    @cached_property
    def c_d(self) -> np.ndarray:
        return self.form.c[self.discrete]

    @cached_property
    def c_c(self) -> np.ndarray:
        return self.form.c[self.continuous]

    def block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return self.form.A[np.ix_(rows, cols)]

    @cached_property
    def theta_bounds(self) -> Tuple[float, float]:
        """Box minimum and maximum of the continuous cost c_c X_c."""
        lo = self.form.lo[self.continuous]
        hi = self.form.hi[self.continuous]
        low = np.minimum(self.c_c * lo, self.c_c * hi).sum()
        high = np.maximum(self.c_c * lo, self.c_c * hi).sum()
        return float(low), float(high)

    def assemble(self, x_d: np.ndarray, x_c: np.ndarray) -> np.ndarray:
        values = np.zeros(self.model.num_vars)
        values[self.discrete] = x_d
        values[self.continuous] = x_c
        return values


def partition_model(model: MilpModel) -> Partition:
    """Classify variables by their partition tag and rows by the variables they touch."""
    discrete, continuous = [], []
    for var in model.vars:
        if var.partition == VarBlock.DISCRETE:
            if not var.is_binary:
                raise ValueError(f"Variable {var.name} is tagged X_d but not binary")
            discrete.append(var.index)
        elif var.partition == VarBlock.CONTINUOUS:
            continuous.append(var.index)
        else:
            raise ValueError(f"Variable {var.name} has no partition tag")

    is_discrete = np.zeros(model.num_vars, dtype=bool)
    is_discrete[discrete] = True
    master, coupled = [], []
    for row in model.constraints:
        if all(is_discrete[j] for j, _ in row.coefficients):
            master.append(row.index)
        else:
            coupled.append(row.index)

    return Partition(
        model=model,
        discrete=np.array(discrete, dtype=int),
        continuous=np.array(continuous, dtype=int),
        master_rows=np.array(master, dtype=int),
        coupled_rows=np.array(coupled, dtype=int),
    )
