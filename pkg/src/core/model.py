#!/usr/bin/env python3
"""
MILP model containers.

MilpModel is an immutable registry of variables, sparse linear rows and a
sparse objective. ModelAssembler is the mutable builder used to create one.
StandardForm is the dense array view consumed by the solvers.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

LE, EQ, GE = '<=', '=', '>='
SENSES = (LE, EQ, GE)
_SENSE_CODE = {LE: -1, EQ: 0, GE: 1}

# Row families of the routing models plus the generic and Benders-internal ones
ROW_FAMILIES = (
    'flow',           # vehicle flow conservation
    'visit',          # each customer / charging node visited at most once
    'time',           # arrival time propagation without charging
    'time_charge',    # arrival time propagation after charging
    'window',         # service windows
    'soc',            # battery propagation without charging
    'soc_charge',     # battery propagation after charging
    'soc_init',       # initial battery level
    'charge_cap',     # battery level plus charge within capacity
    'slot',           # charging start flags and single charging block
    'charge_time',    # charge amount within booked slot time
    'charge_pin',     # no charge at unvisited charging nodes
    'slot_time',      # arrival within the start slot
    'kkt',            # customer stationarity
    'epigraph',       # customer epigraph feasibility
    'disjunctive',    # complementarity through binaries
    'link_charge',    # charging time cost auxiliary
    'link_payment',   # incentive payment auxiliary
    'generic',
    'copy',
    'cut',
)

# Variable families of the routing models and their partition
DISCRETE_FAMILIES = ('x', 'psi1', 'psi2', 'psi_seg', 'B', 'Bs')
CONTINUOUS_FAMILIES = ('t', 'r', 'E', 'q', 'delta', 'u', 'sigma', 'lam', 'eta1', 'eta2', 'incv')


class VarKind(str, Enum):
    BINARY = 'binary'
    CONTINUOUS = 'continuous'


class VarBlock(str, Enum):
    DISCRETE = 'X_d'
    CONTINUOUS = 'X_c'


@dataclass(frozen=True)
class VarRef:
    index: int
    family: str
    subscripts: Tuple[int, ...]
    kind: VarKind
    lo: float
    hi: float
    partition: VarBlock

    @property
    def name(self) -> str:
        return '__'.join([self.family] + [str(s) for s in self.subscripts])

    @property
    def bounds(self) -> Tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def is_binary(self) -> bool:
        return self.kind == VarKind.BINARY


@dataclass(frozen=True)
class LinConstraint:
    index: int
    coefficients: Tuple[Tuple[int, float], ...]
    sense: str
    rhs: float
    family: str

    @property
    def name(self) -> str:
        return f"{self.family}__{self.index}"

    def activity(self, values: np.ndarray) -> float:
        return float(sum(coef * values[j] for j, coef in self.coefficients))

    def violation(self, values: np.ndarray) -> float:
        lhs = self.activity(values)
        if self.sense == LE:
            return max(lhs - self.rhs, 0.0)
        if self.sense == GE:
            return max(self.rhs - lhs, 0.0)
        return abs(lhs - self.rhs)


@dataclass(frozen=True, eq=False)
class StandardForm:
    """Dense arrays: minimize c x + constant s.t. A x (sense) b, lo <= x <= hi."""
    c: np.ndarray
    A: np.ndarray
    sense: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    constant: float = 0.0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.A.shape


@dataclass(frozen=True, eq=False)
class MilpModel:
    vars: Tuple[VarRef, ...]
    constraints: Tuple[LinConstraint, ...]
    objective: Tuple[Tuple[int, float], ...]
    objective_constant: float = 0.0
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, MilpModel):
            return NotImplemented
        return (self.vars == other.vars and self.constraints == other.constraints
                and self.objective == other.objective
                and self.objective_constant == other.objective_constant
                and dict(self.metadata) == dict(other.metadata))

    __hash__ = None

    @property
    def num_vars(self) -> int:
        return len(self.vars)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @cached_property
    def _lookup(self) -> Dict[Tuple, int]:
        return {(v.family,) + tuple(v.subscripts): v.index for v in self.vars}

    def find_var(self, family: str, *subscripts: int) -> int:
        return self._lookup[(family,) + tuple(subscripts)]

    def has_var(self, family: str, *subscripts: int) -> bool:
        return (family,) + tuple(subscripts) in self._lookup

    def var_indices(self, family: str) -> List[int]:
        return [v.index for v in self.vars if v.family == family]

    def rows_of_family(self, family: str) -> List[LinConstraint]:
        return [row for row in self.constraints if row.family == family]

    @property
    def binary_indices(self) -> List[int]:
        return [v.index for v in self.vars if v.is_binary]

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for j, coef in self.objective:
            c[j] = coef
        return c

    def evaluate_objective(self, values: np.ndarray) -> float:
        return float(self.objective_vector() @ np.asarray(values, dtype=float)) + self.objective_constant

    @cached_property
    def standard_form(self) -> StandardForm:
        n, m = self.num_vars, self.num_constraints
        A = np.zeros((m, n))
        for i, row in enumerate(self.constraints):
            for j, coef in row.coefficients:
                A[i, j] = coef
        return StandardForm(
            c=self.objective_vector(),
            A=A,
            sense=np.array([_SENSE_CODE[row.sense] for row in self.constraints], dtype=int),
            b=np.array([row.rhs for row in self.constraints], dtype=float),
            lo=np.array([v.lo for v in self.vars], dtype=float),
            hi=np.array([v.hi for v in self.vars], dtype=float),
            constant=self.objective_constant,
        )


@dataclass
class Solution:
    """Variable values with the solver's view of them."""
    values: np.ndarray
    objective: float
    status: str = 'optimal'
    gap: float = 0.0

    def value_of(self, model: MilpModel, family: str, *subscripts: int) -> float:
        return float(self.values[model.find_var(family, *subscripts)])


Terms = Union[Mapping[int, float], Iterable[Tuple[int, float]]]


class ModelAssembler:
    """Mutable builder producing an immutable MilpModel."""

    def __init__(self, metadata: Optional[Mapping[str, str]] = None):
        self._vars: List[VarRef] = []
        self._lookup: Dict[Tuple, int] = {}
        self._rows: List[LinConstraint] = []
        self._objective: Dict[int, float] = {}
        self.objective_constant = 0.0
        self.metadata = dict(metadata or {})

    @property
    def num_vars(self) -> int:
        return len(self._vars)

    def add_var(self, family: str, subscripts: Sequence[int] = (), kind: VarKind = VarKind.CONTINUOUS,
                lo: float = 0.0, hi: float = 1.0) -> int:
        key = (family,) + tuple(int(s) for s in subscripts)
        if key in self._lookup:
            raise ValueError(f"Variable {key} already registered")
        if kind == VarKind.BINARY:
            lo, hi, block = 0.0, 1.0, VarBlock.DISCRETE
        else:
            block = VarBlock.CONTINUOUS
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise ValueError(f"Variable {key} needs finite bounds lo <= hi, got [{lo}, {hi}]")
        index = len(self._vars)
        self._vars.append(VarRef(index=index, family=family, subscripts=key[1:], kind=kind,
                                 lo=float(lo), hi=float(hi), partition=block))
        self._lookup[key] = index
        return index

    def var(self, family: str, *subscripts: int) -> int:
        return self._lookup[(family,) + tuple(subscripts)]

    def has_var(self, family: str, *subscripts: int) -> bool:
        return (family,) + tuple(subscripts) in self._lookup

    def add_row(self, terms: Terms, sense: str, rhs: float, family: str) -> int:
        if sense not in SENSES:
            raise ValueError(f"Unknown sense {sense!r}")
        if family not in ROW_FAMILIES:
            raise ValueError(f"Unknown constraint family {family!r}")
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: Dict[int, float] = {}
        for j, coef in items:
            if not 0 <= j < len(self._vars):
                raise ValueError(f"Row in family {family} references unknown variable {j}")
            merged[j] = merged.get(j, 0.0) + float(coef)
        coefficients = tuple(sorted((j, c) for j, c in merged.items() if c != 0.0))
        index = len(self._rows)
        self._rows.append(LinConstraint(index=index, coefficients=coefficients, sense=sense,
                                        rhs=float(rhs), family=family))
        return index

    def add_cost(self, j: int, coef: float):
        self._objective[j] = self._objective.get(j, 0.0) + float(coef)

    def build(self) -> MilpModel:
        objective = tuple(sorted((j, c) for j, c in self._objective.items() if c != 0.0))
        return MilpModel(vars=tuple(self._vars), constraints=tuple(self._rows), objective=objective,
                         objective_constant=float(self.objective_constant), metadata=dict(self.metadata))
