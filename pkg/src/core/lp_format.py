#!/usr/bin/env python3
"""
CPLEX-style LP text files.

Layout written (and accepted) by this module:

    \\ meta <key>: <value>
    \\ objective constant: <float>
    Minimize
     obj: + 2.5 x__0__1__2 - 1.0 t__3
    Subject To
     flow__0: + 1.0 x__0__0__1 - 1.0 x__0__1__2 = 0.0
    Bounds
     0.0 <= t__3 <= 24.0
    Binaries
     x__0__0__1
    End

Variable names are `family__sub1__sub2...` with integer subscripts, row
names are `family__index`. Numbers are written with repr() so reading a
written file reproduces the model exactly. Variables are declared by the
Bounds section in index order.
"""

from typing import Dict, List, Optional, Tuple

from src.core.model import EQ, GE, LE, LinConstraint, MilpModel, VarBlock, VarKind, VarRef

SECTION_HEADERS = {
    'minimize': 'objective', 'minimum': 'objective', 'min': 'objective',
    'subject to': 'rows', 'such that': 'rows', 'st': 'rows', 's.t.': 'rows',
    'bounds': 'bounds', 'binaries': 'binaries', 'binary': 'binaries', 'bin': 'binaries',
    'end': 'end',
}


class LpFormatError(ValueError):
    """Raised when an LP file does not follow the documented grammar."""


def _number(value: float) -> str:
    if value == float('inf'):
        return 'inf'
    if value == float('-inf'):
        return '-inf'
    return repr(float(value))


def _expression(terms, names: List[str]) -> str:
    parts = []
    for j, coef in terms:
        sign = '-' if coef < 0 else '+'
        parts.append(f"{sign} {_number(abs(coef))} {names[j]}")
    return ' '.join(parts)


def format_lp(model: MilpModel) -> str:
    names = [v.name for v in model.vars]
    lines = []
    for key, value in sorted(model.metadata.items()):
        lines.append(f"\\ meta {key}: {value}")
    if model.objective_constant != 0.0:
        lines.append(f"\\ objective constant: {_number(model.objective_constant)}")

    lines.append("Minimize")
    objective = _expression(model.objective, names)
    if not objective and names:
        objective = f"+ 0.0 {names[0]}"
    lines.append(f" obj: {objective}")

    lines.append("Subject To")
    for row in model.constraints:
        expression = _expression(row.coefficients, names)
        if not expression:
            if not names:
                raise LpFormatError(f"Row {row.name} has no terms and the model has no variables")
            expression = f"+ 0.0 {names[0]}"
        lines.append(f" {row.name}: {expression} {row.sense} {_number(row.rhs)}")

    lines.append("Bounds")
    for v in model.vars:
        lines.append(f" {_number(v.lo)} <= {v.name} <= {_number(v.hi)}")

    binaries = [v.name for v in model.vars if v.is_binary]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {name}" for name in binaries)
    lines.append("End")
    return '\n'.join(lines) + '\n'


def write_lp(model: MilpModel, path: str):
    with open(path, 'w') as f:
        f.write(format_lp(model))


def _parse_name(name: str) -> Tuple[str, Tuple[int, ...]]:
    parts = name.split('__')
    try:
        return parts[0], tuple(int(p) for p in parts[1:])
    except ValueError as e:
        raise LpFormatError(f"Variable name {name!r} does not follow family__index form") from e


def _parse_terms(tokens: List[str], where: str) -> List[Tuple[str, float]]:
    terms = []
    i = 0
    while i < len(tokens):
        sign = 1.0
        if tokens[i] in ('+', '-'):
            sign = -1.0 if tokens[i] == '-' else 1.0
            i += 1
        if i >= len(tokens):
            raise LpFormatError(f"Dangling sign in {where}")
        coef = 1.0
        try:
            coef = float(tokens[i])
            i += 1
        except ValueError:
            pass
        if i >= len(tokens):
            raise LpFormatError(f"Coefficient without variable in {where}")
        terms.append((tokens[i], sign * coef))
        i += 1
    return terms


def parse_lp(text: str) -> MilpModel:
    metadata: Dict[str, str] = {}
    constant = 0.0
    sections: Dict[str, List[str]] = {'objective': [], 'rows': [], 'bounds': [], 'binaries': []}
    current: Optional[str] = None

    for raw in text.splitlines():
        stripped = raw.strip()
        if stripped.startswith('\\'):
            comment = stripped[1:].strip()
            if comment.startswith('meta '):
                key, _, value = comment[5:].partition(': ')
                metadata[key] = value
            elif comment.startswith('objective constant:'):
                constant = float(comment.split(':', 1)[1])
            continue
        if not stripped:
            continue
        header = SECTION_HEADERS.get(stripped.lower())
        if header == 'end':
            break
        if header is not None:
            current = header
            continue
        if current is None:
            raise LpFormatError(f"Content before the first section: {stripped!r}")
        sections[current].append(stripped)

    # Variables in Bounds order
    vars_by_name: Dict[str, int] = {}
    declared = []
    for line in sections['bounds']:
        tokens = line.split()
        if len(tokens) != 5 or tokens[1] != '<=' or tokens[3] != '<=':
            raise LpFormatError(f"Bounds line must read 'lo <= name <= hi': {line!r}")
        vars_by_name[tokens[2]] = len(declared)
        declared.append((tokens[2], float(tokens[0]), float(tokens[4])))
    binary_names = set(' '.join(sections['binaries']).split())

    vars_out = []
    for index, (name, lo, hi) in enumerate(declared):
        family, subscripts = _parse_name(name)
        binary = name in binary_names
        vars_out.append(VarRef(index=index, family=family, subscripts=subscripts,
                               kind=VarKind.BINARY if binary else VarKind.CONTINUOUS, lo=lo, hi=hi,
                               partition=VarBlock.DISCRETE if binary else VarBlock.CONTINUOUS))

    def resolve(terms, where):
        merged: Dict[int, float] = {}
        for name, coef in terms:
            if name not in vars_by_name:
                raise LpFormatError(f"Unknown variable {name!r} in {where}")
            j = vars_by_name[name]
            merged[j] = merged.get(j, 0.0) + coef
        return tuple(sorted((j, c) for j, c in merged.items() if c != 0.0))

    objective_text = ' '.join(sections['objective'])
    if ':' in objective_text:
        objective_text = objective_text.split(':', 1)[1]
    objective = resolve(_parse_terms(objective_text.split(), 'objective'), 'objective')

    rows = []
    for index, line in enumerate(_join_rows(sections['rows'])):
        label, _, body = line.partition(':')
        tokens = body.split()
        sense_at = [k for k, tok in enumerate(tokens) if tok in ('<=', '>=', '=', '=<', '=>')]
        if len(sense_at) != 1 or sense_at[0] != len(tokens) - 2:
            raise LpFormatError(f"Row must end with '<sense> <rhs>': {line!r}")
        sense = {'<=': LE, '=<': LE, '>=': GE, '=>': GE, '=': EQ}[tokens[-2]]
        family = label.strip().split('__')[0]
        rows.append(LinConstraint(index=index, coefficients=resolve(_parse_terms(tokens[:-2], label), label),
                                  sense=sense, rhs=float(tokens[-1]), family=family))

    return MilpModel(vars=tuple(vars_out), constraints=tuple(rows), objective=objective,
                     objective_constant=constant, metadata=metadata)


def _join_rows(lines: List[str]) -> List[str]:
    """Rows may span several lines; a new row starts with `name:`."""
    rows: List[str] = []
    for line in lines:
        if ':' in line.split()[0]:
            rows.append(line)
        elif rows:
            rows[-1] += ' ' + line
        else:
            raise LpFormatError(f"Row continuation without a row: {line!r}")
    return rows


def read_lp(path: str) -> MilpModel:
    with open(path, 'r') as f:
        return parse_lp(f.read())
