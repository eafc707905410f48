#!/usr/bin/env python3
"""
Adapter for command-line MILP solvers.

The command is a template with `{in}` (LP file) and `{out}` (solution file)
placeholders, e.g.

    cbc {in} solve solu {out}
    glpsol --lp {in} -o {out}

It comes from the caller or from EVRP_SOLVER_CMD. Solution files are read
liberally: any line whose last two tokens (or first two) are a known
variable name and a number assigns that variable.
"""

import logging
import math
import os
import shlex
import subprocess
import tempfile
import time
from typing import Optional, Union

import numpy as np

from config import INTEGRALITY_TOL, SOLVER_CMD
from src.core.lp_format import read_lp, write_lp
from src.core.model import MilpModel, Solution
from src.solvers.branch_and_bound import MipSolveResult, OPTIMAL
from src.solvers.simplex import INFEASIBLE

logger = logging.getLogger(__name__)


class ExternalSolverError(RuntimeError):
    """Raised when the external command is missing, fails or its output is unusable."""


def _to_float(token: str) -> Optional[float]:
    try:
        value = float(token)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def parse_solution_file(path: str, model: MilpModel) -> Optional[np.ndarray]:
    """Variable values from a solver output file; None when it reports infeasibility."""
    with open(path, 'r') as f:
        text = f.read()
    head = text[:400].lower()
    if 'infeasible' in head and 'optimal' not in head:
        return None

    names = {v.name: v.index for v in model.vars}
    values = np.zeros(model.num_vars)
    seen = set()
    for line in text.splitlines():
        tokens = line.replace('*', ' ').split()
        for k, token in enumerate(tokens[:-1]):
            if token in names:
                value = _to_float(tokens[k + 1])
                if value is not None:
                    values[names[token]] = value
                    seen.add(token)
                break
    if not seen and model.num_vars:
        raise ExternalSolverError(f"No variable values found in solver output {path}")
    return values


def solve_external(model_or_path: Union[MilpModel, str], solver_cmd: Optional[str] = None,
                   time_limit: Optional[float] = None) -> MipSolveResult:
    """Write the model as an LP file, run the external solver and read its solution."""
    template = solver_cmd or SOLVER_CMD
    if not template:
        raise ExternalSolverError("No solver command given and EVRP_SOLVER_CMD is not set")
    if '{in}' not in template or '{out}' not in template:
        raise ExternalSolverError(f"Solver command must contain {{in}} and {{out}}: {template!r}")

    start = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix='evrp_') as workdir:
        if isinstance(model_or_path, MilpModel):
            model = model_or_path
            lp_path = os.path.join(workdir, 'model.lp')
            write_lp(model, lp_path)
        else:
            lp_path = str(model_or_path)
            model = read_lp(lp_path)
        out_path = os.path.join(workdir, 'solution.txt')

        if model.num_vars == 0:
            empty = Solution(values=np.zeros(0), objective=model.objective_constant)
            return MipSolveResult(status=OPTIMAL, incumbent=empty, best_bound=empty.objective,
                                  gap=0.0, node_count=0)

        command = [part.replace('{in}', lp_path).replace('{out}', out_path)
                   for part in shlex.split(template)]
        logger.info("Running external solver: %s", ' '.join(command))
        try:
            completed = subprocess.run(command, capture_output=True, text=True, timeout=time_limit)
        except FileNotFoundError as e:
            raise ExternalSolverError(f"Solver executable not found: {command[0]}") from e
        except subprocess.TimeoutExpired as e:
            raise ExternalSolverError(f"Solver exceeded {time_limit}s") from e
        if completed.returncode != 0:
            raise ExternalSolverError(
                f"Solver exited with code {completed.returncode}: {completed.stderr.strip()[:500]}")
        if not os.path.exists(out_path):
            raise ExternalSolverError(f"Solver wrote no solution file at {out_path}")

        values = parse_solution_file(out_path, model)

    wall = time.perf_counter() - start
    if values is None:
        return MipSolveResult(status=INFEASIBLE, incumbent=None, best_bound=math.inf,
                              gap=math.inf, node_count=0, wall_time=wall)

    binaries = model.binary_indices
    if binaries:
        residual = np.abs(values[binaries] - np.round(values[binaries])).max()
        if residual > INTEGRALITY_TOL:
            logger.warning("External solution has integrality residual %.2e", residual)
        values[binaries] = np.round(values[binaries])
    objective = model.evaluate_objective(values)
    solution = Solution(values=values, objective=objective)
    return MipSolveResult(status=OPTIMAL, incumbent=solution, best_bound=objective,
                          gap=0.0, node_count=0, wall_time=wall)
