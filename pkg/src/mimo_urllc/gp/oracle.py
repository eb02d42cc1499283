"""Brute-force grid search over a small GP; used only as a test oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .solver import log_transform
from .expr import GpProblem

MAX_ORACLE_VARS = 5


@dataclass
class OracleResult:
    values: dict[str, float] | None
    objective_value: float   # ln objective, -inf if nothing feasible

    @property
    def feasible(self) -> bool:
        return self.values is not None


def grid_oracle(problem: GpProblem, resolution: int = 40,
                bounds: Mapping[str, tuple[float, float]] | None = None,
                default_bounds: tuple[float, float] = (1e-3, 1e3)) -> OracleResult:
    """Best feasible point on a log-spaced grid, then one finer pass around it."""
    prog = log_transform(problem)
    if prog.n > MAX_ORACLE_VARS:
        raise ValueError(f"grid oracle handles at most {MAX_ORACLE_VARS} variables, got {prog.n}")
    bounds = bounds or {}
    lo = np.array([math.log(bounds.get(n, default_bounds)[0]) for n in prog.names])
    hi = np.array([math.log(bounds.get(n, default_bounds)[1]) for n in prog.names])

    def search(lo, hi):
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
        Y = np.array(list(itertools.product(*axes)))
        if prog.m:
            z = Y @ prog.A.T + prog.b
            zmax = np.maximum.reduceat(z, prog.starts, axis=1)
            s = np.add.reduceat(np.exp(z - zmax[:, prog.group]), prog.starts, axis=1)
            ok = np.all(zmax + np.log(s) <= 1e-12, axis=1)
        else:
            ok = np.ones(len(Y), bool)
        if not ok.any():
            return None, -math.inf
        obj = Y @ prog.c
        obj[~ok] = -np.inf
        j = int(np.argmax(obj))
        return Y[j], float(obj[j])

    y, val = search(lo, hi)
    if y is None:
        return OracleResult(None, -math.inf)
    step = (hi - lo) / (resolution - 1)
    y2, val2 = search(np.maximum(lo, y - step), np.minimum(hi, y + step))
    if y2 is not None and val2 >= val:
        y, val = y2, val2
    return OracleResult(prog.values_of(y), val + prog.c0)
