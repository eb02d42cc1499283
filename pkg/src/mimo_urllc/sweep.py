"""Parameter sweeps over random device drops, scored per algorithm."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .allocator import ALGORITHMS, AllocationError, AllocationResult, compare
from .scenario import random_scenario

AXES = ("energy", "device_count", "blocklength")
CSV_COLUMNS = ("axis", "value", "algorithm", "snapshot", "weighted_sum", "infeasible_count")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    snapshots: int = 20
    receiver: str = "mrc"
    algorithms: tuple = ALGORITHMS
    base_seed: int = 0
    # parameters held fixed while the axis varies
    K: int = 10
    M: int = 100
    L: int = 100
    energy: float = 2.0
    rate_req: float = 1.0
    epsilon: float = 1e-9
    cell_radius_m: float = 600.0

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if any(not (v > 0) for v in self.values):
            raise ValueError("sweep values must be positive")
        if self.snapshots < 1:
            raise ValueError("snapshots must be >= 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")

    def scenario(self, value, snapshot: int):
        kw = dict(K=self.K, M=self.M, L=self.L, energy=self.energy,
                  rate_req=self.rate_req, epsilon=self.epsilon)
        if self.axis == "energy":
            kw["energy"] = float(value)
        elif self.axis == "device_count":
            kw["K"] = int(value)
        else:
            kw["L"] = int(value)
        return random_scenario(snapshot_seed(self.base_seed, snapshot),
                               cell_radius_m=self.cell_radius_m, **kw)


def snapshot_seed(base_seed: int, snapshot: int) -> int:
    """Drop seed shared by every axis value, so values are compared on the same drops."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(snapshot),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sweep_score(res: AllocationResult) -> float:
    """Snapshot score: weighted rate bounds with shortfalls zeroed (Shannon rates for
    the upper bound); zero when the scheme finds no feasible allocation."""
    if not res.feasible:
        return 0.0
    return res.shannon_sum if res.mode == "upper_bound" else res.weighted_sum


def shortfall_count(res: AllocationResult, K: int) -> int:
    return K if not res.feasible else res.violations


@dataclass
class SweepRow:
    axis: str
    value: float
    algorithm: str
    snapshot: int
    weighted_sum: float
    infeasible_count: int


def _cell(args) -> list[SweepRow]:
    spec, value, snap = args
    sc = spec.scenario(value, snap)
    try:
        results = compare(sc, spec.receiver, spec.algorithms)
    except AllocationError:
        # solver failure: every scheme scores zero for this drop, flagged as all-short
        return [SweepRow(spec.axis, value, a, snap, 0.0, sc.K) for a in spec.algorithms]
    return [SweepRow(spec.axis, value, a, snap, sweep_score(r), shortfall_count(r, sc.K))
            for a, r in results.items()]


def run_sweep(spec: SweepSpec, threads: int = 1) -> list[SweepRow]:
    """One row per (value, algorithm, snapshot), in that nesting order."""
    cells = [(spec, v, s) for v in spec.values for s in range(spec.snapshots)]
    if threads > 1:
        with ProcessPoolExecutor(threads) as ex:
            parts = list(ex.map(_cell, cells))
    else:
        parts = [_cell(c) for c in cells]
    rows = []
    for v in spec.values:
        for a in spec.algorithms:
            for s in range(spec.snapshots):
                idx = spec.values.index(v) * spec.snapshots + s
                rows.extend(r for r in parts[idx] if r.algorithm == a)
    return rows


def summarize(rows: list[SweepRow], K_of_value=None) -> list[dict]:
    """Mean and standard error of the score per (value, algorithm)."""
    groups: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.value, r.algorithm), []).append(r)
    out = []
    for (value, alg), rs in groups.items():
        scores = np.array([r.weighted_sum for r in rs])
        n = len(scores)
        out.append({
            "axis": rs[0].axis, "value": value, "algorithm": alg, "snapshots": n,
            "mean": float(scores.mean()),
            "stderr": float(scores.std(ddof=1) / math.sqrt(n)) if n > 1 else None,
            "shortfall_devices": int(sum(r.infeasible_count for r in rs)),
        })
    return out


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = asdict(r)
        d["weighted_sum"] = repr(float(d["weighted_sum"]))
        w.writerow(d)
    return buf.getvalue()


def summary_json(spec: SweepSpec, rows: list[SweepRow]) -> str:
    return json.dumps({"spec": asdict(spec), "summary": summarize(rows)}, indent=2)
