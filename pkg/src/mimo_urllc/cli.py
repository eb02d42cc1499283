"""Command-line front end.

Exit codes: 0 success, 1 infeasible problem, 2 usage, input or I/O error.
Results go to standard output (or ``--out``); diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import gp
from .allocator import (ALGORITHMS, AllocationError, AllocationResult, PowerAllocation,
                        compare, run_algorithm)
from .fbl import a_coeff, sinr_threshold
from .mc import McConfig, empirical_ergodic_rate
from .scenario import ScenarioError, defaults_path, load_scenario
from .sweep import AXES, SweepSpec, rows_to_csv, run_sweep, summary_json

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2
FULL_TRIALS, FULL_SNAPSHOTS = 5000, 100
DESK_TRIALS, DESK_SNAPSHOTS = 2000, 20

log = logging.getLogger("mimo_urllc")


class UsageError(Exception):
    pass


class Infeasible(Exception):
    def __init__(self, phi: float, payload: str | None = None):
        super().__init__(f"infeasible: phi={phi:.2f} < 1")
        self.payload = payload


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=Path, default=None,
                        help="scenario JSON (default: bundled reference scenario)")
    common.add_argument("--receiver", choices=("mrc", "zf"), default="mrc")
    common.add_argument("--seed", type=int, default=None, help="base RNG seed")
    common.add_argument("--out", type=Path, default=None, help="write data here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--threads", type=int, default=1, help="worker count (results do not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mimo-urllc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a scenario file and print derived constants")

    a = sub.add_parser("allocate", parents=[common], help="optimize powers for one scenario")
    a.add_argument("--xi", type=float, default=1e-4, help="relative stopping tolerance")
    a.add_argument("--algorithm", choices=ALGORITHMS, default="proposed")

    c = sub.add_parser("compare", parents=[common], help="run the proposed scheme and all baselines")
    c.add_argument("--xi", type=float, default=1e-4)

    m = sub.add_parser("mc-verify", parents=[common], help="Monte Carlo check of the rate bound")
    m.add_argument("--trials", type=int, default=None)
    m.add_argument("--allocation", type=Path, default=None,
                   help="allocate JSON output to evaluate (default: run allocate first)")
    m.add_argument("--xi", type=float, default=1e-4)
    m.add_argument("--paper-scale", action="store_true", help=f"{FULL_TRIALS} trials")

    s = sub.add_parser("sweep", parents=[common], help="score all schemes over random drops")
    s.add_argument("--axis", choices=AXES, required=True)
    s.add_argument("--values", required=True, help="comma-separated axis values")
    s.add_argument("--snapshots", type=int, default=None)
    s.add_argument("--algorithms", default=",".join(ALGORITHMS))
    s.add_argument("--paper-scale", action="store_true", help=f"{FULL_SNAPSHOTS} snapshots")

    g = sub.add_parser("gp-solve", parents=[common], help="solve a GP given in the text format")
    g.add_argument("problem", type=Path)
    g.add_argument("--tol", type=float, default=1e-8)
    return p


def _emit(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
    else:
        try:
            args.out.write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}") from exc


def _scenario(args):
    path = args.scenario or defaults_path()
    try:
        return load_scenario(path)
    except OSError as exc:
        raise UsageError(f"cannot read scenario {path}: {exc}") from exc
    except ScenarioError as exc:
        raise UsageError(f"invalid scenario {path}: {exc}") from exc


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_validate(args) -> int:
    sc = _scenario(args)
    a = np.atleast_1d(a_coeff(sc.epsilons, sc.L, sc.K))
    out = {
        "M": sc.M, "K": sc.K, "blocklength": sc.L, "pilot_length": sc.system.l_p,
        "beta": sc.beta, "alpha": sc.alphas, "penalty_coeff": a,
        "sinr_threshold": sinr_threshold(sc.rate_reqs, sc.beta, a),
    }
    if args.format == "csv":
        _emit(args, _csv(["device", "alpha", "penalty_coeff", "sinr_threshold"],
                         [(k, repr(out["alpha"][k]), repr(a[k]), repr(out["sinr_threshold"][k]))
                          for k in range(sc.K)]))
    else:
        _emit(args, _dumps(out))
    return EXIT_OK


def _allocate(args, sc) -> AllocationResult:
    try:
        return run_algorithm(sc, args.receiver, getattr(args, "algorithm", "proposed"), xi=args.xi)
    except AllocationError as exc:
        raise UsageError(f"solver failure: {exc}") from exc


def cmd_allocate(args) -> int:
    sc = _scenario(args)
    res = _allocate(args, sc)
    if args.format == "csv":
        text = _csv(["device", "p_pilot", "p_data", "sinr_lb", "rate_lb"],
                    [] if not res.feasible else
                    [(k, repr(res.allocation.p_pilot[k]), repr(res.allocation.p_data[k]),
                      repr(res.sinr_lb[k]), repr(res.rate_lb[k])) for k in range(sc.K)])
    else:
        text = _dumps(res.to_dict())
    if not res.feasible:
        raise Infeasible(res.phi, text)
    _emit(args, text)
    return EXIT_OK


def cmd_compare(args) -> int:
    sc = _scenario(args)
    try:
        results = compare(sc, args.receiver, xi=args.xi)
    except AllocationError as exc:
        raise UsageError(f"solver failure: {exc}") from exc
    if args.format == "json":
        _emit(args, _dumps({k: v.to_dict() for k, v in results.items()}))
    else:
        _emit(args, _csv(["algorithm", "status", "weighted_sum", "shannon_sum", "violations"],
                         [(k, r.status, repr(r.weighted_sum), repr(r.shannon_sum), r.violations)
                          for k, r in results.items()]))
    if not results["proposed"].feasible:
        raise Infeasible(results["proposed"].phi)
    return EXIT_OK


def _load_allocation(path: Path) -> tuple[PowerAllocation, str | None]:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read allocation {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("allocation"), dict):
        raise UsageError(f"{path}: no 'allocation' object (expected allocate JSON output)")
    try:
        return PowerAllocation.from_dict(doc["allocation"]), doc.get("receiver")
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: malformed allocation ({exc})") from exc


def cmd_mc_verify(args) -> int:
    sc = _scenario(args)
    if args.allocation is not None:
        alloc, rx = _load_allocation(args.allocation)
        if rx is not None and rx != args.receiver:
            log.warning("allocation was computed for %s, evaluating with %s", rx, args.receiver)
        if alloc.p_pilot.shape != (sc.K,) or alloc.p_data.shape != (sc.K,):
            raise UsageError("allocation size does not match the scenario")
    else:
        res = _allocate(args, sc)
        if not res.feasible:
            raise Infeasible(res.phi)
        alloc = res.allocation
    if np.any(alloc.p_pilot <= 0):
        raise UsageError("allocation has non-positive pilot power")
    trials = args.trials or (FULL_TRIALS if args.paper_scale else DESK_TRIALS)
    seed = sc.seed if args.seed is None else args.seed
    try:
        cfg = McConfig(trials, seed, args.receiver, args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    mc = empirical_ergodic_rate(sc, alloc.p_pilot, alloc.p_data, cfg)
    if mc.clamped:
        log.info("%d negative instantaneous rates clamped to 0", mc.clamped)
    if args.format == "json":
        _emit(args, _dumps({"trials": trials, "seed": seed, "clamped": mc.clamped,
                            "rejected": mc.rejected, "devices": mc.rows()}))
    else:
        _emit(args, _csv(["device", "lb", "empirical", "stderr", "gap"],
                         [(r["device"], repr(r["lb"]), repr(r["empirical"]), repr(r["stderr"]),
                           repr(r["gap"])) for r in mc.rows()]))
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        values = tuple(float(v) for v in args.values.split(",") if v.strip())
    except ValueError as exc:
        raise UsageError(f"--values: {exc}") from exc
    snaps = args.snapshots or (FULL_SNAPSHOTS if args.paper_scale else DESK_SNAPSHOTS)
    base = _scenario(args) if args.scenario is not None else None
    fixed = {}
    if base is not None:
        # scenario file supplies the fixed system parameters of the sweep
        fixed = dict(K=base.K, M=base.M, L=base.L, energy=float(base.energies[0]),
                     rate_req=float(base.rate_reqs[0]), epsilon=float(base.epsilons[0]))
    try:
        spec = SweepSpec(axis=args.axis, values=values, snapshots=snaps, receiver=args.receiver,
                         algorithms=tuple(a.strip() for a in args.algorithms.split(",")),
                         base_seed=0 if args.seed is None else args.seed, **fixed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = run_sweep(spec, threads=args.threads)
    _emit(args, summary_json(spec, rows) + "\n" if args.format == "json" else rows_to_csv(rows))
    return EXIT_OK


def cmd_gp_solve(args) -> int:
    try:
        prob = gp.load(args.problem)
    except OSError as exc:
        raise UsageError(f"cannot read {args.problem}: {exc}") from exc
    except gp.GpParseError as exc:
        raise UsageError(f"{args.problem}: {exc}") from exc
    sol = gp.solve(prob, tol=args.tol)
    out = {"status": sol.status, "objective_value": sol.objective_value,
           "objective": math.exp(sol.objective_value) if math.isfinite(sol.objective_value) else 0.0,
           "values": sol.values, "kkt_residual": sol.kkt_residual,
           "newton_steps": sol.newton_steps + sol.phase1_steps}
    _emit(args, _dumps(out))
    if sol.status == "infeasible":
        print("infeasible: no point satisfies all constraints", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "allocate": cmd_allocate, "compare": cmd_compare,
            "mc-verify": cmd_mc_verify, "sweep": cmd_sweep, "gp-solve": cmd_gp_solve}


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        level=logging.INFO if args.verbose else logging.WARNING)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except Infeasible as exc:
        if exc.payload is not None:
            try:
                _emit(args, exc.payload)
            except UsageError:
                pass
        print(str(exc), file=sys.stderr)
        return EXIT_INFEASIBLE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
