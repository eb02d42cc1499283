"""Acceptance suite: one test per criterion, each reporting a single PASS/FAIL line.

The lines are printed immediately (visible with ``-s``) and repeated in the
terminal summary.
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from mimo_urllc import approx, gp
from mimo_urllc.allocator import compare, optimize
from mimo_urllc.chanmodel import complex_normal, make_rng
from mimo_urllc.gp.solver import log_transform
from mimo_urllc.mc import McConfig, empirical_ergodic_rate
from mimo_urllc.scenario import defaults_path, load_scenario, random_scenario
from mimo_urllc.sweep import sweep_score
from oracles import brute_force_allocation

THREADS = 4


def report(n: int, ok: bool, detail: str, started: float) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f} s) {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def feasible_instances(receiver, count, first_seed, **kw):
    """Optimized results for the first ``count`` random drops that admit the targets."""
    out, seed = [], first_seed
    while len(out) < count:
        res = optimize(random_scenario(seed, **kw), receiver)
        if res.feasible:
            out.append(res)
        seed += 1
    return out


# 1 -------------------------------------------------------------------------
def test_lower_bound_tightness():
    t0 = time.perf_counter()
    base = load_scenario(defaults_path())
    failures, mrc_gap, zf_gap_100 = [], {}, None
    for rx in ("mrc", "zf"):
        for M in (50, 100, 200):
            sc = base.with_system(M=M)
            res = optimize(sc, rx)
            if not res.feasible:
                failures.append(f"{rx} M={M} infeasible")
                continue
            mc = empirical_ergodic_rate(sc, res.allocation.p_pilot, res.allocation.p_data,
                                        McConfig(2000, sc.seed, rx, THREADS))
            below = mc.mean_rate < mc.rate_lb - 2 * mc.stderr
            if below.any():
                failures.append(f"{rx} M={M} devices {np.flatnonzero(below).tolist()} below bound")
            if rx == "mrc":
                mrc_gap[M] = float(mc.relative_gap.mean())
            elif M == 100:
                zf_gap_100 = float(mc.relative_gap.max())
    if zf_gap_100 is None or not zf_gap_100 < 0.02:
        failures.append(f"ZF M=100 gap {zf_gap_100}")
    gaps = [mrc_gap.get(M, math.nan) for M in (50, 100, 200)]
    if not (gaps[0] > gaps[1] > gaps[2]):
        failures.append(f"MRC gaps not decreasing {gaps}")
    elapsed = time.perf_counter() - t0
    if elapsed > 180:
        failures.append("runtime over 3 min")
    report(1, not failures,
           f"ZF max gap at M=100 {zf_gap_100:.4f}; MRC mean gap by M {np.round(gaps, 4).tolist()} "
           + "; ".join(failures), t0)


# 2 -------------------------------------------------------------------------
def test_monotone_convergence():
    t0 = time.perf_counter()
    failures, iters = [], []
    for rx in ("mrc", "zf"):
        for res in feasible_instances(rx, 50, 1000):
            iters.append(res.trace.iterations)
            if not res.trace.is_monotone(1e-9):
                failures.append(f"{rx} non-monotone trace")
            if res.status != "converged" or res.trace.iterations > 10:
                failures.append(f"{rx} {res.status} after {res.trace.iterations}")
    if time.perf_counter() - t0 > 300:
        failures.append("runtime over 5 min")
    report(2, not failures, f"100 instances, outer iterations max {max(iters)} "
           f"median {int(np.median(iters))}; " + "; ".join(failures[:5]), t0)


# 3 -------------------------------------------------------------------------
def test_oracle_equivalence():
    t0 = time.perf_counter()
    failures, worst = [], math.inf
    for rx in ("mrc", "zf"):
        found, seed = 0, 2000
        while found < 20:
            sc = random_scenario(seed, K=2)
            seed += 1
            ref, _, _ = brute_force_allocation(rx, sc.alphas, sc.weights, sc.energies,
                                               sc.rate_reqs, sc.epsilons, sc.M, sc.L)
            res = optimize(sc, rx)
            if not math.isfinite(ref):
                if res.feasible:
                    # the algorithm found a point the grid missed; still counts as agreement
                    found += 1
                continue
            found += 1
            if not res.feasible:
                failures.append(f"{rx} seed {seed - 1}: oracle feasible, algorithm not")
                continue
            rel = (res.weighted_sum - ref) / ref
            worst = min(worst, rel)
            if rel < -0.01:
                failures.append(f"{rx} seed {seed - 1}: {res.weighted_sum:.5f} vs {ref:.5f}")
    if time.perf_counter() - t0 > 300:
        failures.append("runtime over 5 min")
    report(3, not failures, f"worst relative difference vs grid {worst:+.4%}; "
           + "; ".join(failures[:5]), t0)


# 4 -------------------------------------------------------------------------
def test_bound_inequalities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    n, slack, bad = 2000, 1e-9, {}
    # concavity of G: midpoint test
    x, y = 10 ** rng.uniform(-3, 3, n), 10 ** rng.uniform(-3, 3, n)
    bad["concavity"] = int(np.sum(approx.G((x + y) / 2) < (approx.G(x) + approx.G(y)) / 2 - 1e-12))
    # log majorant of G above the threshold, tangent at the anchor
    anc = approx.MAJORANT_MIN_SINR + 10 ** rng.uniform(-4, 3, n)
    pts = approx.MAJORANT_MIN_SINR + 10 ** rng.uniform(-4, 3, n)
    c3 = approx.dispersion_log_majorant(anc)
    bad["majorant"] = int(np.sum(c3.rho * np.log(pts) + c3.eta < approx.G(pts) - slack))
    bad["majorant tangency"] = int(np.sum(np.abs(c3(anc) - approx.G(anc)) > slack)
                                   + np.sum(np.abs(c3.rho / anc - approx.G_prime(anc))
                                            > 1e-8 * approx.G_prime(anc)))
    # log minorant of ln(1+x)
    anc4, pts4 = 10 ** rng.uniform(-3, 3, n), 10 ** rng.uniform(-3, 3, n)
    c4 = approx.log1p_log_minorant(anc4)
    bad["minorant"] = int(np.sum(c4.rho * np.log(pts4) + c4.eta > np.log1p(pts4) + slack))
    bad["minorant tangency"] = int(np.sum(np.abs(c4(anc4) - np.log1p(anc4)) > slack))
    # monomial minorant of prod(1 + x), with log-gradient match at the anchor
    viol = grad = 0
    for _ in range(1000):
        K = int(rng.integers(2, 11))
        xb, xx = 10 ** rng.uniform(-2, 2, K), 10 ** rng.uniform(-2, 2, K)
        c = approx.product_monomial_minorant(xb)
        viol += c(xx) > np.prod(1 + xx) * (1 + slack)
        viol += abs(c(xb) / np.prod(1 + xb) - 1) > slack
        h = 1e-6
        j = int(rng.integers(K))
        e = np.zeros(K)
        e[j] = h
        fd = (np.log(c(xb * np.exp(e))) - np.log(c(xb * np.exp(-e)))) / (2 * h)
        grad += abs(fd - xb[j] / (1 + xb[j])) > 1e-8
    bad["monomial minorant"], bad["monomial gradient"] = int(viol), int(grad)
    total = sum(bad.values())
    ok = total == 0 and time.perf_counter() - t0 < 30
    report(4, ok, f"{n} samples per bound, violations {bad}", t0)


# 5 -------------------------------------------------------------------------
def test_wishart_identities():
    t0 = time.perf_counter()
    details, ok = [], True
    K, draws = 10, 10_000
    for M in (50, 100):
        rng = make_rng(5, M)
        sigma = 0.37
        inv_norm = np.empty(draws)
        trace = np.empty(draws)
        for lo in range(0, draws, 1000):
            h = complex_normal(rng, (1000, M), sigma)
            inv_norm[lo:lo + 1000] = 1.0 / np.sum(np.abs(h) ** 2, axis=1)
            Hn = complex_normal(rng, (1000, M, K))
            gram = np.conj(np.swapaxes(Hn, 1, 2)) @ Hn
            trace[lo:lo + 1000] = np.trace(np.linalg.inv(gram), axis1=1, axis2=2).real
        r1 = inv_norm.mean() * (M - 1) * sigma
        r2 = trace.mean() * (M - K) / K
        ok &= abs(r1 - 1) < 0.02 and abs(r2 - 1) < 0.02
        details.append(f"M={M}: {r1:.4f}, {r2:.4f}")
    ok &= time.perf_counter() - t0 < 60
    report(5, ok, "ratios to closed form " + "; ".join(details), t0)


# 6 -------------------------------------------------------------------------
def test_gp_solver_suite():
    t0 = time.perf_counter()
    x, y, z = gp.var("x"), gp.var("y"), gp.var("z")
    problems = []
    p = gp.GpProblem(); p.maximize(x * y); p.add(x + y, 2.0)
    problems.append((p, {"x": 1.0, "y": 1.0}))
    p = gp.GpProblem(); p.maximize(x * y * z); p.add(x * y + y * z + x * z, 3.0)
    problems.append((p, {"x": 1.0, "y": 1.0, "z": 1.0}))
    p = gp.GpProblem(); p.maximize(x ** 0.5 * y ** 0.5); p.add(x + 4 * y, 8.0)
    problems.append((p, {"x": 4.0, "y": 1.0}))
    errs = []
    for prob, want in problems:
        sol = gp.solve(prob)
        errs.append(max(abs(sol.values[k] / v - 1) for k, v in want.items()))
        again = gp.solve(prob)
        if not np.array_equal(sol.y, again.y):
            errs.append(math.inf)
    exact = max(errs) < 1e-6
    # finite-difference check of constraint gradients and Hessians
    rng = np.random.default_rng(6)
    prog = log_transform(problems[1][0])
    fd_err = 0.0
    for _ in range(20):
        y0 = rng.normal(size=prog.n)
        _, G, _ = prog.derivatives(y0)
        for j in range(prog.n):
            e = np.zeros(prog.n)
            e[j] = 1e-6
            num = (np.asarray(prog.constraint_values(y0 + e), float)
                   - np.asarray(prog.constraint_values(y0 - e), float)) / 2e-6
            fd_err = max(fd_err, float(np.max(np.abs(G[:, j] - num))))
            numH = (prog.derivatives(y0 + e)[1][0] - prog.derivatives(y0 - e)[1][0]) / 2e-6
            fd_err = max(fd_err, float(np.max(np.abs(prog.constraint_hessian(y0, 0)[:, j] - numH))))
    ok = exact and fd_err < 1e-6
    report(6, ok, f"toy max relative error {max(errs):.1e}, finite-difference error {fd_err:.1e}, "
           "re-runs bit-identical" if ok else f"errors {errs}, fd {fd_err}", t0)


# 7 -------------------------------------------------------------------------
def _benchmarks(snapshots=20, energies=(0.5, 1.0)):
    out = {}
    for rx in ("mrc", "zf"):
        for E in energies:
            out[rx, E] = [compare(random_scenario(7000 + s, energy=E), rx) for s in range(snapshots)]
    return out


def test_benchmark_orderings():
    t0 = time.perf_counter()
    runs = _benchmarks()
    failures = []
    # (a) upper bound dominates in the Shannon metric
    for (rx, E), rs in runs.items():
        for s, r in enumerate(rs):
            p, u = r["proposed"], r["upper_bound"]
            if p.feasible and sweep_score(u) < p.shannon_sum * (1 - 1e-9):
                failures.append(f"(a) {rx} E={E} snapshot {s}")
    # (b) proposed beats fixed pilots at low energy, by more for ZF than for MRC
    margin = {}
    for rx in ("mrc", "zf"):
        diffs = [sweep_score(r["proposed"]) - sweep_score(r["fixed_pilot"])
                 for E in (0.5, 1.0) for r in runs[rx, E]]
        margin[rx] = float(np.mean(diffs))
    if not margin["zf"] >= 0:
        failures.append(f"(b) ZF margin {margin['zf']:.4f}")
    if not margin["zf"] > margin["mrc"]:
        failures.append(f"(b) ZF margin {margin['zf']:.4f} <= MRC {margin['mrc']:.4f}")
    # (c) conventional misses targets more often than proposed at small energy
    freq = {}
    for rx in ("mrc", "zf"):
        for alg in ("conventional", "proposed"):
            rs = [r[alg] for E in (0.5, 1.0) for r in runs[rx, E]]
            # only instances where the scheme produced powers are scored per device
            n = sum(r.violations for r in rs if r.feasible)
            freq[rx, alg] = n / max(1, 10 * sum(r.feasible for r in rs))
        if not freq[rx, "conventional"] > freq[rx, "proposed"]:
            failures.append(f"(c) {rx} conventional {freq[rx, 'conventional']:.3f} "
                            f"<= proposed {freq[rx, 'proposed']:.3f}")
    if time.perf_counter() - t0 > 600:
        failures.append("runtime over 10 min")
    report(7, not failures,
           f"margins vs fixed pilots ZF {margin['zf']:.4f} MRC {margin['mrc']:.4f}; violation "
           f"frequency conventional/proposed ZF {freq['zf', 'conventional']:.3f}/"
           f"{freq['zf', 'proposed']:.3f} MRC {freq['mrc', 'conventional']:.3f}/"
           f"{freq['mrc', 'proposed']:.3f}; " + "; ".join(failures[:5]), t0)


# 8 -------------------------------------------------------------------------
def test_blocklength_trend():
    t0 = time.perf_counter()
    gaps, failures = {}, []
    for rx in ("mrc", "zf"):
        for L in (50, 150):
            rel = []
            for s in range(20):
                r = compare(random_scenario(8000 + s, L=L), rx, ("proposed", "upper_bound"))
                ub = sweep_score(r["upper_bound"])
                if ub > 0:
                    rel.append((ub - sweep_score(r["proposed"])) / ub)
            gaps[rx, L] = float(np.mean(rel))
        if not gaps[rx, 150] < gaps[rx, 50]:
            failures.append(f"{rx}: {gaps[rx, 150]:.4f} >= {gaps[rx, 50]:.4f}")
    report(8, not failures, "mean relative gap to upper bound L=50 -> L=150: "
           + ", ".join(f"{rx} {gaps[rx, 50]:.4f} -> {gaps[rx, 150]:.4f}" for rx in ("mrc", "zf"))
           + "; " + "; ".join(failures), t0)
