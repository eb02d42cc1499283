"""Joint pilot/payload power allocation by successive geometric programming.

Each outer round anchors the local bounds of :mod:`approx` at the SINR bounds of
the current powers, solves the resulting GP and re-anchors. The true objective
(weighted sum of rate lower bounds) never decreases between rounds.

Variable names in the GPs: ``chi{k}`` (SINR auxiliary), ``pp{k}`` (pilot
power), ``pd{k}`` (payload power), ``u{k}`` (ZF lift of ``1 + alpha_k K pp_k``)
and ``phi`` (feasibility margin).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import approx
from .chanmodel import mmse_stats
from .fbl import a_coeff, rate_from_a, sinr_lb_mrc, sinr_lb_zf, sinr_threshold
from .gp import GpProblem, Monomial, Posynomial, const, solve, var
from .scenario import Scenario

log = logging.getLogger(__name__)

RECEIVERS = ("mrc", "zf")
BASELINES = ("upper_bound", "conventional", "fixed_pilot")
ZF_EXPANSION_MAX_K = 12
# per-factor condensation is tighter than condensing the whole product and
# converges in 2-3 outer iterations instead of up to ~15
ZF_FORMS = ("per_factor", "lifted", "expanded")
ZF_DEFAULT_FORM = "per_factor"
GP_TOL = 1e-9
PHI_TOL = 1e-4


class AllocationError(RuntimeError):
    """A GP solve failed inside the allocation loop."""


class CapacityError(ValueError):
    """Problem too large for the requested exact formulation."""


@dataclass
class PowerAllocation:
    p_pilot: np.ndarray
    p_data: np.ndarray
    chi: np.ndarray

    def to_dict(self) -> dict:
        return {"p_pilot": self.p_pilot.tolist(), "p_data": self.p_data.tolist(),
                "chi": self.chi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PowerAllocation":
        return cls(np.asarray(d["p_pilot"], float), np.asarray(d["p_data"], float),
                   np.asarray(d.get("chi", np.zeros(len(d["p_pilot"]))), float))


@dataclass
class IterationTrace:
    objective: list[float] = field(default_factory=list)
    anchors: list[list[float]] = field(default_factory=list)
    gp_status: list[str] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)

    def record(self, obj, anchors, status, wall):
        self.objective.append(float(obj))
        self.anchors.append([float(v) for v in anchors])
        self.gp_status.append(status)
        self.wall_time.append(float(wall))

    @property
    def iterations(self) -> int:
        return max(len(self.objective) - 1, 0)

    def is_monotone(self, rel_slack: float = 1e-9) -> bool:
        obj = self.objective
        return all(b >= a - rel_slack * abs(a) for a, b in zip(obj, obj[1:]))


@dataclass
class AllocationResult:
    receiver: str
    mode: str                      # proposed | upper_bound | conventional | fixed_pilot
    status: str                    # converged | infeasible | max-iter
    phi: float
    allocation: PowerAllocation | None = None
    sinr_lb: np.ndarray | None = None
    rate_lb: np.ndarray | None = None
    weighted_sum: float = 0.0      # sum w R_hat with the finite-blocklength penalty
    shannon_sum: float = 0.0       # same powers scored without the penalty
    violations: int = 0            # devices whose rate bound falls short of the target
    trace: IterationTrace = field(default_factory=IterationTrace)

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()
        return {
            "receiver": self.receiver, "mode": self.mode, "status": self.status,
            "phi": _finite_or_str(self.phi),
            "allocation": None if self.allocation is None else self.allocation.to_dict(),
            "sinr_lb": arr(self.sinr_lb), "rate_lb": arr(self.rate_lb),
            "weighted_sum": self.weighted_sum, "shannon_sum": self.shannon_sum,
            "violations": self.violations, "trace": asdict(self.trace),
        }


def _finite_or_str(x: float):
    return x if math.isfinite(x) else str(x)


# --- problem data ------------------------------------------------------------

@dataclass(frozen=True)
class _Setup:
    sc: Scenario
    receiver: str
    a: np.ndarray              # penalty coefficients (0 in Shannon mode)
    threshold: np.ndarray      # minimum SINR meeting the rate target
    chi_floor: np.ndarray      # lower bound on chi actually imposed
    fixed_pilot: np.ndarray | None

    @property
    def K(self) -> int:
        return self.sc.K


def _setup(sc: Scenario, receiver: str, penalty: bool, fixed_pilot: bool) -> _Setup:
    if receiver not in RECEIVERS:
        raise ValueError(f"receiver must be one of {RECEIVERS}, got {receiver!r}")
    sc.validate()
    a = a_coeff(sc.epsilons, sc.L, sc.K) if penalty else np.zeros(sc.K)
    a = np.atleast_1d(np.asarray(a, float))
    th = sinr_threshold(sc.rate_reqs, sc.beta, a)
    # the log majorant of the dispersion term only holds above a fixed SINR
    floor = np.where(a > 0, np.maximum(th, approx.MAJORANT_MIN_SINR), th)
    pp = sc.energies / sc.L if fixed_pilot else None
    return _Setup(sc, receiver, a, th, floor, pp)


def sinr_bounds(sc: Scenario, receiver: str, p_pilot, p_data) -> np.ndarray:
    stats = mmse_stats(sc.alphas, sc.K, p_pilot)
    if receiver == "mrc":
        return sinr_lb_mrc(p_data, stats, sc.M)
    return sinr_lb_zf(p_data, stats, sc.M, sc.K)


def _pilot_terms(st: _Setup) -> list[Monomial]:
    if st.fixed_pilot is not None:
        return [const(v) for v in st.fixed_pilot]
    return [var(f"pp{k}") for k in range(st.K)]


def _energy_constraints(prob: GpProblem, st: _Setup, pp: list[Monomial]) -> None:
    sc = st.sc
    K, Ld = sc.K, sc.L - sc.K
    for k in range(K):
        pd = var(f"pd{k}")
        if st.fixed_pilot is not None:
            prob.add(Ld * pd, sc.energies[k] - K * st.fixed_pilot[k], f"energy{k}")
        else:
            prob.add(K * pp[k] + Ld * pd, sc.energies[k], f"energy{k}")


def _mrc_sinr_constraint(st: _Setup, k: int, chi: Monomial, pp: list[Monomial]):
    """``chi_k`` times the cleared denominator of the MRC bound, and the cleared numerator."""
    sc = st.sc
    al, K, M = sc.alphas, sc.K, sc.M
    pd = [var(f"pd{i}") for i in range(K)]
    terms = [al[i] * al[k] * K * chi * pp[k] * pd[i] for i in range(K) if i != k]
    terms += [al[i] * chi * pd[i] for i in range(K)]
    terms += [al[k] * K * chi * pp[k], chi]
    rhs = (M - 1) * K * al[k] ** 2 * pp[k] * pd[k]
    return Posynomial(terms), rhs


def _zf_sinr_constraint(st: _Setup, k: int, chi: Monomial, pp: list[Monomial],
                        cond: approx.MonomialBoundCoeffs, form: str):
    """Cleared ZF bound as a posynomial <= monomial constraint.

    ``form="per_factor"`` condenses each ``1 + x_i`` separately (see
    :func:`_zf_per_factor`). The other forms clear all denominators and condense
    the product of ``1 + alpha_i K pp_i`` on the right. ``form="lifted"`` writes
    each factor ``1 + x_j`` on the left as a variable ``u_j >= 1 + x_j`` (exact,
    since the left side increases in every factor); ``form="expanded"``
    multiplies the posynomials out term by term.
    """
    sc = st.sc
    al, K, M = sc.alphas, sc.K, sc.M
    pd = [var(f"pd{i}") for i in range(K)]
    x = [al[j] * K * pp[j] for j in range(K)]
    if form == "per_factor":
        return _zf_per_factor(st, k, chi, pd, x, cond)
    if form == "lifted":
        fac = [var(f"u{j}") for j in range(K)]
    elif form == "expanded":
        if K > ZF_EXPANSION_MAX_K:
            raise CapacityError(
                f"expanded ZF constraint limited to K <= {ZF_EXPANSION_MAX_K}, got K={K}")
        fac = [Posynomial([const(1.0), x[j]]) for j in range(K)]
    else:
        raise ValueError(f"unknown ZF form {form!r}")

    def prod(items):
        out = const(1.0)
        for it in items:
            out = out * it
        return out

    terms = [al[i] * pd[i] * prod(fac[j] for j in range(K) if j != i) for i in range(K)]
    inner = terms[0]
    for t in terms[1:]:
        inner = inner + t
    inner = inner + prod(fac)
    lhs = chi * fac[k] * inner
    monomial_bound = Monomial(math.exp(cond.log_lam))
    for j in range(K):
        monomial_bound = monomial_bound * x[j] ** cond.tau[j]
    rhs = (M - K) * al[k] * x[k] * pd[k] * monomial_bound
    return lhs, rhs


def _zf_per_factor(st: _Setup, k: int, chi: Monomial, pd, x, cond: approx.MonomialBoundCoeffs):
    """ZF bound with each ``1 / (1 + x_i)`` condensed only inside its own error term.

    ``chi (1 + x_k) [sum_i alpha_i pd_i / (lam_i x_i^tau_i) + 1] <= (M - K) alpha_k x_k pd_k``.
    Every factor is bounded separately, so the signal, noise and other error
    terms stay exact and the approximation is never looser than condensing
    the whole product.
    """
    sc = st.sc
    al, K, M = sc.alphas, sc.K, sc.M
    xb = cond.anchor
    inner = const(1.0)
    for i in range(K):
        log_lam_i = math.log1p(xb[i]) - cond.tau[i] * math.log(xb[i])
        inner = inner + al[i] * math.exp(-log_lam_i) * pd[i] * x[i] ** -float(cond.tau[i])
    lhs = chi * (Posynomial([const(1.0), x[k]]) * inner)
    rhs = (M - K) * al[k] * x[k] * pd[k]
    return lhs, rhs


def _add_lift(prob: GpProblem, st: _Setup, pp: list[Monomial]) -> None:
    al, K = st.sc.alphas, st.K
    for j in range(K):
        u = var(f"u{j}")
        prob.add(Posynomial([const(1.0), al[j] * K * pp[j]]) / u, 1.0, f"lift{j}")


def _add_sinr_constraints(prob, st: _Setup, chis, pp, cond, zf_form) -> None:
    if st.receiver == "zf" and zf_form == "lifted":
        _add_lift(prob, st, pp)
    for k, chi in enumerate(chis):
        if chi is None:
            continue
        if st.receiver == "mrc":
            lhs, rhs = _mrc_sinr_constraint(st, k, chi, pp)
        else:
            lhs, rhs = _zf_sinr_constraint(st, k, chi, pp, cond, zf_form)
        prob.add(lhs, rhs, f"sinr{k}")


# --- GP builders -------------------------------------------------------------

def build_gp_mrc(st: _Setup, w_hat) -> GpProblem:
    """One successive-approximation GP for the MRC receiver."""
    return _build_main(st, w_hat, None, "lifted")


def build_gp_zf(st: _Setup, w_hat, cond: approx.MonomialBoundCoeffs,
                form: str = ZF_DEFAULT_FORM) -> GpProblem:
    """One successive-approximation GP for the ZF receiver."""
    return _build_main(st, w_hat, cond, form)


def _build_main(st: _Setup, w_hat, cond, zf_form) -> GpProblem:
    prob = GpProblem()
    K = st.K
    chis = [var(f"chi{k}") for k in range(K)]
    pp = _pilot_terms(st)
    obj = const(1.0)
    for k in range(K):
        obj = obj * chis[k] ** float(w_hat[k])
    prob.maximize(obj)
    for k in range(K):
        prob.declare(f"chi{k}")
        if st.fixed_pilot is None:
            prob.declare(f"pp{k}")
        prob.declare(f"pd{k}")
    _add_sinr_constraints(prob, st, chis, pp, cond, zf_form)
    for k in range(K):
        if st.chi_floor[k] > 0:
            prob.add(st.chi_floor[k] * chis[k] ** -1, 1.0, f"threshold{k}")
    _energy_constraints(prob, st, pp)
    return prob


def build_feasibility_gp(st: _Setup, cond: approx.MonomialBoundCoeffs | None = None,
                         zf_form: str = ZF_DEFAULT_FORM) -> GpProblem:
    """maximize ``phi`` s.t. every SINR bound is at least ``phi`` times its floor."""
    prob = GpProblem()
    phi = var("phi")
    prob.maximize(phi)
    pp = _pilot_terms(st)
    chis = [phi * float(f) if f > 0 else None for f in st.chi_floor]
    _add_sinr_constraints(prob, st, chis, pp, cond, zf_form)
    _energy_constraints(prob, st, pp)
    return prob


# --- helpers -----------------------------------------------------------------

def _powers_from(st: _Setup, values) -> tuple[np.ndarray, np.ndarray]:
    K = st.K
    pd = np.array([values[f"pd{k}"] for k in range(K)])
    if st.fixed_pilot is not None:
        return st.fixed_pilot.copy(), pd
    return np.array([values[f"pp{k}"] for k in range(K)]), pd


def _warm_start(st: _Setup, pp, pd, phi=None, with_chi: bool = False) -> dict[str, float]:
    """Strictly interior start: powers pulled inside the energy budgets, lifts and
    SINR auxiliaries given a small margin."""
    pp = pp if st.fixed_pilot is not None else pp * (1 - 1e-8)
    pd = pd * (1 - 1e-8)
    x0 = {}
    al, K = st.sc.alphas, st.K
    for k in range(K):
        x0[f"pp{k}"] = pp[k]
        x0[f"pd{k}"] = pd[k]
        x0[f"u{k}"] = (1.0 + al[k] * K * pp[k]) * (1.0 + 1e-9)
    if with_chi:
        gamma = sinr_bounds(st.sc, st.receiver, pp, pd)
        for k in range(K):
            x0[f"chi{k}"] = gamma[k] * (1 - 1e-6)
    if phi is not None:
        x0["phi"] = phi
    return x0


def _uniform_split(sc: Scenario, st: _Setup) -> tuple[np.ndarray, np.ndarray]:
    pp = st.fixed_pilot if st.fixed_pilot is not None else sc.energies / sc.L
    return pp.copy(), sc.energies / sc.L


def _objective(st: _Setup, gamma) -> float:
    return float(np.sum(st.sc.weights * rate_from_a(gamma, st.sc.beta, st.a)))


def _condense(st: _Setup, pp) -> approx.MonomialBoundCoeffs:
    return approx.product_monomial_minorant(st.sc.alphas * st.K * pp)


def feasibility(sc: Scenario, receiver: str, *, penalty: bool = True,
                fixed_pilot: bool = False, zf_form: str = ZF_DEFAULT_FORM,
                st: _Setup | None = None):
    """Largest common margin ``phi`` over the SINR floors, with its powers.

    Returns ``(phi, p_pilot, p_data)``; ``phi >= 1`` means every rate target
    is reachable within the energy budgets. For ZF the product bound is
    re-anchored at the latest pilot powers until ``phi`` settles.
    """
    st = st or _setup(sc, receiver, penalty, fixed_pilot)
    if np.any(sc.energies <= 0):
        return 0.0, None, None
    if st.fixed_pilot is not None and np.any(sc.energies - sc.K * st.fixed_pilot <= 0):
        return 0.0, None, None
    pp, pd = _uniform_split(sc, st)
    if not np.any(st.chi_floor > 0):
        return math.inf, pp, pd
    phi_prev = None
    for _ in range(50):
        cond = _condense(st, pp) if receiver == "zf" else None
        prob = build_feasibility_gp(st, cond, zf_form)
        sol = solve(prob, tol=GP_TOL, x0=_warm_start(st, pp, pd))
        if sol.status == "infeasible":
            # no positive phi fits; cannot happen for positive budgets, kept as a guard
            return 0.0, pp, pd
        if sol.status not in ("optimal",):
            raise AllocationError(f"feasibility GP returned {sol.status}")
        phi = sol.values["phi"]
        pp, pd = _powers_from(st, sol.values)
        if receiver == "mrc" or st.fixed_pilot is not None:
            return phi, pp, pd
        if phi_prev is not None and abs(phi - phi_prev) <= PHI_TOL * abs(phi):
            return phi, pp, pd
        phi_prev = phi
    return phi, pp, pd


# --- main loop ---------------------------------------------------------------

def optimize(sc: Scenario, receiver: str, xi: float = 1e-4, max_outer: int = 50, *,
             penalty: bool = True, fixed_pilot: bool = False,
             zf_form: str = ZF_DEFAULT_FORM, init: PowerAllocation | None = None) -> AllocationResult:
    """Successive GP approximation for the weighted sum of rate lower bounds.

    ``penalty=False`` drops the finite-blocklength term everywhere (Shannon
    mode); ``fixed_pilot=True`` freezes pilot powers at ``E / L``. ``init``
    replaces the feasibility search by a known feasible allocation.
    """
    mode = "upper_bound" if not penalty else ("fixed_pilot" if fixed_pilot else "proposed")
    st = _setup(sc, receiver, penalty, fixed_pilot)
    if init is not None:
        pp, pd = np.array(init.p_pilot, float), np.array(init.p_data, float)
        if st.fixed_pilot is not None:
            pp = st.fixed_pilot.copy()
        margin = sinr_bounds(sc, receiver, pp, pd) / np.where(st.chi_floor > 0, st.chi_floor, np.nan)
        phi = float(np.nanmin(margin)) if np.any(st.chi_floor > 0) else math.inf
        if not (phi >= 1.0 and np.all(sc.K * pp + (sc.L - sc.K) * pd <= sc.energies * (1 + 1e-12))):
            raise ValueError("initial allocation is not feasible for this problem")
    else:
        phi, pp, pd = feasibility(sc, receiver, st=st, zf_form=zf_form)
    if not phi >= 1.0:
        return AllocationResult(receiver, mode, "infeasible", phi)

    gamma = sinr_bounds(sc, receiver, pp, pd)
    obj = _objective(st, gamma)
    trace = IterationTrace()
    trace.record(obj, gamma, "init", 0.0)
    best = (obj, pp, pd, gamma)
    status = "max-iter"
    for it in range(max_outer):
        t0 = time.perf_counter()
        anchor = np.maximum(gamma, st.chi_floor)
        weights = approx.surrogate_weights(sc.weights, st.a, anchor, sc.beta)
        if receiver == "mrc":
            prob = build_gp_mrc(st, weights.w_hat)
        else:
            prob = build_gp_zf(st, weights.w_hat, _condense(st, pp), zf_form)
        sol = solve(prob, tol=GP_TOL, x0=_warm_start(st, pp, pd, with_chi=True))
        if sol.status not in ("optimal",):
            raise AllocationError(f"{receiver} GP at outer iteration {it + 1}: {sol.status}")
        pp, pd = _powers_from(st, sol.values)
        gamma = sinr_bounds(sc, receiver, pp, pd)
        new_obj = _objective(st, gamma)
        trace.record(new_obj, anchor, sol.status, time.perf_counter() - t0)
        if new_obj > best[0]:
            best = (new_obj, pp, pd, gamma)
        if abs(new_obj - obj) <= xi * max(abs(new_obj), 1e-300):
            status = "converged"
            break
        obj = new_obj

    obj, pp, pd, gamma = best
    return _score(st, mode, status, phi, pp, pd, gamma, trace)


def _score(st: _Setup, mode, status, phi, pp, pd, gamma, trace) -> AllocationResult:
    sc = st.sc
    a_full = np.atleast_1d(a_coeff(sc.epsilons, sc.L, sc.K))
    rates = rate_from_a(gamma, sc.beta, a_full)
    shannon = rate_from_a(gamma, sc.beta, 0.0)
    short = rates < sc.rate_reqs * (1 - 1e-9) - 1e-12
    return AllocationResult(
        receiver=st.receiver, mode=mode, status=status, phi=phi,
        allocation=PowerAllocation(pp, pd, gamma.copy()),
        sinr_lb=gamma, rate_lb=rates,
        weighted_sum=float(np.sum(sc.weights * np.where(short, 0.0, rates))),
        shannon_sum=float(np.sum(sc.weights * shannon)),
        violations=int(short.sum()), trace=trace)


def run_baseline(sc: Scenario, receiver: str, kind: str, **kw) -> AllocationResult:
    """Reference schemes: Shannon-rate optimum, its finite-blocklength rescoring, fixed pilots."""
    if kind == "upper_bound":
        return optimize(sc, receiver, penalty=False, **kw)
    if kind == "fixed_pilot":
        return optimize(sc, receiver, fixed_pilot=True, **kw)
    if kind == "conventional":
        return as_conventional(optimize(sc, receiver, penalty=False, **kw))
    raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINES}")


def as_conventional(ub: AllocationResult) -> AllocationResult:
    """Upper-bound powers scored with the finite-blocklength bound.

    ``weighted_sum`` of every result already applies the penalty and zeroes
    devices that miss their target, so only the label changes.
    """
    return replace(ub, mode="conventional")


ALGORITHMS = ("proposed",) + BASELINES


def compare(sc: Scenario, receiver: str, algorithms=ALGORITHMS, **kw) -> dict[str, AllocationResult]:
    """Run several schemes on one scenario.

    Both the proposed method and the Shannon-rate optimization are local; when
    the latter ends below the former in the Shannon metric it is continued from
    the proposed solution, which is feasible for it, so the reported upper
    bound dominates.
    """
    out: dict[str, AllocationResult] = {}
    need_ub = any(a in ("upper_bound", "conventional") for a in algorithms)
    prop = optimize(sc, receiver, **kw) if ("proposed" in algorithms or need_ub) else None
    if "proposed" in algorithms:
        out["proposed"] = prop
    if need_ub:
        ub = optimize(sc, receiver, penalty=False, **kw)
        if prop is not None and prop.feasible and (not ub.feasible or ub.shannon_sum < prop.shannon_sum):
            ub2 = optimize(sc, receiver, penalty=False, init=prop.allocation, **kw)
            if not ub.feasible or ub2.shannon_sum > ub.shannon_sum:
                ub = ub2
        if "upper_bound" in algorithms:
            out["upper_bound"] = ub
        if "conventional" in algorithms:
            out["conventional"] = as_conventional(ub)
    if "fixed_pilot" in algorithms:
        out["fixed_pilot"] = optimize(sc, receiver, fixed_pilot=True, **kw)
    return {a: out[a] for a in algorithms}


def run_algorithm(sc: Scenario, receiver: str, name: str, **kw) -> AllocationResult:
    if name == "proposed":
        return optimize(sc, receiver, **kw)
    return run_baseline(sc, receiver, name, **kw)


def score_allocation(sc: Scenario, receiver: str, allocation: PowerAllocation) -> AllocationResult:
    """Rate bounds and weighted sums of an externally supplied allocation."""
    st = _setup(sc, receiver, True, False)
    gamma = sinr_bounds(sc, receiver, allocation.p_pilot, allocation.p_data)
    return _score(st, "external", "converged", math.nan, allocation.p_pilot,
                  allocation.p_data, gamma, IterationTrace())
