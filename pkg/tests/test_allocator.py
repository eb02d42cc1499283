import json
import math

import numpy as np
import pytest

from mimo_urllc import allocator as al
from mimo_urllc.approx import product_monomial_minorant
from mimo_urllc.fbl import a_coeff
from mimo_urllc.gp import solve
from mimo_urllc.scenario import random_scenario
from oracles import brute_force_allocation, sinr_bound


def _sc(seed=1, K=4, M=64, **kw):
    return random_scenario(seed, K=K, M=M, **kw)


def _point(sc, rng):
    pp = rng.uniform(0.02, 0.1, sc.K)
    pd = rng.uniform(0.005, 0.02, sc.K)
    return pp, pd


@pytest.mark.parametrize("rx", al.RECEIVERS)
def test_sinr_constraint_equals_bound_at_anchor(rx):
    """lhs/rhs of each SINR constraint is chi divided by the SINR bound (exact at the anchor)."""
    rng = np.random.default_rng(0)
    sc = _sc()
    st = al._setup(sc, rx, True, False)
    pp, pd = _point(sc, rng)
    gamma = sinr_bound(rx, sc.alphas, pp, pd, sc.M)
    chi = rng.uniform(0.5, 2.0, sc.K)
    cond = product_monomial_minorant(sc.alphas * sc.K * pp)
    vals = {f"chi{k}": chi[k] for k in range(sc.K)}
    vals.update({f"pp{k}": pp[k] for k in range(sc.K)})
    vals.update({f"pd{k}": pd[k] for k in range(sc.K)})
    vals.update({f"u{k}": 1 + sc.alphas[k] * sc.K * pp[k] for k in range(sc.K)})
    forms = list(al.ZF_FORMS) if rx == "zf" else [None]
    for form in forms:
        prob = (al.build_gp_zf(st, np.ones(sc.K), cond, form) if rx == "zf"
                else al.build_gp_mrc(st, np.ones(sc.K)))
        cons = {c.name: c for c in prob.constraints}
        for k in range(sc.K):
            assert cons[f"sinr{k}"].ratio(vals) == pytest.approx(chi[k] / gamma[k], rel=1e-12)


@pytest.mark.parametrize("form", ["expanded", "per_factor"])
def test_zf_constraint_is_conservative_away_from_anchor(form):
    rng = np.random.default_rng(1)
    sc = _sc()
    st = al._setup(sc, "zf", True, False)
    pp0, _ = _point(sc, rng)
    cond = product_monomial_minorant(sc.alphas * sc.K * pp0)
    prob = al.build_gp_zf(st, np.ones(sc.K), cond, form)
    cons = {c.name: c for c in prob.constraints}
    for _ in range(20):
        pp, pd = _point(sc, rng)
        gamma = sinr_bound("zf", sc.alphas, pp, pd, sc.M)
        vals = {**{f"chi{k}": 1.0 for k in range(sc.K)}, **{f"pp{k}": pp[k] for k in range(sc.K)},
                **{f"pd{k}": pd[k] for k in range(sc.K)}}
        for k in range(sc.K):
            # monomial minorant on the right can only shrink the feasible set
            assert cons[f"sinr{k}"].ratio(vals) >= 1.0 / gamma[k] * (1 - 1e-12)


def test_term_counts_two_devices():
    sc = _sc(K=2, M=16)
    st = al._setup(sc, "mrc", True, False)
    cons = {c.name: c for c in al.build_gp_mrc(st, np.ones(2)).constraints}
    assert len(cons["sinr0"].lhs) == 5       # 1 cross + 2 error + pilot + noise
    assert len(cons["energy0"].lhs) == 2
    assert len(cons["threshold0"].lhs) == 1
    st = al._setup(sc, "zf", True, False)
    cond = product_monomial_minorant(np.ones(2))
    exp = {c.name: c for c in al.build_gp_zf(st, np.ones(2), cond, "expanded").constraints}
    # (1+x0)[pd0(1+x1) + pd1(1+x0) + (1+x0)(1+x1)]: 16 products, 3 coincide
    assert len(exp["sinr0"].lhs) == 13
    lift = {c.name: c for c in al.build_gp_zf(st, np.ones(2), cond, "lifted").constraints}
    assert len(lift["sinr0"].lhs) == 3
    assert len(lift["lift0"].lhs) == 2
    per = {c.name: c for c in al.build_gp_zf(st, np.ones(2), cond, "per_factor").constraints}
    assert len(per["sinr0"].lhs) == 6      # (1 + x0) times (2 error terms + noise)
    assert not any(name.startswith("lift") for name in per)


def test_per_factor_form_never_looser_than_product():
    sc = _sc(seed=3, K=3, M=32)
    st = al._setup(sc, "zf", True, False)
    pp = sc.energies / sc.L * 1.5
    cond = product_monomial_minorant(sc.alphas * sc.K * pp)
    w = np.array([0.3, 0.7, 0.5])
    x0 = al._warm_start(st, pp, pp, with_chi=True)
    per = solve(al.build_gp_zf(st, w, cond, "per_factor"), tol=1e-9, x0=x0)
    prod = solve(al.build_gp_zf(st, w, cond, "lifted"), tol=1e-9, x0=x0)
    assert per.objective_value >= prod.objective_value - 1e-7


def test_zf_forms_reach_same_allocation_quality():
    sc = random_scenario(1032)
    per = al.optimize(sc, "zf")
    prod = al.optimize(sc, "zf", zf_form="lifted")
    assert per.trace.iterations < prod.trace.iterations
    assert per.weighted_sum >= prod.weighted_sum * (1 - 1e-6)


def test_expanded_form_capacity_limit():
    sc = _sc(K=al.ZF_EXPANSION_MAX_K + 1, M=64)
    st = al._setup(sc, "zf", True, False)
    with pytest.raises(al.CapacityError):
        al.build_gp_zf(st, np.ones(sc.K), product_monomial_minorant(np.ones(sc.K)), "expanded")


def test_lifted_and_expanded_forms_solve_to_same_optimum():
    sc = _sc(seed=3, K=3, M=32)
    st = al._setup(sc, "zf", True, False)
    pp = sc.energies / sc.L
    cond = product_monomial_minorant(sc.alphas * sc.K * pp)
    w = np.array([0.3, 0.7, 0.5])
    x0 = al._warm_start(st, pp, pp, with_chi=True)
    a = solve(al.build_gp_zf(st, w, cond, "lifted"), tol=1e-9, x0=x0)
    b = solve(al.build_gp_zf(st, w, cond, "expanded"), tol=1e-9, x0=x0)
    assert a.status == b.status == "optimal"
    assert a.objective_value == pytest.approx(b.objective_value, abs=1e-6)


@pytest.mark.parametrize("rx", al.RECEIVERS)
def test_optimize_meets_targets_and_budgets(rx):
    sc = random_scenario(11)
    res = al.optimize(sc, rx)
    assert res.status == "converged"
    assert res.trace.is_monotone(1e-9)
    assert res.trace.iterations <= 10
    p = res.allocation
    np.testing.assert_array_less(sc.K * p.p_pilot + (sc.L - sc.K) * p.p_data, sc.energies * (1 + 1e-9))
    assert np.all(res.rate_lb >= sc.rate_reqs * (1 - 1e-6))
    assert res.violations == 0
    # objective equals the weighted sum of rate bounds at the returned powers
    assert res.trace.objective[-1] <= res.weighted_sum * (1 + 1e-12) + 1e-12
    np.testing.assert_allclose(res.sinr_lb, sinr_bound(rx, sc.alphas, p.p_pilot, p.p_data, sc.M),
                               rtol=1e-12)


@pytest.mark.parametrize("rx", al.RECEIVERS)
def test_optimize_improves_on_feasibility_point(rx):
    sc = random_scenario(12)
    res = al.optimize(sc, rx)
    assert res.weighted_sum >= res.trace.objective[0]


def test_zf_feasibility_is_a_fixed_point():
    sc = random_scenario(5)
    st = al._setup(sc, "zf", True, False)
    phi, pp, pd = al.feasibility(sc, "zf")
    sol = solve(al.build_feasibility_gp(st, product_monomial_minorant(sc.alphas * sc.K * pp)),
                tol=al.GP_TOL, x0=al._warm_start(st, pp, pd))
    assert sol.values["phi"] == pytest.approx(phi, rel=5 * al.PHI_TOL)


def test_feasibility_margin_is_attained():
    sc = random_scenario(6)
    st = al._setup(sc, "mrc", True, False)
    phi, pp, pd = al.feasibility(sc, "mrc")
    gamma = al.sinr_bounds(sc, "mrc", pp, pd)
    assert np.min(gamma / st.chi_floor) == pytest.approx(phi, rel=1e-5)


def test_infeasible_targets_reported():
    sc = random_scenario(2).with_devices(rate_req=6.0)
    res = al.optimize(sc, "mrc")
    assert res.status == "infeasible" and not res.feasible
    assert 0 < res.phi < 1


def test_zero_energy_gives_zero_margin():
    sc = random_scenario(2).with_devices(energy=0.0)
    assert al.feasibility(sc, "zf")[0] == 0.0
    assert al.optimize(sc, "zf").status == "infeasible"


def test_no_targets_is_unconstrained():
    sc = random_scenario(2).with_devices(rate_req=0.0)
    phi, _, _ = al.feasibility(sc, "mrc", penalty=False)
    assert phi == math.inf


def test_baselines_and_comparison():
    sc = random_scenario(21)
    res = al.compare(sc, "zf")
    assert list(res) == list(al.ALGORITHMS)
    assert res["upper_bound"].shannon_sum >= res["proposed"].shannon_sum * (1 - 1e-12)
    conv = res["conventional"]
    assert conv.mode == "conventional"
    np.testing.assert_array_equal(conv.allocation.p_data, res["upper_bound"].allocation.p_data)
    fp = res["fixed_pilot"]
    np.testing.assert_allclose(fp.allocation.p_pilot, sc.energies / sc.L)


def test_fixed_pilot_not_better_than_proposed_on_average():
    diffs = []
    for seed in range(3):
        sc = random_scenario(seed).with_devices(energy=1.0)
        r = al.compare(sc, "zf", ("proposed", "fixed_pilot"))
        if r["proposed"].feasible and r["fixed_pilot"].feasible:
            diffs.append(r["proposed"].weighted_sum - r["fixed_pilot"].weighted_sum)
    assert diffs and np.mean(diffs) > 0


def test_init_must_be_feasible():
    sc = random_scenario(4)
    bad = al.PowerAllocation(np.full(sc.K, 1e-6), np.full(sc.K, 1e-6), np.zeros(sc.K))
    with pytest.raises(ValueError):
        al.optimize(sc, "mrc", init=bad)


def test_score_allocation_reproduces_result():
    sc = random_scenario(8)
    res = al.optimize(sc, "mrc")
    again = al.score_allocation(sc, "mrc", res.allocation)
    assert again.weighted_sum == res.weighted_sum
    np.testing.assert_array_equal(again.rate_lb, res.rate_lb)


def test_result_serializes():
    res = al.optimize(random_scenario(9), "zf")
    doc = json.loads(json.dumps(res.to_dict()))
    back = al.PowerAllocation.from_dict(doc["allocation"])
    np.testing.assert_array_equal(back.p_pilot, res.allocation.p_pilot)
    inf = al.optimize(random_scenario(9).with_devices(energy=0.0), "zf").to_dict()
    json.dumps(inf)


@pytest.mark.parametrize("rx", al.RECEIVERS)
def test_two_device_instance_matches_brute_force(rx):
    sc = random_scenario(31, K=2, M=20)
    res = al.optimize(sc, rx)
    ref, _, _ = brute_force_allocation(rx, sc.alphas, sc.weights, sc.energies, sc.rate_reqs,
                                       sc.epsilons, sc.M, sc.L)
    assert math.isfinite(ref)
    assert res.weighted_sum >= ref * (1 - 0.01)


def test_penalty_coefficient_used():
    sc = random_scenario(1)
    st = al._setup(sc, "mrc", True, False)
    np.testing.assert_allclose(st.a, a_coeff(sc.epsilons, sc.L, sc.K))
    assert np.all(al._setup(sc, "mrc", False, False).a == 0)
