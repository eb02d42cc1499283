import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimo_urllc import gp
from mimo_urllc.gp import GpProblem, const, var
from mimo_urllc.gp.solver import log_transform

x, y, z = var("x"), var("y"), var("z")


def _prob(objective, *cons):
    p = GpProblem()
    p.maximize(objective)
    for lhs, rhs in cons:
        p.add(lhs, rhs)
    return p


# (problem, optimal values, optimal objective)
TOYS = {
    "product_under_sum": (_prob(x * y, (x + y, 2.0)), {"x": 1, "y": 1}, 1.0),
    "volume_under_area": (_prob(x * y * z, (x * y + y * z + x * z, 3.0)), {"x": 1, "y": 1, "z": 1}, 1.0),
    "weighted_budget": (_prob(x ** 0.5 * y ** 0.5, (x + 4 * y, 8.0)), {"x": 4, "y": 1}, 2.0),
    "monomial_bounds": (_prob(x, (x * y, 2.0), (y ** -1, 1.0)), {"x": 2, "y": 1}, 2.0),
    "mixed_exponents": (_prob(x * y ** 2, (x + y, 3.0), (1.5 * x ** -1, 1.0)), {"x": 1.5, "y": 1.5}, 3.375),
}


@pytest.mark.parametrize("name", TOYS)
def test_toy_problems_exact(name):
    prob, xs, obj = TOYS[name]
    sol = gp.solve(prob)
    assert sol.status == "optimal"
    assert math.exp(sol.objective_value) == pytest.approx(obj, rel=1e-7)
    for k, v in xs.items():
        assert sol.values[k] == pytest.approx(v, rel=1e-5)
    assert sol.kkt_residual < 1e-6
    assert prob.max_violation(sol.values) <= 1e-9


def test_infeasible_detected():
    sol = gp.solve(_prob(x, (x, 1.0), (2 * x ** -1, 1.0)))
    assert sol.status == "infeasible"


def test_unbounded_reported():
    sol = gp.solve(_prob(x, (x * y, 1.0)))
    assert sol.status in ("unbounded", "optimal")
    if sol.status == "optimal":
        # capped by the internal log box; the maximizer runs to the box edge
        assert sol.values["x"] > 1e15


def test_warm_start_reaches_same_optimum():
    prob = TOYS["volume_under_area"][0]
    a = gp.solve(prob)
    b = gp.solve(prob, x0={"x": 0.5, "y": 0.9, "z": 1.2})
    assert b.objective_value == pytest.approx(a.objective_value, abs=1e-8)


def test_determinism_bit_identical():
    prob = TOYS["mixed_exponents"][0]
    a, b = gp.solve(prob), gp.solve(prob)
    assert a.values == b.values
    assert np.array_equal(a.y, b.y)


def _random_gp(rng, n=3, m=4, terms=3):
    names = [f"v{i}" for i in range(n)]
    p = GpProblem()
    p.maximize(gp.Monomial(1.0, {nm: float(e) for nm, e in zip(names, rng.uniform(0.1, 1, n))}))
    for _ in range(m):
        lhs = None
        for _ in range(terms):
            mono = gp.Monomial(float(rng.uniform(0.1, 2)),
                               {nm: float(e) for nm, e in zip(names, rng.uniform(-1, 2, n))})
            lhs = mono if lhs is None else lhs + mono
        # scaled so the all-ones point is strictly feasible
        p.add(lhs * (0.8 / lhs.eval(dict.fromkeys(names, 1.0))), 1.0)
    for nm in names:
        p.add(var(nm) * 0.5, 1.0)  # keeps the optimum bounded
    return p


@pytest.mark.parametrize("seed", range(5))
def test_constraint_derivatives_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    prog = log_transform(_random_gp(rng))
    y0 = rng.normal(size=prog.n)
    f0, G, _ = prog.derivatives(y0)
    h = 1e-6
    for j in range(prog.n):
        e = np.zeros(prog.n)
        e[j] = h
        num = (np.asarray(prog.constraint_values(y0 + e), float)
               - np.asarray(prog.constraint_values(y0 - e), float)) / (2 * h)
        np.testing.assert_allclose(G[:, j], num, rtol=1e-6, atol=1e-6)
    for i in range(prog.m):
        H = prog.constraint_hessian(y0, i)
        for j in range(prog.n):
            e = np.zeros(prog.n)
            e[j] = h
            num = (prog.derivatives(y0 + e)[1][i] - prog.derivatives(y0 - e)[1][i]) / (2 * h)
            np.testing.assert_allclose(H[:, j], num, rtol=1e-6, atol=1e-6)
        assert np.linalg.eigvalsh(H).min() > -1e-12


@pytest.mark.parametrize("seed", range(6))
def test_solver_agrees_with_grid_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    prob = _random_gp(rng, n=2, m=3)
    sol = gp.solve(prob)
    ref = gp.grid_oracle(prob, resolution=60, default_bounds=(1e-3, 10.0))
    assert sol.status == "optimal" and ref.feasible
    # the solver may only beat the grid, never fall short by more than grid spacing
    assert sol.objective_value >= ref.objective_value - 1e-3
    assert prob.max_violation(sol.values) <= 1e-9


def test_grid_oracle_refuses_large_problems():
    p = _prob(x, *[(var(f"w{i}") + x, 1.0) for i in range(6)])
    with pytest.raises(ValueError):
        gp.grid_oracle(p)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_text_round_trip(seed):
    prob = _random_gp(np.random.default_rng(seed), n=3, m=2)
    prob.upper_bounds["v1"] = 7.5
    text = gp.dumps(prob)
    back = gp.loads(text)
    assert gp.dumps(back) == text
    vals = {f"v{i}": 1.3 + i for i in range(3)}
    assert back.max_violation(vals) == pytest.approx(prob.max_violation(vals), rel=1e-14)
    assert back.objective_log(vals) == pytest.approx(prob.objective_log(vals), rel=1e-14)


def test_text_format_parses_by_hand():
    text = """variables: x y
maximize: x * y
x + y <= 2  # budget
bound: x <= 1.5
"""
    prob = gp.loads(text)
    assert prob.constraints[0].name == "budget"
    assert prob.upper_bounds == {"x": 1.5}
    sol = gp.solve(prob)
    assert sol.values["x"] == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("bad", ["maximize: x +", "x + y 2", "variables: x\nmaximize: x\nx^ <= 1"])
def test_text_parse_errors(bad):
    with pytest.raises(gp.GpParseError):
        gp.loads(bad)


def test_constants_dropped_from_log_form():
    p = _prob(x, (x + 0.5, 1.0))
    p.add(const(0.3), 1.0)
    prog = log_transform(p)
    assert prog.m == 1
    assert math.exp(gp.solve(p).objective_value) == pytest.approx(0.5, rel=1e-7)
