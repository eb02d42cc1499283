"""Log-barrier interior-point solver for geometric programs.

With ``y = ln x`` every constraint ``posy(x) / mono(x) <= 1`` becomes
``lse(A_i y + b_i) <= 0`` and the monomial objective becomes linear, so
the GP is a smooth convex program. Internally we *minimize* ``-c^T y``;
reported objective values are ``ln`` of the maximized monomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .expr import GpProblem

# Iterates, constraint values and gradients are carried in extended precision:
# near the optimum -f_i ~ 1/t, and float64 resolves f only to ~1e-15, which
# would cap the attainable KKT accuracy well above the duality-gap target.
_EXT = np.longdouble


@dataclass
class LogProgram:
    """``min -c^T y  s.t.  lse(A[g==i] y + b[g==i]) <= 0`` for every constraint ``i``."""

    names: list[str]
    A: np.ndarray          # (T, n) exponent rows, all constraints stacked
    b: np.ndarray          # (T,) log coefficients
    starts: np.ndarray     # (m,) first row of each constraint
    c: np.ndarray          # (n,) objective exponents (maximized)
    c0: float              # log objective coefficient
    labels: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def m(self) -> int:
        return len(self.starts)

    @property
    def group(self) -> np.ndarray:
        """Constraint index of every stacked row."""
        g = self.__dict__.get("_group")
        if g is None:
            sizes = np.diff(np.append(self.starts, len(self.b)))
            g = self.__dict__["_group"] = np.repeat(np.arange(self.m), sizes)
        return g

    def is_affine(self) -> np.ndarray:
        sizes = np.diff(np.append(self.starts, len(self.b)))
        return sizes == 1

    def _z(self, y):
        if not hasattr(self, "_A_ext"):
            self._A_ext = self.A.astype(_EXT)
            self._b_ext = self.b.astype(_EXT)
        return self._A_ext @ np.asarray(y, dtype=_EXT) + self._b_ext

    def constraint_values(self, y: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return np.zeros(0)
        z = self._z(y)
        zmax = np.maximum.reduceat(z, self.starts)
        grp = self.group
        s = np.add.reduceat(np.exp(z - zmax[grp]), self.starts)
        return zmax + np.log(s)

    def derivatives(self, y: np.ndarray):
        """Constraint values, gradients (m, n) and per-row softmax weights."""
        z = self._z(y)
        grp = self.group
        zmax = np.maximum.reduceat(z, self.starts)
        e = np.exp(z - zmax[grp])
        s = np.add.reduceat(e, self.starts)
        f = zmax + np.log(s)
        # only f needs the extra digits; weights and gradients are fine in float64
        pi = (e / s[grp]).astype(float)
        grads = np.add.reduceat(self.A * pi[:, None], self.starts, axis=0)
        return f, grads, pi

    def constraint_hessian(self, y: np.ndarray, i: int) -> np.ndarray:
        """Hessian of constraint ``i`` (used for finite-difference checks)."""
        lo = self.starts[i]
        hi = self.starts[i + 1] if i + 1 < self.m else len(self.b)
        Ai = self.A[lo:hi]
        z = Ai @ np.asarray(y, float) + self.b[lo:hi]
        p = np.exp(z - z.max())
        p /= p.sum()
        g = Ai.T @ p
        return Ai.T @ (Ai * p[:, None]) - np.outer(g, g)

    def values_of(self, y: np.ndarray) -> dict[str, float]:
        return {n: float(np.exp(float(v))) for n, v in zip(self.names, y)}


def log_transform(problem: GpProblem, variables: list[str] | None = None) -> LogProgram:
    """Exact log-space form of ``problem``; constant, vacuous constraints are dropped."""
    names = list(variables) if variables is not None else problem.variables
    index = {n: j for j, n in enumerate(names)}
    n = len(names)
    rows, bs, starts, labels = [], [], [], []

    def emit(terms, rhs, label):
        rhs_e = dict(rhs.key)
        block_rows, block_b = [], []
        for t in terms:
            r = np.zeros(n)
            for name, e in t.key:
                r[index[name]] += e
            for name, e in rhs_e.items():
                r[index[name]] -= e
            block_rows.append(r)
            block_b.append(math.log(t.coeff) - math.log(rhs.coeff))
        block = np.array(block_rows)
        if not block.any():
            bb = np.array(block_b)
            lse = bb.max() + math.log(np.exp(bb - bb.max()).sum())
            if lse <= 0.0:
                return  # constant and satisfied
        starts.append(len(bs))
        rows.extend(block_rows)
        bs.extend(block_b)
        labels.append(label)

    for k, con in enumerate(problem.constraints):
        emit(con.lhs.terms, con.rhs, con.name or f"c{k}")
    from .expr import Monomial, var
    for name, ub in problem.upper_bounds.items():
        emit([var(name)], Monomial(ub), f"ub[{name}]")

    c = np.zeros(n)
    for name, e in problem.objective.key:
        c[index[name]] += e
    A = np.array(rows).reshape(len(rows), n)
    return LogProgram(names=names, A=A, b=np.array(bs, dtype=float),
                      starts=np.array(starts, dtype=np.intp), c=c,
                      c0=math.log(problem.objective.coeff), labels=labels)


@dataclass
class GpSolution:
    values: dict[str, float]
    objective_value: float   # ln of the maximized monomial
    status: str              # optimal | infeasible | max-iter | unbounded
    kkt_residual: float = math.nan
    gap: float = math.nan
    newton_steps: int = 0
    phase1_steps: int = 0
    y: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class SolverOptions:
    tol: float = 1e-8            # duality-gap target m/t
    mu: float = 10.0             # barrier multiplier
    ls_alpha: float = 0.25       # Armijo fraction
    ls_beta: float = 0.5         # backtracking factor
    t0: float = 1.0
    max_newton: int = 500        # per centering step
    newton_eps: float = 1e-16    # stop centering when decrement^2 / 2 below this
    log_box: float = 50.0        # implicit |ln x| bound keeping the barrier bounded below
    box_weight: float = 0.01     # barrier weight of the implicit bound (it only guards
                                 # unbounded directions, so it should not inflate m/t)
    reg0: float = 1e-10
    max_outer: int = 60


class _Barrier:
    """Barrier objective ``t * (-c^T y) - sum log(-f_i) - sum log(box slack)``."""

    def __init__(self, prog: LogProgram, c: np.ndarray, box: float, box_mask: np.ndarray,
                 box_weight: float = 1.0):
        self.prog = prog
        self.c = c
        self.box = box
        self.mask = box_mask     # which coordinates carry the implicit box
        self.kappa = box_weight

    @property
    def m_total(self) -> float:
        """Barrier parameter count; ``m_total / t`` bounds the suboptimality."""
        return self.prog.m + 2.0 * self.kappa * int(self.mask.sum())

    def feasible(self, y) -> bool:
        yb = y[self.mask]
        if np.any(np.abs(yb) >= self.box):
            return False
        return self.prog.m == 0 or bool(np.all(self.prog.constraint_values(y) < 0))

    def barrier(self, y):
        val = _EXT(0.0)
        if self.prog.m:
            val -= np.sum(np.log(-self.prog.constraint_values(y)))
        yb = y[self.mask]
        val -= self.kappa * (np.sum(np.log(self.box - yb)) + np.sum(np.log(self.box + yb)))
        return val

    def grad_hess(self, y, t):
        prog = self.prog
        n = len(y)
        grad = -_EXT(t) * self.c.astype(_EXT)
        H = np.zeros((n, n))
        if prog.m:
            f, G, pi = prog.derivatives(y)
            inv = 1.0 / (-f)
            grad += G.T @ inv
            inv = inv.astype(float)
            grp = prog.group
            # per-constraint lse Hessian as a weighted sum of centered outer products,
            # PSD by construction (the difference form loses definiteness at large t)
            Ac = prog.A - G[grp]
            H += Ac.T @ (Ac * (pi * inv[grp])[:, None])
            H += G.T @ (G * (inv * inv)[:, None])
        yb = y[self.mask]
        up, lo = self.box - yb, self.box + yb
        grad[self.mask] += self.kappa * (1.0 / up - 1.0 / lo)
        H[self.mask, self.mask] += (self.kappa * (1.0 / up**2 + 1.0 / lo**2)).astype(float)
        return grad.astype(float), H


def _newton_direction(grad, H, reg0):
    # Jacobi scaling keeps the regularization relative for every coordinate
    d = np.sqrt(np.maximum(np.diag(H), 1e-300))
    Hs = H / np.outer(d, d)
    gs = grad / d
    n = len(grad)
    reg = 0.0
    for _ in range(30):
        try:
            Lc = np.linalg.cholesky(Hs + reg * np.eye(n) if reg else Hs)
            z = np.linalg.solve(Lc, -gs)
            return np.linalg.solve(Lc.T, z) / d
        except np.linalg.LinAlgError:
            reg = reg0 if reg == 0.0 else reg * 10.0
    raise np.linalg.LinAlgError("Newton system could not be regularized")


def _center(bar: _Barrier, y, t, opts: SolverOptions, stop=None):
    """Damped Newton on the barrier objective. Returns (y, steps, converged)."""
    steps = 0
    prev = math.inf
    while steps < opts.max_newton:
        grad, H = bar.grad_hess(y, t)
        dy = _newton_direction(grad, H, opts.reg0)
        dec2 = float(-grad @ dy)
        if dec2 / 2.0 <= opts.newton_eps or (dec2 < 1e-6 and dec2 > 0.5 * prev):
            # converged, or stalled at the rounding floor
            return y, steps, True
        prev = dec2
        s = 1.0
        while not bar.feasible(y + s * dy):
            s *= opts.ls_beta
            if s < 1e-16:
                return y, steps, True
        if dec2 < 1e-6:
            # quadratic-convergence region: a full (feasible) Newton step is safe, and the
            # Armijo test is below the rounding noise of log(-f) here
            y = y + s * dy
            steps += 1
            if stop is not None and stop(y):
                return y, steps, True
            continue
        b0 = bar.barrier(y)
        lin = -_EXT(t) * (bar.c.astype(_EXT) @ dy.astype(_EXT))
        slope = float(grad @ dy)
        while True:
            # objective change computed term-wise to avoid cancellation at large t
            change = float(s * lin + (bar.barrier(y + s * dy) - b0))
            if change <= opts.ls_alpha * s * slope:
                break
            s *= opts.ls_beta
            if s < 1e-16:
                return y, steps, True
        y = y + s * dy
        steps += 1
        if stop is not None and stop(y):
            return y, steps, True
    return y, steps, False


def _phase_one(prog: LogProgram, y0: np.ndarray, opts: SolverOptions):
    """Find y with all constraints strictly negative: minimize s s.t. f_i(y) <= s."""
    n = prog.n
    ext = LogProgram(names=prog.names + ["__s"],
                     A=np.hstack([prog.A, -np.ones((len(prog.b), 1))]),
                     b=prog.b, starts=prog.starts,
                     c=np.append(np.zeros(n), -1.0), c0=0.0)
    s0 = float(np.max(prog.constraint_values(y0))) + 1.0
    y = np.append(y0, _EXT(s0))
    mask = np.append(np.ones(n, bool), False)
    bar = _Barrier(ext, ext.c, opts.log_box, mask, opts.box_weight)
    t = opts.t0
    total = 0
    for _ in range(opts.max_outer):
        y, steps, ok = _center(bar, y, t, opts, stop=lambda v: v[-1] < 0.0)
        total += steps
        if y[-1] < 0.0:
            return y[:n], total, True
        if not ok:
            return y[:n], total, None
        # lower bound on min s is s - m/t; positive bound certifies infeasibility
        if y[-1] - bar.m_total / t > 0.0 or bar.m_total / t < opts.tol:
            return y[:n], total, False
        t *= opts.mu
    return y[:n], total, False


def _relative_kkt(bar: _Barrier, y: np.ndarray, t: float) -> float:
    """Lagrangian-gradient residual with multipliers ``1 / (t (-f_i))``, relative to
    the largest term of the stationarity equation."""
    grad, _ = bar.grad_hess(y, t)
    scale = max(1.0, float(np.max(np.abs(bar.c))))
    prog = bar.prog
    if prog.m:
        f, G, _ = prog.derivatives(y)
        lam = 1.0 / (t * -f)
        scale = max(scale, float(np.max(lam[:, None] * np.abs(G))))
    return float(np.max(np.abs(grad))) / t / scale


def solve(problem: GpProblem, tol: float = 1e-8, x0: Mapping[str, float] | None = None,
          options: SolverOptions | None = None, prog: LogProgram | None = None) -> GpSolution:
    """Maximize the GP ``problem`` with a two-phase log-barrier method.

    ``x0`` (a mapping of variable values) warm-starts the search; missing or
    non-positive entries default to 1. Phase I is skipped when ``x0`` is
    strictly feasible.
    """
    opts = options or SolverOptions()
    opts = SolverOptions(**{**opts.__dict__, "tol": tol})
    prog = prog or log_transform(problem)
    n = prog.n
    y = np.zeros(n, dtype=_EXT)
    if x0:
        for j, name in enumerate(prog.names):
            v = x0.get(name)
            if v is not None and v > 0 and math.isfinite(v):
                y[j] = math.log(v)
    y = np.clip(y, -opts.log_box + 1.0, opts.log_box - 1.0)

    phase1 = 0
    if prog.m and not np.all(prog.constraint_values(y) < 0):
        y, phase1, found = _phase_one(prog, y, opts)
        if not found:
            status = "max-iter" if found is None else "infeasible"
            return GpSolution(values=prog.values_of(y), objective_value=-math.inf,
                              status=status, phase1_steps=phase1, y=y.astype(float))

    bar = _Barrier(prog, prog.c, opts.log_box, np.ones(n, bool), opts.box_weight)
    t = opts.t0
    total = 0
    status = "optimal"
    for _ in range(opts.max_outer):
        y, steps, ok = _center(bar, y, t, opts)
        total += steps
        if not ok:
            status = "max-iter"
            break
        if bar.m_total / t < opts.tol:
            break
        t *= opts.mu
    else:
        status = "max-iter"

    kkt = _relative_kkt(bar, y, t) if n else 0.0
    if status == "optimal" and np.any(np.abs(y) > opts.log_box - 1.0):
        status = "unbounded"
    obj = float(prog.c0 + prog.c.astype(_EXT) @ y)
    return GpSolution(values=prog.values_of(y), objective_value=obj, status=status,
                      kkt_residual=kkt, gap=bar.m_total / t, newton_steps=total,
                      phase1_steps=phase1, y=y.astype(float))
