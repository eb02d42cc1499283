"""Monomials, posynomials and geometric programs over named positive variables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Real
from typing import Iterable, Mapping


def _merge(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    for name, e in b:
        v = acc.get(name, 0.0) + e
        if v == 0.0:
            acc.pop(name, None)
        else:
            acc[name] = v
    return tuple(sorted(acc.items()))


class Monomial:
    """``coeff * prod_j x_j ** e_j`` with ``coeff > 0``."""

    __slots__ = ("coeff", "key")

    def __init__(self, coeff: float = 1.0, exponents: Mapping[str, float] | None = None):
        coeff = float(coeff)
        if not (coeff > 0 and math.isfinite(coeff)):
            raise ValueError(f"monomial coefficient must be positive and finite, got {coeff}")
        self.coeff = coeff
        items = ((str(k), float(v)) for k, v in (exponents or {}).items())
        self.key = tuple(sorted((k, v) for k, v in items if v != 0.0))

    @classmethod
    def _raw(cls, coeff: float, key: tuple) -> "Monomial":
        m = cls.__new__(cls)
        m.coeff = coeff
        m.key = key
        return m

    @property
    def exponents(self) -> dict[str, float]:
        return dict(self.key)

    @property
    def variables(self) -> list[str]:
        return [k for k, _ in self.key]

    def is_constant(self) -> bool:
        return not self.key

    def __mul__(self, other):
        if isinstance(other, Monomial):
            return Monomial._raw(self.coeff * other.coeff, _merge(self.key, other.key))
        if isinstance(other, Posynomial):
            return other * self
        if isinstance(other, Real):
            return Monomial(self.coeff * float(other), dict(self.key))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Real):
            return Monomial(self.coeff / float(other), dict(self.key))
        if isinstance(other, Monomial):
            return self * other ** -1
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, Real):
            return Monomial(float(other), {}) * self ** -1
        return NotImplemented

    def __pow__(self, p: float) -> "Monomial":
        p = float(p)
        return Monomial(self.coeff ** p, {k: v * p for k, v in self.key})

    def __add__(self, other):
        return Posynomial([self]) + other

    __radd__ = __add__

    def eval(self, values: Mapping[str, float]) -> float:
        out = self.coeff
        for name, e in self.key:
            out *= values[name] ** e
        return out

    def __repr__(self):
        body = " * ".join(f"{k}^{v:g}" for k, v in self.key)
        return f"{self.coeff:g}" + (f" * {body}" if body else "")


def var(name: str) -> Monomial:
    return Monomial(1.0, {name: 1.0})


def const(value: float) -> Monomial:
    return Monomial(value)


class Posynomial:
    """Sum of monomials; like terms are merged."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Iterable[Monomial] = ()):
        self._terms: dict[tuple, float] = {}
        for t in terms:
            if isinstance(t, Real):
                t = Monomial(float(t))
            self._terms[t.key] = self._terms.get(t.key, 0.0) + t.coeff
        if not self._terms:
            raise ValueError("a posynomial needs at least one term")

    @classmethod
    def _from_dict(cls, d: dict) -> "Posynomial":
        p = cls.__new__(cls)
        p._terms = d
        return p

    @property
    def terms(self) -> list[Monomial]:
        return [Monomial._raw(c, k) for k, c in self._terms.items()]

    def __len__(self):
        return len(self._terms)

    def __add__(self, other):
        if isinstance(other, Real):
            other = Monomial(float(other))
        if isinstance(other, Monomial):
            other = Posynomial([other])
        if not isinstance(other, Posynomial):
            return NotImplemented
        d = dict(self._terms)
        for k, c in other._terms.items():
            d[k] = d.get(k, 0.0) + c
        return Posynomial._from_dict(d)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Real):
            other = Monomial(float(other))
        if isinstance(other, Monomial):
            if other.coeff <= 0:
                raise ValueError("non-positive factor")
            return Posynomial._from_dict(
                {_merge(k, other.key): c * other.coeff for k, c in self._terms.items()})
        if isinstance(other, Posynomial):
            d: dict[tuple, float] = {}
            for k1, c1 in self._terms.items():
                for k2, c2 in other._terms.items():
                    k = _merge(k1, k2)
                    d[k] = d.get(k, 0.0) + c1 * c2
            return Posynomial._from_dict(d)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (Real, Monomial)):
            return self * (1.0 / other if isinstance(other, Real) else other ** -1)
        return NotImplemented

    def eval(self, values: Mapping[str, float]) -> float:
        return sum(Monomial._raw(c, k).eval(values) for k, c in self._terms.items())

    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for k in self._terms:
            for name, _ in k:
                seen.setdefault(name, None)
        return list(seen)

    def __repr__(self):
        return " + ".join(repr(t) for t in self.terms)


def as_posynomial(x) -> Posynomial:
    if isinstance(x, Posynomial):
        return x
    if isinstance(x, Monomial):
        return Posynomial([x])
    if isinstance(x, Real):
        return Posynomial([Monomial(float(x))])
    raise TypeError(f"cannot convert {type(x).__name__} to a posynomial")


def as_monomial(x) -> Monomial:
    if isinstance(x, Monomial):
        return x
    if isinstance(x, Real):
        return Monomial(float(x))
    if isinstance(x, Posynomial) and len(x) == 1:
        return x.terms[0]
    raise TypeError("right-hand side of a GP constraint must be a monomial")


@dataclass
class Constraint:
    lhs: Posynomial
    rhs: Monomial
    name: str = ""

    def ratio(self, values: Mapping[str, float]) -> float:
        """``lhs / rhs``; the constraint holds iff this is <= 1."""
        return self.lhs.eval(values) / self.rhs.eval(values)


@dataclass
class GpProblem:
    """maximize ``objective`` (a monomial) s.t. posynomial <= monomial constraints.

    Variables are implicitly positive. ``upper_bounds`` adds ``x <= U`` boxes.
    """

    objective: Monomial = field(default_factory=lambda: Monomial(1.0))
    constraints: list[Constraint] = field(default_factory=list)
    upper_bounds: dict[str, float] = field(default_factory=dict)
    declared: list[str] = field(default_factory=list)

    def add(self, lhs, rhs=1.0, name: str = "") -> Constraint:
        c = Constraint(as_posynomial(lhs), as_monomial(rhs), name)
        self.constraints.append(c)
        return c

    def maximize(self, objective) -> None:
        self.objective = as_monomial(objective)

    def declare(self, *names: str) -> None:
        for n in names:
            if n not in self.declared:
                self.declared.append(n)

    @property
    def variables(self) -> list[str]:
        seen: dict[str, None] = dict.fromkeys(self.declared)
        for n, _ in self.objective.key:
            seen.setdefault(n, None)
        for c in self.constraints:
            for n in c.lhs.variables():
                seen.setdefault(n, None)
            for n, _ in c.rhs.key:
                seen.setdefault(n, None)
        for n in self.upper_bounds:
            seen.setdefault(n, None)
        return list(seen)

    def max_violation(self, values: Mapping[str, float]) -> float:
        """Largest relative excess ``lhs/rhs - 1`` over all constraints (<= 0 if feasible)."""
        worst = -math.inf
        for c in self.constraints:
            worst = max(worst, c.ratio(values) - 1.0)
        for n, ub in self.upper_bounds.items():
            worst = max(worst, values[n] / ub - 1.0)
        return worst

    def objective_log(self, values: Mapping[str, float]) -> float:
        obj = self.objective
        return math.log(obj.coeff) + sum(e * math.log(values[n]) for n, e in obj.key)
