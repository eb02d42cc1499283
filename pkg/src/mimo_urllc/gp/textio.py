"""Plain-text serialization of GP problems.

Format, one item per line (``#`` starts a comment)::

    variables: x y
    maximize: x^1 * y^1
    1 * x^1 + 1 * y^1 <= 2
    x <= 5

A term is ``coeff * var^exp * ...``; a bare ``var`` means exponent 1 and a bare
number is a constant. A constraint whose left side is a single variable and
whose right side is a constant is still stored as a general constraint.
"""

from __future__ import annotations

import re
from pathlib import Path

from .expr import GpProblem, Monomial, Posynomial

_FACTOR = re.compile(r"^([A-Za-z_][\w\[\].]*)(?:\^(.+))?$")


class GpParseError(ValueError):
    pass


def format_monomial(m: Monomial) -> str:
    parts = [repr(m.coeff)] + [f"{n}^{e!r}" for n, e in m.key]
    return " * ".join(parts)


def format_posynomial(p: Posynomial) -> str:
    return " + ".join(format_monomial(t) for t in p.terms)


def dumps(problem: GpProblem) -> str:
    lines = ["variables: " + " ".join(problem.variables),
             "maximize: " + format_monomial(problem.objective)]
    for c in problem.constraints:
        line = f"{format_posynomial(c.lhs)} <= {format_monomial(c.rhs)}"
        lines.append(line + (f"  # {c.name}" if c.name else ""))
    for n, ub in problem.upper_bounds.items():
        lines.append(f"bound: {n} <= {ub!r}")
    return "\n".join(lines) + "\n"


def _parse_monomial(text: str, lineno: int) -> Monomial:
    coeff = 1.0
    exps: dict[str, float] = {}
    for factor in text.split("*"):
        factor = factor.strip()
        if not factor:
            raise GpParseError(f"line {lineno}: empty factor in {text!r}")
        try:
            coeff *= float(factor)
            continue
        except ValueError:
            pass
        m = _FACTOR.match(factor)
        if not m:
            raise GpParseError(f"line {lineno}: cannot parse factor {factor!r}")
        try:
            e = float(m.group(2)) if m.group(2) is not None else 1.0
        except ValueError as exc:
            raise GpParseError(f"line {lineno}: bad exponent in {factor!r}") from exc
        exps[m.group(1)] = exps.get(m.group(1), 0.0) + e
    try:
        return Monomial(coeff, exps)
    except ValueError as exc:
        raise GpParseError(f"line {lineno}: {exc}") from exc


def _parse_posynomial(text: str, lineno: int) -> Posynomial:
    # exponents may be negative ("x^-1"), so split on '+' not preceded by '^' or 'e'
    pieces = re.split(r"(?<![\^eE])\+", text)
    return Posynomial([_parse_monomial(p, lineno) for p in pieces])


def loads(text: str) -> GpProblem:
    prob = GpProblem()
    have_objective = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line, _, comment = raw.partition("#")
        line = line.strip()
        if not line:
            continue
        if line.startswith("variables:"):
            prob.declare(*line[len("variables:"):].split())
        elif line.startswith("maximize:"):
            prob.maximize(_parse_monomial(line[len("maximize:"):], lineno))
            have_objective = True
        elif line.startswith("bound:"):
            lhs, sep, rhs = line[len("bound:"):].partition("<=")
            if not sep:
                raise GpParseError(f"line {lineno}: bound needs '<='")
            try:
                prob.upper_bounds[lhs.strip()] = float(rhs)
            except ValueError as exc:
                raise GpParseError(f"line {lineno}: bad bound {rhs!r}") from exc
        else:
            lhs, sep, rhs = line.partition("<=")
            if not sep:
                raise GpParseError(f"line {lineno}: expected 'lhs <= rhs'")
            prob.add(_parse_posynomial(lhs, lineno), _parse_monomial(rhs, lineno),
                     comment.strip())
    if not have_objective:
        raise GpParseError("missing 'maximize:' line")
    return prob


def dump(problem: GpProblem, path) -> None:
    Path(path).write_text(dumps(problem))


def load(path) -> GpProblem:
    return loads(Path(path).read_text())
