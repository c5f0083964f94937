"""Fourier-Motzkin elimination over the rationals for ``e >= 0`` systems.

Rational unsatisfiability implies integer unsatisfiability, so ``satisfiable``
returning False is safe for discarding paths and ``implies`` returning True is
safe for proving facts. The converse directions are incomplete.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable

from .linexpr import Constraint, LinExpr

# Above this many constraints the elimination gives up and answers
# "satisfiable", which is the sound answer for both uses.
LIMIT = 3000

_Row = tuple[int, tuple[tuple[str, int], ...]]


def _row(const, coeffs) -> _Row:
    """Canonical row: integer coefficients with gcd 1, rational constant."""
    terms = tuple(sorted((n, c) for n, c in coeffs if c != 0))
    g = 0
    for _, c in terms:
        g = gcd(g, abs(c))
    if g > 1:
        return (Fraction(const, g), tuple((n, c // g) for n, c in terms))
    return (const, terms)


def satisfiable(constraints: Iterable[Constraint]) -> bool:
    rows: set[_Row] = set()
    for c in constraints:
        rows.add(_row(c.expr.constant, c.expr.terms))
    while True:
        live = set()
        for const, terms in rows:
            if not terms:
                if const < 0:
                    return False
                continue
            live.add((const, terms))
        if not live:
            return True
        rows = live
        var = _pick(rows)
        pos, neg, rest = [], [], []
        for r in rows:
            c = dict(r[1]).get(var, 0)
            (pos if c > 0 else neg if c < 0 else rest).append((r, c))
        new: set[_Row] = {r for r, _ in rest}
        for (p, a) in pos:
            for (q, b) in neg:
                # (-b) * p + a * q eliminates var
                merged: dict[str, int] = {}
                for n, c in p[1]:
                    merged[n] = merged.get(n, 0) + (-b) * c
                for n, c in q[1]:
                    merged[n] = merged.get(n, 0) + a * c
                new.add(_row((-b) * p[0] + a * q[0], merged.items()))
                if len(new) > LIMIT:
                    return True
        rows = new


def _pick(rows: set[_Row]) -> str:
    """Variable whose elimination creates the fewest new rows."""
    count: dict[str, list[int]] = {}
    for _, terms in rows:
        for n, c in terms:
            slot = count.setdefault(n, [0, 0])
            slot[0 if c > 0 else 1] += 1
    return min(sorted(count), key=lambda n: count[n][0] * count[n][1] - count[n][0] - count[n][1])


def nonneg(names: Iterable[str]) -> list[Constraint]:
    return [Constraint(LinExpr.var(n)) for n in names]


def implies(facts: Iterable[Constraint], goal: Constraint) -> bool:
    """True when ``facts`` entail ``goal`` over the integers (proved via Q)."""
    if goal.expr.is_constant():
        return goal.expr.constant >= 0 or not satisfiable(facts)
    return not satisfiable(list(facts) + [Constraint(-goal.expr - 1)])
