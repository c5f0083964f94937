"""Linear integer expressions and ``e >= 0`` constraints in canonical form."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping


@dataclass(frozen=True)
class LinExpr:
    """``constant + sum(coeff * name)`` with zero coefficients removed.

    Coefficients are stored as a sorted tuple so that structural equality
    coincides with equality of the canonical form.
    """

    constant: int = 0
    terms: tuple[tuple[str, int], ...] = ()

    @staticmethod
    def make(constant: int = 0, coeffs: Mapping[str, int] | Iterable[tuple[str, int]] = ()) -> "LinExpr":
        acc: dict[str, int] = {}
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for name, c in items:
            acc[name] = acc.get(name, 0) + c
        return LinExpr(int(constant), tuple(sorted((k, v) for k, v in acc.items() if v != 0)))

    @staticmethod
    def const(c: int) -> "LinExpr":
        return LinExpr(int(c), ())

    @staticmethod
    def var(name: str, coeff: int = 1) -> "LinExpr":
        return LinExpr.make(0, {name: coeff})

    @property
    def coeffs(self) -> dict[str, int]:
        return dict(self.terms)

    def coeff(self, name: str) -> int:
        for k, v in self.terms:
            if k == name:
                return v
        return 0

    def variables(self) -> frozenset[str]:
        return frozenset(k for k, _ in self.terms)

    def is_constant(self) -> bool:
        return not self.terms

    def only_over(self, names: Iterable[str]) -> bool:
        allowed = set(names)
        return all(k in allowed for k, _ in self.terms)

    def __add__(self, other: "LinExpr | int") -> "LinExpr":
        if isinstance(other, int):
            return LinExpr(self.constant + other, self.terms)
        return LinExpr.make(self.constant + other.constant, list(self.terms) + list(other.terms))

    __radd__ = __add__

    def __neg__(self) -> "LinExpr":
        return LinExpr(-self.constant, tuple((k, -v) for k, v in self.terms))

    def __sub__(self, other: "LinExpr | int") -> "LinExpr":
        return self + (-other)

    def __rsub__(self, other: int) -> "LinExpr":
        return (-self) + other

    def scale(self, k: int) -> "LinExpr":
        if k == 0:
            return LinExpr()
        return LinExpr(self.constant * k, tuple((n, v * k) for n, v in self.terms))

    def subst(self, mapping: Mapping[str, "LinExpr"]) -> "LinExpr":
        out = LinExpr.const(self.constant)
        for name, c in self.terms:
            repl = mapping.get(name)
            out = out + (repl.scale(c) if repl is not None else LinExpr.var(name, c))
        return out

    def evaluate(self, env: Mapping[str, int]) -> int:
        return self.constant + sum(c * env[n] for n, c in self.terms)

    def __str__(self) -> str:
        parts: list[str] = []
        ordered = [t for t in self.terms if t[1] > 0] + [t for t in self.terms if t[1] < 0]
        for name, c in ordered:
            if c == 1:
                mono = name
            elif c == -1:
                mono = "-" + name
            else:
                mono = f"{c}*{name}"
            if parts and not mono.startswith("-"):
                parts.append("+" + mono)
            else:
                parts.append(mono)
        if self.constant or not parts:
            c = self.constant
            parts.append(("+" if parts and c > 0 else "") + str(c))
        return "".join(parts)

    def __repr__(self) -> str:
        return f"LinExpr({self})"


@dataclass(frozen=True)
class Constraint:
    """The atomic fact ``expr >= 0`` over the integers."""

    expr: LinExpr

    def subst(self, mapping: Mapping[str, LinExpr]) -> "Constraint":
        return Constraint(self.expr.subst(mapping))

    def variables(self) -> frozenset[str]:
        return self.expr.variables()

    def holds(self, env: Mapping[str, int]) -> bool:
        return self.expr.evaluate(env) >= 0

    def __str__(self) -> str:
        return f"{self.expr}>=0"


def geq(a: LinExpr, b: LinExpr) -> Constraint:
    return Constraint(a - b)


def gt(a: LinExpr, b: LinExpr) -> Constraint:
    # strict integer inequality stays integral: a > b  <=>  a - b - 1 >= 0
    return Constraint(a - b - 1)
