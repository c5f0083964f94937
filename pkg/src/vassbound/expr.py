"""Symbolic bound expressions over non-negative integer parameters.

Expressions are built only through the smart constructors (``add``, ``mul``,
``max0`` ...), which keep them in a canonical form: sums and products are
flat, constants are folded, like terms are collected and operands are sorted
deterministically. Products are not distributed, so ``n*(n-1)`` stays
factored for printing; ``to_poly`` provides the expanded view used for
equivalence and sign reasoning.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Union


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Param:
    name: str
    natural: bool = True  # False for symbols whose sign is unknown

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Add:
    items: tuple["BoundExpr", ...]

    def __str__(self) -> str:
        texts = [str(it) for it in self.items]
        # positive terms first: "n-k" rather than "-k+n"
        texts.sort(key=lambda s: s.startswith("-"))
        out = ""
        for s in texts:
            out += s if not out or s.startswith("-") else "+" + s
        return out


@dataclass(frozen=True)
class Mul:
    factors: tuple["BoundExpr", ...]

    def __str__(self) -> str:
        parts = []
        for f in self.factors:
            if isinstance(f, Const) and f.value == -1 and not parts:
                parts.append("-")
                continue
            parts.append(f"({f})" if isinstance(f, Add) else str(f))
        s = parts[0] + "*".join(parts[1:]) if parts[0] == "-" else "*".join(parts)
        return s


@dataclass(frozen=True)
class Max0:
    arg: "BoundExpr"

    def __str__(self) -> str:
        return f"max({self.arg},0)"


@dataclass(frozen=True)
class FloorDiv:
    arg: "BoundExpr"
    divisor: int

    def __str__(self) -> str:
        inner = f"({self.arg})" if isinstance(self.arg, Add) else str(self.arg)
        return f"floor({inner}/{self.divisor})"


@dataclass(frozen=True)
class Log2Ceil:
    arg: "BoundExpr"

    def __str__(self) -> str:
        return f"log2ceil({self.arg})"


BoundExpr = Union[Const, Param, Add, Mul, Max0, FloorDiv, Log2Ceil]

ZERO = Const(0)
ONE = Const(1)


def const(c: int) -> BoundExpr:
    return Const(int(c))


def param(name: str, natural: bool = True) -> BoundExpr:
    return Param(name, natural)


def _split(e: BoundExpr) -> tuple[int, BoundExpr | None]:
    """``e`` as ``coeff * rest``; rest is None for constants."""
    if isinstance(e, Const):
        return e.value, None
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        rest = e.factors[1:]
        return e.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return 1, e


def _scaled(c: int, rest: BoundExpr) -> BoundExpr:
    if c == 1:
        return rest
    if isinstance(rest, Mul):
        return Mul((Const(c),) + rest.factors)
    return Mul((Const(c), rest))


def _term_key(e: BoundExpr) -> tuple:
    return (-degree(e), str(e))


def add(*xs: BoundExpr) -> BoundExpr:
    terms: dict[str, list] = {}
    constant = 0

    def push(x: BoundExpr) -> None:
        nonlocal constant
        if isinstance(x, Add):
            for it in x.items:
                push(it)
            return
        c, rest = _split(x)
        if rest is None:
            constant += c
            return
        slot = terms.setdefault(str(rest), [0, rest])
        slot[0] += c

    for x in xs:
        push(x)
    items = [_scaled(c, rest) for c, rest in terms.values() if c != 0]
    items.sort(key=lambda e: _term_key(_split(e)[1]))
    if constant:
        items.append(Const(constant))
    if not items:
        return ZERO
    if len(items) == 1:
        return items[0]
    return Add(tuple(items))


def neg(x: BoundExpr) -> BoundExpr:
    return mul(Const(-1), x)


def sub(a: BoundExpr, b: BoundExpr) -> BoundExpr:
    return add(a, neg(b))


def mul(*xs: BoundExpr) -> BoundExpr:
    c = 1
    factors: list[BoundExpr] = []

    def push(x: BoundExpr) -> None:
        nonlocal c
        if isinstance(x, Mul):
            for f in x.factors:
                push(f)
        elif isinstance(x, Const):
            c *= x.value
        else:
            factors.append(x)

    for x in xs:
        push(x)
    if c == 0:
        return ZERO
    if not factors:
        return Const(c)
    if len(factors) == 1 and isinstance(factors[0], Add):
        if c == 1:
            return factors[0]
        return add(*(mul(Const(c), it) for it in factors[0].items))
    # b * max(k,0) == b * k when b >= 0 and b * k >= 0 everywhere
    for i, f in enumerate(factors):
        if isinstance(f, Max0):
            others = factors[:i] + factors[i + 1:]
            b = mul(*others) if others else ONE
            if nonneg(b) and poly_nonneg(to_poly(mul(b, f.arg))):
                factors[i] = f.arg
                return mul(Const(c), *factors)
    factors.sort(key=lambda f: (not isinstance(f, (Const, Param)), isinstance(f, Add), str(f)))
    if c == 1 and len(factors) == 1:
        return factors[0]
    return Mul(((Const(c),) if c != 1 else ()) + tuple(factors))


def max0(x: BoundExpr) -> BoundExpr:
    if isinstance(x, Const):
        return Const(max(x.value, 0))
    if isinstance(x, Max0) or nonneg(x):
        return x
    return Max0(x)


def smax(a: BoundExpr, b: BoundExpr) -> BoundExpr:
    """Symbolic maximum, decided by the sign test when possible."""
    if a == b:
        return a
    d = sub(b, a)
    if nonneg(d):
        return b
    if nonneg(neg(d)):
        return a
    return add(a, max0(d))


def floordiv(x: BoundExpr, k: int) -> BoundExpr:
    if k <= 0:
        raise ValueError("divisor must be positive")
    if k == 1:
        return x
    if isinstance(x, Const):
        return Const(x.value // k)
    return FloorDiv(x, k)


def log2ceil(x: BoundExpr) -> BoundExpr:
    if isinstance(x, Const):
        return Const(_log2ceil(x.value))
    return Log2Ceil(x)


def _log2ceil(v: int) -> int:
    return (max(v, 1) - 1).bit_length()


def evaluate(e: BoundExpr, env: Mapping[str, int]) -> int:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Param):
        return env[e.name]
    if isinstance(e, Add):
        return sum(evaluate(x, env) for x in e.items)
    if isinstance(e, Mul):
        out = 1
        for f in e.factors:
            out *= evaluate(f, env)
        return out
    if isinstance(e, Max0):
        return max(evaluate(e.arg, env), 0)
    if isinstance(e, FloorDiv):
        return evaluate(e.arg, env) // e.divisor
    if isinstance(e, Log2Ceil):
        return _log2ceil(evaluate(e.arg, env))
    raise TypeError(e)


def params(e: BoundExpr) -> frozenset[str]:
    if isinstance(e, Param):
        return frozenset([e.name])
    if isinstance(e, (Add, Mul)):
        out: frozenset[str] = frozenset()
        for x in (e.items if isinstance(e, Add) else e.factors):
            out |= params(x)
        return out
    if isinstance(e, (Max0, FloorDiv, Log2Ceil)):
        return params(e.arg)
    return frozenset()


def subst(e: BoundExpr, mapping: Mapping[str, BoundExpr]) -> BoundExpr:
    if isinstance(e, Param):
        return mapping.get(e.name, e)
    if isinstance(e, Add):
        return add(*(subst(x, mapping) for x in e.items))
    if isinstance(e, Mul):
        return mul(*(subst(x, mapping) for x in e.factors))
    if isinstance(e, Max0):
        return max0(subst(e.arg, mapping))
    if isinstance(e, FloorDiv):
        return floordiv(subst(e.arg, mapping), e.divisor)
    if isinstance(e, Log2Ceil):
        return log2ceil(subst(e.arg, mapping))
    return e


def degree(e: BoundExpr | None) -> int:
    if e is None or isinstance(e, Const):
        return 0
    if isinstance(e, Add):
        return max(degree(x) for x in e.items)
    if isinstance(e, Mul):
        return sum(degree(f) for f in e.factors)
    if isinstance(e, (Max0, FloorDiv)):
        return degree(e.arg)
    return 1


# ---------------------------------------------------------------- polynomials
# A polynomial maps a monomial, a sorted tuple of (atom, exponent), to its
# integer coefficient. Atoms are parameters and the non-polynomial nodes.

Poly = dict[tuple, int]


def _padd(p: Poly, q: Poly) -> Poly:
    out = dict(p)
    for m, c in q.items():
        out[m] = out.get(m, 0) + c
    return {m: c for m, c in out.items() if c}


def _pmul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            exps = dict(m1)
            for a, k in m2:
                exps[a] = exps.get(a, 0) + k
            m = tuple(sorted(exps.items(), key=lambda it: str(it[0])))
            out[m] = out.get(m, 0) + c1 * c2
    return {m: c for m, c in out.items() if c}


def to_poly(e: BoundExpr) -> Poly:
    if isinstance(e, Const):
        return {(): e.value} if e.value else {}
    if isinstance(e, Add):
        out: Poly = {}
        for x in e.items:
            out = _padd(out, to_poly(x))
        return out
    if isinstance(e, Mul):
        out = {(): 1}
        for f in e.factors:
            out = _pmul(out, to_poly(f))
        return out
    return {((e, 1),): 1}


def equivalent(a: BoundExpr, b: BoundExpr) -> bool:
    """Polynomial identity over the atoms (sufficient, not necessary)."""
    return to_poly(sub(a, b)) == {}


def _atom_natural(a: BoundExpr) -> bool:
    if isinstance(a, Param):
        return a.natural
    if isinstance(a, (Max0, Log2Ceil)):
        return True
    if isinstance(a, FloorDiv):
        return nonneg(a.arg)
    return False


@lru_cache(maxsize=None)
def _stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * _stirling2(n - 1, k) + _stirling2(n - 1, k - 1)


def poly_nonneg(p: Poly) -> bool:
    """Sound test for ``p >= 0`` on all natural atom values.

    Every power ``v**e`` is rewritten in the falling-factorial basis
    ``v**e = sum_j S(e, j) * v*(v-1)*...*(v-j+1)``. Falling factorials are
    non-negative on the naturals, so non-negative coefficients in that basis
    certify non-negativity.
    """
    out: dict[tuple, int] = {}
    for mono, c in p.items():
        expansions: list[tuple[tuple, int]] = [((), 1)]
        for atom, e in mono:
            if not _atom_natural(atom):
                return False
            nxt = []
            for key, w in expansions:
                for j in range(1, e + 1):
                    nxt.append((key + ((str(atom), j),), w * _stirling2(e, j)))
            expansions = nxt
        for key, w in expansions:
            out[key] = out.get(key, 0) + c * w
    return all(c >= 0 for c in out.values())


def nonneg(e: BoundExpr) -> bool:
    """True when ``e`` is provably ``>= 0`` for all natural parameter values."""
    if isinstance(e, Const):
        return e.value >= 0
    if isinstance(e, Param):
        return e.natural
    if isinstance(e, (Max0, Log2Ceil)):
        return True
    if isinstance(e, FloorDiv):
        return nonneg(e.arg)
    if isinstance(e, Add) and all(nonneg(x) for x in e.items):
        return True
    if isinstance(e, Mul) and all(nonneg(x) for x in e.factors):
        return True
    return poly_nonneg(to_poly(e))


def positive(e: BoundExpr) -> bool:
    return nonneg(sub(e, ONE))


# ------------------------------------------------------------ growth classes

CLASSES = ("1", "log n", "n", "n log n", "n^2", "n^3", "n^>3", "EXP")


def _growth_atom(a: BoundExpr) -> tuple[int, int]:
    if isinstance(a, Param):
        return (1, 0)
    if isinstance(a, (Max0, FloorDiv)):
        return growth(a.arg)
    if isinstance(a, Log2Ceil):
        d, l = growth(a.arg)
        return (0, 1) if (d, l) != (0, 0) else (0, 0)
    return (0, 0)


def growth(e: BoundExpr) -> tuple[int, int]:
    """Dominant ``(degree, log-power)`` of ``e`` as all parameters grow."""
    best = (0, 0)
    for mono, c in to_poly(e).items():
        d = l = 0
        for atom, k in mono:
            ad, al = _growth_atom(atom)
            d += ad * k
            l += al * k
        best = max(best, (d, l))
    return best


def asymptotic_class(e: BoundExpr) -> str:
    d, l = growth(e)
    if d == 0:
        return "1" if l == 0 else "log n" if l == 1 else "n"
    if d == 1:
        return "n" if l == 0 else "n log n" if l == 1 else "n^2"
    if d == 2:
        return "n^2" if l == 0 else "n^3"
    if d == 3 and l == 0:
        return "n^3"
    return "n^>3"
