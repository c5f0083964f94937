"""Norm guessing and abstraction of a program to a parameterized lossy VASS."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Container, Iterable, Mapping, Sequence

from . import expr as bx
from .cfg import Cfg, Transition, subst_value
from .fm import implies, nonneg
from .lang import Assumption, Div
from .linexpr import Constraint, LinExpr
from .symexec import PENDING, Invariants, PathRelation, bound_to_lin, feasible, lin_to_bound

SIGNS = ("negative", "non-positive", "zero", "non-negative", "positive", "unknown")


def sign_of(value: bx.BoundExpr) -> str:
    if isinstance(value, bx.Const):
        v = value.value
        return "negative" if v < 0 else "zero" if v == 0 else "positive"
    if bx.positive(value):
        return "positive"
    if bx.nonneg(value):
        return "non-negative"
    if bx.positive(bx.neg(value)):
        return "negative"
    if bx.nonneg(bx.neg(value)):
        return "non-positive"
    return "unknown"


@dataclass(frozen=True)
class SymConst:
    """A delta constant over the parameters together with its known sign."""

    value: bx.BoundExpr
    sign: str

    @staticmethod
    def of(value: bx.BoundExpr) -> "SymConst":
        return SymConst(value, sign_of(value))

    @staticmethod
    def const(c: int) -> "SymConst":
        return SymConst.of(bx.const(c))

    def certainly_nonpositive(self) -> bool:
        return self.sign in ("negative", "non-positive", "zero")

    def certainly_negative(self) -> bool:
        return self.sign == "negative"

    def certainly_nonnegative(self) -> bool:
        return self.sign in ("positive", "non-negative", "zero")

    def __add__(self, other: "SymConst") -> "SymConst":
        return SymConst.of(bx.add(self.value, other.value))

    def join(self, other: "SymConst") -> "SymConst":
        return SymConst.of(bx.smax(self.value, other.value))

    def decrement(self) -> int | None:
        """Largest integer ``d >= 1`` with ``-self >= d`` everywhere, if any."""
        if not self.certainly_negative():
            return None
        if isinstance(self.value, bx.Const):
            return -self.value.value
        lowest = bx.neg(self.value)
        d = 1
        while d < 64 and bx.nonneg(bx.sub(lowest, bx.const(d + 1))):
            d += 1
        return d

    def __str__(self) -> str:
        s = str(self.value)
        return s if s.startswith("-") else "+" + s


@dataclass(frozen=True)
class Norm:
    """``max(base, 0)``, or ``log2ceil(max(var, 1))`` for a log norm."""

    base: LinExpr
    kind: str = "linear"
    var: str | None = None

    @property
    def name(self) -> str:
        return f"log({self.var})" if self.kind == "log" else str(self.base)


    def value(self, env: Mapping[str, int]) -> int:
        v = self.base.evaluate(env)
        if self.kind == "log":
            return (max(v, 1) - 1).bit_length()
        return max(v, 0)

    def __str__(self) -> str:
        return self.name


class AbstractionFailure(Exception):
    def __init__(self, norm: Norm, transition: Transition, reason: str):
        super().__init__(f"norm {norm} on transition t{transition.index}: {reason}")
        self.norm = norm
        self.transition = transition
        self.reason = reason


class NoNormsSurvive(Exception):
    def __init__(self, reasons: Sequence[str]):
        super().__init__("no norm survives abstraction: " + "; ".join(reasons))
        self.reasons = list(reasons)


def find_local_rfs(rel: PathRelation, params: Sequence[str] = ()) -> list[tuple[LinExpr, SymConst]]:
    """Guards ``r >= 0`` of the relation that the relation decreases by a
    positive parameter-only amount. Guards that mention values changed by an
    inner loop are not candidates."""
    if rel.disjuncts is not None:
        candidates = [g for g in rel.guards if all(g in d for d in rel.disjuncts)]
    else:
        candidates = [g for g in rel.guards if g in rel.sound_guards] if rel.sound_guards else list(rel.guards)
    out: list[tuple[LinExpr, SymConst]] = []
    for g in candidates:
        r = g.expr
        if r.is_constant():
            continue
        after = subst_value(r, rel.update)
        if after is None:
            continue
        delta = r - after
        if not delta.only_over(params):
            continue
        d = SymConst.of(lin_to_bound(delta))
        if d.sign == "positive":
            out.append((r, d))
    return out


@dataclass
class NormGuess:
    norms: list[Norm] = field(default_factory=list)
    assumptions: list[Assumption] = field(default_factory=list)


def guess_norms(cfg: Cfg, rels: Iterable[PathRelation]) -> NormGuess:
    out = NormGuess()
    seen: set[tuple] = set()

    def push(n: Norm) -> None:
        key = (n.kind, n.base)
        if key not in seen:
            seen.add(key)
            out.norms.append(n)

    for rel in rels:
        if not feasible(rel, cfg.params):
            continue
        for r, d in find_local_rfs(rel, cfg.params):
            delta = d.value
            if isinstance(delta, bx.Const):
                push(Norm(r + delta.value))
            else:
                # base r + delta with a symbolic delta stays linear over params
                push(Norm(r + bound_to_lin(delta)))
        facts = list(rel.sound_guards)
        for var, val in rel.updates:
            if isinstance(val, Div) and val.var == var and val.divisor >= 2:
                if implies(facts + nonneg(cfg.params), Constraint(LinExpr.var(var) - 2)):
                    key = ("log", LinExpr.var(var))
                    if key not in seen:
                        out.assumptions.append(Assumption(f"{var} > 0 assumed while {var} is divided"))
                    push(Norm(LinExpr.var(var), "log", var))
    return out


class Abstractor:
    """Computes the delta of every norm on every transition."""

    def __init__(self, cfg: Cfg, inv: Invariants):
        self.cfg = cfg
        self.inv = inv
        self.params = tuple(cfg.params)

    def delta(self, norm: Norm, t: Transition):
        """SymConst, or PENDING, or raise AbstractionFailure."""
        if norm.kind == "log":
            return self.log_delta(norm, t)
        return self.linear_delta(norm, t)

    def linear_delta(self, norm: Norm, t: Transition):
        e = norm.base
        after = subst_value(e, t.update)
        if after is None:
            return self._div_delta(norm, t)
        diff = after - e
        if diff.only_over(self.params):
            k1 = SymConst.of(lin_to_bound(diff))
            if k1.certainly_nonnegative():
                return k1
            if self.inv.proves(e + diff, t.source, t.guard):
                return k1
            return SymConst.of(bx.max0(k1.value))
        if after.only_over(self.params):
            k2 = lin_to_bound(after)
            if not bx.nonneg(k2) and self.inv.proves(after, t.source, t.guard):
                return SymConst.of(k2)  # max(k2, 0) = k2 wherever t can fire
            return SymConst.of(bx.max0(k2))
        u = self.inv.upper(after, via=t)
        if u is PENDING:
            return PENDING
        if u is None:
            raise AbstractionFailure(norm, t, f"no upper invariant for {after}")
        return SymConst.of(bx.max0(u))

    def _div_delta(self, norm: Norm, t: Transition):
        e = norm.base
        # max(v / c, 0) <= max(v, 0) for a halving of a single variable
        if len(e.terms) == 1 and e.terms[0][1] > 0 and e.constant <= 0:
            v = e.terms[0][0]
            val = t.value_of(v)
            if isinstance(val, Div) and val.var == v:
                return SymConst.const(0)
        raise AbstractionFailure(norm, t, "division inside a linear norm")

    def log_delta(self, norm: Norm, t: Transition):
        v = norm.var
        assert v is not None
        val = t.value_of(v)
        x = LinExpr.var(v)
        if isinstance(val, Div):
            if val.var != v:
                raise AbstractionFailure(norm, t, "division of another variable")
            if self.inv.proves(x - 2, t.source, t.guard):
                return SymConst.const(-1)
            return SymConst.const(0)
        if val == x:
            return SymConst.const(0)
        if val.constant == 0 and val.terms == ((v, 2),):
            return SymConst.const(1)
        if val.only_over(self.params):
            return SymConst.of(bx.log2ceil(lin_to_bound(val)))
        if val.coeff(v) != 0:
            raise AbstractionFailure(norm, t, f"unsupported update {v} := {val}")
        u = self.inv.upper(val, via=t)
        if u is PENDING:
            return PENDING
        if u is None:
            raise AbstractionFailure(norm, t, f"no upper invariant for {val}")
        return SymConst.of(bx.log2ceil(u))


@dataclass
class Abstraction:
    """Per-norm delta rows; pending norms wait for transition bounds."""

    rows: dict[str, dict[int, SymConst | None]] = field(default_factory=dict)
    active: list[Norm] = field(default_factory=list)
    waiting: list[Norm] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)


def abstract_program(
    cfg: Cfg, norms: Sequence[Norm], abstractor: Abstractor, on_loop: Container[int]
) -> Abstraction:
    """Abstract every transition leaving a non-entry location for each norm.

    A norm that cannot be abstracted on a transition lying on some loop path
    fails as a whole; on other transitions the delta is simply omitted.
    """
    out = Abstraction()
    for norm in norms:
        row: dict[int, SymConst | None] = {}
        status = "ok"
        for t in cfg.transitions:
            if t.source == cfg.begin:
                continue
            try:
                d = abstractor.delta(norm, t)
            except AbstractionFailure as exc:
                if t.index in on_loop:
                    out.failed[norm.name] = str(exc)
                    status = "failed"
                    break
                d = None
            if d is PENDING:
                if t.index in on_loop:
                    status = "pending"
                    break
                d = None
            row[t.index] = d
        if status == "ok":
            out.active.append(norm)
            out.rows[norm.name] = row
        elif status == "pending":
            out.waiting.append(norm)
    if norms and not out.active and not out.waiting:
        raise NoNormsSurvive(list(out.failed.values()))
    return out


@dataclass(frozen=True)
class VassEdge:
    index: int
    source: str
    target: str
    deltas: tuple[tuple[str, SymConst], ...]

    def delta(self, norm: str) -> SymConst:
        for n, d in self.deltas:
            if n == norm:
                return d
        raise KeyError(norm)


@dataclass(frozen=True)
class LossyVass:
    locations: tuple[str, ...]
    norms: tuple[Norm, ...]
    edges: tuple[VassEdge, ...]
    initial: tuple[tuple[str, bx.BoundExpr], ...]
    entry: str

    @property
    def norm_names(self) -> list[str]:
        return [n.name for n in self.norms]

    def init_of(self, norm: str) -> bx.BoundExpr:
        return dict(self.initial)[norm]

    def dump(self) -> str:
        lines = ["vars: " + " ".join(self.norm_names)]
        for n in self.norms:
            if n.kind == "log":
                lines.append(f"  {n.name} = log2ceil(max({n.var},1))")
            else:
                lines.append(f"  {n.name} = max({n.base},0)")
        lines.append(f"init at {self.entry}: " + "; ".join(f"{k} = {v}" for k, v in self.initial))
        for e in self.edges:
            parts = "; ".join(f"{symbol(n)}' <= {symbol(n)} {fmt_delta(d)}" for n, d in e.deltas)
            lines.append(f"{e.source} -> {e.target} : {parts}")
        return "\n".join(lines) + "\n"


def symbol(name: str) -> str:
    return name if name.isidentifier() else f"[{name}]"


def fmt_delta(d: SymConst) -> str:
    v = d.value
    if isinstance(v, bx.Const):
        return f"- {-v.value}" if v.value < 0 else f"+ {v.value}"
    if isinstance(v, bx.Add):
        return f"+ ({v})"
    s = str(v)
    return f"- {bx.neg(v)}" if s.startswith("-") else f"+ {s}"
