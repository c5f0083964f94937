"""Control-flow graphs with guarded, contracted update transitions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .lang import Assign, Assumption, Comparison, Cond, Div, If, Program, Skip, Stmt, Value, While
from .linexpr import Constraint, LinExpr

BEGIN = "begin"
END = "end"

Update = dict[str, Value]


@dataclass(frozen=True)
class Transition:
    index: int
    source: str
    target: str
    guard: tuple[Constraint, ...] = ()
    assigns: tuple[tuple[str, Value], ...] = ()

    @property
    def update(self) -> Update:
        return dict(self.assigns)

    def value_of(self, var: str) -> Value:
        for v, e in self.assigns:
            if v == var:
                return e
        return LinExpr.var(var)

    def modifies(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.assigns)

    def reads(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.guard:
            out |= c.variables()
        for _, e in self.assigns:
            out |= {e.var} if isinstance(e, Div) else e.variables()
        return frozenset(out)

    def label(self) -> str:
        guard = ", ".join(str(c) for c in self.guard) or "true"
        upd = ", ".join(f"{v} := {e}" for v, e in self.assigns) or "id"
        return f"{self.source} -> {self.target} [guard: {guard}] [update: {upd}]"


@dataclass(frozen=True)
class Cfg:
    locations: tuple[str, ...]
    transitions: tuple[Transition, ...]
    params: tuple[str, ...]
    variables: tuple[str, ...]
    assumptions: tuple[Assumption, ...] = ()
    warnings: tuple[str, ...] = ()
    dummy_header: str | None = None
    dummy_var: str | None = None
    begin: str = BEGIN
    end: str = END

    def outgoing(self, loc: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == loc]

    def incoming(self, loc: str) -> list[Transition]:
        return [t for t in self.transitions if t.target == loc]

    def successors(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {l: [] for l in self.locations}
        for t in self.transitions:
            if t.target not in succ[t.source]:
                succ[t.source].append(t.target)
        return succ

    def dump(self) -> str:
        return "\n".join(t.label() for t in self.transitions) + "\n"


def is_identity(var: str, value: Value) -> bool:
    return isinstance(value, LinExpr) and value == LinExpr.var(var)


def subst_value(value: Value, update: Mapping[str, Value]) -> Value | None:
    """``value`` read after ``update``; None when the result is not expressible."""
    if isinstance(value, Div):
        inner = update.get(value.var, LinExpr.var(value.var))
        if isinstance(inner, LinExpr) and len(inner.terms) == 1 and inner.constant == 0 and inner.terms[0][1] == 1:
            return Div(inner.terms[0][0], value.divisor)
        return None
    lin: dict[str, LinExpr] = {}
    for name in value.variables():
        if name in update:
            repl = update[name]
            if isinstance(repl, Div):
                return None
            lin[name] = repl
    return value.subst(lin)


def subst_constraint(c: Constraint, update: Mapping[str, Value]) -> Constraint | None:
    e = subst_value(c.expr, update)
    return None if e is None else Constraint(e)


def compose(first: Mapping[str, Value], second: Mapping[str, Value]) -> Update | None:
    """Update equivalent to running ``first`` then ``second``."""
    out = dict(first)
    for var, val in second.items():
        v = subst_value(val, first)
        if v is None:
            return None
        out[var] = v
    return {k: v for k, v in out.items() if not is_identity(k, v)}


def cond_constraints(c: Comparison) -> list[Constraint]:
    """Normalize a comparison to ``e >= 0`` facts over the integers."""
    d = c.lhs - c.rhs
    if c.op == ">":
        return [Constraint(d - 1)]
    if c.op == ">=":
        return [Constraint(d)]
    if c.op == "<":
        return [Constraint(-d - 1)]
    if c.op == "<=":
        return [Constraint(-d)]
    if c.op == "==":
        return [Constraint(d), Constraint(-d)]
    raise ValueError(f"no conjunctive normal form for {c.op!r}")


def negate(c: Constraint) -> Constraint:
    return Constraint(-c.expr - 1)


@dataclass
class _Pending:
    source: str
    guard: list[Constraint]
    update: Update
    tags: tuple = ()


@dataclass
class _Builder:
    params: tuple[str, ...]
    counter: int = 0
    kinds: dict[str, str] = field(default_factory=dict)
    raw: list[tuple[_Pending, str]] = field(default_factory=list)

    def fresh(self, kind: str) -> str:
        self.counter += 1
        name = f"_{kind}{self.counter}"
        self.kinds[name] = kind
        return name

    def close(self, pendings: list[_Pending], target: str) -> None:
        for p in pendings:
            self.raw.append((p, target))

    def split_cond(self, cond: Cond) -> tuple[list[Constraint], bool]:
        guards: list[Constraint] = []
        nondet = cond.nondet
        for a in cond.atoms:
            if a.op == "!=":
                nondet = True  # disjunctive test: over-approximated by a free choice
            else:
                guards.extend(cond_constraints(a))
        return guards, nondet

    def branch(self, loc: str, cond: Cond) -> tuple[list[_Pending], list[_Pending]]:
        guards, nondet = self.split_cond(cond)
        taken = [_Pending(loc, list(guards), {}, (0,))]
        if nondet or not guards:
            other = [_Pending(loc, [], {}, (1,))]
        else:
            other = [_Pending(loc, [negate(g)], {}, (1, k)) for k, g in enumerate(guards)]
        return taken, other

    def block(self, stmts: tuple[Stmt, ...], pendings: list[_Pending]) -> list[_Pending]:
        for s in stmts:
            pendings = self.stmt(s, pendings)
        return pendings

    def stmt(self, s: Stmt, pendings: list[_Pending]) -> list[_Pending]:
        if isinstance(s, Skip):
            return pendings
        if isinstance(s, Assign):
            step = {s.var: s.value}
            out = []
            for p in pendings:
                u = compose(p.update, step)
                if u is None:
                    break
                out.append(_Pending(p.source, p.guard, u, p.tags))
            else:
                return out
            seq = self.fresh("seq")
            self.close(pendings, seq)
            u = {k: v for k, v in step.items() if not is_identity(k, v)}
            return [_Pending(seq, [], u, (0,))]
        if isinstance(s, While):
            head = self.fresh("hdr")
            self.close(pendings, head)
            stay, leave = self.branch(head, s.cond)
            self.close(self.block(s.body, stay), head)
            return leave
        if isinstance(s, If):
            loc = self.fresh("br")
            self.close(pendings, loc)
            then, orelse = self.branch(loc, s.cond)
            return self.block(s.then, then) + self.block(s.orelse, orelse)
        raise TypeError(s)


def build_cfg(prog: Program) -> Cfg:
    """Build the CFG of ``prog``; locations exist only at begin, end, loop
    headers and branch points, and straight-line code is contracted into the
    update map of a single transition."""
    b = _Builder(prog.params)
    b.close(b.block(prog.body, [_Pending(BEGIN, [], {}, ())]), END)

    order = list(b.kinds)
    headers = [n for n in order if b.kinds[n] == "hdr"]
    others = [n for n in order if b.kinds[n] != "hdr"]
    rename = {BEGIN: BEGIN, END: END}
    for i, n in enumerate(headers + others, start=1):
        rename[n] = f"l{i}"
    locations = (BEGIN,) + tuple(rename[n] for n in headers + others) + (END,)
    rank = {l: i for i, l in enumerate(locations)}

    keyed = []
    for created, (p, target) in enumerate(b.raw):
        keyed.append(((rank[rename[p.source]], p.tags, created), p, rename[target]))
    keyed.sort(key=lambda item: item[0])
    transitions = tuple(
        Transition(i, rename[p.source], target, tuple(p.guard), tuple(sorted(p.update.items())))
        for i, (_, p, target) in enumerate(keyed)
    )
    return Cfg(
        locations=locations,
        transitions=transitions,
        params=prog.params,
        variables=tuple(prog.variables()),
        assumptions=prog.assumptions,
        warnings=prog.warnings,
    )


def renumber(cfg: Cfg, transitions: list[Transition], **changes) -> Cfg:
    """Re-index ``transitions`` by (source location order, original order)."""
    locations = changes.get("locations", cfg.locations)
    rank = {l: i for i, l in enumerate(locations)}
    ordered = sorted(enumerate(transitions), key=lambda it: (rank[it[1].source], it[0]))
    fixed = tuple(replace(t, index=i) for i, (_, t) in enumerate(ordered))
    return replace(cfg, transitions=fixed, **changes)


def wrap_in_dummy_loop(cfg: Cfg) -> Cfg:
    """Enclose the program in ``while (y > 0) { P; y--; }`` with ``y = 1``.

    The new header ``l0`` is the unique entry and exit of one SCC covering
    every original transition.
    """
    taken = set(cfg.variables) | set(cfg.params)
    y = "y"
    k = 0
    while y in taken:
        k += 1
        y = f"y{k}"
    head = "l0"
    yv = LinExpr.var(y)
    out: list[Transition] = [Transition(0, cfg.begin, head, (), ((y, LinExpr.const(1)),))]
    for t in cfg.transitions:
        src, tgt, guard, assigns = t.source, t.target, t.guard, dict(t.assigns)
        if src == cfg.begin:
            src = head
            guard = (Constraint(yv - 1),) + guard
        if tgt == cfg.end:
            tgt = head
            assigns[y] = yv - 1
        out.append(Transition(0, src, tgt, guard, tuple(sorted(assigns.items()))))
    out.append(Transition(0, head, cfg.end, (Constraint(-yv),), ()))
    locations = (cfg.begin, head) + tuple(l for l in cfg.locations if l not in (cfg.begin, cfg.end)) + (cfg.end,)
    return renumber(
        cfg,
        out,
        locations=locations,
        variables=cfg.variables + (y,),
        dummy_header=head,
        dummy_var=y,
    )
