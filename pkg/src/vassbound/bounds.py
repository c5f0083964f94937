"""Transition bounds from a lexicographic ranking, and their aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import expr as bx
from .abstraction import Norm
from .cfa import AbstractTransition, TransitionSystem
from .cfg import Cfg
from .lang import Div
from .linexpr import LinExpr
from .loops import LoopInfo
from .ranking import LexRanking
from .symexec import inner_modified, lin_to_bound, read_before_assigned


class InitialValueUnknown(Exception):
    pass


# ------------------------------------------------------------ merging


def merge_transitions(ts: TransitionSystem, lex: LexRanking) -> tuple[TransitionSystem, LexRanking]:
    """Merge transitions ranked by the same norm with the same decrement.

    The merged transition keeps the earlier id and position and takes the
    componentwise maximum of the deltas; the later component is deleted.
    Only ranked transitions take part.
    """
    trans = {t.id: t for t in ts.transitions}
    comps = list(lex.components)
    changed = True
    while changed:
        changed = False
        for i in range(len(comps)):
            ti, xi = comps[i]
            for j in range(i + 1, len(comps)):
                tj, xj = comps[j]
                a, b = trans[ti], trans[tj]
                if xi == xj and a.delta(xi).value == b.delta(xj).value:
                    merged = AbstractTransition(
                        id=a.id,
                        header=a.header,
                        deltas=tuple((n, d.join(b.delta(n))) for n, d in a.deltas),
                        provenance=a.provenance + b.provenance,
                    )
                    trans[ti] = merged
                    del trans[tj]
                    del comps[j]
                    changed = True
                    break
            if changed:
                break
    kept = tuple(trans[t.id] for t in ts.transitions if t.id in trans)
    return TransitionSystem(kept, ts.norms), LexRanking(tuple(comps))


# ------------------------------------------------------------ bound computation


@dataclass
class BoundComputer:
    """Memoized transition bounds; ``None`` means unbounded."""

    ts: TransitionSystem
    lex: LexRanking
    initial: Mapping[str, bx.BoundExpr | None]
    memo: dict[int, bx.BoundExpr | None] = field(default_factory=dict)
    calls: dict[int, int] = field(default_factory=dict)

    def bound(self, tid: int) -> bx.BoundExpr | None:
        if tid in self.memo:
            return self.memo[tid]
        self.calls[tid] = self.calls.get(tid, 0) + 1
        try:
            norm = self.lex.norm_of(tid)
        except KeyError:
            self.memo[tid] = None
            return None
        t = self.ts.by_id(tid)
        init = self.initial.get(norm)
        if init is None:
            self.memo[tid] = None
            return None
        total = [init]
        pos = self.lex.position(tid)
        for other in self.ts.transitions:
            if other.id == tid:
                continue
            k = other.delta(norm)
            if k.certainly_nonpositive():
                continue
            if not _ranked(self.lex, other.id) or self.lex.position(other.id) >= pos:
                # an increase from a later or unranked transition: no bound
                self.memo[tid] = None
                return None
            ob = self.bound(other.id)
            if ob is None:
                self.memo[tid] = None
                return None
            total.append(bx.mul(ob, bx.max0(k.value)))
        dec = t.delta(norm).decrement()
        assert dec is not None
        result = bx.floordiv(bx.add(*total), dec)
        self.memo[tid] = result
        return result

    def all_bounds(self) -> dict[int, bx.BoundExpr | None]:
        return {t.id: self.bound(t.id) for t in self.ts.transitions}


def _ranked(lex: LexRanking, tid: int) -> bool:
    return any(t == tid for t, _ in lex.components)


def compute_bounds(
    ts: TransitionSystem, lex: LexRanking, initial: Mapping[str, bx.BoundExpr | None]
) -> dict[int, bx.BoundExpr | None]:
    return BoundComputer(ts, lex, initial).all_bounds()


def sum_bounds(items: Iterable[bx.BoundExpr | None]) -> bx.BoundExpr | None:
    acc: list[bx.BoundExpr] = []
    for b in items:
        if b is None:
            return None
        acc.append(b)
    return bx.add(*acc)


def loop_bound(ts: TransitionSystem, bounds: Mapping[int, bx.BoundExpr | None], header: str) -> bx.BoundExpr | None:
    """Sum over the transitions with a loop path at ``header``; a merged
    transition bounds the joint count of its members and is added once."""
    return sum_bounds(bounds.get(t.id) for t in ts.transitions if any(p.header == header for p in t.provenance))


def program_total(
    ts: TransitionSystem, bounds: Mapping[int, bx.BoundExpr | None], dummy: str | None
) -> bx.BoundExpr | None:
    items = [bounds.get(t.id) for t in ts.transitions if any(p.header != dummy for p in t.provenance)]
    if not items:
        return bx.ONE if dummy is not None else bx.ZERO
    return sum_bounds(items)


def eval_bound(b: bx.BoundExpr, valuation: Mapping[str, int]) -> int:
    return bx.evaluate(b, valuation)


# ------------------------------------------------------------ initial values


def _norm_init(norm: Norm, value: LinExpr) -> bx.BoundExpr:
    v = lin_to_bound(value)
    return bx.log2ceil(v) if norm.kind == "log" else bx.max0(v)


def initial_value_wrapped(norm: Norm, cfg: Cfg) -> bx.BoundExpr:
    """Value of ``norm`` when the dummy loop header is first reached.

    A local that is always assigned before it is read does not influence any
    count, so a norm over such a local may start at 0.
    """
    y = cfg.dummy_var
    entry = {y: LinExpr.const(1)} if y else {}
    for v in norm.base.variables():
        if v in cfg.params or v == y:
            continue
        if not read_before_assigned(cfg, v):
            return bx.ZERO
    value = norm.base.subst({**{v: LinExpr() for v in norm.base.variables() if v not in cfg.params}, **entry})
    return _norm_init(norm, value)


def entry_states(cfg: Cfg, info: LoopInfo, header: str, cap: int = 1000) -> list[dict[str, LinExpr]]:
    """Symbolic values of all variables on arrival at a top-level ``header``.

    Earlier top-level loops are summarized by giving the variables they
    modify fresh symbols ``v@lK``.
    """
    top = [h for h in info.headers if info.parent[h] is None]
    owner = {}
    for h in top:
        for l in info.loops[h]:
            owner[l] = h
    zero = {v: LinExpr() for v in cfg.variables}
    found: list[dict[str, LinExpr]] = []

    def apply(sigma: dict[str, LinExpr], assigns) -> dict[str, LinExpr]:
        new = dict(sigma)
        for var, val in assigns:
            if isinstance(val, Div):
                new[var] = LinExpr.var(f"{var}@e")
            else:
                new[var] = val.subst(sigma)
        return new

    def visit(loc: str, sigma: dict[str, LinExpr], depth: int) -> None:
        if len(found) >= cap or depth > len(cfg.locations) + 1:
            return
        if loc == header:
            found.append(sigma)
            return
        g = owner.get(loc)
        if g is not None:
            s = dict(sigma)
            for v in sorted(inner_modified(cfg, info, g)):
                s[v] = LinExpr.var(f"{v}@{g}")
            for t in cfg.transitions:
                if t.source in info.loops[g] and t.target not in info.loops[g]:
                    visit(t.target, apply(s, t.assigns), depth + 1)
            return
        for t in cfg.outgoing(loc):
            visit(t.target, apply(sigma, t.assigns), depth + 1)

    visit(cfg.begin, zero, 0)
    return found


def initial_value_at(norm: Norm, cfg: Cfg, info: LoopInfo, header: str) -> bx.BoundExpr:
    states = entry_states(cfg, info, header)
    if not states:
        raise InitialValueUnknown(f"{norm} has no entry state at {header}")
    out: bx.BoundExpr | None = None
    for sigma in states:
        v = _norm_init(norm, norm.base.subst(sigma))
        out = v if out is None else bx.smax(out, v)
    assert out is not None
    return out
