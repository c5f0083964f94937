"""Loop paths, path relations and upper-bound invariants.

A loop path is a simple cycle at a loop header that stays inside the
header's natural loop; inner loops are not unwound. ``contract`` composes
the transitions of a loop path into one relation over the values at the
header. ``Invariants`` derives parameter-only upper bounds for expressions
at program points, using guards that dominate the point, monotonicity, a
sign-directed split of linear combinations and reaching definitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from . import expr as bx
from .cfg import Cfg, Transition, compose, subst_constraint, subst_value
from .fm import implies, nonneg, satisfiable
from .lang import Div, Value
from .linexpr import Constraint, LinExpr
from .loops import LoopInfo

DEFAULT_PATH_CAP = 5000
DEFAULT_MERGE_THRESHOLD = 250
DEFAULT_BUDGET = 3


class PathExplosion(Exception):
    def __init__(self, header: str, cap: int):
        super().__init__(f"more than {cap} loop paths at {header}")
        self.header = header
        self.cap = cap


@dataclass(frozen=True)
class LoopPath:
    header: str
    edges: tuple[int, ...]

    def locations(self, cfg: Cfg) -> list[str]:
        return [self.header] + [cfg.transitions[i].target for i in self.edges]

    def describe(self, cfg: Cfg) -> str:
        return " ".join(f"e{i}" for i in self.edges)


@dataclass(frozen=True)
class PathRelation:
    path: LoopPath
    guards: tuple[Constraint, ...]
    updates: tuple[tuple[str, Value], ...]
    sound_guards: tuple[Constraint, ...] = ()
    # set only for merged relations: one guard conjunction per member path
    disjuncts: tuple[tuple[Constraint, ...], ...] | None = None
    members: tuple[LoopPath, ...] = ()

    @property
    def update(self) -> dict[str, Value]:
        return dict(self.updates)

    def value_of(self, var: str) -> Value:
        return self.update.get(var, LinExpr.var(var))

    def dump(self) -> str:
        if self.disjuncts is not None:
            g = " || ".join("(" + ", ".join(map(str, d)) + ")" for d in self.disjuncts)
        else:
            g = ", ".join(map(str, self.guards)) or "true"
        u = ", ".join(f"{v} := {e}" for v, e in self.updates) or "id"
        return f"guards: {g}\nupdates: {u}"


def enumerate_loop_paths(cfg: Cfg, info: LoopInfo, header: str, cap: int = DEFAULT_PATH_CAP) -> list[LoopPath]:
    """Simple cycles at ``header`` inside its natural loop, in lexicographic
    order of transition indices."""
    body = info.loops[header]
    out: list[LoopPath] = []
    by_source: dict[str, list[Transition]] = {}
    for t in cfg.transitions:
        if t.source in body and t.target in body:
            by_source.setdefault(t.source, []).append(t)

    def dfs(loc: str, on_path: set[str], edges: list[int]) -> None:
        for t in by_source.get(loc, ()):
            if t.target == header:
                out.append(LoopPath(header, tuple(edges + [t.index])))
                if len(out) > cap:
                    raise PathExplosion(header, cap)
            elif t.target not in on_path:
                on_path.add(t.target)
                edges.append(t.index)
                dfs(t.target, on_path, edges)
                edges.pop()
                on_path.discard(t.target)

    dfs(header, {header}, [])
    return out


def inner_modified(cfg: Cfg, info: LoopInfo, header: str) -> frozenset[str]:
    body = info.loops[header]
    out: set[str] = set()
    for t in cfg.transitions:
        if t.source in body and t.target in body:
            out |= t.modifies()
    return frozenset(out)


@dataclass
class SymState:
    """Forward symbolic state: facts over entry symbols and current values."""

    facts: list[Constraint] = field(default_factory=list)
    sigma: dict[str, LinExpr] = field(default_factory=dict)

    def value(self, var: str) -> LinExpr:
        return self.sigma.get(var, LinExpr.var(var))

    def read(self, e: LinExpr) -> LinExpr:
        return e.subst({v: self.value(v) for v in e.variables() if v in self.sigma})

    def assume(self, guards: Iterable[Constraint]) -> None:
        for g in guards:
            self.facts.append(Constraint(self.read(g.expr)))

    def step(self, t: Transition) -> None:
        self.assume(t.guard)
        new = dict(self.sigma)
        for var, val in t.assigns:
            if isinstance(val, Div):
                new[var] = LinExpr.var(f"{var}@t{t.index}")
            else:
                new[var] = self.read(val)
        self.sigma = new

    def havoc(self, names: Iterable[str], tag: str) -> None:
        for v in sorted(names):
            self.sigma[v] = LinExpr.var(f"{v}@{tag}")

    def copy(self) -> "SymState":
        return SymState(list(self.facts), dict(self.sigma))


def run_forward(cfg: Cfg, info: LoopInfo, header: str, edges: Sequence[int]) -> SymState:
    """Execute ``edges`` from ``header``; variables changed by an inner loop
    become fresh symbols whenever that inner loop's header is entered."""
    st = SymState()
    for i in edges:
        t = cfg.transitions[i]
        st.step(t)
        if t.target != header and t.target in info.loops:
            st.havoc(inner_modified(cfg, info, t.target), t.target)
    return st


def contract(cfg: Cfg, info: LoopInfo, path: LoopPath) -> PathRelation:
    update: dict[str, Value] = {}
    guards: list[Constraint] = []
    for i in path.edges:
        t = cfg.transitions[i]
        for g in t.guard:
            c = subst_constraint(g, update)
            if c is not None:
                guards.append(c)
        nxt = compose(update, t.update)
        if nxt is None:
            # not linearly expressible: keep what is exact, forget the rest
            nxt = dict(update)
            for var, val in t.assigns:
                v = subst_value(val, update)
                nxt[var] = v if v is not None else LinExpr.var(f"{var}@t{t.index}")
        update = nxt
    st = run_forward(cfg, info, path.header, path.edges)
    return PathRelation(
        path=path,
        guards=tuple(_dedup(guards)),
        updates=tuple(sorted(update.items())),
        sound_guards=tuple(_dedup(st.facts)),
        members=(path,),
    )


def _dedup(xs: Iterable[Constraint]) -> list[Constraint]:
    seen: dict[Constraint, None] = {}
    for x in xs:
        if not (x.expr.is_constant() and x.expr.constant >= 0):
            seen.setdefault(x)
    return list(seen)


def feasible(rel: PathRelation, params: Iterable[str] = ()) -> bool:
    base = nonneg(params)
    if rel.disjuncts is not None:
        return any(satisfiable(list(d) + base) for d in rel.disjuncts)
    guards = rel.sound_guards if rel.sound_guards or not rel.guards else rel.guards
    return satisfiable(list(guards) + base)


def merge_paths(rels: list[PathRelation], threshold: int = DEFAULT_MERGE_THRESHOLD) -> list[PathRelation]:
    """Group relations with structurally equal updates once there are more
    than ``threshold`` of them."""
    if len(rels) <= threshold:
        return rels
    groups: dict[tuple, list[PathRelation]] = {}
    for r in rels:
        groups.setdefault(r.updates, []).append(r)
    out = []
    for updates, members in groups.items():
        disj: dict[tuple, None] = {}
        for m in members:
            for d in (m.disjuncts if m.disjuncts is not None else (m.sound_guards,)):
                disj.setdefault(d)
        common = [g for g in members[0].guards if all(g in m.guards for m in members)]
        out.append(
            PathRelation(
                path=members[0].path,
                guards=tuple(common),
                updates=updates,
                sound_guards=tuple(g for g in common if all(g in m.sound_guards for m in members)),
                disjuncts=tuple(disj),
                members=tuple(p for m in members for p in m.members),
            )
        )
    return out


# ------------------------------------------------------------- lin -> bound


def lin_to_bound(e: LinExpr) -> bx.BoundExpr:
    terms = [bx.mul(bx.const(c), bx.param(n, natural="@" not in n)) for n, c in e.terms]
    return bx.add(bx.const(e.constant), *terms)


def bound_to_lin(b: bx.BoundExpr) -> LinExpr:
    """Inverse of ``lin_to_bound``; ValueError for non-linear bounds."""
    poly = bx.to_poly(b)
    e = LinExpr()
    for mono, c in poly.items():
        if mono == ():
            e = e + c
        elif len(mono) == 1 and mono[0][1] == 1 and isinstance(mono[0][0], bx.Param):
            e = e + LinExpr.var(mono[0][0].name, c)
        else:
            raise ValueError(f"not linear: {b}")
    return e


class _Pending:
    def __repr__(self) -> str:
        return "PENDING"


PENDING = _Pending()
"""Result of an invariant query that needs a transition bound not known yet."""

INIT = -1  # pseudo definition: the zero value every local starts with


def reaching_definitions(cfg: Cfg, var: str, loc: str) -> set[int]:
    """Indices of transitions assigning ``var`` that may reach ``loc``;
    ``INIT`` stands for the initial value."""
    reach: dict[str, set[int]] = {l: set() for l in cfg.locations}
    reach[cfg.begin] = {INIT}
    changed = True
    while changed:
        changed = False
        for t in cfg.transitions:
            out = {t.index} if var in t.modifies() else reach[t.source]
            if not out <= reach[t.target]:
                reach[t.target] |= out
                changed = True
    return reach[loc]


def read_before_assigned(cfg: Cfg, var: str) -> bool:
    """Whether some path from begin may read ``var`` before assigning it."""
    seen = {cfg.begin}
    work = [cfg.begin]
    while work:
        loc = work.pop()
        for t in cfg.outgoing(loc):
            if var in t.reads():
                return True
            if var not in t.modifies() and t.target not in seen:
                seen.add(t.target)
                work.append(t.target)
    return False


EdgeBound = Callable[[int], "bx.BoundExpr | None | _Pending"]


class Invariants:
    """Upper and lower invariants for one analysis run (memoized)."""

    def __init__(
        self,
        cfg: Cfg,
        info: LoopInfo,
        paths: Mapping[str, list[LoopPath]],
        edge_bound: EdgeBound | None = None,
        context_cap: int = DEFAULT_PATH_CAP,
    ):
        self.cfg = cfg
        self.info = info
        self.paths = paths
        self.edge_bound = edge_bound or (lambda i: PENDING)
        self.context_cap = context_cap
        self.params = tuple(cfg.params)
        self._contexts: dict[tuple[str, str], list[SymState] | None] = {}
        self._memo: dict[tuple, object] = {}
        self._facts: dict[str, list[Constraint]] = {}

    # -- contexts ---------------------------------------------------------

    def headers_around(self, loc: str) -> list[str]:
        hs = [h for h in self.info.headers if loc in self.info.loops[h]]
        return sorted(hs, key=lambda h: len(self.info.loops[h]))

    def contexts_from(self, header: str, loc: str) -> list[SymState] | None:
        """Symbolic states for every simple path from ``header`` to ``loc``
        inside the header's loop; None when there are too many."""
        key = (header, loc)
        if key in self._contexts:
            return self._contexts[key]
        body = self.info.loops[header]
        found: list[list[int]] = []
        overflow = False

        def dfs(at: str, on_path: set[str], edges: list[int]) -> None:
            nonlocal overflow
            if overflow:
                return
            if at == loc:
                found.append(list(edges))
                if len(found) > self.context_cap:
                    overflow = True
                return
            for t in self.cfg.outgoing(at):
                if t.target in body and t.target != header and t.target not in on_path:
                    on_path.add(t.target)
                    edges.append(t.index)
                    dfs(t.target, on_path, edges)
                    edges.pop()
                    on_path.discard(t.target)

        dfs(header, {header}, [])
        result = None if overflow else [run_forward(self.cfg, self.info, header, p) for p in found]
        self._contexts[key] = result
        return result

    def context_sets(self, loc: str, guard: Sequence[Constraint] = ()) -> list[list[SymState]]:
        """Alternative complete case splits for states at ``loc``, innermost
        enclosing header first, ending with the guard-only split."""
        out: list[list[SymState]] = []
        for h in self.headers_around(loc):
            ctxs = self.contexts_from(h, loc)
            if not ctxs:
                continue
            split = []
            for c in ctxs:
                c = c.copy()
                c.assume(guard)
                split.append(c)
            out.append(split)
        trivial = SymState()
        trivial.assume(guard)
        out.append([trivial])
        return out

    def proves(self, claim: LinExpr, loc: str, guard: Sequence[Constraint] = ()) -> bool:
        """``claim >= 0`` holds in every state at ``loc`` satisfying ``guard``."""
        base = nonneg(self.params)
        for split in self.context_sets(loc, guard):
            if all(implies(c.facts + base, Constraint(c.read(claim))) for c in split):
                return True
        # retry with what is known about the variables at each header
        for h in self.headers_around(loc):
            ctxs = self.contexts_from(h, loc)
            extra = self.header_facts(h) if ctxs else []
            if not extra:
                continue
            ok = True
            for c in ctxs:
                c = c.copy()
                c.assume(guard)
                if not implies(c.facts + extra + base, Constraint(c.read(claim))):
                    ok = False
                    break
            if ok:
                return True
        return False

    def header_facts(self, header: str) -> list[Constraint]:
        """Linear upper invariants ``v <= u`` of the variables at ``header``."""
        if header in self._facts:
            return self._facts[header]
        self._facts[header] = []  # cut cycles through nested proofs
        out = []
        pending = False
        for v in self.cfg.variables:
            u = self._query(LinExpr.var(v), header, (), DEFAULT_BUDGET)
            pending = pending or u is PENDING
            if u is None or u is PENDING:
                continue
            try:
                lin = bound_to_lin(u)  # type: ignore[arg-type]
            except ValueError:
                continue
            out.append(Constraint(lin - LinExpr.var(v)))
        if pending:
            del self._facts[header]  # retry once the missing bounds are known
        else:
            self._facts[header] = out
        return out

    # -- upper invariants -------------------------------------------------

    def upper(
        self,
        e: LinExpr,
        loc: str | None = None,
        via: Transition | None = None,
        budget: int = DEFAULT_BUDGET,
    ):
        """Parameter-only ``u`` with ``e <= u`` at ``loc`` (or in the
        pre-state of ``via``); None when no rule applies, PENDING when a
        needed transition bound is not known yet."""
        if via is not None:
            loc = via.source
        assert loc is not None
        return self._query(e, loc, tuple(via.guard) if via is not None else (), budget)

    def _query(self, e: LinExpr, loc: str, guard: tuple[Constraint, ...], budget: int):
        key = ("up", e, loc, guard, budget)
        if key in self._memo:
            return self._memo[key]
        self._memo[key] = None  # cut cycles through recursive queries
        result = self._upper(e, loc, guard, budget)
        self._memo[key] = result
        return result

    def _upper(self, e: LinExpr, loc: str, guard: tuple[Constraint, ...], budget: int):
        if e.only_over(self.params):
            return lin_to_bound(e)
        pending = False
        for rule in (self._rule_dominating, self._rule_monotone, self._rule_split, self._rule_defs):
            r = rule(e, loc, guard, budget)
            if r is PENDING:
                pending = True
            elif r is not None:
                return r
        return PENDING if pending else None

    def _rule_dominating(self, e, loc, guard, budget):
        pending = False
        for split in self.context_sets(loc, guard):
            results = []
            for ctx in split:
                r = self._from_facts(ctx, ctx.read(e), loc, budget)
                if r is PENDING:
                    pending = True
                if r is None or r is PENDING:
                    break
                results.append(r)
            else:
                out = results[0]
                for r in results[1:]:
                    out = bx.smax(out, r)
                return out
        return PENDING if pending else None

    def _from_facts(self, ctx: SymState, E: LinExpr, loc: str, budget: int):
        if E.only_over(self.params):
            return lin_to_bound(E)
        pending = False
        header = self.headers_around(loc)
        for f in ctx.facts:
            for v, ce in E.terms:
                if v in self.params:
                    continue
                cf = f.expr.coeff(v)
                if cf == 0 or (ce > 0) == (cf > 0) or ce % cf:
                    continue
                u = E + f.expr.scale(-ce // cf)
                if u.only_over(self.params):
                    return lin_to_bound(u)
                if budget > 0 and header and all("@" not in n for n in u.variables()):
                    # u speaks about values at the enclosing header's entry
                    for h in header:
                        if self.contexts_from(h, loc) is not None:
                            r = self.upper(u, loc=h, budget=budget - 1)
                            if r is PENDING:
                                pending = True
                            elif r is not None:
                                return r
                            break
        return PENDING if pending else None

    def _rule_monotone(self, e, loc, guard, budget):
        for t in self.cfg.transitions:
            after = subst_value(e, t.update)
            if after is None:
                return None
            diff = after - e
            if not diff.only_over(self.params):
                return None
            if not bx.nonneg(bx.neg(lin_to_bound(diff))):
                return None
        return lin_to_bound(e.subst({v: LinExpr() for v in e.variables() if v not in self.params}))

    def _rule_split(self, e, loc, guard, budget):
        locals_ = [(v, c) for v, c in e.terms if v not in self.params]
        if budget <= 0 or (len(locals_) == 1 and locals_[0][1] == 1):
            return None
        parts = [lin_to_bound(LinExpr.make(e.constant, [(v, c) for v, c in e.terms if v in self.params]))]
        pending = False
        for v, c in locals_:
            single = LinExpr.var(v)
            if c > 0:
                b = self._query(single, loc, guard, budget - 1)
            else:
                b = self.lower(single, loc, guard)
            if b is PENDING:
                pending = True
                continue
            if b is None:
                return None
            parts.append(bx.mul(bx.const(c), b))
        if pending:
            return PENDING
        return bx.add(*parts)

    def _rule_defs(self, e, loc, guard, budget):
        if len(e.terms) != 1 or e.terms[0][1] != 1:
            return None
        var = e.terms[0][0]
        if var in self.params:
            return None
        shift = e.constant
        bases: list[bx.BoundExpr] = []
        increments: list[bx.BoundExpr] = []
        seen: set[int] = set()
        work = sorted(reaching_definitions(self.cfg, var, loc))
        pending = False
        while work:
            d = work.pop(0)
            if d in seen:
                continue
            seen.add(d)
            if d == INIT:
                bases.append(bx.ZERO)
                continue
            t = self.cfg.transitions[d]
            val = t.value_of(var)
            if isinstance(val, Div):
                return None
            step = val - LinExpr.var(var)
            if step.only_over(self.params):
                if bx.nonneg(bx.neg(lin_to_bound(step))):
                    # never increases: no count needed
                    work.extend(sorted(reaching_definitions(self.cfg, var, t.source)))
                    continue
                count = self.edge_bound(d)
                if count is PENDING:
                    pending = True
                    continue
                if count is None:
                    return None
                increments.append(bx.mul(count, bx.max0(lin_to_bound(step))))
                work.extend(sorted(reaching_definitions(self.cfg, var, t.source)))
                continue
            if budget <= 0:
                return None
            b = self.upper(val, via=t, budget=budget - 1)
            if b is PENDING:
                pending = True
                continue
            if b is None:
                return None
            bases.append(b)
        if pending:
            return PENDING
        if not bases:
            return None
        top = bases[0]
        for b in bases[1:]:
            top = bx.smax(top, b)
        return bx.add(top, bx.const(shift), *increments)

    # -- lower invariants -------------------------------------------------

    def lower(self, e: LinExpr, loc: str, guard: Sequence[Constraint] = ()):
        """Parameter-only ``l`` with ``l <= e`` at ``loc``, or None."""
        if e.only_over(self.params):
            return lin_to_bound(e)
        for split in self.context_sets(loc, guard):
            results = []
            for ctx in split:
                E = ctx.read(e)
                r = None
                for f in ctx.facts:
                    d = E - f.expr
                    if d.only_over(self.params):
                        r = lin_to_bound(d)
                        break
                if r is None:
                    break
                results.append(r)
            else:
                out = results[0]
                for r in results[1:]:
                    out = bx.sub(out, bx.max0(bx.sub(out, r)))
                return out
        # never decreased anywhere: the start value is a lower bound
        for t in self.cfg.transitions:
            after = subst_value(e, t.update)
            if after is None:
                return None
            diff = after - e
            if not diff.only_over(self.params) or not bx.nonneg(lin_to_bound(diff)):
                return None
        return lin_to_bound(e.subst({v: LinExpr() for v in e.variables() if v not in self.params}))
