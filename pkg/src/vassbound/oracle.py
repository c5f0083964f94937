"""Trace exploration oracle for checking computed bounds.

Traces are explored exhaustively by a memoized depth-first search. Every
trace is split into loop-path instances on the fly with a location stack:
when a location already on the stack is reached again, the enclosed simple
cycle is popped, rotated to start at its loop header and counted. For each
counter (a set of loop paths) the search returns the largest number of
instances any trace produces.

For a lossy VASS only the maximal (equality) updates are explored: any
lossy trace is dominated pointwise by the equality trace along the same
edges, so the maxima are the same.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from . import expr as bx
from .abstraction import LossyVass
from .cfg import Cfg, Transition
from .lang import Div
from .symexec import LoopPath

DEFAULT_STEP_CAP = 100_000
DEFAULT_GRID_MAX = 4


class MalformedPath(Exception):
    pass


# ------------------------------------------------------------ decomposition


@dataclass(frozen=True)
class Decomposer:
    """Splits location/edge sequences into loop-path instances."""

    transitions: Sequence[Transition]
    back_edges: frozenset[tuple[str, str]]

    def push(self, stack: tuple, edge: int) -> tuple[tuple, LoopPath | None]:
        """Advance ``stack`` (a tuple of ``(location, arriving edge)``) by
        ``edge``; returns the new stack and the instance completed, if any."""
        t = self.transitions[edge]
        if stack[-1][0] != t.source:
            raise MalformedPath(f"edge e{edge} does not leave {stack[-1][0]}")
        for k, (loc, _) in enumerate(stack):
            if loc == t.target:
                cycle = [e for _, e in stack[k + 1:]] + [edge]
                return stack[: k + 1], self.rotate(cycle)
        return stack + ((t.target, edge),), None

    def rotate(self, cycle: list[int]) -> LoopPath:
        for k, e in enumerate(cycle):
            t = self.transitions[e]
            if (t.source, t.target) in self.back_edges:
                header = t.target
                start = (k + 1) % len(cycle)
                return LoopPath(header, tuple(cycle[start:] + cycle[:start]))
        raise MalformedPath("cycle without a back edge: " + " ".join(f"e{e}" for e in cycle))


def decompose_cycles(
    transitions: Sequence[Transition],
    back_edges: Iterable[tuple[str, str]],
    start: str,
    edges: Sequence[int],
) -> tuple[list[LoopPath], list[int]]:
    """Instances of loop paths in the walk ``edges`` from ``start`` and the
    edges left unconsumed (empty for a walk that returns to ``start``)."""
    d = Decomposer(transitions, frozenset(back_edges))
    stack: tuple = ((start, None),)
    found: list[LoopPath] = []
    for e in edges:
        stack, inst = d.push(stack, e)
        if inst is not None:
            found.append(inst)
    return found, [e for _, e in stack[1:]]


# ------------------------------------------------------------ exploration

Successors = Callable[[str, Hashable], Iterable[tuple[int, Hashable]]]


@dataclass
class TraceStats:
    maxima: dict[str, int]
    steps: int  # length of the longest trace
    states: int
    cap_hit: bool
    unmatched: set = field(default_factory=set)


@dataclass
class Explorer:
    decomposer: Decomposer
    successors: Successors
    counters: Mapping[str, frozenset[LoopPath]]
    step_cap: int = DEFAULT_STEP_CAP
    state_cap: int = 2_000_000
    memo: dict = field(default_factory=dict)
    cap_hit: bool = False
    unmatched: set = field(default_factory=set)

    def _gain(self, inst: LoopPath | None) -> tuple[int, ...]:
        names = list(self.counters)
        if inst is None:
            return (0,) * len(names)
        if not any(inst in self.counters[n] for n in names):
            self.unmatched.add(inst)
        return tuple(1 if inst in self.counters[n] else 0 for n in names)

    def _moves(self, key):
        loc, payload, stack = key
        out = []
        for edge, nxt in self.successors(loc, payload):
            new_stack, inst = self.decomposer.push(stack, edge)
            target = self.decomposer.transitions[edge].target
            out.append((edge, (target, nxt, new_stack), self._gain(inst)))
        return out

    def run(self, start: str, payload: Hashable) -> TraceStats:
        root = (start, payload, ((start, None),))
        width = len(self.counters)
        on_stack: set = set()
        work = [(root, None)]
        # iterative post-order: memo[key] = (maxima tuple, longest suffix)
        while work:
            key, moves = work.pop()
            if moves is None:
                if key in self.memo:
                    continue
                if len(self.memo) > self.state_cap:
                    self.cap_hit = True
                    self.memo[key] = (None, 0)
                    continue
                moves = self._moves(key)
                on_stack.add(key)
                work.append((key, moves))
                for _, child, _ in moves:
                    if child in on_stack:
                        self.cap_hit = True  # a cycle in the state space
                    elif child not in self.memo:
                        work.append((child, None))
                continue
            on_stack.discard(key)
            # only traces that return to the entry with nothing left open count
            best = [0] * width if self._closed(key, start) else None
            longest = 0
            for _, child, gain in moves:
                sub = self.memo.get(child)
                if sub is None:
                    continue  # back edge of a state cycle
                longest = max(longest, 1 + sub[1])
                if sub[0] is None:
                    continue
                if best is None:
                    best = [g + v for g, v in zip(gain, sub[0])]
                    continue
                for i in range(width):
                    v = gain[i] + sub[0][i]
                    if v > best[i]:
                        best[i] = v
            if longest > self.step_cap:
                self.cap_hit = True
            self.memo[key] = (None if best is None else tuple(best), longest)
        maxima, longest = self.memo[root]
        if maxima is None:
            maxima = (0,) * width
        return TraceStats(dict(zip(self.counters, maxima)), longest, len(self.memo), self.cap_hit, self.unmatched)

    @staticmethod
    def _closed(key, start: str) -> bool:
        loc, _, stack = key
        return loc == start and len(stack) == 1

    def witness(self, start: str, payload: Hashable, counter: str, limit: int = 10_000) -> list[int]:
        """Edge sequence of a trace realizing the maximum of ``counter``."""
        i = list(self.counters).index(counter)
        key = (start, payload, ((start, None),))
        trace: list[int] = []
        while len(trace) < limit:
            if key not in self.memo:
                break
            best = self.memo[key][0]
            if best is None or (best[i] == 0 and self._closed(key, start)):
                break
            want = best[i]
            for edge, child, gain in self._moves(key):
                sub = self.memo.get(child)
                if sub is not None and sub[0] is not None and gain[i] + sub[0][i] == want:
                    trace.append(edge)
                    key = child
                    break
            else:
                break
        return trace


# ------------------------------------------------------------ VASS semantics


def vass_successors(vass: LossyVass, params: Mapping[str, int]) -> Successors:
    names = vass.norm_names
    numeric: dict[str, list[tuple[int, tuple[int, ...]]]] = {}
    for e in vass.edges:
        row = dict(e.deltas)
        if any(n not in row for n in names):
            continue  # edge without a full abstraction lies on no loop path
        vec = tuple(bx.evaluate(row[n].value, params) for n in names)
        numeric.setdefault(e.source, []).append((e.index, vec))

    def succ(loc: str, values: tuple[int, ...]):
        for index, vec in numeric.get(loc, ()):
            new = tuple(v + d for v, d in zip(values, vec))
            if all(v >= 0 for v in new):
                yield index, new

    return succ


def simulate(
    vass: LossyVass,
    params: Mapping[str, int],
    decomposer: Decomposer,
    counters: Mapping[str, frozenset[LoopPath]],
    step_cap: int = DEFAULT_STEP_CAP,
) -> TraceStats:
    start = tuple(bx.evaluate(vass.init_of(n), params) for n in vass.norm_names)
    ex = Explorer(decomposer, vass_successors(vass, params), counters, step_cap)
    return ex.run(vass.entry, start)


# ------------------------------------------------------------ concrete semantics


def step_concrete(t: Transition, env: Mapping[str, int]) -> dict[str, int] | None:
    """Successor environment of ``t`` or None when its guard fails."""
    if not all(g.holds(env) for g in t.guard):
        return None
    new = dict(env)
    for var, val in t.assigns:
        new[var] = env[val.var] // val.divisor if isinstance(val, Div) else val.evaluate(env)
    return new


def concrete_successors(cfg: Cfg, params: Mapping[str, int]) -> Successors:
    names = tuple(cfg.variables)

    def succ(loc: str, values: tuple[int, ...]):
        env = dict(zip(names, values))
        env.update(params)
        for t in cfg.outgoing(loc):
            new = step_concrete(t, env)
            if new is not None:
                yield t.index, tuple(new[v] for v in names)

    return succ


def initial_env(cfg: Cfg) -> tuple[int, ...]:
    return tuple(0 for _ in cfg.variables)


def reachable(cfg: Cfg, params: Mapping[str, int], cap: int = 200_000):
    """All reachable ``(location, env)`` pairs and the steps between them;
    ``complete`` is False when the cap stopped the search."""
    names = tuple(cfg.variables)
    succ = concrete_successors(cfg, params)
    start = (cfg.begin, initial_env(cfg))
    seen = {start}
    work = [start]
    steps = []
    while work:
        loc, values = work.pop()
        for edge, nxt in succ(loc, values):
            target = (cfg.transitions[edge].target, nxt)
            steps.append(((loc, values), edge, target))
            if target not in seen:
                if len(seen) >= cap:
                    return seen, steps, False, names
                seen.add(target)
                work.append(target)
    return seen, steps, True, names


# ------------------------------------------------------------ soundness check


@dataclass
class Check:
    valuation: dict[str, int]
    counter: str
    observed: int
    bound: str
    value: int | None
    ok: bool
    witness: list[int] = field(default_factory=list)


@dataclass
class Verdict:
    checks: list[Check]
    incomplete: list[dict[str, int]]
    ranked: bool
    unmatched: int = 0

    @property
    def violations(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    @property
    def ok(self) -> bool:
        return not self.violations and not (self.ranked and self.incomplete) and not self.unmatched

    def render(self) -> str:
        lines = []
        for c in self.checks:
            v = ",".join(f"{k}={x}" for k, x in c.valuation.items()) or "-"
            mark = "ok" if c.ok else "VIOLATION"
            lines.append(f"[{v}] {c.counter}: observed {c.observed} <= {c.bound} ({c.value}) {mark}")
            if not c.ok and c.witness:
                lines.append("    witness: " + " ".join(f"e{e}" for e in c.witness))
        for v in self.incomplete:
            lines.append("incomplete exploration at " + (",".join(f"{k}={x}" for k, x in v.items()) or "-"))
        lines.append("verdict: " + ("pass" if self.ok else "FAIL"))
        return "\n".join(lines) + "\n"


def bound_counters(analysis, corrupt: Callable[[bx.BoundExpr], bx.BoundExpr] | None = None):
    """Counters and their bounds: every loop path, every merged group,
    every loop header and the whole program."""
    counters: dict[str, frozenset[LoopPath]] = {}
    bounds: dict[str, bx.BoundExpr | None] = {}
    fix = corrupt or (lambda b: b)
    ts = analysis.merged_ts
    b = analysis.bounds
    for t in ts.transitions:
        group = frozenset(t.provenance)
        tb = b.get(t.id)
        tb = None if tb is None else fix(tb)
        counters[t.name] = group
        bounds[t.name] = tb
        if len(group) > 1:
            for p in t.provenance:
                pid = "path " + p.header + ":" + " ".join(f"e{e}" for e in p.edges)
                counters[pid] = frozenset([p])
                bounds[pid] = tb
    for h in analysis.loop_headers():
        members = frozenset(p for t in ts.transitions for p in t.provenance if p.header == h)
        counters[f"loop {h}"] = members
        lb = analysis.loop_bound(h)
        bounds[f"loop {h}"] = None if lb is None else fix(lb)
    total = analysis.total
    counters["total"] = frozenset(p for t in ts.transitions for p in t.provenance if p.header != analysis.dummy)
    bounds["total"] = None if total is None else fix(total)
    return counters, bounds


def grid(params: Sequence[str], grid_max: int = DEFAULT_GRID_MAX) -> list[dict[str, int]]:
    return [dict(zip(params, vals)) for vals in itertools.product(range(grid_max + 1), repeat=len(params))]


def check_soundness(
    analysis,
    grid_max: int = DEFAULT_GRID_MAX,
    step_cap: int = DEFAULT_STEP_CAP,
    corrupt: Callable[[bx.BoundExpr], bx.BoundExpr] | None = None,
    valuations: Iterable[Mapping[str, int]] | None = None,
) -> Verdict:
    if analysis.cfg.dummy_header is None:
        raise ValueError("the oracle checks whole-program (wrapped) analyses only")
    counters, bounds = bound_counters(analysis, corrupt)
    decomposer = Decomposer(analysis.cfg.transitions, frozenset(analysis.info.back_edges))
    ranked = analysis.failure is None
    checks: list[Check] = []
    incomplete = []
    unmatched = 0
    points = list(valuations) if valuations is not None else grid(analysis.cfg.params, grid_max)
    vass = analysis.vass
    for val in points:
        val = dict(val)
        start = tuple(bx.evaluate(vass.init_of(n), val) for n in vass.norm_names)
        ex = Explorer(decomposer, vass_successors(vass, val), counters, step_cap)
        stats = ex.run(vass.entry, start)
        unmatched += len(stats.unmatched)
        if stats.cap_hit:
            incomplete.append(val)
        for name in counters:
            b = bounds[name]
            if b is None:
                continue
            value = bx.evaluate(b, val)
            obs = stats.maxima[name]
            ok = obs <= value
            wit = [] if ok else ex.witness(vass.entry, start, name)
            checks.append(Check(val, name, obs, str(b), value, ok, wit))
    return Verdict(checks, incomplete, ranked, unmatched)


def shrink_params(b: bx.BoundExpr) -> bx.BoundExpr:
    """Mutation used to test the oracle: every parameter ``p`` becomes ``p-1``."""
    return bx.subst(b, {p: bx.sub(bx.param(p), bx.ONE) for p in bx.params(b)})
