"""Dominators, back edges, natural loops and the reducibility check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .cfg import Cfg


class IrreducibleError(Exception):
    """The graph still has a cycle after removing all back edges."""

    def __init__(self, cycle: Sequence[str]):
        super().__init__("irreducible control flow: cycle " + " -> ".join(cycle) + " has no dominating header")
        self.cycle = list(cycle)


class UnreachableError(Exception):
    pass


Graph = Mapping[str, Sequence[str]]


def _postorder(succ: Graph, entry: str) -> list[str]:
    seen = {entry}
    order: list[str] = []
    stack = [(entry, iter(succ.get(entry, ())))]
    while stack:
        node, it = stack[-1]
        for nxt in it:
            if nxt not in seen:
                seen.add(nxt)
                stack.append((nxt, iter(succ.get(nxt, ()))))
                break
        else:
            order.append(node)
            stack.pop()
    return order


def dominators(nodes: Sequence[str], succ: Graph, entry: str) -> dict[str, frozenset[str]]:
    """Dominator sets by the iterative dataflow algorithm in reverse postorder."""
    rpo = list(reversed(_postorder(succ, entry)))
    missing = [n for n in nodes if n not in set(rpo)]
    if missing:
        raise UnreachableError("unreachable locations: " + ", ".join(missing))
    preds: dict[str, list[str]] = {n: [] for n in nodes}
    for u in nodes:
        for v in succ.get(u, ()):
            preds[v].append(u)
    everything = frozenset(nodes)
    dom: dict[str, frozenset[str]] = {n: everything for n in nodes}
    dom[entry] = frozenset([entry])
    changed = True
    while changed:
        changed = False
        for n in rpo:
            if n == entry:
                continue
            new = everything
            for p in preds[n]:
                new = new & dom[p]
            new = new | {n}
            if new != dom[n]:
                dom[n] = new
                changed = True
    return dom


@dataclass(frozen=True)
class LoopInfo:
    dominators: dict[str, frozenset[str]]
    back_edges: tuple[tuple[str, str], ...]
    headers: tuple[str, ...]
    loops: dict[str, frozenset[str]]
    parent: dict[str, str | None]

    def children(self, header: str | None) -> list[str]:
        return [h for h in self.headers if self.parent[h] == header]

    def innermost(self, loc: str) -> str | None:
        best = None
        for h in self.headers:
            if loc in self.loops[h] and (best is None or len(self.loops[h]) < len(self.loops[best])):
                best = h
        return best

    def depth(self, header: str) -> int:
        d = 0
        p = self.parent[header]
        while p is not None:
            d += 1
            p = self.parent[p]
        return d


def _find_cycle(nodes: Sequence[str], succ: Graph) -> list[str] | None:
    color = {n: 0 for n in nodes}
    path: list[str] = []

    def visit(u: str) -> list[str] | None:
        color[u] = 1
        path.append(u)
        for v in succ.get(u, ()):
            if color[v] == 1:
                return path[path.index(v):] + [v]
            if color[v] == 0:
                found = visit(v)
                if found:
                    return found
        color[u] = 2
        path.pop()
        return None

    for n in nodes:
        if color[n] == 0:
            found = visit(n)
            if found:
                return found
    return None


def analyze_loops(nodes: Sequence[str], succ: Graph, entry: str) -> LoopInfo:
    dom = dominators(nodes, succ, entry)
    back = tuple((u, v) for u in nodes for v in succ.get(u, ()) if v in dom[u])
    forward = {u: [v for v in succ.get(u, ()) if (u, v) not in back] for u in nodes}
    cycle = _find_cycle(nodes, forward)
    if cycle:
        raise IrreducibleError(cycle)

    preds: dict[str, list[str]] = {n: [] for n in nodes}
    for u in nodes:
        for v in succ.get(u, ()):
            preds[v].append(u)
    headers = tuple(n for n in nodes if any(v == n for _, v in back))
    loops: dict[str, frozenset[str]] = {}
    for h in headers:
        body = {h}
        work = [u for u, v in back if v == h]
        while work:
            u = work.pop()
            if u not in body:
                body.add(u)
                work.extend(preds[u])
        loops[h] = frozenset(body)
    parent: dict[str, str | None] = {}
    for h in headers:
        outer = [g for g in headers if g != h and loops[h] < loops[g]]
        parent[h] = min(outer, key=lambda g: len(loops[g])) if outer else None
    return LoopInfo(dom, back, headers, loops, parent)


def loop_structure(cfg: Cfg) -> LoopInfo:
    return analyze_loops(cfg.locations, cfg.successors(), cfg.begin)


def compute_dominators(cfg: Cfg) -> dict[str, frozenset[str]]:
    return dominators(cfg.locations, cfg.successors(), cfg.begin)
