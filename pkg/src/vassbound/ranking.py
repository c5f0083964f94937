"""Greedy construction of a lexicographic ranking function."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .cfa import AbstractTransition, TransitionSystem

NO_LOCAL_RF = "no local ranking function"
CYCLIC = "cyclic dependency"


@dataclass(frozen=True)
class LexRanking:
    components: tuple[tuple[int, str], ...]

    def norm_of(self, tid: int) -> str:
        for t, n in self.components:
            if t == tid:
                return n
        raise KeyError(tid)

    def position(self, tid: int) -> int:
        for k, (t, _) in enumerate(self.components):
            if t == tid:
                return k
        raise KeyError(tid)

    def dump(self, ts: TransitionSystem) -> str:
        lines = []
        for k, (tid, norm) in enumerate(self.components, start=1):
            d = ts.by_id(tid).delta(norm)
            lines.append(f"{k}: t{tid} ranked by {norm} (delta {d.value})")
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class RankFailure:
    kind: str
    transitions: tuple[int, ...]
    remaining: tuple[int, ...]
    ranked: LexRanking = LexRanking(())

    def describe(self) -> str:
        ids = ", ".join(f"t{i}" for i in self.transitions)
        return f"{self.kind}: {ids}"


def _decreasing(t: AbstractTransition) -> list[str]:
    return [n for n, d in t.deltas if d.certainly_negative()]


def classify_failure(remaining: Sequence[AbstractTransition], ranked: LexRanking = LexRanking(())) -> RankFailure:
    ids = tuple(t.id for t in remaining)
    stuck = tuple(t.id for t in remaining if not _decreasing(t))
    if stuck:
        return RankFailure(NO_LOCAL_RF, stuck, ids, ranked)
    return RankFailure(CYCLIC, ids, ids, ranked)


def ranking(ts: TransitionSystem) -> LexRanking | RankFailure:
    """Repeatedly remove a transition that strictly decreases some norm which
    no remaining transition may increase. Ties: lowest transition id, then the
    largest certain decrease, then the earliest norm."""
    order = {n: k for k, n in enumerate(ts.norms)}
    remaining = sorted(ts.transitions, key=lambda t: t.id)
    comps: list[tuple[int, str]] = []
    while remaining:
        chosen = None
        for t in remaining:
            eligible = [
                n for n in _decreasing(t)
                if all(r.delta(n).certainly_nonpositive() for r in remaining)
            ]
            if eligible:
                best = min(eligible, key=lambda n: (-(t.delta(n).decrement() or 1), order[n]))
                chosen = (t, best)
                break
        if chosen is None:
            return classify_failure(remaining, LexRanking(tuple(comps)))
        comps.append((chosen[0].id, chosen[1]))
        remaining = [r for r in remaining if r.id != chosen[0].id]
    return LexRanking(tuple(comps))


def is_valid(ts: TransitionSystem, lex: LexRanking, ids: Iterable[int] | None = None) -> bool:
    """Every component decreases its norm and no later one increases it."""
    comps = list(lex.components)
    for k, (tid, norm) in enumerate(comps):
        if not ts.by_id(tid).delta(norm).certainly_negative():
            return False
        for later, _ in comps[k + 1:]:
            if not ts.by_id(later).delta(norm).certainly_nonpositive():
                return False
    return True
