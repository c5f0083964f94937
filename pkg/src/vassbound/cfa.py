"""Control flow abstraction: one summed delta vector per loop path."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Mapping, Sequence

from .abstraction import LossyVass, SymConst, fmt_delta, symbol
from .symexec import DEFAULT_MERGE_THRESHOLD, LoopPath


@dataclass(frozen=True)
class AbstractTransition:
    id: int
    header: str
    deltas: tuple[tuple[str, SymConst], ...]
    provenance: tuple[LoopPath, ...]

    def delta(self, norm: str) -> SymConst:
        for n, d in self.deltas:
            if n == norm:
                return d
        raise KeyError(norm)

    @property
    def name(self) -> str:
        return f"t{self.id}"

    def vector(self) -> dict[str, str]:
        return {n: str(d.value) for n, d in self.deltas}


@dataclass(frozen=True)
class TransitionSystem:
    transitions: tuple[AbstractTransition, ...]
    norms: tuple[str, ...]

    def by_id(self, tid: int) -> AbstractTransition:
        for t in self.transitions:
            if t.id == tid:
                return t
        raise KeyError(tid)

    def dump(self) -> str:
        lines = []
        for t in self.transitions:
            ds = "; ".join(f"{symbol(n)}' <= {symbol(n)} {fmt_delta(d)}" for n, d in t.deltas)
            paths = " | ".join(" ".join(f"e{i}" for i in p.edges) for p in t.provenance)
            h = ",".join(sorted({p.header for p in t.provenance}))
            lines.append(f"{t.name}: {ds}  (header {h}, path: {paths})")
        return "\n".join(lines) + ("\n" if lines else "")


def sum_deltas(vass: LossyVass, edges: Sequence[int]) -> dict[str, SymConst]:
    by_index = {e.index: e for e in vass.edges}
    total = {n: SymConst.const(0) for n in vass.norm_names}
    for i in edges:
        for n, d in by_index[i].deltas:
            total[n] = total[n] + d
    return total


def cfa(
    vass: LossyVass,
    paths: Mapping[str, Sequence[LoopPath]],
    threshold: int = DEFAULT_MERGE_THRESHOLD,
    group_key: Callable[[LoopPath], Hashable] | None = None,
    start: int = 0,
) -> TransitionSystem:
    """Build the transition system; headers and paths in the given order.

    A header with more than ``threshold`` loop paths has its paths grouped by
    ``group_key`` (paths with identical updates) and each group becomes one
    transition with the componentwise maximum of the member deltas.
    """
    out: list[AbstractTransition] = []
    names = vass.norm_names
    tid = start
    for header, hpaths in paths.items():
        groups: dict[Hashable, list[LoopPath]] = {}
        if len(hpaths) > threshold and group_key is not None:
            for p in hpaths:
                groups.setdefault(group_key(p), []).append(p)
        else:
            for k, p in enumerate(hpaths):
                groups[k] = [p]
        for members in groups.values():
            acc: dict[str, SymConst] | None = None
            for p in members:
                d = sum_deltas(vass, p.edges)
                acc = d if acc is None else {n: acc[n].join(d[n]) for n in names}
            assert acc is not None
            out.append(AbstractTransition(tid, header, tuple((n, acc[n]) for n in names), tuple(members)))
            tid += 1
    return TransitionSystem(tuple(out), tuple(names))
