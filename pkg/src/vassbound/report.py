"""Complexity reports in text and structured (JSON) form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .abstraction import fmt_delta, symbol
from .analysis import Analysis
from .ranking import RankFailure


@dataclass
class TransitionEntry:
    id: str
    header: str
    paths: list[str]
    deltas: dict[str, str]
    bound: str | None
    merged_with: list[str] = field(default_factory=list)


@dataclass
class ComplexityReport:
    program: str
    mode: str
    norms: list[str]
    transitions: list[TransitionEntry]
    ranking: list[str]
    loops: list[dict[str, str | None]]
    total: str | None
    complexity_class: str | None
    assumptions: list[str]
    failures: list[str]
    diagnostics: list[str]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("complexity_class")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        out = [f"program: {self.program}", f"mode: {self.mode}", "norms: " + (" ".join(self.norms) or "-")]
        out.append("transitions:")
        for t in self.transitions:
            ds = ", ".join(f"{n} {d}" for n, d in t.deltas.items())
            joint = f" (joint with {', '.join(t.merged_with)})" if t.merged_with else ""
            out.append(f"  {t.id}: bound {t.bound or 'unbounded'}{joint}")
            out.append(f"    header {t.header}, path {' | '.join(t.paths)}, deltas [{ds}]")
        out.append("ranking:")
        out.extend("  " + line for line in self.ranking)
        for lp in self.loops:
            out.append(f"loop {lp['header']}: bound {lp['bound'] or 'unbounded'}")
        out.append(f"total: {self.total or 'unbounded'}")
        if self.complexity_class is not None:
            out.append(f"class: {self.complexity_class}")
        out.append("assumptions:")
        out.extend(f"  - {a}" for a in self.assumptions)
        out.append("failures:")
        out.extend(f"  - {f}" for f in self.failures or ["none"])
        if self.diagnostics:
            out.append("diagnostics:")
            out.extend(f"  - {d}" for d in self.diagnostics)
        return "\n".join(out) + "\n"


def build_report(a: Analysis, name: str = "<input>") -> ComplexityReport:
    merged = a.merged_ts
    members: dict[int, list[int]] = {}
    for m in merged.transitions:
        for t in a.ts.transitions:
            if set(t.provenance) <= set(m.provenance):
                members.setdefault(m.id, []).append(t.id)
    trans = []
    for t in a.ts.transitions:
        b = a.transition_bound(t.id)
        group = next((ids for ids in members.values() if t.id in ids), [t.id])
        trans.append(
            TransitionEntry(
                id=t.name,
                header=t.header,
                paths=[" ".join(f"e{e}" for e in p.edges) for p in t.provenance],
                deltas={symbol(n): fmt_delta(d) for n, d in t.deltas},
                bound=None if b is None else str(b),
                merged_with=[f"t{i}" for i in group if i != t.id],
            )
        )
    r = a.ranking
    ranked = r.ranked if isinstance(r, RankFailure) else r
    failures = [r.describe()] if isinstance(r, RankFailure) else []
    for p in a.parts:
        if isinstance(p.ranking, RankFailure) and p.ranking is not r:
            failures.append(p.ranking.describe())
    loops = []
    for h in a.loop_headers():
        lb = a.loop_bound(h)
        loops.append({"header": h, "bound": None if lb is None else str(lb)})
    total = a.total
    return ComplexityReport(
        program=name,
        mode="per-scc" if a.config.scc_mode else "whole-program",
        norms=[symbol(n) for n in a.vass.norm_names],
        transitions=trans,
        ranking=ranked.dump(a.ts).splitlines(),
        loops=loops,
        total=None if total is None else str(total),
        complexity_class=a.complexity_class,
        assumptions=[str(x) for x in a.assumptions],
        failures=failures,
        diagnostics=list(a.diagnostics),
    )
