"""End-to-end pipeline: parse, abstract, rank and bound.

Abstracting a norm may need an upper invariant obtained from reaching
definitions, which in turn needs the bound of the transitions that increment
the variable. The pipeline therefore runs in passes: norms whose abstraction
waits for such a bound are left out of a pass, the remaining norms are
ranked and bounded (a partial ranking still bounds the transitions it
ranks), and the waiting norms are retried with the new bounds until nothing
changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from . import expr as bx
from .abstraction import (
    Abstraction,
    Abstractor,
    LossyVass,
    NoNormsSurvive,
    Norm,
    SymConst,
    VassEdge,
    abstract_program,
    guess_norms,
)
from .bounds import (
    BoundComputer,
    InitialValueUnknown,
    initial_value_at,
    initial_value_wrapped,
    loop_bound,
    merge_transitions,
    program_total,
)
from .cfa import TransitionSystem, cfa
from .cfg import Cfg, build_cfg, wrap_in_dummy_loop
from .lang import Assumption, Program, parse
from .loops import LoopInfo, loop_structure
from .ranking import LexRanking, RankFailure, ranking
from .slicing import slice_for_termination
from .symexec import (
    DEFAULT_BUDGET,
    DEFAULT_MERGE_THRESHOLD,
    DEFAULT_PATH_CAP,
    PENDING,
    Invariants,
    LoopPath,
    PathRelation,
    contract,
    enumerate_loop_paths,
    merge_paths,
)


@dataclass(frozen=True)
class AnalysisConfig:
    scc_mode: bool = False
    merge_threshold: int = DEFAULT_MERGE_THRESHOLD
    path_cap: int = DEFAULT_PATH_CAP
    budget: int = DEFAULT_BUDGET
    merge: bool = True  # merge equally ranked transitions before bounding
    slicing: bool = True

    def __post_init__(self) -> None:
        if self.merge_threshold <= 0 or self.path_cap <= 0:
            raise ValueError("thresholds must be positive")


@dataclass
class Scc:
    """One independently bounded part: the whole program when wrapped."""

    header: str
    ts: TransitionSystem
    ranking: LexRanking | RankFailure
    merged_ts: TransitionSystem
    merged_lex: LexRanking
    initial: dict[str, bx.BoundExpr | None]
    bounds: dict[int, bx.BoundExpr | None]


@dataclass
class Analysis:
    program: Program
    config: AnalysisConfig
    source_cfg: Cfg
    cfg: Cfg
    info: LoopInfo
    paths: dict[str, list[LoopPath]]
    relations: dict[str, list[PathRelation]]
    norms: list[Norm]
    vass: LossyVass
    parts: list[Scc]
    assumptions: list[Assumption] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    passes: int = 0

    # ---- combined views over all parts

    @property
    def ts(self) -> TransitionSystem:
        return _join_ts([p.ts for p in self.parts], self.vass)

    @property
    def merged_ts(self) -> TransitionSystem:
        return _join_ts([p.merged_ts for p in self.parts], self.vass)

    @property
    def ranking(self) -> LexRanking | RankFailure:
        fails = [p.ranking for p in self.parts if isinstance(p.ranking, RankFailure)]
        if fails:
            return fails[0]
        comps: tuple = ()
        for p in self.parts:
            comps += p.ranking.components  # type: ignore[union-attr]
        return LexRanking(comps)

    @property
    def bounds(self) -> dict[int, bx.BoundExpr | None]:
        out: dict[int, bx.BoundExpr | None] = {}
        for p in self.parts:
            out.update(p.bounds)
        return out

    @property
    def initial(self) -> dict[str, bx.BoundExpr | None]:
        if len(self.parts) == 1:
            return self.parts[0].initial
        return {n.name: bx.ZERO for n in self.norms}

    @property
    def dummy(self) -> str | None:
        return self.cfg.dummy_header

    def loop_headers(self) -> list[str]:
        return [h for h in self.info.headers if h != self.dummy]

    def loop_bound(self, header: str) -> bx.BoundExpr | None:
        return loop_bound(self.merged_ts, self.bounds, header)

    @property
    def total(self) -> bx.BoundExpr | None:
        return program_total(self.merged_ts, self.bounds, self.dummy)

    @property
    def complexity_class(self) -> str | None:
        t = self.total
        return None if t is None else bx.asymptotic_class(t)

    @property
    def failure(self) -> RankFailure | None:
        r = self.ranking
        return r if isinstance(r, RankFailure) else None

    def invariants(self) -> Invariants:
        """Invariant generator that knows the final transition bounds."""
        on_loop = _on_loop(self.paths)
        table = _edge_bounds(self.parts, on_loop)
        return Invariants(self.cfg, self.info, self.paths, lambda i: table.get(i, PENDING) if i in on_loop else bx.ONE)

    def transition_bound(self, tid: int) -> bx.BoundExpr | None:
        """Bound of an original (pre-merge) transition: the bound of the
        merged transition that absorbed it."""
        for t in self.merged_ts.transitions:
            if t.id == tid:
                return self.bounds.get(t.id)
        original = self.ts.by_id(tid)
        for t in self.merged_ts.transitions:
            if set(original.provenance) <= set(t.provenance):
                return self.bounds.get(t.id)
        return None


def _join_ts(parts: Sequence[TransitionSystem], vass: LossyVass) -> TransitionSystem:
    trans: tuple = ()
    for p in parts:
        trans += p.transitions
    return TransitionSystem(tuple(sorted(trans, key=lambda t: t.id)), tuple(vass.norm_names))


def analyze_source(source: str, config: AnalysisConfig = AnalysisConfig()) -> Analysis:
    return analyze_program(parse(source), config)


def analyze_program(prog: Program, config: AnalysisConfig = AnalysisConfig()) -> Analysis:
    source_cfg = build_cfg(prog)
    loop_structure(source_cfg)  # rejects irreducible input before anything else
    cfg = source_cfg if config.scc_mode else wrap_in_dummy_loop(source_cfg)
    if config.slicing:
        cfg = slice_for_termination(cfg)
    info = loop_structure(cfg)

    paths = {h: enumerate_loop_paths(cfg, info, h, config.path_cap) for h in info.headers}
    relations = {h: [contract(cfg, info, p) for p in ps] for h, ps in paths.items()}
    guessed_from: list[PathRelation] = []
    for h in info.headers:
        guessed_from.extend(merge_paths(relations[h], config.merge_threshold))
    guess = guess_norms(cfg, guessed_from)
    assumptions = list(prog.assumptions) + guess.assumptions
    diagnostics = list(prog.warnings)

    on_loop = _on_loop(paths)
    group_key = {p: r.updates for h in info.headers for p, r in zip(paths[h], relations[h])}

    candidates = list(guess.norms)
    dropped: dict[str, str] = {}
    edge_bounds: dict[int, object] = {}
    result = None
    passes = 0
    previous = None
    while True:
        passes += 1

        def edge_bound(i: int, table=dict(edge_bounds)):
            if i not in on_loop:
                return bx.ONE
            return table.get(i, PENDING)

        inv = Invariants(cfg, info, paths, edge_bound, config.path_cap)
        todo = [n for n in candidates if n.name not in dropped]
        try:
            ab = abstract_program(cfg, todo, Abstractor(cfg, inv), on_loop)
        except NoNormsSurvive as exc:
            ab = Abstraction()
            dropped.update((n.name, why) for n, why in zip(todo, exc.reasons))
            diagnostics.append(str(exc))
        dropped.update(ab.failed)
        active, deltas, waiting = ab.active, ab.rows, ab.waiting

        vass = _build_vass(cfg, active, deltas)
        parts = _rank_and_bound(cfg, info, paths, vass, active, config, group_key)
        new_bounds = _edge_bounds(parts, on_loop)
        result = (vass, parts, active, waiting)
        signature = (tuple(n.name for n in active), tuple(sorted((k, str(v)) for k, v in new_bounds.items())))
        if not waiting or signature == previous or passes > len(candidates) + 2:
            break
        previous = signature
        edge_bounds = new_bounds

    vass, parts, active, waiting = result
    for n in waiting:
        dropped.setdefault(n.name, f"norm {n}: needs bounds that could not be established")
    for name, why in dropped.items():
        diagnostics.append(f"dropped {why}")
    assumptions.append(Assumption("parameters " + ", ".join(cfg.params) + " are non-negative") if cfg.params else Assumption("no parameters"))
    return Analysis(
        program=prog,
        config=config,
        source_cfg=source_cfg,
        cfg=cfg,
        info=info,
        paths=paths,
        relations=relations,
        norms=active,
        vass=vass,
        parts=parts,
        assumptions=assumptions,
        diagnostics=diagnostics,
        passes=passes,
    )


def _on_loop(paths: dict[str, list[LoopPath]]) -> dict[int, list[LoopPath]]:
    on_loop: dict[int, list[LoopPath]] = {}
    for ps in paths.values():
        for p in ps:
            for i in p.edges:
                on_loop.setdefault(i, []).append(p)
    return on_loop


def _build_vass(cfg: Cfg, norms: list[Norm], deltas: dict[str, dict[int, SymConst | None]]) -> LossyVass:
    edges = []
    for t in cfg.transitions:
        if t.source == cfg.begin:
            continue
        row = tuple((n.name, deltas[n.name][t.index]) for n in norms if deltas[n.name].get(t.index) is not None)
        edges.append(VassEdge(t.index, t.source, t.target, row))  # type: ignore[arg-type]
    if cfg.dummy_header is not None:
        initial = tuple((n.name, initial_value_wrapped(n, cfg)) for n in norms)
        entry = cfg.dummy_header
    else:
        initial = ()
        entry = cfg.begin
    return LossyVass(cfg.locations, tuple(norms), tuple(edges), initial, entry)


def _rank_and_bound(cfg, info, paths, vass, norms, config, group_key) -> list[Scc]:
    if cfg.dummy_header is not None:
        groups = [(cfg.dummy_header, list(info.headers))]
    else:
        groups = [(h, [g for g in info.headers if g in info.loops[h]]) for h in info.headers if info.parent[h] is None]
    parts = []
    start = 0
    for top, headers in groups:
        ts = cfa(vass, {h: paths[h] for h in headers}, config.merge_threshold, group_key.get, start)
        start += len(ts.transitions)
        if cfg.dummy_header is not None:
            initial: dict[str, bx.BoundExpr | None] = dict(vass.initial)
        else:
            initial = {}
            for n in norms:
                try:
                    initial[n.name] = initial_value_at(n, cfg, info, top)
                except InitialValueUnknown:
                    initial[n.name] = None
        lex = ranking(ts) if ts.transitions else LexRanking(())
        ranked = lex.ranked if isinstance(lex, RankFailure) else lex
        if config.merge:
            merged_ts, merged_lex = merge_transitions(ts, ranked)
        else:
            merged_ts, merged_lex = ts, ranked
        bounds = BoundComputer(merged_ts, merged_lex, initial).all_bounds()
        parts.append(Scc(top, ts, lex, merged_ts, merged_lex, initial, bounds))
    return parts


def _edge_bounds(parts: list[Scc], on_loop: dict[int, list[LoopPath]]) -> dict[int, object]:
    """Execution bound of every transition lying on some loop path: the sum
    of the bounds of the abstract transitions whose paths use it."""
    out: dict[int, object] = {}
    for i in on_loop:
        total = []
        for part in parts:
            for t in part.merged_ts.transitions:
                if any(i in p.edges for p in t.provenance):
                    b = part.bounds.get(t.id)
                    if b is None:
                        total = None
                        break
                    total.append(b)
            if total is None:
                break
        if total is not None:
            out[i] = bx.add(*total) if total else bx.ZERO
    return out
