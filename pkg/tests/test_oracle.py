from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vassbound import expr as bx
from vassbound.abstraction import LossyVass, Norm, SymConst, VassEdge
from vassbound.cfg import Transition, build_cfg
from vassbound.lang import parse
from vassbound.linexpr import LinExpr
from vassbound.loops import loop_structure
from vassbound.oracle import (
    Decomposer,
    Explorer,
    MalformedPath,
    bound_counters,
    check_soundness,
    concrete_successors,
    decompose_cycles,
    shrink_params,
    simulate,
    step_concrete,
    vass_successors,
)

from conftest import BOUNDED, NEGATIVE, analysis, source


def fig1_source_cfg():
    cfg = build_cfg(parse(source("fig1")))
    return cfg, loop_structure(cfg)


def test_decompose_interleaved_example_path():
    cfg, info = fig1_source_cfg()
    # l1 t1 l2 t2 l3 Id l4 t3 l3 Id l2 t2 l3 Id l2 Id l1
    walk = [1, 3, 5, 7, 6, 3, 6, 4]
    found, rest = decompose_cycles(cfg.transitions, info.back_edges, "l1", walk)
    assert rest == []
    assert sorted((p.header, p.edges) for p in found) == [
        ("l1", (1, 4)), ("l2", (3, 6)), ("l2", (3, 6)), ("l3", (5, 7)),
    ]


def test_decompose_trivial_cases():
    cfg, info = fig1_source_cfg()
    assert decompose_cycles(cfg.transitions, info.back_edges, "l1", []) == ([], [])
    loop = build_cfg(parse("func f(n) { x := n; while (x > 0) { x--; } }"))
    li = loop_structure(loop)
    self_loop = next(t.index for t in loop.transitions if t.source == t.target)
    found, rest = decompose_cycles(loop.transitions, li.back_edges, "l1", [self_loop] * 3)
    assert len(found) == 3 and rest == [] and len(set(found)) == 1


def test_decompose_rejects_broken_walk():
    cfg, info = fig1_source_cfg()
    with pytest.raises(MalformedPath):
        decompose_cycles(cfg.transitions, info.back_edges, "l1", [3])


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["fig1", "fig2", "ex1", "lexi", "chain"]), st.lists(st.integers(0, 10), max_size=40))
def test_decomposition_partitions_walks(name, choices):
    cfg = build_cfg(parse(source(name)))
    info = loop_structure(cfg)
    start = next(t.target for t in cfg.transitions if t.source == cfg.begin)
    loc, walk = start, []
    for c in choices:
        out = [t for t in cfg.outgoing(loc) if t.target != cfg.end]
        if not out:
            break
        t = out[c % len(out)]
        walk.append(t.index)
        loc = t.target
    found, rest = decompose_cycles(cfg.transitions, info.back_edges, start, walk)
    assert sum(len(p.edges) for p in found) + len(rest) == len(walk)
    if loc == start:
        assert rest == []
    for p in found:
        assert cfg.transitions[p.edges[-1]].target == p.header


def single_edge_vass():
    x = Norm(LinExpr.var("x"), "linear")
    vass = LossyVass(("l1",), (x,), (VassEdge(0, "l1", "l1", (("x", SymConst.const(-1)),)),), (("x", bx.ZERO),), "l1")
    dec = Decomposer((Transition(0, "l1", "l1", (), ()),), frozenset({("l1", "l1")}))
    return vass, dec


def test_implicit_guard_blocks_first_step():
    vass, dec = single_edge_vass()
    stats = simulate(vass, {}, dec, {"loop": frozenset()})
    assert stats.steps == 0 and not stats.cap_hit


def counters_of(a):
    return bound_counters(a)[0]


def fig2_maxima(m):
    a = analysis("fig2")
    dec = Decomposer(a.cfg.transitions, frozenset(a.info.back_edges))
    return a, simulate(a.vass, {"m": m}, dec, counters_of(a)).maxima


def test_fig2_at_m3():
    a, mx = fig2_maxima(3)
    joint = next(t.name for t in a.merged_ts.transitions if len(t.provenance) == 2)
    pop = next(t.name for t in a.merged_ts.transitions if t.header == "l2")
    assert mx[joint] == 3 and mx[pop] == 2


def test_fig2_at_m5_total():
    _, mx = fig2_maxima(5)
    assert mx["total"] == 9 and mx["total"] <= 10


def test_fig1_at_n2_path_counts():
    a = analysis("fig1")
    dec = Decomposer(a.cfg.transitions, frozenset(a.info.back_edges))
    mx = simulate(a.vass, {"n": 2}, dec, counters_of(a)).maxima
    mid = next(t.name for t in a.merged_ts.transitions if t.header == "l2")
    assert mx[mid] <= 2


def concrete_maxima(a, params):
    counters = counters_of(a)
    dec = Decomposer(a.cfg.transitions, frozenset(a.info.back_edges))
    names = tuple(a.cfg.variables)
    env = {v: 0 for v in names} | params
    (entry,) = [t for t in a.cfg.transitions if t.source == a.cfg.begin]
    env = step_concrete(entry, env)
    ex = Explorer(dec, concrete_successors(a.cfg, params), counters)
    return ex.run(entry.target, tuple(env[v] for v in names))


@pytest.mark.parametrize("m", range(6))
def test_fig2_vass_maxima_match_concrete_program(m):
    a, mx = fig2_maxima(m)
    assert concrete_maxima(a, {"m": m}).maxima == mx


@pytest.mark.parametrize("name", BOUNDED)
def test_concrete_runs_within_bounds(name):
    """End to end: instance counts of the real program never exceed the bounds."""
    a = analysis(name)
    _, bounds = bound_counters(a)
    for val in [dict(zip(a.cfg.params, vs)) for vs in [(0, 0), (1, 2), (3, 1), (4, 4)]]:
        stats = concrete_maxima(a, val)
        assert not stats.cap_hit and not stats.unmatched
        for c, b in bounds.items():
            assert stats.maxima[c] <= bx.evaluate(b, val), (c, str(b), val)


def test_simulate_is_deterministic():
    a = analysis("fig1")
    dec = Decomposer(a.cfg.transitions, frozenset(a.info.back_edges))
    runs = [simulate(a.vass, {"n": 3}, dec, counters_of(a)) for _ in range(2)]
    assert runs[0] == runs[1]


@pytest.mark.parametrize("name", ["fig1", "fig2", "lexi", "chain"])
def test_lossy_sampling_never_beats_equality_runs(name):
    a = analysis(name)
    counters = counters_of(a)
    dec = Decomposer(a.cfg.transitions, frozenset(a.info.back_edges))
    params = {p: 3 for p in a.cfg.params}
    best = simulate(a.vass, params, dec, counters).maxima
    succ = vass_successors(a.vass, params)
    names = a.vass.norm_names
    start = tuple(bx.evaluate(a.vass.init_of(n), params) for n in names)
    rng = random.Random(7)
    for _ in range(300):
        loc, vals, stack = a.vass.entry, start, ((a.vass.entry, None),)
        counts = dict.fromkeys(counters, 0)
        for _ in range(200):
            moves = list(succ(loc, vals))
            if not moves:
                break
            edge, new = rng.choice(moves)
            new = tuple(max(0, v - rng.randint(0, 1)) for v in new)  # lossy step
            stack, inst = dec.push(stack, edge)
            loc, vals = a.cfg.transitions[edge].target, new
            if inst is not None:
                for cname, members in counters.items():
                    counts[cname] += inst in members
            if loc == a.vass.entry and len(stack) == 1:
                for cname in counters:
                    assert counts[cname] <= best[cname]
            # the lossy successor relation may disable later edges
            succ_loc = list(succ(loc, vals))
            if not succ_loc:
                break


@pytest.mark.parametrize("name", ["fig1", "fig2"])
def test_check_soundness_passes(name):
    verdict = check_soundness(analysis(name), grid_max=4, step_cap=10_000)
    assert verdict.ok and not verdict.violations
    assert "verdict: pass" in verdict.render()


def test_corrupted_bounds_are_caught():
    verdict = check_soundness(analysis("fig1"), grid_max=4, corrupt=shrink_params)
    assert not verdict.ok and verdict.violations
    bad = next(c for c in verdict.violations if c.valuation["n"] == 3)
    assert bad.observed > bad.value
    # the witness is a real trace realizing the observed count
    a = analysis("fig1")
    counters = counters_of(a)
    found, rest = decompose_cycles(a.cfg.transitions, a.info.back_edges, a.vass.entry, bad.witness)
    assert rest == []
    assert sum(p in counters[bad.counter] for p in found) == bad.observed
    assert "VIOLATION" in verdict.render()


@pytest.mark.parametrize("name", NEGATIVE)
def test_negative_programs_hit_the_cap(name):
    verdict = check_soundness(analysis(name), grid_max=2, step_cap=2_000)
    assert not verdict.ranked and verdict.incomplete
