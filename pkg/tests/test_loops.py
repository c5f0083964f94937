from __future__ import annotations

import graphlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vassbound.cfg import build_cfg
from vassbound.lang import parse
from vassbound.loops import (
    IrreducibleError,
    UnreachableError,
    analyze_loops,
    compute_dominators,
    dominators,
    loop_structure,
)
from vassbound.slicing import relevant_variables, slice_for_termination

from conftest import source


def reach(succ, entry, removed=None):
    seen, work = set(), [entry]
    while work:
        u = work.pop()
        if u in seen or u == removed:
            continue
        seen.add(u)
        work.extend(succ.get(u, ()))
    return seen


def brute_dominators(nodes, succ, entry):
    """a dominates b iff b is unreachable once a is removed."""
    return {b: frozenset(a for a in nodes if a == b or b not in reach(succ, entry, removed=a)) for b in nodes}


@st.composite
def graphs(draw):
    k = draw(st.integers(1, 8))
    nodes = [f"v{i}" for i in range(k)]
    edges = draw(st.lists(st.tuples(st.sampled_from(nodes), st.sampled_from(nodes)), max_size=16))
    succ = {n: [] for n in nodes}
    for u, v in edges:
        if v not in succ[u]:
            succ[u].append(v)
    live = reach(succ, "v0")
    nodes = [n for n in nodes if n in live]
    return nodes, {n: [v for v in succ[n] if v in live] for n in nodes}


@settings(max_examples=300, deadline=None)
@given(graphs())
def test_dominators_match_brute_force(g):
    nodes, succ = g
    assert dominators(nodes, succ, "v0") == brute_dominators(nodes, succ, "v0")


@settings(max_examples=300, deadline=None)
@given(graphs())
def test_reducibility_agrees_with_acyclicity(g):
    nodes, succ = g
    dom = brute_dominators(nodes, succ, "v0")
    back = {(u, v) for u in nodes for v in succ[u] if v in dom[u]}
    ts = graphlib.TopologicalSorter({v: [u for u in nodes if v in succ[u] and (u, v) not in back] for v in nodes})
    try:
        ts.prepare()
        reducible = True
    except graphlib.CycleError:
        reducible = False
    if reducible:
        info = analyze_loops(nodes, succ, "v0")
        assert set(info.back_edges) == back
        for h, body in info.loops.items():
            assert all(h in dom[u] for u in body)
    else:
        with pytest.raises(IrreducibleError):
            analyze_loops(nodes, succ, "v0")


def test_chain_and_diamond():
    chain = {"begin": ["a"], "a": ["b"], "b": []}
    assert dominators(list(chain), chain, "begin")["b"] == {"begin", "a", "b"}
    diamond = {"begin": ["a", "b"], "a": ["c"], "b": ["c"], "c": []}
    assert dominators(list(diamond), diamond, "begin")["c"] == {"begin", "c"}


def test_unreachable_location():
    g = {"begin": [], "x": []}
    with pytest.raises(UnreachableError):
        dominators(["begin", "x"], g, "begin")


def test_two_entry_cycle_is_irreducible():
    g = {"begin": ["a", "b"], "a": ["b"], "b": ["a"]}
    with pytest.raises(IrreducibleError) as err:
        analyze_loops(list(g), g, "begin")
    assert set(err.value.cycle) >= {"a", "b"}


def test_fig1_loops():
    cfg = build_cfg(parse(source("fig1")))
    assert compute_dominators(cfg)["l2"] == {"begin", "l1", "l2"}
    info = loop_structure(cfg)
    assert info.headers == ("l1", "l2", "l3")
    assert info.loops["l3"] == {"l3", "l4"}
    assert info.parent == {"l1": None, "l2": "l1", "l3": "l2"}
    assert info.depth("l3") == 2 and info.innermost("l4") == "l3"


def test_acyclic_has_no_loops():
    info = loop_structure(build_cfg(parse("func f(n) { x := n; if (x > 1) { x := 0; } }")))
    assert info.headers == () and info.back_edges == ()


DEAD = source("fig1").replace("i--;\n      }", "i--;\n        z := z + 1;\n      }")


def test_slicing_drops_dead_counter():
    assert "z := z + 1" in DEAD
    cfg = build_cfg(parse(DEAD))
    assert "z" not in relevant_variables(cfg)
    sliced = slice_for_termination(cfg)
    assert sliced.dump() == build_cfg(parse(source("fig1"))).dump()


def test_slicing_keeps_fig2():
    cfg = build_cfg(parse(source("fig2")))
    assert relevant_variables(cfg) == {"i", "n"}
    assert slice_for_termination(cfg).dump() == cfg.dump()


def test_slicing_empties_body_without_relevant_updates():
    cfg = build_cfg(parse("func f(n) { i := n; while (i > 0) { out := out + i; i--; } }"))
    sliced = slice_for_termination(cfg)
    assert "out" not in sliced.dump()
    assert [t.source for t in sliced.transitions] == [t.source for t in cfg.transitions]


@pytest.mark.parametrize("name", ["fig1", "fig2", "ex1", "chain", "lexi"])
def test_slicing_preserves_structure(name):
    cfg = build_cfg(parse(source(name)))
    sliced = slice_for_termination(cfg)
    assert sliced.locations == cfg.locations
    for a, b in zip(cfg.transitions, sliced.transitions):
        assert (a.source, a.target, a.guard) == (b.source, b.target, b.guard)
        assert set(b.assigns) <= set(a.assigns)
