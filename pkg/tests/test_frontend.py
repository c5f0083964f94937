from __future__ import annotations

import pytest

from vassbound.cfg import build_cfg
from vassbound.lang import Div, ParseError, Skip, While, parse
from vassbound.linexpr import LinExpr

from conftest import source


def test_parse_fig1():
    prog = parse(source("fig1"))
    assert prog.params == ("n",)
    loops = 0
    stmts = list(prog.body)
    while stmts:
        s = stmts.pop()
        if isinstance(s, While):
            loops += 1
            stmts.extend(s.body)
        elif hasattr(s, "then"):
            stmts.extend(s.then)
            stmts.extend(s.orelse)
    assert loops == 3


def test_parse_empty():
    prog = parse("func f() { skip; }")
    assert prog.params == ()
    assert prog.body == (Skip(),) or [type(s) for s in prog.body] == [Skip]


def test_not_equal_loop_condition_becomes_strict():
    prog = parse("func f(n) { x := n; while (x != 0) { x := x - 1; } }")
    assert any("x > 0 assumed invariant" in str(a) for a in prog.assumptions)
    loop = prog.body[1]
    (cmp,) = loop.cond.atoms
    assert cmp.op == ">"


def test_not_equal_incrementing_loop_becomes_less_than():
    prog = parse("func f(n) { x := 0; while (x != n) { x := x + 1; } }")
    assert any("<" in str(a) for a in prog.assumptions)


@pytest.mark.parametrize(
    "text",
    [
        "func f(n) { x := ; }",
        "func f(n) { while (x > 0) { x := x * y; } }",
        "func f(n) { n := 1; }",
        "func f(n) { x := 1 }",
        "func f(n) { x := x / 0; }",
    ],
)
def test_parse_errors(text):
    with pytest.raises(ParseError) as err:
        parse(text)
    assert err.value.line >= 1 and err.value.col >= 1


def test_parse_error_position():
    with pytest.raises(ParseError) as err:
        parse("func f(n) {\n  x := 1;\n  y := ;\n}")
    assert err.value.line == 3


def test_division_and_scaling():
    prog = parse("func f(n) { x := n / 2; y := x * 3; }")
    first, second = prog.body
    assert first.value == Div("n", 2)
    assert second.value == LinExpr.var("x", 3)


def test_cfg_fig1_locations():
    cfg = build_cfg(parse(source("fig1")))
    assert cfg.locations == ("begin", "l1", "l2", "l3", "l4", "end")
    assert len(cfg.transitions) == 9


def test_cfg_straight_line():
    cfg = build_cfg(parse("func f(n) { x := n; y := x + 1; }"))
    assert cfg.dump() == "begin -> end [guard: true] [update: x := n, y := n+1]\n"


def test_cfg_empty():
    cfg = build_cfg(parse(source("empty")))
    assert cfg.dump() == "begin -> end [guard: true] [update: id]\n"


def test_cfg_fig2_if_split():
    cfg = build_cfg(parse(source("fig2")))
    # headers l1 (outer) and l2 (popMany), l3 is the branch point
    assert {"l1", "l2", "l3"} <= set(cfg.locations)
    out = [t for t in cfg.transitions if t.source == "l3"]
    assert len(out) == 2 and all(not t.guard for t in out)


def test_cfg_dump_is_stable():
    a = build_cfg(parse(source("fig1"))).dump()
    b = build_cfg(parse(source("fig1"))).dump()
    assert a == b
    assert "l4 -> l3 [guard: a-1>=0] [update: a := a-1, b := b+1, i := i-1]" in a


def test_comparison_normalization():
    cfg = build_cfg(parse("func f(n) { x := 0; while (x < n) { x := x + 1; } }"))
    stay = next(t for t in cfg.transitions if t.source == t.target)
    assert [str(g) for g in stay.guard] == ["n-x-1>=0"]


def test_equality_gives_two_constraints():
    cfg = build_cfg(parse("func f(n) { if (n == 3) { x := 1; } }"))
    then = next(t for t in cfg.transitions if t.assigns)
    assert sorted(str(g) for g in then.guard) == ["-n+3>=0", "n-3>=0"]
