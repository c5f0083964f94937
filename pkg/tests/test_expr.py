from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vassbound import expr as bx

n, m = bx.param("n"), bx.param("m")

atoms = st.one_of(st.integers(-3, 4).map(bx.const), st.sampled_from([n, m]))


def trees():
    return st.recursive(
        atoms,
        lambda kids: st.one_of(
            st.lists(kids, min_size=2, max_size=3).map(lambda xs: bx.add(*xs)),
            st.lists(kids, min_size=2, max_size=2).map(lambda xs: bx.mul(*xs)),
            kids.map(bx.max0),
            st.tuples(kids, kids).map(lambda ab: bx.smax(*ab)),
            st.tuples(kids, st.integers(1, 3)).map(lambda a: bx.floordiv(bx.max0(a[0]), a[1])),
            kids.map(bx.log2ceil),
        ),
        max_leaves=6,
    )


def naive(e, env):
    """Reference evaluation written independently of the smart constructors."""
    if isinstance(e, bx.Const):
        return e.value
    if isinstance(e, bx.Param):
        return env[e.name]
    if isinstance(e, bx.Add):
        return sum(naive(x, env) for x in e.items)
    if isinstance(e, bx.Mul):
        return math.prod(naive(x, env) for x in e.factors)
    if isinstance(e, bx.Max0):
        return max(naive(e.arg, env), 0)
    if isinstance(e, bx.FloorDiv):
        return naive(e.arg, env) // e.divisor
    v = max(naive(e.arg, env), 1)
    return math.ceil(math.log2(v)) if v > 1 else 0


envs = st.fixed_dictionaries({"n": st.integers(0, 9), "m": st.integers(0, 9)})


@settings(max_examples=300, deadline=None)
@given(trees(), trees(), envs)
def test_constructors_preserve_value(a, b, env):
    va, vb = naive(a, env), naive(b, env)
    assert bx.evaluate(bx.add(a, b), env) == va + vb
    assert bx.evaluate(bx.mul(a, b), env) == va * vb
    assert bx.evaluate(bx.sub(a, b), env) == va - vb
    assert bx.evaluate(bx.smax(a, b), env) == max(va, vb)
    assert bx.evaluate(bx.max0(a), env) == max(va, 0)
    assert bx.evaluate(a, env) == va


@settings(max_examples=300, deadline=None)
@given(trees(), envs)
def test_nonneg_is_sound(e, env):
    if bx.nonneg(e):
        assert bx.evaluate(e, env) >= 0
    if bx.positive(e):
        assert bx.evaluate(e, env) > 0


@settings(max_examples=200, deadline=None)
@given(trees(), trees(), envs)
def test_equivalent_implies_equal_values(a, b, env):
    if bx.equivalent(a, b):
        assert bx.evaluate(a, env) == bx.evaluate(b, env)


@pytest.mark.parametrize(
    "e,env,value",
    [
        (bx.mul(n, bx.sub(n, bx.ONE)), {"n": 5}, 20),
        (bx.max0(bx.sub(n, bx.const(3))), {"n": 1}, 0),
        (bx.log2ceil(n), {"n": 8}, 3),
        (bx.log2ceil(n), {"n": 9}, 4),
        (bx.log2ceil(n), {"n": 0}, 0),
        (bx.floordiv(bx.add(n, bx.ONE), 2), {"n": 4}, 2),
    ],
)
def test_eval_examples(e, env, value):
    assert bx.evaluate(e, env) == value


def test_canonical_forms():
    assert str(bx.add(n, n)) == "2*n"
    assert str(bx.add(bx.mul(n, bx.sub(n, bx.ONE)), n, n)) == "n*(n-1)+2*n"
    assert str(bx.mul(bx.const(2), m)) == "2*m"
    assert str(bx.add(bx.const(2), bx.const(3), n)) == "n+5"
    assert bx.add(n, m) == bx.add(m, n)
    assert str(bx.max0(bx.sub(n, m))) == "max(n-m,0)"


def test_max0_collapses_when_nonnegative():
    assert bx.max0(bx.add(n, bx.ONE)) == bx.add(n, bx.ONE)
    assert bx.mul(n, bx.max0(bx.sub(n, bx.ONE))) == bx.mul(n, bx.sub(n, bx.ONE))


@pytest.mark.parametrize(
    "e,cls",
    [
        (bx.mul(bx.const(2), m), "n"),
        (bx.add(bx.mul(n, bx.sub(n, bx.ONE)), bx.mul(bx.const(2), n)), "n^2"),
        (bx.log2ceil(n), "log n"),
        (bx.ONE, "1"),
        (bx.mul(n, m), "n^2"),
        (bx.mul(n, bx.log2ceil(n)), "n log n"),
        (bx.mul(n, n, m), "n^3"),
        (bx.mul(n, n, m, m), "n^>3"),
        (bx.floordiv(bx.add(n, bx.ONE), 2), "n"),
    ],
)
def test_asymptotic_class(e, cls):
    assert bx.asymptotic_class(e) == cls
    assert cls in bx.CLASSES


def test_degree_and_params():
    e = bx.add(bx.mul(n, m), m)
    assert bx.degree(e) == 2 and bx.params(e) == {"n", "m"}
    assert bx.subst(e, {"m": bx.ONE}) == bx.add(n, bx.ONE)
