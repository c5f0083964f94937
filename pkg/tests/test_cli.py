from __future__ import annotations

import io
import json
import subprocess
import sys

import pytest

from vassbound.cli import (
    EXIT_OK,
    EXIT_PARSE,
    EXIT_RANKING,
    EXIT_UNBOUNDED,
    EXIT_VIOLATION,
    main,
)

from conftest import BOUNDED, NEGATIVE, PROGRAMS


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def prog(name):
    return str(PROGRAMS / f"{name}.imp")


def test_analyze_fig1():
    code, text = run("analyze", prog("fig1"))
    assert code == EXIT_OK
    assert "loop l2: bound n\n" in text
    assert "t4: bound n*(n-1)\n" in text
    assert "class: n^2\n" in text


def test_analyze_fig2():
    code, text = run("analyze", prog("fig2"))
    assert code == EXIT_OK
    assert "total: 2*m\n" in text and "class: n\n" in text


def test_analyze_nonterm():
    code, text = run("analyze", prog("nonterm"))
    assert code == EXIT_RANKING
    assert "no local ranking function" in text


def test_parse_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.imp"
    bad.write_text("func f(n) {\n  x := ;\n}\n")
    code, _ = run("analyze", str(bad))
    assert code == EXIT_PARSE
    assert "bad.imp:2:" in capsys.readouterr().err


def test_missing_file(tmp_path):
    code, _ = run("analyze", str(tmp_path / "nope.imp"))
    assert code == EXIT_PARSE


def test_path_explosion_exit_code(capsys):
    code, _ = run("analyze", prog("fig2"), "--path-cap", "1")
    assert code == EXIT_UNBOUNDED
    assert "more than 1 loop paths" in capsys.readouterr().err


def test_structured_output():
    code, text = run("analyze", prog("fig1"), "--format", "structured")
    data = json.loads(text)
    assert code == EXIT_OK
    for key in ("transitions", "loops", "total", "class", "assumptions", "failures"):
        assert key in data
    assert data["class"] == "n^2"
    assert {"header": "l2", "bound": "n"} in data["loops"]
    assert any(t["bound"] == "n*(n-1)" for t in data["transitions"])


@pytest.mark.parametrize("name", BOUNDED + NEGATIVE)
def test_assumptions_in_every_format(name):
    _, text = run("analyze", prog(name))
    _, js = run("analyze", prog(name), "--format", "structured")
    data = json.loads(js)
    assert data["assumptions"]
    for a in data["assumptions"]:
        assert f"  - {a}\n" in text


def test_dump_stages():
    code, cfg = run("dump", prog("empty"), "--stage", "cfg")
    assert code == 0 and cfg == "begin -> end [guard: true] [update: id]\n"
    _, ts = run("dump", prog("fig1"), "--stage", "ts", "--scc-mode")
    assert len(ts.splitlines()) == 4
    _, vass = run("dump", prog("fig1"), "--stage", "vass", "--scc-mode")
    assert "l2 -> l3 : a' <= a + 0; b' <= b - 1; i' <= i + (n-1)" in vass
    assert "l4 -> l3 : a' <= a - 1; b' <= b + 1; i' <= i - 1" in vass
    _, rk = run("dump", prog("fig2"), "--stage", "ranking")
    assert rk.splitlines()[1] == "2: t1 ranked by i (delta -1)"
    _, paths = run("dump", prog("fig2"), "--stage", "paths")
    assert "updates: i := i-1, n := n+1" in paths
    _, fail = run("dump", prog("cyclic"), "--stage", "ranking")
    assert "cyclic dependency" in fail


def test_check_commands():
    code, text = run("check", prog("fig1"))
    assert code == EXIT_OK and text.endswith("verdict: pass\n")
    code, text = run("check", prog("fig2"), "--grid-max", "5")
    assert code == EXIT_OK
    assert "[m=5] total: observed 9 <= 2*m (10) ok" in text
    code, text = run("check", prog("fig1"), "--corrupt")
    assert code == EXIT_VIOLATION and "VIOLATION" in text


def test_corpus():
    code, text = run("corpus", str(PROGRAMS))
    assert code == EXIT_OK
    assert "nonterm.imp: no local ranking function\n" in text
    assert "cyclic.imp: cyclic dependency\n" in text
    assert "fig1.imp: bounded n^2\n" in text
    assert f"  files: {len(list(PROGRAMS.glob('*.imp')))}\n" in text


@pytest.mark.parametrize("name", BOUNDED + NEGATIVE)
def test_reports_are_byte_identical(name):
    first = subprocess.run([sys.executable, "-m", "vassbound", "analyze", prog(name)], capture_output=True)
    second = subprocess.run([sys.executable, "-m", "vassbound", "analyze", prog(name)], capture_output=True)
    assert first.stdout == second.stdout and first.stdout
