from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import pytest

from vassbound.analysis import AnalysisConfig, analyze_source

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"

# bounded programs used by the property suites
BOUNDED = [
    "fig1", "fig2", "ex1", "log", "empty", "seq2", "nested", "triangle",
    "chain", "step", "branch", "lexi", "nlogn", "window", "countdown",
]
NEGATIVE = ["nonterm", "cyclic"]


def source(name: str) -> str:
    return (PROGRAMS / f"{name}.imp").read_text()


@lru_cache(maxsize=None)
def analysis(name: str, **kw):
    return analyze_source(source(name), AnalysisConfig(**kw))


@pytest.fixture
def fig1():
    return analysis("fig1")


@pytest.fixture
def fig2():
    return analysis("fig2")
