"""Slicing with respect to loop exit and branch conditions."""

from __future__ import annotations

from dataclasses import replace

from .cfg import Cfg
from .lang import Div


def relevant_variables(cfg: Cfg) -> frozenset[str]:
    """Variables that may transitively influence some guard.

    Seeds are the variables of every guard; the closure follows the
    right-hand sides of updates to relevant variables (flow-insensitive
    use-def chains).
    """
    relevant: set[str] = set()
    for t in cfg.transitions:
        for c in t.guard:
            relevant |= c.variables()
    changed = True
    while changed:
        changed = False
        for t in cfg.transitions:
            for var, val in t.assigns:
                if var not in relevant:
                    continue
                uses = {val.var} if isinstance(val, Div) else set(val.variables())
                if not uses <= relevant:
                    relevant |= uses
                    changed = True
    return frozenset(relevant - set(cfg.params))


def slice_for_termination(cfg: Cfg) -> Cfg:
    keep = relevant_variables(cfg)
    transitions = tuple(
        replace(t, assigns=tuple((v, e) for v, e in t.assigns if v in keep)) for t in cfg.transitions
    )
    return replace(cfg, transitions=transitions)
