"""Parser for the small imperative integer language (``.imp`` files).

Grammar::

    program := "func" IDENT "(" [IDENT ("," IDENT)*] ")" block
    block   := "{" stmt* "}"
    stmt    := IDENT ":=" expr ";" | "while" "(" cond ")" block
             | "if" "(" cond ")" block ["else" block] | "skip" ";"
    cond    := atom ("&&" atom)*        atom := "*" | expr CMP expr

Expressions are linear; ``x * c`` and ``c * x`` fold into the linear form and
``x / c`` is accepted as the whole right-hand side of an assignment.
Parameters are unknown non-negative inputs and may not be assigned.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .linexpr import LinExpr


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Assumption:
    """A heuristic choice the analysis made and must report."""

    text: str
    line: int = 0

    def __str__(self) -> str:
        return f"{self.text} (line {self.line})" if self.line else self.text


@dataclass(frozen=True)
class Div:
    """``var / divisor`` with a positive literal divisor (floor division)."""

    var: str
    divisor: int

    def __str__(self) -> str:
        return f"{self.var}/{self.divisor}"


Value = Union[LinExpr, Div]


@dataclass(frozen=True)
class Comparison:
    op: str  # one of < <= > >= == !=
    lhs: LinExpr
    rhs: LinExpr

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass(frozen=True)
class Cond:
    """Conjunction of comparisons; ``nondet`` marks a ``*`` conjunct."""

    atoms: tuple[Comparison, ...] = ()
    nondet: bool = False

    def __str__(self) -> str:
        parts = [str(a) for a in self.atoms] + (["*"] if self.nondet else [])
        return " && ".join(parts)


@dataclass(frozen=True)
class Assign:
    var: str
    value: Value
    line: int = 0


@dataclass(frozen=True)
class While:
    cond: Cond
    body: tuple["Stmt", ...]
    line: int = 0


@dataclass(frozen=True)
class If:
    cond: Cond
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] = ()
    line: int = 0


@dataclass(frozen=True)
class Skip:
    line: int = 0


Stmt = Union[Assign, While, If, Skip]


@dataclass(frozen=True)
class Program:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    assumptions: tuple[Assumption, ...] = ()
    warnings: tuple[str, ...] = ()

    def variables(self) -> list[str]:
        """Program (non-parameter) variables in order of first occurrence."""
        seen: dict[str, None] = {}

        def visit_expr(e: Value) -> None:
            names = [e.var] if isinstance(e, Div) else [n for n, _ in e.terms]
            for n in names:
                if n not in self.params:
                    seen.setdefault(n)

        def visit_cond(c: Cond) -> None:
            for a in c.atoms:
                visit_expr(a.lhs)
                visit_expr(a.rhs)

        def visit(stmts: tuple[Stmt, ...]) -> None:
            for s in stmts:
                if isinstance(s, Assign):
                    seen.setdefault(s.var)
                    visit_expr(s.value)
                elif isinstance(s, While):
                    visit_cond(s.cond)
                    visit(s.body)
                elif isinstance(s, If):
                    visit_cond(s.cond)
                    visit(s.then)
                    visit(s.orelse)

        visit(self.body)
        return list(seen)


_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<num>\d+)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>:=|&&|<=|>=|==|!=|--|\+\+|[-+*/<>(){};,])"
)
_KEYWORDS = {"func", "while", "if", "else", "skip"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, col = 0, 1, 1
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind in ("num", "op"):
                toks.append(_Tok(kind, text, line, col))
            elif kind == "id":
                toks.append(_Tok("kw" if text in _KEYWORDS else "id", text, line, col))
            col += len(text)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0
        self.params: tuple[str, ...] = ()
        self.assumptions: list[Assumption] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "kw"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        t = self.tok
        if not self.accept(text):
            raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return t

    def ident(self) -> _Tok:
        t = self.tok
        if t.kind != "id":
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    # program / statements

    def program(self) -> Program:
        self.expect("func")
        name = self.ident().text
        self.expect("(")
        params: list[str] = []
        if not self.accept(")"):
            params.append(self.ident().text)
            while self.accept(","):
                params.append(self.ident().text)
            self.expect(")")
        if len(set(params)) != len(params):
            raise self.error("duplicate parameter name")
        self.params = tuple(params)
        body = self.block()
        if self.tok.kind != "eof":
            raise self.error("trailing input after function body")
        prog = Program(name, self.params, body, tuple(self.assumptions))
        return Program(prog.name, prog.params, prog.body, prog.assumptions, tuple(_read_warnings(prog)))

    def block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        stmts: list[Stmt] = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            stmts.append(self.stmt())
        return tuple(stmts)

    def stmt(self) -> Stmt:
        t = self.tok
        if self.accept("skip"):
            self.expect(";")
            return Skip(t.line)
        if self.accept("while"):
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            body = self.block()
            cond = self._rewrite_neq(cond, body, t.line)
            return While(cond, body, t.line)
        if self.accept("if"):
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            then = self.block()
            orelse = self.block() if self.accept("else") else ()
            return If(cond, then, orelse, t.line)
        if t.kind == "id":
            self.i += 1
            if t.text in self.params:
                raise self.error(f"assignment to parameter {t.text!r}", t)
            if self.accept("--"):
                value: Value = LinExpr.var(t.text) - 1
            elif self.accept("++"):
                value = LinExpr.var(t.text) + 1
            else:
                self.expect(":=")
                value = self.rhs()
            self.expect(";")
            return Assign(t.text, value, t.line)
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def _rewrite_neq(self, cond: Cond, body: tuple[Stmt, ...], line: int) -> Cond:
        atoms = []
        for a in cond.atoms:
            if a.op != "!=":
                atoms.append(a)
                continue
            op = ">" if _direction(a.lhs - a.rhs, body) <= 0 else "<"
            rewritten = Comparison(op, a.lhs, a.rhs)
            self.assumptions.append(Assumption(f"{rewritten} assumed invariant", line))
            atoms.append(rewritten)
        return Cond(tuple(atoms), cond.nondet)

    # conditions / expressions

    def cond(self) -> Cond:
        atoms: list[Comparison] = []
        nondet = False
        while True:
            if self.accept("*"):
                nondet = True
            else:
                lhs = self.expr()
                t = self.tok
                if t.text not in ("<", "<=", ">", ">=", "==", "!="):
                    raise self.error("expected comparison operator")
                self.i += 1
                atoms.append(Comparison(t.text, lhs, self.expr()))
            if not self.accept("&&"):
                return Cond(tuple(atoms), nondet)

    def rhs(self) -> Value:
        start = self.i
        t = self.tok
        if t.kind == "id" and self.toks[self.i + 1].text == "/":
            self.i += 2
            lit = self.tok
            if lit.kind != "num" or int(lit.text) <= 0:
                raise self.error("division only by a positive literal", lit)
            self.i += 1
            if self.tok.text != ";":
                self.i = start
                raise self.error("division must be the whole right-hand side: x / c", t)
            return Div(t.text, int(lit.text))
        return self.expr()

    def expr(self) -> LinExpr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = e + self.term()
            elif self.accept("-"):
                e = e - self.term()
            else:
                return e

    def term(self) -> LinExpr:
        e = self.unary()
        while True:
            t = self.tok
            if self.accept("*"):
                f = self.unary()
                if e.is_constant():
                    e = f.scale(e.constant)
                elif f.is_constant():
                    e = e.scale(f.constant)
                else:
                    raise self.error("non-linear product", t)
            elif t.text == "/":
                raise self.error("division must be the whole right-hand side: x / c", t)
            else:
                return e

    def unary(self) -> LinExpr:
        if self.accept("-"):
            return -self.unary()
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return LinExpr.const(int(t.text))
        if t.kind == "id":
            self.i += 1
            return LinExpr.var(t.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        raise self.error(f"expected expression, found {t.text or 'end of input'!r}")


def _direction(diff: LinExpr, body: tuple[Stmt, ...]) -> int:
    """Sign of the change of ``diff`` under the first counter update in ``body``."""
    for s in _walk(body):
        if isinstance(s, Assign) and isinstance(s.value, LinExpr) and diff.coeff(s.var):
            step = s.value - LinExpr.var(s.var)
            if step.is_constant() and step.constant:
                return diff.coeff(s.var) * step.constant
    return 0


def _walk(stmts: tuple[Stmt, ...]):
    for s in stmts:
        yield s
        if isinstance(s, While):
            yield from _walk(s.body)
        elif isinstance(s, If):
            yield from _walk(s.then)
            yield from _walk(s.orelse)


def _read_warnings(prog: Program) -> list[str]:
    """Reads of variables that are not assigned on any path before the read."""
    warnings: list[str] = []
    params = set(prog.params)

    def reads(e: Value) -> set[str]:
        return {e.var} if isinstance(e, Div) else set(e.variables())

    def check(names: set[str], assigned: set[str], line: int) -> None:
        for n in sorted(names - assigned - params):
            msg = f"line {line}: variable {n!r} read before any assignment"
            if msg not in warnings:
                warnings.append(msg)

    def cond_reads(c: Cond) -> set[str]:
        out: set[str] = set()
        for a in c.atoms:
            out |= reads(a.lhs) | reads(a.rhs)
        return out

    def may_assign(stmts: tuple[Stmt, ...]) -> set[str]:
        out: set[str] = set()
        for s in _walk(stmts):
            if isinstance(s, Assign):
                out.add(s.var)
        return out

    def visit(stmts: tuple[Stmt, ...], assigned: set[str]) -> set[str]:
        assigned = set(assigned)
        for s in stmts:
            if isinstance(s, Assign):
                check(reads(s.value), assigned, s.line)
                assigned.add(s.var)
            elif isinstance(s, While):
                # the body may run after itself
                around = assigned | may_assign(s.body)
                check(cond_reads(s.cond), around, s.line)
                assigned |= visit(s.body, around)
            elif isinstance(s, If):
                check(cond_reads(s.cond), assigned, s.line)
                assigned = visit(s.then, assigned) | visit(s.orelse, assigned)
        return assigned

    visit(prog.body, set())
    return warnings


def parse(source: str) -> Program:
    """Parse program text into a :class:`Program`."""
    return _Parser(source).program()
