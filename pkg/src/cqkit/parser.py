"""Parser and serializer for the `.dl` program format.

One file may mix facts, query rules, tgds, egds, and fd/key shorthands:

    % comments run to end of line
    owns(alice, rec1).                       % fact
    q(X,Y) :- interest(X,Z), class(Y,Z).    % query rule (head vars are free)
    interest(X,Z), class(Y,Z) -> owns(X,Y). % tgd (head-only vars existential)
    r(X,Y), r(X,Z) -> Y = Z.                % egd
    fd r : 1 -> 2.                          % fd shorthand, expands to the egd
    key r : 1.                              % one fd per non-key position

Identifiers starting with an upper-case letter are variables; lower-case
or quoted identifiers are constants; `_n<k>` is a labeled null (legal in
facts only).  Repeated query rules with the same head name and identical
head tuples form a union query.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .errors import ParseError
from .model import (
    CQ,
    UCQ,
    Atom,
    Const,
    DependencySet,
    Egd,
    Frozen,
    Instance,
    Null,
    Tgd,
    Term,
    Var,
    term_key,
    term_text,
)

# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<COMMENT>%[^\n]*)
  | (?P<ARROW>->)
  | (?P<IMPLIES>:-)
  | (?P<NULL>_n[0-9]+)
  | (?P<VAR>[A-Z][A-Za-z0-9_]*)
  | (?P<NAME>[a-z0-9][A-Za-z0-9_]*)
  | (?P<STRING>"[^"\n]*")
  | (?P<PUNCT>[().,=:])
""",
    re.VERBOSE,
)

_KEYWORDS = {"fd", "key", "exists"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str):
    line, col = 1, 1
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("WS", "COMMENT"):
            k = tok if kind == "PUNCT" else kind
            out.append(Token(k, tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    out.append(Token("EOF", "", line, col))
    return out


# ---------------------------------------------------------------------------
# Program container


@dataclass
class Program:
    """Everything a `.dl` file holds, with program-wide arity checking."""

    queries: dict = field(default_factory=dict)  # name -> UCQ
    dependencies: DependencySet = field(default_factory=lambda: DependencySet())
    facts: Instance = field(default_factory=lambda: Instance(()))

    @property
    def tgds(self):
        return self.dependencies.tgds

    @property
    def egds(self):
        return self.dependencies.egds

    def query(self, name: Optional[str] = None) -> UCQ:
        if name is None:
            if len(self.queries) != 1:
                raise ParseError(
                    f"program defines {len(self.queries)} queries; pick one by name"
                )
            return next(iter(self.queries.values()))
        if name not in self.queries:
            raise ParseError(f"no query named {name}")
        return self.queries[name]

    def cq(self, name: Optional[str] = None) -> CQ:
        ucq = self.query(name)
        if len(ucq.disjuncts) != 1:
            raise ParseError(f"query {ucq.name} is a union; a single rule is required")
        return ucq.disjuncts[0]


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0
        self.arities: dict = {}

    # -- token plumbing

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.next()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text!r}", t.line, t.col)
        return t

    def fail(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    # -- grammar

    def parse(self) -> Program:
        rules: dict = {}  # query name -> (free tuple, [CQ bodies])
        order: list = []
        tgds, egds, facts = [], [], []
        while self.peek().kind != "EOF":
            item = self.statement()
            kind = item[0]
            if kind == "fact":
                facts.append(item[1])
            elif kind == "tgd":
                tgds.append(item[1])
            elif kind == "egd":
                egds.append(item[1])
            elif kind == "egds":
                egds.extend(item[1])
            else:
                name, free, atoms, tok = item[1]
                if name in rules:
                    if rules[name][0] != free:
                        self.fail(
                            f"query {name} repeated with a different head tuple", tok
                        )
                    rules[name][1].append(atoms)
                else:
                    rules[name] = (free, [atoms])
                    order.append(name)
        queries = {}
        for name in order:
            free, bodies = rules[name]
            disjuncts = [
                CQ(name if len(bodies) == 1 else f"{name}_{k}", free, body)
                for k, body in enumerate(bodies)
            ]
            queries[name] = UCQ(name, free, disjuncts)
        return Program(
            queries=queries,
            dependencies=DependencySet(tgds, egds),
            facts=Instance(facts),
        )

    def statement(self):
        t = self.peek()
        if (
            t.kind == "NAME"
            and t.text in ("fd", "key")
            and self.toks[self.i + 1].kind != "("
        ):
            return self.shorthand()
        head = self.atom(allow_null=True)
        t = self.peek()
        if t.kind == ".":
            self.next()
            for a in head.args:
                if isinstance(a, Var):
                    self.fail(f"fact {head.pred} contains variable {a.name}", t)
            return ("fact", head)
        if t.kind == "IMPLIES":
            self.next()
            return self.query_rule(head)
        if t.kind in (",", "ARROW"):
            return self.dependency(head)
        self.fail(f"expected '.', ':-', ',' or '->' after atom, found {t.text!r}")

    def atom_args(self):
        self.expect("(")
        args = [self.term()]
        while self.peek().kind == ",":
            self.next()
            args.append(self.term())
        self.expect(")")
        return args

    def pred_name(self) -> Token:
        # predicate names may use either casing; only terms are case-sensitive
        t = self.next()
        if t.kind not in ("NAME", "VAR"):
            self.fail(f"expected a predicate name, found {t.text!r}", t)
        return t

    def atom(self, allow_null=False) -> Atom:
        t = self.pred_name()
        args = self.atom_args()
        if not allow_null:
            for a in args:
                if isinstance(a, Null):
                    self.fail("labeled nulls are only legal in facts", t)
        atom = Atom(t.text, args)
        seen = self.arities.setdefault(atom.pred, atom.arity)
        if seen != atom.arity:
            self.fail(
                f"predicate {atom.pred} used with arity {atom.arity}, "
                f"previously {seen}",
                t,
            )
        return atom

    def term(self) -> Term:
        t = self.next()
        if t.kind == "VAR":
            return Var(t.text)
        if t.kind == "NAME":
            return Const(t.text)
        if t.kind == "STRING":
            return Const(t.text[1:-1])
        if t.kind == "NULL":
            return Null(int(t.text[2:]))
        self.fail(f"expected a term, found {t.text!r}", t)

    def atom_list(self, allow_null=False):
        atoms = [self.atom(allow_null)]
        while self.peek().kind == ",":
            self.next()
            atoms.append(self.atom(allow_null))
        return atoms

    def query_rule(self, head: Atom):
        tok = self.peek()
        free = []
        for a in head.args:
            if not isinstance(a, Var):
                self.fail(f"query head {head.pred} mixes in non-variable {a!r}", tok)
            free.append(a.name)
        if len(set(free)) != len(free):
            self.fail(f"query head {head.pred} repeats a variable", tok)
        body = self.atom_list()
        self.expect(".")
        body_vars = {v for a in body for v in a.variables()}
        for x in free:
            if x not in body_vars:
                self.fail(f"unsafe rule: head variable {x} not used in the body", tok)
        return ("query", (head.pred, tuple(free), body, tok))

    def dependency(self, first: Atom):
        for a in first.args:
            if isinstance(a, Null):
                self.fail("labeled nulls are only legal in facts")
        body = [first]
        while self.peek().kind == ",":
            self.next()
            body.append(self.atom())
        tok = self.expect("ARROW")
        # egd: the head is `X = Y`
        if self.toks[self.i].kind == "VAR" and self.toks[self.i + 1].kind == "=":
            lhs = self.next().text
            self.expect("=")
            rhs_tok = self.expect("VAR")
            self.expect(".")
            body_vars = {v for a in body for v in a.variables()}
            for side in (lhs, rhs_tok.text):
                if side not in body_vars:
                    self.fail(f"equality side {side} is not a body variable", rhs_tok)
            if lhs == rhs_tok.text:
                self.fail("degenerate equality X = X", rhs_tok)
            return ("egd", Egd(body, lhs, rhs_tok.text))
        declared = None
        if (
            self.peek().kind == "NAME"
            and self.peek().text == "exists"
            and self.toks[self.i + 1].kind != "("
        ):
            self.next()
            declared = [self.expect("VAR").text]
            while self.peek().kind == ",":
                self.next()
                declared.append(self.expect("VAR").text)
            self.expect(".")
        head = self.atom_list()
        self.expect(".")
        body_vars = {v for a in body for v in a.variables()}
        if declared is not None:
            for z in declared:
                if z in body_vars:
                    self.fail(f"exists-variable {z} already occurs in the body", tok)
                if not any(z in a.variables() for a in head):
                    self.fail(f"exists-variable {z} unused in the head", tok)
        return ("tgd", Tgd(body, head))

    def shorthand(self):
        kw = self.next()  # fd | key
        pred_tok = self.pred_name()
        pred = pred_tok.text
        self.expect(":")
        positions = [self.position(pred_tok)]
        while self.peek().kind == ",":
            self.next()
            positions.append(self.position(pred_tok))
        if pred not in self.arities:
            self.fail(f"predicate {pred} must be used before declaring a {kw.text}",
                      pred_tok)
        n = self.arities[pred]
        if kw.text == "fd":
            self.expect("ARROW")
            rhs = [self.position(pred_tok)]
            while self.peek().kind == ",":
                self.next()
                rhs.append(self.position(pred_tok))
            self.expect(".")
            lhs_set = positions
        else:
            self.expect(".")
            lhs_set = positions
            rhs = [j for j in range(1, n + 1) if j not in lhs_set]
        for j in lhs_set + rhs:
            if not 1 <= j <= n:
                self.fail(f"position {j} out of range for {pred}/{n}", pred_tok)
        egds = [self.fd_to_egd(pred, n, lhs_set, j, pred_tok) for j in rhs]
        return ("egds", egds)

    def position(self, tok) -> int:
        t = self.expect("NAME")
        if not t.text.isdigit():
            self.fail(f"expected an attribute position, found {t.text!r}", t)
        return int(t.text)

    def fd_to_egd(self, pred, n, lhs_set, j, tok) -> Egd:
        if j in lhs_set:
            self.fail(f"fd on {pred} determines its own attribute {j}", tok)
        left = [Var(f"X{i}") for i in range(1, n + 1)]
        right = [
            Var(f"X{i}") if i in lhs_set else Var(f"Y{i}") for i in range(1, n + 1)
        ]
        return Egd(
            [Atom(pred, left), Atom(pred, right)],
            left[j - 1].name,
            right[j - 1].name,
        )


def parse_program(text: str) -> Program:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Serialization


def _atom_text(a: Atom) -> str:
    return f"{a.pred}({','.join(term_text(t) for t in a.args)})"


def serialize(entity: Union[CQ, UCQ, Tgd, Egd, Instance, DependencySet, Program]) -> str:
    """Render an entity in the `.dl` grammar; reparsing yields an isomorphic
    entity (frozen terms print as plain `c_X` constants)."""
    if isinstance(entity, CQ):
        head = f"{entity.name}({','.join(entity.free_vars)})"
        return f"{head} :- {', '.join(_atom_text(a) for a in entity.atoms)}."
    if isinstance(entity, UCQ):
        lines = []
        for d in entity.disjuncts:
            head = f"{entity.name}({','.join(entity.free_vars)})"
            lines.append(f"{head} :- {', '.join(_atom_text(a) for a in d.atoms)}.")
        return "\n".join(lines)
    if isinstance(entity, Tgd):
        b = ", ".join(_atom_text(a) for a in entity.body)
        h = ", ".join(_atom_text(a) for a in entity.head)
        return f"{b} -> {h}."
    if isinstance(entity, Egd):
        b = ", ".join(_atom_text(a) for a in entity.body)
        return f"{b} -> {entity.lhs} = {entity.rhs}."
    if isinstance(entity, Instance):
        return "\n".join(f"{_atom_text(a)}." for a in entity.atoms)
    if isinstance(entity, DependencySet):
        lines = [serialize(d) for d in entity.tgds]
        lines += [serialize(d) for d in entity.egds]
        return "\n".join(lines)
    if isinstance(entity, Program):
        parts = []
        for ucq in entity.queries.values():
            parts.append(serialize(ucq))
        dep = serialize(entity.dependencies)
        if dep:
            parts.append(dep)
        if len(entity.facts):
            parts.append(serialize(entity.facts))
        return "\n".join(parts)
    raise TypeError(f"cannot serialize {type(entity).__name__}")
