"""Syntactic classification of dependency sets.

The flags gate which downstream algorithms are complete: terminating
classes may chase without budgets, rewritable classes may use backward
rewriting, and the guard/key flags select the small-witness machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

from .model import DependencySet, Egd, Tgd, Var, is_body_connected


@dataclass(frozen=True)
class Marking:
    """Least fixpoint of the variable-marking rules for stickiness.

    `marked` holds one entry per marked body variable: the tgd's index,
    the variable, and the body positions (pred, arg index) at which it
    occurs.  A set is sticky when no tgd has a marked variable with two
    body occurrences.
    """

    marked: tuple  # tuple[(tgd index, var, ((pred, pos), ...)), ...]
    rounds: int

    def marked_vars(self, tgd_index: int) -> set:
        return {v for i, v, _ in self.marked if i == tgd_index}


@dataclass(frozen=True)
class FdShape:
    """An egd recognized as the functional dependency pred: lhs -> rhs."""

    pred: str
    arity: int
    lhs: tuple  # determining positions, 1-based
    rhs: int  # determined position, 1-based


@dataclass(frozen=True)
class ClassLabels:
    guarded: bool
    linear: bool
    inclusion_dependency: bool
    full: bool
    non_recursive: bool
    sticky: bool
    body_connected: bool
    key: bool
    fd: bool
    unary_fd: bool
    k2_key: bool
    arity_le_2: bool
    terminating_chase: bool
    mixed: bool

    def flag_names(self) -> tuple:
        return tuple(
            name
            for name in (
                "guarded",
                "linear",
                "inclusion_dependency",
                "full",
                "non_recursive",
                "sticky",
                "body_connected",
                "key",
                "fd",
                "unary_fd",
                "k2_key",
                "arity_le_2",
                "terminating_chase",
                "mixed",
            )
            if getattr(self, name)
        )


def _positions_of(var: str, atoms) -> tuple:
    out = []
    for a in atoms:
        for i, t in enumerate(a.args):
            if isinstance(t, Var) and t.name == var:
                out.append((a.pred, i))
    return tuple(out)


def sticky_marking(tgds: Tuple[Tgd, ...]) -> Marking:
    """Compute the marking whose absence of doubled variables means sticky.

    Base step: a body variable of a tgd missing from at least one of its
    head atoms is marked.  Propagation: a body variable is marked when it
    occurs in a head atom at a position where some already-marked variable
    occurs in some body of the set.  Iterate to fixpoint.
    """
    marked: set = set()  # (tgd index, var)
    for idx, t in enumerate(tgds):
        for v in t.body_vars():
            if any(v not in a.variables() for a in t.head):
                marked.add((idx, v))
    rounds = 0
    while True:
        rounds += 1
        marked_positions = set()
        for idx, v in marked:
            for a in tgds[idx].body:
                for i, term in enumerate(a.args):
                    if isinstance(term, Var) and term.name == v:
                        marked_positions.add((a.pred, i))
        grown = set(marked)
        for idx, t in enumerate(tgds):
            for a in t.head:
                for i, term in enumerate(a.args):
                    if (
                        isinstance(term, Var)
                        and (a.pred, i) in marked_positions
                        and term.name in t.body_vars()
                    ):
                        grown.add((idx, term.name))
        if grown == marked:
            break
        marked = grown
    entries = tuple(
        sorted(
            (idx, v, _positions_of(v, tgds[idx].body))
            for idx, v in marked
        )
    )
    return Marking(entries, rounds)


def is_sticky(tgds: Tuple[Tgd, ...]) -> bool:
    marking = sticky_marking(tgds)
    for idx, v, positions in marking.marked:
        if len(positions) >= 2:
            return False
    return True


def _predicate_graph_acyclic(tgds) -> bool:
    edges: dict = {}
    for t in tgds:
        body_preds = {a.pred for a in t.body}
        head_preds = {a.pred for a in t.head}
        for b in body_preds:
            edges.setdefault(b, set()).update(head_preds)
    # DFS cycle detection
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {p: WHITE for p in set(edges) | {q for s in edges.values() for q in s}}

    def visit(p):
        color[p] = GRAY
        for q in edges.get(p, ()):
            if color[q] == GRAY:
                return False
            if color[q] == WHITE and not visit(q):
                return False
        color[p] = BLACK
        return True

    return all(visit(p) for p in sorted(color) if color[p] == WHITE)


def attachable_heads(tgds: Tuple[Tgd, ...]) -> bool:
    """True when every head hangs off its trigger's guard as a join tree.

    Head atoms of one firing share their guard's frontier image plus the
    fresh nulls; the produced atoms extend a join tree iff the head,
    conjoined with a virtual atom holding the frontier, is acyclic.  A
    single-atom head always qualifies; a head that forces a cycle among
    fresh nulls (three atoms in a triangle of existentials) does not, and
    such sets can turn acyclic queries into cyclic chase results even
    when guarded.
    """
    from .acyclicity import is_acyclic
    from .model import CQ as _CQ

    for t in tgds:
        if len(t.head) == 1:
            continue
        frontier = sorted(t.frontier())
        atoms = list(t.head)
        if frontier:
            atoms.append(Atom("__frontier__", [Var(v) for v in frontier]))
        if is_acyclic(_CQ("head", (), atoms)) is None:
            return False
    return True


def fd_shape(e: Egd) -> Optional[FdShape]:
    """Recognize the two-atom pattern an fd expands to, if e has it."""
    if len(e.body) != 2:
        return None
    a1, a2 = e.body
    if a1.pred != a2.pred or a1.arity != a2.arity:
        return None
    if not all(isinstance(t, Var) for t in a1.args + a2.args):
        return None
    for first, second in ((a1, a2), (a2, a1)):
        shape = _match_fd(first, second, e.lhs, e.rhs)
        if shape:
            return shape
    return None


def _match_fd(a1, a2, lhs, rhs) -> Optional[FdShape]:
    n = a1.arity
    agree = [i for i in range(n) if a1.args[i] == a2.args[i]]
    others1 = [a1.args[i].name for i in range(n) if i not in agree]
    others2 = [a2.args[i].name for i in range(n) if i not in agree]
    agree_vars = [a1.args[i].name for i in agree]
    all_names = agree_vars + others1 + others2
    if len(set(all_names)) != len(all_names):
        return None
    target = None
    for i in range(n):
        if i in agree:
            continue
        if {a1.args[i].name, a2.args[i].name} == {lhs, rhs}:
            target = i
            break
    if target is None:
        return None
    return FdShape(a1.pred, n, tuple(i + 1 for i in agree), target + 1)


def _egd_flags(egds: Tuple[Egd, ...]):
    shapes = [fd_shape(e) for e in egds]
    fd = bool(egds) and all(s is not None for s in shapes)
    arity_le_2 = all(a.arity <= 2 for e in egds for a in e.body)
    unary_fd = fd and all(len(s.lhs) == 1 for s in shapes)
    k2_key = fd and all(
        s.arity == 2 and len(s.lhs) == 1 for s in shapes
    )
    if fd:
        # a complete key group determines every position outside the lhs
        groups: dict = {}
        for s in shapes:
            groups.setdefault((s.pred, s.lhs, s.arity), set()).add(s.rhs)
        key = all(
            determined == set(range(1, arity + 1)) - set(lhs)
            for (pred, lhs, arity), determined in groups.items()
        )
    else:
        key = False
    return key, fd, unary_fd, k2_key, arity_le_2


@lru_cache(maxsize=None)
def classify(deps: DependencySet) -> ClassLabels:
    """Compute every flag; mixed sets get each fragment's flags plus a marker."""
    tgds, egds = deps.tgds, deps.egds
    guarded = all(t.guard() is not None for t in tgds)
    linear = all(len(t.body) == 1 for t in tgds)

    def id_like(t: Tgd) -> bool:
        if len(t.body) != 1 or len(t.head) != 1:
            return False
        for a in t.body + t.head:
            names = [x.name for x in a.args if isinstance(x, Var)]
            if len(set(names)) != len(names) or len(names) != a.arity:
                return False
        return True

    inclusion = linear and all(id_like(t) for t in tgds)
    full = all(not t.existentials() for t in tgds)
    non_recursive = _predicate_graph_acyclic(tgds)
    sticky = is_sticky(tgds)
    body_connected = all(is_body_connected(t) for t in tgds)
    key, fd, unary_fd, k2_key, arity_le_2 = _egd_flags(egds)
    terminating = non_recursive or full  # egds on their own always terminate
    return ClassLabels(
        guarded=guarded,
        linear=linear,
        inclusion_dependency=inclusion,
        full=full,
        non_recursive=non_recursive,
        sticky=sticky,
        body_connected=body_connected,
        key=key,
        fd=fd,
        unary_fd=unary_fd,
        k2_key=k2_key,
        arity_le_2=arity_le_2,
        terminating_chase=terminating,
        mixed=bool(tgds) and bool(egds),
    )
