"""Backtracking homomorphism search.

Source terms that may move are variables, frozen constants, and nulls;
rigid constants map to themselves.  The search picks the next atom with
the most already-bound terms (a most-constrained-first heuristic; the
answer set is order-independent) and tries destination atoms in
canonical order, so the first solution is deterministic.
"""

from __future__ import annotations

from typing import Dict, Iterable, Iterator, Optional, Sequence, Union

from .model import (
    CQ,
    Atom,
    Const,
    Instance,
    Term,
    Var,
    is_rigid,
    sort_atoms,
)

Mapping = Dict[Term, Term]


def _source_atoms(src: Union[CQ, Instance, Sequence[Atom]]) -> tuple:
    if isinstance(src, (CQ, Instance)):
        return src.atoms
    return sort_atoms(src)


def _movable(t: Term) -> bool:
    return not is_rigid(t)


def _extend(atom: Atom, target: Atom, binding: Mapping) -> Optional[Mapping]:
    """Match one source atom against one destination atom."""
    if atom.pred != target.pred or atom.arity != target.arity:
        return None
    new = {}
    for s, d in zip(atom.args, target.args):
        if is_rigid(s):
            if s != d:
                return None
            continue
        bound = binding.get(s, new.get(s))
        if bound is None:
            new[s] = d
        elif bound != d:
            return None
    if not new:
        return binding
    out = dict(binding)
    out.update(new)
    return out


def all_homomorphisms(
    src: Union[CQ, Instance, Sequence[Atom]],
    dst: Instance,
    fix: Optional[Mapping] = None,
) -> Iterator[Mapping]:
    """Stream every homomorphism extending `fix`, deterministically."""
    atoms = list(_source_atoms(src))
    binding: Mapping = dict(fix) if fix else {}
    by_pred = dst.by_pred()

    def recurse(pending, binding):
        if not pending:
            yield dict(binding)
            return
        # most-constrained atom first: maximal count of bound terms
        def bound_count(a):
            return sum(1 for t in a.args if is_rigid(t) or t in binding)

        best = max(range(len(pending)), key=lambda i: (bound_count(pending[i]), -i))
        atom = pending[best]
        rest = pending[:best] + pending[best + 1 :]
        for target in by_pred.get(atom.pred, ()):
            nxt = _extend(atom, target, binding)
            if nxt is not None:
                yield from recurse(rest, nxt)

    yield from recurse(atoms, binding)


def find_homomorphism(
    src: Union[CQ, Instance, Sequence[Atom]],
    dst: Instance,
    fix: Optional[Mapping] = None,
) -> Optional[Mapping]:
    """First homomorphism in the deterministic search order, if any."""
    for h in all_homomorphisms(src, dst, fix):
        return h
    return None


def fix_free_tuple(q: CQ, images: Sequence[Term]) -> Mapping:
    """Pin q's free variables, positionally, to the given terms."""
    if len(q.free_vars) != len(images):
        raise ValueError("free tuple length mismatch")
    return {Var(x): t for x, t in zip(q.free_vars, images)}


def apply_mapping(atoms: Iterable[Atom], h: Mapping) -> list:
    out = []
    for a in atoms:
        out.append(Atom(a.pred, [h.get(t, t) if _movable(t) else t for t in a.args]))
    return out
