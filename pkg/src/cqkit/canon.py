"""Canonical forms for queries up to renaming of existential variables.

Free variables and constants are pinned; existential variables may be
renamed.  The canonical form is the least encoding of the atom set over
all renamings compatible with an invariant color refinement, found by
individualization with backtracking.  Two queries are isomorphic iff
their canonical keys are equal, which gives cheap deduplication for
candidate streams and rewrite sets.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

from .model import CQ, Atom, Var, term_key


def _encode(atoms: Sequence[Atom], naming: dict) -> tuple:
    out = []
    for a in atoms:
        row = [a.pred]
        for t in a.args:
            if isinstance(t, Var):
                row.append(("e", naming[t.name]))
            else:
                row.append(("k",) + term_key(t))
        out.append(tuple(row))
    out.sort()
    return tuple(out)


def _refine_colors(atoms, evars, pinned):
    """Iterated signature refinement over existential variables."""
    colors = {v: 0 for v in evars}
    while True:
        sigs = {}
        for v in evars:
            sig = []
            for a in atoms:
                for i, t in enumerate(a.args):
                    if isinstance(t, Var) and t.name == v:
                        ctx = tuple(
                            ("p", pinned[u.name])
                            if isinstance(u, Var) and u.name in pinned
                            else ("c", colors[u.name])
                            if isinstance(u, Var)
                            else ("k",) + term_key(u)
                            for u in a.args
                        )
                        sig.append((a.pred, i, ctx))
            sigs[v] = tuple(sorted(sig))
        ranked = sorted(set(sigs.values()))
        new = {v: ranked.index(sigs[v]) for v in evars}
        if new == colors:
            return colors
        colors = new


def _canonical(atoms: Sequence[Atom], fixed_vars: Iterable[str]):
    """Least encoding and the renaming that produces it.

    The next canonical index always goes to a variable of the minimal
    refined color among the unassigned ones; that rule depends only on
    isomorphism invariants, so isomorphic inputs reach the same key.
    """
    fixed = list(dict.fromkeys(fixed_vars))
    pinned = {x: i for i, x in enumerate(fixed)}
    evars = sorted(
        {t.name for a in atoms for t in a.args if isinstance(t, Var)} - set(pinned)
    )
    base = {x: ("f", i) for x, i in pinned.items()}
    if not evars:
        return _encode(atoms, base), dict(base)

    colors = _refine_colors(atoms, evars, pinned)
    best_key: list = [None]
    best_naming: list = [None]

    def assign(naming, remaining):
        if not remaining:
            enc = _encode(atoms, naming)
            if best_key[0] is None or enc < best_key[0]:
                best_key[0] = enc
                best_naming[0] = dict(naming)
            return
        lowest = min(colors[v] for v in remaining)
        idx = len(naming) - len(pinned)
        for v in sorted(w for w in remaining if colors[w] == lowest):
            naming[v] = ("e", idx)
            assign(naming, [w for w in remaining if w != v])
            del naming[v]

    assign(dict(base), evars)
    return best_key[0], best_naming[0]


def canonical_key(atoms: Sequence[Atom], fixed_vars: Iterable[str] = ()) -> tuple:
    """Hashable key identifying the atom set up to existential renaming."""
    return _canonical(atoms, fixed_vars)[0]


def canonical_atoms(atoms: Sequence[Atom], fixed_vars: Iterable[str] = ()):
    """Atoms with non-fixed variables renamed into canonical E0, E1, ... order;
    returns (key, renamed atom tuple)."""
    key, naming = _canonical(atoms, fixed_vars)
    fixed = set(fixed_vars)
    prefix = "E"
    while any(x.startswith(prefix) for x in fixed):
        prefix += "_"
    out = []
    for a in atoms:
        args = []
        for t in a.args:
            if isinstance(t, Var) and t.name not in fixed:
                args.append(Var(f"{prefix}{naming[t.name][1]}"))
            else:
                args.append(t)
        out.append(Atom(a.pred, args))
    return key, tuple(sorted(out, key=Atom.key))


def canonical_cq(q: CQ, name: Optional[str] = None) -> CQ:
    """Rename q's existential variables into the canonical E0, E1, ... order."""
    _, naming = _canonical(q.atoms, q.free_vars)
    prefix = "E"
    while any(x.startswith(prefix) for x in q.free_vars):
        prefix += "_"
    rename = {x: x for x in q.free_vars}
    for v in q.existential_vars():
        rename[v] = f"{prefix}{naming[v][1]}"
    atoms = [
        Atom(
            a.pred,
            [Var(rename[t.name]) if isinstance(t, Var) else t for t in a.args],
        )
        for a in q.atoms
    ]
    return CQ(name or q.name, q.free_vars, atoms)


def isomorphic(q1: CQ, q2: CQ) -> bool:
    """Equality up to existential renaming; free tuples align positionally."""
    if len(q1.free_vars) != len(q2.free_vars) or len(q1) != len(q2):
        return False
    rename = dict(zip(q2.free_vars, q1.free_vars))
    clashes = (set(rename.values()) - set(rename)) & q2.existential_vars()
    if clashes:
        fresh = {v: f"__iso_{i}" for i, v in enumerate(sorted(clashes))}
        rename.update(fresh)
    atoms2 = [
        Atom(
            a.pred,
            [
                Var(rename.get(t.name, t.name)) if isinstance(t, Var) else t
                for t in a.args
            ],
        )
        for a in q2.atoms
    ]
    return canonical_key(q1.atoms, q1.free_vars) == canonical_key(
        atoms2, q1.free_vars
    )
