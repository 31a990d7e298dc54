"""Join-tree machinery: the GYO reduction, validation, and compaction.

A structure is acyclic when it admits a join tree: a forest over its atoms
in which, for every connecting term (variable, frozen constant, or null),
the nodes mentioning that term form a connected subtree.  Rigid constants
are exempt.  Disconnected structures get a forest whose roots hang off an
implicit virtual root carrying no terms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .errors import ModelError
from .model import (
    CQ,
    Atom,
    Instance,
    Var,
    is_connecting,
    is_rigid,
    sort_atoms,
)


@dataclass(frozen=True)
class JoinTree:
    """Forest over atoms; `parent[v] is None` marks a root."""

    nodes: tuple  # tuple[Atom, ...]; node id = index
    parent: tuple  # tuple[Optional[int], ...]

    def __init__(self, nodes: Iterable[Atom], parent: Iterable[Optional[int]]):
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "parent", tuple(parent))
        if len(self.nodes) != len(self.parent):
            raise ModelError("join tree: one parent entry per node required")
        n = len(self.nodes)
        for p in self.parent:
            if p is not None and not 0 <= p < n:
                raise ModelError(f"join tree: parent id {p} out of range")
        seen: set = set()
        for v in range(n):
            path = []
            u = v
            while u is not None and u not in seen:
                path.append(u)
                seen.add(u)
                u = self.parent[u]
                if u in path:
                    raise ModelError("join tree: parent links form a cycle")

    def roots(self) -> tuple:
        return tuple(v for v, p in enumerate(self.parent) if p is None)

    def children(self) -> dict:
        out: dict = {v: [] for v in range(len(self.nodes))}
        for v, p in enumerate(self.parent):
            if p is not None:
                out[p].append(v)
        return out

    def atoms(self) -> tuple:
        return sort_atoms(self.nodes)

    def to_outline(self) -> str:
        kids = self.children()
        lines = []

        def walk(v, depth):
            lines.append("  " * depth + repr(self.nodes[v]))
            for c in kids[v]:
                walk(c, depth + 1)

        for r in self.roots():
            walk(r, 0)
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(
            [
                {"id": v, "atom": repr(self.nodes[v]), "parent": self.parent[v]}
                for v in range(len(self.nodes))
            ]
        )


def _structure_atoms(s: Union[CQ, Instance, Sequence[Atom]]) -> tuple:
    if isinstance(s, CQ):
        return s.atoms
    if isinstance(s, Instance):
        return s.atoms
    return sort_atoms(s)


def is_acyclic(s: Union[CQ, Instance]) -> Optional[JoinTree]:
    """GYO ear removal; returns a join tree when one exists.

    An atom is an ear when the connecting terms it shares with the rest
    all fit inside one other live atom (or it shares nothing).  Repeatedly
    deleting the canonically first ear empties the atom set exactly for
    acyclic structures.  Ties break toward the first candidate parent, so
    the returned tree is deterministic.
    """
    atoms = list(_structure_atoms(s))
    if not atoms:
        return JoinTree((), ())
    alive = list(range(len(atoms)))
    conn = [frozenset(t for t in a.args if is_connecting(t)) for a in atoms]
    parent_atom: dict = {}
    removed = []
    while alive:
        ear = witness = None
        for i in alive:
            shared = {
                t
                for j in alive
                if j != i
                for t in conn[i] & conn[j]
            }
            if not shared:
                ear, witness = i, None
                break
            for j in alive:
                if j != i and shared <= conn[j]:
                    ear, witness = i, j
                    break
            if ear is not None:
                break
        if ear is None:
            return None
        alive.remove(ear)
        parent_atom[ear] = witness
        removed.append(ear)
    parent = []
    for v in range(len(atoms)):
        parent.append(parent_atom[v])
    return JoinTree(atoms, parent)


def validate_join_tree(s: Union[CQ, Instance], t: JoinTree) -> bool:
    """Check both join-tree conditions exactly.

    Condition 1: the tree's labels and the structure's atoms coincide.
    Condition 2: for every connecting term, its occurrence set induces a
    connected subgraph of the forest (the virtual root never helps).
    """
    atoms = set(_structure_atoms(s))
    labels = set(t.nodes)
    if atoms != labels:
        return False
    n = len(t.nodes)
    for term in {x for a in t.nodes for x in a.args if is_connecting(x)}:
        holders = [v for v in range(n) if term in t.nodes[v].args]
        if len(holders) <= 1:
            continue
        holder_set = set(holders)
        comp = {holders[0]}
        frontier = [holders[0]]
        kids = t.children()
        while frontier:
            v = frontier.pop()
            for u in kids[v] + ([t.parent[v]] if t.parent[v] is not None else []):
                if u in holder_set and u not in comp:
                    comp.add(u)
                    frontier.append(u)
        if comp != holder_set:
            return False
    return True


def _var_name_for(term, taken):
    base = f"F_{term.source}" if hasattr(term, "source") else f"N_{term.uid}"
    name = base
    k = 0
    while name in taken:
        k += 1
        name = f"{base}_{k}"
    taken.add(name)
    return name


def compact_witness(q: CQ, target: Instance, tree: JoinTree, h: dict) -> CQ:
    """Shrink an acyclic target that q maps into down to a small acyclic
    subquery of q.

    Keeps the image nodes' roots, leaves, and branching ancestors, and
    contracts unary chains; the kept atoms, with every non-rigid term
    renamed to a variable, form an acyclic query q' with at most twice
    q's atom count, a homomorphism from q, and the image of q's free
    tuple among its answers.

    `h` maps q's variables (by name) to target terms and must send the
    free variables to pairwise-distinct non-rigid terms.
    """
    if not validate_join_tree(target, tree):
        raise ModelError("compact_witness: not a valid join tree of the target")
    free_imgs = []
    for x in q.free_vars:
        img = h.get(x)
        if img is None or is_rigid(img):
            raise ModelError(f"free variable {x} must map to a non-rigid term")
        free_imgs.append(img)
    if len(set(free_imgs)) != len(free_imgs):
        raise ModelError("free variables must map to pairwise-distinct terms")

    def apply(atom: Atom) -> Atom:
        out = []
        for t in atom.args:
            if isinstance(t, Var):
                if t.name not in h:
                    raise ModelError(f"mapping is not total: {t.name} unbound")
                out.append(h[t.name])
            else:
                out.append(t)
        return Atom(atom.pred, out)

    image_atoms = set()
    for a in q.atoms:
        img = apply(a)
        if img not in target.atom_set:
            raise ModelError(f"mapping does not send {a!r} into the target")
        image_atoms.add(img)

    n = len(tree.nodes)
    in_tq = [False] * n
    for v in range(n):
        if tree.nodes[v] in image_atoms:
            u = v
            while u is not None and not in_tq[u]:
                in_tq[u] = True
                u = tree.parent[u]
    tq_children: dict = {v: [] for v in range(n) if in_tq[v]}
    for v in range(n):
        if in_tq[v] and tree.parent[v] is not None:
            tq_children[tree.parent[v]].append(v)

    # Keep image nodes plus the roots and branching nodes of their
    # ancestor closure; unary chains of pure ancestors contract away.
    # Leaves of the closure are image nodes, so the kept set stays
    # within twice the query size.
    keep = set()
    for v in tq_children:
        is_root = tree.parent[v] is None or not in_tq[tree.parent[v]]
        degree = len(tq_children[v])
        if is_root or degree >= 2 or tree.nodes[v] in image_atoms:
            keep.add(v)

    kept_atoms = []
    seen = set()
    for v in sorted(keep, key=lambda v: tree.nodes[v].key()):
        a = tree.nodes[v]
        if a not in seen:
            seen.add(a)
            kept_atoms.append(a)

    taken: set = set()
    rename: dict = {}
    for a in kept_atoms:
        for t in a.args:
            if not is_rigid(t) and t not in rename:
                rename[t] = Var(_var_name_for(t, taken))
    new_atoms = [
        Atom(a.pred, [rename[t] if not is_rigid(t) else t for t in a.args])
        for a in kept_atoms
    ]
    free = tuple(rename[img].name for img in free_imgs)
    out = CQ(f"{q.name}_compact", free, new_atoms)
    if len(out) > 2 * len(q):
        raise ModelError("compaction exceeded the size bound")  # pragma: no cover
    return out
