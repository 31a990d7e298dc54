"""Terms, atoms, queries, dependencies, and instances.

Terms come in four kinds.  Variables appear in queries and dependencies
only.  Rigid constants are ordinary database constants: homomorphisms and
equality steps never move them.  Frozen constants are the canonical-database
images c(x) of query variables; they behave like constants for satisfaction
but like nulls for equality steps and for join-tree connectedness.  Nulls
are the fresh values invented by the chase.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import count
from typing import Iterable, Iterator, Optional, Sequence, Union

from .errors import ModelError


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return f"Var({self.name})"


@dataclass(frozen=True)
class Const:
    name: str

    def __repr__(self):
        return f"Const({self.name})"


@dataclass(frozen=True)
class Frozen:
    """Canonical-database image c(x) of the query variable named `source`."""

    source: str

    def __repr__(self):
        return f"Frozen({self.source})"


@dataclass(frozen=True)
class Null:
    uid: int

    def __repr__(self):
        return f"Null({self.uid})"


Term = Union[Var, Const, Frozen, Null]

_KIND_RANK = {Const: 0, Frozen: 1, Null: 2, Var: 3}


def term_key(t: Term) -> tuple:
    """Total order on terms: constants < frozen < nulls < variables."""
    if isinstance(t, Null):
        return (2, "", t.uid)
    name = t.name if not isinstance(t, Frozen) else t.source
    return (_KIND_RANK[type(t)], name, 0)


def is_rigid(t: Term) -> bool:
    return isinstance(t, Const)


def is_connecting(t: Term) -> bool:
    """True for terms that join-tree connectedness must respect.

    Variables count because query acyclicity is judged after replacing
    them with fresh nulls; frozen constants count because the chase
    treats them as nulls.
    """
    return not isinstance(t, Const)


def term_text(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return t.name
    if isinstance(t, Frozen):
        return f"c_{t.source}"
    return f"_n{t.uid}"


# ---------------------------------------------------------------------------
# Atoms


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple  # tuple[Term, ...]

    def __init__(self, pred: str, args: Iterable[Term]):
        object.__setattr__(self, "pred", pred)
        object.__setattr__(self, "args", tuple(args))
        if not self.pred:
            raise ModelError("atom predicate name must be non-empty")
        if not self.args:
            raise ModelError(f"atom {self.pred} must have arity > 0")

    @property
    def arity(self) -> int:
        return len(self.args)

    def key(self) -> tuple:
        return (self.pred, len(self.args)) + tuple(term_key(a) for a in self.args)

    def terms(self) -> tuple:
        return self.args

    def variables(self) -> set:
        return {a.name for a in self.args if isinstance(a, Var)}

    def __repr__(self):
        return f"{self.pred}({','.join(term_text(a) for a in self.args)})"


def sort_atoms(atoms: Iterable[Atom]) -> tuple:
    """Canonical atom order: predicate name, then argument term order."""
    return tuple(sorted(set(atoms), key=Atom.key))


def check_arities(atoms: Iterable[Atom], arities: Optional[dict] = None) -> dict:
    """First use of a predicate fixes its arity; later conflicts are errors."""
    arities = dict(arities) if arities else {}
    for a in atoms:
        seen = arities.setdefault(a.pred, a.arity)
        if seen != a.arity:
            raise ModelError(
                f"predicate {a.pred} used with arity {a.arity} but previously {seen}"
            )
    return arities


# ---------------------------------------------------------------------------
# Queries


@dataclass(frozen=True)
class CQ:
    """A conjunctive query with an ordered tuple of free variables."""

    name: str
    free_vars: tuple  # tuple[str, ...]
    atoms: tuple  # tuple[Atom, ...], canonically ordered, deduplicated

    def __init__(self, name: str, free_vars: Iterable[str], atoms: Iterable[Atom]):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "free_vars", tuple(free_vars))
        object.__setattr__(self, "atoms", sort_atoms(atoms))
        self._validate()

    def _validate(self):
        if not self.atoms:
            raise ModelError(f"query {self.name} has no atoms")
        if len(set(self.free_vars)) != len(self.free_vars):
            raise ModelError(f"query {self.name} repeats a free variable")
        check_arities(self.atoms)
        have = self.variables()
        for x in self.free_vars:
            if x not in have:
                raise ModelError(f"free variable {x} of {self.name} occurs in no atom")
        for a in self.atoms:
            for t in a.args:
                if isinstance(t, (Null, Frozen)):
                    raise ModelError(f"query {self.name} contains non-query term {t!r}")

    def variables(self) -> set:
        out = set()
        for a in self.atoms:
            out |= a.variables()
        return out

    def existential_vars(self) -> set:
        return self.variables() - set(self.free_vars)

    def constants(self) -> set:
        return {t for a in self.atoms for t in a.args if isinstance(t, Const)}

    def predicates(self) -> dict:
        return {a.pred: a.arity for a in self.atoms}

    def is_boolean(self) -> bool:
        return not self.free_vars

    def __len__(self):
        return len(self.atoms)

    def __repr__(self):
        head = f"{self.name}({','.join(self.free_vars)})"
        return f"{head} :- {', '.join(map(repr, self.atoms))}"


@dataclass(frozen=True)
class UCQ:
    name: str
    free_vars: tuple
    disjuncts: tuple  # tuple[CQ, ...]

    def __init__(self, name: str, free_vars: Iterable[str], disjuncts: Iterable[CQ]):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "free_vars", tuple(free_vars))
        object.__setattr__(self, "disjuncts", tuple(disjuncts))
        if not self.disjuncts:
            raise ModelError(f"union query {self.name} has no disjuncts")
        for q in self.disjuncts:
            if len(q.free_vars) != len(self.free_vars):
                raise ModelError(
                    f"disjunct {q.name} of {self.name} has mismatched free arity"
                )

    def __len__(self):
        return len(self.disjuncts)


# ---------------------------------------------------------------------------
# Dependencies


def _dependency_atom_check(atoms, where):
    for a in atoms:
        for t in a.args:
            if isinstance(t, (Null, Frozen)):
                raise ModelError(f"{where} contains non-rule term {t!r}")


@dataclass(frozen=True)
class Tgd:
    body: tuple  # tuple[Atom, ...]
    head: tuple  # tuple[Atom, ...]

    def __init__(self, body: Iterable[Atom], head: Iterable[Atom]):
        object.__setattr__(self, "body", sort_atoms(body))
        object.__setattr__(self, "head", sort_atoms(head))
        if not self.body or not self.head:
            raise ModelError("tgd needs a non-empty body and head")
        _dependency_atom_check(self.body + self.head, "tgd")

    def body_vars(self) -> set:
        return {v for a in self.body for v in a.variables()}

    def head_vars(self) -> set:
        return {v for a in self.head for v in a.variables()}

    def frontier(self) -> set:
        return self.body_vars() & self.head_vars()

    def existentials(self) -> set:
        return self.head_vars() - self.body_vars()

    def guard(self) -> Optional[Atom]:
        """First body atom containing every body variable, if any."""
        need = self.body_vars()
        for a in self.body:
            if need <= a.variables():
                return a
        return None

    def __repr__(self):
        b = ", ".join(map(repr, self.body))
        h = ", ".join(map(repr, self.head))
        return f"{b} -> {h}"


@dataclass(frozen=True)
class Egd:
    body: tuple
    lhs: str
    rhs: str

    def __init__(self, body: Iterable[Atom], lhs: str, rhs: str):
        object.__setattr__(self, "body", sort_atoms(body))
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)
        if not self.body:
            raise ModelError("egd needs a non-empty body")
        if lhs == rhs:
            raise ModelError(f"degenerate equality {lhs} = {rhs}")
        _dependency_atom_check(self.body, "egd")
        bv = {v for a in self.body for v in a.variables()}
        for side in (lhs, rhs):
            if side not in bv:
                raise ModelError(f"equality side {side} is not a body variable")

    def body_vars(self) -> set:
        return {v for a in self.body for v in a.variables()}

    def __repr__(self):
        b = ", ".join(map(repr, self.body))
        return f"{b} -> {self.lhs} = {self.rhs}"


Dependency = Union[Tgd, Egd]


@dataclass(frozen=True)
class DependencySet:
    tgds: tuple
    egds: tuple

    def __init__(self, tgds: Iterable[Tgd] = (), egds: Iterable[Egd] = ()):
        object.__setattr__(self, "tgds", tuple(tgds))
        object.__setattr__(self, "egds", tuple(egds))
        atoms = [a for d in self.tgds for a in d.body + d.head]
        atoms += [a for d in self.egds for a in d.body]
        check_arities(atoms)

    @property
    def labels(self):
        """Classification flags, computed on demand and cached."""
        from .classify import classify

        return classify(self)

    def is_empty(self) -> bool:
        return not self.tgds and not self.egds

    def is_pure_tgds(self) -> bool:
        return not self.egds

    def is_pure_egds(self) -> bool:
        return not self.tgds

    def predicates(self) -> dict:
        out = {}
        for d in self.tgds:
            for a in d.body + d.head:
                out[a.pred] = a.arity
        for d in self.egds:
            for a in d.body:
                out[a.pred] = a.arity
        return out

    def __len__(self):
        return len(self.tgds) + len(self.egds)


EMPTY_DEPS = DependencySet((), ())


# ---------------------------------------------------------------------------
# Instances


@dataclass(frozen=True)
class Instance:
    atoms: tuple  # canonically ordered, deduplicated

    def __init__(self, atoms: Iterable[Atom]):
        object.__setattr__(self, "atoms", sort_atoms(atoms))
        for a in self.atoms:
            for t in a.args:
                if isinstance(t, Var):
                    raise ModelError(f"instance atom {a!r} contains a variable")

    @property
    def atom_set(self) -> frozenset:
        return frozenset(self.atoms)

    def terms(self) -> set:
        return {t for a in self.atoms for t in a.args}

    def by_pred(self) -> dict:
        out: dict = {}
        for a in self.atoms:
            out.setdefault(a.pred, []).append(a)
        return out

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.atom_set

    def __len__(self):
        return len(self.atoms)

    def __repr__(self):
        return "{" + ", ".join(map(repr, self.atoms)) + "}"


EMPTY_INSTANCE = Instance(())


# ---------------------------------------------------------------------------
# Structural helpers


def canonical_database(q: CQ):
    """Freeze q's variables: each variable x becomes the constant c(x).

    Returns the frozen instance together with the image of the free tuple,
    in order.  Frozen terms compare equal iff their source variables do;
    rigid constants pass through untouched.
    """
    subst = {x: Frozen(x) for x in q.variables()}
    atoms = [
        Atom(a.pred, [subst[t.name] if isinstance(t, Var) else t for t in a.args])
        for a in q.atoms
    ]
    return Instance(atoms), tuple(Frozen(x) for x in q.free_vars)


def _atom_components(atoms: Sequence[Atom]):
    """Partition atoms into Gaifman-connected groups.

    Two atoms are linked when they share a variable (for queries and rule
    bodies) or a connecting term (for frozen instances).  Variable-free
    atoms share nothing, so each sits in its own group.
    """
    atoms = list(atoms)
    parent = list(range(len(atoms)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj

    owner: dict = {}
    for i, a in enumerate(atoms):
        for t in a.args:
            if not is_connecting(t):
                continue
            k = term_key(t)
            if k in owner:
                union(i, owner[k])
            else:
                owner[k] = i
    groups: dict = {}
    for i in range(len(atoms)):
        groups.setdefault(find(i), []).append(atoms[i])
    return [sort_atoms(g) for g in groups.values()]


def gaifman_components(q: CQ) -> tuple:
    """Split q into its maximal connected subqueries.

    Each component keeps, in order, the free variables it mentions.  The
    components partition the atoms and share no variables.
    """
    groups = _atom_components(q.atoms)
    groups.sort(key=lambda g: g[0].key())
    out = []
    for i, g in enumerate(groups):
        gvars = {v for a in g for v in a.variables()}
        free = tuple(x for x in q.free_vars if x in gvars)
        out.append(CQ(f"{q.name}_c{i}" if len(groups) > 1 else q.name, free, g))
    return tuple(out)


def is_connected(q: CQ) -> bool:
    return len(_atom_components(q.atoms)) == 1


def is_body_connected(d: Dependency) -> bool:
    """True iff the dependency's body is Gaifman-connected."""
    return len(_atom_components(d.body)) == 1


def instance_as_cq(i: Instance, name: str = "q", free_terms: Sequence = ()) -> CQ:
    """Read an instance back as a query: frozen terms and nulls turn into
    variables, rigid constants stay.  `free_terms` selects which instance
    terms become the free tuple, in order."""
    mapping: dict = {}

    def var_for(t):
        if t not in mapping:
            if isinstance(t, Frozen):
                mapping[t] = Var(f"F_{t.source}")
            else:
                mapping[t] = Var(f"N_{t.uid}")
        return mapping[t]

    atoms = [
        Atom(a.pred, [t if is_rigid(t) else var_for(t) for t in a.args])
        for a in i.atoms
    ]
    free = []
    for t in free_terms:
        if is_rigid(t):
            raise ModelError("a rigid constant cannot head a free position")
        free.append(var_for(t).name)
    return CQ(name, free, atoms)


class NullFactory:
    """Hands out fresh nulls with increasing ids, one factory per chase run."""

    def __init__(self, start: int = 1):
        self._counter = count(start)

    def fresh(self) -> Null:
        return Null(next(self._counter))
