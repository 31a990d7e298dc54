"""Containment and equivalence of queries under dependencies.

Two engines are provided.  The chase engine freezes the left query,
chases it, and looks for a pinned homomorphism from the right query;
it is complete whenever the chase saturates.  The rewrite engine
saturates the right query backward through the tgds into a union of
dependency-free disjuncts and evaluates them on the left query's frozen
database; it is complete for non-recursive and sticky sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import count, product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .canon import canonical_cq, canonical_key
from .chase import FAILED, SATURATED, ChasePolicy, chase_query
from .errors import ModelError, UnsupportedClassError
from .homs import (
    all_homomorphisms,
    apply_mapping,
    find_homomorphism,
    fix_free_tuple,
)
from .model import (
    CQ,
    UCQ,
    Atom,
    Const,
    DependencySet,
    Frozen,
    Instance,
    Tgd,
    Term,
    Var,
    canonical_database,
    is_rigid,
)

__all__ = [
    "TriState",
    "YES",
    "NO",
    "find_homomorphism",
    "all_homomorphisms",
    "core",
    "contains_chase",
    "RewriteSet",
    "ucq_rewrite",
    "contains_rewrite",
    "equivalent",
]


@dataclass(frozen=True)
class TriState:
    value: str  # yes | no | unknown
    reason: Optional[str] = None  # budget | unsupported-class

    def is_yes(self):
        return self.value == "yes"

    def is_no(self):
        return self.value == "no"

    def is_unknown(self):
        return self.value == "unknown"

    def __bool__(self):
        raise TypeError("three-valued answer; test .is_yes()/.is_no() explicitly")


YES = TriState("yes")
NO = TriState("no")
UNKNOWN_BUDGET = TriState("unknown", "budget")
UNKNOWN_CLASS = TriState("unknown", "unsupported-class")


# ---------------------------------------------------------------------------
# Cores


def _unfreeze(atoms: Iterable[Atom]) -> list:
    out = []
    for a in atoms:
        out.append(
            Atom(
                a.pred,
                [Var(t.source) if isinstance(t, Frozen) else t for t in a.args],
            )
        )
    return out


def core(q: CQ) -> CQ:
    """Minimal equivalent subquery: retract until no proper retraction exists.

    A retraction is an endomorphism fixing the free variables whose image
    drops at least one atom; the fixpoint is unique up to isomorphism.
    """
    current = q
    fix = {Var(x): Frozen(x) for x in q.free_vars}
    while True:
        db, _ = canonical_database(current)
        dropped = False
        for victim in db.atoms:
            rest = Instance([a for a in db.atoms if a != victim])
            if not len(rest):
                continue
            h = find_homomorphism(current, rest, fix)
            if h is not None:
                image = apply_mapping(db.atoms, _frozen_to_frozen(h))
                current = CQ(current.name, current.free_vars, _unfreeze(image))
                dropped = True
                break
        if not dropped:
            return current


def _frozen_to_frozen(h: Dict[Term, Term]) -> Dict[Term, Term]:
    """Recast a Var->term mapping as Frozen->term, for composing with the
    canonical database."""
    return {Frozen(v.name): t for v, t in h.items() if isinstance(v, Var)}


# ---------------------------------------------------------------------------
# Chase-based containment


def contains_chase(
    q: CQ,
    q2: CQ,
    deps: DependencySet,
    policy: ChasePolicy = ChasePolicy(),
) -> TriState:
    """Does q's every answer under deps also answer q2?

    Freezes q, chases, and searches for a homomorphism from q2 with q2's
    free tuple pinned positionally to the (merge-adjusted) frozen tuple.
    A hit inside an unsaturated prefix is still a sound yes; a miss under
    budget is unknown.
    """
    if len(q.free_vars) != len(q2.free_vars):
        raise ModelError("containment needs queries of equal free arity")
    result, final = chase_query(q, deps, policy)
    if result.status == FAILED:
        # q can have no answer over any instance satisfying the egds
        return YES
    fix = fix_free_tuple(q2, final)
    h = find_homomorphism(q2, result.instance, fix)
    if h is not None:
        return YES
    return NO if result.status == SATURATED else UNKNOWN_BUDGET


# ---------------------------------------------------------------------------
# Backward rewriting


@dataclass(frozen=True)
class RewriteSet:
    disjuncts: tuple  # tuple[CQ, ...], canonical and subsumption-free
    height: int  # maximal disjunct size
    saturated: bool

    def __len__(self):
        return len(self.disjuncts)


def _rename_apart(tgd: Tgd, taken: set, counter) -> Tgd:
    rename = {}
    for v in sorted(tgd.body_vars() | tgd.head_vars()):
        name = f"R{next(counter)}"
        while name in taken:
            name = f"R{next(counter)}"
        rename[v] = Var(name)
    sub = {Var(v): nv for v, nv in rename.items()}
    return Tgd(apply_mapping(tgd.body, sub), apply_mapping(tgd.head, sub))


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def classes(self):
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), set()).add(x)
        return out.values()


def _piece_rewritings(d: CQ, tgd: Tgd):
    """All one-step backward rewritings of disjunct d through the tgd.

    A non-empty subset S of d's atoms unifies with head atoms of the
    (renamed-apart) tgd; a unifier is admissible when every class holding
    an existential head variable contains nothing but that variable and
    non-free d-variables local to S.  The rewriting replaces S with the
    tgd's body under the unifier.
    """
    head_by_pred: dict = {}
    for a in tgd.head:
        head_by_pred.setdefault((a.pred, a.arity), []).append(a)
    candidates = []
    for atom in d.atoms:
        matches = head_by_pred.get((atom.pred, atom.arity), [])
        candidates.append((atom, matches))
    existentials = tgd.existentials()
    free = set(d.free_vars)

    matchable = [(a, m) for a, m in candidates if m]
    n = len(matchable)
    for mask in range(1, 1 << n):
        chosen = [matchable[i] for i in range(n) if mask >> i & 1]
        for pairing in product(*(m for _, m in chosen)):
            s_atoms = [a for a, _ in chosen]
            uf = _UnionFind()
            ok = True
            for s_atom, h_atom in zip(s_atoms, pairing):
                for s_t, h_t in zip(s_atom.args, h_atom.args):
                    uf.union(("d", s_t), ("t", h_t))
            subst_d: dict = {}
            subst_t: dict = {}
            s_set = set(s_atoms)
            outside_vars = {
                t.name
                for a in d.atoms
                if a not in s_set
                for t in a.args
                if isinstance(t, Var)
            }
            for cls in uf.classes():
                d_consts, d_vars, t_front, t_exist = [], [], [], []
                for side, t in cls:
                    if side == "d":
                        if isinstance(t, Var):
                            d_vars.append(t)
                        else:
                            d_consts.append(t)
                    else:
                        if isinstance(t, Var) and t.name in existentials:
                            t_exist.append(t)
                        elif isinstance(t, Var):
                            t_front.append(t)
                        else:
                            d_consts.append(t)
                if len(set(d_consts)) > 1:
                    ok = False
                    break
                if t_exist:
                    if len(set(t_exist)) > 1 or d_consts or t_front:
                        ok = False
                        break
                    if any(
                        v.name in free or v.name in outside_vars for v in d_vars
                    ):
                        ok = False
                        break
                    rep = t_exist[0]
                else:
                    free_here = [v for v in d_vars if v.name in free]
                    if len(set(free_here)) > 1:
                        ok = False
                        break
                    if d_consts:
                        if free_here:
                            ok = False
                            break
                        rep = d_consts[0]
                    elif free_here:
                        rep = free_here[0]
                    elif d_vars:
                        rep = sorted(d_vars, key=lambda v: v.name)[0]
                    else:
                        rep = sorted(t_front, key=lambda v: v.name)[0]
                for side, t in cls:
                    if side == "d" and isinstance(t, Var):
                        subst_d[t] = rep
                    elif side == "t" and isinstance(t, Var):
                        subst_t[t] = rep
            if not ok:
                continue
            remainder = [a for a in d.atoms if a not in s_set]
            new_atoms = apply_mapping(remainder, subst_d)
            new_atoms += apply_mapping(tgd.body, subst_t)
            try:
                yield CQ(d.name, d.free_vars, new_atoms)
            except ModelError:
                continue  # a free variable vanished; not a usable disjunct


def ucq_rewrite(
    q2: Union[CQ, UCQ],
    deps: DependencySet,
    bound: Optional[int] = None,
    max_expansions: int = 20000,
) -> RewriteSet:
    """Saturate q2 backward through the tgds into a dependency-free union.

    Supported for sets certified non-recursive or sticky; each kept
    disjunct is core-minimal, canonical, and not subsumed by another.
    """
    if not deps.is_pure_tgds():
        raise UnsupportedClassError("rewriting needs a pure tgd set")
    labels = deps.labels
    if not (labels.non_recursive or labels.sticky):
        raise UnsupportedClassError(
            "rewriting is complete for non-recursive or sticky sets only"
        )
    initial = [q2] if isinstance(q2, CQ) else list(q2.disjuncts)
    free_arity = len(initial[0].free_vars)
    for d in initial:
        if len(d.free_vars) != free_arity:
            raise ModelError("all disjuncts must share the free arity")

    taken = {v for d in initial for v in d.variables()}
    counter = count()
    renamed = [_rename_apart(t, taken, counter) for t in deps.tgds]

    kept: Dict[tuple, CQ] = {}
    truncated = False

    def subsumed(d: CQ, by: CQ) -> bool:
        # d is redundant when the kept disjunct `by` maps into d's frozen
        # database with free positions pinned (i.e. d is contained in `by`)
        db, frozen = canonical_database(d)
        fix = fix_free_tuple(by, frozen)
        return find_homomorphism(by, db, fix) is not None

    def add(d: CQ) -> Optional[CQ]:
        nonlocal truncated
        if bound is not None and len(d) > bound:
            truncated = True
            return None
        d = canonical_cq(core(d))
        key = canonical_key(d.atoms, d.free_vars)
        if key in kept:
            return None
        for k_key, k in list(kept.items()):
            if subsumed(d, k):
                return None
        for k_key, k in list(kept.items()):
            if subsumed(k, d):
                del kept[k_key]
        kept[key] = d
        return d

    queue = []
    for d in initial:
        added = add(d)
        if added is not None:
            queue.append(added)
    expansions = 0
    while queue:
        d = queue.pop(0)
        if canonical_key(d.atoms, d.free_vars) not in kept:
            continue  # displaced by a more general disjunct meanwhile
        for tgd in renamed:
            for rewritten in _piece_rewritings(d, tgd):
                expansions += 1
                if expansions > max_expansions:
                    truncated = True
                    queue.clear()
                    break
                added = add(rewritten)
                if added is not None:
                    queue.append(added)
            else:
                continue
            break
    disjuncts = tuple(
        sorted(kept.values(), key=lambda d: canonical_key(d.atoms, d.free_vars))
    )
    height = max((len(d) for d in disjuncts), default=0)
    return RewriteSet(disjuncts, height, saturated=not truncated)


def contains_rewrite(q: CQ, q2: CQ, deps: DependencySet) -> TriState:
    """Containment via the rewrite engine: yes iff some rewrite disjunct of
    q2 maps into q's frozen database with free positions pinned."""
    if len(q.free_vars) != len(q2.free_vars):
        raise ModelError("containment needs queries of equal free arity")
    rewrite = ucq_rewrite(q2, deps)
    db, frozen = canonical_database(q)
    for d in rewrite.disjuncts:
        fix = fix_free_tuple(d, frozen)
        if find_homomorphism(d, db, fix) is not None:
            return YES
    return NO if rewrite.saturated else UNKNOWN_BUDGET


# ---------------------------------------------------------------------------
# Combined equivalence


def _contains_auto(q, q2, deps, policy: Optional[ChasePolicy]) -> TriState:
    labels = deps.labels
    if deps.is_empty() or labels.terminating_chase:
        return contains_chase(q, q2, deps, policy or ChasePolicy())
    if deps.is_pure_tgds() and labels.sticky:
        return contains_rewrite(q, q2, deps)
    if policy is None or not policy.has_budget():
        raise ModelError(
            "containment under a non-terminating, non-rewritable set "
            "needs an explicit chase budget"
        )
    return contains_chase(q, q2, deps, policy)


def equivalent(
    q: CQ,
    q2: CQ,
    deps: DependencySet,
    policy: Optional[ChasePolicy] = None,
) -> TriState:
    """Both containments, each decided by the best engine for the class."""
    first = _contains_auto(q, q2, deps, policy)
    if first.is_no():
        return NO
    second = _contains_auto(q2, q, deps, policy)
    if second.is_no():
        return NO
    if first.is_yes() and second.is_yes():
        return YES
    return first if first.is_unknown() else second
