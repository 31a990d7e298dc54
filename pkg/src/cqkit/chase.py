"""Tgd and egd chase with budgets, provenance, and model checking.

Steps fire breadth first: every applicable trigger at a depth level
fires before any trigger one level deeper, under a deterministic
canonical ordering, so results are reproducible.  The restricted variant
skips a tgd trigger whose head already has a matching extension; the
oblivious variant fires every trigger once.  Equality steps replace
nulls and frozen constants; equating two distinct rigid constants fails
the chase.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple, Union

from .errors import ChaseBudgetRequired, ModelError
from .homs import all_homomorphisms, apply_mapping, find_homomorphism
from .model import (
    CQ,
    Atom,
    DependencySet,
    Egd,
    Instance,
    NullFactory,
    Tgd,
    Term,
    Var,
    canonical_database,
    is_rigid,
    term_key,
)

SATURATED = "saturated"
BUDGET_EXHAUSTED = "budget_exhausted"
FAILED = "failed"


@dataclass(frozen=True)
class ChasePolicy:
    variant: str = "restricted"  # or "oblivious"
    max_steps: Optional[int] = None
    max_depth: Optional[int] = None

    def __post_init__(self):
        if self.variant not in ("restricted", "oblivious"):
            raise ModelError(f"unknown chase variant {self.variant!r}")

    def has_budget(self) -> bool:
        return self.max_steps is not None or self.max_depth is not None


@dataclass(frozen=True)
class TriggerRecord:
    dep_id: str
    body_image: tuple  # atoms matched (tgd) or merged pair (egd)
    produced: tuple  # atoms added (tgd) or rewritten (egd)


@dataclass
class ChaseResult:
    instance: Instance
    status: str
    depth_of: dict  # Atom -> level (query atoms are level 0)
    merges: dict  # Term -> Term, the substitution applied by egd steps
    trigger_log: list  # list[TriggerRecord]

    def resolve(self, t: Term) -> Term:
        """Follow the merge substitution to a term's final representative."""
        while t in self.merges:
            t = self.merges[t]
        return t


def _merge_orientation(a: Term, b: Term) -> Tuple[Term, Term]:
    """Decide which term survives an equality step: rigid constants always
    win, otherwise the canonically smaller term does."""
    if is_rigid(a):
        return b, a
    if is_rigid(b):
        return a, b
    if term_key(a) <= term_key(b):
        return b, a
    return a, b


class _ChaseState:
    def __init__(self, atoms: Iterable[Atom], depth0: Optional[dict] = None):
        self.depth: Dict[Atom, int] = {}
        for a in atoms:
            d = depth0.get(a, 0) if depth0 else 0
            old = self.depth.get(a)
            self.depth[a] = d if old is None else min(old, d)
        self.merges: Dict[Term, Term] = {}
        self.log: List[TriggerRecord] = []
        self.steps = 0

    def instance(self) -> Instance:
        return Instance(self.depth.keys())

    def add(self, atom: Atom, level: int):
        old = self.depth.get(atom)
        if old is None or level < old:
            self.depth[atom] = level if old is None else min(old, level)

    def apply_merge(self, gone: Term, kept: Term):
        subst = {gone: kept}
        new_depth: Dict[Atom, int] = {}
        for atom, d in self.depth.items():
            img = apply_mapping([atom], subst)[0]
            if img in new_depth:
                new_depth[img] = min(new_depth[img], d)
            else:
                new_depth[img] = d
        self.depth = new_depth
        # keep older merge entries pointing at live terms
        for k, v in list(self.merges.items()):
            if v == gone:
                self.merges[k] = kept
        self.merges[gone] = kept


def _egd_violation(state: _ChaseState, egds, dep_offset=0):
    """First equality violation in canonical order, or None."""
    inst = state.instance()
    for idx, e in enumerate(egds):
        for h in all_homomorphisms(e.body, inst):
            tl, tr = h[Var(e.lhs)], h[Var(e.rhs)]
            if tl != tr:
                return idx + dep_offset, e, tl, tr
    return None


def _head_satisfied(tgd: Tgd, h, inst: Instance) -> bool:
    frontier_fix = {Var(v): h[Var(v)] for v in tgd.frontier()}
    return find_homomorphism(tgd.head, inst, frontier_fix) is not None


def chase(i: Instance, deps: DependencySet, policy: ChasePolicy = ChasePolicy()):
    """Run the chase until saturation, failure, or budget exhaustion.

    Refuses to run without a budget unless the classifier certifies the
    set as chase-terminating.
    """
    if not policy.has_budget() and not deps.labels.terminating_chase:
        raise ChaseBudgetRequired(
            "dependency set is not certified terminating; "
            "set max_steps or max_depth"
        )
    state = _ChaseState(i.atoms)
    status = _run(state, deps, policy)
    return ChaseResult(
        instance=state.instance(),
        status=status,
        depth_of=dict(state.depth),
        merges=dict(state.merges),
        trigger_log=list(state.log),
    )


def _run(state: _ChaseState, deps: DependencySet, policy: ChasePolicy) -> str:
    nulls = NullFactory()
    fired: set = set()  # oblivious bookkeeping: (tgd index, frontier image)

    def out_of_steps():
        return policy.max_steps is not None and state.steps >= policy.max_steps

    while True:
        # equality steps first, to fixpoint
        while True:
            hit = _egd_violation(state, deps.egds)
            if hit is None:
                break
            if out_of_steps():
                return BUDGET_EXHAUSTED
            idx, e, tl, tr = hit
            if is_rigid(tl) and is_rigid(tr):
                state.log.append(
                    TriggerRecord(f"egd{idx}", (tl, tr), ())
                )
                return FAILED
            gone, kept = _merge_orientation(tl, tr)
            state.apply_merge(gone, kept)
            if fired:
                fired = {
                    (t_idx, tuple(kept if x == gone else x for x in img))
                    for t_idx, img in fired
                }
            state.steps += 1
            state.log.append(TriggerRecord(f"egd{idx}", (gone, kept), (kept,)))

        inst = state.instance()
        triggers = []
        for t_idx, tgd in enumerate(deps.tgds):
            for h in all_homomorphisms(tgd.body, inst):
                trigger_key = tuple(
                    h[Var(v)] for v in sorted(tgd.body_vars())
                )
                body_img = tuple(apply_mapping(tgd.body, h))
                level = max(state.depth[a] for a in body_img)
                if policy.variant == "oblivious":
                    if (t_idx, trigger_key) in fired:
                        continue
                else:
                    if _head_satisfied(tgd, h, inst):
                        continue
                triggers.append((level, t_idx, body_img, h, trigger_key))
        if not triggers:
            return SATURATED

        triggers.sort(
            key=lambda t: (t[0], t[1], tuple(a.key() for a in t[2]))
        )
        progressed = False
        skipped_for_depth = False
        for level, t_idx, body_img, h, trigger_key in triggers:
            if policy.max_depth is not None and level + 1 > policy.max_depth:
                skipped_for_depth = True
                continue
            if out_of_steps():
                return BUDGET_EXHAUSTED
            inst = state.instance()
            tgd = deps.tgds[t_idx]
            if policy.variant == "restricted":
                # the head may have become satisfied by an earlier firing
                if any(a not in inst.atom_set for a in body_img):
                    continue  # an egd merge rewrote the body image
                if _head_satisfied(tgd, h, inst):
                    continue
            else:
                if (t_idx, trigger_key) in fired:
                    continue
                fired.add((t_idx, trigger_key))
            ext = dict(h)
            for z in sorted(tgd.existentials()):
                ext[Var(z)] = nulls.fresh()
            produced = apply_mapping(tgd.head, ext)
            for a in produced:
                state.add(a, level + 1)
            state.steps += 1
            state.log.append(
                TriggerRecord(f"tgd{t_idx}", body_img, tuple(produced))
            )
            progressed = True
            if deps.egds:
                break  # re-establish equality before firing more tgds
        if not progressed:
            return BUDGET_EXHAUSTED if skipped_for_depth else SATURATED


def chase_query(q: CQ, deps: DependencySet, policy: ChasePolicy = ChasePolicy()):
    """Chase the canonical database of q; frozen constants are equatable.

    Returns the chase result plus the (merge-adjusted) image of q's free
    tuple.
    """
    db, frozen_tuple = canonical_database(q)
    result = chase(db, deps, policy)
    final = tuple(result.resolve(t) for t in frozen_tuple)
    return result, final


def satisfies(i: Instance, deps: DependencySet) -> list:
    """All dependency violations of a finite instance.

    A tgd is violated by a body homomorphism with no head extension; an
    egd by one mapping its two sides to different terms.
    """
    out = []
    for idx, tgd in enumerate(deps.tgds):
        seen = set()
        for h in all_homomorphisms(tgd.body, i):
            body_img = tuple(apply_mapping(tgd.body, h))
            if body_img in seen:
                continue
            seen.add(body_img)
            if not _head_satisfied(tgd, h, i):
                out.append((f"tgd{idx}", body_img))
    for idx, e in enumerate(deps.egds):
        seen = set()
        for h in all_homomorphisms(e.body, i):
            tl, tr = h[Var(e.lhs)], h[Var(e.rhs)]
            if tl != tr:
                wit = (tuple(apply_mapping(e.body, h)), tl, tr)
                if wit not in seen:
                    seen.add(wit)
                    out.append((f"egd{idx}", wit))
    return out


def guarded_chase_forest(q: CQ, deps: DependencySet, depth: int):
    """Chase forest for a guarded set: roots are q's atoms; each produced
    atom hangs off the guard image of the trigger that made it.

    Returns a `JoinTree`-shaped forest over the chase prefix of the given
    depth.
    """
    from .acyclicity import JoinTree

    if not deps.is_pure_tgds() or not deps.labels.guarded:
        raise ModelError("guarded chase forest needs a pure guarded tgd set")
    result, _ = chase_query(
        q, deps, ChasePolicy(variant="restricted", max_depth=depth)
    )
    guards = {f"tgd{i}": t.guard() for i, t in enumerate(deps.tgds)}
    db, _ = canonical_database(q)
    parent_atom: Dict[Atom, Optional[Atom]] = {a: None for a in db.atoms}
    for rec in result.trigger_log:
        if not rec.dep_id.startswith("tgd"):
            continue
        t_idx = int(rec.dep_id[3:])
        tgd = deps.tgds[t_idx]
        guard = guards[rec.dep_id]
        guard_img = None
        for b_atom, img in zip(tgd.body, rec.body_image):
            if b_atom == guard:
                guard_img = img
                break
        for a in rec.produced:
            parent_atom.setdefault(a, guard_img)
    atoms = sorted(parent_atom.keys(), key=Atom.key)
    index = {a: k for k, a in enumerate(atoms)}
    parent = [
        index[parent_atom[a]] if parent_atom[a] is not None else None
        for a in atoms
    ]
    return JoinTree(tuple(atoms), tuple(parent))
