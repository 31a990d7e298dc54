"""Semantic acyclicity: decision, approximation, and hardness transfers.

The decision procedure enumerates acyclic candidate queries up to a
class-specific size bound and tests equivalence with the engine that is
complete for the class: guard-based sets and keys get the twice-the-query
bound, rewritable sets the rewriting height bound.  Candidates stream in
canonical order, so the first witness found is a smallest one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .acyclicity import is_acyclic
from .canon import canonical_atoms, canonical_cq, canonical_key
from .chase import ChasePolicy, chase_query
from .containment import (
    NO,
    YES,
    TriState,
    contains_chase,
    core,
    equivalent,
    find_homomorphism,
    ucq_rewrite,
)
from .errors import ModelError, UndecidableClassError, UnsupportedClassError
from .homs import apply_mapping, fix_free_tuple
from .model import (
    CQ,
    UCQ,
    Atom,
    Const,
    DependencySet,
    Tgd,
    Var,
    canonical_database,
    gaifman_components,
    is_connected,
)

DEFAULT_GUARDED_POLICY = ChasePolicy(max_steps=2000, max_depth=6)


@dataclass(frozen=True)
class SizeBound:
    class_used: str
    B: int  # candidate atom-count bound
    p_q_sigma: int  # predicates occurring in q or the set
    a_q_sigma: int  # maximum arity among them
    b_sigma: int  # maximum body size in the set


@dataclass(frozen=True)
class SemAcOptions:
    bound: Optional[int] = None  # practical cap on candidate size
    exact_bound: bool = False  # search all the way to the class bound
    force_bound: bool = False  # best-effort run on an undecidable class
    policy: Optional[ChasePolicy] = None  # chase budget for guarded sets

    # rewritable classes get an enormous exact bound; keep searches sane
    def practical_cap(self, q_size: int) -> int:
        return self.bound if self.bound is not None else 2 * q_size + 4


@dataclass
class SemAcAnswer:
    kind: str  # yes | no | unknown
    witness: Optional[Union[CQ, UCQ]] = None
    certificate: Optional[dict] = None
    bound: Optional[SizeBound] = None
    searched_up_to: Optional[int] = None
    bound_exhausted_at: Optional[int] = None
    reason: Optional[str] = None  # undecidable-class | budget | unsupported

    def is_yes(self):
        return self.kind == "yes"

    def is_no(self):
        return self.kind == "no"

    def is_unknown(self):
        return self.kind == "unknown"


# ---------------------------------------------------------------------------
# Size bounds and class gating


def _signature(q: Union[CQ, UCQ], deps: DependencySet) -> dict:
    sig: dict = {}
    queries = [q] if isinstance(q, CQ) else list(q.disjuncts)
    for one in queries:
        sig.update(one.predicates())
    sig.update(deps.predicates())
    return sig


def rewrite_height_bound(q: Union[CQ, UCQ], deps: DependencySet) -> int:
    """Height of any rewriting of q: p * (a*|q| + 1)^a over the joint
    signature."""
    sig = _signature(q, deps)
    p = max(len(sig), 1)
    a = max(sig.values(), default=1)
    size = len(q) if isinstance(q, CQ) else max(len(d) for d in q.disjuncts)
    return p * (a * size + 1) ** a


def nr_chase_step_bound(q: CQ, deps: DependencySet) -> int:
    """Chase length sufficient for containment checks against q under a
    non-recursive set: |q| * b^p with b the maximum body size."""
    sig = _signature(q, deps)
    b = max((len(t.body) for t in deps.tgds), default=1)
    return len(q) * b ** max(len(sig), 1)


def size_bound(q: Union[CQ, UCQ], deps: DependencySet) -> SizeBound:
    """Candidate size bound for the certified class of the set."""
    kind = _gate(q, deps)
    sig = _signature(q, deps)
    p = max(len(sig), 1)
    a = max(sig.values(), default=1)
    b = max((len(t.body) for t in deps.tgds), default=0)
    size = len(q) if isinstance(q, CQ) else max(len(d) for d in q.disjuncts)
    if kind in ("empty", "apc-tgd", "k2-key", "unary-fd"):
        B = 2 * size
    else:
        B = 2 * rewrite_height_bound(q, deps)
    return SizeBound(kind, B, p, a, b)


def _gate(q: Union[CQ, UCQ], deps: DependencySet) -> str:
    """Which complete machinery applies; raises or signals otherwise."""
    if deps.is_empty():
        return "empty"
    labels = deps.labels
    if labels.mixed:
        raise UnsupportedClassError(
            "semantic acyclicity operates on pure tgd or pure egd sets"
        )
    if deps.is_pure_tgds():
        if labels.guarded:  # includes linear and inclusion dependencies
            return "apc-tgd"
        if labels.non_recursive:
            return "nr"
        if labels.sticky:
            return "sticky"
        if labels.full:
            raise UndecidableClassError(
                "semantic acyclicity is undecidable for full tgd sets; "
                "pass force_bound for a best-effort yes/unknown search"
            )
        return "unsupported"
    # pure egds
    queries = [q] if isinstance(q, CQ) else list(q.disjuncts)
    q_arity_ok = all(
        arity <= 2 for one in queries for arity in one.predicates().values()
    )
    if labels.k2_key and labels.arity_le_2 and q_arity_ok:
        return "k2-key"
    if labels.unary_fd:
        return "unary-fd"
    return "unsupported"


# ---------------------------------------------------------------------------
# Candidate enumeration


def enumerate_acyclic_candidates(
    sig: dict,
    free: Sequence[str],
    consts: Sequence[Const],
    B: int,
    prune_hom_from: Optional[CQ] = None,
) -> Iterator[CQ]:
    """Stream one representative per isomorphism class of acyclic queries
    with at most B atoms over the signature, smallest first.

    Candidates use exactly the given free variables, existential variables
    from a fresh pool, and the given constants.  With `prune_hom_from`,
    only candidates admitting a homomorphism from that query (free tuple
    pinned positionally) are produced.
    """
    if B < 1:
        return
    free = tuple(free)
    consts = tuple(sorted(set(consts), key=lambda c: c.name))
    prefix = "G"
    while any(x.startswith(prefix) for x in free):
        prefix += "_"

    def fresh_names(k, n):
        return [f"{prefix}{k + i}" for i in range(n)]

    def extensions(atoms: tuple) -> Iterator[tuple]:
        evars = sorted(
            {
                t.name
                for a in atoms
                for t in a.args
                if isinstance(t, Var) and t.name not in free
            }
        )
        base_terms: list = [Var(x) for x in free]
        base_terms += [Var(v) for v in evars]
        base_terms += list(consts)
        for pred in sorted(sig):
            arity = sig[pred]
            pool = base_terms + [
                Var(n) for n in fresh_names(len(evars), arity)
            ]
            for combo in product(pool, repeat=arity):
                fresh_used = []
                for t in combo:
                    if (
                        isinstance(t, Var)
                        and t.name.startswith(prefix)
                        and t.name not in evars
                        and t.name not in fresh_used
                    ):
                        fresh_used.append(t.name)
                if fresh_used != fresh_names(len(evars), len(fresh_used)):
                    continue  # fresh variables must appear in pool order
                new_atom = Atom(pred, combo)
                if new_atom in atoms:
                    continue
                yield atoms + (new_atom,)

    def acceptable(candidate: CQ) -> bool:
        if set(free) - candidate.variables():
            return False
        if is_acyclic(candidate) is None:
            return False
        if prune_hom_from is not None:
            db, frozen = canonical_database(candidate)
            fix = fix_free_tuple(prune_hom_from, frozen)
            if find_homomorphism(prune_hom_from, db, fix) is None:
                return False
        return True

    level: Dict[tuple, tuple] = {}
    for ext in extensions(()):
        key, renamed = canonical_atoms(ext, free)
        if key not in level:
            level[key] = renamed
    for size in range(1, B + 1):
        for key in sorted(level):
            candidate = _as_candidate(level[key], free)
            if candidate is not None and acceptable(candidate):
                yield candidate
        if size == B:
            return
        nxt: Dict[tuple, tuple] = {}
        for atoms in level.values():
            for ext in extensions(atoms):
                key, renamed = canonical_atoms(ext, free)
                if key not in nxt:
                    nxt[key] = renamed
        level = nxt


def _as_candidate(atoms: tuple, free: tuple):
    """Wrap an atom tuple as a query; candidates missing a free variable
    are not queries yet and yield None."""
    names = {t.name for a in atoms for t in a.args if isinstance(t, Var)}
    if set(free) - names:
        return None
    return CQ("cand", free, atoms)


# ---------------------------------------------------------------------------
# Containment engines per class


class _Engine:
    """Containment strategy for one certified class, with caching."""

    def __init__(self, kind: str, deps: DependencySet, options: SemAcOptions):
        self.kind = kind
        self.deps = deps
        self.options = options
        self._rewrite_cache: dict = {}
        self.tainted = False  # some check returned unknown

    def contains(self, a: CQ, b: CQ) -> TriState:
        if self.kind == "sticky":
            out = self._contains_rewrite(a, b)
        elif self.kind in ("empty", "nr", "k2-key", "unary-fd", "egd"):
            out = contains_chase(a, b, self.deps, ChasePolicy())
        else:  # guarded family or forced full sets: budgeted chase
            policy = self.options.policy or DEFAULT_GUARDED_POLICY
            if self.deps.labels.terminating_chase:
                policy = ChasePolicy()
            out = contains_chase(a, b, self.deps, policy)
        if out.is_unknown():
            self.tainted = True
        return out

    def _contains_rewrite(self, a: CQ, b: CQ) -> TriState:
        key = canonical_key(b.atoms, b.free_vars)
        if key not in self._rewrite_cache:
            self._rewrite_cache[key] = ucq_rewrite(b, self.deps)
        rewrite = self._rewrite_cache[key]
        db, frozen = canonical_database(a)
        for d in rewrite.disjuncts:
            if find_homomorphism(d, db, fix_free_tuple(d, frozen)) is not None:
                return YES
        return NO if rewrite.saturated else TriState("unknown", "budget")

    def equivalent(self, a: CQ, b: CQ):
        left = self.contains(a, b)
        if left.is_no():
            return NO, {"forward": left.value, "backward": None}
        right = self.contains(b, a)
        cert = {"forward": left.value, "backward": right.value}
        if left.is_yes() and right.is_yes():
            return YES, cert
        if right.is_no():
            return NO, cert
        return TriState("unknown", "budget"), cert


# ---------------------------------------------------------------------------
# The decision procedure


def decide_semacyc(
    q: CQ, deps: DependencySet, options: SemAcOptions = SemAcOptions()
) -> SemAcAnswer:
    """Is q equivalent, over every model of the set, to an acyclic query?

    Without dependencies this reduces to acyclicity of the core.  For the
    supported classes, candidates up to the class bound are enumerated and
    tested for equivalence; a yes comes with a witness and both containment
    certificates, re-checked independently of the search.
    """
    if deps.is_empty():
        c = core(q)
        tree = is_acyclic(c)
        if tree is not None:
            return SemAcAnswer(
                "yes",
                witness=c,
                certificate={"forward": "yes", "backward": "yes", "via": "core"},
                bound=size_bound(q, deps),
                searched_up_to=len(c),
            )
        return SemAcAnswer(
            "no",
            bound=size_bound(q, deps),
            bound_exhausted_at=2 * len(q),
            certificate={"via": "core", "core_size": len(c)},
        )

    try:
        kind = _gate(q, deps)
    except UndecidableClassError:
        if not options.force_bound:
            raise
        kind = "forced-full"
    if kind == "unsupported":
        return SemAcAnswer("unknown", reason="unsupported")

    if kind == "forced-full":
        bound = SizeBound("forced-full", options.practical_cap(len(q)), 0, 0, 0)
    else:
        bound = size_bound(q, deps)

    tree = is_acyclic(q)
    if tree is not None:
        return SemAcAnswer(
            "yes",
            witness=q,
            certificate={"forward": "yes", "backward": "yes", "via": "identity"},
            bound=bound,
            searched_up_to=len(q),
        )

    if kind in ("apc-tgd", "k2-key", "unary-fd"):
        cap = bound.B if options.bound is None else min(options.bound, bound.B)
    elif kind == "forced-full":
        cap = bound.B
    else:  # rewritable classes: exact bound is astronomically large
        cap = bound.B if options.exact_bound else min(
            bound.B, options.practical_cap(len(q))
        )

    engine = _Engine(kind, deps, options)
    prune = q if kind in ("apc-tgd", "k2-key") else None
    sig = _signature(q, deps)
    consts = sorted(q.constants(), key=lambda c: c.name)

    searched = 0
    for candidate in enumerate_acyclic_candidates(
        sig, q.free_vars, consts, cap, prune_hom_from=prune
    ):
        searched = max(searched, len(candidate))
        verdict, cert = engine.equivalent(q, candidate)
        if verdict.is_yes():
            recheck = equivalent(
                q, candidate, deps,
                options.policy or (None if deps.labels.terminating_chase
                                   else DEFAULT_GUARDED_POLICY),
            )
            if not recheck.is_yes() or is_acyclic(candidate) is None:
                raise ModelError(
                    "internal: witness failed its independent re-check"
                )  # pragma: no cover
            return SemAcAnswer(
                "yes",
                witness=candidate,
                certificate=cert,
                bound=bound,
                searched_up_to=searched,
            )

    if kind == "forced-full":
        return SemAcAnswer(
            "unknown", reason="undecidable-class", bound=bound, searched_up_to=cap
        )
    if engine.tainted or cap < bound.B:
        return SemAcAnswer(
            "unknown", reason="budget", bound=bound, searched_up_to=cap
        )
    return SemAcAnswer(
        "no", bound=bound, bound_exhausted_at=bound.B, searched_up_to=cap
    )


def decide_semacyc_ucq(
    Q: UCQ, deps: DependencySet, options: SemAcOptions = SemAcOptions()
) -> SemAcAnswer:
    """Union variant: every disjunct must either have an acyclic equivalent
    of bounded size or be redundant against a kept disjunct.

    Dropping is one-at-a-time: of two mutually redundant disjuncts only
    the later one goes, so no content is lost.
    """
    engine_kind = "empty" if deps.is_empty() else _gate(Q, deps)
    if engine_kind == "unsupported":
        return SemAcAnswer("unknown", reason="unsupported")
    engine = _Engine(engine_kind, deps, options)
    kept = list(range(len(Q.disjuncts)))
    dropped = {}
    for i in list(kept):
        others = [j for j in kept if j != i]
        for j in others:
            verdict = engine.contains(Q.disjuncts[i], Q.disjuncts[j])
            if verdict.is_yes():
                kept.remove(i)
                dropped[Q.disjuncts[i].name] = Q.disjuncts[j].name
                break
    witnesses: List[CQ] = []
    tainted = False
    for i in kept:
        disjunct = Q.disjuncts[i]
        sub = decide_semacyc(disjunct, deps, options)
        if sub.is_yes():
            witnesses.append(sub.witness)
        elif sub.is_unknown():
            tainted = True
        else:
            return SemAcAnswer(
                "no",
                bound=sub.bound,
                bound_exhausted_at=sub.bound_exhausted_at,
                certificate={"failing_disjunct": disjunct.name, "redundant": dropped},
            )
    if tainted:
        return SemAcAnswer("unknown", reason="budget")
    witness = UCQ(
        f"{Q.name}_ac",
        Q.free_vars,
        [CQ(f"{Q.name}_w{i}", w.free_vars, w.atoms) for i, w in enumerate(witnesses)],
    )
    return SemAcAnswer(
        "yes", witness=witness, certificate={"redundant": dropped}
    )


# ---------------------------------------------------------------------------
# Acyclic approximations


def acyclic_approximations(
    q: CQ, deps: DependencySet, options: SemAcOptions = SemAcOptions()
) -> tuple:
    """Maximal acyclic queries contained in q under the set.

    Collects acyclic candidates contained in q up to the class bound and
    keeps the containment-maximal equivalence-class representatives.  For
    Boolean queries the one-variable loop query over q's predicates is
    always among the candidates, so the result is non-empty.
    """
    if q.constants():
        raise ModelError("approximation requires a constant-free query")
    kind = "empty" if deps.is_empty() else _gate(q, deps)
    if kind == "unsupported":
        raise UnsupportedClassError("approximation needs a supported class")
    bound = size_bound(q, deps)
    if kind in ("empty", "apc-tgd", "k2-key", "unary-fd"):
        cap = bound.B if options.bound is None else min(options.bound, bound.B)
    else:
        cap = bound.B if options.exact_bound else min(
            bound.B, options.practical_cap(len(q))
        )
    engine = _Engine(kind, deps, options)
    sig = _signature(q, deps)

    frontier: List[CQ] = []

    def consider(candidate: CQ):
        verdict = engine.contains(candidate, q)
        if not verdict.is_yes():
            return
        for kept in list(frontier):
            if engine.contains(candidate, kept).is_yes():
                return  # below or equivalent to something kept
        frontier[:] = [
            kept for kept in frontier
            if not engine.contains(kept, candidate).is_yes()
        ]
        frontier.append(candidate)

    stream = enumerate_acyclic_candidates(
        sig, q.free_vars, (), cap,
        prune_hom_from=q if kind in ("empty", "apc-tgd", "k2-key") else None,
    )
    for candidate in stream:
        consider(candidate)
    if q.is_boolean():
        seed = CQ(
            "seed",
            (),
            [Atom(p, [Var("W")] * arity) for p, arity in sorted(q.predicates().items())],
        )
        if is_acyclic(seed) is not None:
            consider(canonical_cq(seed))
    return tuple(frontier)


# ---------------------------------------------------------------------------
# Hardness-transfer constructions


def connect(q: CQ, q2: CQ, deps: DependencySet):
    """Connecting operator: adds a shared extra argument to every predicate
    and an auxiliary binary predicate, producing a connected pair whose
    containment matches the original one."""
    if not q.is_boolean() or not q2.is_boolean():
        raise ModelError("the connecting operator applies to Boolean queries")
    if not deps.is_pure_tgds():
        raise ModelError("the connecting operator transforms tgd sets")
    preds = set(_signature(q, deps)) | set(q2.predicates())
    star = {p: f"{p}_s" for p in preds}
    while len(set(star.values())) != len(star) or set(star.values()) & preds:
        star = {p: f"{v}_" for p, v in star.items()}
    aux = "aux"
    while aux in preds or aux in set(star.values()):
        aux += "_"

    def fresh(names_in_use, base):
        name = base
        while name in names_in_use:
            name += "_"
        return name

    def star_atoms(atoms, w):
        return [Atom(star[a.pred], list(a.args) + [w]) for a in atoms]

    wq = Var(fresh(q.variables(), "W"))
    cq1 = CQ(
        f"{q.name}_conn",
        (),
        star_atoms(q.atoms, wq) + [Atom(aux, [wq, wq])],
    )
    used = q2.variables()
    w2 = Var(fresh(used, "W"))
    u2 = Var(fresh(used | {w2.name}, "U"))
    v2 = Var(fresh(used | {w2.name, u2.name}, "V"))
    cq2 = CQ(
        f"{q2.name}_conn",
        (),
        star_atoms(q2.atoms, w2)
        + [Atom(aux, [w2, u2]), Atom(aux, [u2, v2]), Atom(aux, [v2, w2])],
    )
    new_tgds = []
    for t in deps.tgds:
        w = Var(fresh(t.body_vars() | t.head_vars(), "W"))
        new_tgds.append(Tgd(star_atoms(t.body, w), star_atoms(t.head, w)))
    return cq1, cq2, DependencySet(new_tgds, ())


def conjunction_reduction(q_ac: CQ, q2: CQ) -> CQ:
    """Conjoin two variable-disjoint connected Boolean queries; their atom
    union is the instance whose semantic acyclicity mirrors containment."""
    if not q_ac.is_boolean() or not q2.is_boolean():
        raise ModelError("conjunction reduction applies to Boolean queries")
    if not is_connected(q_ac) or not is_connected(q2):
        raise ModelError("conjunction reduction needs connected queries")
    if q_ac.variables() & q2.variables():
        raise ModelError("queries must not share variables")
    return CQ(f"{q_ac.name}_and_{q2.name}", (), q_ac.atoms + q2.atoms)
