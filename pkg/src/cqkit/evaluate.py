"""Query evaluation: naive join, the Yannakakis semijoin program, and the
existential one-cover game.

The game decides whether every acyclic query true on one structure (at a
distinguished tuple) is true on another; for semantically acyclic queries
that turns evaluation into a polynomial-time greatest-fixpoint test, run
either on the query itself (guard-based sets) or on its saturated chase
(terminating sets).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from .acyclicity import JoinTree, is_acyclic, validate_join_tree
from .chase import SATURATED, ChasePolicy, chase_query, satisfies
from .containment import all_homomorphisms
from .decider import SemAcOptions, decide_semacyc
from .errors import (
    ChaseBudgetRequired,
    DependencyViolationError,
    ModelError,
    UnsupportedClassError,
)
from .homs import fix_free_tuple
from .model import (
    CQ,
    UCQ,
    Atom,
    DependencySet,
    Instance,
    Term,
    Var,
    canonical_database,
    is_rigid,
)


# ---------------------------------------------------------------------------
# Join-based evaluation


def eval_naive(q: Union[CQ, UCQ], db: Instance) -> set:
    """All free-tuple images under homomorphisms into the database."""
    if isinstance(q, UCQ):
        out: set = set()
        for d in q.disjuncts:
            out |= eval_naive(d, db)
        return out
    out = set()
    for h in all_homomorphisms(q, db):
        out.add(tuple(h[Var(x)] for x in q.free_vars))
    return out


def _atom_rows(atom: Atom, db: Instance) -> List[dict]:
    """Variable bindings of one atom against the database."""
    rows = []
    for fact in db.by_pred().get(atom.pred, ()):
        if fact.arity != atom.arity:
            continue
        binding: dict = {}
        ok = True
        for t, v in zip(atom.args, fact.args):
            if is_rigid(t):
                if t != v:
                    ok = False
                    break
            else:
                name = t.name
                if name in binding and binding[name] != v:
                    ok = False
                    break
                binding[name] = v
        if ok:
            rows.append(binding)
    return rows


def _semijoin(keep: List[dict], against: List[dict], shared: set) -> List[dict]:
    if not shared:
        return keep if against else []
    witness = {tuple(r[v] for v in sorted(shared)) for r in against}
    return [r for r in keep if tuple(r[v] for v in sorted(shared)) in witness]


def eval_yannakakis(q: CQ, tree: JoinTree, db: Instance) -> set:
    """Semijoin reduction up then down the join tree, then a projection join.

    Agrees with the naive join on every acyclic query.
    """
    if not validate_join_tree(q, tree):
        raise ModelError("not a valid join tree of the query")
    n = len(tree.nodes)
    rows: List[List[dict]] = [_atom_rows(tree.nodes[v], db) for v in range(n)]
    var_sets = [
        {t.name for t in tree.nodes[v].args if isinstance(t, Var)} for v in range(n)
    ]
    kids = tree.children()
    order: List[int] = []
    stack = list(tree.roots())
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(kids[v])
    # bottom-up semijoins
    for v in reversed(order):
        for c in kids[v]:
            rows[v] = _semijoin(rows[v], rows[c], var_sets[v] & var_sets[c])
    # top-down semijoins
    for v in order:
        for c in kids[v]:
            rows[c] = _semijoin(rows[c], rows[v], var_sets[v] & var_sets[c])

    free = list(q.free_vars)

    def needed_above(v: int) -> set:
        p = tree.parent[v]
        return var_sets[v] & var_sets[p] if p is not None else set()

    def join_up(v: int) -> Tuple[List[dict], set]:
        vars_here = set(var_sets[v])
        results = rows[v]
        for c in kids[v]:
            sub_rows, sub_vars = join_up(c)
            shared = vars_here & sub_vars
            merged = []
            index: dict = {}
            for r in sub_rows:
                index.setdefault(tuple(r[x] for x in sorted(shared)), []).append(r)
            for r in results:
                for s in index.get(tuple(r[x] for x in sorted(shared)), ()):
                    m = dict(r)
                    m.update(s)
                    merged.append(m)
            results = merged
            vars_here |= sub_vars
        keep = (vars_here & set(free)) | needed_above(v)
        seen = set()
        projected = []
        for r in results:
            p = {x: r[x] for x in keep}
            key = tuple(sorted(p.items()))
            if key not in seen:
                seen.add(key)
                projected.append(p)
        return projected, keep

    parts: List[Tuple[List[dict], set]] = [join_up(r) for r in tree.roots()]
    total: List[dict] = [{}]
    for sub_rows, _ in parts:
        total = [dict(a, **b) for a in total for b in sub_rows]
    return {tuple(r[x] for x in free) for r in total}


# ---------------------------------------------------------------------------
# The existential one-cover game


@dataclass(frozen=True)
class GameStrategy:
    """Winning certificate: each left atom's non-empty set of images."""

    images: tuple  # tuple[(Atom, tuple[Atom, ...]), ...]
    left_tuple: tuple
    right_tuple: tuple

    def image_map(self) -> dict:
        return {a: set(imgs) for a, imgs in self.images}


def _induced_map(left_atom: Atom, right_atom: Atom) -> Optional[dict]:
    """Position-wise assignment, if well-defined and rigid-respecting."""
    f: dict = {}
    for a, b in zip(left_atom.args, right_atom.args):
        if is_rigid(a):
            if a != b:
                return None
            continue
        if a in f and f[a] != b:
            return None
        f[a] = b
    return f


def game_equiv(
    left: Instance,
    left_tuple: Sequence[Term],
    right: Instance,
    right_tuple: Sequence[Term],
):
    """Greatest-fixpoint test for the duplicator's one-cover strategy.

    Initialization keeps, per left atom, the same-predicate right atoms
    whose induced assignment respects the distinguished tuples and embeds
    the sub-instance induced by the left atom's elements.  The refinement
    step deletes an image that some other left atom cannot extend
    compatibly; the sets only ever shrink, and all-non-empty at fixpoint
    means the duplicator wins.
    """
    if len(left_tuple) != len(right_tuple):
        raise ModelError("distinguished tuples must have equal length")
    left_atoms = left.atoms
    right_by_pred = right.by_pred()
    pin = {}
    for lt, rt in zip(left_tuple, right_tuple):
        if is_rigid(lt):
            if lt != rt:
                return False, None  # a constant component cannot move
            continue
        if lt in pin and pin[lt] != rt:
            return False, None  # one element pinned to two targets
        pin[lt] = rt

    def induced_ok(a: Atom, f: dict) -> bool:
        covered = set(a.args)
        for s in left_atoms:
            if set(s.args) <= covered:
                img = Atom(s.pred, [f.get(e, e) for e in s.args])
                if img not in right.atom_set:
                    return False
        return True

    candidates: Dict[Atom, List[Tuple[Atom, tuple]]] = {}
    for a in left_atoms:
        opts = []
        for b in right_by_pred.get(a.pred, ()):
            if b.arity != a.arity:
                continue
            f = _induced_map(a, b)
            if f is None:
                continue
            if any(e in pin and f[e] != pin[e] for e in f):
                continue
            if not induced_ok(a, f):
                continue
            opts.append((b, tuple(sorted(f.items(), key=lambda kv: str(kv)))))
        candidates[a] = opts

    changed = True
    while changed:
        changed = False
        for a in left_atoms:
            survivors = []
            for b, f_items in candidates[a]:
                f = dict(f_items)
                ok = True
                for s in left_atoms:
                    shared = set(f) & {e for e in s.args if not is_rigid(e)}
                    found = False
                    for sb, g_items in candidates[s]:
                        g = dict(g_items)
                        if all(g[e] == f[e] for e in shared):
                            found = True
                            break
                    if not found:
                        ok = False
                        break
                if ok:
                    survivors.append((b, f_items))
            if len(survivors) != len(candidates[a]):
                candidates[a] = survivors
                changed = True
        if any(not candidates[a] for a in left_atoms):
            return False, None

    strategy = GameStrategy(
        images=tuple(
            (a, tuple(b for b, _ in candidates[a])) for a in left_atoms
        ),
        left_tuple=tuple(left_tuple),
        right_tuple=tuple(right_tuple),
    )
    return True, strategy


# ---------------------------------------------------------------------------
# Evaluation of semantically acyclic queries


def semac_eval(
    q: CQ,
    deps: DependencySet,
    db: Instance,
    answer_tuple: Sequence[Term],
    options: SemAcOptions = SemAcOptions(),
) -> bool:
    """Membership test for a query assumed semantically acyclic under deps.

    Requires the database to satisfy the dependencies.  Guard-based tgd
    sets run the game directly on the query; terminating sets run it on
    the saturated chase; anything else falls back to finding an acyclic
    equivalent and evaluating it with the semijoin program.
    """
    violations = satisfies(db, deps)
    if violations:
        raise DependencyViolationError(
            f"database violates the dependencies ({len(violations)} witnesses)",
            violations,
        )
    if len(answer_tuple) != len(q.free_vars):
        raise ModelError("answer tuple arity does not match the query")
    labels = deps.labels
    if deps.is_pure_tgds() and labels.guarded:
        left, frozen = canonical_database(q)
        win, _ = game_equiv(left, frozen, db, answer_tuple)
        return win
    if labels.terminating_chase:
        result, final = chase_query(q, deps, ChasePolicy())
        if result.status == "failed":
            return False  # the query is unsatisfiable under the egds
        if result.status != SATURATED:
            raise ChaseBudgetRequired(
                "chase did not saturate; refusing an unsound game test"
            )
        win, _ = game_equiv(result.instance, final, db, answer_tuple)
        return win
    answer = decide_semacyc(q, deps, options)
    if not answer.is_yes():
        raise UnsupportedClassError(
            "query has no certified acyclic equivalent on this path "
            f"(decision: {answer.kind})"
        )
    witness = answer.witness
    tree = is_acyclic(witness)
    return tuple(answer_tuple) in eval_yannakakis(witness, tree, db)


def eval_auto(q: CQ, db: Instance) -> set:
    """Yannakakis when the query is acyclic, naive join otherwise."""
    tree = is_acyclic(q)
    if tree is not None:
        return eval_yannakakis(q, tree, db)
    return eval_naive(q, db)
