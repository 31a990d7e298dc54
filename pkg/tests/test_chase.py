from random import Random

import pytest

from cqkit.acyclicity import is_acyclic, validate_join_tree, JoinTree
from cqkit.canon import isomorphic
from cqkit.chase import (
    BUDGET_EXHAUSTED,
    FAILED,
    SATURATED,
    ChasePolicy,
    chase,
    chase_query,
    guarded_chase_forest,
    satisfies,
)
from cqkit.errors import ChaseBudgetRequired, ModelError
from cqkit.homs import find_homomorphism
from cqkit.model import (
    CQ,
    Atom,
    Const,
    DependencySet,
    Egd,
    Frozen,
    Instance,
    Tgd,
    Var,
    canonical_database,
    instance_as_cq,
)
from cqkit.parser import parse_program

from helpers import random_acyclic_cq, random_guarded_set, random_key_set, random_nr_set

X, Y, Z, W, V0 = Var("X"), Var("Y"), Var("Z"), Var("W"), Var("V0")

MUSIC_TGD = Tgd(
    [Atom("interest", [X, Z]), Atom("class_", [Y, Z])], [Atom("owns", [X, Y])]
)
MUSIC_DEPS = DependencySet([MUSIC_TGD])


def music_q():
    return CQ(
        "q",
        ("X", "Y"),
        [Atom("interest", [X, Z]), Atom("class_", [Y, Z]), Atom("owns", [X, Y])],
    )


def music_qp():
    return CQ("qp", ("X", "Y"), [Atom("interest", [X, Z]), Atom("class_", [Y, Z])])


def test_chase_adds_owns_and_saturates():
    result, free = chase_query(music_qp(), MUSIC_DEPS)
    assert result.status == SATURATED
    assert Atom("owns", [Frozen("X"), Frozen("Y")]) in result.instance
    assert free == (Frozen("X"), Frozen("Y"))
    assert len(result.instance) == 3


def test_restricted_chase_leaves_closed_query_alone():
    result, _ = chase_query(music_q(), MUSIC_DEPS)
    assert result.status == SATURATED
    assert len(result.instance) == 3  # head already present: no firing
    assert not result.trigger_log


def test_all_pairs_clique():
    q = CQ("q", (), [Atom("p", [Var(f"X{i}")]) for i in range(1, 4)])
    pair = Tgd([Atom("p", [X]), Atom("p", [Y])], [Atom("r", [X, Y])])
    result, _ = chase_query(q, DependencySet([pair]))
    assert result.status == SATURATED
    r_atoms = [a for a in result.instance.atoms if a.pred == "r"]
    assert len(r_atoms) == 9  # all ordered pairs, loops included
    assert is_acyclic(result.instance) is None


def test_key_merge_shrinks_query():
    q = CQ(
        "q",
        (),
        [
            Atom("r", [X, Y]),
            Atom("s", [X, Y, Z]),
            Atom("s", [X, Z, W]),
            Atom("s", [X, W, V0]),
            Atom("r", [X, V0]),
        ],
    )
    key = Egd([Atom("r", [Var("A"), Var("B")]), Atom("r", [Var("A"), Var("C")])],
              "B", "C")
    result, _ = chase_query(q, DependencySet((), [key]))
    assert result.status == SATURATED
    assert len(result.instance) == 4
    assert is_acyclic(result.instance) is None
    target = CQ(
        "t", (), [Atom("r", [X, Y]), Atom("s", [X, Y, Z]), Atom("s", [X, Z, W]),
                  Atom("s", [X, W, Y])]
    )
    assert isomorphic(instance_as_cq(result.instance), target)


def test_egd_failure_on_two_constants():
    inst = Instance([Atom("r", [Const("a"), Const("b")]),
                     Atom("r", [Const("a"), Const("c")])])
    key = Egd([Atom("r", [X, Y]), Atom("r", [X, Z])], "Y", "Z")
    result = chase(inst, DependencySet((), [key]))
    assert result.status == FAILED


def test_egd_prefers_constant_over_null():
    inst = Instance([Atom("r", [Const("a"), Const("b")])])
    prog = parse_program("r(X,Y) -> exists Z. s(X,Z).\ns(X,Y), r(X,W) -> Y = W.")
    result = chase(inst, prog.dependencies, ChasePolicy(max_steps=50))
    assert result.status == SATURATED
    assert Atom("s", [Const("a"), Const("b")]) in result.instance


def test_chase_query_without_dependencies():
    q = music_q()
    result, free = chase_query(q, DependencySet())
    db, frozen = canonical_database(q)
    assert result.instance.atoms == db.atoms
    assert free == frozen


def test_nr_saturates_without_budget():
    for seed in range(25):
        rng = Random(seed)
        deps = random_nr_set(rng)
        q = random_acyclic_cq(
            rng, max_atoms=3, preds=[("q0", deps.predicates().get("q0", 2))]
        )
        result, _ = chase_query(q, deps)
        assert result.status == SATURATED
        assert not satisfies(result.instance, deps)


def test_budget_required_for_uncertified_sets():
    deps = parse_program("r(X,Y) -> r(Y,Z).").dependencies
    q = CQ("q", (), [Atom("r", [X, Y])])
    with pytest.raises(ChaseBudgetRequired):
        chase_query(q, deps)
    result, _ = chase_query(q, deps, ChasePolicy(max_depth=3))
    assert result.status == BUDGET_EXHAUSTED
    assert max(result.depth_of.values()) == 3


def test_monotone_for_tgds():
    for seed in range(20):
        rng = Random(seed)
        deps = random_nr_set(rng)
        q = random_acyclic_cq(rng, max_atoms=3,
                              preds=[("q0", deps.predicates().get("q0", 2))])
        db, _ = canonical_database(q)
        result = chase(db, deps)
        assert set(db.atoms) <= result.instance.atom_set


def test_merge_substitution_maps_origin_into_result():
    for seed in range(25):
        rng = Random(seed)
        preds = [("r", 2), ("h", 2)]
        q = random_acyclic_cq(rng, max_atoms=4, preds=preds)
        deps = random_key_set(rng, preds)
        if not deps.egds:
            continue
        db, _ = canonical_database(q)
        result = chase(db, deps)
        if result.status != SATURATED:
            continue
        for atom in db.atoms:
            img = Atom(atom.pred, [result.resolve(t) for t in atom.args])
            assert img in result.instance


def test_restricted_embeds_into_oblivious():
    for seed in range(15):
        rng = Random(seed)
        deps = random_nr_set(rng, max_tgds=3)
        q = random_acyclic_cq(rng, max_atoms=3,
                              preds=[("q0", deps.predicates().get("q0", 2))])
        restricted, _ = chase_query(q, deps, ChasePolicy("restricted"))
        oblivious, _ = chase_query(q, deps, ChasePolicy("oblivious", max_steps=4000))
        if oblivious.status != SATURATED:
            continue
        assert find_homomorphism(restricted.instance, oblivious.instance) is not None


def test_satisfies_music_example():
    db = Instance([Atom("interest", [Const("c"), Const("s")]),
                   Atom("class_", [Const("r"), Const("s")])])
    violations = satisfies(db, MUSIC_DEPS)
    assert len(violations) == 1
    repaired = Instance(list(db.atoms) + [Atom("owns", [Const("c"), Const("r")])])
    assert satisfies(repaired, MUSIC_DEPS) == []


def test_empty_instance_satisfies_everything():
    deps = parse_program(
        "r(X,Y) -> s(Y).\nr(A,B), r(A,C) -> B = C."
    ).dependencies
    assert satisfies(Instance(()), deps) == []


def test_saturated_chase_yields_no_violations():
    for seed in range(20):
        rng = Random(seed)
        deps = random_nr_set(rng)
        q = random_acyclic_cq(rng, max_atoms=3,
                              preds=[("q0", deps.predicates().get("q0", 2))])
        result, _ = chase_query(q, deps)
        assert result.status == SATURATED
        assert satisfies(result.instance, deps) == []


def test_depth_levels_start_at_zero_and_step():
    deps = parse_program("p(X) -> s(X,Y).\ns(X,Y) -> t(Y).").dependencies
    q = CQ("q", (), [Atom("p", [X])])
    result, _ = chase_query(q, deps)
    by_pred = {a.pred: result.depth_of[a] for a in result.instance.atoms}
    assert by_pred == {"p": 0, "s": 1, "t": 2}


# ---------------------------------------------------------------------------
# Guarded chase forest


def test_forest_path_example():
    q = CQ("q", (), [Atom("r", [Const("a"), Const("b")])])
    deps = parse_program("r(X,Y) -> r(Y,Z).").dependencies
    forest = guarded_chase_forest(q, deps, depth=3)
    assert len(forest.nodes) == 4
    assert sum(1 for p in forest.parent if p is None) == 1
    # a path: each non-root has exactly one child except the deepest
    kids = forest.children()
    assert sorted(len(v) for v in kids.values()) == [0, 1, 1, 1]


def test_forest_depth_zero_is_the_query():
    q = CQ("q", (), [Atom("r", [X, Y]), Atom("s", [Y, Z])])
    deps = parse_program("r(X,Y) -> r(Y,Z).").dependencies
    forest = guarded_chase_forest(q, deps, depth=0)
    assert len(forest.nodes) == 2
    assert all(p is None for p in forest.parent)


def test_forest_rejects_unguarded_sets():
    deps = MUSIC_DEPS  # the music tgd is not guarded
    with pytest.raises(ModelError):
        guarded_chase_forest(music_q(), deps, depth=2)


def test_guarded_prefixes_stay_acyclic():
    for seed in range(60):
        rng = Random(seed)
        deps = random_guarded_set(rng, max_tgds=3)
        q = random_acyclic_cq(rng, max_atoms=5)
        result, _ = chase_query(q, deps, ChasePolicy(max_depth=4))
        for level in range(5):
            prefix = Instance(
                [a for a, d in result.depth_of.items() if d <= level]
            )
            if len(prefix):
                assert is_acyclic(prefix) is not None, (seed, level)


def test_forest_attaches_to_join_tree():
    # combining the query's join tree with the forest subtrees gives a
    # join tree of the chase prefix
    for seed in range(20):
        rng = Random(seed)
        deps = random_guarded_set(rng, max_tgds=2)
        q = random_acyclic_cq(rng, max_atoms=4)
        forest = guarded_chase_forest(q, deps, depth=3)
        qtree = is_acyclic(canonical_database(q)[0])
        assert qtree is not None
        atom_to_node = {a: i for i, a in enumerate(qtree.nodes)}
        nodes = list(qtree.nodes)
        parent = list(qtree.parent)
        forest_index = {}
        for i, a in enumerate(forest.nodes):
            if a in atom_to_node:
                forest_index[i] = atom_to_node[a]
        for i, a in enumerate(forest.nodes):
            if i in forest_index:
                continue
            forest_index[i] = len(nodes)
            nodes.append(a)
            parent.append(None)
        for i, p in enumerate(forest.parent):
            if p is not None and forest.nodes[i] not in atom_to_node:
                parent[forest_index[i]] = forest_index[p]
        combined = JoinTree(tuple(nodes), tuple(parent))
        assert validate_join_tree(Instance(nodes), combined), seed
