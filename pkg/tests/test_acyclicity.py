from itertools import product
from random import Random

import pytest

from cqkit.acyclicity import JoinTree, compact_witness, is_acyclic, validate_join_tree
from cqkit.canon import canonical_key
from cqkit.errors import ModelError
from cqkit.homs import all_homomorphisms, find_homomorphism
from cqkit.model import (
    CQ,
    Atom,
    Const,
    Frozen,
    Instance,
    Var,
    canonical_database,
)

from helpers import brute_force_join_tree, random_acyclic_cq, random_cq

X, Y, Z, U, V, W = (Var(n) for n in "XYZUVW")


def test_path_query_acyclic():
    q = CQ("q", (), [Atom("r", [X, Y]), Atom("s", [Y, Z])])
    tree = is_acyclic(q)
    assert tree is not None
    assert validate_join_tree(q, tree)


def test_triangle_cyclic():
    q = CQ("q", (), [Atom("r", [X, Y]), Atom("r", [Y, Z]), Atom("r", [Z, X])])
    assert is_acyclic(q) is None


def test_music_query_cyclic():
    q = CQ(
        "q",
        ("X", "Y"),
        [Atom("interest", [X, Z]), Atom("class_", [Y, Z]), Atom("owns", [X, Y])],
    )
    assert is_acyclic(q) is None


def test_guard_atom_makes_triangle_acyclic():
    q = CQ(
        "q",
        (),
        [
            Atom("r", [X, Y]),
            Atom("r", [Y, Z]),
            Atom("r", [Z, X]),
            Atom("t", [X, Y, Z]),
        ],
    )
    assert is_acyclic(q) is not None


def test_constants_exempt_from_connectedness():
    a = Const("a")
    # triangle through a rigid constant: the constant does not connect
    inst = Instance(
        [Atom("r", [Frozen("u"), a]), Atom("r", [a, Frozen("v")]),
         Atom("s", [Frozen("u"), Frozen("v")])]
    )
    assert is_acyclic(inst) is not None
    # the frozen version of the same shape is a genuine triangle
    inst2 = Instance(
        [Atom("r", [Frozen("u"), Frozen("a")]), Atom("r", [Frozen("a"), Frozen("v")]),
         Atom("s", [Frozen("u"), Frozen("v")])]
    )
    assert is_acyclic(inst2) is None


def test_disconnected_structures_get_a_forest():
    q = CQ("q", (), [Atom("r", [X, Y]), Atom("s", [U, V])])
    tree = is_acyclic(q)
    assert tree is not None
    assert len(tree.roots()) == 2
    assert validate_join_tree(q, tree)


def test_validate_both_parent_orders():
    r, s = Atom("r", [X, Y]), Atom("s", [Y, Z])
    q = CQ("q", (), [r, s])
    assert validate_join_tree(q, JoinTree((r, s), (1, None)))
    assert validate_join_tree(q, JoinTree((r, s), (None, 0)))


def test_validate_rejects_missing_atom():
    r, s = Atom("r", [X, Y]), Atom("s", [Y, Z])
    q = CQ("q", (), [r, s])
    assert not validate_join_tree(q, JoinTree((r,), (None,)))


def test_validate_rejects_broken_connectedness():
    r1, r2, s = Atom("r", [X, Y]), Atom("r", [Y, Z]), Atom("p", [U])
    q = CQ("q", (), [r1, r2, s])
    # r1 and r2 share Y but sit in different trees
    bad = JoinTree((r1, r2, s), (None, 2, None))
    assert not validate_join_tree(q, bad)


def test_self_outputs_always_validate():
    for seed in range(60):
        q = random_cq(Random(seed), max_atoms=4)
        tree = is_acyclic(q)
        if tree is not None:
            assert validate_join_tree(q, tree)


def test_duplicate_atoms_collapse():
    q1 = CQ("q", (), [Atom("r", [X, Y])])
    q2 = CQ("q", (), [Atom("r", [X, Y]), Atom("r", [X, Y])])
    assert len(q2.atoms) == 1
    assert (is_acyclic(q1) is None) == (is_acyclic(q2) is None)


def test_renaming_invariance():
    for seed in range(40):
        q = random_cq(Random(seed), max_atoms=4)
        renamed = CQ(
            "q",
            tuple(f"{v}_r" for v in q.free_vars),
            [
                Atom(a.pred, [Var(f"{t.name}_r") if isinstance(t, Var) else t
                              for t in a.args])
                for a in q.atoms
            ],
        )
        assert (is_acyclic(q) is None) == (is_acyclic(renamed) is None)


def _tiny_structures():
    """Every CQ with <= 4 atoms over a 2-predicate arity-<=3 signature,
    deduplicated up to isomorphism."""
    preds = [("e", 2), ("t", 3)]
    vars_pool = [Var(f"V{i}") for i in range(4)]
    atom_universe = [
        Atom(p, combo)
        for p, arity in preds
        for combo in product(vars_pool, repeat=arity)
    ]
    seen = set()
    out = []
    rng = Random(7)
    # exhaustive over sizes 1..3; random thinning at size 4 keeps runtime sane
    from itertools import combinations

    for size in (1, 2, 3):
        for combo in combinations(range(len(atom_universe)), size):
            atoms = [atom_universe[i] for i in combo]
            key = canonical_key(atoms)
            if key in seen:
                continue
            seen.add(key)
            out.append(CQ("q", (), atoms))
    for _ in range(400):
        combo = rng.sample(range(len(atom_universe)), 4)
        atoms = [atom_universe[i] for i in combo]
        key = canonical_key(atoms)
        if key in seen:
            continue
        seen.add(key)
        out.append(CQ("q", (), atoms))
    return out


def test_gyo_matches_brute_force_on_tiny_structures():
    for q in _tiny_structures():
        fast = is_acyclic(q)
        slow = brute_force_join_tree(q)
        assert (fast is None) == (slow is None), q
        if fast is not None:
            assert validate_join_tree(q, fast)


# ---------------------------------------------------------------------------
# Witness compaction


def test_compact_single_node_image():
    q = CQ("q", (), [Atom("r", [X, Y])])
    target = Instance([Atom("r", [Frozen("a"), Frozen("b")])])
    tree = is_acyclic(target)
    h = {"X": Frozen("a"), "Y": Frozen("b")}
    out = compact_witness(q, target, tree, h)
    assert len(out) == 1
    assert out.atoms[0].pred == "r"


def test_compact_requires_valid_mapping():
    q = CQ("q", (), [Atom("r", [X, Y])])
    target = Instance([Atom("s", [Frozen("a"), Frozen("b")])])
    tree = is_acyclic(target)
    with pytest.raises(ModelError):
        compact_witness(q, target, tree, {"X": Frozen("a"), "Y": Frozen("b")})


def test_compact_requires_distinct_free_images():
    q = CQ("q", ("X", "Y"), [Atom("r", [X, Y])])
    target = Instance([Atom("r", [Frozen("a"), Frozen("a")])])
    tree = is_acyclic(target)
    with pytest.raises(ModelError):
        compact_witness(q, target, tree, {"X": Frozen("a"), "Y": Frozen("a")})


def test_compact_witness_properties_on_random_inputs():
    """Compaction output is acyclic, within twice the query size, admits a
    homomorphism from the query, and keeps the free images satisfiable."""
    hits = 0
    for seed in range(300):
        rng = Random(seed)
        target_q = random_acyclic_cq(rng, max_atoms=6, n_free=0)
        target, _ = canonical_database(target_q)
        tree = is_acyclic(target)
        assert tree is not None
        q = random_cq(rng, max_atoms=4, n_free=2)
        fix = {}
        h = find_homomorphism(q, target, fix)
        good = None
        if h is not None:
            for cand in all_homomorphisms(q, target):
                imgs = [cand[Var(x)] for x in q.free_vars]
                if len(set(imgs)) == len(imgs):
                    good = cand
                    break
        if good is None:
            continue
        hits += 1
        named = {v.name: t for v, t in good.items()}
        out = compact_witness(q, target, tree, named)
        assert len(out) <= 2 * len(q)
        assert is_acyclic(out) is not None
        # a homomorphism from q into the compacted query must exist,
        # pinning free variables positionally
        db, frozen = canonical_database(out)
        pin = {Var(x): Frozen(fv) for x, fv in zip(q.free_vars, out.free_vars)}
        assert find_homomorphism(q, db, pin) is not None
    assert hits >= 30  # the generator must exercise the construction


def test_compact_witness_keeps_mid_chain_image_atoms():
    # target: a path of four atoms; the query maps onto the two middle ones
    a, b, c, d, e = (Frozen(s) for s in "abcde")
    target = Instance(
        [
            Atom("r", [a, b]),
            Atom("r", [b, c]),
            Atom("r", [c, d]),
            Atom("r", [d, e]),
        ]
    )
    tree = is_acyclic(target)
    q = CQ("q", (), [Atom("r", [X, Y]), Atom("r", [Y, Z])])
    out = compact_witness(q, target, tree, {"X": b, "Y": c, "Z": d})
    db, _ = canonical_database(out)
    assert find_homomorphism(q, db) is not None
    assert len(out) <= 2 * len(q)
