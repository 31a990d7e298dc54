"""Brute-force oracles and seeded random generators shared by the tests.

The oracles deliberately avoid the library's algorithms: join trees come
from exhaustive search over parent assignments, homomorphisms from raw
assignment enumeration.  Generators are deterministic under a caller's
`random.Random` so failures reproduce.
"""

from itertools import product
from random import Random

from cqkit.acyclicity import JoinTree, validate_join_tree
from cqkit.errors import ModelError
from cqkit.model import (
    CQ,
    Atom,
    Const,
    DependencySet,
    Egd,
    Instance,
    Tgd,
    Var,
    is_rigid,
    sort_atoms,
)


# ---------------------------------------------------------------------------
# Oracles


def brute_force_join_tree(structure):
    """Search every parent assignment over the atom set for a valid join
    tree; returns one or None."""
    atoms = sort_atoms(
        structure.atoms if hasattr(structure, "atoms") else structure
    )
    n = len(atoms)
    if n == 0:
        return JoinTree((), ())
    choices = [[None] + [p for p in range(n) if p != v] for v in range(n)]
    for parents in product(*choices):
        try:
            tree = JoinTree(atoms, parents)
        except ModelError:
            continue
        if validate_join_tree(Instance(atoms) if not isinstance(structure, CQ)
                              else structure, tree):
            return tree
    return None


def brute_force_homs(src_atoms, dst_atoms, fix=None):
    """All homomorphisms by raw enumeration of variable assignments."""
    src_atoms = list(src_atoms)
    dst_atoms = list(dst_atoms)
    dst_terms = sorted(
        {t for a in dst_atoms for t in a.args}, key=lambda t: repr(t)
    )
    movers = sorted(
        {t for a in src_atoms for t in a.args if not is_rigid(t)},
        key=lambda t: repr(t),
    )
    fix = fix or {}
    dst_set = set(dst_atoms)
    out = []
    for assignment in product(dst_terms, repeat=len(movers)):
        h = dict(zip(movers, assignment))
        if any(h.get(k, v) != v for k, v in fix.items()):
            continue
        h.update(fix)
        ok = True
        for a in src_atoms:
            img = Atom(a.pred, [h.get(t, t) for t in a.args])
            if img not in dst_set:
                ok = False
                break
        if ok:
            out.append(h)
    return out


# ---------------------------------------------------------------------------
# Random structure generators


def random_cq(rng: Random, max_atoms=4, preds=None, max_arity=3, n_free=0,
              name="q"):
    preds = preds or [("r", 2), ("s", max_arity), ("p", 1)]
    n_atoms = rng.randint(1, max_atoms)
    pool = [f"V{i}" for i in range(max_atoms * max_arity)]
    atoms = []
    for _ in range(n_atoms):
        pred, arity = rng.choice(preds)
        atoms.append(Atom(pred, [Var(rng.choice(pool)) for _ in range(arity)]))
    have = sorted({v for a in atoms for v in a.variables()})
    free = tuple(rng.sample(have, min(n_free, len(have))))
    return CQ(name, free, atoms)


def random_acyclic_cq(rng: Random, max_atoms=5, preds=None, max_arity=3,
                      n_free=0, name="q"):
    """Grow a query along a join tree: each new atom reuses terms of a
    single earlier atom, so the result is acyclic by construction."""
    preds = preds or [("r", 2), ("s", max_arity), ("p", 1)]
    n_atoms = rng.randint(1, max_atoms)
    counter = [0]

    def fresh():
        counter[0] += 1
        return Var(f"V{counter[0]}")

    first_pred, first_arity = rng.choice(preds)
    atoms = [Atom(first_pred, [fresh() for _ in range(first_arity)])]
    for _ in range(n_atoms - 1):
        parent = rng.choice(atoms)
        parent_vars = [t for t in parent.args]
        pred, arity = rng.choice(preds)
        args = []
        for _ in range(arity):
            if parent_vars and rng.random() < 0.6:
                args.append(rng.choice(parent_vars))
            else:
                args.append(fresh())
        atoms.append(Atom(pred, args))
    have = sorted({v for a in atoms for v in a.variables()})
    free = tuple(rng.sample(have, min(n_free, len(have))))
    return CQ(name, free, atoms)


def random_guarded_set(rng: Random, max_tgds=3, preds=None, max_arity=3):
    """Guarded tgds: a guard atom holds every body variable."""
    preds = preds or [("r", 2), ("s", max_arity), ("p", 1)]
    tgds = []
    for _ in range(rng.randint(1, max_tgds)):
        guard_pred, guard_arity = rng.choice(preds)
        body_vars = [Var(f"B{i}") for i in range(guard_arity)]
        body = [Atom(guard_pred, [rng.choice(body_vars) for _ in range(guard_arity)])]
        guard_vars = sorted({t.name for t in body[0].args})
        body_vars = [Var(v) for v in guard_vars]
        for _ in range(rng.randint(0, 1)):
            pred, arity = rng.choice(preds)
            body.append(Atom(pred, [rng.choice(body_vars) for _ in range(arity)]))
        frontier = [v for v in body_vars if rng.random() < 0.7] or body_vars[:1]
        head = []
        exist = [Var(f"Z{i}") for i in range(2)]
        for _ in range(rng.randint(1, 2)):
            pred, arity = rng.choice(preds)
            head.append(
                Atom(
                    pred,
                    [
                        rng.choice(frontier) if rng.random() < 0.7
                        else rng.choice(exist)
                        for _ in range(arity)
                    ],
                )
            )
        keep = {v.name for a in head for v in a.args if isinstance(v, Var)}
        if not keep & {v.name for v in frontier}:
            head[0] = Atom(head[0].pred, [frontier[0]] + list(head[0].args[1:]))
        tgds.append(Tgd(body, head))
    deps = DependencySet(tgds)
    assert deps.labels.guarded
    return deps


def random_nr_set(rng: Random, max_tgds=4, max_arity=3, n_preds=4,
                  allow_existentials=True):
    """Non-recursive sets: bodies draw from strictly lower layers."""
    layers = [(f"q{i}", rng.randint(1, max_arity)) for i in range(n_preds)]
    tgds = []
    for _ in range(rng.randint(1, max_tgds)):
        hi = rng.randint(1, len(layers) - 1)
        head_pred, head_arity = layers[hi]
        body = []
        body_vars = [Var(f"B{i}") for i in range(max_arity + 1)]
        for _ in range(rng.randint(1, 2)):
            lo = rng.randint(0, hi - 1)
            pred, arity = layers[lo]
            body.append(Atom(pred, [rng.choice(body_vars) for _ in range(arity)]))
        in_body = sorted({v for a in body for v in a.variables()})
        exist = [Var("Z0"), Var("Z1")] if allow_existentials else []
        head_args = []
        for _ in range(head_arity):
            if exist and rng.random() < 0.3:
                head_args.append(rng.choice(exist))
            else:
                head_args.append(Var(rng.choice(in_body)))
        tgds.append(Tgd(body, [Atom(head_pred, head_args)]))
    deps = DependencySet(tgds)
    assert deps.labels.non_recursive
    return deps


def random_key_set(rng: Random, preds):
    """One binary key per chosen binary predicate."""
    egds = []
    for pred, arity in preds:
        if arity != 2 or rng.random() < 0.4:
            continue
        keyed = rng.choice([0, 1])
        x, y, z = Var("X"), Var("Y"), Var("Z")
        if keyed == 0:
            egds.append(Egd([Atom(pred, [x, y]), Atom(pred, [x, z])], "Y", "Z"))
        else:
            egds.append(Egd([Atom(pred, [y, x]), Atom(pred, [z, x])], "Y", "Z"))
    return DependencySet((), egds)


def random_database(rng: Random, preds, n_facts=12, domain_size=6) -> Instance:
    domain = [Const(f"d{i}") for i in range(domain_size)]
    atoms = []
    for _ in range(n_facts):
        pred, arity = rng.choice(preds)
        atoms.append(Atom(pred, [rng.choice(domain) for _ in range(arity)]))
    return Instance(atoms)
