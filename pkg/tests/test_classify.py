from random import Random

from cqkit.classify import classify, fd_shape, is_sticky, sticky_marking
from cqkit.model import Atom, DependencySet, Egd, Tgd, Var
from cqkit.parser import parse_program

from helpers import random_guarded_set, random_nr_set

X, Y, Z, W = Var("X"), Var("Y"), Var("Z"), Var("W")


def deps_of(text):
    return parse_program(text).dependencies


def test_single_linear_inclusion():
    labels = classify(deps_of("r(X,Y) -> s(Y,Z)."))
    assert labels.linear and labels.inclusion_dependency and labels.guarded
    assert labels.non_recursive and labels.sticky and not labels.full


def test_unguarded_join_body():
    labels = classify(deps_of("r(X,Y), s(Y,Z) -> t(X,W)."))
    assert not labels.guarded and labels.non_recursive


def test_music_tgd_flags():
    labels = classify(deps_of("interest(X,Z), class(Y,Z) -> owns(X,Y)."))
    assert not labels.guarded  # no body atom holds all of X, Y, Z
    assert labels.full and labels.non_recursive
    assert not labels.sticky  # Z is marked and occurs twice in the body


def test_repeated_variable_breaks_inclusion():
    labels = classify(deps_of("r(X,X) -> s(X,Y)."))
    assert labels.linear and not labels.inclusion_dependency


def test_full_and_recursion():
    labels = classify(deps_of("r(X,Y) -> r(Y,X)."))
    assert labels.full and not labels.non_recursive
    assert labels.terminating_chase  # full sets terminate


def test_non_terminating_needs_neither_full_nor_nr():
    labels = classify(deps_of("r(X,Y) -> r(Y,Z)."))
    assert not labels.terminating_chase


def test_sticky_marking_propagation():
    # X marked by the base step, then Y through the head-to-body step
    deps = deps_of("r(X,Y) -> r(Y,Z).")
    marking = sticky_marking(deps.tgds)
    marked_vars = {(i, v) for i, v, _ in marking.marked}
    assert (0, "X") in marked_vars and (0, "Y") in marked_vars
    assert is_sticky(deps.tgds)  # neither occurs twice


def test_sticky_rejects_doubled_marked_variable():
    deps = deps_of("r(X,Y), p(Y) -> t(X).")
    marking = sticky_marking(deps.tgds)
    assert (0, "Y") in {(i, v) for i, v, _ in marking.marked}
    assert not is_sticky(deps.tgds)


def test_marking_round_bound():
    for seed in range(30):
        deps = random_nr_set(Random(seed))
        marking = sticky_marking(deps.tgds)
        occurrences = sum(
            sum(1 for a in t.body for x in a.args if isinstance(x, Var))
            for t in deps.tgds
        )
        assert marking.rounds <= occurrences + 1


def test_fd_shape_recognition():
    egd = Egd([Atom("r", [X, Y]), Atom("r", [X, Z])], "Y", "Z")
    shape = fd_shape(egd)
    assert shape and shape.lhs == (1,) and shape.rhs == 2
    ternary = deps_of("r(a,b,c). fd r : 1 -> 3.").egds[0]
    shape = fd_shape(ternary)
    assert shape and shape.lhs == (1,) and shape.rhs == 3
    not_fd = Egd([Atom("r", [X, Y]), Atom("s", [X, Z])], "Y", "Z")
    assert fd_shape(not_fd) is None


def test_key_and_k2_flags():
    labels = classify(deps_of("r(a,b). key r : 1."))
    assert labels.key and labels.fd and labels.unary_fd and labels.k2_key
    assert labels.arity_le_2
    # a ternary key is a key but not a k2 key
    labels = classify(deps_of("s(a,b,c). key s : 1."))
    assert labels.key and not labels.k2_key and not labels.arity_le_2
    assert labels.unary_fd
    # an fd determining one of three positions is not a complete key
    labels = classify(deps_of("s(a,b,c). fd s : 1 -> 3."))
    assert labels.fd and not labels.key


def test_implication_lattice():
    rng = Random(4)
    sets = [random_guarded_set(rng) for _ in range(20)]
    sets += [random_nr_set(rng) for _ in range(20)]
    sets += [deps_of("r(X,Y) -> s(Y,Z)."), deps_of("r(X,X) -> s(X,Y).")]
    for deps in sets:
        labels = classify(deps)
        if labels.inclusion_dependency:
            assert labels.linear
        if labels.linear:
            assert labels.guarded
        if labels.k2_key:
            assert labels.key
        if labels.key:
            assert labels.fd
        if labels.non_recursive or labels.full:
            assert labels.terminating_chase


def test_classification_order_independent():
    t1 = Tgd([Atom("r", [X, Y])], [Atom("s", [Y, Z])])
    t2 = Tgd([Atom("s", [X, Y])], [Atom("t", [X])])
    a = classify(DependencySet([t1, t2]))
    b = classify(DependencySet([t2, t1]))
    assert a.flag_names() == b.flag_names()


def test_mixed_marker():
    deps = deps_of(
        """
        r(X,Y) -> s(Y).
        r(A,B), r(A,C) -> B = C.
        """
    )
    assert classify(deps).mixed


def test_sticky_example_family():
    # two-layer family whose marking stays empty: every body variable
    # occurs in the single head atom
    text = """
    p1(Z, X2, Z, O), p1(O, X2, Z, O) -> p0(Z, X2, Z, O).
    p2(X1, Z, Z, O), p2(X1, O, Z, O) -> p1(X1, Z, Z, O).
    """
    deps = deps_of(text)
    labels = classify(deps)
    assert labels.sticky
    assert sticky_marking(deps.tgds).marked == ()
