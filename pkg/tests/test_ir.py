import pytest
from hypothesis import given, strategies as st

from obdaplan.ir import (CQ, UCQ, ArityError, Atom, Cover, CoverError, Functional, Join, QAttr,
                         QuerySyntaxError, Scan, Variable, alpha_equivalent, canonical_cq, chain,
                         enumerate_covers, is_basic, make_fragment_query, parse_query, prefixes,
                         print_query, set_partitions, view_of_alias)

x, y, z, w = (Variable(n) for n in "xyzw")


def test_parse_two_atom_query():
    q = parse_query("q(x,y) :- D(x), P(x,y)")
    assert isinstance(q, CQ)
    assert q.head == (x, y)
    assert q.body == (Atom("D", (x,)), Atom("P", (x, y)))


def test_parse_single_atom():
    q = parse_query("q(x) :- A(x)")
    assert len(q.body) == 1


def test_parse_union():
    q = parse_query("q(x) :- A(x); q(x) :- B(x)")
    assert isinstance(q, UCQ)
    assert len(q.cqs) == 2


def test_parse_ampersand_separator():
    assert parse_query("q(x) :- A(x) & B(x)") == parse_query("q(x) :- A(x), B(x)")


def test_syntax_error_has_position():
    with pytest.raises(QuerySyntaxError) as exc:
        parse_query("q(x) :- A(x,")
    assert exc.value.line == 1
    assert exc.value.column > 1


def test_arity_mismatch():
    with pytest.raises(ArityError):
        parse_query("q(x) :- P(x,y), P(x)")


def test_ternary_atoms_rejected():
    with pytest.raises((ArityError, QuerySyntaxError)):
        parse_query("q(x) :- T(x,y,z)")


def test_functional_term_printing():
    assert str(Functional("f", (x, y))) == "f(x,y)"


def test_fragment_query_of_running_example():
    q = parse_query("q(x,y,z) :- P1(x,y), C(x), P2(x,z)")
    cover = Cover.of([0, 1], [2])
    f1 = make_fragment_query(q, [0, 1], cover)
    assert f1.head == (x, y)
    assert f1.body == (Atom("P1", (x, y)), Atom("C", (x,)))
    f2 = make_fragment_query(q, [2], cover)
    assert f2.head == (x, z)


def test_fragment_query_identity_cover():
    q = parse_query("q(x,y) :- D(x), P(x,y)")
    f = make_fragment_query(q, [0, 1], Cover.of([0, 1]))
    assert f.head == q.head and f.body == q.body


def test_fragment_exposes_shared_existential():
    q = parse_query("q(x) :- R(x,w), S(w)")
    cover = Cover.of([0], [1])
    assert make_fragment_query(q, [0], cover).head == (x, w)
    assert make_fragment_query(q, [1], cover).head == (w,)


def test_invalid_covers():
    q = parse_query("q(x) :- A(x), B(x), C(x)")
    with pytest.raises(CoverError):
        Cover.of([0], [1]).validate(q)
    with pytest.raises(CoverError):
        Cover.of([0, 1, 2], [1]).validate(q)
    with pytest.raises(CoverError):
        Cover.of([0, 1, 2, 3]).validate(q)


def test_cover_labels_are_one_based():
    c = Cover.parse("1,2|3")
    assert c == Cover.of([0, 1], [2])
    assert c.label() == "1,2|3"


@pytest.mark.parametrize("atoms,k,count", [(3, 3, 5), (2, 1, 1), (4, 2, 8), (4, 4, 15)])
def test_cover_counts(atoms, k, count):
    q = CQ("q", (x,), tuple(Atom(f"A{i}", (x,)) for i in range(atoms)))
    covers = enumerate_covers(q, k)
    assert len(covers) == count
    assert covers[0].is_trivial
    for c in covers:
        c.validate(q)


def test_enumerate_covers_rejects_zero():
    with pytest.raises(ValueError):
        enumerate_covers(parse_query("q(x) :- A(x)"), 0)


def test_alpha_equivalence():
    a = parse_query("q(x,y) :- P(x,y), A(x)")
    b = parse_query("q(u,v) :- P(u,v), A(u)")
    c = parse_query("q(x,y) :- P(y,x), A(x)")
    assert alpha_equivalent(a, b)
    assert not alpha_equivalent(a, c)
    assert canonical_cq(a) == canonical_cq(b)


def test_relational_expression_shapes():
    a, c = QAttr("T1", ("a",)), QAttr("T2", ("c",))
    e = chain(Scan("T1", "T1"), (Scan("T2", "T2"), [(a, c)]))
    assert isinstance(e, Join) and is_basic(e)
    assert len(prefixes(e)) >= 1
    assert view_of_alias("T3#2") == "T3"
    assert QAttr("T3#2", ("f",)).view == "T3"
    assert not is_basic(Join(e, Scan("T3", "T3"), ((a, QAttr("T3", ("e",))), (c, QAttr("T3", ("f",))))))


# --- properties ----------------------------------------------------------------------

preds = st.sampled_from([("A", 1), ("B", 1), ("P", 2), ("Q", 2)])
names = st.sampled_from(["x", "y", "z", "w"])


@st.composite
def queries(draw):
    body = []
    for _ in range(draw(st.integers(1, 4))):
        p, n = draw(preds)
        body.append(Atom(p, tuple(Variable(draw(names)) for _ in range(n))))
    vs = list(dict.fromkeys(v for a in body for v in a.args))
    head = draw(st.lists(st.sampled_from(vs), min_size=1, max_size=len(vs), unique=True))
    return CQ("q", tuple(head), tuple(body))


@given(queries())
def test_print_parse_round_trip(q):
    assert parse_query(print_query(q)) == q


@given(queries(), st.integers(1, 4))
def test_enumerated_covers_are_valid(q, k):
    atoms = set(range(len(q.body)))
    for c in enumerate_covers(q, k):
        c.validate(q)
        assert set().union(*c.fragments) == atoms
        assert len(c.fragments) <= k


@given(queries())
def test_fragment_head_rule_is_idempotent(q):
    for c in enumerate_covers(q, 3):
        for f in c.fragments:
            fq = make_fragment_query(q, f, c)
            again = make_fragment_query(fq, range(len(fq.body)), Cover.of(range(len(fq.body))))
            assert set(again.head) == set(fq.head)


@given(st.integers(1, 6), st.integers(1, 6))
def test_partitions_are_disjoint_and_complete(n, k):
    seen = set()
    for p in set_partitions(n, k):
        flat = sorted(i for b in p for i in b)
        assert flat == list(range(n))
        key = frozenset(frozenset(b) for b in p)
        assert key not in seen
        seen.add(key)
