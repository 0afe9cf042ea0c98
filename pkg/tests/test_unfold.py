from hypothesis import given, settings, strategies as st

from obdaplan.ir import Atom, Cover, Functional, Variable, enumerate_covers, parse_query
from obdaplan.mappings import parse_mappings, saturate, wrap
from obdaplan.oracle import Oracle, certain_answers, eval_translation, eval_view
from obdaplan.unfold import (UnfoldedQuery, atm, count_cqs, mgu, unfold_jucq_type1, unfold_jucq_type2,
                             unfold_ucq)

import randgen

x, b, c = Variable("x"), Variable("b"), Variable("c")

# Mappings of the D/P translation walkthrough.
DP = parse_mappings("""
V1(a) := T1(a)
V2(b) := T2(b)
V3(c) := T3(c)
V4(a,b) := T4(a,b)
C(f(a)) <- V1(a)
D(f(b)) <- V2(b)
D(g(c)) <- V3(c)
P(f(a),g(b)) <- V4(a,b)
""")


def test_mgu_binds_to_template():
    s = mgu([(Atom("D", (x,)), Atom("D", (Functional("f", (b,)),)))])
    assert s == {x: Functional("f", (b,))}


def test_mgu_identity_and_clash():
    y = Variable("y")
    assert mgu([(Atom("P", (x, y)), Atom("P", (x, y)))]) == {}
    assert mgu([(Atom("D", (Functional("f", (b,)),)), Atom("D", (Functional("g", (c,)),)))]) is None


def test_unfold_concept():
    u = unfold_ucq(parse_query("q(x) :- D(x)"), DP)
    assert sorted(r.body[0].predicate for r in u.rules) == ["V2", "V3"]
    assert sorted(atm(u)) == [("f",), ("g",)]


def test_unfold_with_rewritten_disjunct():
    u = unfold_ucq(parse_query("q(x) :- D(x); q(x) :- C(x)"), DP)
    assert sorted(r.body[0].predicate for r in u.rules) == ["V1", "V2", "V3"]


def test_unfold_missing_predicate_is_empty():
    u = unfold_ucq(parse_query("q(x) :- Z(x)"), DP)
    assert u.empty and count_cqs(u) == 0
    assert "empty" in str(u)


def test_type1_keeps_fragments_apart():
    q = parse_query("q(x,y) :- D(x), P(x,y)")
    t = unfold_jucq_type1(q, Cover.of([0], [1]), DP)
    assert [len(u.rules) for u in t.fragment_unfoldings] == [2, 1]
    assert len(t.unfolding.rules) == 1
    assert count_cqs(t) == 3


def test_type1_singleton_cover_matches_ucq():
    q = parse_query("q(x,y) :- D(x), P(x,y)")
    t = unfold_jucq_type1(q, Cover.of([0, 1]), DP)
    assert t.fragment_unfoldings[0].rules == unfold_ucq(q, DP).rules


def test_type1_empty_fragment():
    q = parse_query("q(x) :- D(x), Z(x)")
    assert unfold_jucq_type1(q, Cover.of([0], [1]), DP).empty
    assert unfold_jucq_type2(q, Cover.of([0], [1]), DP).empty


def test_saturated_unfolding_over_wrap(saturation_example):
    M, T = saturation_example
    u = unfold_ucq(parse_query("q(x,y,z) :- C(x), R1(x,y), R2(x,z)"), wrap(saturate(M, T)))
    assert len(u.rules) == 2
    assert atm(u) == [("l", "m", "m"), ("l", "m", "n")]
    # both rules share the C and R1 union views
    assert u.rules[0].body[:2] == u.rules[1].body[:2]


def test_type2_running_example(running_example):
    q = parse_query("q(x,y,z) :- P1(x,y), C(x), P2(x,z)")
    t = unfold_jucq_type2(q, Cover.of([0, 1], [2]), running_example)
    assert len(t.unfolding.rules) == 2
    assert sorted(atm(t.unfolding)) == [("f", "g", "h"), ("f", "g", "k")]
    views = {a.predicate for r in t.unfolding.rules for a in r.body}
    assert len(views) == 3
    reg = t.unfolding.registry
    # the P1,C fragment view unions both V1 and V2 branches
    shared = set.intersection(*({a.predicate for a in r.body} for r in t.unfolding.rules))
    assert len(shared) == 1 and len(reg[shared.pop()].branches) == 2


def test_type2_joins_on_raw_columns(running_example):
    q = parse_query("q(x,y,z) :- P1(x,y), C(x), P2(x,z)")
    t = unfold_jucq_type2(q, Cover.of([0, 1], [2]), running_example)
    for r in t.unfolding.rules:
        for a in r.body:
            assert all(isinstance(v, Variable) for v in a.args)


def test_type2_singleton_signature_gives_one_jucq():
    M = parse_mappings("V1(a,b) := T1(a,b)\nV2(a) := T2(a)\nP(f(a),g(b)) <- V1(a,b)\nC(f(a)) <- V2(a)\n")
    t = unfold_jucq_type2(parse_query("q(x,y) :- P(x,y), C(x)"), Cover.of([0], [1]), M)
    assert len(t.unfolding.rules) == 1


def test_type2_answers_match(running_example, running_data):
    q = parse_query("q(x,y,z) :- P1(x,y), C(x), P2(x,z)")
    ca = certain_answers(q, None, running_example, running_data)
    assert ca
    for cover in enumerate_covers(q, 3):
        if cover.is_trivial:
            continue
        for t in (unfold_jucq_type1(q, cover, running_example), unfold_jucq_type2(q, cover, running_example)):
            assert eval_translation(t, running_data)[0] == ca


def test_rules_are_minimal():
    M = parse_mappings("V(a) := T(a)\nA(f(a)) <- V(a)\nB(f(a)) <- V(a)\n")
    u = unfold_ucq(parse_query("q(x) :- A(x); q(y) :- A(y)"), M)
    assert len(u.rules) == 1


def test_templated_view_heads_are_split():
    M = parse_mappings("U(f(a)) := T1(a)\nU(g(b)) := T2(b)\nA(x) <- U(x)\nB(f(a)) <- V(a)\nV(a) := T3(a)\n")
    u = unfold_ucq(parse_query("q(x) :- A(x), B(x)"), M)
    assert len(u.rules) == 1 and atm(u) == [("f",)]


def test_unfolded_query_str():
    u = unfold_ucq(parse_query("q(x) :- D(x)"), DP)
    assert isinstance(u, UnfoldedQuery)
    assert str(u).count(":-") == 2


# --- random instances ------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(randgen.QUERIES), st.booleans())
def test_translations_agree_with_certain_answers(seed, text, templated):
    M, T, D = randgen.setting(seed, templated_views=templated)
    MT = saturate(M, T)
    q = randgen.query(text)
    o = Oracle(D)
    expected = certain_answers(q, T, M, D)
    assert eval_translation(unfold_ucq(q, MT), D, o)[0] == expected
    for cover in enumerate_covers(q, 3)[1:]:
        assert eval_translation(unfold_jucq_type1(q, cover, MT), D, o)[0] == expected
        assert eval_translation(unfold_jucq_type2(q, cover, MT), D, o)[0] == expected


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(randgen.ALL_ANSWER))
def test_all_answer_rules_are_disjoint(seed, text):
    M, T, D = randgen.setting(seed)
    W = wrap(saturate(M, T))
    q = randgen.query(text)
    u = unfold_ucq(q, W)
    rows = atm(u)
    assert len(rows) == len(set(rows))
    o = Oracle(D)
    per_rule = [eval_translation(UnfoldedQuery(u.name, u.arity, (r,), u.views), D, o)[0] for r in u.rules]
    total = eval_translation(u, D, o)[0]
    assert sum(len(s) for s in per_rule) == len(total)


def test_eval_view_helper(running_data, running_example):
    assert eval_view(running_example.registry["V4"], running_data) == frozenset({(1,), (2,), (4,)})
