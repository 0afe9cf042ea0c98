"""Small random OBDA settings: base tables, views, mappings, TBox and queries."""

from __future__ import annotations

import random

from obdaplan.ir import CQ, Atom, Constant, Functional, Variable, parse_query
from obdaplan.mappings import Branch, Comparison, MappingAssertion, MappingSet, SourceView, TBox
from obdaplan.oracle import DataInstance

TABLES = {"R1": ("a", "b"), "R2": ("a", "b"), "R3": ("a", "b", "c")}
PREDICATES = {"A": 1, "B": 1, "P": 2, "Q": 2}
SYMBOLS = ("f", "g")

QUERIES = [
    "q(x) :- A(x)",
    "q(x) :- A(x), B(x)",
    "q(x,y) :- P(x,y)",
    "q(x,y) :- P(x,y), B(y)",
    "q(x,y,z) :- P(x,y), Q(y,z)",
    "q(x) :- P(x,y), Q(y,z)",
    "q(x,z) :- P(x,y), Q(y,z), A(x)",
    "q(x,y) :- P(x,y), Q(x,y)",
    "q(x,y) :- A(x), P(x,y), B(y)",
    "q(y) :- P(x,y), A(x)",
]
ALL_ANSWER = [q for q in QUERIES if not parse_query(q).existential_variables()]


def random_data(rng: random.Random, max_rows: int = 12, domain: int = 5) -> DataInstance:
    tables = {t: [tuple(rng.randrange(domain) for _ in cols) for _ in range(rng.randint(0, max_rows))]
              for t, cols in TABLES.items()}
    return DataInstance(TABLES, tables)


def _branch(rng: random.Random, arity: int, templated: bool) -> Branch:
    t = rng.choice(sorted(TABLES))
    vs = [Variable(f"z{i}") for i in range(len(TABLES[t]))]
    body = [Atom(t, tuple(vs))]
    pool = list(vs)
    filters = []
    roll = rng.random()
    if roll < 0.3:
        t2 = rng.choice(sorted(TABLES))
        ws = [vs[-1]] + [Variable(f"w{i}") for i in range(1, len(TABLES[t2]))]
        body.append(Atom(t2, tuple(ws)))
        pool += ws[1:]
    elif roll < 0.5:
        filters.append(Comparison(vs[0], rng.choice(["<", ">=", "!="]), Constant(rng.randrange(5))))
    head = [rng.choice(pool) for _ in range(arity)]
    if templated:
        head[0] = Functional(rng.choice(SYMBOLS), (head[0],))
    return Branch(tuple(head), tuple(body), tuple(filters))


def _target(rng: random.Random, pred: str, src: list[Variable], plain_ok: bool) -> Atom:
    arity = PREDICATES[pred]
    if arity == 1:
        if len(src) == 1:
            arg = src[0] if plain_ok and rng.random() < 0.2 else Functional(rng.choice(SYMBOLS), (src[0],))
        else:
            arg = Functional("h", tuple(src))
        return Atom(pred, (arg,))
    if len(src) == 1:
        return Atom(pred, (Functional("f", (src[0],)), Functional("g", (src[0],))))
    args = []
    for v in src:
        if plain_ok and rng.random() < 0.2:
            args.append(v)
        else:
            args.append(Functional(rng.choice(SYMBOLS), (v,)))
    return Atom(pred, tuple(args))


def random_mappings(rng: random.Random, max_views: int = 6, templated_views: bool = False) -> MappingSet:
    views, assertions = [], []
    for k in range(rng.randint(2, max_views)):
        arity = rng.choice((1, 2))
        templated = templated_views and rng.random() < 0.25
        n_br = 2 if rng.random() < 0.3 else 1
        branches = tuple(_branch(rng, arity, templated) for _ in range(n_br))
        v = SourceView(f"V{k}", tuple(f"c{i}" for i in range(arity)), branches)
        views.append(v)
        src = [Variable(f"s{i}") for i in range(arity)]
        for _ in range(rng.randint(1, 2)):
            pred = rng.choice(sorted(PREDICATES))
            if templated:
                if PREDICATES[pred] != arity:
                    continue
                target = Atom(pred, tuple(src))
            else:
                target = _target(rng, pred, src, plain_ok=True)
            assertions.append(MappingAssertion(target, Atom(v.name, tuple(src))))
    if not assertions:
        v = views[0]
        src = [Variable(f"s{i}") for i in range(v.arity)]
        assertions.append(MappingAssertion(_target(rng, "P", src, False), Atom(v.name, tuple(src))))
    return MappingSet(tuple(assertions), tuple(views))


def random_tbox(rng: random.Random) -> TBox:
    options = [("A", "B", 1), ("B", "A", 1), ("P", "Q", 2), ("Q", "P", 2)]
    return TBox(tuple(a for a in options if rng.random() < 0.3))


def setting(seed: int, templated_views: bool = False, max_rows: int = 12, domain: int = 5):
    rng = random.Random(seed)
    M = random_mappings(rng, templated_views=templated_views)
    T = random_tbox(rng)
    D = random_data(rng, max_rows, domain)
    return M, T, D


def query(text: str) -> CQ:
    q = parse_query(text)
    assert isinstance(q, CQ)
    return q
