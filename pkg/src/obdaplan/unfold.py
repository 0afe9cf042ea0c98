"""Unfolding of queries over mappings.

``unfold_ucq`` resolves every query atom against mapping targets with a most
general unifier and emits one Datalog rule over source views per successful
choice of mappings.  The two JUCQ translations build on it: Type 1 joins the
fragment unfoldings through auxiliary views, Type 2 unfolds the auxiliary
query again over ``wrap(split(M_aux))`` so that joins happen on raw values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .ir import (CQ, UCQ, Atom, Constant, Cover, Functional, Term, Variable, as_cqs,
                 canonical_renaming, make_fragment_query, rename_atom, rename_term,
                 template_of)
from .mappings import (Branch, MappingAssertion, MappingSet, SourceView,
                       normalize, split_with_origin, wrap)

Substitution = dict


def _walk(t: Term, s: Substitution) -> Term:
    while isinstance(t, Variable) and t in s:
        t = s[t]
    return t


def _occurs(v: Variable, t: Term, s: Substitution) -> bool:
    if isinstance(t, Functional):
        return any(_walk(a, s) == v for a in t.args)
    return False


def _unify(a: Term, b: Term, s: Substitution) -> bool:
    a, b = _walk(a, s), _walk(b, s)
    if a == b:
        return True
    if isinstance(a, Variable):
        if _occurs(a, b, s):
            return False
        s[a] = b
        return True
    if isinstance(b, Variable):
        return _unify(b, a, s)
    if isinstance(a, Functional) and isinstance(b, Functional):
        if a.symbol != b.symbol or len(a.args) != len(b.args):
            return False
        return all(_unify(x, y, s) for x, y in zip(a.args, b.args))
    return False


class NestedTerm(Exception):
    pass


def resolve(t: Term, s: Substitution) -> Term:
    """Apply s fully; raises NestedTerm when a functional term would nest."""
    t = _walk(t, s)
    if isinstance(t, Functional):
        args = []
        for a in t.args:
            b = _walk(a, s)
            if isinstance(b, Functional):
                raise NestedTerm(str(t))
            args.append(b)
        return Functional(t.symbol, tuple(args))
    return t


def mgu(pairs: Iterable[tuple[Atom, Atom]]) -> Substitution | None:
    """Most general unifier of atom pairs, or None on a clash."""
    s: Substitution = {}
    for a, b in pairs:
        if a.predicate != b.predicate or a.arity != b.arity:
            return None
        for x, y in zip(a.args, b.args):
            if not _unify(x, y, s):
                return None
    try:
        return {v: resolve(v, s) for v in s}
    except NestedTerm:
        return None


def apply_subst(t: Term, s: Substitution) -> Term:
    return resolve(t, s)


# --- unfolded programs ------------------------------------------------------------

@dataclass(frozen=True)
class UnfoldedRule:
    head: tuple[Term, ...]
    body: tuple[Atom, ...]
    query: CQ | None = field(default=None, compare=False)
    targets: tuple[Atom, ...] = field(default=(), compare=False)
    sigma: tuple[tuple[Variable, Term], ...] = field(default=(), compare=False)

    @property
    def templates(self) -> tuple[str | None, ...]:
        return tuple(template_of(t) for t in self.head)

    def binding(self, v: Variable) -> Term:
        return dict(self.sigma).get(v, v)

    def canonical(self) -> tuple:
        terms = list(self.head) + [t for a in self.body for t in a.args]
        ren = canonical_renaming(terms)
        return (tuple(rename_term(t, ren) for t in self.head),
                tuple(rename_atom(a, ren) for a in self.body))

    def format(self, name: str = "q_unf") -> str:
        return f"{name}({','.join(map(str, self.head))}) :- {', '.join(map(str, self.body))}"


@dataclass(frozen=True)
class UnfoldedQuery:
    name: str
    arity: int
    rules: tuple[UnfoldedRule, ...]
    views: tuple[SourceView, ...] = field(default=(), compare=False)
    flags: tuple[str, ...] = field(default=(), compare=False)

    @property
    def empty(self) -> bool:
        return not self.rules

    @property
    def registry(self) -> dict[str, SourceView]:
        return {v.name: v for v in self.views}

    def __len__(self) -> int:
        return len(self.rules)

    def __str__(self) -> str:
        if not self.rules:
            return f"% {self.name}: empty translation"
        return "\n".join(r.format(self.name) for r in self.rules)


def _rename_mapping(m: MappingAssertion, tag: int) -> MappingAssertion:
    ren = {v: Variable(f"{v.name}#{tag}") for v in m.source.args}
    return MappingAssertion(rename_atom(m.target, ren), rename_atom(m.source, ren))


def _unfold_cq(q: CQ, M: MappingSet) -> list[UnfoldedRule]:
    candidates: list[list[MappingAssertion]] = []
    for i, atom in enumerate(q.body, 1):
        ms = [_rename_mapping(m, i) for m in M.assertions
              if m.target.predicate == atom.predicate and m.target.arity == atom.arity]
        if not ms:
            return []
        candidates.append(ms)
    rules: list[UnfoldedRule] = []
    qvars = q.body_variables()

    def rec(i: int, s: Substitution, chosen: list[MappingAssertion]):
        if i == len(q.body):
            try:
                head = tuple(resolve(t, s) for t in q.head)
                body = tuple(Atom(m.source.predicate, tuple(resolve(a, s) for a in m.source.args))
                             for m in chosen)
                if any(isinstance(t, Functional) for a in body for t in a.args):
                    return
                targets = tuple(Atom(m.target.predicate, tuple(resolve(t, s) for t in m.target.args))
                                for m in chosen)
                sigma = tuple((v, resolve(v, s)) for v in qvars)
            except NestedTerm:
                return
            rules.append(UnfoldedRule(head, body, q, targets, sigma))
            return
        atom = q.body[i]
        for m in candidates[i]:
            s2 = dict(s)
            if all(_unify(x, y, s2) for x, y in zip(atom.args, m.target.args)):
                rec(i + 1, s2, chosen + [m])

    rec(0, {}, [])
    return rules


def minimize(rules: Sequence[UnfoldedRule]) -> tuple[UnfoldedRule, ...]:
    """Drop rules that are alpha-equivalent to an earlier one."""
    seen: set = set()
    out = []
    for r in rules:
        key = r.canonical()
        if key not in seen:
            seen.add(key)
            out.append(r)
    return tuple(out)


def _used_views(rules: Iterable[UnfoldedRule], reg: dict[str, SourceView]) -> tuple[SourceView, ...]:
    out: dict[str, SourceView] = {}

    def add(name: str):
        if name in out or name not in reg:
            return
        out[name] = reg[name]
        for b in reg[name].branches:
            for a in b.body:
                add(a.predicate)

    for r in rules:
        for a in r.body:
            add(a.predicate)
    return tuple(out.values())


def unfold_ucq(q: CQ | UCQ, M: MappingSet, name: str | None = None,
               split_templated: bool = True) -> UnfoldedQuery:
    """Unfolding of q over M.  Views with templated heads are split first unless
    ``split_templated`` is off (the Type-1 auxiliary views rely on them)."""
    if split_templated:
        M = normalize(M)
    cqs = as_cqs(q)
    rules: list[UnfoldedRule] = []
    for cq in cqs:
        rules.extend(_unfold_cq(cq, M))
    rules_t = minimize(rules)
    return UnfoldedQuery(name or cqs[0].name, len(cqs[0].head), rules_t,
                         _used_views(rules_t, M.registry))


def atm(u: UnfoldedQuery) -> list[tuple[str | None, ...]]:
    """Answer template matrix: one row of head function symbols per rule."""
    return [r.templates for r in u.rules]


# --- JUCQ translations ----------------------------------------------------------------

@dataclass(frozen=True)
class JUCQTranslation:
    query: CQ
    cover: Cover
    kind: str
    fragments: tuple[CQ, ...]
    fragment_unfoldings: tuple[UnfoldedQuery, ...]
    aux_query: CQ
    aux_mappings: MappingSet
    unfolding: UnfoldedQuery
    origin: dict = field(default_factory=dict, compare=False)

    @property
    def empty(self) -> bool:
        return self.unfolding.empty

    def fragment_rules(self, rule: UnfoldedRule) -> list[list[tuple[int, UnfoldedRule]]]:
        """For a Type-2 rule, the fragment rules behind each of its body atoms."""
        reg = self.unfolding.registry
        out = []
        for i, atom in enumerate(rule.body):
            w = reg[atom.predicate]
            rows = []
            for b in w.branches:
                split_name = b.body[0].predicate
                union_name, idx = self.origin[split_name]
                frag = self._union_index[union_name]
                rows.append((frag, self.fragment_unfoldings[frag].rules[idx]))
            out.append(rows)
        return out

    @property
    def _union_index(self) -> dict[str, int]:
        return {m.source.predicate: i for i, m in enumerate(self.aux_mappings.assertions)}


def _aux_setup(q: CQ, cover: Cover, M: MappingSet):
    cover.validate(q)
    M = normalize(M)
    frags = tuple(make_fragment_query(q, f, cover) for f in cover.fragments)
    unfs = tuple(unfold_ucq(f, M) for f in frags)
    taken = set(M.registry)
    assertions = []
    views = []
    aux_body = []
    for i, (f, u) in enumerate(zip(frags, unfs), 1):
        aux = f"Aux_{i}"
        uname = f"U_{i}"
        while uname in taken:
            uname += "_"
        taken.add(uname)
        args = tuple(f.head)
        aux_body.append(Atom(aux, args))
        if u.empty:
            continue
        cols = tuple(f"c{j}" for j in range(len(args)))
        views.append(SourceView(uname, cols, tuple(Branch(r.head, r.body) for r in u.rules)))
        assertions.append(MappingAssertion(Atom(aux, args), Atom(uname, args)))
    q_aux = CQ(q.name, q.head, tuple(aux_body))
    M_aux = MappingSet(tuple(assertions), M.views + tuple(views))
    return frags, unfs, q_aux, M_aux


def _empty(q: CQ, M: MappingSet) -> UnfoldedQuery:
    return UnfoldedQuery(q.name, len(q.head), (), (), ("empty-fragment",))


def unfold_jucq_type1(q: CQ, cover: Cover, M: MappingSet) -> JUCQTranslation:
    frags, unfs, q_aux, M_aux = _aux_setup(q, cover, M)
    if any(u.empty for u in unfs):
        u = _empty(q, M)
    else:
        u = unfold_ucq(q_aux, M_aux, split_templated=False)
    return JUCQTranslation(q, cover, "type1", frags, unfs, q_aux, M_aux, u)


def unfold_jucq_type2(q: CQ, cover: Cover, M: MappingSet) -> JUCQTranslation:
    frags, unfs, q_aux, M_aux = _aux_setup(q, cover, M)
    if any(u.empty for u in unfs):
        return JUCQTranslation(q, cover, "type2", frags, unfs, q_aux, M_aux, _empty(q, M))
    split_M, origin = split_with_origin(M_aux, always=True)
    W = wrap(split_M)
    u = unfold_ucq(q_aux, W)
    return JUCQTranslation(q, cover, "type2", frags, unfs, q_aux, M_aux, u, origin)


def count_cqs(t: JUCQTranslation | UnfoldedQuery) -> int:
    """Number of CQs a translation evaluates: rules for a UCQ, union branches for a UJUCQ."""
    if isinstance(t, UnfoldedQuery):
        return len(t.rules)
    if t.kind == "type1":
        return sum(len(u.rules) for u in t.fragment_unfoldings)
    reg = t.unfolding.registry
    used = {a.predicate for r in t.unfolding.rules for a in r.body}
    return sum(len(reg[n].branches) for n in used)
