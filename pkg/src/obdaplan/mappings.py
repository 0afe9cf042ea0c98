"""Mapping assertions and the transformations defined on them.

A mapping ``L(f(x),g(y)) <- V(x,y)`` populates ontology predicate L from the
source view V.  Views are small non-recursive Datalog programs: each branch is
a conjunction over base tables (or other views) with comparison filters, and a
view with several branches is their union.  Branch heads may carry function
symbols, which is how unfoldings are turned back into views.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

from .ir import (Atom, Constant, Functional, QuerySyntaxError, Term, TokenStream,
                 Variable, parse_atom, parse_simple_term, template_of, term_vars,
                 tokenize)

OPS = ("=", "<", "<=", ">", ">=", "!=")


@dataclass(frozen=True)
class Comparison:
    var: Variable
    op: str
    value: Constant

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unsupported comparison operator {self.op}")

    def holds(self, x) -> bool:
        v = self.value.value
        try:
            return {"=": x == v, "!=": x != v, "<": x < v, "<=": x <= v,
                    ">": x > v, ">=": x >= v}[self.op]
        except TypeError:
            return self.op == "!="

    def __str__(self) -> str:
        return f"{self.var} {self.op} {self.value}"


@dataclass(frozen=True)
class Branch:
    head: tuple[Term, ...]
    body: tuple[Atom, ...]
    filters: tuple[Comparison, ...] = ()

    def __post_init__(self):
        bound = {v for a in self.body for v in a.variables()}
        for t in self.head:
            for v in term_vars(t):
                if v not in bound:
                    raise ValueError(f"head variable {v} is not bound by the branch body")
        for c in self.filters:
            if c.var not in bound:
                raise ValueError(f"filter variable {c.var} is not bound by the branch body")

    @property
    def templated(self) -> bool:
        return any(isinstance(t, Functional) for t in self.head)


@dataclass(frozen=True)
class SourceView:
    """A named view; one branch is a select-project-join query, several a union."""
    name: str
    columns: tuple[str, ...]
    branches: tuple[Branch, ...]

    def __post_init__(self):
        if not self.branches:
            raise ValueError(f"view {self.name} has no definition")
        for b in self.branches:
            if len(b.head) != len(self.columns):
                raise ValueError(f"view {self.name}: branches project different arities")

    @property
    def arity(self) -> int:
        return len(self.columns)

    @property
    def is_union(self) -> bool:
        return len(self.branches) > 1

    @property
    def templated(self) -> bool:
        return any(b.templated for b in self.branches)


Signature = tuple[str, tuple]


@dataclass(frozen=True)
class MappingAssertion:
    target: Atom
    source: Atom

    def __post_init__(self):
        tvars = {v for t in self.target.args for v in term_vars(t)}
        svars = set(self.source.args)
        if any(not isinstance(a, Variable) for a in self.source.args):
            raise ValueError("source atoms take variables only")
        if tvars != svars:
            raise ValueError(f"target and source variables differ in {self}")

    @property
    def signature(self) -> Signature:
        return (self.target.predicate, tuple(template_of(t) for t in self.target.args))

    def __str__(self) -> str:
        return f"{self.target} <- {self.source}"


def signature_key(sig: Signature) -> tuple:
    return (sig[0], tuple("" if s is None else s for s in sig[1]))


def format_signature(sig: Signature) -> str:
    return f"{sig[0]}({','.join('_' if s is None else s for s in sig[1])})"


@dataclass(frozen=True)
class MappingSet:
    assertions: tuple[MappingAssertion, ...]
    views: tuple[SourceView, ...] = ()

    def __post_init__(self):
        uniq = tuple(OrderedDict.fromkeys(self.assertions))
        object.__setattr__(self, "assertions", uniq)
        seen: dict[str, SourceView] = {}
        for v in self.views:
            if v.name in seen and seen[v.name] != v:
                raise ValueError(f"two different definitions for view {v.name}")
            seen[v.name] = v
        object.__setattr__(self, "views", tuple(seen.values()))

    @cached_property
    def registry(self) -> dict[str, SourceView]:
        return {v.name: v for v in self.views}

    def view(self, name: str) -> SourceView | None:
        return self.registry.get(name)

    def signatures(self) -> list[Signature]:
        return list(OrderedDict.fromkeys(m.signature for m in self.assertions))

    def source_views(self) -> list[SourceView]:
        names = OrderedDict.fromkeys(m.source.predicate for m in self.assertions)
        return [self.registry[n] for n in names]

    def with_assertions(self, assertions: Iterable[MappingAssertion],
                        extra_views: Iterable[SourceView] = ()) -> "MappingSet":
        return MappingSet(tuple(assertions), self.views + tuple(extra_views))

    def __len__(self) -> int:
        return len(self.assertions)

    def __iter__(self):
        return iter(self.assertions)

    def __str__(self) -> str:
        return format_mappings(self)


def merge(*sets: MappingSet) -> MappingSet:
    return MappingSet(tuple(m for s in sets for m in s.assertions),
                      tuple(v for s in sets for v in s.views))


def base_tables(M: MappingSet | Mapping[str, SourceView], view: str) -> list[str]:
    """Base tables scanned to evaluate ``view``, one entry per occurrence."""
    reg = M.registry if isinstance(M, MappingSet) else M
    out: list[str] = []
    for b in reg[view].branches:
        for a in b.body:
            if a.predicate in reg:
                out.extend(base_tables(reg, a.predicate))
            else:
                out.append(a.predicate)
    return out


# --- TBox --------------------------------------------------------------------

@dataclass(frozen=True)
class TBox:
    axioms: tuple[tuple[str, str, int], ...] = ()

    def __post_init__(self):
        for sub, sup, arity in self.axioms:
            if arity not in (1, 2):
                raise ValueError(f"axiom {sub} <= {sup} has arity {arity}")


def parse_tbox(text: str) -> TBox:
    axioms = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[1] not in ("subClassOf", "subPropertyOf"):
            if any(p.lower() in ("exists", "some", "inverse") for p in parts):
                raise QuerySyntaxError("existential or inverse axioms are not supported", n, 1)
            raise QuerySyntaxError(f"cannot read axiom {line!r}", n, 1)
        sub, kind, sup = parts
        for name in (sub, sup):
            if not name.isidentifier():
                raise QuerySyntaxError(f"only atomic inclusions are supported, got {name!r}", n, 1)
        axioms.append((sub, sup, 1 if kind == "subClassOf" else 2))
    return TBox(tuple(axioms))


def format_tbox(T: TBox) -> str:
    kinds = {1: "subClassOf", 2: "subPropertyOf"}
    return "".join(f"{a} {kinds[k]} {b}\n" for a, b, k in T.axioms)


# --- mapping file syntax -------------------------------------------------------

def _parse_body(ts: TokenStream, fresh: list[int]) -> tuple[list[Atom], list[Comparison]]:
    atoms: list[Atom] = []
    filters: list[Comparison] = []
    while True:
        ts.skip_newlines()
        tok = ts.peek()
        nxt = ts.tokens[ts.i + 1]
        if tok.kind == "ident" and nxt.text == "(":
            a = parse_atom(ts)
            args = []
            for t in a.args:
                if isinstance(t, Variable) and t.name == "_":
                    fresh[0] += 1
                    t = Variable(f"_{fresh[0]}")
                args.append(t)
            atoms.append(Atom(a.predicate, tuple(args)))
        elif tok.kind == "ident" and nxt.kind == "op":
            var = Variable(ts.next().text)
            op = ts.next().text
            op = "!=" if op == "<>" else op
            val = parse_simple_term(ts)
            if not isinstance(val, Constant):
                raise QuerySyntaxError("comparisons take a constant on the right", tok.line, tok.column)
            filters.append(Comparison(var, op, val))
        else:
            raise QuerySyntaxError(f"unexpected {tok.text or tok.kind!r} in view body", tok.line, tok.column)
        if not (ts.accept("punct", "&") or ts.accept("punct", ",")):
            return atoms, filters


def parse_mappings(text: str) -> MappingSet:
    """Read view definitions (``V(x) := T(x,_) & x > 3``) and assertions (``A(f(x)) <- V(x)``)."""
    ts = TokenStream(tokenize(text))
    branches: "OrderedDict[str, list[tuple[Branch, tuple]]]" = OrderedDict()
    assertions: list[tuple[MappingAssertion, object]] = []
    fresh = [0]
    ts.skip_newlines()
    while ts.peek().kind != "eof":
        start = ts.peek()
        head = parse_atom(ts)
        arrow = ts.expect("arrow")
        if arrow.text == ":=":
            body, filters = _parse_body(ts, fresh)
            try:
                br = Branch(head.args, tuple(body), tuple(filters))
            except ValueError as exc:
                raise QuerySyntaxError(str(exc), start.line, start.column) from None
            branches.setdefault(head.predicate, []).append((br, (start.line, start.column)))
        elif arrow.text == "<-":
            src = parse_atom(ts)
            try:
                assertions.append((MappingAssertion(head, src), (start.line, start.column)))
            except ValueError as exc:
                raise QuerySyntaxError(str(exc), start.line, start.column) from None
        else:
            raise QuerySyntaxError("expected ':=' or '<-'", arrow.line, arrow.column)
        if ts.peek().kind not in ("nl", "eof"):
            raise ts.error(f"unexpected {ts.peek().text!r}")
        ts.skip_newlines()
    views = []
    for name, brs in branches.items():
        arities = {len(b.head) for b, _ in brs}
        if len(arities) != 1:
            line, col = brs[0][1]
            raise QuerySyntaxError(f"view {name}: branches project different arities", line, col)
        views.append(SourceView(name, _columns_for([b for b, _ in brs]), tuple(b for b, _ in brs)))
    known = {v.name: v for v in views}
    for m, (line, col) in assertions:
        v = known.get(m.source.predicate)
        if v is None:
            raise QuerySyntaxError(f"undefined source view {m.source.predicate}", line, col)
        if v.arity != m.source.arity:
            raise QuerySyntaxError(f"view {v.name} has arity {v.arity}", line, col)
    return MappingSet(tuple(m for m, _ in assertions), tuple(views))


def _columns_for(branches: list[Branch]) -> tuple[str, ...]:
    first = branches[0].head
    names = [t.name for t in first if isinstance(t, Variable)]
    if len(names) == len(first) and len(set(names)) == len(names) and not any(
            b.templated for b in branches):
        return tuple(names)
    return tuple(f"c{i}" for i in range(len(first)))


def format_mappings(M: MappingSet) -> str:
    lines = []
    for v in M.views:
        for b in v.branches:
            body = [str(a) for a in b.body] + [str(c) for c in b.filters]
            lines.append(f"{v.name}({','.join(map(str, b.head))}) := {' & '.join(body)}")
    lines.extend(str(m) for m in M.assertions)
    return "\n".join(lines) + "\n"


# --- the algebra -------------------------------------------------------------------

def restrict(M: MappingSet, sig: Signature) -> MappingSet:
    return MappingSet(tuple(m for m in M.assertions if m.signature == sig), M.views)


def _flat_args(target: Atom) -> list[Term]:
    out: list[Term] = []
    for t in target.args:
        if isinstance(t, Functional):
            out.extend(t.args)
        else:
            out.append(t)
    return out


def _fresh_name(base: str, taken: set[str]) -> str:
    name = base
    k = 1
    while name in taken:
        k += 1
        name = f"{base}_{k}"
    taken.add(name)
    return name


def wrap(M: MappingSet, prefix: str = "W_") -> MappingSet:
    """One assertion per signature over a fresh union view ``W_<k>``."""
    M = normalize(M)
    taken = set(M.registry) | {m.source.predicate for m in M.assertions}
    groups: "OrderedDict[Signature, list[MappingAssertion]]" = OrderedDict()
    for m in M.assertions:
        groups.setdefault(m.signature, []).append(m)
    out: list[MappingAssertion] = []
    new_views: list[SourceView] = []
    for k, sig in enumerate(sorted(groups, key=signature_key), 1):
        members = groups[sig]
        width = len(_flat_args(members[0].target))
        cols = tuple(f"v{i}" for i in range(width))
        name = _fresh_name(f"{prefix}{k}", taken)
        view = SourceView(name, cols, tuple(
            Branch(tuple(_flat_args(m.target)), (m.source,)) for m in members))
        fresh = iter(Variable(c) for c in cols)
        args: list[Term] = []
        for t in members[0].target.args:
            if isinstance(t, Functional):
                args.append(Functional(t.symbol, tuple(next(fresh) for _ in t.args)))
            else:
                args.append(next(fresh))
        new_views.append(view)
        out.append(MappingAssertion(Atom(sig[0], tuple(args)), Atom(name, tuple(Variable(c) for c in cols))))
    return MappingSet(tuple(out), M.views + tuple(new_views))


def _substitute(t: Term, theta: dict[Variable, Term]) -> Term:
    if isinstance(t, Variable):
        return theta.get(t, t)
    if isinstance(t, Functional):
        args = []
        for a in t.args:
            b = theta.get(a, a) if isinstance(a, Variable) else a
            if isinstance(b, Functional):
                raise ValueError("split would nest function symbols")
            args.append(b)
        return Functional(t.symbol, tuple(args))
    return t


def split(M: MappingSet) -> MappingSet:
    """Distribute per-branch head templates of union sources into separate assertions."""
    return split_with_origin(M)[0]


def normalize(M: MappingSet) -> MappingSet:
    """split(M) when some asserted source view builds templates itself, else M unchanged.

    The unfolder only resolves templates against mapping targets, so templates
    inside view heads must be moved there first.
    """
    if any((v := M.view(m.source.predicate)) is not None and v.templated for m in M.assertions):
        return split(M)
    return M


def split_with_origin(M: MappingSet, always: bool = False) -> tuple[MappingSet, dict[str, tuple[str, int]]]:
    """split(M) plus, for each new view, the (union view, branch index) it came from.

    With ``always`` every union source is split, templated or not.
    """
    taken = set(M.registry)
    out: list[MappingAssertion] = []
    new_views: list[SourceView] = []
    origin: dict[str, tuple[str, int]] = {}
    for m in M.assertions:
        src = M.view(m.source.predicate)
        if src is None or not (src.templated or always):
            out.append(m)
            continue
        for i, br in enumerate(src.branches, 1):
            theta = dict(zip(m.source.args, br.head))
            target = Atom(m.target.predicate, tuple(_substitute(t, theta) for t in m.target.args))
            cols = []
            for t in br.head:
                for v in term_vars(t):
                    if v not in cols:
                        cols.append(v)
            name = _fresh_name(f"{src.name}_{i}", taken)
            view = SourceView(name, tuple(f"c{j}" for j in range(len(cols))),
                              (Branch(tuple(cols), br.body, br.filters),))
            new_views.append(view)
            origin[name] = (src.name, i - 1)
            out.append(MappingAssertion(target, Atom(name, tuple(cols))))
    return MappingSet(tuple(out), M.views + tuple(new_views)), origin


def saturate(M: MappingSet, T: TBox) -> MappingSet:
    """T-mapping: close M under the atomic inclusions of T."""
    result = list(M.assertions)
    present = set(result)
    frontier = list(result)
    while frontier:
        nxt = []
        for m in frontier:
            for sub, sup, arity in T.axioms:
                if m.target.predicate == sub and m.target.arity == arity:
                    new = MappingAssertion(Atom(sup, m.target.args), m.source)
                    if new not in present:
                        present.add(new)
                        result.append(new)
                        nxt.append(new)
        frontier = nxt
    return MappingSet(tuple(result), M.views)


def equiv(M1: MappingSet, M2: MappingSet, D) -> bool:
    """Do M1 and M2 expose the same virtual ABox over instance D?"""
    from .oracle import virtual_abox
    return virtual_abox(M1, D) == virtual_abox(M2, D)
