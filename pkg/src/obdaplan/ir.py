"""Term, atom and query representation.

Datalog with non-nested function symbols: a functional term only ever takes
variables or constants as arguments.  Conjunctive queries, their unions,
covers and fragment queries live here, together with the aliased relational
expressions walked by the cardinality estimator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union


class QuerySyntaxError(ValueError):
    """Raised on malformed query or mapping text; carries line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ArityError(ValueError):
    pass


class CoverError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Constant:
    value: Union[int, str]

    def __str__(self) -> str:
        if isinstance(self.value, str):
            return "'" + self.value.replace("'", "''") + "'"
        return str(self.value)


@dataclass(frozen=True)
class Functional:
    symbol: str
    args: tuple[Union[Variable, Constant], ...]

    def __post_init__(self):
        for a in self.args:
            if not isinstance(a, (Variable, Constant)):
                raise ArityError(f"nested functional term under {self.symbol}")

    def __str__(self) -> str:
        return f"{self.symbol}({','.join(map(str, self.args))})"


Term = Union[Variable, Constant, Functional]


def term_vars(t: Term) -> tuple[Variable, ...]:
    if isinstance(t, Variable):
        return (t,)
    if isinstance(t, Functional):
        return tuple(a for a in t.args if isinstance(a, Variable))
    return ()


def template_of(t: Term) -> str | None:
    """Function symbol of a term, None for plain variables and constants."""
    return t.symbol if isinstance(t, Functional) else None


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> tuple[Variable, ...]:
        return _unique(v for t in self.args for v in term_vars(t))

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(map(str, self.args))})"


@dataclass(frozen=True)
class CQ:
    name: str
    head: tuple[Term, ...]
    body: tuple[Atom, ...]

    def __post_init__(self):
        if not self.body:
            raise ArityError("a conjunctive query needs a non-empty body")
        body_vars = set(self.body_variables())
        for t in self.head:
            for v in term_vars(t):
                if v not in body_vars:
                    raise ArityError(f"head variable {v} does not occur in the body")

    def body_variables(self) -> tuple[Variable, ...]:
        return _unique(v for a in self.body for v in a.variables())

    def answer_variables(self) -> tuple[Variable, ...]:
        return _unique(v for t in self.head for v in term_vars(t))

    def existential_variables(self) -> tuple[Variable, ...]:
        ans = set(self.answer_variables())
        return tuple(v for v in self.body_variables() if v not in ans)

    def __str__(self) -> str:
        head = f"{self.name}({','.join(map(str, self.head))})"
        return f"{head} :- {', '.join(map(str, self.body))}"


@dataclass(frozen=True)
class UCQ:
    cqs: tuple[CQ, ...]

    def __post_init__(self):
        if not self.cqs:
            raise ArityError("a UCQ needs at least one disjunct")
        arities = {len(q.head) for q in self.cqs}
        if len(arities) != 1:
            raise ArityError("disjuncts of a UCQ must share the answer arity")

    @property
    def name(self) -> str:
        return self.cqs[0].name

    def __str__(self) -> str:
        return "\n".join(map(str, self.cqs))


def as_cqs(q: CQ | UCQ) -> tuple[CQ, ...]:
    return q.cqs if isinstance(q, UCQ) else (q,)


def _unique(items: Iterable) -> tuple:
    seen: dict = {}
    for it in items:
        seen.setdefault(it, None)
    return tuple(seen)


# --- alpha-renaming ---------------------------------------------------------

def rename_term(t: Term, ren: dict[Variable, Variable]) -> Term:
    if isinstance(t, Variable):
        return ren.get(t, t)
    if isinstance(t, Functional):
        return Functional(t.symbol, tuple(rename_term(a, ren) for a in t.args))
    return t


def rename_atom(a: Atom, ren: dict[Variable, Variable]) -> Atom:
    return Atom(a.predicate, tuple(rename_term(t, ren) for t in a.args))


def canonical_renaming(terms: Iterable[Term], prefix: str = "v") -> dict[Variable, Variable]:
    """Number variables left to right in order of first occurrence."""
    ren: dict[Variable, Variable] = {}
    for t in terms:
        for v in term_vars(t):
            if v not in ren:
                ren[v] = Variable(f"{prefix}{len(ren)}")
    return ren


def canonical_cq(q: CQ) -> CQ:
    terms = list(q.head) + [t for a in q.body for t in a.args]
    ren = canonical_renaming(terms)
    return CQ(q.name, tuple(rename_term(t, ren) for t in q.head),
              tuple(rename_atom(a, ren) for a in q.body))


def alpha_equivalent(q1: CQ, q2: CQ) -> bool:
    return canonical_cq(q1) == canonical_cq(q2)


# --- text syntax ------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<arrow>:-|:=|<-)
  | (?P<op><=|>=|!=|<>|=|<|>)
  | (?P<num>-?\d+)
  | (?P<str>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),;&.])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "nl":
            tokens.append(Token("nl", chunk, line, col))
            line, col = line + 1, 1
        else:
            if kind != "ws":
                tokens.append(Token(kind, chunk, line, col))
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self, skip_nl: bool = False) -> Token:
        j = self.i
        while skip_nl and self.tokens[j].kind == "nl":
            j += 1
        return self.tokens[j]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def skip_newlines(self) -> None:
        while self.tokens[self.i].kind == "nl":
            self.i += 1

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise QuerySyntaxError(f"expected {want!r}, found {tok.text or tok.kind!r}",
                                   tok.line, tok.column)
        return tok

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        tok = self.tokens[self.i]
        if tok.kind == kind and (text is None or tok.text == text):
            self.i += 1
            return tok
        return None

    def error(self, message: str) -> QuerySyntaxError:
        tok = self.tokens[self.i]
        return QuerySyntaxError(message, tok.line, tok.column)


def parse_simple_term(ts: TokenStream) -> Variable | Constant:
    tok = ts.next()
    if tok.kind == "ident":
        return Variable(tok.text)
    if tok.kind == "num":
        return Constant(int(tok.text))
    if tok.kind == "str":
        return Constant(tok.text[1:-1].replace("''", "'"))
    raise QuerySyntaxError(f"expected a variable or constant, found {tok.text!r}", tok.line, tok.column)


def parse_term(ts: TokenStream) -> Term:
    tok = ts.peek()
    if tok.kind == "ident" and ts.tokens[ts.i + 1].text == "(":
        ts.next()
        ts.expect("punct", "(")
        args = [parse_simple_term(ts)]
        while ts.accept("punct", ","):
            args.append(parse_simple_term(ts))
        ts.expect("punct", ")")
        return Functional(tok.text, tuple(args))
    return parse_simple_term(ts)


def parse_atom(ts: TokenStream) -> Atom:
    name = ts.expect("ident")
    ts.expect("punct", "(")
    args: list[Term] = []
    if not ts.accept("punct", ")"):
        args.append(parse_term(ts))
        while ts.accept("punct", ","):
            args.append(parse_term(ts))
        ts.expect("punct", ")")
    return Atom(name.text, tuple(args))


def _check_arities(cqs: Sequence[CQ], tok_of: dict[int, Token]) -> None:
    preds: dict[str, int] = {}
    symbols: dict[str, int] = {}
    for k, q in enumerate(cqs):
        tok = tok_of[k]
        for a in q.body:
            if a.arity not in (1, 2):
                raise QuerySyntaxError(
                    f"{a.predicate} has arity {a.arity}; concepts take 1 argument, roles 2",
                    tok.line, tok.column)
            if preds.setdefault(a.predicate, a.arity) != a.arity:
                raise ArityError(f"predicate {a.predicate} used with arities "
                                 f"{preds[a.predicate]} and {a.arity}")
            for t in list(a.args) + list(q.head):
                if isinstance(t, Functional):
                    if symbols.setdefault(t.symbol, len(t.args)) != len(t.args):
                        raise ArityError(f"function symbol {t.symbol} used with two arities")


def parse_query(text: str) -> CQ | UCQ:
    """Parse ``q(x,y) :- A(x), P(x,y)``; disjuncts split by ``;`` or new rules."""
    ts = TokenStream(tokenize(text))
    cqs: list[CQ] = []
    starts: dict[int, Token] = {}
    ts.skip_newlines()
    while ts.peek().kind != "eof":
        start = ts.peek()
        head = parse_atom(ts)
        ts.expect("arrow", ":-")
        ts.skip_newlines()
        body = [parse_atom(ts)]
        while ts.accept("punct", ",") or ts.accept("punct", "&"):
            ts.skip_newlines()
            body.append(parse_atom(ts))
        ts.accept("punct", ".")
        try:
            q = CQ(head.predicate, head.args, tuple(body))
        except ArityError as exc:
            raise QuerySyntaxError(str(exc), start.line, start.column) from None
        starts[len(cqs)] = start
        cqs.append(q)
        if not (ts.accept("punct", ";") or ts.peek().kind in ("nl", "eof")):
            raise ts.error(f"unexpected {ts.peek().text!r}")
        ts.skip_newlines()
    if not cqs:
        raise QuerySyntaxError("empty query", 1, 1)
    _check_arities(cqs, starts)
    if len(cqs) == 1:
        return cqs[0]
    try:
        return UCQ(tuple(cqs))
    except ArityError as exc:
        raise QuerySyntaxError(str(exc), starts[0].line, starts[0].column) from None


def print_query(q: CQ | UCQ) -> str:
    return str(q)


# --- covers ------------------------------------------------------------------

@dataclass(frozen=True)
class Cover:
    fragments: tuple[frozenset[int], ...]

    @classmethod
    def of(cls, *blocks: Iterable[int]) -> "Cover":
        return cls(tuple(frozenset(b) for b in blocks))

    def validate(self, q: CQ) -> None:
        atoms = set(range(len(q.body)))
        union: set[int] = set()
        for f in self.fragments:
            if not f:
                raise CoverError("empty fragment")
            if not f <= atoms:
                raise CoverError(f"fragment {sorted(f)} references atoms outside the query")
            union |= f
        if union != atoms:
            raise CoverError("fragments do not cover every atom")
        for i, f in enumerate(self.fragments):
            for j, g in enumerate(self.fragments):
                if i != j and f <= g:
                    raise CoverError("a fragment is contained in another one")

    @property
    def is_trivial(self) -> bool:
        return len(self.fragments) == 1

    def label(self) -> str:
        """1-based atom lists, e.g. ``1,2|3``."""
        return "|".join(",".join(str(i + 1) for i in sorted(f)) for f in self.fragments)

    @classmethod
    def parse(cls, text: str) -> "Cover":
        blocks = []
        for part in text.split("|"):
            blocks.append([int(x) - 1 for x in part.split(",") if x.strip()])
        return cls.of(*blocks)

    def sort_key(self) -> tuple:
        return tuple(tuple(sorted(f)) for f in self.fragments)


def make_fragment_query(q: CQ, frag: Iterable[int], cover: Cover) -> CQ:
    """Fragment query: the atoms of ``frag`` answering q's variables plus shared existentials."""
    cover.validate(q)
    frag = frozenset(frag)
    if frag not in cover.fragments:
        raise CoverError("fragment is not part of the cover")
    index = cover.fragments.index(frag)
    body = tuple(q.body[i] for i in sorted(frag))
    frag_vars = _unique(v for a in body for v in a.variables())
    answers = set(q.answer_variables())
    elsewhere: set[Variable] = set()
    for other in cover.fragments:
        if other != frag:
            for i in other:
                elsewhere.update(q.body[i].variables())
    head_vars = [v for v in q.answer_variables() if v in frag_vars]
    head_vars += [v for v in frag_vars if v not in answers and v in elsewhere]
    return CQ(f"{q.name}_f{index + 1}", tuple(head_vars), body)


def set_partitions(n: int, max_blocks: int) -> Iterator[list[list[int]]]:
    """Restricted-growth enumeration of the partitions of range(n)."""
    def rec(i: int, blocks: list[list[int]]):
        if i == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        if len(blocks) < max_blocks:
            blocks.append([i])
            yield from rec(i + 1, blocks)
            blocks.pop()
    if n == 0:
        return
    yield from rec(0, [])


def enumerate_covers(q: CQ, max_fragments: int) -> list[Cover]:
    if max_fragments < 1:
        raise ValueError("max_fragments must be at least 1")
    parts = [Cover.of(*p) for p in set_partitions(len(q.body), max_fragments)]
    parts.sort(key=lambda c: (len(c.fragments), c.sort_key()))
    return parts


# --- relational expressions ----------------------------------------------------

def view_of_alias(alias: str) -> str:
    """``V#2`` names the second occurrence of view V."""
    return alias.split("#", 1)[0]


@dataclass(frozen=True, order=True)
class QAttr:
    """Qualified attribute tuple ``alias.(a1,...,ak)``."""
    alias: str
    attrs: tuple[str, ...]

    @property
    def view(self) -> str:
        return view_of_alias(self.alias)

    def __str__(self) -> str:
        inner = self.attrs[0] if len(self.attrs) == 1 else "(" + ",".join(self.attrs) + ")"
        return f"{self.alias}.{inner}"


Condition = tuple[QAttr, QAttr]


@dataclass(frozen=True)
class Scan:
    view: str
    alias: str

    def aliases(self) -> tuple[str, ...]:
        return (self.alias,)


@dataclass(frozen=True)
class Join:
    left: "RelExpr"
    right: "RelExpr"
    conditions: tuple[Condition, ...]

    def aliases(self) -> tuple[str, ...]:
        return self.left.aliases() + self.right.aliases()


@dataclass(frozen=True)
class Project:
    child: "RelExpr"
    attrs: tuple[QAttr, ...]
    templates: tuple[str | None, ...] = ()

    def aliases(self) -> tuple[str, ...]:
        return self.child.aliases()


@dataclass(frozen=True)
class Filter:
    child: "RelExpr"
    comparisons: tuple[tuple[QAttr, str, object], ...]

    def aliases(self) -> tuple[str, ...]:
        return self.child.aliases()


@dataclass(frozen=True)
class UnionExpr:
    children: tuple["RelExpr", ...]

    def aliases(self) -> tuple[str, ...]:
        return tuple(a for c in self.children for a in c.aliases())


RelExpr = Union[Scan, Join, Project, Filter, UnionExpr]


def chain(first: Scan, *steps: tuple[Scan, Sequence[Condition]]) -> RelExpr:
    """Left-deep join chain built from a first scan and (scan, conditions) steps."""
    expr: RelExpr = first
    for scan, conds in steps:
        expr = Join(expr, scan, tuple(conds))
    return expr


def resolve_aliases(expr: RelExpr, views: Iterable[str]) -> None:
    """Check every alias prefix names a declared view."""
    known = set(views)
    for alias in expr.aliases():
        if view_of_alias(alias) not in known:
            raise KeyError(f"alias {alias} does not name a known view")


def is_basic(expr: RelExpr) -> bool:
    """Left-deep chain, one equality per join, each referencing one prior alias."""
    if isinstance(expr, Scan):
        return True
    if not isinstance(expr, Join) or not isinstance(expr.right, Scan):
        return False
    if len(expr.conditions) != 1:
        return False
    left, right = expr.conditions[0]
    if right.alias != expr.right.alias or left.alias not in expr.left.aliases():
        return False
    return is_basic(expr.left)


def prefixes(expr: RelExpr) -> list[RelExpr]:
    """[E^(0), E^(1), ..., E] for a left-deep chain."""
    out: list[RelExpr] = []
    cur = expr
    while isinstance(cur, Join):
        out.append(cur)
        cur = cur.left
    out.append(cur)
    return out[::-1]

