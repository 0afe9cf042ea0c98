"""Cardinality estimation for unfoldings.

The recursive estimators ``card``, ``fv`` and ``dist`` work on left-deep join
chains of view scans.  Every division is an integer ceiling.  An unfolding rule
is turned into such a chain by walking its atoms in a fixed order, and the
estimate of a whole unfolding is a sum over rules, corrected by a union ratio
for groups of rules that produce answers with identical templates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import ceil, prod
from typing import Mapping, Sequence

from .ir import Constant, Functional, Join, QAttr, RelExpr, Scan, Variable, prefixes, view_of_alias
from .stats import StatsCatalog
from .unfold import UnfoldedQuery, UnfoldedRule, atm

DEFAULT_UNION_LIMIT = 8


class EstimationError(ValueError):
    pass


def ceil_div(a: int, b: int) -> int:
    if b == 0:
        if a == 0:
            return 0
        raise EstimationError(f"division of {a} by zero (inconsistent statistics)")
    return -(-a // b)


def _ceil(x: Fraction) -> int:
    return ceil(x)


@dataclass
class Estimate:
    value: int
    flags: tuple[str, ...] = ()
    per_rule: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        return {"value": self.value, "flags": list(self.flags), "per_rule": list(self.per_rule)}


def _join_parts(e: Join) -> tuple[RelExpr, Scan, QAttr, QAttr]:
    if not isinstance(e.right, Scan) or not e.conditions:
        raise EstimationError("expression is not a left-deep chain")
    left, right = e.conditions[0]
    if left.alias == e.right.alias:
        left, right = right, left
    return e.left, e.right, left, right


class EstimationContext:
    """Memoizing evaluator of card/fv/dist against one statistics catalog."""

    def __init__(self, stats: StatsCatalog):
        self.stats = stats
        self._card: dict = {}
        self._fv: dict = {}
        self._dist: dict = {}

    # base statistics
    def s1(self, alias: str) -> int:
        return self.stats.lookup_view_card(view_of_alias(alias))

    def s2(self, a: QAttr) -> int:
        return self.stats.lookup_dist(a.view, a.attrs)

    def s3(self, a: QAttr, b: QAttr) -> int:
        return self.stats.lookup_facing((a.view, a.attrs), (b.view, b.attrs))

    # estimators
    def card(self, e: RelExpr) -> int:
        if isinstance(e, Scan):
            return self.s1(e.alias)
        if e in self._card:
            return self._card[e]
        left, w, x, y = _join_parts(e)
        f = self.fv(e)
        if isinstance(left, Scan):
            out = ceil_div(f * self.s1(left.alias) * self.s1(w.alias), self.s2(x) * self.s2(y))
        else:
            out = ceil_div(f * self.card(left) * self.s1(w.alias), self.dist(left, x) * self.s2(y))
        self._card[e] = out
        return out

    def fv(self, e: Join) -> int:
        if e in self._fv:
            return self._fv[e]
        left, _, x, y = _join_parts(e)
        base = self.s3(x, y)
        out = base if isinstance(left, Scan) else ceil_div(base * self.dist(left, x), self.s2(x))
        self._fv[e] = out
        return out

    def dist(self, e: RelExpr, a: QAttr) -> int:
        if a.alias not in e.aliases():
            raise EstimationError(f"unknown attribute {a}")
        if isinstance(e, Scan):
            return self.s2(a)
        key = (e, a)
        if key in self._dist:
            return self._dist[key]
        sub = jp(e, a)
        if sub is not None:
            f = self.fv(sub)
            out = min(ceil_div(f * self.card(e), self.card(sub)), f)
        else:
            s2 = self.s2(a)
            out = min(ceil_div(s2 * self.card(e), self.s1(a.alias)), s2)
        self._dist[key] = out
        return out

    def extend_joins(self, e: RelExpr) -> int:
        """card of the spanning chain times the probability of every extra condition."""
        basic, extra = split_conditions(e)
        p = Fraction(1)
        for x, y in extra:
            s2 = self.s2(x)
            p *= Fraction(self.s3(x, y), s2) if s2 else 0
        return _ceil(self.card(basic) * p)

    def estimate_projection(self, e: RelExpr, attrs: Sequence[QAttr]) -> int:
        basic, _ = split_conditions(e)
        total = self.extend_joins(e)
        if not attrs:
            return min(total, 1)
        return min(total, prod(self.dist(basic, a) for a in attrs))


def jc(e: RelExpr, q: QAttr) -> frozenset[QAttr]:
    """Attributes equated with q through the join conditions of e."""
    if q.alias not in e.aliases():
        raise EstimationError(f"unknown attribute {q}")
    conds = [c for p in prefixes(e) if isinstance(p, Join) for c in p.conditions]
    cls = {q}
    changed = True
    while changed:
        changed = False
        for a, b in conds:
            if a in cls and b not in cls:
                cls.add(b)
                changed = True
            elif b in cls and a not in cls:
                cls.add(a)
                changed = True
    return frozenset(cls)


def jp(e: RelExpr, q: QAttr) -> Join | None:
    """Longest prefix whose final join brings in an attribute equivalent to q."""
    cls = jc(e, q)
    for p in reversed(prefixes(e)):
        if isinstance(p, Join):
            _, _, _, rhs = _join_parts(p)
            if rhs in cls:
                return p
    return None


def split_conditions(e: RelExpr) -> tuple[RelExpr, list[tuple[QAttr, QAttr]]]:
    """Keep the first condition of every join; return the rest as leftovers."""
    if isinstance(e, Scan):
        return e, []
    if not isinstance(e, Join):
        raise EstimationError(f"unsupported expression {type(e).__name__}")
    left, extra = split_conditions(e.left)
    conds = list(e.conditions)
    if not conds:
        raise EstimationError("cross products are not supported")
    first = conds[0]
    if first[0].alias == e.right.alias:
        first = (first[1], first[0])
    for x, y in conds[1:]:
        if x.alias == e.right.alias:
            x, y = y, x
        extra.append((x, y))
    return Join(left, e.right, (first,)), extra


# --- standard baseline --------------------------------------------------------------

def _std_card(ctx: EstimationContext, e: RelExpr) -> Fraction:
    if isinstance(e, Scan):
        return Fraction(ctx.s1(e.alias))
    left, w, x, y = _join_parts(e)
    c = _std_card(ctx, left)
    d = _std_dist(ctx, left, x, c)
    if d == 0 or ctx.s2(y) == 0:
        return Fraction(0)
    return min(d, ctx.s2(y)) * c / d * Fraction(ctx.s1(w.alias), ctx.s2(y))


def _std_dist(ctx: EstimationContext, e: RelExpr, a: QAttr, card: Fraction) -> Fraction:
    return min(Fraction(ctx.s2(a)), card)


def estimate_std(e: RelExpr, stats: StatsCatalog | EstimationContext,
                 attrs: Sequence[QAttr] = ()) -> int:
    """Textbook estimate: facing values taken as the smaller distinct count."""
    ctx = stats if isinstance(stats, EstimationContext) else EstimationContext(stats)
    basic, extra = split_conditions(e)
    c = _std_card(ctx, basic)
    for x, y in extra:
        m = max(ctx.s2(x), ctx.s2(y))
        c = c / m if m else Fraction(0)
    if attrs:
        c = min(c, prod(_std_dist(ctx, basic, a, c) for a in attrs))
    return _ceil(c)


# --- unfolding rules as expressions ----------------------------------------------------

@dataclass
class RuleExpr:
    expr: RelExpr
    answer_attrs: list[QAttr]
    attr_of: dict = field(default_factory=dict)   # (atom index, variable) -> QAttr
    flags: list[str] = field(default_factory=list)
    has_projection: bool = False


def _atom_attrs(rule: UnfoldedRule, i: int, alias: str, cols: Sequence[str],
                flags: list[str]) -> dict[Variable, QAttr]:
    qatom = rule.query.body[i]
    body = rule.body[i]
    target = rule.targets[i]
    out: dict[Variable, QAttr] = {}
    for qa, t in zip(qatom.args, target.args):
        if not isinstance(qa, Variable):
            flags.append("constant-ignored")
            continue
        inner = t.args if isinstance(t, Functional) else (t,)
        idx = []
        for a in inner:
            if isinstance(a, Constant):
                continue
            if a in body.args:
                idx.append(body.args.index(a))
        if not idx:
            flags.append("constant-ignored")
            continue
        if qa in out:
            flags.append("repeated-variable-ignored")
            continue
        out[qa] = QAttr(alias, tuple(cols[j] for j in idx))
    return out


def rule_expression(rule: UnfoldedRule, columns: Mapping[str, Sequence[str]]) -> RuleExpr:
    """Left-deep chain for an unfolding rule, atoms visited in first-occurrence order."""
    q = rule.query
    if q is None:
        raise EstimationError("rule carries no source query")
    flags: list[str] = []
    n = len(rule.body)
    aliases = [f"{a.predicate}#{i + 1}" for i, a in enumerate(rule.body)]
    attrs = []
    for i in range(n):
        cols = columns[rule.body[i].predicate]
        attrs.append(_atom_attrs(rule, i, aliases[i], cols, flags))
    order = [0]
    seen_vars = set(attrs[0])
    while len(order) < n:
        nxt = next((i for i in range(n) if i not in order and seen_vars & set(attrs[i])), None)
        if nxt is None:
            raise EstimationError(f"query {q.name} has a disconnected join graph")
        order.append(nxt)
        seen_vars |= set(attrs[nxt])
    anchor: dict[Variable, QAttr] = {}
    expr: RelExpr = Scan(rule.body[0].predicate, aliases[0])
    anchor.update({v: a for v, a in attrs[0].items()})
    attr_of = {(0, v): a for v, a in attrs[0].items()}
    for i in order[1:]:
        conds = []
        for v, a in attrs[i].items():
            attr_of[(i, v)] = a
            if v in anchor:
                conds.append((anchor[v], a))
            else:
                anchor[v] = a
        expr = Join(expr, Scan(rule.body[i].predicate, aliases[i]), tuple(conds))
    answer = [anchor[v] for v in q.answer_variables() if v in anchor]
    return RuleExpr(expr, answer, attr_of, flags, bool(q.existential_variables()))


def estimate_rule(rule: UnfoldedRule, ctx: EstimationContext,
                  columns: Mapping[str, Sequence[str]], baseline: bool = False) -> tuple[int, list[str]]:
    re_ = rule_expression(rule, columns)
    attrs = re_.answer_attrs if re_.has_projection else []
    if baseline:
        return estimate_std(re_.expr, ctx, attrs), re_.flags
    if re_.has_projection:
        return ctx.estimate_projection(re_.expr, attrs), re_.flags
    return ctx.extend_joins(re_.expr), re_.flags


# --- unions ---------------------------------------------------------------------------

def union_lower_bound(distincts: Sequence[int], pairwise: Mapping[tuple[int, int], int] | Sequence[Sequence[int]],
                      limit: int = DEFAULT_UNION_LIMIT) -> tuple[int, tuple[str, ...]]:
    """Inclusion-exclusion with every k-way intersection taken as the min of its pairs."""
    n = len(distincts)
    if n == 0:
        return 0, ()
    if n > limit:
        return max(distincts), ("union-limit-exceeded",)

    def pair(i: int, j: int) -> int:
        if isinstance(pairwise, Mapping):
            return pairwise.get((i, j), pairwise.get((j, i), 0))
        return pairwise[i][j]

    total = 0
    for k in range(1, n + 1):
        sign = 1 if k % 2 else -1
        for J in combinations(range(n), k):
            if k == 1:
                inter = distincts[J[0]]
            else:
                inter = min(pair(a, b) for a, b in combinations(J, 2))
            total += sign * inter
    return max(max(distincts), min(total, sum(distincts))), ()


def _group_ratio(rules: Sequence[UnfoldedRule], ests: Sequence[int], ctx: EstimationContext,
                 columns) -> tuple[int, list[str]]:
    q = rules[0].query
    answer = set(q.answer_variables())
    flags: list[str] = []
    shared = [i for i, a in enumerate(q.body)
              if set(a.variables()) <= answer and len({r.body[i].predicate for r in rules}) == 1]
    if not shared:
        return sum(ests), ["no-shared-view"]
    rest = [i for i in range(len(q.body)) if i not in shared]
    key = sorted({v for i in rest for v in q.body[i].variables() if v in answer}, key=lambda v: v.name)
    if not key:
        return max(ests), ["empty-union-key"]
    if len(key) > 1:
        return sum(ests), ["multi-variable-union-key"]
    y = key[0]
    key_atom = next(i for i in rest if y in q.body[i].variables())
    branches: dict[str, tuple[int, QAttr]] = {}
    for r in rules:
        re_ = rule_expression(r, columns)
        a = re_.attr_of.get((key_atom, y))
        if a is None:
            return sum(ests), ["union-key-unresolved"]
        basic, _ = split_conditions(re_.expr)
        d = min(ctx.extend_joins(re_.expr), ctx.dist(basic, a))
        view = r.body[key_atom].predicate
        if view not in branches or branches[view][0] < d:
            branches[view] = (d, a)
    items = list(branches.values())
    ds = [d for d, _ in items]
    pw: dict[tuple[int, int], int] = {}
    for (i, (di, ai)), (j, (dj, aj)) in combinations(enumerate(items), 2):
        s2i, s2j = ctx.s2(ai), ctx.s2(aj)
        if not s2i or not s2j:
            pw[(i, j)] = 0
            continue
        v = _ceil(Fraction(ctx.s3(ai, aj) * di * dj, s2i * s2j))
        pw[(i, j)] = min(v, di, dj)
    u, f = union_lower_bound(ds, pw)
    flags.extend(f)
    if sum(ds) == 0:
        return 0, flags
    return _ceil(Fraction(u, sum(ds)) * sum(ests)), flags


def estimate_unfolding(u: UnfoldedQuery, stats: StatsCatalog | EstimationContext,
                       baseline: bool = False) -> Estimate:
    """Estimated number of distinct answers of an unfolding."""
    ctx = stats if isinstance(stats, EstimationContext) else EstimationContext(stats)
    columns = {v.name: v.columns for v in u.views}
    per_rule: list[int] = []
    flags: list[str] = []
    for r in u.rules:
        e, f = estimate_rule(r, ctx, columns, baseline)
        per_rule.append(e)
        flags.extend(f)
    rows = atm(u)
    groups: dict[tuple, list[int]] = {}
    for i, row in enumerate(rows):
        groups.setdefault(row, []).append(i)
    total = 0
    for idx in groups.values():
        if len(idx) == 1 or baseline:
            total += sum(per_rule[i] for i in idx)
            continue
        v, f = _group_ratio([u.rules[i] for i in idx], [per_rule[i] for i in idx], ctx, columns)
        total += v
        flags.extend(f)
    return Estimate(total, tuple(dict.fromkeys(flags)), tuple(per_rule))
