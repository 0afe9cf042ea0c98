"""Cover enumeration, costing and SQL emission.

Every cover of the query yields one candidate translation.  The one-block cover
is the plain UCQ unfolding; the others are Type-2 JUCQ translations whose
fragments join on raw columns.  Cardinalities come from the estimator over
``wrap(M_T)`` and costs from the cost model; the cheapest candidate wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

from .cost import CostConstants, CostEstimate, cost_cq, cost_jucq, cost_ucq, cost_ujucq
from .estimator import Estimate, EstimationContext, estimate_rule, estimate_unfolding
from .ir import (CQ, Atom, Constant, Cover, Functional, Term, Variable, enumerate_covers,
                 template_of)
from .mappings import MappingSet, SourceView, TBox, base_tables, normalize, saturate, wrap
from .stats import StatsCatalog
from .unfold import (JUCQTranslation, UnfoldedQuery, UnfoldedRule, count_cqs, unfold_jucq_type2,
                     unfold_ucq)

EXHAUSTIVE_ATOM_LIMIT = 5
DIALECTS = ("ansi", "postgres")


@dataclass
class PlanChoice:
    cover: Cover
    kind: str                      # "UCQ" or "UJUCQ"
    translation: UnfoldedQuery | JUCQTranslation
    card: Estimate
    cost: CostEstimate
    n_cqs: int
    pipelined: list[int] = field(default_factory=list)
    flags: tuple[str, ...] = ()

    @property
    def unfolding(self) -> UnfoldedQuery:
        t = self.translation
        return t if isinstance(t, UnfoldedQuery) else t.unfolding

    def sql(self, dialect: str = "ansi", schema: Mapping[str, Sequence[str]] | None = None) -> str:
        return emit_sql(self, dialect, schema)

    def as_dict(self) -> dict:
        return {"cover": self.cover.label(), "kind": self.kind, "n_cqs": self.n_cqs,
                "card": self.card.as_dict(), "cost": self.cost.as_dict(),
                "pipelined": list(self.pipelined), "flags": list(self.flags)}


class _Costing:
    """Shared state for costing every candidate of one query."""

    def __init__(self, q: CQ, MT: MappingSet, stats: StatsCatalog, consts: CostConstants):
        self.q = q
        self.MT = MT
        self.W = wrap(MT)
        self.stats = stats
        self.consts = consts
        self.ctx = EstimationContext(stats)
        self.raw_cols = {v.name: v.columns for v in MT.views}
        self.uq_wrap = unfold_ucq(q, self.W)
        self.card_q = estimate_unfolding(self.uq_wrap, self.ctx)
        self._cq_cost: dict[UnfoldedRule, CostEstimate] = {}
        self._frag_wrap: dict[tuple, UnfoldedQuery] = {}

    def raw_rule_cost(self, r: UnfoldedRule) -> CostEstimate:
        key = UnfoldedRule(r.head, r.body)
        if key not in self._cq_cost:
            reg = self.MT.registry
            tables = [t for a in r.body for t in base_tables(reg, a.predicate)]
            card, _ = estimate_rule(r, self.ctx, self.raw_cols)
            self._cq_cost[key] = cost_cq([self.stats.lookup_table_card(t) for t in tables],
                                         card, self.consts)
        return self._cq_cost[key]

    def fragment_wrap(self, f: CQ) -> UnfoldedQuery:
        key = (tuple(f.head), f.body)
        if key not in self._frag_wrap:
            self._frag_wrap[key] = unfold_ucq(f, self.W)
        return self._frag_wrap[key]

    def ucq(self) -> PlanChoice:
        u = unfold_ucq(self.q, self.MT)
        cover = Cover.of(range(len(self.q.body)))
        if u.empty:
            return PlanChoice(cover, "UCQ", u, Estimate(0), CostEstimate(), 0, [], ("zero-answers",))
        c = cost_ucq([self.raw_rule_cost(r) for r in u.rules], self.card_q.value, self.consts)
        return PlanChoice(cover, "UCQ", u, self.card_q, c, count_cqs(u), [], self.card_q.flags)

    def ujucq(self, cover: Cover) -> PlanChoice:
        t = unfold_jucq_type2(self.q, cover, self.MT)
        if t.empty:
            return PlanChoice(cover, "UJUCQ", t, Estimate(0), CostEstimate(), 0, [], ("zero-answers",))
        flags = list(self.card_q.flags)
        costs: list[CostEstimate] = []
        pipelined: list[int] = []
        for r in t.unfolding.rules:
            c, k, f = self._jucq(t, r)
            costs.append(c)
            pipelined.append(k)
            flags.extend(f)
        dedup_card = self.card_q.value if self.q.existential_variables() else None
        total = cost_ujucq(costs, dedup_card, self.consts)
        return PlanChoice(cover, "UJUCQ", t, self.card_q, total, count_cqs(t), pipelined,
                          tuple(dict.fromkeys(flags)))

    def _jucq(self, t: JUCQTranslation, r: UnfoldedRule):
        flags: list[str] = []
        frag_costs, frag_cards = [], []
        wanted: dict[Variable, str | None] = {}
        for j, (frag, pieces) in enumerate(zip(t.fragments, t.fragment_rules(r))):
            sig = tuple(template_of(a) for a in r.targets[j].args)
            for v, s in zip(frag.head, sig):
                wanted[v] = s
            uf = self.fragment_wrap(frag)
            sub = tuple(x for x in uf.rules if x.templates == sig)
            est = estimate_unfolding(UnfoldedQuery(frag.name, len(frag.head), sub, uf.views), self.ctx)
            flags.extend(est.flags)
            frag_cards.append(est.value)
            frag_costs.append(cost_ucq([self.raw_rule_cost(fr) for _, fr in pieces], est.value,
                                       self.consts))
        sub = tuple(x for x in self.uq_wrap.rules
                    if all(template_of(x.binding(v)) == s for v, s in wanted.items()))
        est = estimate_unfolding(UnfoldedQuery(self.q.name, len(self.q.head), sub, self.uq_wrap.views),
                                 self.ctx)
        flags.extend(est.flags)
        c, k = cost_jucq(frag_costs, frag_cards, est.value, self.consts)
        return c, k, flags

    def candidate(self, cover: Cover) -> PlanChoice:
        return self.ucq() if cover.is_trivial else self.ujucq(cover)


def _rank_key(p: PlanChoice) -> tuple:
    return (p.cost.total, p.n_cqs, p.cover.sort_key())


def _greedy_covers(q: CQ, costing: _Costing, max_fragments: int) -> list[Cover]:
    """Merge blocks pairwise, cheapest merge first, starting from singletons."""
    n = len(q.body)
    blocks = [[i] for i in range(n)]
    out: list[Cover] = [Cover.of(range(n))]
    while len(blocks) > 2:
        best = None
        for a, b in combinations(range(len(blocks)), 2):
            merged = [blk for k, blk in enumerate(blocks) if k not in (a, b)] + [sorted(blocks[a] + blocks[b])]
            cover = Cover.of(*merged)
            if not _fragments_connected(q, cover):
                continue
            cost = costing.candidate(cover).cost.total
            if best is None or (cost, cover.sort_key()) < best[0]:
                best = ((cost, cover.sort_key()), merged, cover)
        if best is None:
            break
        blocks = best[1]
        if len(blocks) <= max_fragments:
            out.append(best[2])
    return out


def _connected(atoms: Sequence[Atom]) -> bool:
    if not atoms:
        return False
    reached = set(atoms[0].variables())
    left = list(atoms[1:])
    while left:
        nxt = [a for a in left if reached & set(a.variables())]
        if not nxt:
            return False
        for a in nxt:
            reached.update(a.variables())
            left.remove(a)
    return True


def _fragments_connected(q: CQ, cover: Cover) -> bool:
    return all(_connected([q.body[i] for i in sorted(f)]) for f in cover.fragments)


def plan(q: CQ, M: MappingSet, T: TBox | None, stats: StatsCatalog,
         consts: CostConstants | None = None, max_fragments: int = 3) -> list[PlanChoice]:
    """All candidate translations of q, cheapest first."""
    consts = consts or CostConstants()
    MT = normalize(saturate(M, T) if T is not None else M)
    costing = _Costing(q, MT, stats, consts)
    if len(q.body) > EXHAUSTIVE_ATOM_LIMIT:
        covers = _greedy_covers(q, costing, max_fragments)
    else:
        covers = enumerate_covers(q, max_fragments)
    # fragments that are cross products cannot be estimated and never pay off
    covers = [c for c in covers if c.is_trivial or _fragments_connected(q, c)]
    choices = [costing.candidate(c) for c in covers]
    choices.sort(key=_rank_key)
    return choices


# --- SQL ------------------------------------------------------------------------------

def _quote(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _literal(v) -> str:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return str(v)
    return "'" + str(v).replace("'", "''") + "'"


def _template_sql(t: Functional, cols: Mapping[Variable, str], dialect: str) -> str:
    parts = [_literal(f"{t.symbol}:")]
    for i, a in enumerate(t.args):
        if i:
            parts.append(_literal("|"))
        parts.append(cols[a] if isinstance(a, Variable) else _literal(a.value))
    if dialect == "postgres":
        return "CONCAT(" + ", ".join(parts) + ")"
    return " || ".join(parts)


def _term_sql(t: Term, cols: Mapping[Variable, str], dialect: str) -> str:
    if isinstance(t, Variable):
        return cols[t]
    if isinstance(t, Constant):
        return _literal(t.value)
    return _template_sql(t, cols, dialect)


def _select(head: Sequence[Term], body: Sequence[Atom], filters, out_cols: Sequence[str],
            columns_of, dialect: str) -> str:
    cols: dict[Variable, str] = {}
    where: list[str] = []
    froms = []
    for i, a in enumerate(body):
        alias = f"a{i}"
        froms.append(f"{_quote(a.predicate)} AS {alias}")
        names = columns_of(a.predicate, a.arity)
        for t, c in zip(a.args, names):
            ref = f"{alias}.{_quote(c)}"
            if isinstance(t, Constant):
                where.append(f"{ref} = {_literal(t.value)}")
            elif isinstance(t, Variable):
                if t in cols:
                    where.append(f"{cols[t]} = {ref}")
                else:
                    cols[t] = ref
    for c in filters:
        op = "<>" if c.op == "!=" else c.op
        where.append(f"{cols[c.var]} {op} {_literal(c.value.value)}")
    items = ", ".join(f"{_term_sql(t, cols, dialect)} AS {_quote(n)}" for t, n in zip(head, out_cols))
    sql = f"SELECT DISTINCT {items} FROM {', '.join(froms)}"
    if where:
        sql += " WHERE " + " AND ".join(where)
    return sql


def emit_sql(p: PlanChoice | UnfoldedQuery, dialect: str = "ansi",
             schema: Mapping[str, Sequence[str]] | None = None) -> str:
    """SQL text: views as CTEs, templates applied only in the outermost SELECT."""
    if dialect not in DIALECTS:
        raise ValueError(f"unsupported SQL dialect {dialect!r}; choose one of {', '.join(DIALECTS)}")
    u = p if isinstance(p, UnfoldedQuery) else p.unfolding
    reg = u.registry
    schema = schema or {}
    out_cols = [f"x{i}" for i in range(u.arity)]
    if u.empty:
        items = ", ".join(f"NULL AS {_quote(c)}" for c in out_cols) or "NULL"
        return f"SELECT {items} WHERE 1 = 0;\n"

    def columns_of(name: str, arity: int) -> Sequence[str]:
        if name in reg:
            return reg[name].columns
        return schema.get(name) or [f"c{i}" for i in range(arity)]

    order: list[SourceView] = []
    seen: set[str] = set()

    def visit(name: str):
        if name in seen or name not in reg:
            return
        seen.add(name)
        for b in reg[name].branches:
            for a in b.body:
                visit(a.predicate)
        order.append(reg[name])

    for r in u.rules:
        for a in r.body:
            visit(a.predicate)
    ctes = []
    for v in order:
        branches = [_select(b.head, b.body, b.filters, v.columns, columns_of, dialect) for b in v.branches]
        ctes.append(f"{_quote(v.name)} AS (\n  " + "\n  UNION\n  ".join(branches) + "\n)")
    main = "\nUNION\n".join(_select(r.head, r.body, (), out_cols, columns_of, dialect) for r in u.rules)
    text = ("WITH " + ",\n".join(ctes) + "\n") if ctes else ""
    return text + main + ";\n"


def report(choices: Sequence[PlanChoice]) -> str:
    return json.dumps({"candidates": [c.as_dict() for c in choices],
                       "chosen": choices[0].cover.label() if choices else None}, indent=2)
