"""Exact in-memory evaluation used as ground truth.

Everything is evaluated with set semantics.  Besides answers, plan evaluation
keeps operation counters whose units line up with the cost model: tuples
scanned from base tables, hash-join probes, tuples materialized between
fragments and comparisons spent on sort-based duplicate removal.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ir import CQ, UCQ, Atom, Constant, Functional, Term, Variable, as_cqs
from .mappings import (Comparison, MappingSet, SourceView, TBox, base_tables, merge,
                       normalize, saturate, wrap)


def render(t: Term, env: Mapping[Variable, object]):
    """Ground a term: plain values stay raw, ``f(a,b)`` becomes ``'f:a|b'``."""
    if isinstance(t, Variable):
        return env[t]
    if isinstance(t, Constant):
        return t.value
    vals = [env[a] if isinstance(a, Variable) else a.value for a in t.args]
    return f"{t.symbol}:" + "|".join(map(str, vals))


class DataInstance:
    """Base tables as sets of tuples plus their ordered column names."""

    def __init__(self, schema: Mapping[str, Sequence[str]], tables: Mapping[str, Iterable[tuple]],
                 types: Mapping[str, Sequence[str]] | None = None):
        self.schema = {k: tuple(v) for k, v in schema.items()}
        self.types = {k: tuple(v) for k, v in (types or {}).items()}
        self.tables: dict[str, frozenset] = {}
        for name, cols in self.schema.items():
            rows = frozenset(tuple(r) for r in tables.get(name, ()))
            for r in rows:
                if len(r) != len(cols):
                    raise ValueError(f"row {r} does not match the columns of {name}")
            self.tables[name] = rows
        extra = set(tables) - set(self.schema)
        if extra:
            raise ValueError(f"tables without schema: {sorted(extra)}")

    def card(self, table: str) -> int:
        return len(self.tables[table])

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        manifest = {}
        for name, cols in self.schema.items():
            rows = sorted(self.tables[name], key=lambda r: tuple(map(str, r)))
            types = self.types.get(name) or tuple(
                "int" if rows and isinstance(rows[0][i], int) else "str" for i in range(len(cols)))
            manifest[name] = [[c, t] for c, t in zip(cols, types)]
            with open(d / f"{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(cols)
                w.writerows(rows)
        (d / "schema.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory: str | Path) -> "DataInstance":
        d = Path(directory)
        manifest = json.loads((d / "schema.json").read_text())
        schema, types, tables = {}, {}, {}
        for name, cols in manifest.items():
            schema[name] = [c for c, _ in cols]
            types[name] = [t for _, t in cols]
            conv = [int if t == "int" else str for _, t in cols]
            rows = []
            path = d / f"{name}.csv"
            if path.exists():
                with open(path, newline="") as fh:
                    reader = csv.reader(fh)
                    header = next(reader, None)
                    if header is not None and list(header) != schema[name]:
                        raise ValueError(f"{path}: header does not match the schema")
                    for r in reader:
                        rows.append(tuple(f(v) for f, v in zip(conv, r)))
            tables[name] = rows
        return cls(schema, tables, types)


# --- generic conjunctive evaluation -------------------------------------------------

def _order_atoms(atoms: Sequence[Atom]) -> list[Atom]:
    """Greedy order that joins on a bound variable whenever possible."""
    rest = list(atoms)
    out: list[Atom] = []
    bound: set = set()
    while rest:
        pick = next((a for a in rest if bound & set(a.variables())), rest[0])
        rest.remove(pick)
        out.append(pick)
        bound |= set(pick.variables())
    return out


def join_tuples(atoms: Sequence[Atom], relation, filters: Sequence[Comparison] = (),
                cache: dict | None = None) -> tuple[list[Variable], list[tuple]]:
    """Hash-join the atoms; returns the bound variables and one value tuple per binding.

    Filters are applied while indexing the atom that first binds their variable.
    ``cache`` keeps built indexes across calls, keyed by relation identity.
    """
    slots: list[Variable] = []
    slot_of: dict[Variable, int] = {}
    rows: list[tuple] = [()]
    pending = list(filters)
    for atom in _order_atoms(atoms):
        rel = relation(atom.predicate)
        key_pos, probe_src, new_pos, new_vars, checks = [], [], [], [], []
        local: dict[Variable, int] = {}
        for i, t in enumerate(atom.args):
            if isinstance(t, Constant):
                key_pos.append(i)
                probe_src.append((True, t.value))
            elif t in slot_of:
                key_pos.append(i)
                probe_src.append((False, slot_of[t]))
            elif t in local:
                checks.append((i, new_pos[local[t]]))
            else:
                local[t] = len(new_pos)
                new_pos.append(i)
                new_vars.append(t)
        own = [(new_pos[local[c.var]], c) for c in pending if c.var in local]
        pending = [c for c in pending if c.var not in local]
        pattern = (tuple(key_pos), tuple(new_pos), tuple(checks),
                   tuple((p, c.op, c.value) for p, c in own))
        index = None
        if cache is not None:
            hit = cache.get((id(rel), pattern))
            if hit is not None and hit[0] is rel:
                index = hit[1]
        if index is None:
            index = {}
            for row in rel:
                if checks and any(row[i] != row[j] for i, j in checks):
                    continue
                if own and not all(c.holds(row[p]) for p, c in own):
                    continue
                index.setdefault(tuple(row[i] for i in key_pos), []).append(
                    tuple(row[i] for i in new_pos))
            if cache is not None:
                cache[(id(rel), pattern)] = (rel, index)
        if key_pos:
            out = []
            for r in rows:
                probe = tuple(v if const else r[v] for const, v in probe_src)
                for ext in index.get(probe, ()):
                    out.append(r + ext)
            rows = out
        else:
            exts = index.get((), [])
            rows = [r + e for r in rows for e in exts]
        for v in new_vars:
            slot_of[v] = len(slots)
            slots.append(v)
        if not rows:
            return slots, []
    return slots, rows


def join_atoms(atoms: Sequence[Atom], relation, filters: Sequence[Comparison] = ()) -> list[dict]:
    """All variable bindings satisfying the atoms; ``relation(name)`` yields tuple sets."""
    slots, rows = join_tuples(atoms, relation, filters)
    return [dict(zip(slots, r)) for r in rows]


def _term_getter(t: Term, idx: Mapping[Variable, int]):
    if isinstance(t, Variable):
        i = idx[t]
        return lambda r: r[i]
    if isinstance(t, Constant):
        v = t.value
        return lambda r: v
    prefix = f"{t.symbol}:"
    parts = [(True, idx[a]) if isinstance(a, Variable) else (False, str(a.value)) for a in t.args]
    return lambda r: prefix + "|".join(str(r[p]) if var else p for var, p in parts)


def project(head: Sequence[Term], slots: Sequence[Variable], rows: Iterable[tuple]) -> set:
    """Render head terms for every binding, as ``render`` would."""
    rows = list(rows)
    if not rows:
        return set()
    idx = {v: i for i, v in enumerate(slots)}
    if all(isinstance(t, Variable) for t in head):
        pos = [idx[t] for t in head]
        return {tuple([r[p] for p in pos]) for r in rows}
    getters = [_term_getter(t, idx) for t in head]
    return {tuple([g(r) for g in getters]) for r in rows}


class Oracle:
    """Evaluator bound to one data instance; view results are memoized."""

    def __init__(self, D: DataInstance):
        self.D = D
        self._cache: dict = {}
        self._index: dict = {}

    def relation(self, name: str, registry: Mapping[str, SourceView]) -> frozenset:
        if name in registry:
            return self.eval_view(registry[name], registry)
        if name not in self.D.tables:
            raise KeyError(f"unknown table or view {name}")
        return self.D.tables[name]

    def eval_view(self, v: SourceView, registry: Mapping[str, SourceView] | None = None) -> frozenset:
        registry = registry if registry is not None else {}
        key = (v, self._deps(v, registry))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        out: set = set()
        for b in v.branches:
            self._check_schema(b.body, registry)
            slots, rows = join_tuples(b.body, lambda n: self.relation(n, registry), b.filters,
                                      self._index)
            out |= project(b.head, slots, rows)
        res = frozenset(out)
        self._cache[key] = res
        return res

    @staticmethod
    def _deps(v: SourceView, registry) -> tuple:
        seen: dict[str, SourceView] = {}
        stack = [v]
        while stack:
            cur = stack.pop()
            for b in cur.branches:
                for a in b.body:
                    dep = registry.get(a.predicate)
                    if dep is not None and a.predicate not in seen:
                        seen[a.predicate] = dep
                        stack.append(dep)
        return tuple(sorted(seen.items(), key=lambda kv: kv[0]))

    def _check_schema(self, atoms, registry):
        for a in atoms:
            if a.predicate in registry:
                if registry[a.predicate].arity != a.arity:
                    raise ValueError(f"view {a.predicate} used with arity {a.arity}")
            elif a.predicate in self.D.schema:
                if len(self.D.schema[a.predicate]) != a.arity:
                    raise ValueError(f"table {a.predicate} has {len(self.D.schema[a.predicate])} columns")
            else:
                raise ValueError(f"unknown table or view {a.predicate}")

    def eval_rule(self, head: Sequence[Term], body: Sequence[Atom],
                  registry: Mapping[str, SourceView]) -> frozenset:
        slots, rows = join_tuples(body, lambda n: self.relation(n, registry), (), self._index)
        return frozenset(project(head, slots, rows))

    def eval_unfolding(self, u) -> frozenset:
        reg = u.registry
        out: set = set()
        for r in u.rules:
            out |= self.eval_rule(r.head, r.body, reg)
        return frozenset(out)

    def virtual_abox(self, M: MappingSet) -> frozenset:
        out = set()
        for m in M.assertions:
            view = M.registry[m.source.predicate]
            for row in self.eval_view(view, M.registry):
                env = {}
                ok = True
                for a, val in zip(m.source.args, row):
                    if a in env and env[a] != val:
                        ok = False
                        break
                    env[a] = val
                if ok:
                    out.add((m.target.predicate, tuple(render(t, env) for t in m.target.args)))
        return frozenset(out)


def eval_view(v: SourceView, D: DataInstance, registry: Mapping[str, SourceView] | None = None) -> frozenset:
    return Oracle(D).eval_view(v, registry)


def virtual_abox(M: MappingSet, D: DataInstance) -> frozenset:
    return Oracle(D).virtual_abox(M)


def saturate_abox(abox: Iterable, T: TBox | None) -> frozenset:
    """Forward chaining of atomic inclusions over ground assertions."""
    out = set(abox)
    if T is None:
        return frozenset(out)
    frontier = list(out)
    while frontier:
        nxt = []
        for pred, args in frontier:
            for sub, sup, arity in T.axioms:
                if pred == sub and len(args) == arity and (sup, args) not in out:
                    out.add((sup, args))
                    nxt.append((sup, args))
        frontier = nxt
    return frozenset(out)


def eval_over_abox(q: CQ | UCQ, abox: Iterable) -> frozenset:
    rels: dict[str, set] = {}
    for pred, args in abox:
        rels.setdefault(pred, set()).add(args)
    out = set()
    for cq in as_cqs(q):
        envs = join_atoms(cq.body, lambda n: rels.get(n, ()))
        out |= {tuple(render(t, e) for t in cq.head) for e in envs}
    return frozenset(out)


def certain_answers(q: CQ | UCQ, T: TBox | None, M: MappingSet, D: DataInstance) -> frozenset:
    """Answers over the saturated virtual ABox (complete for atomic inclusions)."""
    return eval_over_abox(q, saturate_abox(virtual_abox(M, D), T))


# --- instrumented plan evaluation -------------------------------------------------------

@dataclass
class OpCounters:
    tuples_scanned: int = 0
    join_probes: int = 0
    tuples_materialized: int = 0
    dedup_comparisons: int = 0

    def __add__(self, other: "OpCounters") -> "OpCounters":
        return OpCounters(self.tuples_scanned + other.tuples_scanned,
                          self.join_probes + other.join_probes,
                          self.tuples_materialized + other.tuples_materialized,
                          self.dedup_comparisons + other.dedup_comparisons)

    def as_dict(self) -> dict:
        return {"tuples_scanned": self.tuples_scanned, "join_probes": self.join_probes,
                "tuples_materialized": self.tuples_materialized,
                "dedup_comparisons": self.dedup_comparisons}


def sort_comparisons(n: int) -> int:
    return 0 if n <= 1 else math.ceil(n * math.log2(n))


def oracle_cost(c: OpCounters, consts=None) -> float:
    from .cost import CostConstants
    k = consts or CostConstants()
    return (c.tuples_scanned * k.c_t + c.join_probes * k.c_j
            + c.dedup_comparisons * k.c_u + c.tuples_materialized * k.c_m)


class PlanEvaluator:
    """Evaluates translations the way the cost model assumes they run."""

    def __init__(self, D: DataInstance, oracle: Oracle | None = None):
        self.D = D
        self.oracle = oracle or Oracle(D)

    def _cq(self, head, body, registry, c: OpCounters) -> frozenset:
        rows = self.oracle.eval_rule(head, body, registry)
        tables = [t for a in body for t in (base_tables(registry, a.predicate)
                                            if a.predicate in registry else [a.predicate])]
        c.tuples_scanned += sum(self.D.card(t) for t in tables)
        c.join_probes += len(tables) * len(rows)
        return rows

    def ucq(self, u, c: OpCounters) -> frozenset:
        reg = u.registry
        out: set = set()
        bag = 0
        for r in u.rules:
            rows = self._cq(r.head, r.body, reg, c)
            bag += len(rows)
            out |= rows
        c.dedup_comparisons += sort_comparisons(bag)
        return frozenset(out)

    def _fragment(self, w: SourceView, reg, c: OpCounters) -> frozenset:
        out: set = set()
        bag = 0
        for b in w.branches:
            rows = self._cq(b.head, b.body, reg, c)
            bag += len(rows)
            out |= rows
        c.dedup_comparisons += sort_comparisons(bag)
        return frozenset(out)

    def jucq(self, rule, reg, c: OpCounters, pipelined: int | None = None) -> frozenset:
        frags = [self._fragment(reg[a.predicate], reg, c) for a in rule.body]
        k = pipelined if pipelined is not None else max(range(len(frags)), key=lambda i: len(frags[i]))
        c.tuples_materialized += sum(len(f) for i, f in enumerate(frags) if i != k)
        local = {f"#frag{i}": f for i, f in enumerate(frags)}
        body = [Atom(f"#frag{i}", a.args) for i, a in enumerate(rule.body)]
        slots, envs = join_tuples(body, local.__getitem__)
        rows = frozenset(project(rule.head, slots, envs))
        c.join_probes += len(frags) * len(rows)
        return rows

    def ujucq(self, t, c: OpCounters, pipelined: Sequence[int | None] | None = None) -> frozenset:
        reg = t.unfolding.registry
        out: set = set()
        bag = 0
        for i, r in enumerate(t.unfolding.rules):
            k = pipelined[i] if pipelined else None
            rows = self.jucq(r, reg, c, k)
            bag += len(rows)
            out |= rows
        if t.query.existential_variables():
            c.dedup_comparisons += sort_comparisons(bag)
        return frozenset(out)


def eval_translation(t, D: DataInstance, oracle: Oracle | None = None):
    """(answers, counters) for an unfolding, a JUCQ translation or a planned candidate."""
    from .unfold import JUCQTranslation, UnfoldedQuery
    ev = PlanEvaluator(D, oracle)
    c = OpCounters()
    pipelined = None
    if hasattr(t, "translation"):
        pipelined = getattr(t, "pipelined", None)
        t = t.translation
    if isinstance(t, UnfoldedQuery):
        return ev.ucq(t, c), c
    if isinstance(t, JUCQTranslation):
        if t.empty:
            return frozenset(), c
        if t.kind == "type1":
            return ev.ucq(t.unfolding, c), c
        return ev.ujucq(t, c, pipelined), c
    raise TypeError(f"cannot evaluate {type(t).__name__}")


# --- independent statistics -------------------------------------------------------------

class _NaiveViews:
    """Nested-loop view evaluation, deliberately independent of join_atoms."""

    def __init__(self, D: DataInstance, reg):
        self.D = D
        self.reg = reg
        self.memo: dict[str, list] = {}

    def rows(self, name: str) -> list:
        if name not in self.reg:
            return list(self.D.tables[name])
        if name in self.memo:
            return self.memo[name]
        out: list = []
        for b in self.reg[name].branches:
            for env in self._loop(list(b.body), {}):
                if all(c.holds(env[c.var]) for c in b.filters):
                    row = tuple(render(t, env) for t in b.head)
                    if row not in out:
                        out.append(row)
        self.memo[name] = out
        return out

    def _loop(self, atoms, env):
        if not atoms:
            yield env
            return
        first, rest = atoms[0], atoms[1:]
        for row in self.rows(first.predicate):
            e = dict(env)
            ok = True
            for t, val in zip(first.args, row):
                if isinstance(t, Constant):
                    ok = t.value == val
                elif t in e:
                    ok = e[t] == val
                else:
                    e[t] = val
                if not ok:
                    break
            if ok:
                yield from self._loop(rest, e)


def brute_stats(M: MappingSet, D: DataInstance, T: TBox | None = None):
    """Recount S1-S3 (plus base-table sizes) with plain nested loops."""
    from .stats import StatsCatalog
    MT = normalize(saturate(M, T) if T is not None else M)
    full = merge(MT, wrap(MT))
    reg = full.registry
    ev = _NaiveViews(D, reg)
    view_card: dict[str, int] = {}
    dist: dict[str, int] = {}
    entries: list[tuple[str, tuple[str, ...], str]] = []
    tables: set[str] = set()
    for m in full.assertions:
        v = reg[m.source.predicate]
        rows = ev.rows(v.name)
        view_card[v.name] = len(rows)
        for t in base_tables(reg, v.name):
            tables.add(t)
        pos = {a: i for i, a in reversed(list(enumerate(m.source.args)))}
        for t in m.target.args:
            if isinstance(t, Functional):
                sym, vars_ = t.symbol, [a for a in t.args if isinstance(a, Variable)]
            elif isinstance(t, Variable):
                sym, vars_ = "_", [t]
            else:
                continue
            if not vars_:
                continue
            idx = [pos[a] for a in vars_]
            attrs = tuple(v.columns[i] for i in idx)
            seen = []
            for r in rows:
                p = tuple(r[i] for i in idx)
                if p not in seen:
                    seen.append(p)
            dist[f"{v.name}[{','.join(attrs)}]"] = len(seen)
            e = (v.name, attrs, sym)
            if e not in entries:
                entries.append(e)
    facing: dict[str, int] = {}
    for a, b in combinations(entries, 2):
        if a[2] != b[2] or len(a[1]) != len(b[1]) or a[:2] == b[:2]:
            continue
        ra = ev.rows(a[0])
        rb = ev.rows(b[0])
        ia = [reg[a[0]].columns.index(c) for c in a[1]]
        ib = [reg[b[0]].columns.index(c) for c in b[1]]
        common = []
        for x in ra:
            px = tuple(x[i] for i in ia)
            if px in common:
                continue
            for y in rb:
                if tuple(y[i] for i in ib) == px:
                    common.append(px)
                    break
        ka = f"{a[0]}[{','.join(a[1])}]"
        kb = f"{b[0]}[{','.join(b[1])}]"
        lo, hi = sorted((ka, kb))
        facing[f"{lo}~{hi}"] = len(common)
    table_card = {t: len(D.tables[t]) for t in tables}
    return StatsCatalog(view_card, dist, facing, table_card)
