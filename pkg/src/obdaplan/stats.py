"""Mapping-aware statistics.

S1 is the size of every source view, S2 the number of distinct values of each
template-argument tuple, and S3 the number of values two such tuples share when
their templates use the same function symbol.  Plain-variable arguments are
treated as a template named ``_``.  Base-table sizes are kept as well because
the cost model scans tables.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .ir import Functional, Variable
from .mappings import MappingSet, TBox, base_tables, merge, normalize, saturate, wrap


class MissingStatistic(KeyError):
    def __str__(self) -> str:
        return f"missing statistic {self.args[0]}"


def attr_key(view: str, attrs) -> str:
    return f"{view}[{','.join(attrs)}]"


def pair_key(a: str, b: str) -> str:
    lo, hi = sorted((a, b))
    return f"{lo}~{hi}"


@dataclass
class StatsCatalog:
    view_card: dict[str, int] = field(default_factory=dict)
    dist_proj: dict[str, int] = field(default_factory=dict)
    facing: dict[str, int] = field(default_factory=dict)
    table_card: dict[str, int] = field(default_factory=dict)

    def lookup_view_card(self, view: str) -> int:
        try:
            return self.view_card[view]
        except KeyError:
            raise MissingStatistic(view) from None

    def lookup_table_card(self, table: str) -> int:
        try:
            return self.table_card[table]
        except KeyError:
            raise MissingStatistic(table) from None

    def lookup_dist(self, view: str, attrs) -> int:
        key = attr_key(view, attrs)
        try:
            return self.dist_proj[key]
        except KeyError:
            raise MissingStatistic(key) from None

    def lookup_facing(self, a: tuple[str, tuple], b: tuple[str, tuple]) -> int:
        ka, kb = attr_key(*a), attr_key(*b)
        if ka == kb:
            return self.lookup_dist(*a)
        key = pair_key(ka, kb)
        try:
            return self.facing[key]
        except KeyError:
            raise MissingStatistic(key) from None

    def check(self) -> None:
        for key, n in self.dist_proj.items():
            view = key.split("[", 1)[0]
            if view in self.view_card and n > self.view_card[view]:
                raise ValueError(f"{key} = {n} exceeds |{view}|")
        for key, n in self.facing.items():
            a, b = key.split("~")
            for k in (a, b):
                if k in self.dist_proj and n > self.dist_proj[k]:
                    raise ValueError(f"{key} = {n} exceeds {k}")
        for table in (self.view_card, self.dist_proj, self.facing, self.table_card):
            if any(v < 0 for v in table.values()):
                raise ValueError("negative statistic")

    def to_json(self) -> str:
        return json.dumps({"view_card": self.view_card, "dist_proj": self.dist_proj,
                           "facing": self.facing, "table_card": self.table_card},
                          sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StatsCatalog":
        data = json.loads(text)
        cat = cls(dict(data.get("view_card", {})), dict(data.get("dist_proj", {})),
                  dict(data.get("facing", {})), dict(data.get("table_card", {})))
        cat.check()
        return cat

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "StatsCatalog":
        return cls.from_json(Path(path).read_text())


def template_positions(M: MappingSet):
    """(view, column tuple, symbol) for every template argument tuple in M."""
    out = []
    for m in M.assertions:
        view = M.registry[m.source.predicate]
        col_of = {}
        for a, c in zip(m.source.args, view.columns):
            col_of.setdefault(a, c)
        for t in m.target.args:
            if isinstance(t, Functional):
                vs = [a for a in t.args if isinstance(a, Variable)]
                sym = t.symbol
            elif isinstance(t, Variable):
                vs, sym = [t], "_"
            else:
                continue
            if vs:
                out.append((view.name, tuple(col_of[v] for v in vs), sym))
    return list(dict.fromkeys(out))


def collect(M: MappingSet, D, T: TBox | None = None, oracle=None) -> StatsCatalog:
    """Exact statistics over saturate(M,T) together with its wrap.

    ``oracle`` lets several collections over the same instance share view results.
    """
    from .oracle import Oracle
    MT = normalize(saturate(M, T) if T is not None else M)
    full = merge(MT, wrap(MT))
    reg = full.registry
    ev = oracle or Oracle(D)
    cat = StatsCatalog()
    projections: dict[tuple, set] = {}
    tables: set[str] = set()
    for view in full.source_views():
        rows = ev.eval_view(view, reg)
        cat.view_card[view.name] = len(rows)
        tables.update(base_tables(reg, view.name))
    positions = template_positions(full)
    by_symbol: dict[tuple, list] = defaultdict(list)
    for vname, attrs, sym in positions:
        key = (vname, attrs)
        if key not in projections:
            view = reg[vname]
            idx = [view.columns.index(c) for c in attrs]
            projections[key] = {tuple(r[i] for i in idx) for r in ev.eval_view(view, reg)}
            cat.dist_proj[attr_key(vname, attrs)] = len(projections[key])
        group = by_symbol[(sym, len(attrs))]
        if key not in group:
            group.append(key)
    for group in by_symbol.values():
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                cat.facing[pair_key(attr_key(*a), attr_key(*b))] = len(projections[a] & projections[b])
    cat.table_card = {t: D.card(t) for t in sorted(tables)}
    cat.check()
    return cat
