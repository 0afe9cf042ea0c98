"""Wisconsin-style benchmark at desk scale.

Tables ``t1..tK`` follow the Wisconsin layout.  A grid point fixes the join
selectivity j, the number m of mappings per property and how many of them (r)
are redundant copies.  Each property gets m views selecting a 20% window of
``onepercent``: Prop1 the window [0,20), the others [20-j, 40-j), so Prop1 and
Prop2 over the same table agree on j% of its rows.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cost import CostConstants
from .ir import CQ, Atom, Constant, Cover, Functional, Variable
from .mappings import Branch, Comparison, MappingAssertion, MappingSet, SourceView
from .oracle import DataInstance, Oracle, eval_translation, oracle_cost
from .planner import plan
from .stats import collect
from .unfold import count_cqs, unfold_jucq_type2, unfold_ucq

log = logging.getLogger(__name__)

COLUMNS = ("unique1", "unique2", "onepercent", "evenOnePercent", "stringu1", "stringu2")
J_VALUES = (5, 10, 15, 20)
MAX_M = 6
CSV_FIELDS = ("j", "m", "r", "atoms", "query_id", "candidate", "est_card", "true_card",
              "est_cost", "oracle_cost", "chosen", "g")


def gen_wisconsin(rows: int = 10_000, tables: int = 12, seed: int = 0) -> DataInstance:
    if rows < 100:
        raise ValueError("at least 100 rows are needed for the percent columns")
    rng = np.random.default_rng(seed)
    schema, data = {}, {}
    for k in range(1, tables + 1):
        u1 = rng.permutation(rows)
        u2 = rng.permutation(rows)
        name = f"t{k}"
        schema[name] = COLUMNS
        data[name] = [(int(a), int(b), int(a % 100), int(2 * (a % 50)), f"s1_{a}", f"s2_{b}")
                      for a, b in zip(u1, u2)]
    types = {name: ("int", "int", "int", "int", "str", "str") for name in schema}
    return DataInstance(schema, data, types)


@dataclass(frozen=True, order=True)
class GridPoint:
    j: int
    m: int
    r: int
    atoms: int = 3

    def __post_init__(self):
        if self.j not in J_VALUES:
            raise ValueError(f"j must be one of {J_VALUES}")
        if not 1 <= self.m <= MAX_M:
            raise ValueError(f"m must be between 1 and {MAX_M}")
        if not 0 <= self.r < self.m:
            raise ValueError("r must satisfy 0 <= r < m")
        if self.atoms not in (3, 4):
            raise ValueError("atoms must be 3 or 4")

    @property
    def unique(self) -> int:
        return self.m - self.r

    @property
    def query_id(self) -> str:
        return f"J{self.j}M{self.m}R{self.r}A{self.atoms}"


def grid(atoms: int = 3, js: Iterable[int] = J_VALUES, ms: Iterable[int] = range(1, MAX_M + 1)) -> list[GridPoint]:
    return [GridPoint(j, m, r, atoms) for j in js for m in ms for r in range(m)]


def tables_needed(atoms: int) -> int:
    return MAX_M * (atoms - 1)


def _window(prop: int, j: int) -> tuple[int, int]:
    return (0, 20) if prop == 1 else (20 - j, 40 - j)


def _table(prop: int, k: int) -> str:
    return f"t{k}" if prop <= 2 else f"t{MAX_M * (prop - 2) + k}"


def gen_grid(p: GridPoint) -> tuple[MappingSet, CQ, Cover]:
    """Mappings, query and designated JUCQ cover for one grid point."""
    u1, u2, op, e, s1, s2 = (Variable(c) for c in ("u1", "u2", "op", "e", "s1", "s2"))
    views, assertions = [], []
    for prop in range(1, p.atoms + 1):
        lo, hi = _window(prop, p.j)
        for k in range(1, p.m + 1):
            src = k if k <= p.unique else 1
            name = f"V{prop}_{k}"
            body = (Atom(_table(prop, src), (u1, u2, op, e, s1, s2)),)
            filt = (Comparison(op, ">=", Constant(lo)), Comparison(op, "<", Constant(hi)))
            views.append(SourceView(name, ("u2", "e", "s1", "s2"), (Branch((u2, e, s1, s2), body, filt),)))
            target = Atom(f"Prop{prop}", (Functional("num", (u2,)), Functional("name", (e, s1, s2))))
            assertions.append(MappingAssertion(target, Atom(name, (u2, e, s1, s2))))
    x = Variable("x")
    ys = [Variable(f"y{i}") for i in range(1, p.atoms + 1)]
    q = CQ(p.query_id, (x, *ys), tuple(Atom(f"Prop{i}", (x, ys[i - 1])) for i in range(1, p.atoms + 1)))
    blocks = [[0, 1]] + [[i] for i in range(2, p.atoms)]
    return MappingSet(tuple(assertions), tuple(views)), q, Cover.of(*blocks)


def npd_surrogate(m: int) -> tuple[int, int]:
    """(UCQ CQ count, Type-2 branch count) for a 4-property query with m mappings each."""
    M, q, _ = gen_grid(GridPoint(5, m, 0, 4))
    cover = Cover.of([0, 1], [2, 3])
    return count_cqs(unfold_ucq(q, M)), count_cqs(unfold_jucq_type2(q, cover, M))


def run_point(p: GridPoint, D: DataInstance, oracle: Oracle, consts: CostConstants,
              max_fragments: int = 3, evaluate: str = "all") -> list[dict]:
    """Plan one grid query and evaluate its candidates with the oracle."""
    M, q, designated = gen_grid(p)
    stats = collect(M, D, oracle=oracle)
    choices = plan(q, M, None, stats, consts, max_fragments)
    rows = []
    results = {}
    for i, c in enumerate(choices):
        label = c.cover.label()
        wanted = evaluate == "all" or i == 0 or c.cover.is_trivial or c.cover == designated
        if wanted:
            answers, counters = eval_translation(c, D, oracle)
            results[label] = (len(answers), oracle_cost(counters, consts))
        true_card, ocost = results.get(label, (None, None))
        rows.append({"j": p.j, "m": p.m, "r": p.r, "atoms": p.atoms, "query_id": p.query_id,
                     "candidate": label, "est_card": c.card.value, "true_card": true_card,
                     "est_cost": round(c.cost.total, 3),
                     "oracle_cost": None if ocost is None else round(ocost, 3),
                     "chosen": i == 0, "g": None})
    ucq = results.get(Cover.of(range(len(q.body))).label())
    jucq = results.get(designated.label())
    g = None
    if ucq and jucq and ucq[1] > 0:
        g = round(1 - jucq[1] / ucq[1], 6)
    for r in rows:
        r["g"] = g
    return rows


@dataclass
class SuiteConfig:
    rows: int = 10_000
    seed: int = 0
    atoms: int = 3
    js: tuple[int, ...] = J_VALUES
    ms: tuple[int, ...] = tuple(range(1, MAX_M + 1))
    max_fragments: int = 3
    evaluate: str = "all"
    consts: CostConstants = CostConstants()

    @classmethod
    def from_json(cls, text: str) -> "SuiteConfig":
        data = json.loads(text)
        consts = CostConstants(**data.pop("consts", {}))
        for k in ("js", "ms"):
            if k in data:
                data[k] = tuple(data[k])
        return cls(consts=consts, **data)


def run_suite(cfg: SuiteConfig, D: DataInstance | None = None) -> list[dict]:
    D = D or gen_wisconsin(cfg.rows, tables_needed(cfg.atoms), cfg.seed)
    oracle = Oracle(D)
    rows: list[dict] = []
    for p in grid(cfg.atoms, cfg.js, cfg.ms):
        try:
            rows.extend(run_point(p, D, oracle, cfg.consts, cfg.max_fragments, cfg.evaluate))
        except Exception as exc:  # keep going, record the failure
            log.error("grid point %s failed: %s", p.query_id, exc)
            rows.append({**dict.fromkeys(CSV_FIELDS), "j": p.j, "m": p.m, "r": p.r,
                         "atoms": p.atoms, "query_id": p.query_id, "candidate": f"error: {exc}"})
    return rows


def write_csv(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in CSV_FIELDS})


def summarize(rows: Sequence[dict]) -> dict:
    """Ranking accuracy and estimate fidelity per query."""
    by_q: dict[str, list[dict]] = {}
    for r in rows:
        by_q.setdefault(r["query_id"], []).append(r)
    within, fidelity, n = 0, 0, 0
    for q, rs in by_q.items():
        costs = [r["oracle_cost"] for r in rs if r["oracle_cost"] is not None]
        chosen = next((r for r in rs if r["chosen"]), None)
        if not costs or chosen is None or chosen["oracle_cost"] is None:
            continue
        n += 1
        best = min(costs)
        within += chosen["oracle_cost"] <= 1.5 * best
        # fidelity is judged on the plain unfolding, whatever plan won
        ucq = next((r for r in rs if "|" not in str(r.get("candidate", "|"))), chosen)
        t, e = ucq["true_card"], ucq["est_card"]
        fidelity += (t == e == 0) or (t > 0 and e > 0 and max(t, e) <= 2 * min(t, e))
    return {"queries": n, "chosen_within_1.5x": within, "estimate_within_2x": fidelity}
