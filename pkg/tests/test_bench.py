import csv
import json

import pytest

from obdaplan.bench import (CSV_FIELDS, GridPoint, SuiteConfig, gen_grid, gen_wisconsin, grid,
                            npd_surrogate, run_point, run_suite, summarize, tables_needed, write_csv)
from obdaplan.cost import CostConstants
from obdaplan.oracle import Oracle


@pytest.fixture(scope="module")
def small():
    return gen_wisconsin(rows=300, tables=tables_needed(3), seed=2)


def test_wisconsin_layout():
    D = gen_wisconsin(rows=200, tables=2, seed=7)
    assert set(D.schema) == {"t1", "t2"}
    rows = D.tables["t1"]
    assert len(rows) == 200
    assert sorted(r[0] for r in rows) == list(range(200))
    assert all(r[2] == r[0] % 100 and r[3] == 2 * (r[0] % 50) for r in rows)
    assert gen_wisconsin(rows=200, tables=2, seed=7).tables == D.tables
    with pytest.raises(ValueError):
        gen_wisconsin(rows=50)


def test_grid_point_validation():
    assert GridPoint(10, 3, 1).query_id == "J10M3R1A3"
    assert GridPoint(10, 3, 1).unique == 2
    for bad in ((7, 2, 0), (5, 0, 0), (5, 7, 0), (5, 2, 2), (5, 2, -1)):
        with pytest.raises(ValueError):
            GridPoint(*bad)
    with pytest.raises(ValueError):
        GridPoint(5, 2, 0, atoms=5)


def test_grid_size():
    assert len(grid()) == 84
    assert len({p.query_id for p in grid()}) == 84


def test_gen_grid_structure():
    M, q, cover = gen_grid(GridPoint(15, 4, 2))
    assert len(M.assertions) == 12
    assert len(q.body) == 3 and len(q.head) == 4
    assert cover.label() == "1,2|3"
    sources = {v.branches[0].body[0].predicate for v in M.views if v.name.startswith("V1_")}
    assert sources == {"t1", "t2"}


@pytest.mark.parametrize("m", [2, 3, 4])
def test_npd_surrogate(m):
    ucq, type2 = npd_surrogate(m)
    assert ucq == m ** 4
    assert type2 == 2 * m * m


def test_run_point(small):
    rows = run_point(GridPoint(20, 2, 1), small, Oracle(small), CostConstants())
    assert sum(r["chosen"] for r in rows) == 1
    assert len({r["true_card"] for r in rows}) == 1
    assert all(set(r) == set(CSV_FIELDS) for r in rows)


def test_summarize_and_csv(small, tmp_path):
    cfg = SuiteConfig(rows=300, js=(5,), ms=(1, 2))
    rows = run_suite(cfg, small)
    s = summarize(rows)
    assert s["queries"] == 3
    assert 0 <= s["chosen_within_1.5x"] <= 3
    write_csv(rows, tmp_path / "out.csv")
    with open(tmp_path / "out.csv") as fh:
        back = list(csv.DictReader(fh))
    assert len(back) == len(rows) and tuple(back[0]) == CSV_FIELDS


def test_summarize_rules():
    rows = [{"query_id": "a", "oracle_cost": 10, "chosen": True, "true_card": 5, "est_card": 9},
            {"query_id": "a", "oracle_cost": 8, "chosen": False, "true_card": 5, "est_card": 5},
            {"query_id": "b", "oracle_cost": 30, "chosen": True, "true_card": 0, "est_card": 0},
            {"query_id": "b", "oracle_cost": 10, "chosen": False, "true_card": 0, "est_card": 0}]
    assert summarize(rows) == {"queries": 2, "chosen_within_1.5x": 1, "estimate_within_2x": 2}


def test_suite_config_from_json():
    cfg = SuiteConfig.from_json(json.dumps({"rows": 500, "js": [5, 10], "consts": {"c_t": 2.0}}))
    assert cfg.rows == 500 and cfg.js == (5, 10) and cfg.consts.c_t == 2.0
    assert cfg.ms == SuiteConfig().ms
