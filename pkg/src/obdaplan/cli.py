"""Command line entry point: ``obdaplan <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .bench import SuiteConfig, gen_wisconsin, run_suite, summarize, write_csv
from .cost import CostConstants, calibrate
from .estimator import EstimationContext, estimate_unfolding
from .ir import CQ, Cover, parse_query
from .mappings import TBox, normalize, parse_mappings, parse_tbox, saturate, wrap
from .oracle import DataInstance, eval_translation, oracle_cost
from .planner import emit_sql, plan, report
from .stats import StatsCatalog, collect
from .unfold import unfold_jucq_type2, unfold_ucq


def _read(path: str) -> str:
    return Path(path).read_text()


def _query(path: str) -> CQ:
    q = parse_query(_read(path))
    if not isinstance(q, CQ):
        raise SystemExit("expected a single conjunctive query")
    return q


def _tbox(path: str | None) -> TBox | None:
    return parse_tbox(_read(path)) if path else None


def cmd_collect_stats(a) -> int:
    M = parse_mappings(_read(a.mappings))
    cat = collect(M, DataInstance.load(a.data), _tbox(a.tbox))
    cat.save(a.out)
    return 0


def cmd_estimate(a) -> int:
    q = _query(a.query)
    M = parse_mappings(_read(a.mappings))
    T = _tbox(a.tbox)
    MT = normalize(saturate(M, T) if T else M)
    stats = StatsCatalog.load(a.stats)
    ctx = EstimationContext(stats)
    W = wrap(MT)
    out: dict = {"query": q.name}
    u = unfold_ucq(q, W)
    out["estimate"] = estimate_unfolding(u, ctx).as_dict()
    if a.baseline:
        out["baseline"] = estimate_unfolding(u, ctx, baseline=True).as_dict()
    if a.cover:
        t = unfold_jucq_type2(q, Cover.parse(a.cover), MT)
        out["cover"] = a.cover
        out["fragments"] = [estimate_unfolding(unfold_ucq(f, W), ctx).as_dict() for f in t.fragments]
    print(json.dumps(out, indent=2))
    return 0


def cmd_calibrate(a) -> int:
    samples = []
    with open(a.samples, newline="") as fh:
        for row in csv.DictReader(fh):
            units = {k: float(row.get(k) or 0) for k in ("scan", "hash_join", "dedup",
                                                         "materialize", "merge_join")}
            samples.append((units, float(row["observed"])))
    consts = calibrate(samples)
    consts.save(a.out)
    print(consts.to_json())
    return 0


def cmd_plan(a) -> int:
    q = _query(a.query)
    M = parse_mappings(_read(a.mappings))
    stats = StatsCatalog.load(a.stats)
    consts = CostConstants.load(a.consts) if a.consts else CostConstants()
    choices = plan(q, M, _tbox(a.tbox), stats, consts, a.max_fragments)
    schema = DataInstance.load(a.data).schema if a.data else None
    text = report(choices)
    if a.report:
        Path(a.report).write_text(text + "\n")
    else:
        print(text)
    if a.emit_sql:
        d = Path(a.emit_sql)
        d.mkdir(parents=True, exist_ok=True)
        for i, c in enumerate(choices):
            (d / f"{i:02d}_{c.cover.label().replace('|', '_').replace(',', '-')}.sql").write_text(
                emit_sql(c, a.dialect, schema))
    return 0


def cmd_eval(a) -> int:
    req = json.loads(_read(a.plan))
    q = _query(req["query"])
    M = parse_mappings(_read(req["mappings"]))
    T = _tbox(req.get("tbox"))
    MT = saturate(M, T) if T else M
    cover = Cover.parse(req.get("cover", ",".join(str(i + 1) for i in range(len(q.body)))))
    t = unfold_ucq(q, MT) if cover.is_trivial else unfold_jucq_type2(q, cover, MT)
    answers, counters = eval_translation(t, DataInstance.load(a.data))
    print(json.dumps({"answers": len(answers), "counters": counters.as_dict(),
                      "oracle_cost": oracle_cost(counters)}, indent=2))
    return 0


def cmd_bench_gen(a) -> int:
    gen_wisconsin(a.rows, a.tables, a.seed).save(a.out)
    return 0


def cmd_bench_run(a) -> int:
    cfg = SuiteConfig.from_json(_read(a.config)) if a.config else SuiteConfig()
    D = DataInstance.load(a.data) if a.data else None
    rows = run_suite(cfg, D)
    write_csv(rows, a.out)
    print(json.dumps(summarize(rows), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obdaplan", description="Cost-based OBDA query translation planner")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("collect-stats", help="collect mapping statistics from a data directory")
    s.add_argument("--mappings", required=True)
    s.add_argument("--tbox")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_collect_stats)

    s = sub.add_parser("estimate", help="estimate the answer count of a query")
    s.add_argument("--query", required=True)
    s.add_argument("--mappings", required=True)
    s.add_argument("--tbox")
    s.add_argument("--stats", required=True)
    s.add_argument("--cover")
    s.add_argument("--baseline", action="store_true")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("calibrate", help="fit cost constants from a CSV of samples")
    s.add_argument("--samples", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("plan", help="rank candidate translations")
    s.add_argument("--query", required=True)
    s.add_argument("--mappings", required=True)
    s.add_argument("--tbox")
    s.add_argument("--stats", required=True)
    s.add_argument("--consts")
    s.add_argument("--max-fragments", type=int, default=3)
    s.add_argument("--emit-sql")
    s.add_argument("--dialect", default="ansi")
    s.add_argument("--data", help="data directory, used only for column names in SQL")
    s.add_argument("--report")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("eval", help="evaluate a translation with the in-memory oracle")
    s.add_argument("--plan", required=True, help="JSON with query, mappings, optional tbox and cover")
    s.add_argument("--data", required=True)
    s.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="Wisconsin-style benchmark")
    bsub = b.add_subparsers(dest="bench_command", required=True)
    s = bsub.add_parser("gen")
    s.add_argument("--rows", type=int, default=10_000)
    s.add_argument("--tables", type=int, default=12)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench_gen)
    s = bsub.add_parser("run")
    s.add_argument("--config")
    s.add_argument("--data")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench_run)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
