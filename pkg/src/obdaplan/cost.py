"""Cost of evaluating UCQ and UJUCQ translations.

Costs are textbook formulas: every CQ scans its base tables and hash-joins
them, a union is deduplicated by sorting, and the fragments of a JUCQ are
materialized (all but one, which is pipelined) and merge-joined.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import nnls

log = logging.getLogger(__name__)

SLOTS = ("scan", "hash_join", "dedup", "materialize", "merge_join")


@dataclass(frozen=True)
class CostConstants:
    c_t: float = 0.2
    c_j: float = 1.0
    c_u: float = 1.1
    c_m: float = 0.8

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0 or not math.isfinite(v):
                raise ValueError(f"{k} must be a nonnegative number, got {v}")

    def scaled(self, lam: float) -> "CostConstants":
        return CostConstants(*(lam * v for v in asdict(self).values()))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CostConstants":
        data = json.loads(text)
        return cls(**{k: float(data[k]) for k in ("c_t", "c_j", "c_u", "c_m") if k in data})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CostConstants":
        return cls.from_json(Path(path).read_text())


@dataclass
class CostEstimate:
    """Weighted cost per slot; ``units`` holds the same terms before weighting."""
    breakdown: dict[str, float] = field(default_factory=lambda: dict.fromkeys(SLOTS, 0.0))
    units: dict[str, float] = field(default_factory=lambda: dict.fromkeys(SLOTS, 0.0))

    @property
    def total(self) -> float:
        return sum(self.breakdown.values())

    def add(self, slot: str, units: float, weight: float) -> None:
        self.units[slot] += units
        self.breakdown[slot] += units * weight

    def __add__(self, other: "CostEstimate") -> "CostEstimate":
        out = CostEstimate()
        for s in SLOTS:
            out.breakdown[s] = self.breakdown[s] + other.breakdown[s]
            out.units[s] = self.units[s] + other.units[s]
        return out

    def as_dict(self) -> dict:
        return {"total": self.total, "breakdown": dict(self.breakdown), "units": dict(self.units)}


def sort_units(card: float) -> float:
    return 0.0 if card <= 1 else card * math.log2(card)


def cost_cq(table_cards: Sequence[int], card: int, consts: CostConstants = CostConstants()) -> CostEstimate:
    """Scan every base table occurrence, then hash-join: (sum of m_i) * card * c_j."""
    c = CostEstimate()
    c.add("scan", sum(table_cards), consts.c_t)
    c.add("hash_join", len(table_cards) * card, consts.c_j)
    return c


def cost_ucq(cq_costs: Sequence[CostEstimate], card: int,
             consts: CostConstants = CostConstants()) -> CostEstimate:
    c = sum(cq_costs, CostEstimate())
    c.add("dedup", sort_units(card), consts.c_u)
    return c


def pick_pipelined(fragment_cards: Sequence[int], consts: CostConstants = CostConstants()) -> int:
    """Index of the fragment whose materialization would cost most."""
    if not fragment_cards:
        return 0
    return max(range(len(fragment_cards)), key=lambda i: (fragment_cards[i] * consts.c_m, -i))


def cost_jucq(fragment_costs: Sequence[CostEstimate], fragment_cards: Sequence[int], card: int,
              consts: CostConstants = CostConstants()) -> tuple[CostEstimate, int]:
    """Cost of one JUCQ and the index of its pipelined fragment."""
    c = sum(fragment_costs, CostEstimate())
    k = pick_pipelined(fragment_cards, consts)
    c.add("materialize", sum(n for i, n in enumerate(fragment_cards) if i != k), consts.c_m)
    c.add("merge_join", len(fragment_cards) * card, consts.c_j)
    return c, k


def cost_ujucq(jucq_costs: Sequence[CostEstimate], card: int | None,
               consts: CostConstants = CostConstants()) -> CostEstimate:
    """Sum of JUCQ costs; pass ``card`` when projection makes the JUCQs overlap."""
    c = sum(jucq_costs, CostEstimate())
    if card is not None:
        c.add("dedup", sort_units(card), consts.c_u)
    return c


# --- calibration ----------------------------------------------------------------------

FEATURES = ("scan", "join", "dedup", "materialize")
MIN_SAMPLES = 8


def features(units: dict[str, float]) -> list[float]:
    return [units.get("scan", 0.0), units.get("hash_join", 0.0) + units.get("merge_join", 0.0),
            units.get("dedup", 0.0), units.get("materialize", 0.0)]


def calibrate(samples: Sequence[tuple[dict[str, float], float]]) -> CostConstants:
    """Nonnegative least-squares fit of the four constants.

    Each sample pairs the unweighted units of a CostEstimate (or oracle counters
    mapped to the same slots) with an observed cost.
    """
    if len(samples) < MIN_SAMPLES:
        log.warning("only %d calibration samples, keeping default constants", len(samples))
        return CostConstants()
    A = np.array([features(u) for u, _ in samples], dtype=float)
    b = np.array([obs for _, obs in samples], dtype=float)
    if not b.any():
        return CostConstants(0.0, 0.0, 0.0, 0.0)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        log.warning("calibration design matrix is rank deficient, keeping default constants")
        return CostConstants()
    x, _ = nnls(A, b)
    return CostConstants(*(float(v) for v in x))


def counters_to_units(c) -> dict[str, float]:
    """Map oracle counters onto cost slots (joins go to hash_join)."""
    return {"scan": c.tuples_scanned, "hash_join": c.join_probes, "dedup": c.dedup_comparisons,
            "materialize": c.tuples_materialized, "merge_join": 0.0}
