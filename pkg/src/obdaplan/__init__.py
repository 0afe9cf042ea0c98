"""Cost-based planning of query translations for ontology-based data access."""

from .cost import CostConstants, CostEstimate, calibrate
from .estimator import Estimate, EstimationContext, estimate_std, estimate_unfolding, union_lower_bound
from .ir import CQ, UCQ, Atom, Constant, Cover, Functional, Variable, parse_query, print_query
from .mappings import MappingSet, TBox, parse_mappings, parse_tbox, saturate, split, wrap
from .oracle import DataInstance, brute_stats, certain_answers, eval_translation, virtual_abox
from .planner import PlanChoice, emit_sql, plan
from .stats import StatsCatalog, collect
from .unfold import unfold_jucq_type1, unfold_jucq_type2, unfold_ucq

__version__ = "0.1.0"
