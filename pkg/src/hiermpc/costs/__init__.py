from .frame import SiteFrame, canonical_frame
from .tasks import (
    TASK_IDS, DerivedSite, TaskCost, assemble_task_cost, eval_task_cost, j_move, j_upright,
    resolve_derived,
)
from .terms import KINDS, CostTerm, eval_term, quat_distance, term_value

__all__ = [
    "KINDS", "TASK_IDS", "CostTerm", "DerivedSite", "SiteFrame", "TaskCost", "assemble_task_cost",
    "canonical_frame", "eval_task_cost", "eval_term", "j_move", "j_upright", "quat_distance",
    "resolve_derived", "term_value",
]
