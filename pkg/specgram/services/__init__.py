"""Services layer for specgram."""
from .run_config import RunConfig, EntrySpec, ReplaySpec, evaluate_q, check_q_range, parse_grid
from .run_service import RunService, RunOutcome

__all__ = ["RunConfig", "EntrySpec", "ReplaySpec", "evaluate_q", "check_q_range", "parse_grid",
           "RunService", "RunOutcome"]
