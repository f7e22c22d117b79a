"""weavekit: agentic music-pipeline orchestration.

Typed tool graphs over (modality, format) states, executed against builtin,
mock, or HTTP backends under hardware-tier policies, with content-addressed
artifact caching and critique-and-repair verification.
"""

from .config import Config, load_config
from .errors import (
    CapacityError,
    ConflictError,
    ExecutionFailed,
    IntegrityError,
    NotFoundError,
    StoreError,
    UnplannableError,
    ValidationError,
    WeaveError,
)
from .executor import ExecutionReport, Executor, RepairAction, Verdict, critique, repair
from .planner import PlanGraph, PlanNode, RequestSpec, derive_request_spec, plan, validate_plan
from .policy import (
    HardwareProfile,
    ToolPolicy,
    admit_batches,
    policy_for_tool,
    probe_hardware,
    select_tier,
)
from .registry import ToolRegistry, ToolSpec, default_registry, load_tools_file, validate_spec
from .service import WeaveService
from .store import Artifact, MemoKey, Session, StateStore, Turn

__version__ = "0.1.0"

__all__ = [
    "Artifact",
    "CapacityError",
    "Config",
    "ConflictError",
    "ExecutionFailed",
    "ExecutionReport",
    "Executor",
    "HardwareProfile",
    "IntegrityError",
    "MemoKey",
    "NotFoundError",
    "PlanGraph",
    "PlanNode",
    "RepairAction",
    "RequestSpec",
    "Session",
    "StateStore",
    "StoreError",
    "ToolPolicy",
    "ToolRegistry",
    "ToolSpec",
    "Turn",
    "UnplannableError",
    "ValidationError",
    "Verdict",
    "WeaveError",
    "WeaveService",
    "admit_batches",
    "critique",
    "default_registry",
    "derive_request_spec",
    "load_config",
    "load_tools_file",
    "plan",
    "policy_for_tool",
    "probe_hardware",
    "repair",
    "select_tier",
    "validate_plan",
    "validate_spec",
]
