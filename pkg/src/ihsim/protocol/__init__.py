"""Protocol state machines and the frame-clocked scenario runner."""

from .messages import (
    BROADCAST, EhState, EveState, IrState, MsgKind, ProtocolMessage, RfiParams, WptState,
)
from .scenario import EhSpec, EveSpec, FaultSpec, IrSpec, Scenario, golden_scenario, load_scenario
from .simulator import (
    EhNode, EveNode, IrNode, Medium, ScenarioRun, SeedPayload, WptNode,
    eh_step, ir_step, run_scenario, wpt_step,
)
from .trace import TRACE_COLUMNS, Trace, TraceRecord

__all__ = [
    "BROADCAST", "EhState", "EveState", "IrState", "MsgKind", "ProtocolMessage", "RfiParams",
    "WptState", "EhSpec", "EveSpec", "FaultSpec", "IrSpec", "Scenario", "golden_scenario",
    "load_scenario", "EhNode", "EveNode", "IrNode", "Medium", "ScenarioRun", "SeedPayload",
    "WptNode", "eh_step", "ir_step", "run_scenario", "wpt_step", "TRACE_COLUMNS", "Trace",
    "TraceRecord",
]
