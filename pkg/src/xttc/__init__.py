"""Modular tabular (XTT2) rulebases: inference, analysis, Drools and BPMN export."""

from .analysis import (
    AnalysisError,
    AnalysisReport,
    analyze_table,
    check_completeness,
    check_overlap,
    check_reachability,
    oracle_equivalence,
)
from .bpmn import BpmnDocument, export_bpmn_rulelevel, export_bpmn_tablemap
from .drools import (
    ColumnPlan,
    DroolsBundle,
    ExportError,
    NormalizedFlow,
    emit_decision_table_csv,
    emit_ruleflow_xml,
    emit_workspace_source,
    export_drools,
    normalize_flow,
    plan_decomposition,
)
from .engine import eval_condition, evaluate_table, run_forward, run_goal_driven
from .model import (
    AttributeDef,
    ConditionCell,
    DecisionCell,
    Diagnostic,
    Domain,
    FlowNode,
    Interval,
    Link,
    ModelError,
    RuleRow,
    XTTModel,
    XTTTable,
    XttError,
    load_model,
    parse_model,
    serialize_model,
    validate_model,
)

__version__ = "0.1.0"
