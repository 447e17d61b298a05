"""Translation of an XTT2 model into Drools-style artifacts.

Three texts come out of one model: a ruleflow XML (structure only), a
spreadsheet decision-table CSV holding the rules, and a ``Workspace`` Java
class holding every attribute behind getters and setters.
"""

from __future__ import annotations

import csv
import io
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace

from .model import (
    JOIN,
    SPLIT,
    TABLE_REF,
    ConditionCell,
    Diagnostic,
    FlowNode,
    Interval,
    Link,
    Value,
    XTTModel,
    XTTTable,
    XttError,
    error,
    validate_model,
)


class ExportError(XttError):
    pass


# output column operators, in the order they are laid out per source column
EQ_TEMPLATE = "eq-template"
COLUMN_OPERATORS = (EQ_TEMPLATE, "gt", "lt", "geq", "leq")

JAVA_RESERVED = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while true false null
    var yield record""".split()
)


# --------------------------------------------------------------------------
# flow normalization


@dataclass(frozen=True)
class NormalizedFlow:
    nodes: tuple[FlowNode, ...]
    links: tuple[Link, ...]
    # inserted node id -> (table node id, "join" | "split")
    provenance: dict = field(default_factory=dict, compare=False)

    def to_model(self, model: XTTModel) -> XTTModel:
        return replace(model, nodes=self.nodes, links=self.links)


def _fresh_id(base: str, taken: set[str]) -> str:
    candidate, k = base, 2
    while candidate in taken:
        candidate = f"{base}_{k}"
        k += 1
    taken.add(candidate)
    return candidate


def normalize_flow(model: XTTModel) -> NormalizedFlow:
    """Give every table-ref node at most one incoming and one outgoing link.

    Multiple incoming links are gathered by an inserted AND join
    ``<table>_join``; multiple outgoing links leave through an inserted AND
    split ``<table>_split``. Row-targeted links have no Drools counterpart and
    are rejected.
    """
    row_links = [
        error(
            "row-link-unsupported",
            f"link {l.source}->{l.target} targets row {l.target_row}; Drools flows cannot address rows",
            f"flow.links[{i}]",
        )
        for i, l in enumerate(model.links)
        if l.target_row is not None
    ]
    if row_links:
        raise ExportError(row_links)

    links = list(model.links)
    nodes = list(model.nodes)
    extra_links: list[Link] = []
    provenance = {}
    taken = {n.id for n in model.nodes}
    for node in model.nodes:
        if node.kind != TABLE_REF:
            continue
        table = node.table_name
        incoming = [i for i, l in enumerate(links) if l.target == node.id]
        if len(incoming) > 1:
            jid = _fresh_id(f"{table}_join", taken)
            nodes.append(FlowNode(jid, JOIN, join_kind="AND"))
            for i in incoming:
                links[i] = replace(links[i], target=jid)
            extra_links.append(Link(jid, node.id))
            provenance[jid] = (node.id, "join")
        outgoing = [i for i, l in enumerate(links) if l.source == node.id]
        if len(outgoing) > 1:
            sid = _fresh_id(f"{table}_split", taken)
            nodes.append(FlowNode(sid, SPLIT, split_kind="AND"))
            for i in outgoing:
                links[i] = replace(links[i], source=sid)
            extra_links.append(Link(node.id, sid))
            provenance[sid] = (node.id, "split")
    return NormalizedFlow(tuple(nodes), tuple(links + extra_links), provenance)


# --------------------------------------------------------------------------
# column decomposition


@dataclass(frozen=True)
class OutputColumn:
    attribute: str
    operator: str
    source_operators: frozenset
    source_index: int


@dataclass(frozen=True)
class ColumnPlan:
    """Drools-shaped layout of one table's conditions.

    ``cells[r][c]`` is the literal row ``r`` puts under output column ``c``,
    or None where the rule places no constraint.
    """

    table_name: str
    columns: tuple[OutputColumn, ...]
    cells: tuple[tuple[Value | None, ...], ...]


def _claims(cell: ConditionCell) -> list[tuple[str, Value | None]]:
    """Output operators a condition cell occupies, with the literal for each."""
    op, operand = cell.op, cell.operand
    if op == "any":
        return []
    if op == "eq":
        return [(EQ_TEMPLATE, operand)]
    if op in ("gt", "lt", "geq", "leq"):
        return [(op, operand)]
    if op == "in" and isinstance(operand, Interval):
        return [("geq", operand.lo), ("leq", operand.hi)]
    if op == "in" and len(operand) == 1:
        return [(EQ_TEMPLATE, operand[0])]
    raise ValueError(op)


def plan_decomposition(table: XTTTable) -> ColumnPlan:
    problems = []
    for row in table.rows:
        for j, cell in enumerate(row.conditions):
            where = f"tables[{table.name}].rows[{row.row_id}].conditions[{j}]"
            if cell.op in ("neq", "notin"):
                problems.append(
                    error(f"{cell.op}-unsupported", f"{cell.op} has no decision-table column form", where)
                )
            elif cell.op == "in" and not isinstance(cell.operand, Interval) and len(cell.operand) != 1:
                problems.append(
                    error("in-set-unsupported", "value sets with several members have no column form", where)
                )
    if problems:
        raise ExportError(problems)

    used: dict[int, dict[str, set]] = {}
    for row in table.rows:
        for j, cell in enumerate(row.conditions):
            for out_op, _ in _claims(cell):
                used.setdefault(j, {}).setdefault(out_op, set()).add(cell.op)
    # any cells ride along with the attribute's eq-template column when there is one
    for row in table.rows:
        for j, cell in enumerate(row.conditions):
            if cell.op == "any" and EQ_TEMPLATE in used.get(j, {}):
                used[j][EQ_TEMPLATE].add("any")

    columns = []
    for j, attr in enumerate(table.condition_columns):
        for out_op in COLUMN_OPERATORS:
            if out_op in used.get(j, {}):
                columns.append(OutputColumn(attr, out_op, frozenset(used[j][out_op]), j))
    position = {(c.source_index, c.operator): k for k, c in enumerate(columns)}

    cells = []
    for row in table.rows:
        line: list[Value | None] = [None] * len(columns)
        for j, cell in enumerate(row.conditions):
            for out_op, literal in _claims(cell):
                line[position[(j, out_op)]] = literal
        cells.append(tuple(line))
    return ColumnPlan(table.name, tuple(columns), tuple(cells))


# --------------------------------------------------------------------------
# emitters


def _accessor(name: str) -> str:
    return name[0].upper() + name[1:]


def _template(model: XTTModel, col: OutputColumn) -> str:
    attr = col.attribute
    symbolic = not model.domain(attr).is_integer
    if col.operator == EQ_TEMPLATE:
        return f'{attr} == "$param"' if symbolic else f"{attr} == $param"
    sign = {"gt": ">", "lt": "<", "geq": ">=", "leq": "<="}[col.operator]
    return f"{attr} {sign} $param"


def _action(model: XTTModel, attr: str) -> str:
    if model.domain(attr).is_integer:
        return f"set{_accessor(attr)}($param)"
    return f'set{_accessor(attr)}("$param")'


def emit_decision_table_csv(model: XTTModel, plans: dict[str, ColumnPlan]) -> str:
    if not model.tables:
        raise ExportError(error("no-tables", "model has no tables to export"))
    blocks = []
    for table in model.tables:
        plan = plans[table.name]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["RuleSet", model.name])
        w.writerow(["Import", ""])
        w.writerow([])
        w.writerow([f"RuleTable {table.name}"])
        w.writerow(["CONDITION"] * len(plan.columns) + ["ACTION"] * len(table.decision_columns))
        w.writerow(["Workspace"] * (len(plan.columns) + len(table.decision_columns)))
        w.writerow([_template(model, c) for c in plan.columns] + [_action(model, a) for a in table.decision_columns])
        for row, cells in zip(table.rows, plan.cells):
            w.writerow(["" if c is None else c for c in cells] + [d.value for d in row.decisions])
        blocks.append(buf.getvalue())
    return "\n".join(blocks)


def _java_literal(model: XTTModel, attr: str, value: Value) -> str:
    if model.domain(attr).is_integer:
        return str(value)
    return f'"{value}"'


def _constraint_text(model: XTTModel, guard) -> str:
    parts = []
    for cell in guard or ():
        a, op, x = cell.attribute, cell.op, cell.operand
        if op == "any":
            continue
        if op in ("in", "notin") and isinstance(x, Interval):
            text = f"{a} >= {x.lo} && {a} <= {x.hi}"
            parts.append(text if op == "in" else f"!({text})")
        elif op in ("in", "notin"):
            text = " || ".join(f"{a} == {_java_literal(model, a, v)}" for v in x)
            parts.append(f"({text})" if op == "in" else f"!({text})")
        else:
            sign = {"eq": "==", "neq": "!=", "lt": "<", "gt": ">", "leq": "<=", "geq": ">="}[op]
            parts.append(f"{a} {sign} {_java_literal(model, a, x)}")
    return " && ".join(parts) if parts else "true"


_TYPE_NAMES = {"AND": "AND", "XOR": "XOR", "OR": "OR", "N-OF-M": "N_OF_M"}


def emit_ruleflow_xml(flow: NormalizedFlow, model_name: str, model: XTTModel | None = None) -> str:
    """Render the slim ruleflow: nodes and connections, nothing else.

    XOR split constraints are written only when `model` is supplied (its
    attribute domains decide how literals are quoted).
    """
    process = ET.Element("process", {"id": model_name, "name": model_name})
    nodes = ET.SubElement(process, "nodes")
    for n in flow.nodes:
        if n.kind == TABLE_REF:
            ET.SubElement(nodes, "ruleSet", {"id": n.id, "name": n.table_name, "ruleFlowGroup": n.table_name})
        elif n.kind == SPLIT:
            el = ET.SubElement(nodes, "split", {"id": n.id, "type": _TYPE_NAMES[n.split_kind]})
            if n.split_kind == "XOR" and model is not None:
                constraints = ET.SubElement(el, "constraints")
                outs = [l for l in flow.links if l.source == n.id]
                ordered = [l for l in outs if not l.is_default] + [l for l in outs if l.is_default]
                for priority, l in enumerate(ordered, start=1):
                    c = ET.SubElement(
                        constraints, "constraint", {"toNodeId": l.target, "priority": str(priority)}
                    )
                    c.text = "true" if l.is_default else _constraint_text(model, l.guard)
        elif n.kind == JOIN:
            attrs = {"id": n.id, "type": _TYPE_NAMES[n.join_kind]}
            if n.join_kind == "N-OF-M":
                attrs["n"] = str(n.n)
            ET.SubElement(nodes, "join", attrs)
        else:
            ET.SubElement(nodes, n.kind, {"id": n.id})
    connections = ET.SubElement(process, "connections")
    for l in flow.links:
        ET.SubElement(connections, "connection", {"from": l.source, "to": l.target})
    ET.indent(process)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(process, encoding="unicode") + "\n"


def emit_workspace_source(model: XTTModel) -> str:
    if not model.attributes:
        raise ExportError(error("no-attributes", "model has no attributes"))
    clashes = [
        error("reserved-word", f"attribute {a.name!r} is a reserved word in Java", f"attributes[{a.name}]")
        for a in model.attributes
        if a.name in JAVA_RESERVED
    ]
    if clashes:
        raise ExportError(clashes)

    lines = ["public class Workspace {", ""]
    for a in model.attributes:
        lines.append(f"    private {_java_type(a.domain)} {a.name};")
    for a in model.attributes:
        jt, cap = _java_type(a.domain), _accessor(a.name)
        lines += [
            "",
            f"    public {jt} get{cap}() {{",
            f"        return {a.name};",
            "    }",
            "",
            f"    public void set{cap}({jt} {a.name}) {{",
            f"        this.{a.name} = {a.name};",
            "    }",
        ]
    lines.append("}")
    return "\n".join(lines) + "\n"


def _java_type(domain) -> str:
    return "int" if domain.is_integer else "String"


# --------------------------------------------------------------------------
# orchestration


@dataclass(frozen=True)
class DroolsBundle:
    ruleflow_xml: str | None
    decision_table_csv: str | None
    workspace_source: str | None
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(d.is_error for d in self.diagnostics)

    def files(self, model_name: str) -> dict[str, str]:
        if not self.ok:
            return {}
        return {
            f"{model_name}.rf.xml": self.ruleflow_xml,
            f"{model_name}.dtable.csv": self.decision_table_csv,
            "Workspace.java": self.workspace_source,
        }


def export_drools(model: XTTModel) -> DroolsBundle:
    """Produce all three artifacts, or none plus the diagnostics explaining why."""
    invalid = [d for d in validate_model(model) if d.is_error]
    if invalid:
        return DroolsBundle(None, None, None, tuple(invalid))

    diagnostics: list[Diagnostic] = []
    flow = None
    try:
        flow = normalize_flow(model)
    except ExportError as exc:
        diagnostics += exc.diagnostics
    plans = {}
    for table in model.tables:
        try:
            plans[table.name] = plan_decomposition(table)
        except ExportError as exc:
            diagnostics += exc.diagnostics
    texts = {}
    if not diagnostics:
        try:
            texts["csv"] = emit_decision_table_csv(model, plans)
        except ExportError as exc:
            diagnostics += exc.diagnostics
    try:
        texts["java"] = emit_workspace_source(model)
    except ExportError as exc:
        diagnostics += exc.diagnostics
    if diagnostics:
        return DroolsBundle(None, None, None, tuple(diagnostics))
    return DroolsBundle(
        emit_ruleflow_xml(flow, model.name, model), texts["csv"], texts["java"], ()
    )


def write_bundle(bundle: DroolsBundle, model_name: str, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, text in bundle.files(model_name).items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written
