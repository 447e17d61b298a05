"""BPMN process export.

Two mappings are offered: ``table-map`` turns the flow graph into a process
with one task per table, and ``rule-level`` draws a single table as an
exclusive gateway with one branch per rule.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .model import (
    END,
    JOIN,
    SPLIT,
    START,
    TABLE_REF,
    ConditionCell,
    Interval,
    ModelError,
    XTTModel,
    XttError,
    error,
    validate_model,
)

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"
XTT_NS = "urn:xttc:bpmn-annotations"

ELEMENT_KINDS = ("startEvent", "endEvent", "task", "parallelGateway", "exclusiveGateway")


@dataclass(frozen=True)
class BpmnElement:
    id: str
    kind: str
    name: str
    # extra attributes preserving source semantics BPMN cannot express
    annotations: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class SequenceFlow:
    id: str
    source: str
    target: str
    condition_text: str | None = None


@dataclass
class BpmnDocument:
    process_id: str
    name: str
    elements: list[BpmnElement] = field(default_factory=list)
    flows: list[SequenceFlow] = field(default_factory=list)

    def count(self, kind: str) -> int:
        return sum(1 for e in self.elements if e.kind == kind)

    def integrity(self) -> list:
        """Referential and structural problems; empty for a sound document."""
        out = []
        ids = [e.id for e in self.elements]
        if len(set(ids)) != len(ids):
            out.append(error("duplicate-id", "element ids are not unique"))
        known = set(ids)
        for f in self.flows:
            for ref in (f.source, f.target):
                if ref not in known:
                    out.append(error("dangling-flow", f"{f.id} references missing element {ref}"))
        if self.count("startEvent") != 1:
            out.append(error("start-count", "a process needs exactly one startEvent"))
        if self.count("endEvent") < 1:
            out.append(error("no-end", "a process needs an endEvent"))
        return out

    def to_xml(self) -> str:
        ET.register_namespace("", BPMN_NS)
        ET.register_namespace("xtt", XTT_NS)
        root = ET.Element(f"{{{BPMN_NS}}}definitions", {"id": f"{self.process_id}_definitions"})
        process = ET.SubElement(root, f"{{{BPMN_NS}}}process", {"id": self.process_id, "name": self.name})
        for e in self.elements:
            attrs = {"id": e.id, "name": e.name}
            attrs.update({f"{{{XTT_NS}}}{k}": v for k, v in e.annotations})
            ET.SubElement(process, f"{{{BPMN_NS}}}{e.kind}", attrs)
        for f in self.flows:
            el = ET.SubElement(
                process, f"{{{BPMN_NS}}}sequenceFlow", {"id": f.id, "sourceRef": f.source, "targetRef": f.target}
            )
            if f.condition_text is not None:
                ET.SubElement(el, f"{{{BPMN_NS}}}conditionExpression").text = f.condition_text
        ET.indent(root)
        return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


_SIGNS = {"eq": "==", "neq": "!=", "lt": "<", "gt": ">", "leq": "<=", "geq": ">="}


def condition_text(cells) -> str:
    """Conjoin condition cells as ``attr op value && ...``; ``any`` cells drop out."""
    parts = [t for t in map(_cell_text, cells) if t]
    return " && ".join(parts) if parts else "true"


def _cell_text(cell: ConditionCell) -> str:
    a, op, x = cell.attribute, cell.op, cell.operand
    if op == "any":
        return ""
    if op in ("in", "notin"):
        word = "in" if op == "in" else "not in"
        if isinstance(x, Interval):
            return f"{a} {word} [{x.lo},{x.hi}]"
        return f"{a} {word} {{{','.join(str(v) for v in x)}}}"
    return f"{a} {_SIGNS[op]} {x}"


def _require_valid(model: XTTModel) -> None:
    errors = [d for d in validate_model(model) if d.is_error]
    if errors:
        raise ModelError(errors)


def _checked(doc: BpmnDocument) -> BpmnDocument:
    problems = doc.integrity()
    if problems:
        raise XttError(problems)
    return doc


def export_bpmn_tablemap(model: XTTModel) -> BpmnDocument:
    _require_valid(model)
    doc = BpmnDocument(model.name, model.name)
    for n in model.nodes:
        if n.kind == START:
            doc.elements.append(BpmnElement(n.id, "startEvent", n.id))
        elif n.kind == END:
            doc.elements.append(BpmnElement(n.id, "endEvent", n.id))
        elif n.kind == TABLE_REF:
            doc.elements.append(BpmnElement(n.id, "task", n.table_name))
        elif n.kind == SPLIT:
            kind = "parallelGateway" if n.split_kind == "AND" else "exclusiveGateway"
            doc.elements.append(BpmnElement(n.id, kind, n.id))
        elif n.kind == JOIN:
            if n.join_kind == "AND":
                doc.elements.append(BpmnElement(n.id, "parallelGateway", n.id))
            else:
                notes = [("joinKind", n.join_kind)]
                if n.join_kind == "N-OF-M":
                    notes.append(("n", str(n.n)))
                doc.elements.append(BpmnElement(n.id, "exclusiveGateway", n.id, tuple(notes)))
    for i, l in enumerate(model.links, start=1):
        cond = None
        if l.guard is not None:
            cond = condition_text(l.guard)
        elif l.is_default:
            cond = "default"
        doc.flows.append(SequenceFlow(f"flow_{i}", l.source, l.target, cond))
    return _checked(doc)


def export_bpmn_rulelevel(model: XTTModel, table_name: str) -> BpmnDocument:
    table = model.table(table_name)
    if table is None:
        raise XttError(error("unknown-table", f"no table named {table_name!r}"))
    _require_valid(model)
    doc = BpmnDocument(f"{model.name}_{table.name}", table.name)
    flows = doc.flows

    def flow(src: str, dst: str, cond: str | None = None) -> None:
        flows.append(SequenceFlow(f"flow_{len(flows) + 1}", src, dst, cond))

    doc.elements.append(BpmnElement("start", "startEvent", "start"))
    doc.elements.append(BpmnElement("rules", "exclusiveGateway", table.name))
    flow("start", "rules")
    for row in table.rows:
        task_id = f"row{row.row_id}"
        sets = ", ".join(f"{d.attribute}={d.value}" for d in row.decisions)
        doc.elements.append(BpmnElement(task_id, "task", f"row{row.row_id}: set {sets}"))
        flow("rules", task_id, condition_text(row.conditions))
        flow(task_id, "merge")
    doc.elements.append(BpmnElement("merge", "exclusiveGateway", "merge"))
    doc.elements.append(BpmnElement("end", "endEvent", "end"))
    flow("merge", "end")
    return _checked(doc)
