"""XTT2 knowledge model: attributes, tables, flow graph.

Models are immutable. They are read from and written to a JSON-shaped
canonical text format; `validate_model` reports every structural defect as a
`Diagnostic` instead of raising.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Union

SYMBOLIC = "symbolic"
INTEGER_RANGE = "integer-range"

OPERATORS = ("eq", "neq", "lt", "gt", "leq", "geq", "in", "notin", "any")
ORDER_OPERATORS = frozenset({"lt", "gt", "leq", "geq"})
SET_OPERATORS = frozenset({"in", "notin"})

FIRST_HIT = "first-hit"
ALL_HIT = "all-hit"
MATCH_POLICIES = (FIRST_HIT, ALL_HIT)

START, END, TABLE_REF, SPLIT, JOIN = "start", "end", "table-ref", "split", "join"
NODE_KINDS = (START, END, TABLE_REF, SPLIT, JOIN)
SPLIT_KINDS = ("AND", "XOR")
JOIN_KINDS = ("AND", "OR", "N-OF-M")

# codes that make a document unusable as a model (parse_model refuses them)
REFERENCE_CODES = frozenset({"unknown-attribute", "unknown-table-ref", "unknown-node"})

_IDENT = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")

Value = Union[str, int]


@dataclass(frozen=True)
class Interval:
    """Closed integer interval ``[lo, hi]``."""

    lo: int
    hi: int

    def __contains__(self, value: object) -> bool:
        return isinstance(value, int) and self.lo <= value <= self.hi


Operand = Union[Value, Interval, tuple, None]


@dataclass(frozen=True)
class Domain:
    kind: str
    symbols: tuple[str, ...] = ()
    lo: int = 0
    hi: int = 0

    @classmethod
    def symbolic(cls, *symbols: str) -> "Domain":
        return cls(SYMBOLIC, tuple(symbols))

    @classmethod
    def integer(cls, lo: int, hi: int) -> "Domain":
        return cls(INTEGER_RANGE, (), lo, hi)

    @property
    def is_integer(self) -> bool:
        return self.kind == INTEGER_RANGE

    @property
    def cardinality(self) -> int:
        if self.is_integer:
            return max(self.hi - self.lo + 1, 0)
        return len(self.symbols)

    def values(self) -> tuple[Value, ...]:
        """All domain values in their natural order."""
        if self.is_integer:
            return tuple(range(self.lo, self.hi + 1))
        return self.symbols

    def contains(self, value: object) -> bool:
        if self.is_integer:
            return type(value) is int and self.lo <= value <= self.hi
        return isinstance(value, str) and value in self.symbols

    def parse_value(self, text: str) -> Value:
        """Read a value typed as text (CLI bindings); raises ValueError."""
        if self.is_integer:
            value: Value = int(text)
        else:
            value = text
        if not self.contains(value):
            raise ValueError(f"{text!r} is outside the domain")
        return value


@dataclass(frozen=True)
class AttributeDef:
    name: str
    domain: Domain


@dataclass(frozen=True)
class ConditionCell:
    attribute: str
    op: str
    operand: Operand = None

    def __post_init__(self) -> None:
        # normalize list operands so equality and hashing behave
        if isinstance(self.operand, (list, set, frozenset)):
            object.__setattr__(self, "operand", tuple(self.operand))


@dataclass(frozen=True)
class DecisionCell:
    attribute: str
    value: Value


@dataclass(frozen=True)
class RuleRow:
    conditions: tuple[ConditionCell, ...]
    decisions: tuple[DecisionCell, ...]
    row_id: int


@dataclass(frozen=True)
class XTTTable:
    name: str
    condition_columns: tuple[str, ...]
    decision_columns: tuple[str, ...]
    rows: tuple[RuleRow, ...]
    match_policy: str = ALL_HIT

    def row(self, row_id: int) -> RuleRow:
        return self.rows[row_id - 1]


@dataclass(frozen=True)
class FlowNode:
    id: str
    kind: str
    table_name: str | None = None
    split_kind: str | None = None
    join_kind: str | None = None
    n: int | None = None


@dataclass(frozen=True)
class Link:
    source: str
    target: str
    target_row: int | None = None
    guard: tuple[ConditionCell, ...] | None = None
    is_default: bool = False


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    location: str = ""

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def __str__(self) -> str:
        where = f" {self.location}" if self.location else ""
        return f"{self.severity} {self.code}{where}: {self.message}"


def error(code: str, message: str, location: str = "") -> Diagnostic:
    return Diagnostic("error", code, message, location)


class XttError(Exception):
    """Failure carrying one or more diagnostics."""

    def __init__(self, diagnostics: Iterable[Diagnostic] | Diagnostic):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]


class ModelError(XttError):
    pass


@dataclass(frozen=True)
class XTTModel:
    name: str
    attributes: tuple[AttributeDef, ...]
    tables: tuple[XTTTable, ...]
    nodes: tuple[FlowNode, ...]
    links: tuple[Link, ...]
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        index = {
            "attr": {a.name: a for a in self.attributes},
            "table": {t.name: t for t in self.tables},
            "node": {n.id: n for n in self.nodes},
        }
        object.__setattr__(self, "_index", index)

    def attribute(self, name: str) -> AttributeDef | None:
        return self._index["attr"].get(name)

    def domain(self, name: str) -> Domain:
        return self._index["attr"][name].domain

    def table(self, name: str) -> XTTTable | None:
        return self._index["table"].get(name)

    def node(self, node_id: str) -> FlowNode | None:
        return self._index["node"].get(node_id)

    def outgoing(self, node_id: str) -> list[Link]:
        return [l for l in self.links if l.source == node_id]

    def incoming(self, node_id: str) -> list[Link]:
        return [l for l in self.links if l.target == node_id]

    def table_node(self, table_name: str) -> FlowNode | None:
        for n in self.nodes:
            if n.kind == TABLE_REF and n.table_name == table_name:
                return n
        return None


# --------------------------------------------------------------------------
# validation


def _natural_key(text: str) -> list:
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", text)]


def _check_cell(
    model: XTTModel, cell: ConditionCell, where: str, out: list[Diagnostic]
) -> None:
    attr = model.attribute(cell.attribute)
    if attr is None:
        out.append(error("unknown-attribute", f"unknown attribute {cell.attribute!r}", where))
        return
    dom = attr.domain
    if dom.cardinality < 1:
        return  # the domain itself is already reported
    op, operand = cell.op, cell.operand
    if op not in OPERATORS:
        out.append(error("unknown-operator", f"unknown operator {op!r}", where))
        return
    if op in ORDER_OPERATORS and not dom.is_integer:
        out.append(error("operator-domain", f"{op} needs an integer-range attribute", where))
        return
    if op == "any":
        if operand is not None:
            out.append(error("bad-operand", "any takes no operand", where))
        return
    if op in SET_OPERATORS:
        if isinstance(operand, Interval):
            if not dom.is_integer:
                out.append(error("operator-domain", "intervals need an integer-range attribute", where))
            elif operand.lo > operand.hi:
                out.append(error("bad-interval", f"interval [{operand.lo},{operand.hi}] is empty", where))
            elif not (dom.contains(operand.lo) and dom.contains(operand.hi)):
                out.append(error("value-out-of-domain", "interval leaves the domain", where))
        elif isinstance(operand, tuple) and operand:
            for v in operand:
                if not dom.contains(v):
                    out.append(error("value-out-of-domain", f"{v!r} not in domain of {cell.attribute}", where))
        else:
            out.append(error("bad-operand", f"{op} needs a value set or interval", where))
        return
    if isinstance(operand, (Interval, tuple)) or operand is None:
        out.append(error("bad-operand", f"{op} needs a single value", where))
    elif not dom.contains(operand):
        out.append(error("value-out-of-domain", f"{operand!r} not in domain of {cell.attribute}", where))


def validate_model(model: XTTModel) -> list[Diagnostic]:
    """Check every structural invariant; returns diagnostics sorted by location."""
    out: list[Diagnostic] = []

    seen: set[str] = set()
    for a in model.attributes:
        where = f"attributes[{a.name}]"
        if not _IDENT.match(a.name or ""):
            out.append(error("bad-attribute-name", f"{a.name!r} is not an identifier", where))
        if a.name in seen:
            out.append(error("duplicate-attribute", f"attribute {a.name} declared twice", where))
        seen.add(a.name)
        d = a.domain
        if d.is_integer:
            if d.lo > d.hi:
                out.append(error("bad-range", f"range [{d.lo},{d.hi}] is empty", where + ".domain"))
        elif d.kind == SYMBOLIC:
            if not d.symbols:
                out.append(error("empty-domain", "symbolic domain has no symbols", where + ".domain"))
            if len(set(d.symbols)) != len(d.symbols):
                out.append(error("duplicate-symbol", "symbolic domain repeats a symbol", where + ".domain"))
        else:
            out.append(error("bad-domain-kind", f"unknown domain kind {d.kind!r}", where + ".domain"))

    seen = set()
    for t in model.tables:
        where = f"tables[{t.name}]"
        if not _IDENT.match(t.name or ""):
            out.append(error("bad-table-name", f"{t.name!r} is not an identifier", where))
        if t.name in seen:
            out.append(error("duplicate-table", f"table {t.name} declared twice", where))
        seen.add(t.name)
        if t.match_policy not in MATCH_POLICIES:
            out.append(error("bad-match-policy", f"unknown match policy {t.match_policy!r}", where))
        for col in t.condition_columns + t.decision_columns:
            if model.attribute(col) is None:
                out.append(error("unknown-attribute", f"column {col!r} names no attribute", where))
        if set(t.condition_columns) & set(t.decision_columns):
            out.append(error("column-overlap", "condition and decision columns overlap", where))
        if not t.decision_columns:
            out.append(error("no-decision-columns", "table has no decision column", where))
        if not t.rows:
            out.append(error("no-rows", "table has no rows", where))
        for i, row in enumerate(t.rows, start=1):
            rwhere = f"{where}.rows[{i}]"
            if row.row_id != i:
                out.append(error("bad-row-id", f"row id {row.row_id} at position {i}", rwhere))
            if len(row.conditions) != len(t.condition_columns) or len(row.decisions) != len(t.decision_columns):
                out.append(error("row-arity", "row does not match the table schema", rwhere))
                continue
            for j, (col, cell) in enumerate(zip(t.condition_columns, row.conditions)):
                cwhere = f"{rwhere}.conditions[{j}]"
                if cell.attribute != col:
                    out.append(error("column-mismatch", f"cell names {cell.attribute}, column is {col}", cwhere))
                elif model.attribute(col) is not None:
                    _check_cell(model, cell, cwhere, out)
            for j, (col, cell) in enumerate(zip(t.decision_columns, row.decisions)):
                cwhere = f"{rwhere}.decisions[{j}]"
                if cell.attribute != col:
                    out.append(error("column-mismatch", f"cell names {cell.attribute}, column is {col}", cwhere))
                elif model.attribute(col) is not None and model.domain(col).cardinality and not model.domain(col).contains(cell.value):
                    out.append(error("value-out-of-domain", f"{cell.value!r} not in domain of {col}", cwhere))

    seen = set()
    starts = 0
    ends = 0
    ref_count: dict[str, int] = {}
    for n in model.nodes:
        where = f"flow.nodes[{n.id}]"
        if not _IDENT.match(n.id or ""):
            out.append(error("bad-node-id", f"{n.id!r} is not an identifier", where))
        if n.id in seen:
            out.append(error("duplicate-node", f"node {n.id} declared twice", where))
        seen.add(n.id)
        if n.kind == START:
            starts += 1
        elif n.kind == END:
            ends += 1
        elif n.kind == TABLE_REF:
            if model.table(n.table_name or "") is None:
                out.append(error("unknown-table-ref", f"node refers to unknown table {n.table_name!r}", where))
            else:
                ref_count[n.table_name] = ref_count.get(n.table_name, 0) + 1
        elif n.kind == SPLIT:
            if n.split_kind not in SPLIT_KINDS:
                out.append(error("bad-split-kind", f"unknown split kind {n.split_kind!r}", where))
        elif n.kind == JOIN:
            if n.join_kind not in JOIN_KINDS:
                out.append(error("bad-join-kind", f"unknown join kind {n.join_kind!r}", where))
            elif n.join_kind == "N-OF-M":
                indeg = len(model.incoming(n.id))
                if n.n is None or n.n < 1:
                    out.append(error("bad-n", "N-OF-M join needs n >= 1", where))
                elif n.n > indeg:
                    out.append(error("n-exceeds-in-degree", f"n={n.n} but in-degree is {indeg}", where))
        else:
            out.append(error("bad-node-kind", f"unknown node kind {n.kind!r}", where))
        if n.kind != END and model.node(n.id) is n and not model.outgoing(n.id):
            out.append(error("no-outgoing", "only end nodes may lack outgoing links", where))
    if starts == 0:
        out.append(error("no-start", "flow has no start node", "flow.nodes"))
    elif starts > 1:
        out.append(error("multiple-start", f"flow has {starts} start nodes", "flow.nodes"))
    if ends == 0:
        out.append(error("no-end", "flow has no end node", "flow.nodes"))
    for t in model.tables:
        count = ref_count.get(t.name, 0)
        if count != 1:
            out.append(error("table-ref-count", f"table {t.name} is referenced by {count} nodes", f"tables[{t.name}]"))

    defaults: dict[str, int] = {}
    for i, l in enumerate(model.links):
        where = f"flow.links[{i}]"
        src, dst = model.node(l.source), model.node(l.target)
        if src is None or dst is None:
            missing = l.source if src is None else l.target
            out.append(error("unknown-node", f"link endpoint {missing!r} does not exist", where))
            continue
        if dst.kind == START:
            out.append(error("start-incoming", "start node has an incoming link", where))
        if src.kind == END:
            out.append(error("end-outgoing", "end node has an outgoing link", where))
        if l.target_row is not None:
            if dst.kind != TABLE_REF:
                out.append(error("target-row-not-table", "targetRow on a link not entering a table", where))
            else:
                table = model.table(dst.table_name or "")
                if table is not None and not 1 <= l.target_row <= len(table.rows):
                    out.append(error("bad-target-row", f"row {l.target_row} does not exist in {table.name}", where))
        is_xor = src.kind == SPLIT and src.split_kind == "XOR"
        if (l.guard is not None or l.is_default) and not is_xor:
            out.append(error("guard-not-xor", "guards and defaults belong on XOR split links", where))
        if l.guard:
            for j, cell in enumerate(l.guard):
                _check_cell(model, cell, f"{where}.guard[{j}]", out)
        if l.is_default:
            defaults[l.source] = defaults.get(l.source, 0) + 1
            if defaults[l.source] == 2:
                out.append(error("multiple-default", f"split {l.source} has more than one default", where))

    out.sort(key=lambda d: _natural_key(d.location))
    return out


def check_valuation(model: XTTModel, valuation: Mapping[str, Any]) -> list[Diagnostic]:
    out = []
    for name, value in valuation.items():
        attr = model.attribute(name)
        if attr is None:
            out.append(error("unknown-attribute", f"unknown attribute {name!r}", f"valuation[{name}]"))
        elif not attr.domain.contains(value):
            out.append(error("value-out-of-domain", f"{value!r} not in domain of {name}", f"valuation[{name}]"))
    return out


# --------------------------------------------------------------------------
# canonical text format


def _operand_from_json(op: str, raw: Any) -> Operand:
    if isinstance(raw, dict):
        return Interval(int(raw["lo"]), int(raw["hi"]))
    if isinstance(raw, list):
        return tuple(raw)
    return raw


def _operand_to_json(operand: Operand) -> Any:
    if isinstance(operand, Interval):
        return {"lo": operand.lo, "hi": operand.hi}
    if isinstance(operand, tuple):
        return list(operand)
    return operand


def _cell_from_json(raw: dict) -> ConditionCell:
    return ConditionCell(raw["attribute"], raw["op"], _operand_from_json(raw["op"], raw.get("operand")))


def _cell_to_json(cell: ConditionCell) -> dict:
    out: dict[str, Any] = {"attribute": cell.attribute, "op": cell.op}
    if cell.op != "any":
        out["operand"] = _operand_to_json(cell.operand)
    return out


def _build(doc: Any) -> XTTModel:
    if not isinstance(doc, dict):
        raise ModelError(error("syntax", "top level must be an object"))
    attributes = []
    for a in doc.get("attributes", []):
        d = a["domain"]
        if d["kind"] == INTEGER_RANGE:
            dom = Domain.integer(int(d["lo"]), int(d["hi"]))
        else:
            dom = Domain(d["kind"], tuple(d.get("symbols", ())))
        attributes.append(AttributeDef(a["name"], dom))

    tables = []
    for t in doc.get("tables", []):
        rows = []
        for i, r in enumerate(t.get("rows", []), start=1):
            rows.append(
                RuleRow(
                    tuple(_cell_from_json(c) for c in r.get("conditions", [])),
                    tuple(DecisionCell(c["attribute"], c["value"]) for c in r.get("decisions", [])),
                    i,
                )
            )
        tables.append(
            XTTTable(
                t["name"],
                tuple(t.get("conditionColumns", [])),
                tuple(t.get("decisionColumns", [])),
                tuple(rows),
                t.get("matchPolicy", ALL_HIT),
            )
        )

    flow = doc.get("flow", {})
    nodes = tuple(
        FlowNode(n["id"], n["kind"], n.get("table"), n.get("splitKind"), n.get("joinKind"), n.get("n"))
        for n in flow.get("nodes", [])
    )
    links = []
    for l in flow.get("links", []):
        guard = l.get("guard")
        links.append(
            Link(
                l["from"],
                l["to"],
                l.get("targetRow"),
                None if guard is None else tuple(_cell_from_json(c) for c in guard),
                bool(l.get("isDefault", False)),
            )
        )
    return XTTModel(doc.get("name", ""), tuple(attributes), tuple(tables), nodes, tuple(links))


def parse_model(document: str) -> XTTModel:
    """Parse a canonical model document.

    Raises `ModelError` on malformed text (the diagnostic carries line and
    column) and on dangling references to attributes, tables or nodes. Other
    invariant violations are left for `validate_model` to report.
    """
    if not document.strip():
        raise ModelError(error("syntax", "empty model"))
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ModelError(error("syntax", exc.msg, f"line {exc.lineno}, column {exc.colno}")) from None
    try:
        model = _build(doc)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ModelError(error("syntax", f"malformed model structure: {exc!r}")) from None
    refs = [d for d in validate_model(model) if d.code in REFERENCE_CODES]
    if refs:
        raise ModelError(refs)
    return model


def model_to_dict(model: XTTModel) -> dict:
    attributes = []
    for a in model.attributes:
        if a.domain.is_integer:
            dom: dict[str, Any] = {"kind": INTEGER_RANGE, "lo": a.domain.lo, "hi": a.domain.hi}
        else:
            dom = {"kind": a.domain.kind, "symbols": list(a.domain.symbols)}
        attributes.append({"name": a.name, "domain": dom})
    tables = []
    for t in model.tables:
        tables.append(
            {
                "name": t.name,
                "conditionColumns": list(t.condition_columns),
                "decisionColumns": list(t.decision_columns),
                "matchPolicy": t.match_policy,
                "rows": [
                    {
                        "conditions": [_cell_to_json(c) for c in r.conditions],
                        "decisions": [{"attribute": c.attribute, "value": c.value} for c in r.decisions],
                    }
                    for r in t.rows
                ],
            }
        )
    nodes = []
    for n in model.nodes:
        node: dict[str, Any] = {"id": n.id, "kind": n.kind}
        if n.kind == TABLE_REF:
            node["table"] = n.table_name
        elif n.kind == SPLIT:
            node["splitKind"] = n.split_kind
        elif n.kind == JOIN:
            node["joinKind"] = n.join_kind
            if n.join_kind == "N-OF-M":
                node["n"] = n.n
        nodes.append(node)
    links = []
    for l in model.links:
        link: dict[str, Any] = {"from": l.source, "to": l.target}
        if l.target_row is not None:
            link["targetRow"] = l.target_row
        if l.guard is not None:
            link["guard"] = [_cell_to_json(c) for c in l.guard]
        if l.is_default:
            link["isDefault"] = True
        links.append(link)
    return {
        "name": model.name,
        "attributes": attributes,
        "tables": tables,
        "flow": {"nodes": nodes, "links": links},
    }


def serialize_model(model: XTTModel) -> str:
    """Render a valid model as canonical text; invalid models raise ModelError."""
    errors = [d for d in validate_model(model) if d.is_error]
    if errors:
        raise ModelError(errors)
    return json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + "\n"


def load_model(path) -> XTTModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
