"""Flow-driven inference over linked XTT2 tables.

Tables are evaluated one at a time as tokens reach them, so only the active
table's rules are ever tested. The valuation is a plain ``dict`` shared by
all tokens of a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import (
    END,
    FIRST_HIT,
    JOIN,
    SPLIT,
    START,
    TABLE_REF,
    ConditionCell,
    Diagnostic,
    ModelError,
    Value,
    XTTModel,
    XTTTable,
    check_valuation,
    error,
    validate_model,
)

Valuation = dict  # attribute name -> domain value; missing key means unknown

DEFAULT_STEP_LIMIT = 100_000


def eval_condition(cell: ConditionCell, v: Mapping[str, Value]) -> bool:
    """Test one condition cell; unknown attributes fail everything but ``any``."""
    if cell.op == "any":
        return True
    if cell.attribute not in v:
        return False
    x = v[cell.attribute]
    op, operand = cell.op, cell.operand
    if op == "eq":
        return x == operand
    if op == "neq":
        return x != operand
    if op == "lt":
        return x < operand
    if op == "gt":
        return x > operand
    if op == "leq":
        return x <= operand
    if op == "geq":
        return x >= operand
    if op in ("in", "notin"):
        member = x in operand
        return member if op == "in" else not member
    raise ValueError(f"unknown operator {op!r}")


def row_matches(conditions: Iterable[ConditionCell], v: Mapping[str, Value]) -> bool:
    return all(eval_condition(c, v) for c in conditions)


@dataclass(frozen=True)
class TableResult:
    fired_rows: tuple[int, ...]
    valuation_after: Valuation


def evaluate_table(
    table: XTTTable, v: Mapping[str, Value], restrict_to: Iterable[int] | None = None
) -> TableResult:
    allowed = None if restrict_to is None else set(restrict_to)
    after = dict(v)
    fired = []
    for row in table.rows:
        if allowed is not None and row.row_id not in allowed:
            continue
        if not row_matches(row.conditions, v):
            continue
        fired.append(row.row_id)
        for cell in row.decisions:
            after[cell.attribute] = cell.value
        if table.match_policy == FIRST_HIT:
            break
    return TableResult(tuple(fired), after)


@dataclass(frozen=True)
class TraceStep:
    node_id: str
    event: str


@dataclass
class InferenceTrace:
    steps: list[TraceStep] = field(default_factory=list)

    def add(self, node_id: str, event: str) -> None:
        self.steps.append(TraceStep(node_id, event))

    def render(self) -> str:
        return "".join(f"{i} {s.node_id} {s.event}\n" for i, s in enumerate(self.steps, start=1))

    def pattern(self) -> list[tuple[str, str]]:
        return [(s.node_id, s.event) for s in self.steps]


@dataclass
class RunResult:
    final: Valuation
    trace: InferenceTrace
    diagnostics: list[Diagnostic] = field(default_factory=list)
    slice: tuple[str, ...] | None = None

    @property
    def ok(self) -> bool:
        return not any(d.is_error for d in self.diagnostics)


def _require_valid(model: XTTModel, initial: Mapping[str, Value]) -> None:
    errors = [d for d in validate_model(model) if d.is_error]
    errors += check_valuation(model, initial)
    if errors:
        raise ModelError(errors)


def _fmt(items: Iterable) -> str:
    return "[" + ",".join(str(i) for i in items) + "]"


def run_forward(
    model: XTTModel,
    initial: Mapping[str, Value],
    *,
    active_tables: Iterable[str] | None = None,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> RunResult:
    """Drive tokens from the start node until none can advance.

    Tokens are kept on a stack, so an AND-split branch runs until it ends or
    blocks at a join before its sibling starts. A table-ref node with several
    incoming links waits for all of them (implicit AND join) and one with
    several outgoing links feeds all of them. Table-ref nodes outside
    `active_tables` pass tokens through without evaluating their table.
    """
    _require_valid(model, initial)
    active = None if active_tables is None else set(active_tables)
    valuation: Valuation = dict(initial)
    trace = InferenceTrace()
    diagnostics: list[Diagnostic] = []

    out_links = {n.id: [] for n in model.nodes}
    in_links = {n.id: [] for n in model.nodes}
    for i, l in enumerate(model.links):
        out_links[l.source].append(i)
        in_links[l.target].append(i)

    arrived: dict[str, list[int]] = {}  # node id -> link indices seen since last firing
    fired_once: set[str] = set()

    start = next(n for n in model.nodes if n.kind == START)
    stack: list[tuple[str, int | None]] = [(start.id, None)]

    def push(links: list[int]) -> None:
        for i in reversed(links):
            stack.append((model.links[i].target, i))

    steps = 0
    while stack:
        steps += 1
        if steps > step_limit:
            diagnostics.append(error("step-limit", f"run exceeded {step_limit} token moves"))
            break
        node_id, via = stack.pop()
        node = model.node(node_id)
        outs = out_links[node_id]

        if node.kind == JOIN:
            if node.id in fired_once and node.join_kind != "AND":
                trace.add(node.id, "absorbed")
                continue
            waiting = arrived.setdefault(node.id, [])
            waiting.append(via)
            incoming = in_links[node.id]
            if node.join_kind == "AND":
                ready = set(waiting) >= set(incoming)
            elif node.join_kind == "OR":
                ready = True
            else:
                ready = len(waiting) >= node.n
            if not ready:
                trace.add(node.id, "entered")
                continue
            trace.add(node.id, "join-satisfied")
            arrived[node.id] = []
            fired_once.add(node.id)
            push(outs)
            continue

        if node.kind == TABLE_REF and len(in_links[node.id]) > 1:
            waiting = arrived.setdefault(node.id, [])
            waiting.append(via)
            if not set(waiting) >= set(in_links[node.id]):
                trace.add(node.id, "entered")
                continue
            arriving = list(waiting)
            arrived[node.id] = []
        else:
            arriving = [via] if via is not None else []

        trace.add(node.id, "entered")
        if node.kind == END:
            continue
        if node.kind == TABLE_REF:
            if active is None or node.table_name in active:
                targets = [model.links[i].target_row for i in arriving]
                restrict = None if None in targets or not targets else set(targets)
                result = evaluate_table(model.table(node.table_name), valuation, restrict)
                valuation = result.valuation_after
                trace.add(node.id, "fired-rows " + _fmt(result.fired_rows))
            push(outs)
        elif node.kind == SPLIT and node.split_kind == "XOR":
            chosen = None
            for i in outs:
                l = model.links[i]
                if not l.is_default and row_matches(l.guard or (), valuation):
                    chosen = i
                    break
            if chosen is None:
                chosen = next((i for i in outs if model.links[i].is_default), None)
            if chosen is None:
                diagnostics.append(error("xor-stuck", "no guard holds and no default branch", f"flow.nodes[{node.id}]"))
                continue
            trace.add(node.id, "split-dispatch " + _fmt([model.links[chosen].target]))
            push([chosen])
        elif node.kind == SPLIT:
            trace.add(node.id, "split-dispatch " + _fmt(model.links[i].target for i in outs))
            push(outs)
        else:  # start
            push(outs)

    for node_id, waiting in arrived.items():
        if waiting:
            diagnostics.append(
                error("deadlock", f"{len(waiting)} token(s) stranded waiting at {node_id}", f"flow.nodes[{node_id}]")
            )
    return RunResult(valuation, trace, diagnostics)


def backward_slice(model: XTTModel, goal: str) -> tuple[str, ...]:
    """Tables that can contribute to binding `goal`, in declaration order.

    Starts from the tables deciding the goal and adds, transitively, every
    table deciding a condition attribute of a slice member, provided it can
    run before that member (it is a flow ancestor of it).
    """
    deciders = [t for t in model.tables if goal in t.decision_columns]
    if not deciders:
        raise ModelError(error("unknown-goal", f"no table decides {goal!r}"))

    preds: dict[str, set[str]] = {n.id: set() for n in model.nodes}
    for l in model.links:
        preds[l.target].add(l.source)

    def ancestors(node_id: str) -> set[str]:
        seen: set[str] = set()
        todo = [node_id]
        while todo:
            for p in preds[todo.pop()]:
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return seen

    members = {t.name for t in deciders}
    todo = list(members)
    while todo:
        table = model.table(todo.pop())
        node = model.table_node(table.name)
        before = ancestors(node.id) if node is not None else set()
        for attr in table.condition_columns:
            for cand in model.tables:
                if cand.name in members or attr not in cand.decision_columns:
                    continue
                cand_node = model.table_node(cand.name)
                if cand_node is not None and cand_node.id in before:
                    members.add(cand.name)
                    todo.append(cand.name)
    return tuple(t.name for t in model.tables if t.name in members)


def run_goal_driven(model: XTTModel, goal: str, initial: Mapping[str, Value], **kwargs) -> RunResult:
    """Run forward over the backward slice of `goal` only."""
    _require_valid(model, initial)
    tables = backward_slice(model, goal)
    result = run_forward(model, initial, active_tables=tables, **kwargs)
    result.slice = tables
    if goal not in result.final:
        result.diagnostics.append(error("goal-undetermined", f"the run did not bind {goal}"))
    return result


def render_valuation(v: Mapping[str, Value]) -> str:
    return "".join(f"{k}={v[k]}\n" for k in sorted(v))

