"""Exhaustive semantic checks over a table's condition state space.

Every check enumerates the full cross-product of the condition attributes'
domains. Row matches are computed as boolean grids with one axis per
attribute (ordered as the attributes are declared in the model), so the
first ``True`` cell in C order is the lexicographically smallest state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .drools import EQ_TEMPLATE, ColumnPlan
from .engine import eval_condition
from .model import START, TABLE_REF, Value, XTTModel, XTTTable, XttError, error

DEFAULT_STATE_BOUND = 1_000_000


class AnalysisError(XttError):
    pass


@dataclass(frozen=True)
class Overlap:
    row_a: int
    row_b: int
    witness: dict


@dataclass
class AnalysisReport:
    table_name: str
    completeness_witnesses: list[dict] = field(default_factory=list)
    overlaps: list[Overlap] = field(default_factory=list)
    state_space_size: int = 0

    @property
    def clean(self) -> bool:
        return not self.completeness_witnesses and not self.overlaps

    def lines(self) -> list[str]:
        out = [f"{self.table_name} incomplete {format_state(w)}" for w in self.completeness_witnesses]
        out += [f"{self.table_name} overlap({o.row_a},{o.row_b}) {format_state(o.witness)}" for o in self.overlaps]
        return out


@dataclass(frozen=True)
class Equivalence:
    equivalent: bool
    witness: dict | None = None


def format_state(state: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in state.items()) or "-"


class StateSpace:
    """Grid over the condition attributes of one table."""

    def __init__(self, table: XTTTable, model: XTTModel, bound: int = DEFAULT_STATE_BOUND):
        order = {a.name: i for i, a in enumerate(model.attributes)}
        self.attributes = sorted(set(table.condition_columns), key=order.__getitem__)
        self.values = [model.domain(a).values() for a in self.attributes]
        self.shape = tuple(len(v) for v in self.values)
        self.size = math.prod(self.shape)
        if self.size > bound:
            raise AnalysisError(
                error(
                    "state-space-too-large",
                    f"table {table.name} spans {self.size} states, bound is {bound}",
                    f"tables[{table.name}]",
                )
            )
        self._axis = {a: i for i, a in enumerate(self.attributes)}

    def axis_mask(self, attribute: str, test: Callable[[Value], bool]) -> np.ndarray:
        """Broadcastable mask selecting the attribute values passing `test`."""
        axis = self._axis[attribute]
        mask = np.array([test(v) for v in self.values[axis]], dtype=bool)
        shape = [1] * len(self.shape)
        shape[axis] = len(mask)
        return mask.reshape(shape)

    def conjoin(self, masks) -> np.ndarray:
        grid = np.ones(self.shape, dtype=bool)
        for m in masks:
            grid = grid & m
        return grid

    def state(self, flat_index: int) -> dict:
        idx = np.unravel_index(flat_index, self.shape) if self.shape else ()
        return {a: self.values[i][int(k)] for i, (a, k) in enumerate(zip(self.attributes, idx))}

    def first(self, grid: np.ndarray) -> dict | None:
        hits = np.flatnonzero(grid)
        return self.state(int(hits[0])) if hits.size else None


def row_grids(table: XTTTable, space: StateSpace) -> list[np.ndarray]:
    """Per-row match grids using the engine's own condition semantics."""
    grids = []
    for row in table.rows:
        masks = [
            space.axis_mask(cell.attribute, lambda v, c=cell: eval_condition(c, {c.attribute: v}))
            for cell in row.conditions
        ]
        grids.append(space.conjoin(masks))
    return grids


def check_completeness(table: XTTTable, model: XTTModel, bound: int = DEFAULT_STATE_BOUND) -> list[dict]:
    space = StateSpace(table, model, bound)
    covered = np.zeros(space.shape, dtype=bool)
    for g in row_grids(table, space):
        covered |= g
    return [space.state(int(i)) for i in np.flatnonzero(~covered)]


def check_overlap(table: XTTTable, model: XTTModel, bound: int = DEFAULT_STATE_BOUND) -> list[Overlap]:
    space = StateSpace(table, model, bound)
    grids = row_grids(table, space)
    out = []
    for a in range(len(grids)):
        for b in range(a + 1, len(grids)):
            witness = space.first(grids[a] & grids[b])
            if witness is not None:
                out.append(Overlap(table.rows[a].row_id, table.rows[b].row_id, witness))
    return out


def check_reachability(model: XTTModel) -> list[str]:
    succ: dict[str, list[str]] = {}
    for l in model.links:
        succ.setdefault(l.source, []).append(l.target)
    seen = {n.id for n in model.nodes if n.kind == START}
    todo = list(seen)
    while todo:
        for nxt in succ.get(todo.pop(), []):
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return [
        n.table_name for n in model.nodes if n.kind == TABLE_REF and n.id not in seen
    ]


_PLAN_TESTS = {
    EQ_TEMPLATE: lambda x, p: x == p,
    "gt": lambda x, p: x > p,
    "lt": lambda x, p: x < p,
    "geq": lambda x, p: x >= p,
    "leq": lambda x, p: x <= p,
}


def oracle_equivalence(
    table: XTTTable, plan: ColumnPlan, model: XTTModel, bound: int = DEFAULT_STATE_BOUND
) -> Equivalence:
    """Compare row-match sets of the original cells and the decomposed plan.

    The plan side is rebuilt purely from its column headers and literals, so
    a bad decomposition cannot hide behind the engine's operator code.
    """
    space = StateSpace(table, model, bound)
    original = row_grids(table, space)
    mismatch = np.zeros(space.shape, dtype=bool)
    for r, grid in enumerate(original):
        masks = []
        for col, literal in zip(plan.columns, plan.cells[r]):
            if literal is None:
                continue
            test = _PLAN_TESTS[col.operator]
            masks.append(space.axis_mask(col.attribute, lambda v, t=test, p=literal: t(v, p)))
        mismatch |= grid != space.conjoin(masks)
    witness = space.first(mismatch)
    return Equivalence(witness is None, witness)


def analyze_table(table: XTTTable, model: XTTModel, bound: int = DEFAULT_STATE_BOUND) -> AnalysisReport:
    space = StateSpace(table, model, bound)
    return AnalysisReport(
        table.name,
        check_completeness(table, model, bound),
        check_overlap(table, model, bound),
        space.size,
    )


def rows_coverage(table: XTTTable, model: XTTModel, bound: int = DEFAULT_STATE_BOUND) -> dict:
    """Number of states each row matches, plus uncovered and multiply-covered counts."""
    space = StateSpace(table, model, bound)
    grids = row_grids(table, space)
    hits = sum((g.astype(int) for g in grids), np.zeros(space.shape, dtype=int))
    return {
        "rows": [int(g.sum()) for g in grids],
        "uncovered": int((hits == 0).sum()),
        "overlapping": int((hits > 1).sum()),
        "states": space.size,
    }
