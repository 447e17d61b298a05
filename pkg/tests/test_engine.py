import dataclasses
import random

import pytest
from hypothesis import given, settings, strategies as st

from randmodels import random_diamond, random_flow_model, random_table_model
from xttc.engine import eval_condition, evaluate_table, run_forward, run_goal_driven
from xttc.model import (
    AttributeDef,
    ConditionCell,
    DecisionCell,
    Domain,
    FlowNode,
    Interval,
    Link,
    ModelError,
    RuleRow,
    XTTModel,
    XTTTable,
)


def reference_operation(today, hour):
    # read straight off the four thermostat rules
    if today == "weekend" or hour < 9 or hour > 17:
        return "nbizhrs"
    return "bizhrs"


@pytest.mark.parametrize(
    "cell, v, expected",
    [
        (ConditionCell("hour", "gt", 17), {"hour": 18}, True),
        (ConditionCell("hour", "gt", 17), {"hour": 17}, False),
        (ConditionCell("hour", "any"), {}, True),
        (ConditionCell("hour", "in", Interval(9, 17)), {"hour": 17}, True),
        (ConditionCell("hour", "in", Interval(9, 17)), {"hour": 9}, True),
        (ConditionCell("hour", "in", Interval(9, 17)), {"hour": 18}, False),
        (ConditionCell("today", "eq", "workday"), {}, False),
        (ConditionCell("today", "neq", "workday"), {}, False),
        (ConditionCell("today", "neq", "workday"), {"today": "weekend"}, True),
        (ConditionCell("hour", "notin", (1, 2)), {"hour": 3}, True),
        (ConditionCell("hour", "notin", Interval(1, 2)), {"hour": 2}, False),
        (ConditionCell("hour", "leq", 5), {"hour": 5}, True),
        (ConditionCell("hour", "geq", 5), {"hour": 4}, False),
        (ConditionCell("hour", "lt", 9), {"hour": 8}, True),
    ],
)
def test_eval_condition(cell, v, expected):
    assert eval_condition(cell, v) is expected


def test_closed_interval_rows_partition_hours(thermostat):
    # every workday hour is matched by exactly one of rows 1, 3, 4
    table = thermostat.tables[0]
    for hour in range(24):
        fired = evaluate_table(table, {"today": "workday", "hour": hour}).fired_rows
        assert len(fired) == 1


@pytest.mark.parametrize(
    "v, rows, op",
    [
        ({"today": "workday", "hour": 18}, (1,), "nbizhrs"),
        ({"today": "weekend", "hour": 3}, (2,), "nbizhrs"),
        ({"today": "workday", "hour": 12}, (4,), "bizhrs"),
    ],
)
def test_evaluate_thermostat(thermostat, v, rows, op):
    result = evaluate_table(thermostat.tables[0], v)
    assert result.fired_rows == rows
    assert result.valuation_after["operation"] == op
    assert "operation" not in v


def test_evaluate_nothing_bound(thermostat):
    result = evaluate_table(thermostat.tables[0], {})
    assert result.fired_rows == ()
    assert result.valuation_after == {}


def test_restrict_to(thermostat):
    table = thermostat.tables[0]
    assert evaluate_table(table, {"today": "workday", "hour": 18}, restrict_to={4}).fired_rows == ()
    assert evaluate_table(table, {"today": "workday", "hour": 12}, restrict_to={4}).fired_rows == (4,)


def test_all_hit_later_write_wins():
    rows = (
        RuleRow((ConditionCell("a", "any"),), (DecisionCell("b", "x"),), 1),
        RuleRow((ConditionCell("a", "any"),), (DecisionCell("b", "y"),), 2),
    )
    t = XTTTable("t", ("a",), ("b",), rows)
    assert evaluate_table(t, {}).valuation_after == {"b": "y"}
    first = dataclasses.replace(t, match_policy="first-hit")
    r = evaluate_table(first, {})
    assert r.fired_rows == (1,) and r.valuation_after == {"b": "x"}


def test_run_thermostat_exhaustive(thermostat):
    for today in ("workday", "weekend"):
        for hour in range(24):
            final = run_forward(thermostat, {"today": today, "hour": hour}).final
            assert final["operation"] == reference_operation(today, hour)


def test_run_trace_shape(thermostat):
    result = run_forward(thermostat, {"today": "workday", "hour": 18})
    assert result.ok
    assert result.trace.render() == (
        "1 start entered\n2 thermostat entered\n3 thermostat fired-rows [1]\n4 end entered\n"
    )


def test_run_rejects_out_of_domain(thermostat):
    with pytest.raises(ModelError) as exc:
        run_forward(thermostat, {"hour": 99})
    assert exc.value.codes == ["value-out-of-domain"]


def _trivial(name, attr):
    return XTTTable(name, (), (attr,), (RuleRow((), (DecisionCell(attr, "y"),), 1),))


def _diamond(join_kind="AND", n=None, split_kind="AND", guards=None):
    attrs = (
        AttributeDef("a", Domain.symbolic("y", "n")),
        AttributeDef("b", Domain.symbolic("y", "n")),
    )
    nodes = (
        FlowNode("start", "start"),
        FlowNode("split", "split", split_kind=split_kind),
        FlowNode("A", "table-ref", "A"),
        FlowNode("B", "table-ref", "B"),
        FlowNode("join", "join", join_kind=join_kind, n=n),
        FlowNode("end", "end"),
    )
    guards = guards or (None, None)
    links = (
        Link("start", "split"),
        Link("split", "A", guard=guards[0]),
        Link("split", "B", guard=guards[1]),
        Link("A", "join"),
        Link("B", "join"),
        Link("join", "end"),
    )
    return XTTModel("d", attrs, (_trivial("A", "a"), _trivial("B", "b")), nodes, links)


def test_and_split_join():
    result = run_forward(_diamond(), {})
    steps = result.trace.pattern()
    assert steps.count(("A", "fired-rows [1]")) == 1
    assert steps.count(("B", "fired-rows [1]")) == 1
    assert steps.count(("join", "join-satisfied")) == 1
    assert result.final == {"a": "y", "b": "y"}
    assert result.ok


def test_or_join_absorbs_late_token():
    steps = run_forward(_diamond("OR"), {}).trace.pattern()
    assert ("join", "absorbed") in steps
    assert steps.count(("end", "entered")) == 1


def test_n_of_m_one_matches_or():
    assert run_forward(_diamond("N-OF-M", 1), {}).trace.pattern() == run_forward(_diamond("OR"), {}).trace.pattern()


def test_three_way_n_of_m_one_matches_or():
    # m = 3 incoming branches
    for seed in range(40):
        build = random_diamond(random.Random(seed))
        if build.m != 3:
            continue
        a = run_forward(build("N-OF-M", 1), {"x0": "a"})
        b = run_forward(build("OR"), {"x0": "a"})
        assert a.trace.pattern() == b.trace.pattern()
        return
    pytest.fail("no m=3 diamond generated")


def test_xor_stuck():
    xor = _diamond(
        "OR",
        split_kind="XOR",
        guards=((ConditionCell("a", "eq", "y"),), (ConditionCell("b", "eq", "y"),)),
    )
    result = run_forward(xor, {})
    assert [d.code for d in result.diagnostics] == ["xor-stuck"]


def test_xor_takes_first_guard_then_default():
    m = _diamond(
        "OR",
        split_kind="XOR",
        guards=((ConditionCell("a", "eq", "n"),), (ConditionCell("a", "any"),)),
    )
    assert run_forward(m, {"a": "n"}).trace.pattern()[2] == ("split", "split-dispatch [A]")
    assert run_forward(m, {"a": "y"}).trace.pattern()[2] == ("split", "split-dispatch [B]")
    links = list(m.links)
    links[2] = Link("split", "B", is_default=True)
    m2 = dataclasses.replace(m, links=tuple(links))
    result = run_forward(m2, {"a": "y"})
    assert result.ok
    assert result.trace.pattern()[2] == ("split", "split-dispatch [B]")
    assert result.final == {"a": "y", "b": "y"}


def test_deadlock_on_and_join_after_xor():
    m = _diamond(
        "AND",
        split_kind="XOR",
        guards=((ConditionCell("a", "any"),), (ConditionCell("a", "any"),)),
    )
    result = run_forward(m, {})
    assert [d.code for d in result.diagnostics] == ["deadlock"]


def test_row_targeted_link_restricts(thermostat):
    links = (Link("start", "thermostat", target_row=4), thermostat.links[1])
    m = dataclasses.replace(thermostat, links=links)
    assert "operation" not in run_forward(m, {"today": "weekend", "hour": 3}).final
    assert run_forward(m, {"today": "workday", "hour": 10}).final["operation"] == "bizhrs"


def test_no_firing_row_passes_token_on(thermostat):
    result = run_forward(thermostat, {})
    assert result.trace.pattern()[-1] == ("end", "entered")
    assert result.ok


def test_cycle_hits_step_limit():
    attrs = (AttributeDef("a", Domain.symbolic("y")),)
    nodes = (
        FlowNode("start", "start"),
        FlowNode("x", "split", split_kind="XOR"),
        FlowNode("T", "table-ref", "T"),
        FlowNode("end", "end"),
    )
    links = (
        Link("start", "x"),
        Link("x", "T", guard=(ConditionCell("a", "any"),)),
        Link("x", "end", is_default=True),
        Link("T", "x"),
    )
    m = XTTModel("loop", attrs, (_trivial("T", "a"),), nodes, links)
    result = run_forward(m, {}, step_limit=200)
    assert "step-limit" in [d.code for d in result.diagnostics]


def test_goal_driven_thermostat(thermostat):
    result = run_goal_driven(thermostat, "operation", {"today": "weekend", "hour": 1})
    assert result.final["operation"] == "nbizhrs"
    assert result.slice == ("thermostat",)


def _chain():
    attrs = (
        AttributeDef("i", Domain.symbolic("p", "q")),
        AttributeDef("x", Domain.symbolic("p", "q")),
        AttributeDef("y", Domain.symbolic("p", "q")),
    )
    t1 = XTTTable("T1", ("i",), ("x",), (RuleRow((ConditionCell("i", "any"),), (DecisionCell("x", "p"),), 1),))
    t2 = XTTTable("T2", ("x",), ("y",), (RuleRow((ConditionCell("x", "eq", "p"),), (DecisionCell("y", "q"),), 1),))
    nodes = (
        FlowNode("start", "start"),
        FlowNode("T1", "table-ref", "T1"),
        FlowNode("T2", "table-ref", "T2"),
        FlowNode("end", "end"),
    )
    links = (Link("start", "T1"), Link("T1", "T2"), Link("T2", "end"))
    return XTTModel("chain", attrs, (t1, t2), nodes, links)


def test_goal_slice_excludes_downstream():
    result = run_goal_driven(_chain(), "x", {})
    assert result.slice == ("T1",)
    assert result.final == {"x": "p"}
    assert ("T2", "entered") in result.trace.pattern()
    assert not any(s.node_id == "T2" and s.event.startswith("fired") for s in result.trace.steps)


def test_goal_slice_includes_upstream_dependency():
    assert run_goal_driven(_chain(), "y", {}).slice == ("T1", "T2")


def test_unknown_goal(thermostat):
    with pytest.raises(ModelError) as exc:
        run_goal_driven(thermostat, "hour", {})
    assert exc.value.codes == ["unknown-goal"]


def test_goal_undetermined(thermostat):
    result = run_goal_driven(thermostat, "operation", {})
    assert [d.code for d in result.diagnostics] == ["goal-undetermined"]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_determinism_and_conservation(seed):
    m = random_flow_model(random.Random(seed))
    written = {d.attribute for t in m.tables for r in t.rows for d in r.decisions}
    rng = random.Random(seed)
    v = {a.name: rng.choice(a.domain.values()) for a in m.attributes if rng.random() < 0.6}
    a, b = run_forward(m, v), run_forward(m, v)
    assert a.trace.render() == b.trace.render() and a.final == b.final
    for name, value in v.items():
        if name not in written:
            assert a.final[name] == value
    assert a.trace.steps[0].node_id == "start"


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_locality_and_first_hit_prefix(seed):
    rng = random.Random(seed)
    m = random_table_model(rng, exportable=False)
    t = m.tables[0]
    v = {a.name: rng.choice(a.domain.values()) for a in m.attributes}
    noise = dict(v, out=rng.choice(["yes", "no"]))
    assert evaluate_table(t, v).fired_rows == evaluate_table(t, noise).fired_rows
    all_hit = evaluate_table(t, v).fired_rows
    first = evaluate_table(dataclasses.replace(t, match_policy="first-hit"), v).fired_rows
    assert len(first) <= 1
    assert first == all_hit[:1]
