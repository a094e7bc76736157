import pytest

from bproc import StaticType, compile_model, parse_bpmn, render_source
from bproc.compiler import (Assign, Branch, Continue, ConsumeInput, Fork, InvokeTable,
                            JoinBarrier, Terminate)
from bproc.errors import UnresolvedTableError
from bproc.feel import ast, parse_expr, render

from conftest import compile_fixture


def test_one_routine_per_node(shipment):
    assert set(shipment.routines) == {n for n, _ in shipment.graph.nodes}
    assert len(shipment.routines) == 14


def test_display_names_follow_the_scheme(shipment):
    assert shipment.routines["StartEvent_Package"].display_name == \
        "EVENT_StartEvent_Package_package_received"
    assert shipment.routines["Gateway_ModeCheck"].display_name == \
        "GATEWAY_Gateway_ModeCheck_mode"
    assert shipment.routines["Activity_GetLength"].display_name == \
        "TASK_Activity_GetLength_get_length"


def test_start_event_consumes_then_continues(shipment):
    steps = shipment.routines["StartEvent_Package"].steps
    assert steps == (ConsumeInput("pType"), Continue("Activity_GetLength"))


def test_branch_case_order_and_default_last(shipment):
    (branch,) = shipment.routines["Gateway_ModeCheck"].steps
    assert isinstance(branch, Branch)
    assert [t for _, t in branch.cases] == ["Activity_ChooseConsent", "Gateway_Join",
                                            "Gateway_Join"]
    assert [render(c) for c, _ in branch.cases] == \
        ['sMode = "air"', 'sMode = "car"', 'sMode = "train"']
    assert branch.default == "Gateway_Join"


def test_gateway_after_choose_consent_has_two_cases_plus_join(shipment):
    (branch,) = shipment.routines["Gateway_ConsentCheck"].steps
    assert len(branch.cases) == 2
    assert [t for _, t in branch.cases] == ["EndEvent_NoShipment", "Gateway_Join"]
    assert branch.default == "Gateway_Join"


def test_receive_task_lowers_to_part_assignments():
    x = compile_fixture("pingpong")
    receive, _ = x.routines["Activity_Await"].steps
    assert receive.channel == "c" and receive.msg_type == "M"
    assert receive.targets == (("v1", "m1"),)
    send, _ = x.routines["Activity_Send"].steps
    assert send.channel == "c" and send.msg_type == "M"
    assert [(part, render(e)) for part, e in send.parts] == [("v1", "3")]


def test_gateway_without_default_fails_unhandled():
    model = parse_bpmn("""<?xml version="1.0"?>
    <definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL">
      <process id="p">
        <startEvent id="s"/>
        <exclusiveGateway id="g"/>
        <endEvent id="e1"/><endEvent id="e2"/>
        <sequenceFlow id="f0" sourceRef="s" targetRef="g"/>
        <sequenceFlow id="f1" sourceRef="g" targetRef="e1">
          <conditionExpression>1 = 2</conditionExpression>
        </sequenceFlow>
        <sequenceFlow id="f2" sourceRef="g" targetRef="e2">
          <conditionExpression>2 = 3</conditionExpression>
        </sequenceFlow>
      </process>
    </definitions>""")
    x = compile_model(model, ())
    (branch,) = x.routines["g"].steps
    assert branch.default is None
    assert len(branch.cases) == 2


def test_business_rule_default_bindings(shipment):
    invoke = shipment.routines["Activity_ChooseConsent"].steps[0]
    assert isinstance(invoke, InvokeTable)
    assert [label for label, _ in invoke.arg_bindings] == ["shipping mode", "weight"]
    assert [render(e) for _, e in invoke.arg_bindings] == ["sMode", "pWeight"]
    assert invoke.out_bindings == (("consent", "consent"),)


def test_business_rule_explicit_io_mapping():
    x = compile_fixture("discount", "discount")
    invoke = x.routines["Activity_Discount"].steps[0]
    assert invoke.arg_bindings[0][0] == "purchase amount"
    assert render(invoke.arg_bindings[0][1]) == "amount"
    assert invoke.out_bindings == (("rate", "rate"),)


def test_unresolved_table_reference(shipment_parsed):
    model, _ = shipment_parsed
    with pytest.raises(UnresolvedTableError):
        compile_model(model, ())


def test_error_end_gets_code_and_description(shipment):
    (terminate,) = shipment.routines["EndEvent_NoShipment"].steps
    assert terminate == Terminate("error", "NO_SHIPMENT", "no shipment")


def test_error_end_without_code_gets_synthetic_one():
    model = parse_bpmn("""<?xml version="1.0"?>
    <definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL">
      <process id="p">
        <startEvent id="s"/>
        <endEvent id="e" name="boom"><errorEventDefinition/></endEvent>
        <sequenceFlow id="f" sourceRef="s" targetRef="e"/>
      </process>
    </definitions>""")
    x = compile_model(model, ())
    (terminate,) = x.routines["e"].steps
    assert terminate.code == "ERR_e"


def test_fork_and_barrier_lowering():
    x = compile_fixture("pingpong")
    (fork,) = x.routines["Gateway_Split"].steps
    assert fork == Fork(("Activity_Await", "Activity_Send"), "Gateway_Sync")
    (barrier,) = x.routines["Gateway_Sync"].steps
    assert barrier == JoinBarrier("Activity_Combine")


def test_inclusive_gateway_gets_conditions():
    model = parse_bpmn("""<?xml version="1.0"?>
    <definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL">
      <process id="p">
        <startEvent id="s"/>
        <scriptTask id="t" resultVariable="x"><script>4</script></scriptTask>
        <inclusiveGateway id="g"/>
        <manualTask id="a"/><manualTask id="b"/>
        <inclusiveGateway id="j"/>
        <endEvent id="e"/>
        <sequenceFlow id="f0" sourceRef="s" targetRef="t"/>
        <sequenceFlow id="f1" sourceRef="t" targetRef="g"/>
        <sequenceFlow id="f2" sourceRef="g" targetRef="a">
          <conditionExpression>x &gt; 1</conditionExpression>
        </sequenceFlow>
        <sequenceFlow id="f3" sourceRef="g" targetRef="b">
          <conditionExpression>x &gt; 10</conditionExpression>
        </sequenceFlow>
        <sequenceFlow id="f4" sourceRef="a" targetRef="j"/>
        <sequenceFlow id="f5" sourceRef="b" targetRef="j"/>
        <sequenceFlow id="f6" sourceRef="j" targetRef="e"/>
      </process>
    </definitions>""")
    x = compile_model(model, ())
    (fork,) = x.routines["g"].steps
    assert fork.conditions is not None
    assert [render(c) for c in fork.conditions] == ["x > 1", "x > 10"]
    assert fork.join_id == "j"


def test_variable_typing(shipment):
    types = dict(shipment.process_vars)
    assert types["pLength"] is StaticType.INTEGER
    assert types["sMode"] is StaticType.STRING
    assert types["consent"] is StaticType.STRING
    assert shipment.input_spec("pWeight").static_type is StaticType.DOUBLE
    assert shipment.input_spec("pType").static_type is StaticType.STRING


def test_assignment_types_propagate():
    x = compile_fixture("quote")
    assert dict(x.process_vars)["price"] is StaticType.DOUBLE
    x = compile_fixture("onboarding")
    assert dict(x.process_vars)["done"] is StaticType.BOOLEAN


def test_compilation_is_deterministic(shipment_parsed):
    model, tables = shipment_parsed
    a = render_source(compile_model(model, tables, sample_seed=42))
    b = render_source(compile_model(model, tables, sample_seed=42))
    assert a == b


def test_rendered_source_mentions_every_routine(shipment):
    text = render_source(shipment)
    for routine in shipment.routines.values():
        assert f"proc {routine.display_name}:" in text
    assert text.count("\n") >= len(shipment.routines)
    assert "init: every variable := undefined" in text
    assert "execute: call EVENT_StartEvent_Package_package_received" in text


def test_pass_through_join_renders_as_a_single_call(shipment):
    text = render_source(shipment)
    block = text.split("proc GATEWAY_Gateway_Join_join:\n", 1)[1].split("\n\n", 1)[0]
    assert block.splitlines() == ["  call EVENT_EndEvent_Ready_ready_for_shipment"]


def test_embedded_expressions_parse_back(shipment):
    for routine in shipment.routines.values():
        for step in routine.steps:
            exprs = []
            if isinstance(step, Assign):
                exprs.append(step.expr)
            elif isinstance(step, Branch):
                exprs.extend(c for c, _ in step.cases)
            elif isinstance(step, InvokeTable):
                exprs.extend(e for _, e in step.arg_bindings)
            for expr in exprs:
                assert parse_expr(render(expr)) == expr


def test_every_continuation_target_exists(shipment):
    pingpong = compile_fixture("pingpong")
    for x in (shipment, pingpong):
        for routine in x.routines.values():
            targets = []
            terminals = 0
            for step in routine.steps:
                if isinstance(step, Continue):
                    targets.append(step.target)
                    terminals += 1
                elif isinstance(step, Branch):
                    targets.extend(t for _, t in step.cases)
                    if step.default:
                        targets.append(step.default)
                    terminals += 1
                elif isinstance(step, Fork):
                    targets.extend(step.targets)
                    targets.append(step.join_id)
                    terminals += 1
                elif isinstance(step, JoinBarrier):
                    targets.append(step.next)
                    terminals += 1
                elif isinstance(step, Terminate):
                    terminals += 1
            assert terminals == 1, f"{routine.id} has {terminals} terminal steps"
            assert all(t in x.routines for t in targets), routine.id


def test_reachable_routines_equal_graph_reachability(shipment):
    # parallel-free model: the compiler introduces no dead code
    succ = {}
    for src, dst in shipment.graph.edges:
        succ.setdefault(src, set()).add(dst)
    frontier = [shipment.entry]
    graph_reach = {shipment.entry}
    while frontier:
        for nxt in succ.get(frontier.pop(), ()):
            if nxt not in graph_reach:
                graph_reach.add(nxt)
                frontier.append(nxt)

    ir_reach = {shipment.entry}
    frontier = [shipment.entry]
    while frontier:
        routine = shipment.routines[frontier.pop()]
        targets = []
        for step in routine.steps:
            if isinstance(step, Continue):
                targets.append(step.target)
            elif isinstance(step, Branch):
                targets.extend(t for _, t in step.cases)
                if step.default:
                    targets.append(step.default)
        for t in targets:
            if t not in ir_reach:
                ir_reach.add(t)
                frontier.append(t)
    assert ir_reach == graph_reach
