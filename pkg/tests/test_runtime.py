import pytest

from bproc import RunOptions, compile_model, parse_bpmn, run_once
from bproc.errors import ConfigError
from bproc.runtime import (TableEvaluated, parse_summary_inputs, render_graph_file,
                           render_summary_file, render_trace_file, write_artifacts)

from conftest import compile_fixture


def compile_inline(body: str, prelude: str = ""):
    xml = (f'<?xml version="1.0"?>'
           f'<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL" '
           f'xmlns:ext="http://x/ext">{prelude}'
           f'<process id="p" name="P">{body}</process></definitions>')
    return compile_model(parse_bpmn(xml), ())


def test_shipment_xl_path_writes_length_two(shipment):
    trace, summary = run_once(shipment, {"pType": ["xl"], "pWeight": [9.5]},
                              RunOptions(mode="sequential"))
    nodes = trace.node_sequence()
    assert nodes[:2] == ["StartEvent_Package", "Activity_GetLength"]
    assert ("pLength", 2) in trace.writes()
    # 9.5 exceeds the weight limit
    assert summary.status == "error"
    assert summary.code == "UNSUPPORTED_WEIGHT"


def test_consent_path(shipment):
    trace, summary = run_once(shipment, {"pType": ["l"], "pWeight": [9.0]},
                              RunOptions(mode="sequential"))
    assert summary.status == "error"
    assert summary.code == "NO_SHIPMENT"
    assert ("consent", "no") in trace.writes()
    tables = [r.table for r in trace.records if isinstance(r, TableEvaluated)]
    assert tables == ["GetLengthDT", "DetermineModeDT", "ChooseConsentDT"]


def test_missing_input_list_is_a_config_error(shipment):
    with pytest.raises(ConfigError):
        run_once(shipment, {"pType": ["xl"]})
    with pytest.raises(ConfigError):
        run_once(shipment, {"pType": ["xl"], "pWeight": []})


LOOP_TWICE = """
  <dataObject id="d"/>
  <dataObjectReference id="dr" name="v" dataObjectRef="d"/>
  <startEvent id="s"/>
  <scriptTask id="init" resultVariable="i"><script>0</script></scriptTask>
  <exclusiveGateway id="merge"/>
  <userTask id="ask" name="ask value">
    <dataOutputAssociation id="a1"><targetRef>dr</targetRef></dataOutputAssociation>
  </userTask>
  <scriptTask id="bump" resultVariable="i"><script>i + 1</script></scriptTask>
  <exclusiveGateway id="check" default="Flow_back"/>
  <endEvent id="e"/>
  <sequenceFlow id="f1" sourceRef="s" targetRef="init"/>
  <sequenceFlow id="f2" sourceRef="init" targetRef="merge"/>
  <sequenceFlow id="f3" sourceRef="merge" targetRef="ask"/>
  <sequenceFlow id="f4" sourceRef="ask" targetRef="bump"/>
  <sequenceFlow id="f5" sourceRef="bump" targetRef="check"/>
  <sequenceFlow id="Flow_done" sourceRef="check" targetRef="e">
    <conditionExpression>i &gt;= 2</conditionExpression>
  </sequenceFlow>
  <sequenceFlow id="Flow_back" sourceRef="check" targetRef="merge"/>
"""


def test_exhausted_input_list_reuses_last_value():
    x = compile_inline(LOOP_TWICE)
    trace, summary = run_once(x, {"v": [5]}, RunOptions(mode="sequential"))
    assert summary.status == "success"
    reads = [value for name, value in trace.writes() if name == "v"]
    assert reads == [5, 5]  # consumed twice, single-element list


def test_multi_value_input_list_consumed_in_order():
    x = compile_inline(LOOP_TWICE)
    trace, _ = run_once(x, {"v": [5, 7]}, RunOptions(mode="sequential"))
    reads = [value for name, value in trace.writes() if name == "v"]
    assert reads == [5, 7]


def test_input_cursor_never_exceeds_list_length():
    from bproc.runtime import _Engine

    x = compile_inline(LOOP_TWICE)
    engine = _Engine(x, {"v": [5]}, RunOptions(mode="sequential"))
    engine.run_sequential()
    assert engine._outcome[0] == "success"
    assert engine.state.cursors["v"] == 1  # consumed twice, list of one


def test_timeout_on_nonterminating_loop():
    x = compile_fixture("loop")
    trace, summary = run_once(x, {}, RunOptions(mode="sequential", timeout_s=0.1))
    assert summary.status == "timeout"
    assert summary.elapsed_s >= 0.1
    assert len(trace.records) > 0


def test_step_budget_caps_runaway_loops():
    x = compile_fixture("loop")
    _, summary = run_once(x, {}, RunOptions(mode="sequential", max_steps=500))
    assert summary.status == "fault"
    assert "step budget" in summary.message


def test_unhandled_gateway_condition_terminates_with_error():
    x = compile_inline("""
      <startEvent id="s"/>
      <scriptTask id="t" resultVariable="x"><script>5</script></scriptTask>
      <exclusiveGateway id="g"/>
      <endEvent id="e1"/><endEvent id="e2"/>
      <sequenceFlow id="f0" sourceRef="s" targetRef="t"/>
      <sequenceFlow id="f1" sourceRef="t" targetRef="g"/>
      <sequenceFlow id="f2" sourceRef="g" targetRef="e1">
        <conditionExpression>x = 1</conditionExpression>
      </sequenceFlow>
      <sequenceFlow id="f3" sourceRef="g" targetRef="e2">
        <conditionExpression>x = 2</conditionExpression>
      </sequenceFlow>
    """)
    _, summary = run_once(x, {}, RunOptions(mode="sequential"))
    assert summary.status == "error"
    assert summary.message == "unhandled condition"


def test_evaluation_errors_become_engine_faults():
    x = compile_inline("""
      <startEvent id="s"/>
      <scriptTask id="t" resultVariable="x"><script>1 / 0</script></scriptTask>
      <endEvent id="e"/>
      <sequenceFlow id="f1" sourceRef="s" targetRef="t"/>
      <sequenceFlow id="f2" sourceRef="t" targetRef="e"/>
    """)
    _, summary = run_once(x, {}, RunOptions(mode="sequential"))
    assert summary.status == "fault"
    assert "division by zero" in summary.message


def test_no_match_decision_faults(shipment):
    # force an argument outside every rule: pType value no rule accepts
    _, summary = run_once(shipment, {"pType": ["???"], "pWeight": [1.0]},
                          RunOptions(mode="sequential"))
    assert summary.status == "fault"
    assert "GetLengthDT" in summary.message


# --- fork / join / messages -----------------------------------------------------

def test_parallel_fork_joins_exactly_once():
    x = compile_fixture("pingpong")
    for _ in range(50):
        trace, summary = run_once(x, {}, RunOptions(mode="parallel"))
        assert summary.status == "success"
        nodes = trace.node_sequence()
        assert nodes.count("Gateway_Sync") == 1
        assert nodes.count("Activity_Combine") == 1
        assert ("m1", 3) in trace.writes()
        assert ("out", 4) in trace.writes()


def test_sequential_fork_runs_branches_in_case_order():
    x = compile_fixture("pingpong_sendfirst")
    trace, summary = run_once(x, {}, RunOptions(mode="sequential"))
    assert summary.status == "success"
    nodes = trace.node_sequence()
    assert nodes.index("Activity_Send") < nodes.index("Activity_Await")
    assert nodes.count("Gateway_Sync") == 1


def test_sequential_receive_before_send_deadlocks():
    x = compile_fixture("pingpong")
    _, summary = run_once(x, {}, RunOptions(mode="sequential"))
    assert summary.status == "fault"
    assert "Activity_Await" in summary.message
    assert "deadlock" in summary.message


MSG_PRELUDE = '<message id="M1" name="TypeA"/><message id="M2" name="TypeB"/>'

TWO_SENDS = """
  <startEvent id="s"/>
  <parallelGateway id="split"/>
  <sendTask id="send1" messageRef="M1">
    <extensionElements><ext:ioMapping channel="c">
      <ext:input source="=1" target="v"/>
    </ext:ioMapping></extensionElements>
  </sendTask>
  <sendTask id="send2" messageRef="M1">
    <extensionElements><ext:ioMapping channel="c">
      <ext:input source="=2" target="v"/>
    </ext:ioMapping></extensionElements>
  </sendTask>
  <receiveTask id="recv1" messageRef="M1">
    <extensionElements><ext:ioMapping channel="c">
      <ext:output source="v" target="a"/>
    </ext:ioMapping></extensionElements>
  </receiveTask>
  <receiveTask id="recv2" messageRef="M1">
    <extensionElements><ext:ioMapping channel="c">
      <ext:output source="v" target="b"/>
    </ext:ioMapping></extensionElements>
  </receiveTask>
  <parallelGateway id="join"/>
  <endEvent id="e"/>
  <sequenceFlow id="f1" sourceRef="s" targetRef="split"/>
  <sequenceFlow id="f2" sourceRef="split" targetRef="send1"/>
  <sequenceFlow id="f3" sourceRef="split" targetRef="recv1"/>
  <sequenceFlow id="f4" sourceRef="send1" targetRef="send2"/>
  <sequenceFlow id="f5" sourceRef="recv1" targetRef="recv2"/>
  <sequenceFlow id="f6" sourceRef="send2" targetRef="join"/>
  <sequenceFlow id="f7" sourceRef="recv2" targetRef="join"/>
  <sequenceFlow id="f8" sourceRef="join" targetRef="e"/>
"""


def test_fifo_delivery_order():
    x = compile_inline(TWO_SENDS, prelude=MSG_PRELUDE)
    # sequential with the send branch first: both messages queued, then read
    trace, summary = run_once(x, {}, RunOptions(mode="sequential"))
    assert summary.status == "success"
    writes = dict(trace.writes())
    assert writes == {"a": 1, "b": 2}


INCLUSIVE = """
  <startEvent id="s"/>
  <scriptTask id="t" resultVariable="x"><script>{value}</script></scriptTask>
  <inclusiveGateway id="g"/>
  <scriptTask id="a" resultVariable="hit_a"><script>true</script></scriptTask>
  <scriptTask id="b" resultVariable="hit_b"><script>true</script></scriptTask>
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
"""


@pytest.mark.parametrize("mode", ["sequential", "parallel"])
def test_inclusive_fork_selects_true_branches(mode):
    x = compile_inline(INCLUSIVE.format(value=5))  # only x > 1 holds
    trace, summary = run_once(x, {}, RunOptions(mode=mode))
    assert summary.status == "success"
    writes = dict(trace.writes())
    assert writes.get("hit_a") is True
    assert "hit_b" not in writes

    x = compile_inline(INCLUSIVE.format(value=50))  # both hold
    trace, summary = run_once(x, {}, RunOptions(mode=mode))
    assert summary.status == "success"
    writes = dict(trace.writes())
    assert writes.get("hit_a") is True and writes.get("hit_b") is True


@pytest.mark.parametrize("mode", ["sequential", "parallel"])
def test_inclusive_fork_with_no_true_condition_faults(mode):
    x = compile_inline(INCLUSIVE.format(value=0))
    _, summary = run_once(x, {}, RunOptions(mode=mode))
    assert summary.status == "fault"
    assert "unhandled condition" in summary.message


def test_parallel_writes_to_one_variable_are_flagged():
    x = compile_inline("""
      <startEvent id="s"/>
      <parallelGateway id="split"/>
      <scriptTask id="w1" resultVariable="shared"><script>1</script></scriptTask>
      <scriptTask id="w2" resultVariable="shared"><script>2</script></scriptTask>
      <parallelGateway id="join"/>
      <endEvent id="e"/>
      <sequenceFlow id="f1" sourceRef="s" targetRef="split"/>
      <sequenceFlow id="f2" sourceRef="split" targetRef="w1"/>
      <sequenceFlow id="f3" sourceRef="split" targetRef="w2"/>
      <sequenceFlow id="f4" sourceRef="w1" targetRef="join"/>
      <sequenceFlow id="f5" sourceRef="w2" targetRef="join"/>
      <sequenceFlow id="f6" sourceRef="join" targetRef="e"/>
    """)
    _, summary = run_once(x, {}, RunOptions(mode="parallel"))
    assert summary.status == "success"
    assert any("shared" in note for note in summary.diagnostics)


def test_message_type_mismatch_faults():
    body = TWO_SENDS.replace('receiveTask id="recv1" messageRef="M1"',
                             'receiveTask id="recv1" messageRef="M2"')
    x = compile_inline(body, prelude=MSG_PRELUDE)
    _, summary = run_once(x, {}, RunOptions(mode="sequential"))
    assert summary.status == "fault"
    assert "TypeB" in summary.message and "TypeA" in summary.message


# --- determinism and artifacts ----------------------------------------------------

def test_sequential_trace_is_a_graph_path(shipment):
    edges = set(shipment.graph.edges)
    for inputs in ({"pType": ["s"], "pWeight": [1.0]},
                   {"pType": ["l"], "pWeight": [17.5]},
                   {"pType": ["unknown"], "pWeight": [4.0]}):
        trace, _ = run_once(shipment, inputs, RunOptions(mode="sequential"))
        nodes = trace.node_sequence()
        assert nodes[0] == shipment.entry
        for a, b in zip(nodes, nodes[1:]):
            assert (a, b) in edges


def test_sequential_runs_are_byte_identical(shipment, tmp_path):
    files = []
    for i in (1, 2):
        trace, summary = run_once(shipment, {"pType": ["l"], "pWeight": [3.25]},
                                  RunOptions(mode="sequential", seed=7))
        paths = write_artifacts(trace, summary, shipment.graph, tmp_path / str(i),
                                stem="shipment")
        files.append({k: open(p, "rb").read() for k, p in paths.items()})
    assert files[0] == files[1]


def test_artifact_formats(shipment, tmp_path):
    trace, summary = run_once(shipment, {"pType": ["s"], "pWeight": [2.0]},
                              RunOptions(mode="sequential"))
    graph_text = render_graph_file(shipment.graph)
    trace_text = render_trace_file(trace, shipment.graph)
    summary_text = render_summary_file(summary)

    graph_lines = graph_text.strip().split("\n")
    assert graph_lines[0] == "node StartEvent_Package package_received"
    assert len([l for l in graph_lines if l.startswith("node ")]) == 14
    assert len([l for l in graph_lines if l.startswith("edge ")]) == 17

    # every trace edge endpoint appears as a node line in the graph file
    graph_nodes = {l.split()[1] for l in graph_lines if l.startswith("node ")}
    for line in trace_text.strip().split("\n"):
        parts = line.split()
        if parts[0] == "edge":
            assert parts[1] in graph_nodes and parts[2] in graph_nodes
        else:
            assert parts[0] == "node" and parts[1] in graph_nodes

    assert "status: success" in summary_text
    assert summary_text.startswith('input pType = "s"\ninput pWeight = 2.0\n')


def test_summary_inputs_parse_back(shipment, tmp_path):
    trace, summary = run_once(shipment, {"pType": ["xl"], "pWeight": [4.5]},
                              RunOptions(mode="sequential"))
    paths = write_artifacts(trace, summary, shipment.graph, tmp_path, stem="s")
    assert parse_summary_inputs(paths[".out"]) == {"pType": "xl", "pWeight": 4.5}


def test_timeout_summary_status():
    x = compile_fixture("loop")
    _, summary = run_once(x, {}, RunOptions(mode="sequential", timeout_s=0.05))
    assert "timeout" in render_summary_file(summary)
