#!/usr/bin/env python3
"""Execute the Shipment process once with hand-picked inputs and show the
trace: nodes in activation order, variable writes, table evaluations, and
the final summary file content."""

import pathlib

from bproc import RunOptions, compile_model, parse_bpmn, parse_dmn, run_once
from bproc.runtime import (NodeActivated, TableEvaluated, VarWritten,
                           render_summary_file)

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

model = parse_bpmn((FIXTURES / "shipment.bpmn").read_bytes())
tables = parse_dmn((FIXTURES / "shipment.dmn").read_bytes())
executable = compile_model(model, tables)

# an extra-large, 9.5 kg package: too heavy to ship
inputs = {"pType": ["xl"], "pWeight": [9.5]}
trace, summary = run_once(executable, inputs, RunOptions(mode="sequential"))

for record in trace.records:
    if isinstance(record, NodeActivated):
        print(f"at   {record.node}")
    elif isinstance(record, VarWritten):
        print(f"     {record.name} := {record.value!r}")
    elif isinstance(record, TableEvaluated):
        print(f"     evaluated {record.table} -> {dict(record.outputs)}")

print("\n--- summary file ---")
print(render_summary_file(summary), end="")
