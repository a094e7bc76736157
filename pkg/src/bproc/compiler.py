"""Lowering of a process model plus its decision tables into an executable
model: one routine per element, one evaluator per table, plus the inferred
input specifications. A readable source rendering is available for
inspection; execution interprets the routines directly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import dmn, feel, inputs as inputs_mod
from .bpmn import (ProcessGraph, ProcessModel, classify_variables, extract_graph)
from .errors import SchemaError, UnresolvedTableError
from .feel import ast
from .feel.types import StaticType

# --- steps -----------------------------------------------------------------


@dataclass(frozen=True)
class ConsumeInput:
    var: str


@dataclass(frozen=True)
class Assign:
    var: str
    expr: ast.FeelExpr


@dataclass(frozen=True)
class InvokeTable:
    table_ref: str
    arg_bindings: tuple[tuple[str, ast.FeelExpr], ...]  # table input label <- expr
    out_bindings: tuple[tuple[str, str], ...]  # table output -> variable


@dataclass(frozen=True)
class Send:
    channel: str
    msg_type: str
    parts: tuple[tuple[str, ast.FeelExpr], ...]


@dataclass(frozen=True)
class Receive:
    channel: str
    msg_type: str
    targets: tuple[tuple[str, str], ...]  # part -> variable


@dataclass(frozen=True)
class Branch:
    """First case whose condition holds wins; otherwise the default target;
    with no default the run ends with an unhandled-condition failure."""

    cases: tuple[tuple[ast.FeelExpr, str], ...]
    default: str | None


@dataclass(frozen=True)
class Fork:
    targets: tuple[str, ...]
    join_id: str
    conditions: tuple[ast.FeelExpr, ...] | None = None  # None: start every branch


@dataclass(frozen=True)
class JoinBarrier:
    next: str  # expected arrivals are fixed per fork at run time


@dataclass(frozen=True)
class Continue:
    target: str


@dataclass(frozen=True)
class Terminate:
    status: str  # "success" | "error"
    code: str
    message: str


Step = (ConsumeInput | Assign | InvokeTable | Send | Receive | Branch | Fork
        | JoinBarrier | Continue | Terminate)


@dataclass(frozen=True)
class Routine:
    id: str
    display_name: str
    steps: tuple[Step, ...]


@dataclass
class ExecutableModel:
    process_id: str
    name: str
    entry: str
    routines: dict[str, Routine]
    tables: dict[str, dmn.DecisionTable]
    graph: ProcessGraph
    input_vars: list[inputs_mod.InputSpec]
    process_vars: list[tuple[str, StaticType]]
    diagnostics: list[str] = field(default_factory=list)

    def declared_variables(self) -> list[str]:
        return [s.name for s in self.input_vars] + [n for n, _ in self.process_vars]

    def input_spec(self, name: str) -> inputs_mod.InputSpec:
        return next(s for s in self.input_vars if s.name == name)


def _display_name(node) -> str:
    prefix = {"start": "EVENT", "end_success": "EVENT", "end_error": "EVENT",
              "exclusive_gateway": "GATEWAY", "parallel_gateway": "GATEWAY",
              "inclusive_gateway": "GATEWAY", "join_gateway": "GATEWAY"}.get(node.kind,
                                                                             "TASK")
    name = f"{prefix}_{node.id}"
    if node.label and node.label != node.id:
        safe = "".join(c if c.isalnum() else "_" for c in node.label)
        name += f"_{safe}"
    return name


def compile_model(model: ProcessModel, tables, *, sample_seed: int = 0,
                  overrides: dict[str, list] | None = None) -> ExecutableModel:
    """Translate a validated model and its tables into the executable form.

    Deterministic: identical inputs (including sample_seed) give identical
    results and byte-identical rendered source.
    """
    table_by_ref: dict[str, dmn.DecisionTable] = {}
    for table in tables:
        table_by_ref[table.id] = table
        table_by_ref.setdefault(table.name, table)

    roles = classify_variables(model, tables)
    diagnostics = list(model.diagnostics)

    used_tables: dict[str, dmn.DecisionTable] = {}
    routines: dict[str, Routine] = {}
    for node in model.nodes:
        routines[node.id] = Routine(node.id, _display_name(node),
                                    _lower(node, model, table_by_ref, used_tables))

    types = _infer_variable_types(model, table_by_ref, roles, diagnostics)
    domains, domain_diags = _infer_input_domains(model, table_by_ref, roles)
    diagnostics.extend(domain_diags)

    rng = random.Random(sample_seed)
    input_specs = inputs_mod.build_input_specs(roles, types, domains, rng, overrides)
    process_vars = [(name, types.get(name, StaticType.STRING))
                    for name in sorted(roles) if roles[name].role == "process"]

    return ExecutableModel(
        process_id=model.process_id,
        name=model.name,
        entry=model.start.id,
        routines=routines,
        tables=used_tables,
        graph=extract_graph(model),
        input_vars=input_specs,
        process_vars=process_vars,
        diagnostics=diagnostics,
    )


def _lower(node, model: ProcessModel, table_by_ref, used_tables) -> tuple[Step, ...]:
    outgoing = model.outgoing(node.id)

    def continuation() -> Step:
        return Continue(outgoing[0].target)

    if node.kind == "start" or node.kind in ("user_task", "manual_task"):
        steps: list[Step] = []
        seen = set()
        for var in node.writes:
            if var not in seen:
                steps.append(ConsumeInput(var))
                seen.add(var)
        steps.append(continuation())
        return tuple(steps)

    if node.kind == "end_success":
        return (Terminate("success", node.id, node.label),)
    if node.kind == "end_error":
        return (Terminate("error", node.error_code or f"ERR_{node.id}",
                          node.error_description or node.label),)

    if node.kind in ("script_task", "service_task"):
        return (Assign(node.target, node.expr), continuation())

    if node.kind == "business_rule_task":
        table = table_by_ref.get(node.table_ref)
        if table is None:
            raise UnresolvedTableError(node.table_ref)
        used_tables[node.table_ref] = table
        labels = [label for label, _ in table.inputs]
        if node.input_map is not None:
            bound = dict(node.input_map)
            unknown = sorted(set(bound) - set(labels))
            if unknown:
                raise SchemaError(f"task {node.id!r} binds unknown table inputs {unknown}")
            missing = sorted(set(labels) - set(bound))
            if missing:
                raise SchemaError(f"task {node.id!r} leaves table inputs {missing} unbound")
            arg_bindings = tuple((label, bound[label]) for label in labels)
        else:
            arg_bindings = tuple((label, expr) for label, expr in table.inputs)
        if node.output_map is not None:
            unknown = sorted(set(o for o, _ in node.output_map) - set(table.outputs))
            if unknown:
                raise SchemaError(f"task {node.id!r} maps unknown table outputs {unknown}")
            out_bindings = tuple(node.output_map)
        else:
            out_bindings = tuple((out, out) for out in table.outputs)
        return (InvokeTable(node.table_ref, arg_bindings, out_bindings), continuation())

    if node.kind == "send_task":
        return (Send(node.channel, node.msg_type, node.send_parts), continuation())
    if node.kind == "receive_task":
        return (Receive(node.channel, node.msg_type, node.receive_parts), continuation())

    if node.kind == "exclusive_gateway":
        cases = []
        default = None
        for flow in outgoing:
            if flow.is_default:
                default = flow.target
            elif flow.condition is None:
                raise SchemaError(f"gateway {node.id!r}: flow {flow.id!r} has neither a "
                                  f"condition nor the default mark")
            else:
                cases.append((flow.condition, flow.target))
        return (Branch(tuple(cases), default),)

    if node.kind in ("parallel_gateway", "inclusive_gateway"):
        join_id = _matching_join(node.id, model)
        targets = tuple(f.target for f in outgoing)
        if node.kind == "parallel_gateway":
            return (Fork(targets, join_id),)
        conditions = []
        for flow in outgoing:
            if flow.condition is None and not flow.is_default:
                raise SchemaError(f"inclusive gateway {node.id!r}: flow {flow.id!r} "
                                  f"needs a condition")
            conditions.append(flow.condition or ast.Lit(True))
        return (Fork(targets, join_id, tuple(conditions)),)

    if node.kind == "join_gateway":
        if node.join_kind in ("parallel", "inclusive"):
            return (JoinBarrier(outgoing[0].target),)
        return (continuation(),)

    raise SchemaError(f"cannot lower node kind {node.kind!r}")


def _matching_join(gateway_id: str, model: ProcessModel) -> str:
    """The join gateway every branch of the split reaches; structured
    diagrams have exactly one such nearest join."""
    succ: dict[str, list[str]] = {}
    for flow in model.flows:
        succ.setdefault(flow.source, []).append(flow.target)

    def distances(origin: str) -> dict[str, int]:
        dist = {origin: 0}
        frontier = [origin]
        while frontier:
            nxt = []
            for node_id in frontier:
                for target in succ.get(node_id, ()):
                    if target not in dist:
                        dist[target] = dist[node_id] + 1
                        nxt.append(target)
            frontier = nxt
        return dist

    branch_dists = [distances(f.target) for f in model.outgoing(gateway_id)]
    barriers = [n.id for n in model.nodes
                if n.kind == "join_gateway" and n.join_kind in ("parallel", "inclusive")]
    common = [b for b in barriers if all(b in d for d in branch_dists)]
    if not common:
        raise SchemaError(f"parallel/inclusive split {gateway_id!r} has no join gateway "
                          f"reachable from every branch")
    return min(common, key=lambda b: (max(d[b] for d in branch_dists), b))


# --- variable typing and input domains --------------------------------------

def _iter_expressions(model: ProcessModel, table_by_ref):
    for flow in model.flows:
        if flow.condition is not None:
            yield flow.condition
    for node in model.nodes:
        if node.kind in ("script_task", "service_task"):
            yield node.expr
        elif node.kind == "send_task":
            for _, expr in node.send_parts:
                yield expr
        elif node.kind == "business_rule_task":
            for _, expr in _bindings_of(node, table_by_ref):
                yield expr


def _bindings_of(node, table_by_ref) -> list[tuple[str, ast.FeelExpr]]:
    table = table_by_ref.get(node.table_ref)
    if node.input_map is not None:
        return list(node.input_map)
    if table is not None:
        return [(label, expr) for label, expr in table.inputs]
    return []


def _cell_facts(node, table_by_ref):
    """(variable, unary test) pairs for columns bound to a plain variable,
    plus unhandled markers for columns bound to anything richer."""
    table = table_by_ref.get(node.table_ref)
    if table is None:
        return [], []
    bindings = dict(_bindings_of(node, table_by_ref))
    plain: list[tuple[str, ast.UnaryTest]] = []
    opaque: list[tuple[str, str]] = []  # (variable, source text)
    for j, (label, _) in enumerate(table.inputs):
        expr = bindings.get(label)
        if expr is None:
            continue
        if isinstance(expr, ast.Var):
            for rule in table.rules:
                plain.append((expr.name, rule.input_entries[j]))
        else:
            for var in sorted(ast.free_variables(expr)):
                opaque.append((var, feel.render(expr)))
    return plain, opaque


def _test_as_exprs(var: str, test: ast.UnaryTest) -> list[ast.FeelExpr]:
    if isinstance(test, ast.EqualsConst) and test.value is not None:
        return [ast.BinOp("=", ast.Var(var), ast.Lit(test.value))]
    if isinstance(test, ast.Comparison):
        return [ast.BinOp(test.op, ast.Var(var), test.operand)]
    if isinstance(test, ast.RangeTest):
        r = test.range
        return [ast.InTest(ast.Var(var),
                           ast.RangeLit(ast.Lit(r.lo), ast.Lit(r.hi), r.lo_incl, r.hi_incl))]
    if isinstance(test, ast.Negation):
        return _test_as_exprs(var, test.inner)
    if isinstance(test, ast.Disjunction):
        out = []
        for alt in test.alternatives:
            out.extend(_test_as_exprs(var, alt))
        return out
    return []


def _infer_variable_types(model, table_by_ref, roles, diagnostics) -> dict[str, StaticType]:
    evidence = list(_iter_expressions(model, table_by_ref))
    for node in model.nodes:
        if node.kind == "business_rule_task":
            plain, _ = _cell_facts(node, table_by_ref)
            for var, test in plain:
                evidence.extend(_test_as_exprs(var, test))
    types = feel.infer_types(evidence)
    for name in roles:
        types.setdefault(name, StaticType.UNKNOWN)

    # propagate assignment types to a fixpoint (the lattice is tiny)
    for _ in range(10):
        changed = False

        def note(name, t):
            nonlocal changed
            joined = feel.types.join(types.get(name, StaticType.UNKNOWN), t, name)
            if joined is not types.get(name):
                types[name] = joined
                changed = True

        send_part_types: dict[tuple[str, str, str], StaticType] = {}
        for node in model.nodes:
            if node.kind == "send_task":
                for part, expr in node.send_parts:
                    send_part_types[(node.channel, node.msg_type, part)] = \
                        feel.synthesize(expr, types)
        for node in model.nodes:
            if node.kind in ("script_task", "service_task"):
                note(node.target, feel.synthesize(node.expr, types))
            elif node.kind == "business_rule_task":
                table = table_by_ref.get(node.table_ref)
                if table is None:
                    continue
                out_map = node.output_map or tuple((o, o) for o in table.outputs)
                for out_name, var in out_map:
                    col = table.outputs.index(out_name)
                    for rule in table.rules:
                        value = feel.evaluate(rule.output_entries[col], {})
                        if value is not None:
                            note(var, feel.type_of_constant(value))
            elif node.kind == "receive_task":
                for part, var in node.receive_parts:
                    t = send_part_types.get((node.channel, node.msg_type, part))
                    if t is not None:
                        note(var, t)
        if not changed:
            break

    annotated = set()
    for node in model.nodes:
        annotated.update(node.writes)
        annotated.update(node.reads)
        if node.target:
            annotated.add(node.target)
    for name, t in list(types.items()):
        if t is StaticType.UNKNOWN:
            if name not in annotated:
                diagnostics.append(f"variable {name!r} has no type evidence and no "
                                   f"annotation; compiled as String")
            types[name] = StaticType.STRING
    return types


def _infer_input_domains(model, table_by_ref, roles):
    input_vars = {n for n, role in roles.items() if role.role == "input"}
    facts = []
    for expr in _iter_expressions(model, table_by_ref):
        facts.extend(inputs_mod.facts_from_expr(expr, input_vars))
    for node in model.nodes:
        if node.kind != "business_rule_task":
            continue
        plain, opaque = _cell_facts(node, table_by_ref)
        for var, test in plain:
            if var in input_vars:
                facts.extend(inputs_mod.facts_from_unary_test(var, test))
        for var, source in opaque:
            if var in input_vars:
                facts.append((var, inputs_mod._Fact("other", source=source)))
    return inputs_mod.infer_domains(input_vars, facts)


# --- readable source ---------------------------------------------------------

def render_source(x: ExecutableModel) -> str:
    """Human-readable imperative rendering of the executable model, one
    procedure per routine plus the init/execute/main preamble."""
    out: list[str] = [f"model {x.process_id} \"{x.name}\"", ""]
    out.append("inputs:")
    for spec in x.input_vars:
        out.append(f"  {spec.name} : {spec.static_type} : "
                   f"{inputs_mod.render_domain(spec.domain)}")
    out.append("process variables:")
    for name, static_type in x.process_vars:
        out.append(f"  {name} : {static_type}")
    out.append("")

    unique_tables = {table.id: table for table in x.tables.values()}
    for table_id in sorted(unique_tables):
        table = unique_tables[table_id]
        out.append(f"table {table.id} \"{table.name}\" hit policy {table.hit_policy}")
        out.append("  inputs:  " + ", ".join(f"{label} = {feel.render(expr)}"
                                             for label, expr in table.inputs))
        out.append("  outputs: " + ", ".join(table.outputs))
        for i, rule in enumerate(table.rules, start=1):
            cells = ", ".join(feel.render_unary_test(t) for t in rule.input_entries)
            assigns = ", ".join(f"{name} := {feel.render(e)}"
                                for name, e in zip(table.outputs, rule.output_entries))
            out.append(f"  rule {i}: [{cells}] -> {assigns}")
        out.append("")

    for node_id, _ in x.graph.nodes:  # document order
        routine = x.routines[node_id]
        out.append(f"proc {routine.display_name}:")
        for step in routine.steps:
            out.extend("  " + line for line in _render_step(step, x))
        out.append("")

    out.append("init: every variable := undefined")
    out.append(f"execute: call {x.routines[x.entry].display_name}")
    out.append("main: init; execute")
    out.append("")
    return "\n".join(out)


def _render_step(step: Step, x: ExecutableModel) -> list[str]:
    name = lambda node_id: x.routines[node_id].display_name
    if isinstance(step, ConsumeInput):
        return [f"{step.var} := next input value for {step.var}"]
    if isinstance(step, Assign):
        return [f"{step.var} := {feel.render(step.expr)}"]
    if isinstance(step, InvokeTable):
        args = ", ".join(f"{label} := {feel.render(e)}" for label, e in step.arg_bindings)
        outs = ", ".join(f"{var} := {out}" for out, var in step.out_bindings)
        return [f"result := {step.table_ref}({args})", f"unpack {outs}"]
    if isinstance(step, Send):
        parts = ", ".join(f"{p} := {feel.render(e)}" for p, e in step.parts)
        return [f"send {step.msg_type}({parts}) on channel {step.channel}"]
    if isinstance(step, Receive):
        parts = ", ".join(f"{var} := {p}" for p, var in step.targets)
        return [f"receive {step.msg_type} from channel {step.channel}; {parts}"]
    if isinstance(step, Branch):
        lines = [f"if {feel.render(cond)}: call {name(target)}"
                 for cond, target in step.cases]
        if step.default is not None:
            lines.append(f"else: call {name(step.default)}  (default)")
        else:
            lines.append("else: fail \"unhandled condition\"")
        return lines
    if isinstance(step, Fork):
        if step.conditions is None:
            branches = ", ".join(name(t) for t in step.targets)
            return [f"fork {branches}; join at {name(step.join_id)}"]
        branches = ", ".join(f"{name(t)} if {feel.render(c)}"
                             for t, c in zip(step.targets, step.conditions))
        return [f"fork {branches}; join at {name(step.join_id)}"]
    if isinstance(step, JoinBarrier):
        return [f"await all branches; call {name(step.next)}"]
    if isinstance(step, Continue):
        return [f"call {name(step.target)}"]
    if isinstance(step, Terminate):
        return [f"end {step.status} code={step.code} message=\"{step.message}\""]
    raise TypeError(step)
