"""Verification campaigns: repeated randomized runs, node/edge coverage
against the process graph, and three stopping rules.

  fixed budget   up to n runs, early stop once the threshold combiner holds
  error seeking  up to n runs, stop (and fail) as soon as a run fails
  smc            the sample count comes from the (epsilon, delta) contract;
                 a FAIL verdict is always backed by a concrete witness run,
                 so only type-I (wrong PASS) errors are possible

Runs may be dispatched to a bounded thread pool; the coverage accumulator
is the single synchronization point.
"""

from __future__ import annotations

import json
import math
import os
import random
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from . import inputs as inputs_mod, runtime
from .bpmn import ProcessGraph
from .compiler import ExecutableModel
from .errors import ConfigError, MissingOverrideError, UnknownIdError


@dataclass(frozen=True)
class CoverageReport:
    visited_nodes: frozenset[str] = frozenset()
    visited_edges: frozenset[tuple[str, str]] = frozenset()
    total_nodes: int = 0
    total_edges: int = 0
    runs_executed: int = 0

    @property
    def c_n(self) -> float:
        return 100.0 * len(self.visited_nodes) / self.total_nodes if self.total_nodes else 0.0

    @property
    def c_e(self) -> float:
        return 100.0 * len(self.visited_edges) / self.total_edges if self.total_edges else 0.0


def empty_report(graph: ProcessGraph) -> CoverageReport:
    # the denominators are the extracted graph's node and flow counts; visited
    # edges are (source, target) pairs, so parallel flows between one node
    # pair can never be told apart in a trace and cap C_e below 100
    return CoverageReport(total_nodes=len(graph.nodes),
                          total_edges=len(graph.edges))


def accumulate_coverage(report: CoverageReport, trace: runtime.Trace,
                        graph: ProcessGraph) -> CoverageReport:
    """Union the trace's nodes and edges into the report.

    Raises UnknownIdError when the trace mentions anything outside the
    graph; that signals a compiler/runtime mismatch, not bad luck.
    """
    node_ids = {node_id for node_id, _ in graph.nodes}
    edge_set = graph.distinct_edges()
    nodes = set(trace.node_sequence())
    edges = set(trace.edges())
    stray_nodes = nodes - node_ids
    stray_edges = edges - edge_set
    if stray_nodes or stray_edges:
        raise UnknownIdError(f"trace mentions unknown nodes {sorted(stray_nodes)} "
                             f"or edges {sorted(stray_edges)}")
    return replace(report,
                   visited_nodes=report.visited_nodes | nodes,
                   visited_edges=report.visited_edges | edges,
                   runs_executed=report.runs_executed + 1)


# --- configuration -----------------------------------------------------------

COMBINERS = ("and", "or", "nodes", "edges")


@dataclass(frozen=True)
class FixedBudget:
    n: int = 1000
    theta_nodes: float = 0.0
    theta_edges: float = 0.0
    combiner: str = "and"


@dataclass(frozen=True)
class ErrorSeek:
    n: int = 1000


@dataclass(frozen=True)
class Smc:
    epsilon: float = 0.01
    delta: float = 0.01
    property: str = "no-error"  # "no-error" | "coverage-unreachable"
    theta_nodes: float = 0.0
    theta_edges: float = 0.0
    combiner: str = "and"


@dataclass(frozen=True)
class CampaignConfig:
    mode: FixedBudget | ErrorSeek | Smc = field(default_factory=FixedBudget)
    timeout_s: float = runtime.DEFAULT_TIMEOUT_S
    seed: int = 0
    sequential: bool = False
    parallel_runners: int = 1

    def __post_init__(self):
        mode = self.mode
        if isinstance(mode, (FixedBudget, ErrorSeek)) and mode.n < 1:
            raise ConfigError("the run budget n must be at least 1")
        if isinstance(mode, Smc) and not (0 < mode.epsilon < 1 and 0 < mode.delta < 1):
            raise ConfigError("epsilon and delta must lie in (0, 1)")
        if isinstance(mode, (FixedBudget, Smc)):
            if mode.combiner not in COMBINERS:
                raise ConfigError(f"unknown combiner {mode.combiner!r}")
            for theta in (mode.theta_nodes, mode.theta_edges):
                if not 0 <= theta <= 100:
                    raise ConfigError("coverage thresholds must lie in [0, 100]")
        if self.parallel_runners < 1:
            raise ConfigError("parallel_runners must be at least 1")


@dataclass
class Verdict:
    result: str  # "PASS" | "FAIL"
    reason: str
    coverage: CoverageReport
    failing_trace: str | None = None
    mean_run_ms: float = 0.0
    stddev_run_ms: float = 0.0

    def to_json(self) -> str:
        return json.dumps({
            "result": self.result,
            "reason": self.reason,
            "c_n": round(self.coverage.c_n, 3),
            "c_e": round(self.coverage.c_e, 3),
            "runs": self.coverage.runs_executed,
            "mean_run_ms": round(self.mean_run_ms, 3),
            "stddev_run_ms": round(self.stddev_run_ms, 3),
            "failing_trace": self.failing_trace,
        }, indent=2) + "\n"


def smc_sample_size(epsilon: float, delta: float) -> int:
    """Smallest N with (1 - epsilon)^N <= delta: if a violating run has
    probability at least epsilon, N clean runs occur with probability at
    most delta."""
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ConfigError("epsilon and delta must lie in (0, 1)")
    n = max(1, math.ceil(math.log(delta) / math.log(1.0 - epsilon)))
    while (1.0 - epsilon) ** n > delta:  # guard against float rounding at the edge
        n += 1
    while n > 1 and (1.0 - epsilon) ** (n - 1) <= delta:
        n -= 1
    return n


def _thresholds_hold(mode, report: CoverageReport) -> bool:
    nodes_ok = report.c_n >= mode.theta_nodes
    edges_ok = report.c_e >= mode.theta_edges
    return {"and": nodes_ok and edges_ok,
            "or": nodes_ok or edges_ok,
            "nodes": nodes_ok,
            "edges": edges_ok}[mode.combiner]


def _meaningful_thresholds(mode) -> bool:
    # A zero threshold asks for nothing; early stopping on it would cut the
    # campaign after the first run.
    if mode.combiner == "nodes":
        return mode.theta_nodes > 0
    if mode.combiner == "edges":
        return mode.theta_edges > 0
    if mode.combiner == "or":
        return mode.theta_nodes > 0 and mode.theta_edges > 0
    return mode.theta_nodes > 0 or mode.theta_edges > 0


@dataclass
class _RunResult:
    index: int
    trace: runtime.Trace
    summary: runtime.RunSummary


def draw_input_lists(specs: list[inputs_mod.InputSpec],
                     overrides: dict[str, list],
                     rng: random.Random) -> dict[str, list]:
    """One fresh random value per input variable (loops reuse that value)."""
    lists = {}
    for spec in specs:
        value = inputs_mod.sample_domain(spec.domain, spec.static_type, rng,
                                         overrides.get(spec.name), spec.name)
        lists[spec.name] = [value]
    return lists


def run_campaign(model: ExecutableModel, cfg: CampaignConfig,
                 overrides: dict[str, list] | None = None,
                 out_dir: str | None = None) -> Verdict:
    """Drive repeated runs per the configured stopping rule.

    Per-run faults and error outcomes are data, not campaign errors. When
    out_dir is given, each run's trace and summary land under
    runs/run_<k>.{trace,out} for replay and audit.
    """
    overrides = overrides or {}
    for spec in model.input_vars:
        if isinstance(spec.domain, inputs_mod.UnhandledDomain) \
                and not overrides.get(spec.name):
            raise MissingOverrideError(spec.name)

    mode = cfg.mode
    if isinstance(mode, Smc):
        budget = smc_sample_size(mode.epsilon, mode.delta)
    else:
        budget = mode.n

    report = empty_report(model.graph)
    durations_ms: list[float] = []
    failing: _RunResult | None = None
    stopped_early = False

    def execute(index: int) -> _RunResult:
        run_rng = random.Random(cfg.seed * 1_000_003 + index)
        lists = draw_input_lists(model.input_vars, overrides, run_rng)
        options = runtime.RunOptions(
            mode="sequential" if cfg.sequential else "parallel",
            timeout_s=cfg.timeout_s, seed=index)
        trace, summary = runtime.run_once(model, lists, options)
        return _RunResult(index, trace, summary)

    def consume(result: _RunResult) -> bool:
        """Merge one run; True when the campaign should stop early."""
        nonlocal report, failing
        report = accumulate_coverage(report, result.trace, model.graph)
        durations_ms.append(result.summary.elapsed_s * 1000.0)
        if out_dir is not None:
            runtime.write_artifacts(result.trace, result.summary, model.graph,
                                    out_dir, stem=os.path.join("runs", f"run_{result.index}"),
                                    include_graph=False)
        if isinstance(mode, FixedBudget):
            return _meaningful_thresholds(mode) and _thresholds_hold(mode, report)
        if isinstance(mode, ErrorSeek) or (isinstance(mode, Smc)
                                           and mode.property == "no-error"):
            if result.summary.failed and failing is None:
                failing = result
                return True
            return False
        # smc coverage-unreachable: crossing the thresholds refutes the claim
        if _thresholds_hold(mode, report) and failing is None:
            failing = result
            return True
        return False

    if cfg.parallel_runners <= 1:
        for k in range(budget):
            if consume(execute(k)):
                stopped_early = report.runs_executed < budget
                break
    else:
        chunk = cfg.parallel_runners
        with ThreadPoolExecutor(max_workers=chunk) as pool:
            for base in range(0, budget, chunk):
                indices = range(base, min(base + chunk, budget))
                results = list(pool.map(execute, indices))
                stop = False
                for result in results:  # merge every finished run before stopping
                    stop = consume(result) or stop
                if stop:
                    stopped_early = report.runs_executed < budget
                    break

    verdict = _decide(mode, report, failing, stopped_early)
    if durations_ms:
        verdict.mean_run_ms = statistics.fmean(durations_ms)
        verdict.stddev_run_ms = statistics.stdev(durations_ms) if len(durations_ms) > 1 else 0.0
    if failing is not None and out_dir is not None:
        verdict.failing_trace = os.path.join("runs", f"run_{failing.index}.trace")
    if out_dir is not None:
        with open(os.path.join(out_dir, "verdict.json"), "w", encoding="utf-8") as fh:
            fh.write(verdict.to_json())
    return verdict


def _decide(mode, report: CoverageReport, failing: _RunResult | None,
            stopped_early: bool) -> Verdict:
    c = f"C_n={report.c_n:.1f}%, C_e={report.c_e:.1f}% after {report.runs_executed} runs"
    if isinstance(mode, FixedBudget):
        if _thresholds_hold(mode, report):
            how = "early" if stopped_early else "at budget"
            return Verdict("PASS", f"coverage thresholds reached {how}: {c}", report)
        return Verdict("FAIL", f"coverage thresholds not reached: {c}", report)
    if isinstance(mode, ErrorSeek):
        if failing is not None:
            return Verdict("FAIL", f"run {failing.index} failed: "
                                   f"{failing.summary.status} {failing.summary.code} "
                                   f"({failing.summary.message}); {c}", report)
        return Verdict("PASS", f"no failing run within the budget; {c}", report)
    # Smc
    if mode.property == "no-error":
        if failing is not None:
            return Verdict("FAIL", f"witness run {failing.index} failed: "
                                   f"{failing.summary.status} {failing.summary.code} "
                                   f"({failing.summary.message}); {c}", report)
        return Verdict("PASS", f"no error within the statistical budget "
                               f"(epsilon={mode.epsilon}, delta={mode.delta}); {c}", report)
    if failing is not None:
        return Verdict("FAIL", f"coverage thresholds were reached at run "
                               f"{failing.index}, refuting unreachability; {c}", report)
    return Verdict("PASS", f"statistical: thresholds stayed out of reach "
                           f"(epsilon={mode.epsilon}, delta={mode.delta}); {c}", report)
