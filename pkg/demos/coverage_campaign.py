#!/usr/bin/env python3
"""Run the three campaign modes against bundled fixtures.

Fixed budget on Shipment shows coverage accumulating over random inputs;
error seeking on Triage finds the rejected path quickly and points at a
replayable witness; statistical model checking sizes its own budget from
the (epsilon, delta) contract."""

import pathlib
import tempfile

from bproc import (CampaignConfig, ErrorSeek, FixedBudget, Smc, compile_model,
                   parse_bpmn, parse_dmn, run_campaign, smc_sample_size)

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def compiled(name, *dmn_names):
    model = parse_bpmn((FIXTURES / f"{name}.bpmn").read_bytes())
    tables = []
    for dmn in dmn_names:
        tables.extend(parse_dmn((FIXTURES / f"{dmn}.dmn").read_bytes()))
    return compile_model(model, tables, sample_seed=42)


shipment = compiled("shipment", "shipment")
verdict = run_campaign(shipment, CampaignConfig(mode=FixedBudget(n=1000), seed=42,
                                                sequential=True))
print(f"[fixed budget] {verdict.result}: {verdict.reason}")
print(f"               mean run {verdict.mean_run_ms:.3f} ms, "
      f"stddev {verdict.stddev_run_ms:.3f} ms")

triage = compiled("triage")
with tempfile.TemporaryDirectory() as out_dir:
    verdict = run_campaign(triage, CampaignConfig(mode=ErrorSeek(n=50), seed=7,
                                                  sequential=True), out_dir=out_dir)
    print(f"[error seek]   {verdict.result}: {verdict.reason}")
    print(f"               witness: {verdict.failing_trace}")

n = smc_sample_size(0.01, 0.01)
print(f"[smc]          epsilon=delta=0.01 requires {n} clean runs")
verdict = run_campaign(shipment, CampaignConfig(mode=Smc(epsilon=0.01, delta=0.01),
                                                seed=42, sequential=True))
print(f"[smc]          {verdict.result}: {verdict.reason}")
