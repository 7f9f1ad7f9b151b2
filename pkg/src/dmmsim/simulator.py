"""Replay loop and multi-DMM comparison reports.

The event index is the simulation clock. A replay is strictly sequential;
distinct replays may run concurrently over the shared immutable trace, one
DMM and one Metrics accumulator each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .allocators import SpecError
from .manager import DMM, DMMSpec, SimulationAbort, compose_dmm
from .metrics import EnergyModel, FitnessWeights, Metrics, energy, fitness, normalized_report
from .trace import MALLOC, Trace


class BudgetExceeded(SimulationAbort):
    """Replay ran past its time-unit budget (search-time guard)."""


@dataclass
class SimulationResult:
    metrics: Metrics
    final_snapshot: dict
    energy: float
    fitness_vs_baseline: float | None = None

    def as_dict(self) -> dict:
        doc = {
            "metrics": self.metrics.as_dict(),
            "energy": self.energy,
            "fitness": self.fitness_vs_baseline,
            "snapshot": self.final_snapshot,
        }
        return doc


def simulate(trace: Trace, spec: DMMSpec, model: EnergyModel | None = None,
             weights: FitnessWeights | None = None, baseline: Metrics | None = None,
             time_unit_cap: int | None = None) -> SimulationResult:
    """Replay the trace through a freshly composed DMM.

    Raises SimulationAbort (naming the event index) when a request exceeds
    the composed maximum or the optional time budget runs out.
    """
    model = model or EnergyModel()
    dmm = compose_dmm(spec)
    malloc, free = dmm.malloc, dmm.free
    cap = time_unit_cap
    for i, ev in enumerate(trace.events):
        if ev.kind == MALLOC:
            try:
                malloc(ev.object_id, ev.size_in_b, i)
            except SpecError as exc:
                raise SimulationAbort(i, str(exc)) from exc
        else:
            free(ev.object_id, i)
        if cap is not None and dmm.metrics.time_units > cap:
            raise BudgetExceeded(i, f"time budget {cap} exceeded")
    m = dmm.collect_metrics()
    fit = None
    if baseline is not None:
        fit = fitness(m, baseline, weights or FitnessWeights(), model)
    return SimulationResult(m, dmm.snapshot(), energy(m, model), fit)


COMPARE_COLUMNS = ("name", "timeUnits", "memAccesses", "hwmBytes", "energy", "fitness",
                   "timeRatio", "accessRatio", "memoryRatio", "energyRatio", "fitnessRatio")


def compare(trace: Trace, named_specs: list[tuple[str, DMMSpec]],
            baseline_name: str, model: EnergyModel | None = None,
            weights: FitnessWeights | None = None, parallel: bool = False) -> dict:
    """Simulate every candidate once and normalize against the named baseline.

    A candidate that aborts is reported with its error and no ratios; the
    run continues. With parallel=True candidates replay concurrently, each
    with its own DMM and accumulator over the shared immutable trace; the
    report is identical either way.
    """
    model = model or EnergyModel()
    weights = weights or FitnessWeights()
    names = [n for n, _ in named_specs]
    if baseline_name not in names:
        raise SpecError(f"baseline {baseline_name!r} is not among {names}")

    def one(spec: DMMSpec) -> SimulationResult | str:
        try:
            return simulate(trace, spec, model)
        except SimulationAbort as exc:
            return str(exc)

    results: dict[str, SimulationResult | str] = {}
    if parallel:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=min(8, len(named_specs))) as pool:
            futures = [(name, pool.submit(one, spec)) for name, spec in named_specs]
        for name, fut in futures:
            results[name] = fut.result()
    else:
        for name, spec in named_specs:
            results[name] = one(spec)
    base = results[baseline_name]
    if isinstance(base, str):
        raise SimulationAbort(-1, f"baseline {baseline_name!r} failed: {base}")
    rows = []
    ok = [(n, r) for n, r in results.items() if isinstance(r, SimulationResult)]
    reports = normalized_report(base.metrics, [r.metrics for _, r in ok], model, weights)
    by_name = {n: rep for (n, _), rep in zip(ok, reports)}
    for name, _ in named_specs:
        res = results[name]
        if isinstance(res, str):
            rows.append({"name": name, "error": res})
            continue
        rep = by_name[name]
        rows.append({
            "name": name,
            "timeUnits": res.metrics.time_units,
            "memAccesses": res.metrics.mem_accesses,
            "hwmBytes": res.metrics.hwm_bytes,
            "energy": rep["energy"],
            "fitness": rep["fitness"],
            "timeRatio": rep["ratios"]["time"],
            "accessRatio": rep["ratios"]["accesses"],
            "memoryRatio": rep["ratios"]["memory"],
            "energyRatio": rep["ratios"]["energy"],
            "fitnessRatio": rep["ratios"]["fitness"],
            "improvementPct": rep["improvementPct"],
            "metrics": res.metrics.as_dict(),
        })
    return {"baseline": baseline_name, "rows": rows}


def compare_csv(report: dict) -> str:
    """Fixed-column CSV of a compare report (one row per candidate)."""
    lines = [",".join(COMPARE_COLUMNS)]
    for row in report["rows"]:
        if "error" in row:
            lines.append(f"{row['name']},ERROR: {row['error']}" + "," * (len(COMPARE_COLUMNS) - 2))
            continue
        cells = [row["name"]]
        for col in COMPARE_COLUMNS[1:]:
            v = row[col]
            if isinstance(v, float):
                cells.append("inf" if math.isinf(v) else f"{v:.6g}")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
