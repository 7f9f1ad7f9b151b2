"""Simulation counters, the linear energy model, and baseline-normalized
fitness/reporting.

Counter merging (for parallel runners): counters add field-wise, peaks
(hwmBytes, internalFragBytes) take the max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields


@dataclass(slots=True)
class Metrics:
    time_units: int = 0
    mem_accesses: int = 0
    malloc_count: int = 0
    free_count: int = 0
    split_count: int = 0
    coalesce_count: int = 0
    invalid_mallocs: int = 0
    invalid_frees: int = 0
    hwm_bytes: int = 0
    internal_frag_bytes: int = 0  # peak of live (block - header - requested)
    external_frag_events: int = 0
    external_frag_wasted_bytes: int = 0
    farthest_fallbacks: int = 0

    _PEAKS = ("hwm_bytes", "internal_frag_bytes")

    def merge(self, other: "Metrics") -> "Metrics":
        out = Metrics()
        for f in fields(Metrics):
            a, b = getattr(self, f.name), getattr(other, f.name)
            setattr(out, f.name, max(a, b) if f.name in Metrics._PEAKS else a + b)
        return out

    def as_dict(self) -> dict:
        return {
            "timeUnits": self.time_units,
            "memAccesses": self.mem_accesses,
            "mallocCount": self.malloc_count,
            "freeCount": self.free_count,
            "splitCount": self.split_count,
            "coalesceCount": self.coalesce_count,
            "invalidMallocs": self.invalid_mallocs,
            "invalidFrees": self.invalid_frees,
            "hwmBytes": self.hwm_bytes,
            "internalFragBytes": self.internal_frag_bytes,
            "externalFragEvents": self.external_frag_events,
            "externalFragWastedBytes": self.external_frag_wasted_bytes,
            "farthestFallbacks": self.farthest_fallbacks,
        }


@dataclass(frozen=True)
class EnergyModel:
    """Linear energy form over accesses, time, and the memory high-water mark.

    The default coefficients are fixed package defaults, not calibrated
    hardware constants.
    """

    e_access: float = 1.0
    e_per_time_unit: float = 0.5
    e_per_byte: float = 1e-4

    def __post_init__(self):
        if min(self.e_access, self.e_per_time_unit, self.e_per_byte) < 0:
            raise ValueError("energy coefficients must be >= 0")


@dataclass(frozen=True)
class FitnessWeights:
    w_time: float = 1 / 3
    w_memory: float = 1 / 3
    w_energy: float = 1 / 3

    def __post_init__(self):
        if min(self.w_time, self.w_memory, self.w_energy) < 0:
            raise ValueError("weights must be >= 0")
        total = self.w_time + self.w_memory + self.w_energy
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"weights must sum to 1, got {total}")

    @staticmethod
    def normalized(w_time: float, w_memory: float, w_energy: float) -> "FitnessWeights":
        total = w_time + w_memory + w_energy
        if total <= 0:
            raise ValueError("weights must have a positive sum")
        return FitnessWeights(w_time / total, w_memory / total, w_energy / total)


def energy(m: Metrics, model: EnergyModel = EnergyModel()) -> float:
    return (model.e_access * m.mem_accesses
            + model.e_per_time_unit * m.time_units
            + model.e_per_byte * m.hwm_bytes)


def fitness(m: Metrics, baseline: Metrics, w: FitnessWeights = FitnessWeights(),
            model: EnergyModel = EnergyModel()) -> float:
    """Weighted sum of baseline-normalized time, memory, and energy.

    Lower is better; a candidate equal to the baseline scores exactly 1.
    """
    base_e = energy(baseline, model)
    if baseline.time_units <= 0 or baseline.hwm_bytes <= 0 or base_e <= 0:
        raise ValueError("baseline time, memory, and energy must be positive")
    return (w.w_time * m.time_units / baseline.time_units
            + w.w_memory * m.hwm_bytes / baseline.hwm_bytes
            + w.w_energy * energy(m, model) / base_e)


def _ratio(base: float, cand: float) -> float:
    if cand == 0:
        return math.inf
    return base / cand


def normalized_report(baseline: Metrics, candidates: list[Metrics],
                      model: EnergyModel = EnergyModel(),
                      w: FitnessWeights = FitnessWeights()) -> list[dict]:
    """Per-candidate ratios baseline/candidate, so > 1 means better than the
    baseline; the global fitness is reported as 1/F in the same orientation.
    Zero candidate components flag the ratio as infinite.
    """
    rows = []
    for m in candidates:
        cand_e = energy(m, model)
        f = fitness(m, baseline, w, model)
        ratios = {
            "time": _ratio(baseline.time_units, m.time_units),
            "accesses": _ratio(baseline.mem_accesses, m.mem_accesses),
            "memory": _ratio(baseline.hwm_bytes, m.hwm_bytes),
            "energy": _ratio(energy(baseline, model), cand_e),
            "fitness": _ratio(1.0, f),
        }
        rows.append({
            "metrics": m.as_dict(),
            "energy": cand_e,
            "fitness": f,
            "ratios": ratios,
            "improvementPct": {k: (1.0 - 1.0 / v) * 100.0 if v not in (0.0, math.inf)
                               else (100.0 if v == math.inf else -math.inf)
                               for k, v in ratios.items()},
            "infiniteRatios": sorted(k for k, v in ratios.items() if v == math.inf),
        })
    return rows
