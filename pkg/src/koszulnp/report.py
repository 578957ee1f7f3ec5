"""Report assembly: criteria, cell tables and audit dumps."""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Iterable

from .koszul import koszul_differential
from .verify import KoszulEngine, field_label


@dataclass
class Criterion:
    name: str
    passed: bool
    detail: str = ""
    predicted: bool | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "status": "PASS" if self.passed else "FAIL"}
        if self.detail:
            out["detail"] = self.detail
        if self.predicted is not None:
            out["theorem_predicts_pass"] = self.predicted
        return out


@dataclass
class VerificationReport:
    command: str
    config: dict
    instance: dict = dc_field(default_factory=dict)
    results: dict = dc_field(default_factory=dict)
    criteria: list[Criterion] = dc_field(default_factory=list)
    cells: list[dict] = dc_field(default_factory=list)
    engine: dict = dc_field(default_factory=dict)
    notes: list[str] = dc_field(default_factory=list)
    betti_ascii: str | None = None
    error: dict | None = None
    audit: str | None = None

    def add(self, name: str, passed: bool, detail: str = "", predicted: bool | None = None) -> Criterion:
        c = Criterion(name, bool(passed), detail, predicted)
        self.criteria.append(c)
        return c

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.criteria)

    @property
    def predicted_failures(self) -> list[Criterion]:
        return [c for c in self.criteria if not c.passed and c.predicted]

    def to_json(self, timings: bool = True) -> dict:
        cells = self.cells if timings else [
            {k: v for k, v in c.items() if k not in ("seconds", "cached")} for c in self.cells]
        out: dict[str, Any] = {
            "command": self.command,
            "config": self.config,
            "instance": self.instance,
            "results": self.results,
            "criteria": [c.to_json() for c in self.criteria],
            "cells": cells,
            "engine": self.engine,
            "status": "PASS" if self.passed else "FAIL",
        }
        if self.notes:
            out["notes"] = self.notes
        if self.betti_ascii is not None:
            out["betti_ascii"] = self.betti_ascii
        if self.error is not None:
            out["error"] = self.error
        if self.audit is not None:
            out["audit_dump"] = self.audit
        return out

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n")

    def summary(self) -> str:
        lines = [f"{self.command}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.criteria:
            tag = "PASS" if c.passed else "FAIL"
            lines.append(f"  [{tag}] {c.name}" + (f": {c.detail}" if c.detail else ""))
        if self.error:
            lines.append(f"  error ({self.error['class']}): {self.error['message']}")
        return "\n".join(lines)


def cell_rows(engine: KoszulEngine, dims: dict[tuple[int, int], int]) -> list[dict]:
    """One entry per (i, q) with the two differentials that determine it."""
    records = engine.records()
    out = []
    for (i, q) in sorted(dims):
        entry = {"i": i, "q": q, "dim": dims[(i, q)]}
        for label, key in (("d_out", (i, q)), ("d_in", (i + 1, q - 1))):
            rec = records.get(key)
            if rec is not None:
                entry[label] = {"p": key[0], "q": key[1], "shape": list(rec.shape),
                                "rank": rec.rank}
                entry.setdefault("seconds", 0.0)
                entry["seconds"] = round(entry["seconds"] + rec.seconds, 4)
                entry["cached"] = entry.get("cached", False) or rec.cached
        out.append(entry)
    return out


def engine_summary(engine: KoszulEngine) -> dict:
    meta = engine.meta
    return {
        "fields": [field_label(f) for f in engine.fields],
        "route": engine.opts.route,
        "reductions_applied": meta["reductions"],
        "reduction_stopped_at_degree": meta["reduction_failure"],
        "working_module": {"n_gens": meta["n_gens"], "dims": list(meta["dims"])},
        "matrices_compared_across_fields": engine.matrices_compared() if len(engine.fields) > 1 else 0,
        "dd_checked_cells": engine.dd_cells,
        "dd_checked_columns": engine.dd_columns,
    }


def audit_dump(engine: KoszulEngine, cells: Iterable[tuple[int, int]], directory: str | Path) -> str:
    """Write every differential touching the failing cells, per field, as sparse triples."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for inst in engine.instances:
        M = inst.module
        tag = field_label(inst.field)
        for i, q in cells:
            for p, qq in ((i, q), (i + 1, q - 1)):
                if p < 1 or qq < 0 or p > M.n_gens:
                    continue
                D = koszul_differential(M, p, qq)
                payload = {"field": tag, "route": engine.opts.route,
                           "reductions": engine.meta["reductions"], "p": p, "q": qq, "shape": [D.n_rows, D.n_cols],
                           "entries": [[r, c, str(v)] for r, c, v in D.entries()],
                           "module_dims": list(M.dims)}
                (directory / f"d_{p}_{qq}_{tag}.json").write_text(json.dumps(payload))
    return str(directory)
