"""Plot-ready report tables with JSON / CSV serialisation."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any

COLUMNS = ("name", "value", "stderr", "bound", "pass")


def round_sig(value: Any, digits: int = 12) -> Any:
    """Round floats to ``digits`` significant digits, recursing into containers."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        if not math.isfinite(value) or value == 0.0:
            return value
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: round_sig(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_sig(v, digits) for v in value]
    if hasattr(value, "item"):  # numpy scalar
        return round_sig(value.item(), digits)
    return value


@dataclass
class Row:
    name: str
    value: float | None
    stderr: float | None = None
    bound: float | None = None
    passed: bool | None = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "name": self.name,
            "value": self.value,
            "stderr": self.stderr,
            "bound": self.bound,
            "pass": self.passed,
        }
        out.update(self.extra)
        return out


@dataclass
class Report:
    experiment: str
    params: dict
    seed: int | None
    rows: list[Row] = field(default_factory=list)

    def add(self, name, value, stderr=None, bound=None, passed=None, **extra) -> Row:
        row = Row(name, value, stderr, bound, None if passed is None else bool(passed), extra)
        self.rows.append(row)
        return row

    def row(self, name: str) -> Row:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def value(self, name: str) -> float:
        return self.row(name).value

    @property
    def ok(self) -> bool:
        return all(r.passed is not False for r in self.rows)

    def as_dict(self, deterministic: bool = True) -> dict:
        out = {
            "experiment": self.experiment,
            "params": self.params,
            "seed": self.seed,
            "rows": [r.as_dict() for r in self.rows],
        }
        if not deterministic:
            out["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        return round_sig(out)

    def to_json(self, deterministic: bool = True) -> str:
        return json.dumps(self.as_dict(deterministic), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        columns = list(COLUMNS)
        for r in self.rows:
            columns += [c for c in r.extra if c not in columns]
        writer.writerow(columns)
        for r in self.rows:
            d = round_sig(r.as_dict())
            writer.writerow(["" if d.get(c) is None else d[c] for c in columns])
        return buf.getvalue()
