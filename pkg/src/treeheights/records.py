"""Experiment records and deterministic CSV/JSON serialization.

Exact quantities are serialized losslessly as ``p/q`` rational strings;
floating quantities use 17 significant digits.  Output files never
contain wall-clock data, so identical configurations and seeds yield
byte-identical files; timing is reported on stderr instead.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence


@dataclass
class ExperimentRecord:
    experiment: str
    values: dict

    def row(self, columns: Sequence[str]) -> list:
        return [self.values.get(c) for c in columns]


def format_cell(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def _json_ready(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (list, tuple)):
        return [_json_ready(x) for x in v]
    if isinstance(v, Mapping):
        return {str(k): _json_ready(x) for k, x in v.items()}
    return v


def render_records(config: Mapping, columns: Sequence[str],
                   records: Sequence[ExperimentRecord], fmt: str) -> bytes:
    """Render to canonical bytes (UTF-8, LF line endings)."""
    if fmt == "json":
        payload = {
            "config": _json_ready(dict(config)),
            "columns": list(columns),
            "records": [
                {"experiment": r.experiment,
                 **{c: _json_ready(r.values.get(c)) for c in columns}}
                for r in records
            ],
        }
        return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    cfg = json.dumps(_json_ready(dict(config)), sort_keys=True,
                     separators=(",", ":"))
    buf.write(f"# config {cfg}\n")
    buf.write(",".join(["experiment", *columns]) + "\n")
    for r in records:
        cells = [r.experiment] + [format_cell(v) for v in r.row(columns)]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue().encode()


def write_records(path, config: Mapping, columns: Sequence[str],
                  records: Sequence[ExperimentRecord], fmt: str) -> bytes:
    data = render_records(config, columns, records, fmt)
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data
